fn main() {
    std::process::exit(lseg_cli::run(std::env::args_os()));
}
