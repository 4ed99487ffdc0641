//! Held-out-fold zero-shot benchmark on synthetic scenes.
//!
//! ```text
//! cargo run --release -p lseg-core --example zero_shot -- [seed] [steps]
//! ```

use std::time::Instant;

use lseg_core::eval::{run_zero_shot, ZeroShotBenchmark};

fn main() -> lseg_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut bench = ZeroShotBenchmark::synthetic(seed)?;
    if let Some(steps) = args.next().and_then(|s| s.parse().ok()) {
        bench.train.max_steps = steps;
    }
    let start = Instant::now();
    let report = run_zero_shot(&bench)?;
    print!("{}", report.to_table());
    for f in &report.folds {
        println!("fold {} {:?}: class IoU {:?}", f.fold, f.unseen, f.class_iou);
    }
    println!(
        "ratio to chance: {:.2}x  ({:.1}s)",
        report.mean_miou() / report.mean_chance(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
