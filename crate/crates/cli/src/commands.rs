use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::{Rgb, RgbImage};
use lseg_core::data::{generate, load_dataset, save_dataset};
use lseg_core::embeddings::{load_table_auto, save_table, save_table_text, EmbeddingTable, LabelSet, SyntheticVocabulary};
use lseg_core::eval::{
    ablation_depth, ablation_embed_dim, constant_prediction, evaluate_samples, fb_iou, miou, pixacc,
    zero_shot_fold_eval, AblationSetup, ZeroShotBenchmark, ZeroShotReport,
};
use lseg_core::model::{image_to_dense, load_checkpoint, predict_padded, save_checkpoint, BlockKind, ModelParameters};
use lseg_core::training::{history_csv, train_with_progress};
use lseg_core::Error;
use lseg_service::{label_color, ServiceState};

use crate::settings::Settings;
use crate::{AblateArgs, CliError, CliResult, EvalArgs, GenDataArgs, MakeVocabArgs, PredictArgs, ServeArgs, TrainArgs};

fn require_file(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        })
    }
}

/// The directory `path` will be written into must already exist.
fn require_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => require_file(p),
        _ => Ok(()),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_or_print(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_dimension(params: &ModelParameters<f32>, table: &EmbeddingTable) -> CliResult<()> {
    let expected = params.config().encoder.embed_dim;
    if table.dimension() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: table.dimension(),
        }
        .into());
    }
    Ok(())
}

pub(crate) fn train(a: TrainArgs) -> CliResult<()> {
    if let Some(c) = &a.common.config {
        require_file(c)?;
    }
    require_file(&a.table)?;
    require_file(&a.data)?;
    require_parent(&a.out)?;
    let mut settings = Settings::load(a.common.config.as_deref())?;
    if let Some(seed) = a.common.seed {
        settings.train.seed = seed;
    }
    if let Some(steps) = a.steps {
        settings.train.max_steps = steps;
    }
    let init = match &a.checkpoint {
        Some(path) => {
            if a.block.is_some() || a.depth.is_some() {
                return Err(CliError::Usage(
                    "--block/--depth cannot change the architecture of an existing --checkpoint".into(),
                ));
            }
            require_file(path)?;
            load_checkpoint(path)?
        }
        None => {
            if let Some(kind) = a.block {
                settings.model.regularizer.kind = kind;
            }
            if let Some(depth) = a.depth {
                settings.model.regularizer.depth = depth;
            }
            ModelParameters::init(settings.model, settings.train.seed)?
        }
    };
    let table = load_table_auto(&a.table)?;
    check_dimension(&init, &table)?;
    let data = load_dataset(&a.data)?;
    let total = settings.train.max_steps;
    let outcome = train_with_progress(init, &table, &data, &settings.train, |r| {
        if r.step % 50 == 0 || r.step + 1 == total {
            eprintln!("step {:>5}/{total}  lr {:.6}  loss {:.5}", r.step + 1, r.lr, r.loss);
        }
    })?;
    save_checkpoint(&outcome.params, &a.out)?;
    let history = a.out.with_extension("history.csv");
    write(&history, history_csv(&outcome.history))?;
    println!("wrote {} and {}", a.out.display(), history.display());
    Ok(())
}

pub(crate) fn eval(a: EvalArgs) -> CliResult<()> {
    if let Some(c) = &a.common.config {
        require_file(c)?;
    }
    if let Some(out) = &a.out {
        require_parent(out)?;
    }
    match &a.fold {
        Some(fold) => eval_folds(&a, fold),
        None => eval_checkpoint(&a),
    }
}

fn eval_folds(a: &EvalArgs, fold: &str) -> CliResult<()> {
    if a.checkpoint.is_some() || a.data.is_some() {
        return Err(CliError::Usage(
            "--fold runs the synthetic benchmark end to end; it takes no --checkpoint or --data".into(),
        ));
    }
    let mut bench = ZeroShotBenchmark::synthetic(a.common.seed.unwrap_or(0))?;
    if let Some(steps) = a.steps {
        bench.train.max_steps = steps;
    }
    let folds: Vec<usize> = if fold == "all" {
        (0..bench.folds).collect()
    } else {
        vec![fold
            .parse()
            .map_err(|_| CliError::Usage(format!("--fold takes an index or `all`, got `{fold}`")))?]
    };
    let mut report = ZeroShotReport { folds: Vec::new() };
    for f in folds {
        let spec = bench.fold_spec(f)?;
        eprintln!("fold {f}: holding out {}", spec.unseen().join(", "));
        report.folds.push(zero_shot_fold_eval(&bench, &spec)?.0);
    }
    eprint!("{}", report.to_table());
    write_or_print(a.out.as_deref(), &report.to_csv())
}

fn eval_checkpoint(a: &EvalArgs) -> CliResult<()> {
    let missing = |flag: &str| CliError::Usage(format!("eval needs {flag} (or --fold)"));
    let checkpoint = a.checkpoint.as_ref().ok_or_else(|| missing("--checkpoint"))?;
    let table_path = a.table.as_ref().ok_or_else(|| missing("--table"))?;
    let data_path = a.data.as_ref().ok_or_else(|| missing("--data"))?;
    for p in [checkpoint, table_path, data_path] {
        require_file(p)?;
    }
    let params = load_checkpoint(checkpoint)?;
    let table = load_table_auto(table_path)?;
    check_dimension(&params, &table)?;
    let data = load_dataset(data_path)?;
    let truth = &data[0].label_set;
    let query = match &a.labels {
        Some(l) => LabelSet::parse(l)?,
        None => truth.clone(),
    };
    let truth_to_query = truth
        .iter()
        .map(|l| {
            query
                .index_of(l)
                .ok_or_else(|| Error::LabelSet(format!("dataset label `{l}` is missing from --labels")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cm = evaluate_samples(&params, &data, &table, &query, &truth_to_query)?;
    let report = miou(&cm)?;
    let other = query.other_index();
    let foreground: Vec<usize> = (0..query.len()).filter(|&k| Some(k) != other).collect();
    let mut csv = String::from("metric,value\n");
    csv.push_str(&format!("miou,{:.6}\n", report.mean));
    csv.push_str(&format!("pixacc,{:.6}\n", pixacc(&cm)?));
    if let Some(o) = other {
        csv.push_str(&format!("fb_iou,{:.6}\n", fb_iou(&cm, &foreground)?));
        let chance = constant_prediction(&data, query.len(), &truth_to_query, o)?;
        csv.push_str(&format!("chance_miou,{:.6}\n", miou(&chance)?.mean));
    }
    for (label, iou) in query.iter().zip(&report.per_class) {
        if let Some(v) = iou {
            csv.push_str(&format!("iou:{label},{v:.6}\n"));
        }
    }
    write_or_print(a.out.as_deref(), &csv)
}

pub(crate) fn predict(a: PredictArgs) -> CliResult<()> {
    require_file(&a.checkpoint)?;
    require_file(&a.table)?;
    require_file(&a.image)?;
    require_parent(&a.out)?;
    let labels = LabelSet::parse(&a.labels)?;
    let labels = if a.other { labels.with_other_index(Some(0))? } else { labels };
    let params = load_checkpoint(&a.checkpoint)?;
    let table = load_table_auto(&a.table)?;
    check_dimension(&params, &table)?;
    table.resolve(&labels)?;
    let image = image::open(&a.image)
        .map_err(|source| Error::Image {
            path: a.image.clone(),
            source,
        })?
        .to_rgb8();
    let out = predict_padded(&params, &image_to_dense::<f32>(&image), &labels, &table)?;
    let colors: Vec<[u8; 3]> = labels.iter().map(label_color).collect();
    let rendered = RgbImage::from_fn(out.width as u32, out.height as u32, |x, y| {
        Rgb(colors[out.label_at(y as usize, x as usize) as usize])
    });
    rendered.save(&a.out).map_err(|source| Error::Image {
        path: a.out.clone(),
        source,
    })?;
    let total = out.label_map.len() as f64;
    let mut legend = String::from("index\tlabel\tcolor\tfraction\n");
    for (k, label) in labels.iter().enumerate() {
        let c = colors[k];
        let share = out.label_map.iter().filter(|&&v| v as usize == k).count() as f64 / total;
        let mark = if labels.other_index() == Some(k) { " (other)" } else { "" };
        legend.push_str(&format!(
            "{k}\t{label}{mark}\t#{:02x}{:02x}{:02x}\t{share:.4}\n",
            c[0], c[1], c[2]
        ));
    }
    let legend_path = legend_path(&a.out);
    write(&legend_path, &legend)?;
    print!("{legend}");
    Ok(())
}

fn legend_path(out: &Path) -> PathBuf {
    out.with_extension("legend.tsv")
}

pub(crate) fn ablate(a: AblateArgs) -> CliResult<()> {
    if let Some(c) = &a.common.config {
        require_file(c)?;
    }
    if let Some(out) = &a.out {
        require_parent(out)?;
    }
    let mut settings = Settings::load(a.common.config.as_deref())?;
    let seed = a.common.seed.unwrap_or(settings.train.seed);
    settings.train.seed = seed;
    if let Some(steps) = a.steps {
        settings.train.max_steps = steps;
    }
    let texture_table = settings.vocabulary(&[])?;
    let setup = AblationSetup {
        scene: settings.scene(&texture_table, seed)?,
        vocabulary: SyntheticVocabulary::roots(
            settings.vocabulary_words(&[]),
            settings.model.encoder.embed_dim,
            settings.scene.vocab_seed,
        ),
        model: settings.model,
        train: settings.train.clone(),
        train_images: settings.scene.count,
        eval_images: settings.scene.count,
        seed,
    };
    let table = match a.sweep.as_str() {
        "depth" => {
            let kinds: Vec<BlockKind> = match a.block {
                Some(k) => vec![k],
                None => vec![BlockKind::Bottleneck, BlockKind::Depthwise],
            };
            let depths: Vec<usize> = match a.depth {
                Some(d) => vec![d],
                None => vec![0, 1, 2, 4],
            };
            ablation_depth(&setup, &kinds, &depths)?
        }
        "dim" => {
            let dims = a
                .dims
                .split(',')
                .map(|d| d.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Usage(format!("--dims: {e}")))?;
            ablation_embed_dim(&setup, &dims)?
        }
        other => return Err(CliError::Usage(format!("--sweep must be `depth` or `dim`, got `{other}`"))),
    };
    eprint!("{}", table.to_table());
    write_or_print(a.out.as_deref(), &table.to_csv())
}

pub(crate) fn gen_data(a: GenDataArgs) -> CliResult<()> {
    if let Some(c) = &a.common.config {
        require_file(c)?;
    }
    if let Some(t) = &a.table {
        require_file(t)?;
    }
    require_parent(&a.out)?;
    let settings = Settings::load(a.common.config.as_deref())?;
    let table = match &a.table {
        Some(t) => load_table_auto(t)?,
        None => settings.vocabulary(&[])?,
    };
    let spec = settings.scene(&table, a.common.seed.unwrap_or(0))?;
    let samples = generate(&spec, a.count.unwrap_or(settings.scene.count))?;
    save_dataset(&samples, &a.out)?;
    println!("wrote {} samples to {}", samples.len(), a.out.display());
    Ok(())
}

pub(crate) fn make_vocab(a: MakeVocabArgs) -> CliResult<()> {
    if let Some(c) = &a.common.config {
        require_file(c)?;
    }
    require_parent(&a.out)?;
    let mut settings = Settings::load(a.common.config.as_deref())?;
    if let Some(seed) = a.common.seed {
        settings.scene.vocab_seed = seed;
    }
    let extra: Vec<String> = a
        .labels
        .as_deref()
        .map(|l| LabelSet::parse(l).map(|s| s.labels().to_vec()))
        .transpose()?
        .unwrap_or_default();
    let table = settings.vocabulary(&extra)?;
    if a.out.extension().is_some_and(|e| e == "txt") {
        save_table_text(&table, &a.out)?;
    } else {
        save_table(&table, &a.out)?;
    }
    println!("wrote {} words ({}-d) to {}; digest {}", table.len(), table.dimension(), a.out.display(), table.digest()?);
    Ok(())
}

pub(crate) fn serve(a: ServeArgs) -> CliResult<()> {
    require_file(&a.checkpoint)?;
    require_file(&a.table)?;
    let state = Arc::new(ServiceState::load(&a.checkpoint, &a.table)?);
    eprintln!("serving on http://{} (checkpoint {})", a.addr, state.checkpoint_digest());
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(CliError::Server)?;
    runtime.block_on(lseg_service::serve(state, a.addr)).map_err(CliError::Server)
}
