use std::collections::HashMap;

use lseg_core::embeddings::OTHER_LABEL;
use lseg_core::eval::{evaluate_fold, train_for_fold, LabelScope, ZeroShotBenchmark};

fn small_bench() -> ZeroShotBenchmark {
    let mut bench = ZeroShotBenchmark::synthetic(3).unwrap();
    bench.train.max_steps = 6;
    bench.train_images = 12;
    bench.eval_images = 6;
    bench
}

#[test]
fn folds_partition_the_classes() {
    let bench = small_bench();
    let mut held: Vec<String> = (0..bench.folds)
        .flat_map(|f| bench.fold_spec(f).unwrap().unseen().to_vec())
        .collect();
    held.sort();
    let mut all = bench.class_names();
    all.sort();
    assert_eq!(held, all);
    assert_eq!(bench.classes.len(), 12);
}

#[test]
fn training_images_never_show_held_out_classes() {
    let bench = small_bench();
    let spec = bench.fold_spec(2).unwrap();
    for sample in bench.training_set(&spec).unwrap() {
        for label in sample.label_set.iter() {
            assert!(!spec.unseen().iter().any(|u| u == label), "{label} leaked into training");
        }
    }
    for sample in bench.evaluation_set(&spec).unwrap() {
        let labels: Vec<&str> = sample.label_set.iter().collect();
        assert_eq!(labels[0], OTHER_LABEL);
        assert_eq!(labels[1..], spec.unseen().iter().map(String::as_str).collect::<Vec<_>>()[..]);
    }
}

#[test]
fn zero_noise_synonyms_and_scopes() {
    let mut bench = small_bench();
    let spec = bench.fold_spec(0).unwrap();
    let params = train_for_fold(&bench, &spec).unwrap();
    let base = evaluate_fold(&bench, &spec, &params, &bench.table, &HashMap::new()).unwrap();

    let mut table = bench.table.clone();
    let mut aliases = HashMap::new();
    for class in spec.unseen() {
        let alias = format!("a {class}");
        table.insert(alias.clone(), table.get(class).unwrap().to_vec()).unwrap();
        aliases.insert(class.clone(), alias);
    }
    let swapped = evaluate_fold(&bench, &spec, &params, &table, &aliases).unwrap();
    assert_eq!(swapped.miou.to_bits(), base.miou.to_bits());
    assert_eq!(swapped.confusion, base.confusion);

    // Fewer distractors can only move pixels onto queried labels.
    bench.scope = LabelScope::FoldOnly;
    let narrow = evaluate_fold(&bench, &spec, &params, &bench.table, &HashMap::new()).unwrap();
    assert_eq!(narrow.chance_miou, base.chance_miou);
    assert!(narrow.pixacc >= base.pixacc);
}
