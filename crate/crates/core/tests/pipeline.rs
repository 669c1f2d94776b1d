use std::path::PathBuf;

use textbal::error::Error;
use textbal::grid::{
    append_results, gen_synthetic, run_config, run_grid, synthetic_lexicon, write_manifest, ExperimentSpec,
    Family, GridConfig, RunContext, SynthSpec,
};
use textbal::trainkit::{LossKind, ModelCheckpoint, TrainConfig};
use textbal::Dataset;

fn small() -> (Dataset, textbal::SynonymLexicon) {
    let spec = SynthSpec {
        counts: vec![40, 8, 6],
        ..SynthSpec::default()
    };
    (gen_synthetic(&spec).unwrap(), synthetic_lexicon(&spec))
}

fn quick(name: &str) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(name);
    s.train = TrainConfig {
        epochs: 4,
        ..TrainConfig::default()
    };
    s
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn baseline_run_populates_metrics() {
    let (data, lex) = small();
    let out = run_config(
        &quick("baseline"),
        &data,
        7,
        RunContext {
            lexicon: &lex,
            out_dir: None,
        },
    )
    .unwrap();
    for m in [out.row.accuracy, out.row.f1_macro, out.row.f1_weighted] {
        assert!((0.0..=1.0).contains(&m));
    }
    assert_eq!(out.row.seed, Some(7));
    assert_eq!(out.loss_trace.len(), 4);
    assert_eq!(out.counts.input, data.len());
    assert_eq!(out.counts.train + out.counts.test, data.len());
}

#[test]
fn augmentation_changes_counts_before_tokenization_and_oversampling_after() {
    let (data, lex) = small();
    let ctx = RunContext {
        lexicon: &lex,
        out_dir: None,
    };
    let eda = run_config(&quick("eda").with_eda(0.5), &data, 1, ctx).unwrap();
    assert!(eda.counts.after_eda > eda.counts.train);
    assert_eq!(eda.counts.tokenized_train, eda.counts.after_eda);
    assert_eq!(eda.counts.after_oversampling, eda.counts.tokenized_train);

    let over = run_config(&quick("over").with_oversampling(0.5), &data, 1, ctx).unwrap();
    assert_eq!(over.counts.after_eda, over.counts.train);
    assert_eq!(over.counts.tokenized_train, over.counts.train);
    assert!(over.counts.after_oversampling > over.counts.tokenized_train);
    let plan = over.plan.unwrap();
    assert_eq!(
        over.counts.after_oversampling - over.counts.tokenized_train,
        plan.total_additions()
    );

    let both = run_config(&quick("both").with_eda(0.1).with_oversampling(0.5), &data, 1, ctx).unwrap();
    assert!(both.counts.after_eda >= both.counts.train);
    assert!(both.counts.after_oversampling >= both.counts.after_eda);
}

#[test]
fn zero_rate_fails_before_any_stage() {
    let (data, lex) = small();
    let err = run_config(
        &quick("bad").with_eda(0.0),
        &data,
        1,
        RunContext {
            lexicon: &lex,
            out_dir: None,
        },
    )
    .unwrap_err();
    assert!(
        matches!(
            err,
            Error::Stage {
                stage: "validate",
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn stage_errors_name_the_stage() {
    let (data, lex) = small();
    let mut spec = quick("missing-vocab");
    spec.tokenizer.vocab_path = Some("/nonexistent/vocab.txt".into());
    let err = run_config(
        &spec,
        &data,
        1,
        RunContext {
            lexicon: &lex,
            out_dir: None,
        },
    )
    .unwrap_err();
    assert!(
        matches!(
            err,
            Error::Stage {
                stage: "tokenize",
                ..
            }
        ),
        "{err}"
    );
    assert!(err.to_string().contains("tokenize"));
}

#[test]
fn same_inputs_give_same_row() {
    let (data, lex) = small();
    let ctx = RunContext {
        lexicon: &lex,
        out_dir: None,
    };
    let spec = quick("x").with_eda(0.2).with_loss(LossKind::focal_default());
    let a = run_config(&spec, &data, 3, ctx).unwrap();
    let b = run_config(&spec, &data, 3, ctx).unwrap();
    assert!(a.row.same_outcome(&b.row));
    assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
}

#[test]
fn grid_counts_and_order() {
    let (data, lex) = small();
    let specs = vec![quick("a"), quick("b").with_oversampling(0.2)];
    let report = run_grid(
        &specs,
        &data,
        &[1, 2, 3],
        RunContext {
            lexicon: &lex,
            out_dir: None,
        },
    )
    .unwrap();
    assert_eq!(report.raw.len(), 6);
    assert_eq!(report.aggregates.len(), 2);
    assert_eq!(report.all_rows().len(), 8);
    let order: Vec<(String, Option<u64>)> = report.raw.iter().map(|r| (r.name.clone(), r.seed)).collect();
    assert_eq!(order[0], ("a".into(), Some(1)));
    assert_eq!(order[2], ("a".into(), Some(3)));
    assert_eq!(order[3], ("b".into(), Some(1)));
    assert!(report.aggregates.iter().all(|r| r.seed.is_none()));
}

#[test]
fn single_cell_grid_matches_run_config() {
    let (data, lex) = small();
    let ctx = RunContext {
        lexicon: &lex,
        out_dir: None,
    };
    let spec = quick("solo");
    let report = run_grid(std::slice::from_ref(&spec), &data, &[9], ctx).unwrap();
    let direct = run_config(&spec, &data, 9, ctx).unwrap();
    assert!(report.raw[0].same_outcome(&direct.row));
    let agg = &report.aggregates[0];
    assert_eq!(agg.f1_macro, direct.row.f1_macro);
}

#[test]
fn duplicate_names_rejected() {
    let (data, lex) = small();
    let err = run_grid(
        &[quick("a"), quick("a")],
        &data,
        &[1],
        RunContext {
            lexicon: &lex,
            out_dir: None,
        },
    );
    assert!(err.is_err());
}

#[test]
fn artifacts_are_persisted_and_reloadable() {
    let (data, lex) = small();
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        &quick("over").with_oversampling(0.5),
        &data,
        4,
        RunContext {
            lexicon: &lex,
            out_dir: Some(dir.path()),
        },
    )
    .unwrap();
    let run = dir.path().join("over").join("seed-4");
    let ckpt = ModelCheckpoint::load(run.join("model.ckpt")).unwrap();
    assert_eq!(ckpt, out.checkpoint);
    let plan = std::fs::read_to_string(run.join("plan.txt")).unwrap();
    assert!(plan.contains("total additions"));
    assert!(run.join("vocab.txt").exists());
    assert!(run.join("loss.csv").exists());
}

#[test]
fn full_grid_covers_every_family() {
    let cfg = GridConfig::load(configs_dir().join("full_grid.toml")).unwrap();
    cfg.validate().unwrap();
    let families: std::collections::BTreeSet<Family> = cfg.experiments.iter().map(|e| e.family()).collect();
    for f in [
        Family::Baseline,
        Family::Oversampling,
        Family::Eda,
        Family::FocalLoss,
        Family::EdaFocalLoss,
    ] {
        assert!(families.contains(&f), "missing {f:?}");
    }
    let wide: Vec<_> = cfg
        .experiments
        .iter()
        .filter(|e| e.backbone.name == "wide")
        .collect();
    let wide_families: std::collections::BTreeSet<Family> = wide.iter().map(|e| e.family()).collect();
    assert_eq!(wide_families.len(), 5);
    for name in [
        "baseline",
        "eda_0.2",
        "focal+oversampling_0.5",
        "focal+eda_1.0",
        "oversampling+eda_0.1",
    ] {
        assert!(cfg.experiments.iter().any(|e| e.name == name), "missing {name}");
    }
}

#[test]
fn results_and_manifest_files() {
    let (data, lex) = small();
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        GridConfig::parse("seeds = [1, 2]\n[[experiment]]\nname = \"a\"\ntrain = { epochs = 2 }\n").unwrap();
    let report = run_grid(
        &cfg.experiments,
        &data,
        &cfg.seeds,
        RunContext {
            lexicon: &lex,
            out_dir: None,
        },
    )
    .unwrap();
    let results = dir.path().join("results.csv");
    append_results(&results, &report.all_rows(), false).unwrap();
    assert!(append_results(&results, &report.all_rows(), false).is_err());
    append_results(&results, &report.all_rows(), true).unwrap();
    let text = std::fs::read_to_string(&results).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().last().unwrap().starts_with("a,median,"));

    let manifest = dir.path().join("manifest.json");
    write_manifest(&manifest, &cfg, &report).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(json["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(json["cells"].as_array().unwrap().len(), 2);
    assert!(json["cells"][0]["timings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|t| t["stage"] == "train"));
}
