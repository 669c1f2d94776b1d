use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::spec::{EdaMode, ExperimentSpec};
use crate::augment::{augment_every, expand_minority, SynonymLexicon};
use crate::corpus::{fit_label_codec, split, split_with_validation, Dataset, LabelCodec};
use crate::error::{Error, Result, StageContext};
use crate::metrics::{confusion, scores_with, Scores};
use crate::rebalance::{apply_plan, class_counts, make_plan, SamplingPlan};
use crate::seed::derive_seed;
use crate::textprep::{clean_dataset, iqr_filter_report, IqrReport};
use crate::trainkit::{predict, train, ModelCheckpoint};
use crate::wordpiece::{load_vocab, train_vocab, TokenSeq, VocabModel};

/// One metrics row: Table-2 column order plus seed and wall-clock time.
/// Aggregate rows carry no seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub name: String,
    pub seed: Option<u64>,
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub seconds: f64,
}

impl ResultRow {
    /// Equal in everything except timing.
    pub fn same_outcome(&self, other: &ResultRow) -> bool {
        self.name == other.name
            && self.seed == other.seed
            && self.accuracy.to_bits() == other.accuracy.to_bits()
            && self.f1_macro.to_bits() == other.f1_macro.to_bits()
            && self.f1_weighted.to_bits() == other.f1_weighted.to_bits()
    }
}

/// Record counts observed at each stage boundary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub input: usize,
    pub after_iqr: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub after_eda: usize,
    pub tokenized_train: usize,
    pub after_oversampling: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Everything a single run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub row: ResultRow,
    pub scores: Scores,
    pub validation_scores: Option<Scores>,
    pub counts: StageCounts,
    pub timings: Vec<StageTiming>,
    pub iqr: Option<IqrReport>,
    pub plan: Option<SamplingPlan>,
    pub codec: LabelCodec,
    pub vocab: VocabModel,
    pub checkpoint: ModelCheckpoint,
    pub loss_trace: Vec<f64>,
}

/// Shared inputs that are not part of the spec.
#[derive(Debug, Clone, Copy)]
pub struct RunContext<'a> {
    pub lexicon: &'a SynonymLexicon,
    /// Artifacts go to `<out_dir>/<name>/seed-<seed>/` when set.
    pub out_dir: Option<&'a Path>,
}

struct Clock {
    timings: Vec<StageTiming>,
    last: Instant,
}

impl Clock {
    fn new() -> Self {
        Clock {
            timings: Vec::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }
}

fn tokenize(d: &Dataset, vocab: &VocabModel, codec: &LabelCodec, capacity: usize) -> Result<Vec<TokenSeq>> {
    d.iter()
        .map(|r| {
            Ok(vocab
                .encode(&r.text(), capacity)
                .with_label(codec.encode(&r.label)?)
                .with_id(r.id.clone()))
        })
        .collect()
}

fn evaluate(ckpt: &ModelCheckpoint, seqs: &[TokenSeq], spec: &ExperimentSpec) -> Result<Scores> {
    let (preds, _) = predict(&ckpt.model, seqs)?;
    let golds: Vec<usize> = seqs.iter().map(|s| s.label_id).collect();
    scores_with(
        &confusion(&preds, &golds, ckpt.codec.num_classes())?,
        spec.macro_average,
    )
}

/// Directory that holds one run's artifacts.
pub fn run_dir(out_dir: &Path, name: &str, seed: u64) -> PathBuf {
    let safe: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-+".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    out_dir.join(safe).join(format!("seed-{seed}"))
}

/// Runs one configuration end to end:
/// clean, split, IQR filter on the training side, EDA, tokenize, oversample,
/// train, predict, score. Every random stage draws from
/// `derive_seed(seed, stage)`, so enabling one technique leaves the others'
/// randomness untouched and all specs sharing a seed share a split.
pub fn run_config(
    spec: &ExperimentSpec,
    data: &Dataset,
    seed: u64,
    ctx: RunContext<'_>,
) -> Result<RunOutput> {
    spec.validate().stage("validate")?;
    if data.is_empty() {
        return Err(Error::EmptyDataset).stage("validate");
    }
    let started = Instant::now();
    let mut clock = Clock::new();
    let mut counts = StageCounts {
        input: data.len(),
        ..StageCounts::default()
    };

    let cleaned = if spec.clean.enabled {
        let cfg = spec.clean.to_config().stage("clean")?;
        clean_dataset(data, &cfg)
    } else {
        data.clone()
    };
    // fitted before filtering so that every class keeps its id
    let codec = fit_label_codec(&cleaned).stage("clean")?;
    clock.lap("clean");

    let mut iqr = None;
    let pool = if spec.iqr.enabled && spec.iqr.before_split {
        let (kept, report) = iqr_filter_report(&cleaned, &spec.iqr.to_config()).stage("iqr")?;
        iqr = Some(report);
        kept
    } else {
        cleaned
    };

    let split_seed = derive_seed(seed, "split");
    let (mut train_set, validation, test) = match spec.split.validation_fraction {
        Some(v) => {
            let (tr, va, te) =
                split_with_validation(&pool, spec.split.test_fraction, v, split_seed).stage("split")?;
            (tr, Some(va), te)
        }
        None => {
            let (tr, te) = split(&pool, spec.split.test_fraction, split_seed).stage("split")?;
            (tr, None, te)
        }
    };
    clock.lap("split");

    if spec.iqr.enabled && !spec.iqr.before_split {
        let (kept, report) = iqr_filter_report(&train_set, &spec.iqr.to_config()).stage("iqr")?;
        iqr = Some(report);
        train_set = kept;
    }
    counts.after_iqr = if spec.iqr.before_split {
        pool.len()
    } else {
        train_set.len()
    };
    counts.train = train_set.len();
    counts.validation = validation.as_ref().map_or(0, Dataset::len);
    counts.test = test.len();
    if test.is_empty() {
        return Err(Error::invalid("test split is empty")).stage("split");
    }
    clock.lap("iqr");

    if let Some(eda) = &spec.eda {
        let mut cfg = eda.augment.clone();
        cfg.seed = derive_seed(seed, "eda");
        train_set = match eda.mode {
            EdaMode::Minority => expand_minority(&train_set, eda.rate, &cfg, ctx.lexicon),
            EdaMode::All => augment_every(&train_set, &cfg, ctx.lexicon),
        }
        .stage("eda")?;
    }
    counts.after_eda = train_set.len();
    clock.lap("eda");

    let tok = &spec.tokenizer;
    let vocab = match &tok.vocab_path {
        Some(path) => load_vocab(path),
        None => {
            let texts: Vec<String> = train_set.iter().map(|r| r.text()).collect();
            train_vocab(&texts, tok.vocab_size)
        }
    }
    .stage("tokenize")?
    .with_frame(tok.frame)
    .with_max_word_chars(tok.max_word_chars);
    let mut train_seqs = tokenize(&train_set, &vocab, &codec, tok.capacity).stage("tokenize")?;
    let test_seqs = tokenize(&test, &vocab, &codec, tok.capacity).stage("tokenize")?;
    let validation_seqs = match &validation {
        Some(v) => Some(tokenize(v, &vocab, &codec, tok.capacity).stage("tokenize")?),
        None => None,
    };
    counts.tokenized_train = train_seqs.len();
    clock.lap("tokenize");

    let mut plan = None;
    if let Some(o) = &spec.oversampling {
        let p = make_plan(&class_counts(&train_seqs), o.rate).stage("oversample")?;
        train_seqs = apply_plan(&train_seqs, &p, derive_seed(seed, "oversample")).stage("oversample")?;
        plan = Some(p);
    }
    counts.after_oversampling = train_seqs.len();
    clock.lap("oversample");

    let mut train_cfg = spec.train_config();
    train_cfg.seed = derive_seed(seed, "train");
    let bcfg = spec
        .backbone
        .to_config(vocab.len(), codec.num_classes(), derive_seed(seed, "init"));
    let outcome = train(&train_seqs, &train_cfg, &bcfg, &codec).stage("train")?;
    clock.lap("train");

    let scores = evaluate(&outcome.checkpoint, &test_seqs, spec).stage("evaluate")?;
    let validation_scores = match &validation_seqs {
        Some(v) if !v.is_empty() => Some(evaluate(&outcome.checkpoint, v, spec).stage("evaluate")?),
        _ => None,
    };
    clock.lap("evaluate");

    let row = ResultRow {
        name: spec.name.clone(),
        seed: Some(seed),
        accuracy: scores.accuracy,
        f1_macro: scores.f1_macro,
        f1_weighted: scores.f1_weighted,
        seconds: started.elapsed().as_secs_f64(),
    };
    let out = RunOutput {
        row,
        scores,
        validation_scores,
        counts,
        timings: clock.timings,
        iqr,
        plan,
        codec,
        vocab,
        checkpoint: outcome.checkpoint,
        loss_trace: outcome.loss_trace,
    };
    if let Some(dir) = ctx.out_dir {
        persist(&out, &run_dir(dir, &spec.name, seed)).stage("persist")?;
    }
    Ok(out)
}

/// Writes the checkpoint, vocabulary, plan report and loss trace.
pub fn persist(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    out.checkpoint.save(dir.join("model.ckpt"))?;
    out.vocab.save(dir.join("vocab.txt"))?;
    let plan_text = match &out.plan {
        Some(p) => p.report(Some(&out.codec)),
        None => "oversampling disabled\n".to_string(),
    };
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    write("plan.txt", &plan_text)?;
    let mut trace = String::from("epoch,loss\n");
    for (i, l) in out.loss_trace.iter().enumerate() {
        trace.push_str(&format!("{},{l}\n", i + 1));
    }
    write("loss.csv", &trace)?;
    let counts = serde_json::to_string_pretty(&out.counts).map_err(|e| Error::Config(e.to_string()))?;
    write("counts.json", &counts)
}
