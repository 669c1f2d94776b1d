use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::SynthSpec;
use crate::augment::AugmentConfig;
use crate::corpus::Schema;
use crate::error::{Error, Result};
use crate::metrics::MacroAverage;
use crate::rebalance::validate_rate;
use crate::textprep::{load_stopwords, CleanConfig, IqrConfig};
use crate::trainkit::{BackboneConfig, LossKind, TrainConfig};
use crate::wordpiece::{DEFAULT_MAX_WORD_CHARS, DEFAULT_VOCAB_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdaMode {
    /// Expand classes below `ceil(r * max)` up to that target.
    #[default]
    Minority,
    /// One augmented copy of every training record.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaSpec {
    pub rate: f64,
    #[serde(default)]
    pub mode: EdaMode,
    #[serde(default)]
    pub augment: AugmentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversampleSpec {
    pub rate: f64,
}

/// Backbone shape; every profile uses the mean-pooled classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackboneProfile {
    pub name: String,
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
}

impl Default for BackboneProfile {
    fn default() -> Self {
        BackboneProfile {
            name: "meanpool".into(),
            embedding_dim: 64,
            hidden: vec![128],
            dropout_rate: 0.0,
        }
    }
}

impl BackboneProfile {
    pub fn to_config(&self, vocab_size: usize, num_classes: usize, seed: u64) -> BackboneConfig {
        BackboneConfig {
            vocab_size,
            embedding_dim: self.embedding_dim,
            hidden: self.hidden.clone(),
            num_classes,
            dropout_rate: self.dropout_rate,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanSpec {
    pub enabled: bool,
    /// Replaces the bundled stopword list when set.
    pub stopwords_file: Option<PathBuf>,
    pub remove_numeric: bool,
    pub lowercase: bool,
    pub lemmatize: bool,
}

impl Default for CleanSpec {
    fn default() -> Self {
        CleanSpec {
            enabled: true,
            stopwords_file: None,
            remove_numeric: true,
            lowercase: true,
            lemmatize: true,
        }
    }
}

impl CleanSpec {
    pub fn to_config(&self) -> Result<CleanConfig> {
        let mut cfg = CleanConfig {
            remove_numeric: self.remove_numeric,
            lowercase: self.lowercase,
            lemmatize: self.lemmatize,
            ..CleanConfig::default()
        };
        if let Some(path) = &self.stopwords_file {
            cfg.stopword_set = load_stopwords(path)?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IqrSpec {
    pub enabled: bool,
    pub multiplier: f64,
    /// Filter the whole dataset before splitting instead of the training side only.
    pub before_split: bool,
}

impl Default for IqrSpec {
    fn default() -> Self {
        IqrSpec {
            enabled: true,
            multiplier: IqrConfig::default().multiplier,
            before_split: false,
        }
    }
}

impl IqrSpec {
    pub fn to_config(&self) -> IqrConfig {
        IqrConfig {
            multiplier: self.multiplier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerSpec {
    /// Pretrained vocabulary file; trained on the training side when absent.
    pub vocab_path: Option<PathBuf>,
    pub vocab_size: usize,
    pub capacity: usize,
    pub frame: bool,
    pub max_word_chars: usize,
}

impl Default for TokenizerSpec {
    fn default() -> Self {
        TokenizerSpec {
            vocab_path: None,
            vocab_size: DEFAULT_VOCAB_SIZE,
            capacity: 64,
            frame: true,
            max_word_chars: DEFAULT_MAX_WORD_CHARS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub validation_fraction: Option<f64>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.2,
            validation_fraction: None,
        }
    }
}

/// One configuration of the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub eda: Option<EdaSpec>,
    #[serde(default)]
    pub oversampling: Option<OversampleSpec>,
    /// Training objective; overrides `train.loss`.
    #[serde(default)]
    pub loss: LossKind,
    #[serde(default)]
    pub backbone: BackboneProfile,
    #[serde(default)]
    pub clean: CleanSpec,
    #[serde(default)]
    pub iqr: IqrSpec,
    #[serde(default)]
    pub tokenizer: TokenizerSpec,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub macro_average: MacroAverage,
}

/// Configuration family, by enabled techniques.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Family {
    Baseline,
    Oversampling,
    Eda,
    FocalLoss,
    EdaFocalLoss,
    OversamplingFocalLoss,
    OversamplingEda,
    OversamplingEdaFocalLoss,
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>) -> Self {
        ExperimentSpec {
            name: name.into(),
            seed: 0,
            eda: None,
            oversampling: None,
            loss: LossKind::default(),
            backbone: BackboneProfile::default(),
            clean: CleanSpec::default(),
            iqr: IqrSpec::default(),
            tokenizer: TokenizerSpec::default(),
            split: SplitSpec::default(),
            train: TrainConfig::default(),
            macro_average: MacroAverage::default(),
        }
    }

    pub fn with_eda(mut self, rate: f64) -> Self {
        self.eda = Some(EdaSpec {
            rate,
            mode: EdaMode::Minority,
            augment: AugmentConfig::default(),
        });
        self
    }

    pub fn with_oversampling(mut self, rate: f64) -> Self {
        self.oversampling = Some(OversampleSpec { rate });
        self
    }

    pub fn with_loss(mut self, loss: LossKind) -> Self {
        self.loss = loss;
        self
    }

    pub fn family(&self) -> Family {
        match (
            self.oversampling.is_some(),
            self.eda.is_some(),
            self.loss.is_focal(),
        ) {
            (false, false, false) => Family::Baseline,
            (true, false, false) => Family::Oversampling,
            (false, true, false) => Family::Eda,
            (false, false, true) => Family::FocalLoss,
            (false, true, true) => Family::EdaFocalLoss,
            (true, false, true) => Family::OversamplingFocalLoss,
            (true, true, false) => Family::OversamplingEda,
            (true, true, true) => Family::OversamplingEdaFocalLoss,
        }
    }

    /// Checks every field that can be checked without touching data.
    pub fn validate(&self) -> Result<()> {
        let ctx = |e: Error| Error::Config(format!("experiment `{}`: {e}", self.name));
        if self.name.trim().is_empty() {
            return Err(Error::Config("experiment name must not be empty".into()));
        }
        if let Some(eda) = &self.eda {
            validate_rate(eda.rate).map_err(ctx)?;
            eda.augment.validate().map_err(ctx)?;
        }
        if let Some(o) = &self.oversampling {
            validate_rate(o.rate).map_err(ctx)?;
        }
        let f = self.split.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(ctx(Error::invalid(format!(
                "test_fraction must lie in (0, 1), got {f}"
            ))));
        }
        if let Some(v) = self.split.validation_fraction {
            if !(v > 0.0 && f + v < 1.0) {
                return Err(ctx(Error::invalid(format!("bad validation_fraction {v}"))));
            }
        }
        if self.iqr.multiplier.is_nan() || self.iqr.multiplier < 0.0 {
            return Err(ctx(Error::invalid("IQR multiplier must be nonnegative")));
        }
        if self.tokenizer.capacity < 2 {
            return Err(ctx(Error::invalid("tokenizer capacity must be at least 2")));
        }
        self.loss.validate().map_err(ctx)?;
        let mut train = self.train.clone();
        train.loss = self.loss.clone();
        train.validate().map_err(ctx)?;
        self.backbone.to_config(1, 1, 0).validate().map_err(ctx)?;
        Ok(())
    }

    /// Training settings with the experiment's loss applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            loss: self.loss.clone(),
            ..self.train.clone()
        }
    }
}

/// Where the grid's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub schema: Schema,
    /// Several label columns each run as an independent experiment set.
    #[serde(default)]
    pub label_columns: Vec<String>,
}

/// A grid file: seeds, a data source and the experiment list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub data: Option<DataSpec>,
    #[serde(default)]
    pub synthetic: Option<SynthSpec>,
    /// Synonym lexicon file; the synthetic companion lexicon or the bundled
    /// one is used when absent.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(rename = "experiment")]
    pub experiments: Vec<ExperimentSpec>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl GridConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative file references relative to the config's directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = &mut self.data {
            fix(&mut d.path);
        }
        if let Some(l) = &mut self.lexicon {
            fix(l);
        }
        for e in &mut self.experiments {
            if let Some(p) = &mut e.tokenizer.vocab_path {
                fix(p);
            }
            if let Some(p) = &mut e.clean.stopwords_file {
                fix(p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_specs(&self.experiments)?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }
}

/// Non-empty, uniquely named, individually valid.
pub fn validate_specs(specs: &[ExperimentSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Config("grid has no experiments".into()));
    }
    let mut names = BTreeSet::new();
    for s in specs {
        if !names.insert(s.name.as_str()) {
            return Err(Error::Config(format!("duplicate experiment name `{}`", s.name)));
        }
        s.validate()?;
    }
    Ok(())
}

/// Parses a single-experiment file (the top-level table is the spec).
pub fn parse_experiment(text: &str) -> Result<ExperimentSpec> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainkit::FocalParams;

    #[test]
    fn families() {
        assert_eq!(ExperimentSpec::new("b").family(), Family::Baseline);
        assert_eq!(ExperimentSpec::new("e").with_eda(0.2).family(), Family::Eda);
        let fe = ExperimentSpec::new("fe")
            .with_eda(0.1)
            .with_loss(LossKind::Focal(FocalParams::default()));
        assert_eq!(fe.family(), Family::EdaFocalLoss);
        assert_eq!(
            ExperimentSpec::new("oe")
                .with_eda(0.1)
                .with_oversampling(0.1)
                .family(),
            Family::OversamplingEda
        );
    }

    #[test]
    fn zero_rate_is_rejected() {
        assert!(ExperimentSpec::new("x").with_eda(0.0).validate().is_err());
        assert!(ExperimentSpec::new("x")
            .with_oversampling(0.0)
            .validate()
            .is_err());
        assert!(ExperimentSpec::new("x").with_oversampling(1.0).validate().is_ok());
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let specs = vec![ExperimentSpec::new("a"), ExperimentSpec::new("a")];
        assert!(validate_specs(&specs).is_err());
        assert!(validate_specs(&[]).is_err());
    }

    #[test]
    fn parses_a_grid_file() {
        let text = r#"
seeds = [1, 2, 3]

[synthetic]
counts = [100, 10, 10, 5, 5]
noise = 0.3

[[experiment]]
name = "baseline"

[[experiment]]
name = "focal+eda_0.1"
loss = { kind = "focal", alpha = 1.0, gamma = 2.0 }
eda = { rate = 0.1 }

[[experiment]]
name = "oversampling_0.5"
oversampling = { rate = 0.5 }
train = { epochs = 5, peak_lr = 0.002 }
"#;
        let cfg = GridConfig::parse(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seeds, [1, 2, 3]);
        assert_eq!(cfg.experiments.len(), 3);
        assert_eq!(cfg.experiments[1].family(), Family::EdaFocalLoss);
        assert_eq!(cfg.experiments[2].train.epochs, 5);
        assert_eq!(cfg.experiments[2].train.batch_size, 32);
        assert_eq!(
            cfg.synthetic.as_ref().unwrap().vocab_per_class,
            SynthSpec::default().vocab_per_class
        );
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = ExperimentSpec::new("x")
            .with_eda(0.2)
            .with_oversampling(0.1)
            .with_loss(LossKind::focal_default());
        let text = toml::to_string(&spec).unwrap();
        assert_eq!(parse_experiment(&text).unwrap(), spec);
    }
}
