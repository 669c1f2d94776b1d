//! Toolkit for class-imbalanced short-text classification: cleaning and
//! outlier filtering, WordPiece tokenization, EDA augmentation, random
//! oversampling, a small trainable classifier with focal loss, metrics and a
//! reproducible experiment grid.

pub mod augment;
pub mod corpus;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod rebalance;
pub mod seed;
pub mod textprep;
pub mod trainkit;
pub mod wordpiece;

pub use augment::{AugmentConfig, SynonymLexicon};
pub use corpus::{Dataset, LabelCodec, Record, Schema};
pub use error::{Error, Result};
pub use grid::{ExperimentSpec, GridConfig, GridReport, ResultRow};
pub use metrics::{ConfusionMatrix, MacroAverage, Scores};
pub use rebalance::SamplingPlan;
pub use seed::{derive_seed, SeededRng};
pub use textprep::{CleanConfig, IqrConfig};
pub use trainkit::{BackboneConfig, LossKind, ModelCheckpoint, TrainConfig};
pub use wordpiece::{TokenSeq, VocabModel};
