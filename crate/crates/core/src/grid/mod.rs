//! Config-driven experiment grid: spec types, the end-to-end pipeline, the
//! multi-seed runner and a synthetic imbalanced corpus.

mod pipeline;
mod runner;
mod spec;
mod synth;

pub use pipeline::{
    persist, run_config, run_dir, ResultRow, RunContext, RunOutput, StageCounts, StageTiming,
};
pub use runner::{
    append_results, config_hash, grid_dataset, grid_lexicon, median, run_grid, run_grid_config,
    write_manifest, CellSummary, GridReport, RESULTS_HEADER,
};
pub use spec::{
    parse_experiment, validate_specs, BackboneProfile, CleanSpec, DataSpec, EdaMode, EdaSpec, ExperimentSpec,
    Family, GridConfig, IqrSpec, OversampleSpec, SplitSpec, TokenizerSpec,
};
pub use synth::{gen_synthetic, synth_vocab, synthetic_lexicon, SynthSpec, SynthVocab};
