use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::pipeline::{run_config, ResultRow, RunContext, RunOutput, StageCounts, StageTiming};
use super::spec::{validate_specs, DataSpec, ExperimentSpec, GridConfig};
use super::synth::{gen_synthetic, synthetic_lexicon, SynthSpec};
use crate::augment::SynonymLexicon;
use crate::corpus::{load_dataset, Dataset};
use crate::error::{Error, Result};

/// Raw per-seed rows in input order plus one median row per spec.
#[derive(Debug, Clone)]
pub struct GridReport {
    pub raw: Vec<ResultRow>,
    pub aggregates: Vec<ResultRow>,
    pub cells: Vec<CellSummary>,
}

/// Per-cell bookkeeping that goes into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub name: String,
    pub seed: u64,
    pub counts: StageCounts,
    pub timings: Vec<StageTiming>,
}

impl GridReport {
    /// Raw rows followed by the aggregates.
    pub fn all_rows(&self) -> Vec<ResultRow> {
        self.raw.iter().chain(&self.aggregates).cloned().collect()
    }

    pub fn aggregate(&self, name: &str) -> Option<&ResultRow> {
        self.aggregates.iter().find(|r| r.name == name)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

fn aggregate_rows(name: &str, rows: &[&ResultRow]) -> ResultRow {
    let pick = |f: fn(&ResultRow) -> f64| median(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
    ResultRow {
        name: name.to_string(),
        seed: None,
        accuracy: pick(|r| r.accuracy),
        f1_macro: pick(|r| r.f1_macro),
        f1_weighted: pick(|r| r.f1_weighted),
        seconds: pick(|r| r.seconds),
    }
}

/// Runs every spec under every seed. Cells run in parallel; results come
/// back in (spec, seed) input order.
pub fn run_grid(
    specs: &[ExperimentSpec],
    data: &Dataset,
    seeds: &[u64],
    ctx: RunContext<'_>,
) -> Result<GridReport> {
    validate_specs(specs)?;
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let cells: Vec<(&ExperimentSpec, u64)> = specs
        .iter()
        .flat_map(|s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let outputs: Vec<RunOutput> = cells
        .par_iter()
        .map(|(spec, seed)| {
            run_config(spec, data, *seed, ctx)
                .map_err(|e| Error::Config(format!("experiment `{}` seed {seed}: {e}", spec.name)))
        })
        .collect::<Result<_>>()?;

    let raw: Vec<ResultRow> = outputs.iter().map(|o| o.row.clone()).collect();
    let aggregates = specs
        .iter()
        .map(|s| {
            let rows: Vec<&ResultRow> = raw.iter().filter(|r| r.name == s.name).collect();
            aggregate_rows(&s.name, &rows)
        })
        .collect();
    let cells = outputs
        .into_iter()
        .map(|o| CellSummary {
            seed: o.row.seed.unwrap_or_default(),
            name: o.row.name,
            counts: o.counts,
            timings: o.timings,
        })
        .collect();
    Ok(GridReport {
        raw,
        aggregates,
        cells,
    })
}

/// Loads the grid's dataset: the data file when configured, otherwise the
/// synthetic corpus (default settings if that section is absent too).
pub fn grid_dataset(cfg: &GridConfig) -> Result<Dataset> {
    match (&cfg.data, &cfg.synthetic) {
        (Some(DataSpec { path, schema, .. }), _) => load_dataset(path, schema),
        (None, Some(s)) => gen_synthetic(s),
        (None, None) => gen_synthetic(&SynthSpec::default()),
    }
}

/// The lexicon file when configured, the synthetic companion lexicon for
/// synthetic data, the bundled lexicon otherwise.
pub fn grid_lexicon(cfg: &GridConfig) -> Result<SynonymLexicon> {
    match (&cfg.lexicon, &cfg.data, &cfg.synthetic) {
        (Some(path), _, _) => SynonymLexicon::load(path),
        (None, Some(_), _) => Ok(SynonymLexicon::bundled()),
        (None, None, Some(s)) => Ok(synthetic_lexicon(s)),
        (None, None, None) => Ok(synthetic_lexicon(&SynthSpec::default())),
    }
}

/// SHA-256 of the canonical serialization of the config.
pub fn config_hash(cfg: &GridConfig) -> Result<String> {
    let text = toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Loads data and lexicon for `cfg`, then runs the grid. With several label
/// columns each one is a separate experiment set named `<column>/<spec>`.
pub fn run_grid_config(cfg: &GridConfig, out_dir: Option<&Path>) -> Result<GridReport> {
    cfg.validate()?;
    let lexicon = grid_lexicon(cfg)?;
    let columns = cfg
        .data
        .as_ref()
        .map(|d| d.label_columns.clone())
        .unwrap_or_default();
    if columns.is_empty() {
        let data = grid_dataset(cfg)?;
        let ctx = RunContext {
            lexicon: &lexicon,
            out_dir,
        };
        return run_grid(&cfg.experiments, &data, &cfg.seeds, ctx);
    }
    let mut report = GridReport {
        raw: Vec::new(),
        aggregates: Vec::new(),
        cells: Vec::new(),
    };
    for column in &columns {
        let mut per = cfg.clone();
        if let Some(d) = &mut per.data {
            d.schema.label = column.clone();
        }
        let data = grid_dataset(&per)?;
        let specs: Vec<ExperimentSpec> = cfg
            .experiments
            .iter()
            .map(|s| ExperimentSpec {
                name: format!("{column}/{}", s.name),
                ..s.clone()
            })
            .collect();
        let ctx = RunContext {
            lexicon: &lexicon,
            out_dir,
        };
        let part = run_grid(&specs, &data, &cfg.seeds, ctx)?;
        report.raw.extend(part.raw);
        report.aggregates.extend(part.aggregates);
        report.cells.extend(part.cells);
    }
    Ok(report)
}

pub const RESULTS_HEADER: &str = "name,seed,accuracy,f1_macro,f1_weighted,seconds";

fn csv_line(r: &ResultRow) -> String {
    let seed = r.seed.map_or_else(|| "median".to_string(), |s| s.to_string());
    format!(
        "{},{},{},{},{},{:.3}",
        r.name, seed, r.accuracy, r.f1_macro, r.f1_weighted, r.seconds
    )
}

/// Appends `rows` to a results table. Names already in the file are an
/// error unless `overwrite` is set, in which case their old rows are dropped
/// first.
pub fn append_results(path: &Path, rows: &[ResultRow], overwrite: bool) -> Result<()> {
    let incoming: BTreeSet<&str> = rows.iter().map(|r| r.name.as_str()).collect();
    let mut kept = Vec::new();
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let name = line.split(',').next().unwrap_or_default();
            if incoming.contains(name) {
                if !overwrite {
                    return Err(Error::Config(format!(
                        "results for `{name}` already exist in {}; pass the overwrite flag to replace them",
                        path.display()
                    )));
                }
            } else {
                kept.push(line.to_string());
            }
        }
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for line in kept {
        out.push_str(&line);
        out.push('\n');
    }
    for r in rows {
        out.push_str(&csv_line(r));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_sha256: String,
    seeds: &'a [u64],
    experiments: Vec<&'a str>,
    cells: &'a [CellSummary],
    rows: Vec<ResultRow>,
}

/// Writes `manifest.json`: config hash, seeds, per-cell counts and stage timings.
pub fn write_manifest(path: &Path, cfg: &GridConfig, report: &GridReport) -> Result<()> {
    let manifest = Manifest {
        config_sha256: config_hash(cfg)?,
        seeds: &cfg.seeds,
        experiments: cfg.experiments.iter().map(|e| e.name.as_str()).collect(),
        cells: &report.cells,
        rows: report.all_rows(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(name: &str, seed: u64, f1: f64) -> ResultRow {
        ResultRow {
            name: name.into(),
            seed: Some(seed),
            accuracy: f1,
            f1_macro: f1,
            f1_weighted: f1,
            seconds: 0.5,
        }
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
        let r = aggregate_rows("x", &[&row("x", 1, 0.2), &row("x", 2, 0.9), &row("x", 3, 0.4)]);
        assert_eq!((r.seed, r.f1_macro), (None, 0.4));
    }

    #[test]
    fn results_are_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        append_results(&path, &[row("a", 1, 0.5)], false).unwrap();
        append_results(&path, &[row("b", 1, 0.25)], false).unwrap();
        assert!(append_results(&path, &[row("a", 2, 0.7)], false).is_err());
        append_results(&path, &[row("a", 2, 0.7)], true).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RESULTS_HEADER);
        assert_eq!(lines[1], "b,1,0.25,0.25,0.25,0.500");
        assert_eq!(lines[2], "a,2,0.7,0.7,0.7,0.500");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let text = "seeds = [1]\n[[experiment]]\nname = \"b\"\n";
        let a = GridConfig::parse(text).unwrap();
        let mut b = a.clone();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        b.seeds = vec![2];
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(&a).unwrap().len(), 64);
    }
}
