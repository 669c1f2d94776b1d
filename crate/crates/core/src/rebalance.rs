//! Random oversampling of tokenized training data.
//!
//! A sampling plan lists every class whose count is below
//! `target = ceil(r * max_count)` together with its deficit. Applying the plan
//! appends exact duplicates of randomly chosen members of each such class.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LabelCodec;
use crate::error::{Error, Result};
use crate::seed::stage_rng;
use crate::wordpiece::TokenSeq;

/// Checks that a sample rate lies in `(0, 1]`.
pub fn validate_rate(r: f64) -> Result<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("sample rate must lie in (0, 1], got {r}")))
    }
}

/// `ceil(r * max_count)`, robust to representation error in `r` (0.1 * 1000
/// must give 100, not 101).
pub fn target_count(r: f64, max_count: usize) -> usize {
    let exact = r * max_count as f64;
    ((exact - 1e-9 * exact.max(1.0)).ceil() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub target_count: usize,
    pub per_class_additions: BTreeMap<usize, usize>,
    pub original_counts: BTreeMap<usize, usize>,
}

/// One line of the audit report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanRow {
    pub class: String,
    pub original: usize,
    pub target: usize,
    pub additions: usize,
}

impl SamplingPlan {
    pub fn is_empty(&self) -> bool {
        self.per_class_additions.is_empty()
    }

    pub fn total_additions(&self) -> usize {
        self.per_class_additions.values().sum()
    }

    pub fn rows(&self, codec: Option<&LabelCodec>) -> Vec<PlanRow> {
        self.original_counts
            .iter()
            .map(|(&k, &original)| PlanRow {
                class: codec
                    .and_then(|c| c.decode(k).ok())
                    .map_or_else(|| k.to_string(), str::to_string),
                original,
                target: self.target_count,
                additions: self.per_class_additions.get(&k).copied().unwrap_or(0),
            })
            .collect()
    }

    /// Human-readable table: class, original count, target, additions.
    pub fn report(&self, codec: Option<&LabelCodec>) -> String {
        let rows = self.rows(codec);
        let width = rows.iter().map(|r| r.class.len()).max().unwrap_or(5).max(5);
        let mut out = format!(
            "{:<width$}  {:>8}  {:>6}  {:>9}\n",
            "class", "original", "target", "additions"
        );
        for r in &rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>8}  {:>6}  {:>9}",
                r.class, r.original, r.target, r.additions
            );
        }
        let _ = writeln!(out, "total additions: {}", self.total_additions());
        out
    }
}

/// Builds the plan for `class_counts` at sample rate `r`.
pub fn make_plan(class_counts: &BTreeMap<usize, usize>, r: f64) -> Result<SamplingPlan> {
    validate_rate(r)?;
    if class_counts.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some((k, _)) = class_counts.iter().find(|(_, &c)| c == 0) {
        return Err(Error::invalid(format!("class {k} has a zero count")));
    }
    let max = *class_counts.values().max().expect("non-empty");
    let target = target_count(r, max);
    let per_class_additions = class_counts
        .iter()
        .filter(|(_, &c)| c < target)
        .map(|(&k, &c)| (k, target - c))
        .collect();
    Ok(SamplingPlan {
        target_count: target,
        per_class_additions,
        original_counts: class_counts.clone(),
    })
}

/// Histogram of `label_id` over sequences.
pub fn class_counts(seqs: &[TokenSeq]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for s in seqs {
        *counts.entry(s.label_id).or_insert(0) += 1;
    }
    counts
}

/// Id of the `ordinal`-th duplicate drawn from `source_id`.
pub fn duplicate_id(source_id: &str, ordinal: usize) -> String {
    format!("{source_id}~dup{ordinal}")
}

/// Appends duplicates per the plan. The input prefix is returned untouched;
/// each class draws from its own stream seeded by `(seed, class id)`.
pub fn apply_plan(train: &[TokenSeq], plan: &SamplingPlan, seed: u64) -> Result<Vec<TokenSeq>> {
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in train.iter().enumerate() {
        members.entry(s.label_id).or_default().push(i);
    }
    let mut out = train.to_vec();
    out.reserve(plan.total_additions());
    for (&class, &deficit) in &plan.per_class_additions {
        let pool = members.get(&class).ok_or_else(|| {
            Error::invalid(format!("planned class {class} is absent from the training set"))
        })?;
        let mut rng = stage_rng(seed, &format!("oversample/{class}"));
        for ordinal in 0..deficit {
            let src = &train[pool[rng.gen_range(0..pool.len())]];
            out.push(src.clone().with_id(duplicate_id(&src.id, ordinal)));
        }
    }
    Ok(out)
}
