//! Easy Data Augmentation: synonym replacement, random insertion, random
//! swap and random deletion, plus minority-class expansion to a target share
//! of the largest class.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Record};
use crate::error::{Error, Result};
use crate::rebalance::{target_count, validate_rate};
use crate::seed::stage_rng;

const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.tsv");

/// Word-to-synonyms map. No entry is empty and no word lists itself.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymLexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl SynonymLexicon {
    pub fn new() -> Self {
        SynonymLexicon::default()
    }

    /// Adds synonyms for `word`, skipping the word itself and repeats.
    pub fn insert<I, S>(&mut self, word: &str, synonyms: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let word = word.to_lowercase();
        let mut fresh: Vec<String> = synonyms
            .into_iter()
            .map(Into::into)
            .filter(|s| !s.is_empty() && *s != word)
            .collect();
        if fresh.is_empty() {
            return;
        }
        let list = self.entries.entry(word).or_default();
        for s in fresh.drain(..) {
            if !list.contains(&s) {
                list.push(s);
            }
        }
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Parses `word<TAB>syn1,syn2,...` lines; `#` comments and blank lines
    /// are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = SynonymLexicon::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (word, syns) = line
                .split_once('\t')
                .ok_or_else(|| Error::Config(format!("lexicon line {} has no tab separator", n + 1)))?;
            lex.insert(
                word.trim(),
                syns.split(',').map(str::trim).filter(|s| !s.is_empty()),
            );
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_LEXICON).expect("bundled lexicon is well formed")
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (word, syns) in &self.entries {
            out.push_str(word);
            out.push('\t');
            out.push_str(&syns.join(","));
            out.push('\n');
        }
        out
    }
}

/// Replaces up to `n` distinct lexicon-covered positions with a uniformly
/// chosen synonym.
pub fn synonym_replace<R: Rng + ?Sized>(
    words: &[String],
    n: usize,
    lex: &SynonymLexicon,
    rng: &mut R,
) -> Vec<String> {
    let mut out = words.to_vec();
    let mut eligible: Vec<usize> = (0..words.len()).filter(|&i| lex.contains(&words[i])).collect();
    eligible.shuffle(rng);
    for &i in eligible.iter().take(n) {
        let syns = lex.get(&words[i]).expect("eligible word has an entry");
        out[i] = syns[rng.gen_range(0..syns.len())].clone();
    }
    out
}

/// `n` times, inserts a synonym of a random covered word at a random position.
pub fn random_insert<R: Rng + ?Sized>(
    words: &[String],
    n: usize,
    lex: &SynonymLexicon,
    rng: &mut R,
) -> Vec<String> {
    let mut out = words.to_vec();
    for _ in 0..n {
        let covered: Vec<usize> = (0..out.len()).filter(|&i| lex.contains(&out[i])).collect();
        let Some(&pick) = covered.choose(rng) else {
            break;
        };
        let syns = lex.get(&out[pick]).expect("covered word has an entry");
        let syn = syns[rng.gen_range(0..syns.len())].clone();
        let at = rng.gen_range(0..=out.len());
        out.insert(at, syn);
    }
    out
}

/// `n` times, exchanges two distinct random positions.
pub fn random_swap<R: Rng + ?Sized>(words: &[String], n: usize, rng: &mut R) -> Vec<String> {
    let mut out = words.to_vec();
    if out.len() < 2 {
        return out;
    }
    for _ in 0..n {
        let i = rng.gen_range(0..out.len());
        let mut j = rng.gen_range(0..out.len() - 1);
        if j >= i {
            j += 1;
        }
        out.swap(i, j);
    }
    out
}

/// Deletes each word independently with probability `p`. If every word would
/// go, one uniformly chosen original word is kept.
pub fn random_delete<R: Rng + ?Sized>(words: &[String], p: f64, rng: &mut R) -> Vec<String> {
    if words.is_empty() {
        return Vec::new();
    }
    let p = p.clamp(0.0, 1.0);
    let out: Vec<String> = words.iter().filter(|_| !rng.gen_bool(p)).cloned().collect();
    if out.is_empty() {
        vec![words[rng.gen_range(0..words.len())].clone()]
    } else {
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpProbabilities {
    pub synonym_replace: f64,
    pub random_insert: f64,
    pub random_swap: f64,
    pub random_delete: f64,
}

impl Default for OpProbabilities {
    fn default() -> Self {
        OpProbabilities::uniform(0.5)
    }
}

impl OpProbabilities {
    pub fn uniform(p: f64) -> Self {
        OpProbabilities {
            synonym_replace: p,
            random_insert: p,
            random_swap: p,
            random_delete: p,
        }
    }
}

/// How the operation count `n` is drawn for replace, insert and swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NMode {
    /// Uniform integer in `[1, current word count]`.
    #[default]
    Uniform,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub op_probability: OpProbabilities,
    pub deletion_p: f64,
    pub n_mode: NMode,
    pub seed: u64,
    pub include_title: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            op_probability: OpProbabilities::default(),
            deletion_p: 0.1,
            n_mode: NMode::Uniform,
            seed: 0,
            include_title: false,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.op_probability;
        for (name, v) in [
            ("synonym_replace", p.synonym_replace),
            ("random_insert", p.random_insert),
            ("random_swap", p.random_swap),
            ("random_delete", p.random_delete),
            ("deletion_p", self.deletion_p),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.n_mode == NMode::Fixed(0) {
            return Err(Error::invalid("fixed n must be at least 1"));
        }
        Ok(())
    }

    fn draw_n<R: Rng + ?Sized>(&self, word_count: usize, rng: &mut R) -> usize {
        match self.n_mode {
            NMode::Uniform => rng.gen_range(1..=word_count),
            NMode::Fixed(n) => n,
        }
    }
}

fn eda_words<R: Rng + ?Sized>(text: &str, cfg: &AugmentConfig, lex: &SynonymLexicon, rng: &mut R) -> String {
    let mut words: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    let p = &cfg.op_probability;
    if rng.gen_bool(p.synonym_replace) && !words.is_empty() {
        let n = cfg.draw_n(words.len(), rng);
        words = synonym_replace(&words, n, lex, rng);
    }
    if rng.gen_bool(p.random_insert) && !words.is_empty() {
        let n = cfg.draw_n(words.len(), rng);
        words = random_insert(&words, n, lex, rng);
    }
    if rng.gen_bool(p.random_swap) && !words.is_empty() {
        let n = cfg.draw_n(words.len(), rng);
        words = random_swap(&words, n, rng);
    }
    if rng.gen_bool(p.random_delete) {
        words = random_delete(&words, cfg.deletion_p, rng);
    }
    words.join(" ")
}

/// Id given to the `ordinal`-th augmented copy of `source_id`.
pub fn augmented_id(source_id: &str, ordinal: usize) -> String {
    format!("{source_id}~eda{ordinal}")
}

/// Applies the four operations in fixed order (replace, insert, swap,
/// delete), each gated by its own probability. The body is augmented; the
/// title only when `include_title` is set. The label is copied unchanged.
///
/// `cfg` must already be validated.
pub fn eda_augment<R: Rng + ?Sized>(
    rec: &Record,
    ordinal: usize,
    cfg: &AugmentConfig,
    lex: &SynonymLexicon,
    rng: &mut R,
) -> Record {
    let body = eda_words(&rec.body, cfg, lex, rng);
    let title = if cfg.include_title {
        eda_words(&rec.title, cfg, lex, rng)
    } else {
        rec.title.clone()
    };
    Record {
        id: augmented_id(&rec.id, ordinal),
        title,
        body,
        label: rec.label.clone(),
    }
}

/// Brings every class below `ceil(r * max_count)` up to that target with
/// augmented copies of its own members (sources drawn uniformly with
/// replacement). Originals are kept in place; additions follow them, grouped
/// by class in name order.
pub fn expand_minority(
    train: &Dataset,
    r: f64,
    cfg: &AugmentConfig,
    lex: &SynonymLexicon,
) -> Result<Dataset> {
    validate_rate(r)?;
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let max = *train.class_counts().values().max().expect("non-empty");
    let target = target_count(r, max);

    let mut members: BTreeMap<&str, Vec<&Record>> = BTreeMap::new();
    for rec in train {
        members.entry(rec.label.as_str()).or_default().push(rec);
    }
    let mut extra = Vec::new();
    for (class, recs) in members {
        if recs.len() >= target {
            continue;
        }
        let mut rng = stage_rng(cfg.seed, &format!("eda/{class}"));
        for ordinal in 0..target - recs.len() {
            let src = recs[rng.gen_range(0..recs.len())];
            extra.push(eda_augment(src, ordinal, cfg, lex, &mut rng));
        }
    }
    train.extended(extra)
}

/// Appends one augmented copy of every record.
pub fn augment_every(train: &Dataset, cfg: &AugmentConfig, lex: &SynonymLexicon) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = stage_rng(cfg.seed, "eda/all");
    let extra = train
        .iter()
        .map(|rec| eda_augment(rec, 0, cfg, lex, &mut rng))
        .collect();
    train.extended(extra)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn lex(pairs: &[(&str, &[&str])]) -> SynonymLexicon {
        let mut l = SynonymLexicon::new();
        for (k, v) in pairs {
            l.insert(k, v.iter().copied());
        }
        l
    }

    #[test]
    fn lexicon_invariants_hold_after_parse() {
        let l = SynonymLexicon::parse("# c\nfast\tquick, fast ,rapid\nempty\t\nfast\tquick\n").unwrap();
        assert_eq!(l.get("fast").unwrap(), ["quick", "rapid"]);
        assert!(!l.contains("empty"));
        assert!(SynonymLexicon::parse("no tab here").is_err());
        assert!(!SynonymLexicon::bundled().is_empty());
    }

    #[test]
    fn empty_lexicon_leaves_words_alone() {
        let mut rng = rng_from_seed(1);
        let words = w("fast red car");
        assert_eq!(
            synonym_replace(&words, 2, &SynonymLexicon::new(), &mut rng),
            words
        );
        assert_eq!(random_insert(&words, 2, &SynonymLexicon::new(), &mut rng), words);
    }

    #[test]
    fn single_eligible_position() {
        let l = lex(&[("fast", &["quick"])]);
        let mut rng = rng_from_seed(2);
        assert_eq!(synonym_replace(&w("fast car"), 1, &l, &mut rng), w("quick car"));
        let ins = random_insert(&w("fast"), 1, &l, &mut rng);
        assert_eq!(ins.len(), 2);
        assert!(ins.contains(&"quick".to_string()));
    }

    #[test]
    fn replace_saturates() {
        let l = lex(&[("a", &["x"]), ("b", &["y"])]);
        for seed in 0..20 {
            let mut rng = rng_from_seed(seed);
            assert_eq!(synonym_replace(&w("a b c a"), 10, &l, &mut rng), w("x y c x"));
        }
    }

    #[test]
    fn insert_counts() {
        let l = lex(&[("a", &["x", "y"]), ("b", &["z"])]);
        let mut rng = rng_from_seed(3);
        assert_eq!(random_insert(&w("a b c"), 3, &l, &mut rng).len(), 6);
    }

    #[test]
    fn swap_edge_cases() {
        let mut rng = rng_from_seed(4);
        assert_eq!(random_swap(&w("a"), 3, &mut rng), w("a"));
        assert!(random_swap(&[], 3, &mut rng).is_empty());
        assert_eq!(random_swap(&w("a b"), 1, &mut rng), w("b a"));
    }

    #[test]
    fn delete_edge_cases() {
        let mut rng = rng_from_seed(5);
        let words = w("a b c d");
        assert_eq!(random_delete(&words, 0.0, &mut rng), words);
        let one = random_delete(&words, 1.0, &mut rng);
        assert_eq!(one.len(), 1);
        assert!(words.contains(&one[0]));
    }

    #[test]
    fn identity_configuration() {
        let cfg = AugmentConfig {
            op_probability: OpProbabilities::uniform(0.0),
            ..AugmentConfig::default()
        };
        let rec = Record::new("r1", "title here", "some body words", "x");
        let out = eda_augment(&rec, 0, &cfg, &SynonymLexicon::bundled(), &mut rng_from_seed(0));
        assert_eq!(out.body, rec.body);
        assert_eq!(out.title, rec.title);
        assert_eq!(out.label, "x");
        assert_eq!(out.id, "r1~eda0");
    }

    #[test]
    fn config_validation() {
        let mut cfg = AugmentConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.deletion_p = 1.5;
        assert!(cfg.validate().is_err());
        cfg.deletion_p = 0.1;
        cfg.n_mode = NMode::Fixed(0);
        assert!(cfg.validate().is_err());
    }

    fn class_ds(counts: &[(&str, usize)]) -> Dataset {
        let mut recs = Vec::new();
        for (label, n) in counts {
            for i in 0..*n {
                recs.push(Record::new(
                    format!("{label}{i}"),
                    "",
                    format!("fast car number{i} arrived"),
                    *label,
                ));
            }
        }
        Dataset::new(recs).unwrap()
    }

    #[test]
    fn expand_to_target() {
        let d = class_ds(&[("A", 100), ("B", 10)]);
        let out = expand_minority(&d, 0.2, &AugmentConfig::default(), &SynonymLexicon::bundled()).unwrap();
        assert_eq!(out.class_counts().get("A"), Some(&100));
        assert_eq!(out.class_counts().get("B"), Some(&20));
        assert_eq!(&out.records()[..d.len()], d.records());
        for rec in &out.records()[d.len()..] {
            let src = rec.id.split('~').next().unwrap();
            let orig = d.iter().find(|r| r.id == src).unwrap();
            assert_eq!(orig.label, rec.label);
        }
    }

    #[test]
    fn expand_noop_and_errors() {
        let d = class_ds(&[("A", 10), ("B", 10)]);
        let cfg = AugmentConfig::default();
        let l = SynonymLexicon::new();
        assert_eq!(expand_minority(&d, 1.0, &cfg, &l).unwrap(), d);
        for r in [0.0, -0.5, 1.01] {
            assert!(expand_minority(&d, r, &cfg, &l).is_err());
        }
    }

    #[test]
    fn expand_is_deterministic() {
        let d = class_ds(&[("A", 30), ("B", 3), ("C", 1)]);
        let cfg = AugmentConfig {
            seed: 9,
            ..AugmentConfig::default()
        };
        let l = SynonymLexicon::bundled();
        assert_eq!(
            expand_minority(&d, 0.5, &cfg, &l).unwrap(),
            expand_minority(&d, 0.5, &cfg, &l).unwrap()
        );
    }

    #[test]
    fn augment_every_doubles() {
        let d = class_ds(&[("A", 4), ("B", 2)]);
        let out = augment_every(&d, &AugmentConfig::default(), &SynonymLexicon::bundled()).unwrap();
        assert_eq!(out.len(), 12);
        assert_eq!(out.class_counts().get("B"), Some(&4));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn swap_preserves_multiset(words in proptest::collection::vec("[a-e]{1,3}", 0..12), n in 1usize..8, seed: u64) {
                let mut rng = rng_from_seed(seed);
                let mut out = random_swap(&words, n, &mut rng);
                let mut sorted = words.clone();
                out.sort();
                sorted.sort();
                prop_assert_eq!(out, sorted);
            }

            #[test]
            fn delete_yields_subsequence(words in proptest::collection::vec("[a-e]{1,3}", 1..20), p in 0.0f64..0.9, seed: u64) {
                let mut rng = rng_from_seed(seed);
                let out = random_delete(&words, p, &mut rng);
                prop_assert!(!out.is_empty());
                if out.len() > 1 {
                    let mut it = words.iter();
                    for x in &out {
                        prop_assert!(it.any(|y| y == x));
                    }
                }
            }

            #[test]
            fn replace_preserves_length(words in proptest::collection::vec("[a-e]", 0..12), n in 1usize..6, seed: u64) {
                let l = lex(&[("a", &["x"]), ("c", &["y", "z"])]);
                let mut rng = rng_from_seed(seed);
                prop_assert_eq!(synonym_replace(&words, n, &l, &mut rng).len(), words.len());
            }
        }
    }
}
