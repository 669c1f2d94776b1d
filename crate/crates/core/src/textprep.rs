//! Text cleaning (stopwords, numerals, edge punctuation, lemmatization) and
//! interquartile-range length filtering.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Record};
use crate::error::{Error, Result};

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Parses a stopword list: one word per line, `#` comment lines and blank
/// lines ignored, entries lowercased.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter(|l| !l.contains(char::is_whitespace))
        .map(str::to_lowercase)
        .collect()
}

pub fn bundled_stopwords() -> BTreeSet<String> {
    parse_stopwords(BUNDLED_STOPWORDS)
}

pub fn load_stopwords(path: impl AsRef<Path>) -> Result<BTreeSet<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_stopwords(&text))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanConfig {
    pub stopword_set: BTreeSet<String>,
    pub remove_numeric: bool,
    pub lowercase: bool,
    pub lemmatize: bool,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            stopword_set: bundled_stopwords(),
            remove_numeric: true,
            lowercase: true,
            lemmatize: true,
        }
    }
}

/// Maps a word to its base form.
pub trait Lemmatizer: Send + Sync {
    fn lemmatize(&self, word: &str) -> String;
}

/// Ordered suffix rules applied until no rule fires:
/// `-ies -> -y`, `-es -> ""` after sibilants, `-s -> ""`, then `-ing` and
/// `-ed` removal with doubled-final-consonant reduction.
#[derive(Debug, Clone, Copy, Default)]
pub struct SuffixLemmatizer;

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

fn reduce_double(stem: &str) -> String {
    let mut chars = stem.chars().rev();
    match (chars.next(), chars.next()) {
        (Some(a), Some(b))
            if a == b && a.is_ascii_alphabetic() && !is_vowel(a) && !matches!(a, 'l' | 's' | 'z') =>
        {
            stem[..stem.len() - a.len_utf8()].to_string()
        }
        _ => stem.to_string(),
    }
}

fn verbal_stem(stem: &str) -> Option<String> {
    (stem.chars().count() >= 3 && stem.chars().any(is_vowel)).then(|| reduce_double(stem))
}

impl SuffixLemmatizer {
    fn step(word: &str) -> Option<String> {
        let n = word.chars().count();
        if n > 4 && word.ends_with("ies") {
            return Some(format!("{}y", &word[..word.len() - 3]));
        }
        if ["sses", "xes", "zes", "ches", "shes"]
            .iter()
            .any(|s| word.ends_with(s))
            && n > 4
        {
            return Some(word[..word.len() - 2].to_string());
        }
        if n >= 4 && word.ends_with('s') && !["ss", "us", "is"].iter().any(|s| word.ends_with(s)) {
            return Some(word[..word.len() - 1].to_string());
        }
        if let Some(stem) = word.strip_suffix("ing") {
            if let Some(s) = verbal_stem(stem) {
                return Some(s);
            }
        }
        if !word.ends_with("eed") {
            if let Some(stem) = word.strip_suffix("ed") {
                if let Some(s) = verbal_stem(stem) {
                    return Some(s);
                }
            }
        }
        None
    }
}

impl Lemmatizer for SuffixLemmatizer {
    fn lemmatize(&self, word: &str) -> String {
        let mut current = word.to_string();
        while let Some(next) = Self::step(&current) {
            current = next;
        }
        current
    }
}

/// Lemmatizes one lowercase token with the bundled suffix rules.
pub fn lemmatize_token(word: &str) -> String {
    SuffixLemmatizer.lemmatize(word)
}

fn strip_edges(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

fn is_numeric(token: &str) -> bool {
    token.chars().any(char::is_numeric)
        && token
            .chars()
            .all(|c| c.is_numeric() || matches!(c, '.' | ',' | ':' | '/' | '-' | '%'))
}

struct Cleaner<'a> {
    cfg: &'a CleanConfig,
    lemmatizer: &'a dyn Lemmatizer,
}

impl Cleaner<'_> {
    fn dropped(&self, token: &str) -> bool {
        token.is_empty()
            || self.cfg.stopword_set.contains(&token.to_lowercase())
            || (self.cfg.remove_numeric && is_numeric(token))
    }

    fn token(&self, raw: &str) -> Option<String> {
        let lowered;
        let token = if self.cfg.lowercase {
            lowered = raw.to_lowercase();
            lowered.as_str()
        } else {
            raw
        };
        let mut token = strip_edges(token).to_string();
        if self.dropped(&token) {
            return None;
        }
        if self.cfg.lemmatize {
            loop {
                let next = strip_edges(&self.lemmatizer.lemmatize(&token)).to_string();
                if next == token {
                    break;
                }
                token = next;
            }
            if self.dropped(&token) {
                return None;
            }
        }
        Some(token)
    }
}

/// Cleans raw text with a caller-supplied lemmatizer.
pub fn clean_text_with(raw: &str, cfg: &CleanConfig, lemmatizer: &dyn Lemmatizer) -> String {
    let cleaner = Cleaner { cfg, lemmatizer };
    raw.split_whitespace()
        .filter_map(|t| cleaner.token(t))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Cleans raw text: lowercasing, edge-punctuation stripping, stopword and
/// numeric-token removal, lemmatization. Output tokens are single-space joined.
pub fn clean_text(raw: &str, cfg: &CleanConfig) -> String {
    clean_text_with(raw, cfg, &SuffixLemmatizer)
}

/// Applies [`clean_text`] to every title and body.
pub fn clean_dataset(d: &Dataset, cfg: &CleanConfig) -> Dataset {
    d.map_text(|t| clean_text(t, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IqrConfig {
    pub multiplier: f64,
}

impl Default for IqrConfig {
    fn default() -> Self {
        IqrConfig { multiplier: 1.5 }
    }
}

/// Length in whitespace-separated words of a record's title plus body.
pub fn word_count(r: &Record) -> usize {
    r.title.split_whitespace().count() + r.body.split_whitespace().count()
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fences and outcome of one IQR pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IqrReport {
    pub q1: f64,
    pub q3: f64,
    pub lower: f64,
    pub upper: f64,
    pub kept: usize,
    pub dropped: Vec<String>,
}

/// Filters with a report of the fences and dropped ids.
pub fn iqr_filter_report(d: &Dataset, cfg: &IqrConfig) -> Result<(Dataset, IqrReport)> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.multiplier.is_nan() || cfg.multiplier < 0.0 {
        return Err(Error::invalid(format!(
            "IQR multiplier must be nonnegative, got {}",
            cfg.multiplier
        )));
    }
    let lengths: Vec<f64> = d.iter().map(|r| word_count(r) as f64).collect();
    let mut sorted = lengths.clone();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    let spread = q3 - q1;
    let lower = q1 - cfg.multiplier * spread;
    let upper = q3 + cfg.multiplier * spread;
    let inside = |len: f64| len >= lower && len <= upper;

    let mut filtered = d.filter_indexed(|i, _| inside(lengths[i]));
    if filtered.is_empty() {
        filtered = d.clone();
    }
    let kept_ids: BTreeSet<&str> = filtered.iter().map(|r| r.id.as_str()).collect();
    let dropped = d
        .iter()
        .filter(|r| !kept_ids.contains(r.id.as_str()))
        .map(|r| r.id.clone())
        .collect();
    let report = IqrReport {
        q1,
        q3,
        lower,
        upper,
        kept: filtered.len(),
        dropped,
    };
    Ok((filtered, report))
}

/// Keeps records whose word count lies inside the Tukey fences
/// `[Q1 - m*IQR, Q3 + m*IQR]`. Order is preserved and the result is never empty.
pub fn iqr_filter(d: &Dataset, cfg: &IqrConfig) -> Result<Dataset> {
    iqr_filter_report(d, cfg).map(|(d, _)| d)
}
