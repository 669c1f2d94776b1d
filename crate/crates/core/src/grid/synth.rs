//! Synthetic imbalanced corpus generator.
//!
//! Every class owns a disjoint set of pseudo-words (its signature); all
//! classes share a pool of filler words. Each word of a record is drawn from
//! the class signature with probability `1 - noise`, otherwise from the
//! filler pool. Pseudo-words are consonant-vowel syllable strings ending in a
//! vowel, so cleaning leaves them intact.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::SynonymLexicon;
use crate::corpus::{Dataset, Record};
use crate::error::{Error, Result};
use crate::seed::{stage_rng, SeededRng};
use crate::textprep::bundled_stopwords;

const CONSONANTS: &[u8] = b"bdfgklmnprtvz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub counts: Vec<usize>,
    pub vocab_per_class: usize,
    pub filler_vocab: usize,
    pub noise: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub title_words: usize,
    /// Synonyms listed per word in the companion lexicon.
    pub synonyms_per_word: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// Five classes at 100:10:10:5:5 with noise 0.3.
    fn default() -> Self {
        SynthSpec {
            counts: vec![100, 10, 10, 5, 5],
            vocab_per_class: 60,
            filler_vocab: 200,
            noise: 0.3,
            min_words: 6,
            max_words: 14,
            title_words: 3,
            synonyms_per_word: 3,
            seed: 2025,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.counts.len() < 2 {
            return Err(Error::invalid("synthetic corpus needs at least two classes"));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::invalid(format!(
                "noise must lie in [0, 1], got {}",
                self.noise
            )));
        }
        if self.vocab_per_class == 0 || self.filler_vocab == 0 {
            return Err(Error::invalid("vocabulary sizes must be at least 1"));
        }
        if self.min_words == 0 || self.min_words > self.max_words {
            return Err(Error::invalid("need 1 <= min_words <= max_words"));
        }
        Ok(())
    }

    pub fn class_name(k: usize) -> String {
        format!("class_{k:02}")
    }
}

/// Word pools: one signature list per class plus the shared filler list.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthVocab {
    pub signatures: Vec<Vec<String>>,
    pub filler: Vec<String>,
}

fn pseudo_word(rng: &mut SeededRng) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut w = String::with_capacity(6);
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
    }
    w
}

/// Draws the disjoint word pools for `spec`.
pub fn synth_vocab(spec: &SynthSpec) -> SynthVocab {
    let mut rng = stage_rng(spec.seed, "synth/vocab");
    let mut used: BTreeSet<String> = bundled_stopwords();
    let mut draw = |n: usize, rng: &mut SeededRng| -> Vec<String> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let w = pseudo_word(rng);
            if used.insert(w.clone()) {
                out.push(w);
            }
        }
        out
    };
    let signatures = (0..spec.counts.len())
        .map(|_| draw(spec.vocab_per_class, &mut rng))
        .collect();
    let filler = draw(spec.filler_vocab, &mut rng);
    SynthVocab { signatures, filler }
}

fn sentence(n: usize, signature: &[String], filler: &[String], noise: f64, rng: &mut SeededRng) -> String {
    (0..n)
        .map(|_| {
            let pool = if rng.gen_bool(noise) { filler } else { signature };
            pool[rng.gen_range(0..pool.len())].as_str()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generates the corpus. Records are shuffled; ids are `s00000`, `s00001`, ...
pub fn gen_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let vocab = synth_vocab(spec);
    let mut rng = stage_rng(spec.seed, "synth/records");
    let mut drafts = Vec::with_capacity(spec.counts.iter().sum());
    for (k, &count) in spec.counts.iter().enumerate() {
        let sig = &vocab.signatures[k];
        for _ in 0..count {
            let len = rng.gen_range(spec.min_words..=spec.max_words);
            let title = sentence(spec.title_words, sig, &vocab.filler, spec.noise, &mut rng);
            let body = sentence(len, sig, &vocab.filler, spec.noise, &mut rng);
            drafts.push((title, body, SynthSpec::class_name(k)));
        }
    }
    drafts.shuffle(&mut rng);
    let records = drafts
        .into_iter()
        .enumerate()
        .map(|(i, (title, body, label))| Record::new(format!("s{i:05}"), title, body, label))
        .collect();
    Dataset::new(records)
}

/// Companion lexicon: each word lists other words from its own pool.
pub fn synthetic_lexicon(spec: &SynthSpec) -> SynonymLexicon {
    let vocab = synth_vocab(spec);
    let mut rng = stage_rng(spec.seed, "synth/lexicon");
    let mut lex = SynonymLexicon::new();
    for pool in vocab.signatures.iter().chain(std::iter::once(&vocab.filler)) {
        if pool.len() < 2 {
            continue;
        }
        for word in pool {
            let others: Vec<&String> = pool.iter().filter(|w| *w != word).collect();
            let picks = others.choose_multiple(&mut rng, spec.synonyms_per_word.min(others.len()));
            lex.insert(word, picks.map(|w| w.to_string()));
        }
    }
    lex
}
