//! WordPiece vocabulary handling with greedy longest-match-first encoding.
//!
//! Vocabulary files hold one token per line; a token's id is its zero-based
//! line index. Word-internal pieces carry the `##` prefix and the special
//! tokens are the literal lines `[UNK]`, `[PAD]`, `[CLS]` and `[SEP]`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNK: &str = "[UNK]";
pub const PAD: &str = "[PAD]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const CONTINUATION: &str = "##";
pub const DEFAULT_MAX_WORD_CHARS: usize = 100;
pub const DEFAULT_VOCAB_SIZE: usize = 8000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Specials {
    pub unk: u32,
    pub pad: Option<u32>,
    pub cls: Option<u32>,
    pub sep: Option<u32>,
}

impl Specials {
    fn contains(&self, id: u32) -> bool {
        id == self.unk || [self.pad, self.cls, self.sep].contains(&Some(id))
    }
}

/// An immutable subword vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabModel {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    specials: Specials,
    max_word_chars: usize,
    frame: bool,
}

/// One encoded instance. `ids` is padded to capacity when the vocabulary has
/// a pad token; `length` counts the non-pad prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSeq {
    pub id: String,
    pub ids: Vec<u32>,
    pub length: usize,
    pub label_id: usize,
}

impl TokenSeq {
    pub fn with_label(mut self, label_id: usize) -> Self {
        self.label_id = label_id;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// The non-pad prefix of `ids`.
    pub fn tokens(&self) -> &[u32] {
        &self.ids[..self.length]
    }
}

impl VocabModel {
    /// Builds a vocabulary from tokens in id order.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(Error::DuplicateToken {
                    token: t.clone(),
                    line: i + 1,
                });
            }
        }
        let unk = *ids.get(UNK).ok_or_else(|| Error::MissingSpecial(UNK.into()))?;
        let specials = Specials {
            unk,
            pad: ids.get(PAD).copied(),
            cls: ids.get(CLS).copied(),
            sep: ids.get(SEP).copied(),
        };
        Ok(VocabModel {
            tokens,
            ids,
            specials,
            max_word_chars: DEFAULT_MAX_WORD_CHARS,
            frame: true,
        })
    }

    pub fn with_max_word_chars(mut self, n: usize) -> Self {
        self.max_word_chars = n.max(1);
        self
    }

    /// Enables or disables the `[CLS] ... [SEP]` frame around each sequence.
    pub fn with_frame(mut self, frame: bool) -> Self {
        self.frame = frame;
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn specials(&self) -> Specials {
        self.specials
    }

    pub fn max_word_chars(&self) -> usize {
        self.max_word_chars
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    fn framed(&self, capacity: usize) -> Option<(u32, u32)> {
        match (self.frame, self.specials.cls, self.specials.sep) {
            (true, Some(c), Some(s)) if capacity >= 2 => Some((c, s)),
            _ => None,
        }
    }

    /// Greedy longest-match-first segmentation of one word. A word that cannot
    /// be fully segmented, or is longer than `max_word_chars`, maps to a
    /// single unk id.
    pub fn encode_word(&self, word: &str) -> Vec<u32> {
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();
        let n_chars = bounds.len() - 1;
        if n_chars == 0 {
            return Vec::new();
        }
        if n_chars > self.max_word_chars {
            return vec![self.specials.unk];
        }
        let mut pieces = Vec::new();
        let mut key = String::with_capacity(word.len() + CONTINUATION.len());
        let mut start = 0;
        while start < n_chars {
            let mut matched = None;
            for end in (start + 1..=n_chars).rev() {
                key.clear();
                if start > 0 {
                    key.push_str(CONTINUATION);
                }
                key.push_str(&word[bounds[start]..bounds[end]]);
                if let Some(&id) = self.ids.get(key.as_str()) {
                    matched = Some((id, end));
                    break;
                }
            }
            match matched {
                Some((id, end)) => {
                    pieces.push(id);
                    start = end;
                }
                None => return vec![self.specials.unk],
            }
        }
        pieces
    }

    /// Encodes whitespace-separated text into a framed, truncated and padded
    /// sequence of at most `capacity` ids.
    pub fn encode(&self, text: &str, capacity: usize) -> TokenSeq {
        let frame = self.framed(capacity);
        let budget = capacity - if frame.is_some() { 2 } else { 0 };
        let mut ids = Vec::with_capacity(capacity);
        if let Some((cls, _)) = frame {
            ids.push(cls);
        }
        let body_start = ids.len();
        for word in text.split_whitespace() {
            if ids.len() - body_start >= budget {
                break;
            }
            ids.extend(self.encode_word(word));
        }
        ids.truncate(body_start + budget);
        if let Some((_, sep)) = frame {
            ids.push(sep);
        }
        let length = ids.len();
        if let Some(pad) = self.specials.pad {
            ids.resize(capacity, pad);
        }
        TokenSeq {
            id: String::new(),
            ids,
            length,
            label_id: 0,
        }
    }

    /// Number of unk ids produced for `text`, ignoring capacity.
    pub fn unk_count(&self, text: &str) -> usize {
        text.split_whitespace()
            .flat_map(|w| self.encode_word(w))
            .filter(|&id| id == self.specials.unk)
            .count()
    }

    /// Rebuilds text: special and pad ids are dropped, `##` pieces are glued
    /// to the preceding piece, words are separated by single spaces.
    pub fn decode(&self, seq: &TokenSeq) -> Result<String> {
        let mut words: Vec<String> = Vec::new();
        for &id in &seq.ids {
            let token = self.token(id).ok_or(Error::TokenOutOfRange {
                id,
                size: self.tokens.len(),
            })?;
            if self.specials.contains(id) {
                continue;
            }
            match (token.strip_prefix(CONTINUATION), words.last_mut()) {
                (Some(rest), Some(last)) => last.push_str(rest),
                (Some(rest), None) => words.push(rest.to_string()),
                (None, _) => words.push(token.to_string()),
            }
        }
        Ok(words.join(" "))
    }

    /// Vocabulary file contents, one token per line.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }
}

/// Parses vocabulary file contents.
pub fn parse_vocab(text: &str) -> Result<VocabModel> {
    VocabModel::from_tokens(text.lines().map(|l| l.trim_end_matches('\r')))
}

pub fn load_vocab(path: impl AsRef<Path>) -> Result<VocabModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vocab(&text)
}

/// Induces a vocabulary from cleaned texts: the four special tokens, every
/// observed character with its `##` continuation, then whole words and `##`
/// suffix pieces by descending corpus frequency (ties lexicographic) until
/// `target_size` is reached.
pub fn train_vocab<S: AsRef<str>>(corpus: &[S], target_size: usize) -> Result<VocabModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut word_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for text in corpus {
        for w in text.as_ref().split_whitespace() {
            *word_freq.entry(w).or_insert(0) += 1;
        }
    }
    let alphabet: BTreeSet<char> = word_freq.keys().flat_map(|w| w.chars()).collect();
    let specials = [PAD, UNK, CLS, SEP];
    let required = specials.len() + 2 * alphabet.len();
    if target_size < required {
        return Err(Error::VocabTooSmall {
            target: target_size,
            required,
        });
    }

    let mut tokens: Vec<String> = specials.iter().map(|s| s.to_string()).collect();
    tokens.extend(alphabet.iter().map(|c| c.to_string()));
    tokens.extend(alphabet.iter().map(|c| format!("{CONTINUATION}{c}")));
    let mut present: BTreeSet<String> = tokens.iter().cloned().collect();

    let mut candidates: BTreeMap<String, usize> = BTreeMap::new();
    for (&word, &freq) in &word_freq {
        let starts: Vec<usize> = word.char_indices().map(|(i, _)| i).collect();
        if starts.len() > DEFAULT_MAX_WORD_CHARS {
            continue;
        }
        if starts.len() >= 2 {
            *candidates.entry(word.to_string()).or_insert(0) += freq;
        }
        // suffixes of at least two characters
        for &s in starts.iter().skip(1).take(starts.len().saturating_sub(2)) {
            *candidates
                .entry(format!("{CONTINUATION}{}", &word[s..]))
                .or_insert(0) += freq;
        }
    }
    let mut ranked: Vec<(String, usize)> = candidates.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    for (token, _) in ranked {
        if tokens.len() >= target_size {
            break;
        }
        if present.insert(token.clone()) {
            tokens.push(token);
        }
    }
    VocabModel::from_tokens(tokens)
}
