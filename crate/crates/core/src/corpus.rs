//! Labeled records, delimited-file ingestion, label encoding and stratified
//! splitting.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::stage_rng;

/// One labeled text instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub title: String,
    pub body: String,
    pub label: String,
}

impl Record {
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        body: impl Into<String>,
        label: impl Into<String>,
    ) -> Self {
        Record {
            id: id.into(),
            title: title.into(),
            body: body.into(),
            label: label.into(),
        }
    }

    /// Title and body joined by a single space, skipping empty parts.
    pub fn text(&self) -> String {
        match (self.title.is_empty(), self.body.is_empty()) {
            (true, _) => self.body.clone(),
            (false, true) => self.title.clone(),
            (false, false) => format!("{} {}", self.title, self.body),
        }
    }
}

/// An ordered collection of records with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Dataset {
    records: Vec<Record>,
    class_counts: BTreeMap<String, usize>,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate ids and empty labels.
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        let mut class_counts = BTreeMap::new();
        for r in &records {
            if r.label.is_empty() {
                return Err(Error::EmptyLabel(r.id.clone()));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
            *class_counts.entry(r.label.clone()).or_insert(0) += 1;
        }
        Ok(Dataset {
            records,
            class_counts,
        })
    }

    pub fn empty() -> Self {
        Dataset::default()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    pub fn class_counts(&self) -> &BTreeMap<String, usize> {
        &self.class_counts
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Record> {
        self.records.iter()
    }

    /// Records whose index passes `keep`, order preserved.
    pub fn filter_indexed(&self, mut keep: impl FnMut(usize, &Record) -> bool) -> Dataset {
        let records: Vec<Record> = self
            .records
            .iter()
            .enumerate()
            .filter(|(i, r)| keep(*i, r))
            .map(|(_, r)| r.clone())
            .collect();
        Dataset::new(records).expect("subset of a valid dataset is valid")
    }

    /// Same ids and labels, with every title and body rewritten by `f`.
    pub fn map_text(&self, mut f: impl FnMut(&str) -> String) -> Dataset {
        let records = self
            .records
            .iter()
            .map(|r| Record {
                id: r.id.clone(),
                title: f(&r.title),
                body: f(&r.body),
                label: r.label.clone(),
            })
            .collect();
        Dataset {
            records,
            class_counts: self.class_counts.clone(),
        }
    }

    /// Appends records, keeping the id-uniqueness invariant.
    pub fn extended(&self, extra: Vec<Record>) -> Result<Dataset> {
        let mut records = self.records.clone();
        records.extend(extra);
        Dataset::new(records)
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Record;
    type IntoIter = std::slice::Iter<'a, Record>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// Column-name mapping for delimited input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub id: String,
    pub title: String,
    pub body: String,
    pub label: String,
    pub delimiter: char,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            id: "id".into(),
            title: "title".into(),
            body: "text".into(),
            label: "label".into(),
            delimiter: ',',
        }
    }
}

impl Schema {
    fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| Error::invalid(format!("delimiter {:?} is not ASCII", self.delimiter)))
    }
}

/// Loads a delimited file. Missing title or body cells load as empty text;
/// a missing id column falls back to the zero-based row number.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, schema)
}

pub fn read_dataset(reader: impl Read, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let label_col = col(&schema.label).ok_or_else(|| Error::MissingColumn(schema.label.clone()))?;
    let id_col = col(&schema.id);
    let title_col = col(&schema.title);
    let body_col = col(&schema.body);

    let mut records = Vec::new();
    for (row, result) in rdr.records().enumerate() {
        let rec = result?;
        let cell = |c: Option<usize>| c.and_then(|i| rec.get(i)).unwrap_or("").to_string();
        let id = match id_col {
            Some(_) => cell(id_col),
            None => row.to_string(),
        };
        records.push(Record {
            id,
            title: cell(title_col),
            body: cell(body_col),
            label: cell(Some(label_col)).trim().to_string(),
        });
    }
    Dataset::new(records)
}

/// Writes a dataset with the schema's column names as header.
pub fn write_dataset(path: impl AsRef<Path>, d: &Dataset, schema: &Schema) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_to(file, d, schema)
}

pub fn write_dataset_to(writer: impl Write, d: &Dataset, schema: &Schema) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .from_writer(writer);
    w.write_record([&schema.id, &schema.title, &schema.body, &schema.label])?;
    for r in d {
        w.write_record([&r.id, &r.title, &r.body, &r.label])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Bijection between class names and contiguous ids, ordered lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelCodec {
    classes: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl TryFrom<Vec<String>> for LabelCodec {
    type Error = Error;

    fn try_from(classes: Vec<String>) -> Result<Self> {
        LabelCodec::from_classes(classes)
    }
}

impl From<LabelCodec> for Vec<String> {
    fn from(codec: LabelCodec) -> Self {
        codec.classes
    }
}

impl LabelCodec {
    pub fn from_classes<I, S>(classes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut classes: Vec<String> = classes.into_iter().map(Into::into).collect();
        classes.sort();
        classes.dedup();
        if classes.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let index = classes.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Ok(LabelCodec { classes, index })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn encode(&self, class: &str) -> Result<usize> {
        self.index
            .get(class)
            .copied()
            .ok_or_else(|| Error::UnknownClass(class.to_string()))
    }

    pub fn decode(&self, id: usize) -> Result<&str> {
        self.classes
            .get(id)
            .map(String::as_str)
            .ok_or(Error::ClassIdOutOfRange {
                id,
                num_classes: self.classes.len(),
            })
    }
}

/// Fits a codec covering exactly the label set of `d`.
pub fn fit_label_codec(d: &Dataset) -> Result<LabelCodec> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    LabelCodec::from_classes(d.class_counts().keys().cloned())
}

/// Number of records of a class with `count` members that go to the held-out side.
fn held_out_count(count: usize, fraction: f64) -> usize {
    if count <= 1 {
        return 0;
    }
    ((count as f64 * fraction).round() as usize).min(count - 1)
}

/// Stratified train/test split. Per class, `round(count * test_fraction)`
/// records go to test, except that singleton classes stay in train and at
/// least one record of every class stays in train. Relative order within each
/// side follows the input.
pub fn split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in d.iter().enumerate() {
        by_class.entry(r.label.as_str()).or_default().push(i);
    }
    let mut in_test = vec![false; d.len()];
    for (class, mut members) in by_class {
        let n_test = held_out_count(members.len(), test_fraction);
        let mut rng = stage_rng(seed, &format!("split/{class}"));
        members.shuffle(&mut rng);
        for &i in &members[..n_test] {
            in_test[i] = true;
        }
    }
    let train = d.filter_indexed(|i, _| !in_test[i]);
    let test = d.filter_indexed(|i, _| in_test[i]);
    Ok((train, test))
}

/// Three-way stratified split: the test side is carved first, then the
/// validation side from what remains, as a fraction of the whole.
pub fn split_with_validation(
    d: &Dataset,
    test_fraction: f64,
    validation_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    if !(validation_fraction > 0.0 && test_fraction + validation_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "validation_fraction must be positive and leave room for training, got {validation_fraction}"
        )));
    }
    let (rest, test) = split(d, test_fraction, seed)?;
    let relative = validation_fraction / (1.0 - test_fraction);
    let (train, validation) = split(&rest, relative, seed ^ 0x5a5a_5a5a)?;
    Ok((train, validation, test))
}
