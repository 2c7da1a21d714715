//! The fixed instrument vocabulary used by the classifiers.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::ontology::Ontology;
use crate::store::{EmbeddingStore, SampleMeta};

/// Canonical class order (alphabetical). Every report and CSV uses it.
pub const INSTRUMENTS: [&str; 18] = [
    "accordion",
    "banjo",
    "cello",
    "clarinet",
    "cymbals",
    "drums",
    "flute",
    "guitar",
    "mandolin",
    "organ",
    "piano",
    "saxophone",
    "synthesizer",
    "trombone",
    "trumpet",
    "ukulele",
    "violin",
    "voice",
];

/// Ontology display names (lower-cased) that count as each instrument.
fn aliases(instrument: &str) -> &'static [&'static str] {
    match instrument {
        "accordion" => &["accordion"],
        "banjo" => &["banjo"],
        "cello" => &["cello"],
        "clarinet" => &["clarinet"],
        "cymbals" => &["cymbal", "cymbals"],
        "drums" => &["drum", "drums", "drum kit"],
        "flute" => &["flute"],
        "guitar" => &["guitar"],
        "mandolin" => &["mandolin"],
        "organ" => &["organ"],
        "piano" => &["piano"],
        "saxophone" => &["saxophone"],
        "synthesizer" => &["synthesizer"],
        "trombone" => &["trombone"],
        "trumpet" => &["trumpet"],
        "ukulele" => &["ukulele"],
        "violin" => &["violin", "violin, fiddle", "fiddle"],
        "voice" => &["voice"],
        _ => &[],
    }
}

/// Resolves label ids to class indices.
///
/// The class list is the subset of [`INSTRUMENTS`] present in the ontology,
/// kept in canonical order. Several ontology nodes may map to one class.
#[derive(Debug, Clone)]
pub struct ClassMap {
    names: Vec<String>,
    by_label: HashMap<String, usize>,
}

impl ClassMap {
    pub fn from_ontology(ontology: &Ontology) -> Result<Self> {
        let mut names = Vec::new();
        let mut by_label = HashMap::new();
        for instrument in INSTRUMENTS {
            let alias = aliases(instrument);
            let ids: Vec<&str> = ontology
                .nodes()
                .iter()
                .filter(|n| alias.contains(&n.name.to_lowercase().as_str()))
                .map(|n| n.id.as_str())
                .collect();
            if ids.is_empty() {
                continue;
            }
            let class = names.len();
            names.push(instrument.to_string());
            for id in ids {
                by_label.insert(id.to_string(), class);
            }
        }
        if names.is_empty() {
            return Err(Error::Config("ontology contains none of the instrument classes".into()));
        }
        Ok(Self { names, by_label })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, class: usize) -> &str {
        &self.names[class]
    }

    pub fn class_of_label(&self, label: &str) -> Option<usize> {
        self.by_label.get(label).copied()
    }

    /// First instrument label of the record, in manifest order.
    pub fn class_of(&self, meta: &SampleMeta) -> Option<usize> {
        meta.labels.iter().find_map(|l| self.class_of_label(l))
    }

    /// Every class mentioned by the record, deduplicated.
    pub fn classes_of(&self, meta: &SampleMeta) -> Vec<usize> {
        let mut classes: Vec<usize> = meta.labels.iter().filter_map(|l| self.class_of_label(l)).collect();
        classes.sort_unstable();
        classes.dedup();
        classes
    }
}

/// Rows of a store with a resolved class, flattened for the classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub dim: usize,
    /// Row-major, `labels.len()` rows.
    pub features: Vec<f32>,
    pub labels: Vec<usize>,
}

impl LabeledData {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Rows without an instrument label are skipped.
    pub fn from_store(store: &EmbeddingStore, classes: &ClassMap) -> Self {
        let mut data = Self::new(store.dim());
        for (meta, row) in store.iter() {
            if let Some(class) = classes.class_of(meta) {
                data.push(row, class);
            }
        }
        data
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, row: &[f32], label: usize) {
        debug_assert_eq!(row.len(), self.dim);
        self.features.extend_from_slice(row);
        self.labels.push(label);
    }

    pub fn extend_from(&mut self, other: &LabeledData, indices: &[usize]) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        for &i in indices {
            self.push(other.row(i), other.labels[i]);
        }
        Ok(())
    }

    pub fn concat(parts: &[&LabeledData]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Config("no training data given".into()))?;
        let mut out = Self::new(first.dim);
        for part in parts {
            let all: Vec<usize> = (0..part.len()).collect();
            out.extend_from(part, &all)?;
        }
        Ok(out)
    }
}
