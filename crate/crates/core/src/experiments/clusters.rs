use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classes::ClassMap;
use crate::error::{Error, Result};
use crate::store::{EmbeddingStore, Modality};
use crate::translation::cosine_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterSort {
    /// All audio clusters, then all image clusters.
    ModalityMajor,
    /// Audio and image cluster of each class side by side.
    ClassMajor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClusterKey {
    pub modality: Modality,
    pub class: usize,
}

/// Cosine distances between (modality, class) centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDistanceMatrix {
    pub keys: Vec<ClusterKey>,
    pub class_names: Vec<String>,
    /// Row-major `keys.len()` squared.
    pub values: Vec<f64>,
    /// Cells with no member rows; left out of `keys`.
    pub missing: Vec<ClusterKey>,
}

impl ClusterDistanceMatrix {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.keys.len() + j]
    }

    pub fn distance(&self, a: ClusterKey, b: ClusterKey) -> Option<f64> {
        let i = self.keys.iter().position(|&k| k == a)?;
        let j = self.keys.iter().position(|&k| k == b)?;
        Some(self.get(i, j))
    }

    fn mean_over(&self, keep: impl Fn(ClusterKey, ClusterKey) -> bool) -> Option<f64> {
        let (mut sum, mut n) = (0.0, 0usize);
        for (i, &a) in self.keys.iter().enumerate() {
            for (j, &b) in self.keys.iter().enumerate().skip(i + 1) {
                if keep(a, b) {
                    sum += self.get(i, j);
                    n += 1;
                }
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// Mean distance between the audio and image centroid of the same class.
    pub fn within_class_cross_modality_mean(&self) -> Option<f64> {
        self.mean_over(|a, b| a.class == b.class && a.modality != b.modality)
    }

    /// Mean distance between centroids of different classes, any modality.
    pub fn cross_class_mean(&self) -> Option<f64> {
        self.mean_over(|a, b| a.class != b.class)
    }

    pub fn label(&self, key: ClusterKey) -> String {
        format!("{}:{}", key.modality, self.class_names[key.class])
    }

    /// Square matrix with `modality:class` header row and first column.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = csv::Writer::from_path(path)?;
        let mut header = vec!["cluster".to_string()];
        header.extend(self.keys.iter().map(|&k| self.label(k)));
        out.write_record(&header)?;
        for (i, &k) in self.keys.iter().enumerate() {
            let mut record = vec![self.label(k)];
            record.extend((0..self.len()).map(|j| self.get(i, j).to_string()));
            out.write_record(&record)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Centroid per (modality, class) over all rows of `stores`, then pairwise
/// cosine distances. A row counts toward every class among its labels.
pub fn run_cluster_distances(
    stores: &[&EmbeddingStore],
    classes: &ClassMap,
    sort: ClusterSort,
) -> Result<ClusterDistanceMatrix> {
    let dim = stores
        .first()
        .ok_or_else(|| Error::Config("no stores given".into()))?
        .dim();
    let n_classes = classes.len();
    let cell = |m: Modality, c: usize| (m as usize) * n_classes + c;
    let mut sums = vec![vec![0.0f64; dim]; 2 * n_classes];
    let mut counts = vec![0usize; 2 * n_classes];
    for store in stores {
        if store.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: store.dim(),
            });
        }
        for (meta, row) in store.iter() {
            for c in classes.classes_of(meta) {
                let k = cell(meta.modality, c);
                counts[k] += 1;
                for (s, &v) in sums[k].iter_mut().zip(row) {
                    *s += v as f64;
                }
            }
        }
    }

    let mut all: Vec<ClusterKey> = Vec::with_capacity(2 * n_classes);
    match sort {
        ClusterSort::ModalityMajor => {
            for modality in Modality::ALL {
                all.extend((0..n_classes).map(|class| ClusterKey { modality, class }));
            }
        }
        ClusterSort::ClassMajor => {
            for class in 0..n_classes {
                all.extend(Modality::ALL.iter().map(|&modality| ClusterKey { modality, class }));
            }
        }
    }
    let (keys, missing): (Vec<ClusterKey>, Vec<ClusterKey>) =
        all.into_iter().partition(|k| counts[cell(k.modality, k.class)] > 0);

    let centroids: Vec<Vec<f64>> = keys
        .iter()
        .map(|k| {
            let i = cell(k.modality, k.class);
            sums[i].iter().map(|s| s / counts[i] as f64).collect()
        })
        .collect();
    let n = keys.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = cosine_distance(&centroids[i], &centroids[j]);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(ClusterDistanceMatrix {
        keys,
        class_names: classes.names().to_vec(),
        values,
        missing,
    })
}
