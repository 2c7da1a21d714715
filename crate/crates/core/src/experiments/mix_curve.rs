use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{ClassMap, LabeledData};
use crate::error::{Error, Result};
use crate::forest::{evaluate, fit_forest, ForestConfig};
use crate::store::{EmbeddingStore, Modality};

/// Train/test stores of both modalities under one projector.
#[derive(Debug, Clone, Copy)]
pub struct ClassificationSplits<'a> {
    pub audio_train: &'a EmbeddingStore,
    pub image_train: &'a EmbeddingStore,
    pub audio_test: &'a EmbeddingStore,
    pub image_test: &'a EmbeddingStore,
}

impl<'a> ClassificationSplits<'a> {
    pub fn train(&self, modality: Modality) -> &'a EmbeddingStore {
        match modality {
            Modality::Audio => self.audio_train,
            Modality::Image => self.image_train,
        }
    }

    pub fn test(&self, modality: Modality) -> &'a EmbeddingStore {
        match modality {
            Modality::Audio => self.audio_test,
            Modality::Image => self.image_test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixCurveConfig {
    pub source: Modality,
    pub target: Modality,
    /// Target-modality sample counts; `None` spreads `grid_points` evenly
    /// from 0 to the whole target training set.
    pub grid: Option<Vec<usize>>,
    pub grid_points: usize,
    pub seeds: usize,
    /// Base seed of the mix-in sampling; run `s` uses `seed + s`.
    pub seed: u64,
    /// Run `s` fits its forests with `forest.rng_seed + s`.
    pub forest: ForestConfig,
}

impl Default for MixCurveConfig {
    fn default() -> Self {
        Self {
            source: Modality::Audio,
            target: Modality::Image,
            grid: None,
            grid_points: 8,
            seeds: 5,
            seed: 0,
            forest: ForestConfig::default(),
        }
    }
}

impl MixCurveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target != self.source.other() {
            return Err(Error::Config("source and target modality must differ".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if let Some(grid) = &self.grid {
            if grid.first() != Some(&0) || grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("mix-in grid must start at 0 and increase strictly".into()));
            }
        } else if self.grid_points < 2 {
            return Err(Error::Config("a generated grid needs at least 2 points".into()));
        }
        self.forest.validate()
    }
}

/// `round(i * total / (points - 1))` for `i = 0..points`, without repeats.
pub fn default_grid(total: usize, points: usize) -> Vec<usize> {
    let steps = points.max(2) - 1;
    let mut grid: Vec<usize> = (0..=steps)
        .map(|i| ((i * total) as f64 / steps as f64).round() as usize)
        .collect();
    grid.dedup();
    grid
}

/// A class-balanced ordering of `labels` indices: classes are visited
/// round-robin in a shuffled order, each drawing from its own shuffled list.
/// Every prefix of length `n` holds `floor(n / C)` or one more per class
/// while all classes still have samples left.
pub fn balanced_order(labels: &[usize], n_classes: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        per_class[c].push(i);
    }
    for list in &mut per_class {
        list.shuffle(rng);
    }
    let mut class_order: Vec<usize> = (0..n_classes).collect();
    class_order.shuffle(rng);
    let longest = per_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut order = Vec::with_capacity(labels.len());
    for round in 0..longest {
        for &c in &class_order {
            if let Some(&i) = per_class[c].get(round) {
                order.push(i);
            }
        }
    }
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixPoint {
    pub n_mixed: usize,
    pub mmt_f1: f64,
    pub mmp_f1: f64,
    pub sm_source_f1: f64,
    pub sm_target_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixCurve {
    /// Mean over seeds, one point per grid entry.
    pub points: Vec<MixPoint>,
    pub per_seed: Vec<Vec<MixPoint>>,
}

impl MixCurve {
    /// `n_mixed,mmt_f1,mmp_f1,sm_source_f1,sm_target_f1`
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = csv::Writer::from_path(path)?;
        for p in &self.points {
            out.serialize(p)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Long format with a leading `seed` column.
    pub fn write_per_seed_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        // csv cannot serialize flattened structs, so the rows are spelled out.
        let mut out = csv::Writer::from_path(path)?;
        out.write_record(["seed", "n_mixed", "mmt_f1", "mmp_f1", "sm_source_f1", "sm_target_f1"])?;
        for (seed, points) in self.per_seed.iter().enumerate() {
            for p in points {
                out.write_record([
                    seed.to_string(),
                    p.n_mixed.to_string(),
                    p.mmt_f1.to_string(),
                    p.mmp_f1.to_string(),
                    p.sm_source_f1.to_string(),
                    p.sm_target_f1.to_string(),
                ])?;
            }
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

struct Prepared {
    source_train: LabeledData,
    target_train: LabeledData,
    source_test: LabeledData,
    target_test: LabeledData,
}

impl Prepared {
    fn new(splits: &ClassificationSplits<'_>, cfg: &MixCurveConfig, classes: &ClassMap) -> Result<Self> {
        let load = |store: &EmbeddingStore, modality: Modality| -> Result<LabeledData> {
            if store.modality() != Some(modality) {
                return Err(Error::Config(format!("expected a pure {modality} store")));
            }
            let data = LabeledData::from_store(store, classes);
            if data.is_empty() {
                return Err(Error::Config(format!("no labeled {modality} rows")));
            }
            Ok(data)
        };
        Ok(Self {
            source_train: load(splits.train(cfg.source), cfg.source)?,
            target_train: load(splits.train(cfg.target), cfg.target)?,
            source_test: load(splits.test(cfg.source), cfg.source)?,
            target_test: load(splits.test(cfg.target), cfg.target)?,
        })
    }

    /// Source training rows plus the chosen target rows; scored on target test.
    fn mixed_f1(&self, mixed: &[usize], n_classes: usize, forest: &ForestConfig) -> Result<f64> {
        let mut train = self.source_train.clone();
        train.extend_from(&self.target_train, mixed)?;
        let model = fit_forest(&train, n_classes, forest)?;
        Ok(evaluate(&model, &self.target_test)?.macro_f1)
    }
}

fn single_f1(train: &LabeledData, test: &LabeledData, n_classes: usize, forest: &ForestConfig) -> Result<f64> {
    let model = fit_forest(train, n_classes, forest)?;
    Ok(evaluate(&model, test)?.macro_f1)
}

/// Classifier accuracy as target-modality samples are mixed into a
/// source-modality training set.
///
/// At every grid point and seed, MMT trains on the joint-space stores and
/// MMP on the PCA stores, both with the same mixed-in target rows. The
/// single-modality references train and test within one modality on the
/// PCA stores and do not depend on the grid.
pub fn run_mix_curve(
    cfg: &MixCurveConfig,
    joint: &ClassificationSplits<'_>,
    pca: &ClassificationSplits<'_>,
    classes: &ClassMap,
) -> Result<MixCurve> {
    cfg.validate()?;
    let joint = Prepared::new(joint, cfg, classes)?;
    let pca = Prepared::new(pca, cfg, classes)?;
    if joint.target_train.labels != pca.target_train.labels {
        return Err(Error::Config(
            "joint and PCA target training stores must hold the same rows".into(),
        ));
    }
    let available = joint.target_train.len();
    let grid = cfg.grid.clone().unwrap_or_else(|| default_grid(available, cfg.grid_points));
    if let Some(&last) = grid.last() {
        if last > available {
            return Err(Error::Config(format!(
                "grid asks for {last} target samples but only {available} are available"
            )));
        }
    }
    let n_classes = classes.len();

    let per_seed = (0..cfg.seeds)
        .into_par_iter()
        .map(|s| -> Result<Vec<MixPoint>> {
            let forest = ForestConfig {
                rng_seed: cfg.forest.rng_seed.wrapping_add(s as u64),
                ..cfg.forest.clone()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(s as u64));
            let order = balanced_order(&joint.target_train.labels, n_classes, &mut rng);
            let sm_source_f1 = single_f1(&pca.source_train, &pca.source_test, n_classes, &forest)?;
            let sm_target_f1 = single_f1(&pca.target_train, &pca.target_test, n_classes, &forest)?;
            grid.par_iter()
                .map(|&n| {
                    let mixed = &order[..n];
                    Ok(MixPoint {
                        n_mixed: n,
                        mmt_f1: joint.mixed_f1(mixed, n_classes, &forest)?,
                        mmp_f1: pca.mixed_f1(mixed, n_classes, &forest)?,
                        sm_source_f1,
                        sm_target_f1,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let runs = per_seed.len() as f64;
    let points = (0..grid.len())
        .map(|g| {
            let mean = |f: fn(&MixPoint) -> f64| per_seed.iter().map(|run| f(&run[g])).sum::<f64>() / runs;
            MixPoint {
                n_mixed: grid[g],
                mmt_f1: mean(|p| p.mmt_f1),
                mmp_f1: mean(|p| p.mmp_f1),
                sm_source_f1: mean(|p| p.sm_source_f1),
                sm_target_f1: mean(|p| p.sm_target_f1),
            }
        })
        .collect();
    Ok(MixCurve { points, per_seed })
}
