//! Random forest of Gini CART trees, plus macro-F1 / confusion reporting.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::LabeledData;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(dim))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    /// Tree `t` draws from a stream seeded with `rng_seed + t`.
    pub rng_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 32,
            min_samples_split: 2,
            max_features: None,
            bootstrap: true,
            rng_seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("a forest needs at least one tree".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max depth must be at least 1".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::Config("max features must be positive".into()));
        }
        Ok(())
    }

    fn features_per_split(&self, dim: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
            .clamp(1, dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f32,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    depth: usize,
}

impl DecisionTree {
    /// A single leaf; used for hand-built trees.
    pub fn leaf(counts: Vec<u32>) -> Self {
        Self {
            nodes: vec![Node::Leaf { counts }],
            depth: 0,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_counts(&self, x: &[f32]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority class of the reached leaf, lowest index on ties.
    pub fn predict(&self, x: &[f32]) -> usize {
        argmax(self.leaf_counts(x))
    }
}

fn argmax(counts: &[u32]) -> usize {
    counts
        .iter()
        .enumerate()
        .fold(0, |best, (i, &c)| if c > counts[best] { i } else { best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    dim: usize,
    n_classes: usize,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn from_trees(dim: usize, n_classes: usize, trees: Vec<DecisionTree>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Config("a forest needs at least one tree".into()));
        }
        Ok(Self { dim, n_classes, trees })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Column-major copy of the training matrix.
struct Columns<'a> {
    values: Vec<f32>,
    n: usize,
    labels: &'a [usize],
}

impl Columns<'_> {
    fn feature(&self, f: usize) -> &[f32] {
        &self.values[f * self.n..(f + 1) * self.n]
    }
}

struct SplitChoice {
    feature: usize,
    threshold: f32,
    score: f64,
}

struct TreeBuilder<'a> {
    data: &'a Columns<'a>,
    dim: usize,
    n_classes: usize,
    max_depth: usize,
    min_samples_split: usize,
    features_per_split: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    depth: usize,
    scratch: Vec<(f32, usize)>,
}

impl TreeBuilder<'_> {
    fn counts(&self, samples: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_classes];
        for &s in samples {
            counts[self.data.labels[s]] += 1;
        }
        counts
    }

    /// Best Gini split on one feature: maximizes `sum c_L^2/n_L + sum c_R^2/n_R`.
    fn best_on_feature(&mut self, feature: usize, samples: &[usize], total: &[u32]) -> Option<SplitChoice> {
        let column = self.data.feature(feature);
        self.scratch.clear();
        self.scratch
            .extend(samples.iter().map(|&s| (column[s], self.data.labels[s])));
        self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if self.scratch.first()?.0 == self.scratch.last()?.0 {
            return None;
        }

        let n = samples.len();
        let mut left = vec![0u32; self.n_classes];
        let mut sq_left = 0.0f64;
        let mut sq_right: f64 = total.iter().map(|&c| (c as f64) * (c as f64)).sum();
        let mut right_counts = total.to_vec();
        let mut best: Option<SplitChoice> = None;
        for p in 1..n {
            let (value, class) = self.scratch[p - 1];
            let l = left[class] as f64;
            let r = right_counts[class] as f64;
            sq_left += 2.0 * l + 1.0;
            sq_right -= 2.0 * r - 1.0;
            left[class] += 1;
            right_counts[class] -= 1;
            let next = self.scratch[p].0;
            if next <= value {
                continue;
            }
            let score = sq_left / p as f64 + sq_right / (n - p) as f64;
            if best.as_ref().is_none_or(|b| score > b.score) {
                let mut threshold = value + (next - value) / 2.0;
                if threshold >= next || !threshold.is_finite() {
                    threshold = value;
                }
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    score,
                });
            }
        }
        best
    }

    fn choose_split(&mut self, samples: &[usize], total: &[u32]) -> Option<SplitChoice> {
        let mut features: Vec<usize> = (0..self.dim).collect();
        let mut best: Option<SplitChoice> = None;
        // Partial Fisher-Yates: draw features until the quota is met and at
        // least one valid split has been seen.
        for i in 0..self.dim {
            if i >= self.features_per_split && best.is_some() {
                break;
            }
            let j = self.rng.random_range(i..self.dim);
            features.swap(i, j);
            if let Some(choice) = self.best_on_feature(features[i], samples, total) {
                if best.as_ref().is_none_or(|b| choice.score > b.score) {
                    best = Some(choice);
                }
            }
        }
        best
    }

    fn build(mut self, root_samples: Vec<usize>) -> DecisionTree {
        // (node slot, samples, depth)
        let mut stack = vec![(0usize, root_samples, 0usize)];
        self.nodes.push(Node::Leaf { counts: Vec::new() });
        while let Some((slot, samples, depth)) = stack.pop() {
            self.depth = self.depth.max(depth);
            let counts = self.counts(&samples);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            if pure || depth >= self.max_depth || samples.len() < self.min_samples_split {
                self.nodes[slot] = Node::Leaf { counts };
                continue;
            }
            let Some(choice) = self.choose_split(&samples, &counts) else {
                self.nodes[slot] = Node::Leaf { counts };
                continue;
            };
            let column = self.data.feature(choice.feature);
            let (left, right): (Vec<usize>, Vec<usize>) =
                samples.iter().partition(|&&s| column[s] <= choice.threshold);
            let left_slot = self.nodes.len();
            self.nodes.push(Node::Leaf { counts: Vec::new() });
            let right_slot = self.nodes.len();
            self.nodes.push(Node::Leaf { counts: Vec::new() });
            self.nodes[slot] = Node::Split {
                feature: choice.feature,
                threshold: choice.threshold,
                left: left_slot,
                right: right_slot,
            };
            stack.push((right_slot, right, depth + 1));
            stack.push((left_slot, left, depth + 1));
        }
        DecisionTree {
            nodes: self.nodes,
            depth: self.depth,
        }
    }
}

/// Fits `cfg.n_trees` trees, each on its own bootstrap resample.
///
/// Trees are independent and built in parallel; every tree draws from its
/// own seeded stream, so the result does not depend on the thread count.
pub fn fit_forest(data: &LabeledData, n_classes: usize, cfg: &ForestConfig) -> Result<RandomForest> {
    cfg.validate()?;
    let n = data.len();
    if n < 2 {
        return Err(Error::DegenerateFit(format!("need at least 2 samples, got {n}")));
    }
    if let Some(&bad) = data.labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Config(format!("label {bad} outside {n_classes} classes")));
    }
    let first = data.labels[0];
    if data.labels.iter().all(|&l| l == first) {
        return Err(Error::DegenerateFit("all samples share one class".into()));
    }
    if data.features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("features must be finite".into()));
    }

    let dim = data.dim;
    let mut values = vec![0.0f32; n * dim];
    for i in 0..n {
        for (f, &v) in data.row(i).iter().enumerate() {
            values[f * n + i] = v;
        }
    }
    let columns = Columns {
        values,
        n,
        labels: &data.labels,
    };
    let features_per_split = cfg.features_per_split(dim);

    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed.wrapping_add(t as u64));
            let samples: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            TreeBuilder {
                data: &columns,
                dim,
                n_classes,
                max_depth: cfg.max_depth,
                min_samples_split: cfg.min_samples_split.max(2),
                features_per_split,
                rng,
                nodes: Vec::new(),
                depth: 0,
                scratch: Vec::with_capacity(n),
            }
            .build(samples)
        })
        .collect();
    Ok(RandomForest { dim, n_classes, trees })
}

/// Majority vote of the trees; ties go to the lowest class index.
pub fn predict(forest: &RandomForest, x: &[f32]) -> Result<usize> {
    if x.len() != forest.dim {
        return Err(Error::DimMismatch {
            expected: forest.dim,
            actual: x.len(),
        });
    }
    let mut votes = vec![0u32; forest.n_classes];
    for tree in &forest.trees {
        votes[tree.predict(x)] += 1;
    }
    Ok(argmax(&votes))
}

pub fn predict_all(forest: &RandomForest, data: &LabeledData) -> Result<Vec<usize>> {
    (0..data.len())
        .into_par_iter()
        .map(|i| predict(forest, data.row(i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    /// Unweighted mean of the per-class F1 column.
    pub macro_f1: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl ClassificationReport {
    /// Undefined precision, recall or F1 count as 0.
    pub fn from_predictions(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimMismatch {
                expected: truth.len(),
                actual: predicted.len(),
            });
        }
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::Config(format!("class index outside {n_classes} classes")));
            }
            confusion[t][p] += 1;
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let per_class: Vec<ClassMetrics> = (0..n_classes)
            .map(|c| {
                let tp = confusion[c][c];
                let support: usize = confusion[c].iter().sum();
                let predicted_c: usize = confusion.iter().map(|row| row[c]).sum();
                let precision = ratio(tp, predicted_c);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    precision,
                    recall,
                    f1,
                    support,
                }
            })
            .collect();
        let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / n_classes.max(1) as f64;
        Ok(Self {
            per_class,
            macro_f1,
            confusion,
        })
    }

    /// `class,precision,recall,f1,support` rows, then a `macro` row.
    pub fn write_csv(&self, class_names: &[String], path: impl AsRef<Path>) -> Result<()> {
        let mut out = csv::Writer::from_path(path)?;
        out.write_record(["class", "precision", "recall", "f1", "support"])?;
        for (name, m) in class_names.iter().zip(&self.per_class) {
            out.write_record([
                name.clone(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f1.to_string(),
                m.support.to_string(),
            ])?;
        }
        let support: usize = self.per_class.iter().map(|m| m.support).sum();
        let mean = |f: fn(&ClassMetrics) -> f64| self.per_class.iter().map(f).sum::<f64>() / self.per_class.len().max(1) as f64;
        out.write_record([
            "macro".to_string(),
            mean(|m| m.precision).to_string(),
            mean(|m| m.recall).to_string(),
            self.macro_f1.to_string(),
            support.to_string(),
        ])?;
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Square matrix with class names on the header row and first column; rows are truth.
    pub fn write_confusion_csv(&self, class_names: &[String], path: impl AsRef<Path>) -> Result<()> {
        let mut out = csv::Writer::from_path(path)?;
        let mut header = vec!["truth\\predicted".to_string()];
        header.extend(class_names.iter().cloned());
        out.write_record(&header)?;
        for (name, row) in class_names.iter().zip(&self.confusion) {
            let mut record = vec![name.clone()];
            record.extend(row.iter().map(|c| c.to_string()));
            out.write_record(&record)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn evaluate(forest: &RandomForest, test: &LabeledData) -> Result<ClassificationReport> {
    if test.is_empty() {
        return Err(Error::Config("empty test set".into()));
    }
    let predicted = predict_all(forest, test)?;
    ClassificationReport::from_predictions(&test.labels, &predicted, forest.n_classes)
}

/// Training-set accuracy helper shared by tests and benches.
pub fn accuracy(forest: &RandomForest, data: &LabeledData) -> Result<f64> {
    let predicted = predict_all(forest, data)?;
    let correct = predicted.iter().zip(&data.labels).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / data.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(seed: u64, per_class: usize, n_classes: usize, dim: usize, spread: f32) -> LabeledData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = LabeledData::new(dim);
        for c in 0..n_classes {
            for _ in 0..per_class {
                let row: Vec<f32> = (0..dim)
                    .map(|f| if f % n_classes == c { 5.0 } else { 0.0 } + rng.random_range(-spread..spread))
                    .collect();
                data.push(&row, c);
            }
        }
        data
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let data = blobs(1, 30, 2, 4, 1.0);
        let cfg = ForestConfig {
            n_trees: 10,
            ..Default::default()
        };
        let forest = fit_forest(&data, 2, &cfg).unwrap();
        let report = evaluate(&forest, &data).unwrap();
        assert_eq!(report.macro_f1, 1.0);
    }

    #[test]
    fn same_seed_same_forest() {
        let data = blobs(2, 20, 3, 6, 4.0);
        let cfg = ForestConfig {
            n_trees: 8,
            rng_seed: 42,
            ..Default::default()
        };
        let a = fit_forest(&data, 3, &cfg).unwrap();
        let b = fit_forest(&data, 3, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_is_degenerate() {
        let mut data = LabeledData::new(1);
        data.push(&[1.0], 0);
        data.push(&[2.0], 0);
        assert!(matches!(
            fit_forest(&data, 2, &ForestConfig::default()),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn pure_leaf_always_wins() {
        let forest = RandomForest::from_trees(2, 3, vec![DecisionTree::leaf(vec![0, 0, 7])]).unwrap();
        assert_eq!(predict(&forest, &[100.0, -3.0]).unwrap(), 2);
        assert!(predict(&forest, &[1.0]).is_err());
    }

    #[test]
    fn tied_vote_goes_to_lowest_class() {
        let forest = RandomForest::from_trees(
            1,
            2,
            vec![DecisionTree::leaf(vec![0, 3]), DecisionTree::leaf(vec![5, 0])],
        )
        .unwrap();
        assert_eq!(predict(&forest, &[0.0]).unwrap(), 0);
    }

    #[test]
    fn depth_limit_holds() {
        let data = blobs(3, 40, 4, 8, 6.0);
        let cfg = ForestConfig {
            n_trees: 5,
            max_depth: 3,
            ..Default::default()
        };
        let forest = fit_forest(&data, 4, &cfg).unwrap();
        for tree in forest.trees() {
            assert!(tree.depth() <= 3);
            for node in tree.nodes() {
                if let Node::Leaf { counts } = node {
                    assert!(counts.iter().sum::<u32>() > 0);
                }
            }
        }
    }

    #[test]
    fn hand_computed_macro_f1() {
        // truth [a, a, b], pred [a, b, b]
        let r = ClassificationReport::from_predictions(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(r.per_class[0].precision, 1.0);
        assert_eq!(r.per_class[0].recall, 0.5);
        assert!((r.per_class[0].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_class[1].precision, 0.5);
        assert_eq!(r.per_class[1].recall, 1.0);
        assert!((r.macro_f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.confusion, vec![vec![1, 1], vec![0, 1]]);
    }

    #[test]
    fn class_never_predicted_scores_zero() {
        let r = ClassificationReport::from_predictions(&[0, 1, 2], &[0, 0, 2], 3).unwrap();
        assert_eq!(r.per_class[1].precision, 0.0);
        assert_eq!(r.per_class[1].f1, 0.0);
    }

    #[test]
    fn perfect_predictions() {
        let r = ClassificationReport::from_predictions(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(r.macro_f1, 1.0);
        for (i, row) in r.confusion.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                assert_eq!(c > 0, i == j);
            }
        }
    }

    #[test]
    fn forest_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let data = blobs(4, 10, 2, 3, 1.0);
        let forest = fit_forest(&data, 2, &ForestConfig { n_trees: 3, ..Default::default() }).unwrap();
        let path = dir.path().join("forest.json");
        forest.save(&path).unwrap();
        assert_eq!(RandomForest::load(&path).unwrap(), forest);
    }
}
