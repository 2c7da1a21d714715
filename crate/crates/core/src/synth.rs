//! Synthetic paired embeddings with known class structure.
//!
//! Every class owns a fixed unit latent `z_c`. A clip draws
//! `latent = z_c + sigma_l * n` and each embedding model renders it through
//! its own fixed Gaussian map plus per-model noise. Audio and image rows of
//! a clip therefore share one latent, which is what the translation towers
//! have to recover.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::classes::{ClassMap, INSTRUMENTS};
use crate::error::{Error, Result};
use crate::ontology::{Ontology, OntologyNode};
use crate::store::{declared_dim, pair_by_clip, EmbeddingMatrix, EmbeddingStore, Modality, PairedDataset, SampleMeta, Split};

pub const ROOT_ID: &str = "/x/music";
pub const HUB_ID: &str = "/x/instrument_family";

const FAMILIES: [(&str, &str, &[&str]); 3] = [
    (
        "/x/strings",
        "String instruments",
        &["banjo", "cello", "guitar", "mandolin", "ukulele", "violin"],
    ),
    (
        "/x/winds",
        "Wind instruments",
        &["accordion", "clarinet", "flute", "saxophone", "trombone", "trumpet"],
    ),
    (
        "/x/other",
        "Other instruments",
        &["cymbals", "drums", "organ", "piano", "synthesizer", "voice"],
    ),
];

/// Ontology id of an instrument leaf.
pub fn leaf_id(instrument: &str) -> String {
    format!("/x/{instrument}")
}

/// Root "Music" (an excluded top label) over three family nodes and their
/// leaves. The families also hang off a non-excluded hub, so leaves in
/// different families stay 4 hops apart once the root is excluded.
pub fn toy_ontology(n_classes: usize) -> Result<Ontology> {
    let instruments = &INSTRUMENTS[..n_classes.min(INSTRUMENTS.len())];
    let mut nodes = vec![
        OntologyNode {
            id: ROOT_ID.into(),
            name: "Music".into(),
            child_ids: FAMILIES.iter().map(|f| f.0.to_string()).chain([HUB_ID.to_string()]).collect(),
        },
        OntologyNode {
            id: HUB_ID.into(),
            name: "Instrument family".into(),
            child_ids: FAMILIES.iter().map(|f| f.0.to_string()).collect(),
        },
    ];
    for (id, name, members) in FAMILIES {
        nodes.push(OntologyNode {
            id: id.into(),
            name: name.into(),
            child_ids: members
                .iter()
                .filter(|m| instruments.contains(m))
                .map(|m| leaf_id(m))
                .collect(),
        });
    }
    for inst in instruments {
        let mut name = inst.to_string();
        name[..1].make_ascii_uppercase();
        nodes.push(OntologyNode {
            id: leaf_id(inst),
            name,
            child_ids: Vec::new(),
        });
    }
    Ontology::from_nodes(nodes)
}

/// One synthetic "pre-trained embedding model".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub dim: usize,
    pub noise: f64,
}

impl ModelSpec {
    pub fn new(name: &str, dim: usize, noise: f64) -> Self {
        Self {
            name: name.into(),
            dim,
            noise,
        }
    }
}

/// A model that embeds both modalities into one space, standing in for a
/// jointly trained audio-visual network. The image map is
/// `alpha * S + sqrt(1 - alpha^2) * R` where `S` is the audio map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedSpec {
    pub name: String,
    pub dim: usize,
    pub alignment: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCounts {
    pub translation: usize,
    pub cross_modal: usize,
    pub classification_train: usize,
    pub classification_test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    Translation,
    CrossModal,
    ClassificationTrain,
    ClassificationTest,
}

impl Subset {
    pub const ALL: [Subset; 4] = [
        Subset::Translation,
        Subset::CrossModal,
        Subset::ClassificationTrain,
        Subset::ClassificationTest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Translation => "translation",
            Subset::CrossModal => "cross_modal",
            Subset::ClassificationTrain => "classification_train",
            Subset::ClassificationTest => "classification_test",
        }
    }

    fn split(self) -> Split {
        match self {
            Subset::Translation | Subset::ClassificationTrain => Split::Train,
            Subset::CrossModal | Subset::ClassificationTest => Split::Test,
        }
    }

    fn per_class(self, counts: &SubsetCounts) -> usize {
        match self {
            Subset::Translation => counts.translation,
            Subset::CrossModal => counts.cross_modal,
            Subset::ClassificationTrain => counts.classification_train,
            Subset::ClassificationTest => counts.classification_test,
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub latent_dim: usize,
    pub audio: ModelSpec,
    pub image: ModelSpec,
    /// Additional models rendered from the same clips, for combination studies.
    pub extra_audio: Vec<ModelSpec>,
    pub extra_image: Vec<ModelSpec>,
    pub shared: Option<SharedSpec>,
    pub samples_per_class: SubsetCounts,
    pub latent_noise: f64,
    /// Per-class count multipliers, applied to every subset.
    pub class_imbalance: Option<Vec<f64>>,
    /// Classes within a group share one latent and are indistinguishable.
    pub shared_latent_groups: Vec<Vec<usize>>,
    /// Also tag every clip with the root label.
    pub tag_root_label: bool,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes: 18,
            latent_dim: 32,
            audio: ModelSpec::new("yamnet", 1024, 0.05),
            image: ModelSpec::new("resnet50", 2048, 0.05),
            extra_audio: Vec::new(),
            extra_image: Vec::new(),
            shared: Some(SharedSpec {
                name: "shared".into(),
                dim: 512,
                alignment: 0.11,
                noise: 0.05,
            }),
            samples_per_class: SubsetCounts {
                translation: 111,
                cross_modal: 28,
                classification_train: 100,
                classification_test: 20,
            },
            latent_noise: 0.1,
            class_imbalance: None,
            shared_latent_groups: Vec::new(),
            tag_root_label: true,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    fn models(&self) -> impl Iterator<Item = (Modality, &ModelSpec)> {
        std::iter::once((Modality::Audio, &self.audio))
            .chain(std::iter::once((Modality::Image, &self.image)))
            .chain(self.extra_audio.iter().map(|m| (Modality::Audio, m)))
            .chain(self.extra_image.iter().map(|m| (Modality::Image, m)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 || self.n_classes > INSTRUMENTS.len() {
            return Err(Error::Config(format!(
                "n_classes must be in 2..={}, got {}",
                INSTRUMENTS.len(),
                self.n_classes
            )));
        }
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be positive".into()));
        }
        if !(self.latent_noise >= 0.0 && self.latent_noise.is_finite()) {
            return Err(Error::Config("latent noise must be a finite value >= 0".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for (modality, m) in self.models() {
            if m.dim < self.latent_dim {
                return Err(Error::Config(format!(
                    "{} model `{}` has dim {} below latent_dim {}",
                    modality, m.name, m.dim, self.latent_dim
                )));
            }
            if !(m.noise >= 0.0 && m.noise.is_finite()) {
                return Err(Error::Config(format!("model `{}` noise must be a finite value >= 0", m.name)));
            }
            if let Some(d) = declared_dim(&m.name) {
                if d != m.dim {
                    return Err(Error::Config(format!("model `{}` is {d}-dim, configured as {}", m.name, m.dim)));
                }
            }
            if !names.insert((modality, m.name.as_str())) {
                return Err(Error::Config(format!("{modality} model `{}` listed twice", m.name)));
            }
        }
        if let Some(s) = &self.shared {
            if s.dim < self.latent_dim || !(0.0..=1.0).contains(&s.alignment) || !(s.noise >= 0.0) {
                return Err(Error::Config(
                    "shared model needs dim >= latent_dim, alignment in [0, 1] and noise >= 0".into(),
                ));
            }
        }
        let c = &self.samples_per_class;
        if c.translation.min(c.cross_modal).min(c.classification_train).min(c.classification_test) == 0 {
            return Err(Error::Config("samples_per_class must be at least 1 in every subset".into()));
        }
        if let Some(mult) = &self.class_imbalance {
            if mult.len() != self.n_classes || mult.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
                return Err(Error::Config(format!(
                    "class_imbalance needs {} positive multipliers",
                    self.n_classes
                )));
            }
        }
        let mut seen = vec![false; self.n_classes];
        for group in &self.shared_latent_groups {
            for &c in group {
                if c >= self.n_classes || std::mem::replace(&mut seen[c], true) {
                    return Err(Error::Config(format!("shared latent group member {c} is out of range or repeated")));
                }
            }
        }
        Ok(())
    }

    /// Rows of class `c` in one subset.
    pub fn count(&self, subset: Subset, class: usize) -> usize {
        let base = subset.per_class(&self.samples_per_class) as f64;
        let mult = self.class_imbalance.as_ref().map_or(1.0, |m| m[class]);
        ((base * mult).round() as usize).max(1)
    }
}

/// Audio and image stores of one subset, for every configured model.
#[derive(Debug, Clone)]
pub struct SubsetStores {
    pub subset: Subset,
    pub audio: EmbeddingStore,
    pub image: EmbeddingStore,
    pub extra_audio: Vec<EmbeddingStore>,
    pub extra_image: Vec<EmbeddingStore>,
    /// `(audio, image)` rendered by the shared model.
    pub shared: Option<(EmbeddingStore, EmbeddingStore)>,
}

impl SubsetStores {
    pub fn pairs(&self) -> Result<PairedDataset<'_>> {
        pair_by_clip(&self.audio, &self.image)
    }

    pub fn store(&self, modality: Modality) -> &EmbeddingStore {
        match modality {
            Modality::Audio => &self.audio,
            Modality::Image => &self.image,
        }
    }

    /// `(relative directory, store)` for every store of the subset.
    pub fn layout(&self) -> Vec<(String, &EmbeddingStore)> {
        let root = self.subset.as_str();
        let mut out = vec![
            (format!("{root}/audio"), &self.audio),
            (format!("{root}/image"), &self.image),
        ];
        for s in &self.extra_audio {
            out.push((format!("{root}/audio-{}", s.meta(0).embedding_model), s));
        }
        for s in &self.extra_image {
            out.push((format!("{root}/image-{}", s.meta(0).embedding_model), s));
        }
        if let Some((a, v)) = &self.shared {
            out.push((format!("{root}/shared-audio"), a));
            out.push((format!("{root}/shared-image"), v));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub ontology: Ontology,
    pub translation: SubsetStores,
    pub cross_modal: SubsetStores,
    pub classification_train: SubsetStores,
    pub classification_test: SubsetStores,
}

impl SynthData {
    pub fn subset(&self, subset: Subset) -> &SubsetStores {
        match subset {
            Subset::Translation => &self.translation,
            Subset::CrossModal => &self.cross_modal,
            Subset::ClassificationTrain => &self.classification_train,
            Subset::ClassificationTest => &self.classification_test,
        }
    }

    /// Writes `ontology.json` and one store directory per subset and model.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<String>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.ontology.save(dir.join("ontology.json"))?;
        let mut written = vec!["ontology.json".to_string()];
        for subset in Subset::ALL {
            for (rel, store) in self.subset(subset).layout() {
                store.write(dir.join(&rel))?;
                written.push(rel);
            }
        }
        Ok(written)
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Independent stream per purpose, so adding a model leaves the others intact.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const STREAM_LATENTS: u64 = 1;
const STREAM_MAPS: u64 = 1 << 8;
const STREAM_CLIPS: u64 = 1 << 16;
const STREAM_NOISE: u64 = 1 << 24;

/// `dim x latent_dim` row-major map with `N(0, 1/latent_dim)` entries.
struct LinearMap {
    dim: usize,
    latent_dim: usize,
    weights: Vec<f64>,
}

impl LinearMap {
    fn random(rng: &mut ChaCha8Rng, dim: usize, latent_dim: usize) -> Self {
        let weights = gaussian_vec(rng, dim * latent_dim, 1.0 / (latent_dim as f64).sqrt());
        Self { dim, latent_dim, weights }
    }

    fn blend(a: &LinearMap, b: &LinearMap, alpha: f64) -> Self {
        let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
        let weights = a.weights.iter().zip(&b.weights).map(|(x, y)| alpha * x + beta * y).collect();
        Self {
            dim: a.dim,
            latent_dim: a.latent_dim,
            weights,
        }
    }

    fn render(&self, latent: &[f64], noise: f64, rng: &mut ChaCha8Rng, out: &mut Vec<f32>) {
        for row in self.weights.chunks_exact(self.latent_dim) {
            let clean: f64 = row.iter().zip(latent).map(|(w, z)| w * z).sum();
            let n: f64 = rng.sample(StandardNormal);
            out.push((clean + noise * n) as f32);
        }
    }
}

struct Renderer<'a> {
    modality: Modality,
    name: &'a str,
    map: LinearMap,
    noise: f64,
    stream_id: u64,
}

struct Clip {
    clip_id: String,
    class: usize,
    latent: Vec<f64>,
}

fn class_latents(cfg: &SynthConfig) -> Vec<Vec<f64>> {
    let mut rng = stream(cfg.rng_seed, STREAM_LATENTS);
    let mut latents: Vec<Vec<f64>> = (0..cfg.n_classes)
        .map(|_| {
            let mut z = gaussian_vec(&mut rng, cfg.latent_dim, 1.0);
            normalize(&mut z);
            z
        })
        .collect();
    for group in &cfg.shared_latent_groups {
        if let Some(&first) = group.first() {
            for &c in &group[1..] {
                latents[c] = latents[first].clone();
            }
        }
    }
    latents
}

fn clips(cfg: &SynthConfig, subset: Subset, latents: &[Vec<f64>]) -> Vec<Clip> {
    let mut rng = stream(cfg.rng_seed, STREAM_CLIPS + subset.index());
    let mut out = Vec::new();
    for (class, z) in latents.iter().enumerate() {
        for _ in 0..cfg.count(subset, class) {
            let latent = z
                .iter()
                .map(|&v| v + cfg.latent_noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            out.push(Clip {
                clip_id: format!("{}-{:06}", subset.as_str(), out.len()),
                class,
                latent,
            });
        }
    }
    out
}

fn render_store(cfg: &SynthConfig, subset: Subset, clips: &[Clip], r: &Renderer<'_>) -> Result<EmbeddingStore> {
    let mut rng = stream(cfg.rng_seed, STREAM_NOISE + (r.stream_id << 4) + subset.index());
    let mut values = Vec::with_capacity(clips.len() * r.map.dim);
    let mut metas = Vec::with_capacity(clips.len());
    let suffix = match r.modality {
        Modality::Audio => "a",
        Modality::Image => "v",
    };
    for clip in clips {
        r.map.render(&clip.latent, r.noise, &mut rng, &mut values);
        let mut labels = vec![leaf_id(INSTRUMENTS[clip.class])];
        if cfg.tag_root_label {
            labels.push(ROOT_ID.to_string());
        }
        metas.push(SampleMeta {
            sample_id: format!("{}-{suffix}", clip.clip_id),
            clip_id: clip.clip_id.clone(),
            modality: r.modality,
            labels,
            split: subset.split(),
            embedding_model: r.name.to_string(),
        });
    }
    EmbeddingStore::new(metas, EmbeddingMatrix::new(r.map.dim, values)?)
}

/// Generates all four subsets and the toy ontology. Deterministic in
/// `cfg.rng_seed`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let ontology = toy_ontology(cfg.n_classes)?;
    let latents = class_latents(cfg);

    let mut renderers = Vec::new();
    for (i, (modality, m)) in cfg.models().enumerate() {
        let mut rng = stream(cfg.rng_seed, STREAM_MAPS + i as u64);
        renderers.push(Renderer {
            modality,
            name: &m.name,
            map: LinearMap::random(&mut rng, m.dim, cfg.latent_dim),
            noise: m.noise,
            stream_id: i as u64,
        });
    }
    let shared = cfg.shared.as_ref().map(|s| {
        let base_id = 200u64;
        let mut rng = stream(cfg.rng_seed, STREAM_MAPS + base_id);
        let audio_map = LinearMap::random(&mut rng, s.dim, cfg.latent_dim);
        let private = LinearMap::random(&mut rng, s.dim, cfg.latent_dim);
        let image_map = LinearMap::blend(&audio_map, &private, s.alignment);
        [
            Renderer {
                modality: Modality::Audio,
                name: &s.name,
                map: audio_map,
                noise: s.noise,
                stream_id: base_id,
            },
            Renderer {
                modality: Modality::Image,
                name: &s.name,
                map: image_map,
                noise: s.noise,
                stream_id: base_id + 1,
            },
        ]
    });

    let n_extra_audio = cfg.extra_audio.len();
    let build = |subset: Subset| -> Result<SubsetStores> {
        let clips = clips(cfg, subset, &latents);
        let mut rendered = renderers
            .iter()
            .map(|r| render_store(cfg, subset, &clips, r))
            .collect::<Result<Vec<_>>>()?
            .into_iter();
        let audio = rendered.next().expect("primary audio");
        let image = rendered.next().expect("primary image");
        let extra_audio = rendered.by_ref().take(n_extra_audio).collect();
        let extra_image = rendered.collect();
        let shared = match &shared {
            Some([a, v]) => Some((render_store(cfg, subset, &clips, a)?, render_store(cfg, subset, &clips, v)?)),
            None => None,
        };
        Ok(SubsetStores {
            subset,
            audio,
            image,
            extra_audio,
            extra_image,
            shared,
        })
    };

    Ok(SynthData {
        translation: build(Subset::Translation)?,
        cross_modal: build(Subset::CrossModal)?,
        classification_train: build(Subset::ClassificationTrain)?,
        classification_test: build(Subset::ClassificationTest)?,
        ontology,
    })
}

/// Rows carrying each class label, in canonical class order. A row with
/// several instrument labels counts once per class.
pub fn class_histogram(store: &EmbeddingStore, ontology: &Ontology) -> Result<Vec<(String, usize)>> {
    let classes = ClassMap::from_ontology(ontology)?;
    let mut counts = vec![0usize; classes.len()];
    for meta in store.metas() {
        for c in classes.classes_of(meta) {
            counts[c] += 1;
        }
    }
    Ok(classes.names().iter().cloned().zip(counts).collect())
}

/// `class,count` rows.
pub fn write_histogram_csv(histogram: &[(String, usize)], path: impl AsRef<Path>) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["class", "count"])?;
    for (name, count) in histogram {
        out.write_record([name.as_str(), &count.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::ontology::RelevanceConfig;
    use crate::translation::cosine_distance;

    fn small() -> SynthConfig {
        SynthConfig {
            n_classes: 6,
            latent_dim: 8,
            audio: ModelSpec::new("a", 16, 0.05),
            image: ModelSpec::new("v", 24, 0.05),
            shared: None,
            samples_per_class: SubsetCounts {
                translation: 10,
                cross_modal: 4,
                classification_train: 8,
                classification_test: 3,
            },
            ..Default::default()
        }
    }

    #[test]
    fn toy_ontology_distances() {
        let onto = toy_ontology(18).unwrap();
        let excluded: BTreeSet<String> = RelevanceConfig::for_ontology(&onto).excluded_labels;
        assert_eq!(excluded, BTreeSet::from([ROOT_ID.to_string()]));
        let d = |a: &str, b: &str| onto.graph_distance(&leaf_id(a), &leaf_id(b), &excluded).unwrap();
        assert_eq!(d("cello", "cello"), Some(0));
        assert_eq!(d("cello", "violin"), Some(2));
        assert_eq!(d("cello", "trumpet"), Some(4));
        assert_eq!(d("drums", "flute"), Some(4));
        assert_eq!(ClassMap::from_ontology(&onto).unwrap().len(), 18);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.translation.audio, b.translation.audio);
        assert_eq!(a.classification_test.image, b.classification_test.image);
        let c = generate(&SynthConfig {
            rng_seed: 1,
            ..small()
        })
        .unwrap();
        assert_ne!(a.translation.audio, c.translation.audio);
    }

    #[test]
    fn extra_models_leave_primary_rows_alone() {
        let base = generate(&small()).unwrap();
        let more = generate(&SynthConfig {
            extra_audio: vec![ModelSpec::new("a2", 12, 0.3)],
            ..small()
        })
        .unwrap();
        assert_eq!(base.cross_modal.audio, more.cross_modal.audio);
        assert_eq!(more.cross_modal.extra_audio[0].dim(), 12);
    }

    #[test]
    fn subsets_are_disjoint_by_clip() {
        let data = generate(&small()).unwrap();
        let mut seen = BTreeSet::new();
        for subset in Subset::ALL {
            for meta in data.subset(subset).audio.metas() {
                assert!(seen.insert(meta.clip_id.clone()));
            }
        }
        assert_eq!(data.translation.pairs().unwrap().len(), 60);
    }

    #[test]
    fn noiseless_classes_collapse() {
        let cfg = SynthConfig {
            latent_noise: 0.0,
            audio: ModelSpec::new("a", 16, 0.0),
            image: ModelSpec::new("v", 24, 0.0),
            ..small()
        };
        let data = generate(&cfg).unwrap();
        let s = &data.classification_train.audio;
        assert_eq!(s.row(0), s.row(1));
        assert_eq!(cosine_distance(s.row(0), s.row(7)), 0.0);
        assert_ne!(s.row(0), s.row(8));
    }

    #[test]
    fn imbalance_scales_counts() {
        let mut mult = vec![1.0; 6];
        mult[2] = 0.1;
        let cfg = SynthConfig {
            class_imbalance: Some(mult),
            samples_per_class: SubsetCounts {
                translation: 100,
                ..small().samples_per_class
            },
            ..small()
        };
        let data = generate(&cfg).unwrap();
        let hist = class_histogram(&data.translation.audio, &data.ontology).unwrap();
        let counts: Vec<usize> = hist.iter().map(|(_, c)| *c).collect();
        assert_eq!(counts, vec![100, 100, 10, 100, 100, 100]);
        assert_eq!(hist[0].0, "accordion");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            SynthConfig { n_classes: 1, ..small() },
            SynthConfig {
                latent_dim: 32,
                ..small()
            },
            SynthConfig {
                latent_noise: -1.0,
                ..small()
            },
            SynthConfig {
                audio: ModelSpec::new("yamnet", 16, 0.0),
                ..small()
            },
            SynthConfig {
                shared_latent_groups: vec![vec![0, 9]],
                ..small()
            },
        ] {
            assert!(matches!(generate(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }
}
