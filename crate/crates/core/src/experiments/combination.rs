use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{Ontology, RelevanceConfig};
use crate::retrieval::{cross_modal_eval, random_baseline_eval, CrossModalReport, DEFAULT_K};
use crate::store::{pair_by_clip, EmbeddingStore};
use crate::translation::{train_translation, translate_store, TrainConfig};

/// One embedding model of one modality: its translation-subset store (for
/// training) and its cross-modal store (for evaluation).
#[derive(Debug, Clone, Copy)]
pub struct ComboInput<'a> {
    pub name: &'a str,
    pub translation: &'a EmbeddingStore,
    pub eval: &'a EmbeddingStore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComboConfig {
    pub train: TrainConfig,
    pub k: usize,
    pub relevance: Option<RelevanceConfig>,
    pub baseline_seed: u64,
}

impl Default for ComboConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            k: DEFAULT_K,
            relevance: None,
            baseline_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Trained,
    NoTranslation,
    Random,
}

impl RowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RowKind::Trained => "trained",
            RowKind::NoTranslation => "no_translation",
            RowKind::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboRow {
    pub kind: RowKind,
    pub audio_model: String,
    pub image_model: String,
    pub ndcg_audio_to_image: f64,
    pub ndcg_image_to_audio: f64,
}

impl ComboRow {
    fn new(kind: RowKind, audio_model: &str, image_model: &str, report: &CrossModalReport) -> Self {
        Self {
            kind,
            audio_model: audio_model.into(),
            image_model: image_model.into(),
            ndcg_audio_to_image: report.audio_to_image.mean_ndcg,
            ndcg_image_to_audio: report.image_to_audio.mean_ndcg,
        }
    }

    pub fn mean(&self) -> f64 {
        (self.ndcg_audio_to_image + self.ndcg_image_to_audio) / 2.0
    }
}

/// Rows sorted by mean NDCG, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboTable {
    pub rows: Vec<ComboRow>,
}

impl ComboTable {
    pub fn find(&self, kind: RowKind, audio_model: &str, image_model: &str) -> Option<&ComboRow> {
        self.rows
            .iter()
            .find(|r| r.kind == kind && r.audio_model == audio_model && r.image_model == image_model)
    }

    pub fn of_kind(&self, kind: RowKind) -> impl Iterator<Item = &ComboRow> {
        self.rows.iter().filter(move |r| r.kind == kind)
    }

    /// `rank,kind,audio_model,image_model,ndcg_audio_to_image,ndcg_image_to_audio,mean_ndcg`
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = csv::Writer::from_path(path)?;
        out.write_record([
            "rank",
            "kind",
            "audio_model",
            "image_model",
            "ndcg_audio_to_image",
            "ndcg_image_to_audio",
            "mean_ndcg",
        ])?;
        for (rank, r) in self.rows.iter().enumerate() {
            out.write_record([
                (rank + 1).to_string(),
                r.kind.as_str().to_string(),
                r.audio_model.clone(),
                r.image_model.clone(),
                r.ndcg_audio_to_image.to_string(),
                r.ndcg_image_to_audio.to_string(),
                r.mean().to_string(),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Trains one translation model per (audio, image) combination and scores
/// each on its cross-modal stores.
///
/// Two baseline rows are added: a random ranking over the first
/// combination's pool, and `no_translation` scored directly in its own
/// space (both inputs must share a dimension).
pub fn run_combination_study(
    audio: &[ComboInput<'_>],
    image: &[ComboInput<'_>],
    no_translation: Option<(ComboInput<'_>, ComboInput<'_>)>,
    ontology: &Ontology,
    cfg: &ComboConfig,
) -> Result<ComboTable> {
    if audio.is_empty() || image.is_empty() {
        return Err(Error::Config("the study needs at least one store per modality".into()));
    }
    let relevance = cfg
        .relevance
        .clone()
        .unwrap_or_else(|| RelevanceConfig::for_ontology(ontology));
    let mut rows = Vec::new();
    for a in audio {
        for v in image {
            let pairs = pair_by_clip(a.translation, v.translation)?;
            log::info!("training {} x {} on {} pairs", a.name, v.name, pairs.len());
            let (model, _) = train_translation(&pairs, &cfg.train)?;
            let report = cross_modal_eval(
                &translate_store(&model, a.eval)?,
                &translate_store(&model, v.eval)?,
                ontology,
                &relevance,
                cfg.k,
            )?;
            rows.push(ComboRow::new(RowKind::Trained, a.name, v.name, &report));
        }
    }
    if let Some((a, v)) = no_translation {
        if a.eval.dim() != v.eval.dim() {
            return Err(Error::DimMismatch {
                expected: a.eval.dim(),
                actual: v.eval.dim(),
            });
        }
        let report = cross_modal_eval(a.eval, v.eval, ontology, &relevance, cfg.k)?;
        rows.push(ComboRow::new(RowKind::NoTranslation, a.name, v.name, &report));
    }
    let report = random_baseline_eval(audio[0].eval, image[0].eval, ontology, &relevance, cfg.k, cfg.baseline_seed)?;
    rows.push(ComboRow::new(RowKind::Random, "-", "-", &report));

    rows.sort_by(|x, y| y.mean().total_cmp(&x.mean()));
    Ok(ComboTable { rows })
}
