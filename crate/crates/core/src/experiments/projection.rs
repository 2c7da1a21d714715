use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::{fit_pca, project_store, PcaModel, PCA_DIM};
use crate::store::{EmbeddingStore, Modality};
use crate::translation::{translate_store, TranslationModel};

/// Maps modality-specific embeddings into a 128-dim space.
#[derive(Debug, Clone)]
pub enum Projector {
    /// Both modalities through the translation towers (one shared space).
    Joint(TranslationModel),
    /// One PCA per modality; the two output spaces are unrelated.
    Pca { audio: PcaModel, image: PcaModel },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectorKind {
    Joint,
    Pca,
}

impl Projector {
    /// Fits the per-modality PCA baseline on two single-modality stores.
    pub fn fit_pca(audio: &EmbeddingStore, image: &EmbeddingStore) -> Result<Self> {
        for (store, modality) in [(audio, Modality::Audio), (image, Modality::Image)] {
            if store.modality() != Some(modality) {
                return Err(Error::Config(format!("PCA fit needs a pure {modality} store")));
            }
        }
        Ok(Projector::Pca {
            audio: fit_pca(audio.matrix(), PCA_DIM)?,
            image: fit_pca(image.matrix(), PCA_DIM)?,
        })
    }

    pub fn kind(&self) -> ProjectorKind {
        match self {
            Projector::Joint(_) => ProjectorKind::Joint,
            Projector::Pca { .. } => ProjectorKind::Pca,
        }
    }

    /// Projects a single-modality store.
    pub fn project(&self, store: &EmbeddingStore) -> Result<EmbeddingStore> {
        match self {
            Projector::Joint(model) => translate_store(model, store),
            Projector::Pca { audio, image } => match store.modality() {
                Some(Modality::Audio) => project_store(audio, store),
                Some(Modality::Image) => project_store(image, store),
                None => Err(Error::Config(
                    "PCA projection needs a single-modality store".into(),
                )),
            },
        }
    }
}
