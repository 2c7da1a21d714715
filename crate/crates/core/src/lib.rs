//! Joint audio/image embeddings by contrastive translation, with
//! ontology-aware retrieval and instrument classification on top.

pub mod classes;
pub mod error;
pub mod experiments;
pub mod forest;
mod linalg;
pub mod ontology;
pub mod pca;
pub mod retrieval;
pub mod store;
pub mod synth;
pub mod translation;

pub use classes::{ClassMap, LabeledData, INSTRUMENTS};
pub use error::{Error, Result};
pub use forest::{evaluate, fit_forest, predict, ClassificationReport, ForestConfig, RandomForest};
pub use ontology::{relevance, Ontology, OntologyNode, RelevanceConfig, RelevanceScorer};
pub use pca::{fit_pca, project_store, PcaModel};
pub use retrieval::{cross_modal_eval, ndcg_at_k, random_baseline_eval, retrieve_top_k, Direction, NdcgReport};
pub use synth::{generate, SynthConfig, SynthData};
pub use store::{pair_by_clip, EmbeddingMatrix, EmbeddingStore, Modality, PairedDataset, SampleMeta, Split};
pub use translation::{contrastive_batch_loss, cosine_distance, train_translation, translate_store, TrainConfig, TranslationModel};
