//! Self-supervised translation of pre-trained audio and image embeddings
//! into one joint space.
//!
//! Each modality gets its own two-layer tower (`in -> 256 -> 128`, ReLU on
//! the hidden layer, linear output). Towers are trained jointly on clip-level
//! positive pairs with a margin contrastive loss over cosine distance, using
//! every other pairing in the batch as a negative.

mod adam;
mod loss;
mod tower;
mod train;

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

pub use adam::Adam;
pub use loss::{contrastive_batch_loss, cosine_distance, BatchLoss, COSINE_EPS};
pub use tower::{tower_forward, TowerGrads, TowerParams};
pub use train::{
    batch_loss_and_grads, train_translation, EarlyStopping, EpochRecord, ModelGrads, StopReason, TrainConfig,
    TrainHistory,
};

use crate::error::{Error, Result};
use crate::store::{EmbeddingMatrix, EmbeddingStore, Modality};

pub const HIDDEN_DIM: usize = 256;
/// Width of the joint embedding space.
pub const JOINT_DIM: usize = 128;

const CHECKPOINT_MAGIC: &[u8; 4] = b"XMTM";
const CHECKPOINT_VERSION: u16 = 1;

/// Audio and image towers sharing one output space.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationModel {
    pub audio: TowerParams,
    pub image: TowerParams,
}

impl TranslationModel {
    pub fn tower(&self, modality: Modality) -> &TowerParams {
        match modality {
            Modality::Audio => &self.audio,
            Modality::Image => &self.image,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.audio.out_dim()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        for tower in [&self.audio, &self.image] {
            if tower.hidden_dim() != HIDDEN_DIM || tower.out_dim() != JOINT_DIM {
                return Err(Error::Config(format!(
                    "checkpoints hold {HIDDEN_DIM}/{JOINT_DIM} towers, got {}/{}",
                    tower.hidden_dim(),
                    tower.out_dim()
                )));
            }
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
            out.write_all(CHECKPOINT_MAGIC)?;
            out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
            for tower in [&self.audio, &self.image] {
                out.write_all(&(tower.in_dim() as u32).to_le_bytes())?;
                for tensor in tower.tensors() {
                    for &v in tensor {
                        out.write_all(&(v as f32).to_le_bytes())?;
                    }
                }
            }
            out.flush()
        };
        write(&mut out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() < 6 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::UnsupportedFormat(format!("{} is not a translation checkpoint", path.display())));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedFormat(format!("checkpoint version {version}")));
        }
        let mut reader = F32Reader { bytes: &bytes, pos: 6 };
        let audio = reader.tower()?;
        let image = reader.tower()?;
        if reader.pos != bytes.len() {
            return Err(Error::CorruptStore(format!("{} trailing bytes in checkpoint", bytes.len() - reader.pos)));
        }
        Ok(Self { audio, image })
    }
}

struct F32Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl F32Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::CorruptStore("truncated checkpoint".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }

    fn tower(&mut self) -> Result<TowerParams> {
        let in_dim = u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize;
        let w1 = self.floats(in_dim * HIDDEN_DIM)?;
        let b1 = self.floats(HIDDEN_DIM)?;
        let w2 = self.floats(HIDDEN_DIM * JOINT_DIM)?;
        let b2 = self.floats(JOINT_DIM)?;
        TowerParams::from_parts(in_dim, HIDDEN_DIM, JOINT_DIM, w1, b1, w2, b2)
    }
}

/// Maps one pre-trained embedding through the tower of its modality.
pub fn translate(model: &TranslationModel, modality: Modality, x: &[f32]) -> Result<Vec<f32>> {
    let x: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let out = model.tower(modality).forward(&x)?;
    Ok(out.into_iter().map(|v| v as f32).collect())
}

/// Translates every row, routing each record through its own modality's
/// tower. Manifest records are kept; the model tag becomes `joint:<tag>`.
pub fn translate_store(model: &TranslationModel, store: &EmbeddingStore) -> Result<EmbeddingStore> {
    let out_dim = model.out_dim();
    let mut values = vec![0.0f32; store.len() * out_dim];
    for modality in Modality::ALL {
        let rows: Vec<usize> = (0..store.len()).filter(|&i| store.meta(i).modality == modality).collect();
        if rows.is_empty() {
            continue;
        }
        let tower = model.tower(modality);
        if tower.in_dim() != store.dim() {
            return Err(Error::DimMismatch {
                expected: tower.in_dim(),
                actual: store.dim(),
            });
        }
        // Bounded chunks keep the activation buffers small.
        for chunk in rows.chunks(1024) {
            let x: Vec<f64> = chunk
                .iter()
                .flat_map(|&i| store.row(i).iter().map(|&v| v as f64))
                .collect();
            let act = tower.forward_batch(&x, chunk.len());
            for (&i, row) in chunk.iter().zip(act.out.chunks_exact(out_dim)) {
                for (dst, &v) in values[i * out_dim..(i + 1) * out_dim].iter_mut().zip(row) {
                    *dst = v as f32;
                }
            }
        }
    }
    let metas = store
        .metas()
        .iter()
        .map(|m| {
            let mut m = m.clone();
            m.embedding_model = format!("joint:{}", m.embedding_model);
            m
        })
        .collect();
    EmbeddingStore::new(metas, EmbeddingMatrix::new(out_dim, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{SampleMeta, Split};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(audio_dim: usize, image_dim: usize) -> TranslationModel {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        TranslationModel {
            audio: TowerParams::glorot(audio_dim, HIDDEN_DIM, JOINT_DIM, &mut rng),
            image: TowerParams::glorot(image_dim, HIDDEN_DIM, JOINT_DIM, &mut rng),
        }
    }

    #[test]
    fn translate_routes_by_modality() {
        let m = model(4, 6);
        let x = [0.5f32, -1.0, 2.0, 0.25];
        let out = translate(&m, Modality::Audio, &x).unwrap();
        let direct = tower_forward(&m.audio, &x.map(|v| v as f64)).unwrap();
        assert_eq!(out, direct.iter().map(|&v| v as f32).collect::<Vec<_>>());
        assert_eq!(out, translate(&m, Modality::Audio, &x).unwrap());
        assert!(matches!(
            translate(&m, Modality::Audio, &[0.0; 6]),
            Err(Error::DimMismatch { expected: 4, actual: 6 })
        ));
    }

    #[test]
    fn store_translation_matches_single_rows() {
        let m = model(3, 5);
        let metas: Vec<_> = (0..3)
            .map(|i| SampleMeta {
                sample_id: format!("s{i}"),
                clip_id: format!("c{i}"),
                modality: Modality::Audio,
                labels: vec!["x".into()],
                split: Split::Test,
                embedding_model: "toy".into(),
            })
            .collect();
        let values: Vec<f32> = (0..9).map(|v| (v as f32 * 0.37).cos()).collect();
        let store = EmbeddingStore::new(metas, EmbeddingMatrix::new(3, values).unwrap()).unwrap();
        let joint = translate_store(&m, &store).unwrap();
        assert_eq!(joint.dim(), JOINT_DIM);
        assert_eq!(joint.meta(0).embedding_model, "joint:toy");
        for i in 0..3 {
            let single = translate(&m, Modality::Audio, store.row(i)).unwrap();
            for (a, b) in joint.row(i).iter().zip(&single) {
                assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_is_f32_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.xmtm");
        let m = model(7, 3);
        m.save(&path).unwrap();
        let back = TranslationModel::load(&path).unwrap();
        for (a, b) in m.audio.tensors().iter().zip(back.audio.tensors()) {
            assert!(a.iter().zip(b).all(|(x, y)| (*x as f32) as f64 == *y));
        }
        assert_eq!(back.image.in_dim(), 3);
        let len = std::fs::metadata(&path).unwrap().len() as usize;
        let floats = |d: usize| d * 256 + 256 + 256 * 128 + 128;
        assert_eq!(len, 6 + 4 + 4 * floats(7) + 4 + 4 * floats(3));

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(TranslationModel::load(&path), Err(Error::CorruptStore(_))));
    }
}
