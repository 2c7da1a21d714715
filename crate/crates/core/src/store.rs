//! On-disk embedding datasets.
//!
//! A store is a directory holding two row-aligned files:
//!
//! * `manifest.jsonl`: one [`SampleMeta`] JSON object per line.
//! * `embeddings.xmeb`: a little-endian f32 matrix with an 18-byte header
//!   (`XMEB`, version `u16 = 1`, dim `u32`, count `u64`) followed by
//!   `count * dim` row-major values.
//!
//! Line `i` of the manifest describes row `i` of the matrix. Every view and
//! transformation in this crate preserves that alignment.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::Ontology;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const MATRIX_FILE: &str = "embeddings.xmeb";

const MATRIX_MAGIC: &[u8; 4] = b"XMEB";
const MATRIX_VERSION: u16 = 1;
const MATRIX_HEADER_LEN: u64 = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Image,
}

impl Modality {
    pub const ALL: [Modality; 2] = [Modality::Audio, Modality::Image];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Image => "image",
        }
    }

    pub fn other(self) -> Modality {
        match self {
            Modality::Audio => Modality::Image,
            Modality::Image => Modality::Audio,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "audio" => Ok(Modality::Audio),
            "image" => Ok(Modality::Image),
            other => Err(Error::Config(format!("unknown modality `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// One manifest record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleMeta {
    pub sample_id: String,
    /// Source clip; the audio and image records of one clip share it.
    pub clip_id: String,
    pub modality: Modality,
    /// Ontology node ids, never display names.
    pub labels: Vec<String>,
    pub split: Split,
    pub embedding_model: String,
}

/// Output dimension of the published pre-trained embedding models.
///
/// Unknown tags (synthetic models, joint or PCA projections) have no declared
/// dimension and are not checked.
pub fn declared_dim(embedding_model: &str) -> Option<usize> {
    match embedding_model {
        "vgg16" => Some(512),
        "resnet50" => Some(2048),
        "openl3-image" => Some(8192),
        "vggish" => Some(128),
        "yamnet" => Some(1024),
        "openl3-audio" => Some(6144),
        _ => None,
    }
}

/// Row-major f32 matrix, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    values: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("embedding dimension must be positive".into()));
        }
        if values.len() % dim != 0 {
            return Err(Error::Format(format!(
                "{} values do not form rows of dimension {dim}",
                values.len()
            )));
        }
        Ok(Self { dim, values })
    }

    pub fn from_rows<R: AsRef<[f32]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(dim, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn select(&self, indices: &[usize]) -> EmbeddingMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        EmbeddingMatrix {
            dim: self.dim,
            values,
        }
    }

    /// Fails on the first row holding a NaN or infinity.
    pub fn check_finite(&self) -> Result<()> {
        for (row, values) in self.rows().enumerate() {
            if let Some(col) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation {
                    row,
                    reason: format!("non-finite value {} in column {col}", values[col]),
                });
            }
        }
        Ok(())
    }
}

/// A validated manifest plus its row-aligned matrix. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    metas: Vec<SampleMeta>,
    matrix: EmbeddingMatrix,
}

impl EmbeddingStore {
    pub fn new(metas: Vec<SampleMeta>, matrix: EmbeddingMatrix) -> Result<Self> {
        validate(&metas, &matrix)?;
        Ok(Self { metas, matrix })
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        read_store(dir)
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        write_store(&self.metas, &self.matrix, dir)
    }

    pub fn metas(&self) -> &[SampleMeta] {
        &self.metas
    }

    pub fn meta(&self, i: usize) -> &SampleMeta {
        &self.metas[i]
    }

    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> &[f32] {
        self.matrix.row(i)
    }

    pub fn len(&self) -> usize {
        self.metas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SampleMeta, &[f32])> + '_ {
        self.metas.iter().zip(self.matrix.rows())
    }

    pub fn into_parts(self) -> (Vec<SampleMeta>, EmbeddingMatrix) {
        (self.metas, self.matrix)
    }

    /// The modality shared by every record, or `None` for an empty or mixed store.
    pub fn modality(&self) -> Option<Modality> {
        let first = self.metas.first()?.modality;
        self.metas
            .iter()
            .all(|m| m.modality == first)
            .then_some(first)
    }

    pub fn filter_split(&self, split: Split) -> StoreView<'_> {
        filter_split(self, split)
    }

    pub fn select(&self, indices: &[usize]) -> EmbeddingStore {
        EmbeddingStore {
            metas: indices.iter().map(|&i| self.metas[i].clone()).collect(),
            matrix: self.matrix.select(indices),
        }
    }

    /// Every label must name a node of `ontology`.
    pub fn validate_labels(&self, ontology: &Ontology) -> Result<()> {
        for (row, meta) in self.metas.iter().enumerate() {
            for label in &meta.labels {
                if !ontology.contains(label) {
                    return Err(Error::Validation {
                        row,
                        reason: format!("label `{label}` is not in the ontology"),
                    });
                }
            }
        }
        Ok(())
    }
}

fn validate(metas: &[SampleMeta], matrix: &EmbeddingMatrix) -> Result<()> {
    if metas.len() != matrix.count() {
        return Err(Error::Format(format!(
            "manifest has {} records but matrix has {} rows",
            metas.len(),
            matrix.count()
        )));
    }
    let mut seen = HashSet::with_capacity(metas.len());
    for (row, meta) in metas.iter().enumerate() {
        if !seen.insert(meta.sample_id.as_str()) {
            return Err(Error::Validation {
                row,
                reason: format!("duplicate sample_id `{}`", meta.sample_id),
            });
        }
        if meta.labels.is_empty() {
            return Err(Error::Validation {
                row,
                reason: "labels must be non-empty".into(),
            });
        }
        if let Some(dim) = declared_dim(&meta.embedding_model) {
            if dim != matrix.dim() {
                return Err(Error::Format(format!(
                    "row {row}: model `{}` produces {dim}-dim embeddings but the matrix is {}-dim",
                    meta.embedding_model,
                    matrix.dim()
                )));
            }
        }
    }
    matrix.check_finite()
}

/// Validates and writes `manifest.jsonl` and `embeddings.xmeb` into `dir`.
pub fn write_store(metas: &[SampleMeta], matrix: &EmbeddingMatrix, dir: impl AsRef<Path>) -> Result<()> {
    validate(metas, matrix)?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let manifest_path = dir.join(MANIFEST_FILE);
    let file = File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut out = BufWriter::new(file);
    for meta in metas {
        serde_json::to_writer(&mut out, meta)?;
        out.write_all(b"\n").map_err(|e| Error::io(&manifest_path, e))?;
    }
    out.flush().map_err(|e| Error::io(&manifest_path, e))?;

    let matrix_path = dir.join(MATRIX_FILE);
    let file = File::create(&matrix_path).map_err(|e| Error::io(&matrix_path, e))?;
    let mut out = BufWriter::new(file);
    write_matrix(&mut out, matrix).map_err(|e| Error::io(&matrix_path, e))?;
    out.flush().map_err(|e| Error::io(&matrix_path, e))?;
    Ok(())
}

fn write_matrix(out: &mut impl Write, matrix: &EmbeddingMatrix) -> std::io::Result<()> {
    out.write_all(MATRIX_MAGIC)?;
    out.write_all(&MATRIX_VERSION.to_le_bytes())?;
    out.write_all(&(matrix.dim() as u32).to_le_bytes())?;
    out.write_all(&(matrix.count() as u64).to_le_bytes())?;
    for v in matrix.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads and validates a store directory.
pub fn read_store(dir: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let dir = dir.as_ref();
    let matrix = read_matrix(&dir.join(MATRIX_FILE))?;

    let manifest_path = dir.join(MANIFEST_FILE);
    let file = File::open(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut metas = Vec::with_capacity(matrix.count());
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&manifest_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let meta: SampleMeta = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("manifest line {}: {e}", line_no + 1)))?;
        metas.push(meta);
    }
    EmbeddingStore::new(metas, matrix)
}

pub(crate) fn read_matrix(path: &Path) -> Result<EmbeddingMatrix> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut bytes = Vec::with_capacity(file_len as usize);
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;

    if bytes.len() < MATRIX_MAGIC.len() {
        return Err(Error::CorruptStore(format!("{} is too short to hold a header", path.display())));
    }
    if &bytes[..4] != MATRIX_MAGIC {
        return Err(Error::UnsupportedFormat(format!(
            "{}: bad magic {:?}",
            path.display(),
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    if (bytes.len() as u64) < MATRIX_HEADER_LEN {
        return Err(Error::CorruptStore(format!("{}: truncated header", path.display())));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MATRIX_VERSION {
        return Err(Error::UnsupportedFormat(format!(
            "{}: version {version} (expected {MATRIX_VERSION})",
            path.display()
        )));
    }
    let dim = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as u64;
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    if dim == 0 {
        return Err(Error::CorruptStore(format!("{}: zero dimension", path.display())));
    }
    let expected = dim
        .checked_mul(count)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(MATRIX_HEADER_LEN));
    if expected != Some(bytes.len() as u64) {
        return Err(Error::CorruptStore(format!(
            "{}: header promises {count}x{dim} floats but file holds {} bytes",
            path.display(),
            bytes.len()
        )));
    }
    let values = bytes[MATRIX_HEADER_LEN as usize..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    EmbeddingMatrix::new(dim as usize, values)
}

/// Row subset of a store; index `i` of the view is row `indices[i]` of the store.
#[derive(Debug, Clone)]
pub struct StoreView<'a> {
    store: &'a EmbeddingStore,
    indices: Vec<usize>,
}

impl<'a> StoreView<'a> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn meta(&self, i: usize) -> &'a SampleMeta {
        self.store.meta(self.indices[i])
    }

    pub fn row(&self, i: usize) -> &'a [f32] {
        self.store.row(self.indices[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'a SampleMeta, &'a [f32])> + '_ {
        self.indices
            .iter()
            .map(move |&i| (self.store.meta(i), self.store.row(i)))
    }

    pub fn to_store(&self) -> EmbeddingStore {
        self.store.select(&self.indices)
    }
}

pub fn filter_split(store: &EmbeddingStore, split: Split) -> StoreView<'_> {
    let indices = store
        .metas()
        .iter()
        .enumerate()
        .filter(|(_, m)| m.split == split)
        .map(|(i, _)| i)
        .collect();
    StoreView { store, indices }
}

/// Audio and image stores joined on clip identity.
#[derive(Debug, Clone)]
pub struct PairedDataset<'a> {
    pub audio: &'a EmbeddingStore,
    pub image: &'a EmbeddingStore,
    /// `(audio row, image row)`, sorted by clip id.
    pub pairs: Vec<(usize, usize)>,
}

impl PairedDataset<'_> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn clip_index(store: &EmbeddingStore, modality: Modality) -> Result<BTreeMap<&str, usize>> {
    let mut index = BTreeMap::new();
    for (row, meta) in store.metas().iter().enumerate() {
        if meta.modality != modality {
            return Err(Error::Validation {
                row,
                reason: format!("{} record in the {modality} store", meta.modality),
            });
        }
        if index.insert(meta.clip_id.as_str(), row).is_some() {
            return Err(Error::AmbiguousPair {
                clip_id: meta.clip_id.clone(),
                modality,
            });
        }
    }
    Ok(index)
}

/// Pairs every clip present in both stores.
pub fn pair_by_clip<'a>(audio: &'a EmbeddingStore, image: &'a EmbeddingStore) -> Result<PairedDataset<'a>> {
    let audio_clips = clip_index(audio, Modality::Audio)?;
    let image_clips = clip_index(image, Modality::Image)?;

    let mut pairs = Vec::new();
    for (clip, &a) in &audio_clips {
        let Some(&v) = image_clips.get(clip) else {
            continue;
        };
        let (ma, mv) = (audio.meta(a), image.meta(v));
        if ma.split != mv.split {
            return Err(Error::PairMismatch {
                clip_id: clip.to_string(),
                reason: format!("splits differ ({} vs {})", ma.split, mv.split),
            });
        }
        let mut la = ma.labels.clone();
        let mut lv = mv.labels.clone();
        la.sort();
        lv.sort();
        if la != lv {
            return Err(Error::PairMismatch {
                clip_id: clip.to_string(),
                reason: "labels differ".into(),
            });
        }
        pairs.push((a, v));
    }
    Ok(PairedDataset { audio, image, pairs })
}
