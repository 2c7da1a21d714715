//! Principal component projection to a fixed width, the untranslated
//! baseline for joint classification.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::linalg;
use crate::store::{EmbeddingMatrix, EmbeddingStore};

const CHECKPOINT_MAGIC: &[u8; 4] = b"XMPC";
const CHECKPOINT_VERSION: u16 = 1;

/// Default number of retained components.
pub const PCA_DIM: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    in_dim: usize,
    k: usize,
    mean: Vec<f64>,
    /// `k x in_dim`, row-major; rows are orthonormal axes.
    components: Vec<f64>,
    explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.in_dim..(i + 1) * self.in_dim]
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
            out.write_all(CHECKPOINT_MAGIC)?;
            out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
            out.write_all(&(self.in_dim as u32).to_le_bytes())?;
            out.write_all(&(self.k as u32).to_le_bytes())?;
            for v in self.mean.iter().chain(&self.components).chain(&self.explained_variance) {
                out.write_all(&(*v as f32).to_le_bytes())?;
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
        if bytes.len() < 14 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::UnsupportedFormat(format!("{} is not a PCA checkpoint", path.display())));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedFormat(format!("PCA checkpoint version {version}")));
        }
        let in_dim = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let k = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
        let floats = in_dim + k * in_dim + k;
        if bytes.len() != 14 + 4 * floats {
            return Err(Error::CorruptStore(format!(
                "PCA checkpoint for {in_dim}x{k} should hold {} bytes, found {}",
                14 + 4 * floats,
                bytes.len()
            )));
        }
        let values: Vec<f64> = bytes[14..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(Self {
            in_dim,
            k,
            mean: values[..in_dim].to_vec(),
            components: values[in_dim..in_dim + k * in_dim].to_vec(),
            explained_variance: values[in_dim + k * in_dim..].to_vec(),
        })
    }
}

/// Fits the top-`k` principal axes of the rows of `x`.
///
/// Uses the eigendecomposition of the mean-centred sample covariance
/// (normalized by `n - 1`). Axes are sorted by descending variance and signed
/// so that each axis's largest-magnitude entry is positive. For rank-deficient
/// data the trailing axes are an arbitrary orthonormal completion with zero
/// variance.
pub fn fit_pca(x: &EmbeddingMatrix, k: usize) -> Result<PcaModel> {
    let (n, d) = (x.count(), x.dim());
    if n < 2 {
        return Err(Error::Config(format!("PCA needs at least 2 samples, got {n}")));
    }
    if k == 0 || d < k {
        return Err(Error::Config(format!("cannot keep {k} components of {d}-dim data")));
    }
    x.check_finite()?;

    let mut mean = vec![0.0f64; d];
    for row in x.rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<f64> = x
        .rows()
        .flat_map(|row| row.iter().zip(&mean).map(|(&v, m)| v as f64 - m))
        .collect();

    let mut cov = linalg::mul_tn(&centered, n, d, &centered, d);
    cov.iter_mut().for_each(|c| *c /= (n - 1) as f64);
    // Exact symmetry before the solver reads one triangle.
    for i in 0..d {
        for j in 0..i {
            let s = 0.5 * (cov[i * d + j] + cov[j * d + i]);
            cov[i * d + j] = s;
            cov[j * d + i] = s;
        }
    }
    let cov = Mat::from_fn(d, d, |i, j| cov[i * d + j]);
    let eigen = cov
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Domain(format!("eigendecomposition failed: {e:?}")))?;
    let values = eigen.S().column_vector();
    let vectors = eigen.U();

    let mut components = Vec::with_capacity(k * d);
    let mut explained_variance = Vec::with_capacity(k);
    // Eigenvalues come back ascending.
    for idx in (d - k..d).rev() {
        let col = vectors.col(idx);
        let mut axis: Vec<f64> = (0..d).map(|r| col[r]).collect();
        let pivot = axis
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > axis[best].abs() { i } else { best });
        if axis[pivot] < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        components.extend_from_slice(&axis);
        explained_variance.push(values[idx].max(0.0));
    }

    Ok(PcaModel {
        in_dim: d,
        k,
        mean,
        components,
        explained_variance,
    })
}

/// `components * (x - mean)`.
pub fn project(model: &PcaModel, x: &[f32]) -> Result<Vec<f32>> {
    if x.len() != model.in_dim {
        return Err(Error::DimMismatch {
            expected: model.in_dim,
            actual: x.len(),
        });
    }
    let centered: Vec<f64> = x.iter().zip(&model.mean).map(|(&v, m)| v as f64 - m).collect();
    Ok((0..model.k)
        .map(|i| linalg::dot(model.component(i), &centered) as f32)
        .collect())
}

/// Projects every row; the model tag becomes `pca:<tag>`.
pub fn project_store(model: &PcaModel, store: &EmbeddingStore) -> Result<EmbeddingStore> {
    if store.dim() != model.in_dim {
        return Err(Error::DimMismatch {
            expected: model.in_dim,
            actual: store.dim(),
        });
    }
    let n = store.len();
    let centered: Vec<f64> = store
        .matrix()
        .rows()
        .flat_map(|row| row.iter().zip(&model.mean).map(|(&v, m)| v as f64 - m))
        .collect();
    let projected = linalg::mul_nt(&centered, n, model.in_dim, &model.components, model.k);
    let metas = store
        .metas()
        .iter()
        .map(|m| {
            let mut m = m.clone();
            m.embedding_model = format!("pca:{}", m.embedding_model);
            m
        })
        .collect();
    let values = projected.into_iter().map(|v| v as f32).collect();
    EmbeddingStore::new(metas, EmbeddingMatrix::new(model.k, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn line_data_is_one_component() {
        let dir = [1.0f32, -2.0, 0.5, 3.0, 1.5];
        let rows: Vec<Vec<f32>> = (0..40)
            .map(|t| dir.iter().map(|d| d * (t as f32 * 0.25 - 4.0) + 0.75).collect())
            .collect();
        let model = fit_pca(&EmbeddingMatrix::from_rows(5, &rows).unwrap(), 3).unwrap();
        let total: f64 = model.explained_variance().iter().sum();
        assert!(model.explained_variance()[0] / total >= 0.999);
    }

    #[test]
    fn identical_rows_have_no_variance() {
        let rows = vec![vec![1.0f32, 2.0, 3.0]; 6];
        let model = fit_pca(&EmbeddingMatrix::from_rows(3, &rows).unwrap(), 2).unwrap();
        assert!(model.explained_variance().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn projecting_the_mean_gives_zero_and_map_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f32>> = (0..30).map(|_| (0..6).map(|_| rng.random::<f32>()).collect()).collect();
        let model = fit_pca(&EmbeddingMatrix::from_rows(6, &rows).unwrap(), 4).unwrap();
        let mean: Vec<f32> = model.mean().iter().map(|&m| m as f32).collect();
        assert!(project(&model, &mean).unwrap().iter().all(|v| v.abs() < 1e-6));

        let x = [0.3f32, -0.1, 0.2, 0.05, -0.4, 0.6];
        let shifted: Vec<f32> = x.iter().zip(&mean).map(|(a, m)| a + m).collect();
        let lhs = project(&model, &shifted).unwrap();
        for (i, l) in lhs.iter().enumerate() {
            let expected: f64 = model.component(i).iter().zip(&x).map(|(c, &v)| c * v as f64).sum();
            assert!((*l as f64 - expected).abs() < 1e-5);
        }
    }

    #[test]
    fn sign_convention_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f32>> = (0..25).map(|_| (0..7).map(|_| rng.random::<f32>() - 0.5).collect()).collect();
        let model = fit_pca(&EmbeddingMatrix::from_rows(7, &rows).unwrap(), 5).unwrap();
        for i in 0..5 {
            let c = model.component(i);
            let peak = c.iter().cloned().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            assert!(peak > 0.0);
            for j in 0..5 {
                let dot = linalg::dot(c, model.component(j));
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((dot - target).abs() < 1e-6);
            }
        }
        assert!(model.explained_variance().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn errors() {
        let one = EmbeddingMatrix::new(3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(fit_pca(&one, 2), Err(Error::Config(_))));
        let two = EmbeddingMatrix::new(3, vec![0.0; 6]).unwrap();
        assert!(matches!(fit_pca(&two, 4), Err(Error::Config(_))));
        let model = fit_pca(&two, 2).unwrap();
        assert!(matches!(project(&model, &[1.0]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pca.xmpc");
        let rows: Vec<Vec<f32>> = (0..10).map(|i| vec![i as f32, (i * i) as f32 * 0.1, 1.0]).collect();
        let model = fit_pca(&EmbeddingMatrix::from_rows(3, &rows).unwrap(), 2).unwrap();
        model.save(&path).unwrap();
        let back = PcaModel::load(&path).unwrap();
        assert_eq!(back.k(), 2);
        assert_eq!(back.in_dim(), 3);
        for (a, b) in model.components().iter().zip(back.components()) {
            assert_eq!((*a as f32) as f64, *b);
        }
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 14 + 4 * (3 + 6 + 2));
    }
}
