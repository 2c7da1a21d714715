//! Margin contrastive loss over cosine distance with in-batch negatives.

use crate::error::{Error, Result};
use crate::linalg;

/// Guard against zero-norm vectors in the cosine denominator.
pub const COSINE_EPS: f64 = 1e-12;

/// `1 - u.v / max(|u||v|, eps)`, in `[0, 2]` for nonzero inputs.
pub fn cosine_distance<T: Copy + Into<f64>>(u: &[T], v: &[T]) -> f64 {
    let (mut uv, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a.into(), b.into());
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    // sqrt of the product keeps D(u, u) exactly zero.
    1.0 - uv / (uu * vv).sqrt().max(COSINE_EPS)
}

/// Loss value plus its gradients w.r.t. both output batches.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub loss: f64,
    /// Row-major, same shape as the audio outputs.
    pub grad_audio: Vec<f64>,
    pub grad_image: Vec<f64>,
}

/// Loss over a batch of `batch` aligned rows of width `dim`:
///
/// `(1/B) sum_i D(a_i, v_i)^2 + (1/(B(B-1))) sum_{i != j} max(0, m - D(a_i, v_j))^2`
///
/// Row `i` of `audio` and row `i` of `image` are a positive pair; every other
/// cross-modal combination in the batch is a negative.
pub fn contrastive_batch_loss(audio: &[f64], image: &[f64], batch: usize, dim: usize, margin: f64) -> Result<BatchLoss> {
    if batch < 2 {
        return Err(Error::Config(format!("contrastive loss needs at least 2 pairs per batch, got {batch}")));
    }
    if audio.len() != batch * dim || image.len() != batch * dim {
        return Err(Error::DimMismatch {
            expected: batch * dim,
            actual: if audio.len() != batch * dim { audio.len() } else { image.len() },
        });
    }

    let norms = |m: &[f64]| -> Vec<f64> { m.chunks_exact(dim).map(|r| linalg::dot(r, r).sqrt()).collect() };
    let norm_a = norms(audio);
    let norm_v = norms(image);
    let sims = linalg::mul_nt(audio, batch, dim, image, batch);

    let pos_scale = 1.0 / batch as f64;
    let neg_scale = 1.0 / (batch * (batch - 1)) as f64;

    // weights[i][j] = dL/dD_ij / max(p_ij, eps)
    let mut weights = vec![0.0; batch * batch];
    let mut coef_a = vec![0.0; batch];
    let mut coef_v = vec![0.0; batch];
    let mut loss = 0.0;
    for i in 0..batch {
        for j in 0..batch {
            let idx = i * batch + j;
            let p = norm_a[i] * norm_v[j];
            let denom = p.max(COSINE_EPS);
            let d = 1.0 - sims[idx] / denom;
            let grad_d = if i == j {
                loss += pos_scale * d * d;
                2.0 * pos_scale * d
            } else {
                let hinge = margin - d;
                if hinge > 0.0 {
                    loss += neg_scale * hinge * hinge;
                    -2.0 * neg_scale * hinge
                } else {
                    0.0
                }
            };
            let w = grad_d / denom;
            weights[idx] = w;
            // The norm terms only appear when the guard is inactive.
            if p > COSINE_EPS {
                let ws = w * sims[idx];
                coef_a[i] += ws / (norm_a[i] * norm_a[i]);
                coef_v[j] += ws / (norm_v[j] * norm_v[j]);
            }
        }
    }

    // dD/da_i = -(v_j - s a_i / |a_i|^2) / p, and symmetrically for v_j.
    let mut grad_audio = linalg::mul(&weights, batch, batch, image, dim);
    for (i, (g_row, a_row)) in grad_audio.chunks_exact_mut(dim).zip(audio.chunks_exact(dim)).enumerate() {
        for (g, a) in g_row.iter_mut().zip(a_row) {
            *g = coef_a[i] * a - *g;
        }
    }
    let mut grad_image = linalg::mul_tn(&weights, batch, batch, audio, dim);
    for (j, (g_row, v_row)) in grad_image.chunks_exact_mut(dim).zip(image.chunks_exact(dim)).enumerate() {
        for (g, v) in g_row.iter_mut().zip(v_row) {
            *g = coef_v[j] * v - *g;
        }
    }

    Ok(BatchLoss {
        loss,
        grad_audio,
        grad_image,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_distance_reference_points() {
        let u = [1.0f64, 2.0, -0.5];
        assert!(cosine_distance(&u, &u).abs() < 1e-15);
        assert!((cosine_distance(&[1.0f64, 0.0], &[0.0, 3.0]) - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        assert!((cosine_distance(&u, &neg) - 2.0).abs() < 1e-15);
        assert_eq!(cosine_distance(&[0.0f64, 0.0], &[1.0, 1.0]), 1.0);
        assert_eq!(cosine_distance(&[1.0f32, 0.0], &[1.0f32, 0.0]), 0.0);
    }

    #[test]
    fn separated_batch_has_zero_loss() {
        // Positives identical, negatives orthogonal or opposite (D >= 1 = m).
        let a = [1.0, 0.0, 0.0, 1.0];
        let v = [2.0, 0.0, 0.0, 0.5];
        let out = contrastive_batch_loss(&a, &v, 2, 2, 1.0).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.grad_audio.iter().chain(&out.grad_image).all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn identical_vectors_cost_margin_squared() {
        let a = [0.3, -0.7, 0.3, -0.7];
        let out = contrastive_batch_loss(&a, &a, 2, 2, 1.0).unwrap();
        assert!((out.loss - 1.0).abs() < 1e-12);
        let out = contrastive_batch_loss(&a, &a, 2, 2, 0.5).unwrap();
        assert!((out.loss - 0.25).abs() < 1e-12);
    }

    #[test]
    fn batch_of_one_is_rejected() {
        assert!(matches!(
            contrastive_batch_loss(&[1.0], &[1.0], 1, 1, 1.0),
            Err(Error::Config(_))
        ));
    }
}
