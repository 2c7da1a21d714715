//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xmodal::translation::{batch_loss_and_grads, TowerParams, TranslationModel};
use xmodal::cosine_distance;

/// Cyclic Jacobi eigensolver for a symmetric row-major `n x n` matrix.
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as rows.
pub fn jacobi_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k * n + i]).collect()).collect();
    (values, vectors)
}

/// Sample covariance (divisor `n - 1`) of row-major `n x d` data.
pub fn covariance(x: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x[i * d + j]).sum::<f64>() / n as f64).collect();
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += (x[i * d + a] - mean[a]) * (x[i * d + b] - mean[b]);
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= (n - 1) as f64);
    cov
}

/// Brute-force loss straight from the definition, for cross-checking.
pub fn reference_loss(a: &[f64], v: &[f64], batch: usize, dim: usize, margin: f64) -> f64 {
    let row = |m: &[f64], i: usize| m[i * dim..(i + 1) * dim].to_vec();
    let mut pos = 0.0;
    let mut neg = 0.0;
    for i in 0..batch {
        for j in 0..batch {
            let d = cosine_distance(&row(a, i), &row(v, j));
            if i == j {
                pos += d * d;
            } else {
                neg += (margin - d).max(0.0).powi(2);
            }
        }
    }
    pos / batch as f64 + neg / (batch * (batch - 1)) as f64
}

pub struct GradCase {
    pub model: TranslationModel,
    pub audio_x: Vec<f64>,
    pub image_x: Vec<f64>,
    pub batch: usize,
    pub margin: f64,
}

fn random_tower(rng: &mut ChaCha8Rng, in_dim: usize, hidden: usize, out: usize) -> TowerParams {
    let mut vec = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let (w1, b1, w2, b2) = (vec(in_dim * hidden), vec(hidden), vec(hidden * out), vec(out));
    TowerParams::from_parts(in_dim, hidden, out, w1, b1, w2, b2).unwrap()
}

fn min_abs_preactivation(t: &TowerParams, x: &[f64], batch: usize) -> f64 {
    let (d, h) = (t.in_dim(), t.hidden_dim());
    let mut min = f64::INFINITY;
    for b in 0..batch {
        for j in 0..h {
            let z: f64 = t.b1()[j] + (0..d).map(|i| x[b * d + i] * t.w1()[i * h + j]).sum::<f64>();
            min = min.min(z.abs());
        }
    }
    min
}

fn min_hinge_gap(case: &GradCase) -> f64 {
    let fa: Vec<Vec<f64>> = case
        .audio_x
        .chunks(case.model.audio.in_dim())
        .map(|x| case.model.audio.forward(x).unwrap())
        .collect();
    let fv: Vec<Vec<f64>> = case
        .image_x
        .chunks(case.model.image.in_dim())
        .map(|x| case.model.image.forward(x).unwrap())
        .collect();
    let mut min = f64::INFINITY;
    for (i, a) in fa.iter().enumerate() {
        for (j, v) in fv.iter().enumerate() {
            if i != j {
                min = min.min((case.margin - cosine_distance(a, v)).abs());
            }
        }
    }
    min
}

/// A random small two-tower problem. Draws that sit within `1e-3` of a
/// ReLU or hinge kink are redrawn: finite differences are meaningless there.
pub fn random_grad_case(seed: u64) -> GradCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let in_a = rng.random_range(1..=8);
        let in_v = rng.random_range(1..=8);
        let hidden = rng.random_range(2..=6);
        let out = rng.random_range(2..=4);
        let batch = rng.random_range(2..=5);
        let margin = rng.random_range(0.3..1.5);
        let model = TranslationModel {
            audio: random_tower(&mut rng, in_a, hidden, out),
            image: random_tower(&mut rng, in_v, hidden, out),
        };
        let audio_x: Vec<f64> = (0..batch * in_a).map(|_| rng.random_range(-2.0..2.0)).collect();
        let image_x: Vec<f64> = (0..batch * in_v).map(|_| rng.random_range(-2.0..2.0)).collect();
        let case = GradCase {
            model,
            audio_x,
            image_x,
            batch,
            margin,
        };
        let kink = min_abs_preactivation(&case.model.audio, &case.audio_x, batch)
            .min(min_abs_preactivation(&case.model.image, &case.image_x, batch))
            .min(min_hinge_gap(&case));
        if kink > 1e-3 {
            return case;
        }
    }
}

fn tower_tensors(t: &TowerParams) -> [Vec<f64>; 4] {
    [t.w1().to_vec(), t.b1().to_vec(), t.w2().to_vec(), t.b2().to_vec()]
}

fn rebuild(t: &TowerParams, tensors: [Vec<f64>; 4]) -> TowerParams {
    let [w1, b1, w2, b2] = tensors;
    TowerParams::from_parts(t.in_dim(), t.hidden_dim(), t.out_dim(), w1, b1, w2, b2).unwrap()
}

/// Worst norm-wise relative error `|g - g_fd| / max(|g|, |g_fd|)` over the
/// eight parameter tensors, using central differences with step `h`.
pub fn gradient_relative_error(case: &GradCase, h: f64) -> f64 {
    let loss = |m: &TranslationModel| {
        batch_loss_and_grads(m, &case.audio_x, &case.image_x, case.batch, case.margin)
            .unwrap()
            .0
    };
    let (_, grads) = batch_loss_and_grads(&case.model, &case.audio_x, &case.image_x, case.batch, case.margin).unwrap();
    let analytic = [
        [&grads.audio.w1, &grads.audio.b1, &grads.audio.w2, &grads.audio.b2],
        [&grads.image.w1, &grads.image.b1, &grads.image.w2, &grads.image.b2],
    ];
    let mut worst: f64 = 0.0;
    for (side, analytic) in analytic.iter().enumerate() {
        for t in 0..4 {
            let tower = if side == 0 { &case.model.audio } else { &case.model.image };
            let base = tower_tensors(tower);
            let mut numeric = vec![0.0; base[t].len()];
            for (k, g) in numeric.iter_mut().enumerate() {
                let eval = |delta: f64| {
                    let mut tensors = base.clone();
                    tensors[t][k] += delta;
                    let mut m = case.model.clone();
                    if side == 0 {
                        m.audio = rebuild(tower, tensors);
                    } else {
                        m.image = rebuild(tower, tensors);
                    }
                    loss(&m)
                };
                *g = (eval(h) - eval(-h)) / (2.0 * h);
            }
            let diff = numeric.iter().zip(analytic[t].iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = numeric
                .iter()
                .map(|a| a * a)
                .sum::<f64>()
                .sqrt()
                .max(analytic[t].iter().map(|a| a * a).sum::<f64>().sqrt());
            let rel = if scale < 1e-12 { diff } else { diff / scale };
            worst = worst.max(rel);
        }
    }
    worst
}
