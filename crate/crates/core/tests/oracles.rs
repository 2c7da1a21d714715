mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xmodal::pca::project;
use xmodal::*;

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> EmbeddingMatrix {
    // Unequal column scales keep the spectrum well separated.
    let values = (0..n * d)
        .map(|i| rng.random_range(-1.0f32..1.0) * (1 + i % d) as f32)
        .collect();
    EmbeddingMatrix::new(d, values).unwrap()
}

fn signed(mut v: Vec<f64>) -> Vec<f64> {
    let pivot = v
        .iter()
        .enumerate()
        .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

#[test]
fn pca_matches_jacobi_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let (n, d) = (50, 10);
        let x = random_matrix(&mut rng, n, d);
        let xf: Vec<f64> = x.values().iter().map(|&v| v as f64).collect();
        let (values, vectors) = common::jacobi_eigen(&common::covariance(&xf, n, d), d);
        for k in [1, 4, 10] {
            let model = fit_pca(&x, k).unwrap();
            for i in 0..k {
                assert!((model.explained_variance()[i] - values[i]).abs() < 1e-6 * values[0]);
                let want = signed(vectors[i].clone());
                for (a, b) in model.component(i).iter().zip(&want) {
                    assert!((a - b).abs() < 1e-6, "component {i}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn low_rank_data_projects_isometrically() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (rank, k, d) in [(1, 1, 6), (2, 3, 8), (3, 3, 12), (5, 8, 20)] {
        let basis: Vec<Vec<f64>> = (0..rank)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let offset: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let rows: Vec<Vec<f32>> = (0..40)
            .map(|_| {
                let c: Vec<f64> = (0..rank).map(|_| rng.random_range(-2.0..2.0)).collect();
                (0..d)
                    .map(|j| (offset[j] + (0..rank).map(|r| c[r] * basis[r][j]).sum::<f64>()) as f32)
                    .collect()
            })
            .collect();
        let x = EmbeddingMatrix::from_rows(d, &rows).unwrap();
        let model = fit_pca(&x, k).unwrap();
        let z: Vec<Vec<f32>> = rows.iter().map(|r| project(&model, r).unwrap()).collect();
        let dist = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt();
        for i in 0..rows.len() {
            for j in 0..i {
                let before = dist(&rows[i], &rows[j]);
                let after = dist(&z[i], &z[j]);
                assert!((before - after).abs() < 1e-4, "rank {rank}: {before} vs {after}");
            }
        }
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in 0..40 {
        let case = common::random_grad_case(seed);
        let err = common::gradient_relative_error(&case, 1e-5);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn loss_agrees_with_definition_on_tower_outputs() {
    let case = common::random_grad_case(100);
    let fwd = |t: &translation::TowerParams, x: &[f64]| -> Vec<f64> {
        x.chunks(t.in_dim()).flat_map(|r| t.forward(r).unwrap()).collect()
    };
    let a = fwd(&case.model.audio, &case.audio_x);
    let v = fwd(&case.model.image, &case.image_x);
    let dim = case.model.out_dim();
    let (loss, _) =
        translation::batch_loss_and_grads(&case.model, &case.audio_x, &case.image_x, case.batch, case.margin).unwrap();
    let want = common::reference_loss(&a, &v, case.batch, dim, case.margin);
    assert!((loss - want).abs() < 1e-12);
}
