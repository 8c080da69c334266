use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xapp_core::explain::{shapley_exact, shapley_permutation, Background, ClassLogit, FnModel};
use xapp_core::model::MlpModel;

fn background(k: usize, n: usize, seed: u64) -> Background {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Background::new((0..n).map(|_| (0..k).map(|_| rng.random_range(0.0..1.0)).collect()).collect()).unwrap()
}

#[test]
fn permutation_estimate_within_three_standard_errors_of_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let net = MlpModel::he_init(&[8, 16, 16, 2], &mut rng);
    let bg = background(8, 30, 22);
    let x: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
    let target = ClassLogit { model: &net, class: 1 };
    let exact = shapley_exact(&target, &x, &bg).unwrap();
    assert!(exact.efficiency_residual().abs() < 1e-9);
    let est = shapley_permutation(&target, &x, &bg, 4000, 23).unwrap();
    let se = est.std_err.as_ref().unwrap();
    for i in 0..8 {
        assert!((est.phi[i] - exact.phi[i]).abs() <= 3.0 * se[i], "feature {i}: {} vs {} (se {})", est.phi[i], exact.phi[i], se[i]);
    }
}

#[test]
fn dummy_feature_gets_nothing() {
    let f = FnModel { n_features: 6, f: |x: &[f64]| (x[0] * x[1]).sin() + x[2].max(x[3]) - x[4] * x[4] };
    let bg = background(6, 25, 31);
    let x = [0.9, 0.2, 0.4, 0.7, 0.1, 0.5];
    let exact = shapley_exact(&f, &x, &bg).unwrap();
    assert_eq!(exact.phi[5], 0.0);
    let est = shapley_permutation(&f, &x, &bg, 2000, 32).unwrap();
    assert!(est.phi[5].abs() < 1e-12);
}

#[test]
fn linear_model_closed_form() {
    let w = [0.5, -1.25, 2.0, 0.0, 3.5, -0.75, 1.0, 0.25];
    let f = FnModel { n_features: 8, f: move |x: &[f64]| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + 0.3 };
    let bg = background(8, 40, 41);
    let x = [0.1, 0.9, 0.5, 0.3, 0.8, 0.2, 0.6, 0.4];
    let exact = shapley_exact(&f, &x, &bg).unwrap();
    for i in 0..8 {
        let mean = bg.rows.iter().map(|r| r[i]).sum::<f64>() / bg.rows.len() as f64;
        assert!((exact.phi[i] - w[i] * (x[i] - mean)).abs() < 1e-6);
    }
    assert!(exact.efficiency_residual().abs() < 1e-9);
}
