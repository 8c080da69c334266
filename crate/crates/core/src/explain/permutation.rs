use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{feature_names, Background, Estimator, ExplainError, ScalarModel, ShapleyReport};

/// Walks one ordering from the background row to `x`, adding each
/// feature's marginal contribution into `out`.
fn walk<M: ScalarModel + ?Sized>(model: &M, x: &[f64], row: &[f64], order: &[usize], z: &mut [f64], out: &mut [f64]) {
    z.copy_from_slice(row);
    let mut prev = model.eval(z);
    for &i in order {
        z[i] = x[i];
        let cur = model.eval(z);
        out[i] += cur - prev;
        prev = cur;
    }
}

/// Monte Carlo Shapley estimate from random feature orderings.
///
/// Each ordering is paired with its reverse and one uniformly drawn
/// background row; a pair is one independent sample, from which the
/// per-feature standard error is computed. An odd `n_permutations` is
/// rounded up to the next even count.
pub fn shapley_permutation<M: ScalarModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Background,
    n_permutations: usize,
    seed: u64,
) -> Result<ShapleyReport, ExplainError> {
    if n_permutations == 0 {
        return Err(ExplainError::NoPermutations);
    }
    background.check(model, x)?;
    let k = model.n_features();
    let n_pairs = n_permutations.div_ceil(2);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..k).collect();
    let mut reversed = vec![0; k];
    let mut z = vec![0.0; k];
    let mut pair = vec![0.0; k];
    let mut sum = vec![0.0; k];
    let mut sum_sq = vec![0.0; k];

    for _ in 0..n_pairs {
        order.shuffle(&mut rng);
        let row = &background.rows[rng.random_range(0..background.rows.len())];
        pair.iter_mut().for_each(|v| *v = 0.0);
        walk(model, x, row, &order, &mut z, &mut pair);
        for (r, &o) in reversed.iter_mut().zip(order.iter().rev()) {
            *r = o;
        }
        walk(model, x, row, &reversed, &mut z, &mut pair);
        for i in 0..k {
            let v = 0.5 * pair[i];
            sum[i] += v;
            sum_sq[i] += v * v;
        }
    }

    let n = n_pairs as f64;
    let phi: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_err = (0..k)
        .map(|i| {
            if n_pairs < 2 {
                return f64::INFINITY;
            }
            let var = ((sum_sq[i] - n * phi[i] * phi[i]) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();

    Ok(ShapleyReport {
        feature_names: feature_names(k),
        phi,
        std_err: Some(std_err),
        baseline: background.baseline(model),
        prediction: model.eval(x),
        estimator: Estimator::Permutation,
        n_permutations: Some(2 * n_pairs),
        seed: Some(seed),
        explained_class: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::FnModel;

    #[test]
    fn deterministic_given_seed() {
        let model = FnModel { n_features: 5, f: |x: &[f64]| x[0] * x[1] - x[2].max(0.0) + x[4] };
        let bg = Background::new(vec![vec![0.1; 5], vec![0.9; 5], vec![0.4, 0.2, 0.8, 0.0, 1.0]]).unwrap();
        let x = [0.3, 0.7, 0.5, 0.2, 0.6];
        let a = shapley_permutation(&model, &x, &bg, 200, 42).unwrap();
        let b = shapley_permutation(&model, &x, &bg, 200, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.phi, shapley_permutation(&model, &x, &bg, 200, 43).unwrap().phi);
    }

    #[test]
    fn single_background_linear_model_is_exact() {
        // One background row and an additive model: every ordering gives the same
        // contributions, so the estimate is exact with zero spread.
        let model = FnModel { n_features: 3, f: |x: &[f64]| 2.0 * x[0] - x[1] + 0.5 * x[2] };
        let bg = Background::new(vec![vec![0.0, 1.0, 2.0]]).unwrap();
        let r = shapley_permutation(&model, &[1.0, 1.0, 1.0], &bg, 10, 0).unwrap();
        let expected = [2.0, 0.0, -0.5];
        for i in 0..3 {
            assert!((r.phi[i] - expected[i]).abs() < 1e-12);
            assert!(r.std_err.as_ref().unwrap()[i] < 1e-12);
        }
        assert_eq!(r.n_permutations, Some(10));
    }

    #[test]
    fn zero_permutations_rejected() {
        let model = FnModel { n_features: 1, f: |x: &[f64]| x[0] };
        let bg = Background::new(vec![vec![0.0]]).unwrap();
        assert!(matches!(shapley_permutation(&model, &[1.0], &bg, 0, 0), Err(ExplainError::NoPermutations)));
    }
}
