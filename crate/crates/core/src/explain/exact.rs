use super::{feature_names, Background, Estimator, ExplainError, ScalarModel, ShapleyReport};

/// Upper bound on `k` for coalition enumeration (`2^k` value evaluations).
pub const MAX_EXACT_FEATURES: usize = 12;

/// Exact Shapley values by enumerating every coalition.
pub fn shapley_exact<M: ScalarModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Background,
) -> Result<ShapleyReport, ExplainError> {
    let k = model.n_features();
    if k > MAX_EXACT_FEATURES {
        return Err(ExplainError::TooManyFeatures { k, max: MAX_EXACT_FEATURES });
    }
    background.check(model, x)?;

    let n_masks = 1usize << k;
    let mut value = vec![0.0; n_masks];
    let mut z = vec![0.0; k];
    for (mask, v) in value.iter_mut().enumerate() {
        let mut total = 0.0;
        for row in &background.rows {
            for i in 0..k {
                z[i] = if mask >> i & 1 == 1 { x[i] } else { row[i] };
            }
            total += model.eval(&z);
        }
        *v = total / background.rows.len() as f64;
    }

    // weight[s] = s!(k-s-1)!/k!
    let mut weight = vec![0.0; k.max(1)];
    for (s, w) in weight.iter_mut().enumerate() {
        *w = 1.0 / (k as f64 * binomial(k - 1, s));
    }

    let mut phi = vec![0.0; k];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for mask in (0..n_masks).filter(|m| m & bit == 0) {
            acc += weight[mask.count_ones() as usize] * (value[mask | bit] - value[mask]);
        }
        *p = acc;
    }

    Ok(ShapleyReport {
        feature_names: feature_names(k),
        phi,
        std_err: None,
        baseline: value[0],
        prediction: model.eval(x),
        estimator: Estimator::Exact,
        n_permutations: None,
        seed: None,
        explained_class: None,
    })
}

fn binomial(n: usize, r: usize) -> f64 {
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::FnModel;

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(11, 0), 1.0);
        assert_eq!(binomial(11, 11), 1.0);
    }

    #[test]
    fn linear_model_closed_form() {
        let w = [1.5, -2.0, 0.5, 3.0];
        let model = FnModel { n_features: 4, f: move |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() };
        let bg = Background::new(vec![vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 0.0, 1.0, -1.0], vec![0.5, 0.5, 0.5, 0.5]]).unwrap();
        let x = [0.2, 0.9, -0.4, 1.1];
        let r = shapley_exact(&model, &x, &bg).unwrap();
        for i in 0..4 {
            let mean: f64 = bg.rows.iter().map(|r| r[i]).sum::<f64>() / 3.0;
            assert!((r.phi[i] - w[i] * (x[i] - mean)).abs() < 1e-12);
        }
        assert!(r.efficiency_residual().abs() < 1e-12);
    }

    #[test]
    fn hand_enumerated_three_feature_table() {
        // f = x0·x1 + x2 with a single all-zero background row and x = (1, 2, 3):
        // v(∅)=0 v(0)=0 v(1)=0 v(2)=3 v(01)=2 v(02)=3 v(12)=3 v(012)=5.
        // φ0 = 1/3·0 + 1/6·(2-0) + 1/6·(3-3) + 1/3·(5-3) = 1, φ1 = 1, φ2 = 3.
        let model = FnModel { n_features: 3, f: |x: &[f64]| x[0] * x[1] + x[2] };
        let bg = Background::new(vec![vec![0.0; 3]]).unwrap();
        let r = shapley_exact(&model, &[1.0, 2.0, 3.0], &bg).unwrap();
        assert!((r.phi[0] - 1.0).abs() < 1e-12);
        assert!((r.phi[1] - 1.0).abs() < 1e-12);
        assert!((r.phi[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn dummy_and_symmetric_features() {
        let model = FnModel { n_features: 4, f: |x: &[f64]| (x[0] + x[1]).max(0.0) * x[3] };
        let bg = Background::new(vec![vec![0.1, 0.1, 0.7, 0.2], vec![-0.3, -0.3, 0.4, 0.5]]).unwrap();
        let r = shapley_exact(&model, &[0.6, 0.6, -0.9, 1.2], &bg).unwrap();
        assert_eq!(r.phi[2], 0.0);
        assert!((r.phi[0] - r.phi[1]).abs() < 1e-12);
    }

    #[test]
    fn too_many_features() {
        let model = FnModel { n_features: 13, f: |x: &[f64]| x[0] };
        let bg = Background::new(vec![vec![0.0; 13]]).unwrap();
        assert!(matches!(shapley_exact(&model, &[0.0; 13], &bg), Err(ExplainError::TooManyFeatures { k: 13, .. })));
    }
}
