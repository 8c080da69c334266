use super::ibp::ibp_bounds;
use super::{AffineForm, BoundBand, LayerBounds, LinearBounds, PerturbationSpec};
use crate::model::MlpModel;

/// Linear relaxation of one ReLU over its pre-activation interval `[l, u]`:
/// `lower_slope·z ≤ relu(z) ≤ upper_slope·z + upper_intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Relaxation {
    lower_slope: f64,
    upper_slope: f64,
    upper_intercept: f64,
}

impl Relaxation {
    fn new(l: f64, u: f64) -> Self {
        if l >= 0.0 {
            Relaxation { lower_slope: 1.0, upper_slope: 1.0, upper_intercept: 0.0 }
        } else if u <= 0.0 {
            Relaxation { lower_slope: 0.0, upper_slope: 0.0, upper_intercept: 0.0 }
        } else {
            let upper_slope = u / (u - l);
            Relaxation {
                lower_slope: if u >= -l { 1.0 } else { 0.0 },
                upper_slope,
                upper_intercept: -upper_slope * l,
            }
        }
    }
}

/// Row-major `rows × cols` coefficient matrix with one offset per row.
struct Backward {
    rows: usize,
    cols: usize,
    lambda: Vec<f64>,
    offset: Vec<f64>,
}

impl Backward {
    /// Pulls the bound back through a ReLU layer. `upper` selects which side
    /// of the relaxation a positive coefficient must take.
    fn through_relu(&mut self, relax: &[Relaxation], upper: bool) {
        for r in 0..self.rows {
            let row = &mut self.lambda[r * self.cols..(r + 1) * self.cols];
            for (c, rl) in row.iter_mut().zip(relax) {
                let take_upper_line = (*c >= 0.0) == upper;
                if take_upper_line {
                    self.offset[r] += *c * rl.upper_intercept;
                    *c *= rl.upper_slope;
                } else {
                    *c *= rl.lower_slope;
                }
            }
        }
    }

    /// Pulls the bound back through `z = W·a + b`.
    fn through_affine(&mut self, layer: &crate::model::DenseLayer) {
        debug_assert_eq!(layer.outputs, self.cols);
        let mut next = vec![0.0; self.rows * layer.inputs];
        for r in 0..self.rows {
            let row = &self.lambda[r * self.cols..(r + 1) * self.cols];
            let out = &mut next[r * layer.inputs..(r + 1) * layer.inputs];
            for (o, &c) in row.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                self.offset[r] += c * layer.bias[o];
                for (dst, &w) in out.iter_mut().zip(layer.row(o)) {
                    *dst += c * w;
                }
            }
        }
        self.lambda = next;
        self.cols = layer.inputs;
    }

    fn into_forms(self) -> Vec<AffineForm> {
        let cols = self.cols;
        self.lambda
            .chunks(cols)
            .zip(self.offset)
            .map(|(c, offset)| AffineForm { coefficients: c.to_vec(), offset })
            .collect()
    }
}

/// Linear lower/upper bounds of layer `k`'s pre-activation in terms of the
/// input, given relaxations for every earlier hidden layer.
fn backward_bounds(model: &MlpModel, k: usize, relaxations: &[Vec<Relaxation>]) -> (Vec<AffineForm>, Vec<AffineForm>) {
    let layer = &model.layers[k];
    let start = || Backward {
        rows: layer.outputs,
        cols: layer.inputs,
        lambda: layer.weights.clone(),
        offset: layer.bias.clone(),
    };
    let mut lower = start();
    let mut upper = start();
    for j in (0..k).rev() {
        lower.through_relu(&relaxations[j], false);
        upper.through_relu(&relaxations[j], true);
        lower.through_affine(&model.layers[j]);
        upper.through_affine(&model.layers[j]);
    }
    (lower.into_forms(), upper.into_forms())
}

fn concretize(lower: &[AffineForm], upper: &[AffineForm], x: &[f64], eps: f64) -> BoundBand {
    BoundBand {
        lower: lower.iter().map(|f| f.eval(x) - eps * f.l1_norm()).collect(),
        upper: upper.iter().map(|f| f.eval(x) + eps * f.l1_norm()).collect(),
    }
}

/// Backward CROWN band and the linear bounds it was concretized from.
pub fn crown_bounds(model: &MlpModel, x: &[f64], spec: PerturbationSpec) -> (BoundBand, LinearBounds) {
    let eps = spec.epsilon;
    let (ibp_band, ibp_layers) = ibp_bounds(model, x, spec);
    let depth = model.layers.len();

    let mut relaxations: Vec<Vec<Relaxation>> = Vec::with_capacity(depth.saturating_sub(1));
    for k in 0..depth - 1 {
        let (lf, uf) = backward_bounds(model, k, &relaxations);
        let mut bounds: LayerBounds = concretize(&lf, &uf, x, eps);
        bounds.intersect(&ibp_layers[k]);
        relaxations.push(bounds.lower.iter().zip(&bounds.upper).map(|(&l, &u)| Relaxation::new(l, u)).collect());
    }

    let (lower_forms, upper_forms) = backward_bounds(model, depth - 1, &relaxations);
    let mut band = concretize(&lower_forms, &upper_forms, x, eps);
    if eps == 0.0 {
        band = BoundBand::point(model.logits(x));
    } else {
        band.intersect(&ibp_band);
    }
    (band, LinearBounds { lower: lower_forms, upper: upper_forms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DenseLayer;

    #[test]
    fn relaxation_cases() {
        assert_eq!(Relaxation::new(0.5, 2.0), Relaxation { lower_slope: 1.0, upper_slope: 1.0, upper_intercept: 0.0 });
        assert_eq!(Relaxation::new(-2.0, -0.5), Relaxation { lower_slope: 0.0, upper_slope: 0.0, upper_intercept: 0.0 });
        let r = Relaxation::new(-1.0, 3.0);
        assert_eq!(r.upper_slope, 0.75);
        assert_eq!(r.upper_intercept, 0.75);
        assert_eq!(r.lower_slope, 1.0);
        assert_eq!(Relaxation::new(-3.0, 1.0).lower_slope, 0.0);
    }

    #[test]
    fn single_unstable_relu_one_input() {
        // y = relu(x) around x = 0 with ε = 0.5: l = -0.5, u = 0.5.
        let l1 = DenseLayer::from_rows(vec![vec![1.0]], vec![0.0]).unwrap();
        let l2 = DenseLayer::from_rows(vec![vec![1.0]], vec![0.0]).unwrap();
        let model = MlpModel::new(vec![l1, l2]).unwrap();
        let (band, lin) = crown_bounds(&model, &[0.0], PerturbationSpec { epsilon: 0.5 });
        // Upper chord 0.5·z + 0.25 peaks at 0.5; lower line z (u ≥ |l|) bottoms at -0.5,
        // which the IBP intersection lifts to 0.
        assert!((band.upper[0] - 0.5).abs() < 1e-12);
        assert_eq!(band.lower[0], 0.0);
        assert_eq!(lin.upper[0].coefficients, vec![0.5]);
        assert_eq!(lin.upper[0].offset, 0.25);
        assert_eq!(lin.lower[0].coefficients, vec![1.0]);
    }
}
