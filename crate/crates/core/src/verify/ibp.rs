use super::{BoundBand, LayerBounds, PerturbationSpec};
use crate::model::{DenseLayer, MlpModel};

/// Interval image of `[lower, upper]` under `W·a + b`, using `W⁺·l + W⁻·u`
/// for the lower end and `W⁺·u + W⁻·l` for the upper end.
pub(crate) fn affine_interval(layer: &DenseLayer, lower: &[f64], upper: &[f64]) -> LayerBounds {
    let mut lo = Vec::with_capacity(layer.outputs);
    let mut hi = Vec::with_capacity(layer.outputs);
    for o in 0..layer.outputs {
        let (mut l, mut u) = (layer.bias[o], layer.bias[o]);
        for (i, &w) in layer.row(o).iter().enumerate() {
            if w >= 0.0 {
                l += w * lower[i];
                u += w * upper[i];
            } else {
                l += w * upper[i];
                u += w * lower[i];
            }
        }
        lo.push(l);
        hi.push(u);
    }
    BoundBand { lower: lo, upper: hi }
}

/// Output band plus the pre-activation interval of every layer (the last
/// entry is the output band itself).
pub fn ibp_bounds(model: &MlpModel, x: &[f64], spec: PerturbationSpec) -> (BoundBand, Vec<LayerBounds>) {
    let eps = spec.epsilon;
    let mut lower: Vec<f64> = x.iter().map(|v| v - eps).collect();
    let mut upper: Vec<f64> = x.iter().map(|v| v + eps).collect();
    let mut layers = Vec::with_capacity(model.layers.len());
    let last = model.layers.len() - 1;
    for (k, layer) in model.layers.iter().enumerate() {
        let pre = affine_interval(layer, &lower, &upper);
        if k < last {
            lower = pre.lower.iter().map(|v| v.max(0.0)).collect();
            upper = pre.upper.iter().map(|v| v.max(0.0)).collect();
        }
        layers.push(pre);
    }
    let band = if eps == 0.0 {
        BoundBand::point(model.logits(x))
    } else {
        layers.last().expect("non-empty").clone()
    };
    (band, layers)
}
