#![allow(dead_code)]

use rand::Rng;
use xapp_core::model::{loss_and_gradients, DenseLayer, MlpModel};

/// 2 → 2 → 1 ReLU net. At `MICRO_X` with radius `MICRO_EPS` the first hidden
/// neuron stays active and the second one straddles zero.
pub fn micro_net() -> MlpModel {
    let l1 = DenseLayer::from_rows(vec![vec![1.0, 1.0], vec![1.0, -1.0]], vec![0.0, 0.0]).unwrap();
    let l2 = DenseLayer::from_rows(vec![vec![1.0, -2.0]], vec![0.1]).unwrap();
    MlpModel::new(vec![l1, l2]).unwrap()
}

pub const MICRO_X: [f64; 2] = [0.3, 0.25];
pub const MICRO_EPS: f64 = 0.1;

/// Min and max of the single output over an `n × n` grid of the L∞ ball.
pub fn grid_extrema(model: &MlpModel, x: &[f64; 2], eps: f64, n: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let a = x[0] - eps + 2.0 * eps * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let b = x[1] - eps + 2.0 * eps * j as f64 / (n - 1) as f64;
            let y = model.logits(&[a, b])[0];
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    (lo, hi)
}

/// Non-negative hidden weights and unit biases keep every ReLU active for
/// inputs in `[-0.05, 1]`, so the network is affine on any ball of radius
/// ≤ 0.05 around a point of the unit cube.
pub fn affine_on_ball_net<R: Rng>(dims: &[usize], rng: &mut R) -> MlpModel {
    let last = dims.len() - 2;
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let rows = (0..w[1])
                .map(|_| (0..w[0]).map(|_| if k == last { rng.random_range(-1.0..1.0) } else { rng.random_range(0.0..1.0) }).collect())
                .collect();
            let bias = (0..w[1]).map(|_| if k == last { rng.random_range(-1.0..1.0) } else { 1.0 }).collect();
            DenseLayer::from_rows(rows, bias).unwrap()
        })
        .collect();
    MlpModel::new(layers).unwrap()
}

/// Composes the layers as plain matrices: `(W_eff, b_eff)`.
pub fn effective_affine(model: &MlpModel) -> (Vec<Vec<f64>>, Vec<f64>) {
    let first = &model.layers[0];
    let mut w: Vec<Vec<f64>> = (0..first.outputs).map(|o| first.row(o).to_vec()).collect();
    let mut b = first.bias.clone();
    for layer in &model.layers[1..] {
        let nw = (0..layer.outputs)
            .map(|o| (0..first.inputs).map(|i| (0..layer.inputs).map(|h| layer.weight(o, h) * w[h][i]).sum()).collect())
            .collect();
        let nb = (0..layer.outputs).map(|o| layer.bias[o] + (0..layer.inputs).map(|h| layer.weight(o, h) * b[h]).sum::<f64>()).collect();
        w = nw;
        b = nb;
    }
    (w, b)
}

/// Independent Wilson score interval.
pub fn wilson(successes: usize, n: usize, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (center - half, center + half)
}

/// Largest relative error between backprop and central differences over
/// every parameter. Relative error is `|a − n| / max(|a| + |n|, 1e-8)`.
pub fn gradient_check(model: &MlpModel, inputs: &[Vec<f64>], targets: &[usize], h: f64) -> f64 {
    let xs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let (_, grads) = loss_and_gradients(model, &xs, targets);
    let loss = |m: &MlpModel| loss_and_gradients(m, &xs, targets).0;
    let rel = |a: f64, n: f64| (a - n).abs() / (a.abs() + n.abs()).max(1e-8);
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    for k in 0..model.layers.len() {
        for i in 0..model.layers[k].weights.len() {
            let w0 = model.layers[k].weights[i];
            probe.layers[k].weights[i] = w0 + h;
            let up = loss(&probe);
            probe.layers[k].weights[i] = w0 - h;
            let down = loss(&probe);
            probe.layers[k].weights[i] = w0;
            worst = worst.max(rel(grads.weights[k][i], (up - down) / (2.0 * h)));
        }
        for o in 0..model.layers[k].bias.len() {
            let b0 = model.layers[k].bias[o];
            probe.layers[k].bias[o] = b0 + h;
            let up = loss(&probe);
            probe.layers[k].bias[o] = b0 - h;
            let down = loss(&probe);
            probe.layers[k].bias[o] = b0;
            worst = worst.max(rel(grads.bias[k][o], (up - down) / (2.0 * h)));
        }
    }
    worst
}
