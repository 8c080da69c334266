mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xapp_core::model::MlpModel;

/// He init leaves biases at zero; a sample that silences a whole layer then
/// sits exactly on the next layer's ReLU hinge, where differences disagree.
fn jittered(dims: &[usize], rng: &mut ChaCha8Rng) -> MlpModel {
    let mut model = MlpModel::he_init(dims, rng);
    for layer in &mut model.layers {
        layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
    }
    model
}

#[test]
fn backprop_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = jittered(&[6, 8, 8, 2], &mut rng);
    let inputs: Vec<Vec<f64>> = (0..16).map(|_| (0..6).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let targets: Vec<usize> = (0..16).map(|i| i % 2).collect();
    let worst = common::gradient_check(&model, &inputs, &targets, 1e-5);
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn backprop_matches_on_the_deployed_architecture() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let model = jittered(&xapp_core::model::ARCHITECTURE, &mut rng);
    let inputs: Vec<Vec<f64>> = (0..4).map(|_| (0..25).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let worst = common::gradient_check(&model, &inputs, &[0, 1, 1, 0], 1e-5);
    assert!(worst < 1e-4, "max relative error {worst}");
}
