mod common;

use common::{max_logit_grad_error, random_instance, rel_err};
use pllbench::algorithms::{self, AlgorithmId, Batch};
use pllbench::nn::{backward, forward, init_params_with_width, softmax_rows, Matrix, MlpParams};
use pllbench::rng;
use rand::Rng;

#[test]
fn logit_gradients_match_finite_differences() {
    for id in AlgorithmId::ALL {
        for seed in 0..25 {
            let inst = random_instance(id, seed);
            let err = max_logit_grad_error(&inst);
            assert!(err <= 1e-4, "{id} seed {seed}: relative error {err:e}");
        }
    }
}

fn mlp_loss(inst: &common::Instance, params: &MlpParams, x: &Matrix) -> (f64, MlpParams) {
    let (logits, cache) = forward(params, x).unwrap();
    let probs = softmax_rows(&logits);
    let refs = inst.refs();
    let idx = inst.indices();
    let batch = Batch {
        logits: &logits,
        probs: &probs,
        candidates: &refs,
        indices: &idx,
    };
    let (loss, d) = algorithms::loss_and_grad(&inst.spec, &batch, &inst.state).unwrap();
    (loss, backward(params, &cache, &d).unwrap())
}

#[test]
fn parameter_gradients_through_the_mlp() {
    let h = 1e-6;
    for id in AlgorithmId::ALL {
        let inst = random_instance(id, 100);
        let (b, q) = inst.logits.shape();
        let d = 4;
        let mut r = rng::stream(7, id as u64);
        let x = Matrix::from_vec(b, d, (0..b * d).map(|_| r.random_range(-2.0..2.0)).collect()).unwrap();
        let mut params = init_params_with_width(d, 9, q, 11);
        for v in params.as_mut_slice() {
            *v += r.random_range(-0.1..0.1);
        }
        let (_, grad) = mlp_loss(&inst, &params, &x);
        for _ in 0..20 {
            let k = r.random_range(0..params.len());
            let mut plus = params.clone();
            plus.as_mut_slice()[k] += h;
            let mut minus = params.clone();
            minus.as_mut_slice()[k] -= h;
            let numeric = (mlp_loss(&inst, &plus, &x).0 - mlp_loss(&inst, &minus, &x).0) / (2.0 * h);
            let err = rel_err(grad.as_slice()[k], numeric);
            assert!(err <= 1e-4, "{id} coordinate {k}: relative error {err:e}");
        }
    }
}
