mod common;

use common::*;

fn check(name: &str, f: fn(u64) -> f64) {
    for seed in 0..5 {
        let err = f(seed);
        assert!(err < FD_TOL, "{name} seed {seed}: relative error {err:e}");
    }
}

#[test]
fn conv1d_gated_matches_finite_differences() {
    check("conv1d_gated", conv_grad_instance);
}

#[test]
fn ggnn_propagate_matches_finite_differences() {
    check("ggnn_propagate", ggnn_propagate_grad_instance);
}

#[test]
fn ggnn_output_matches_finite_differences() {
    check("ggnn_output", ggnn_output_grad_instance);
}

#[test]
fn lstm_step_matches_finite_differences() {
    check("lstm_step", lstm_step_grad_instance);
}

#[test]
fn dropout_matches_finite_differences() {
    check("dropout", dropout_grad_instance);
}

#[test]
fn full_model_loss_matches_finite_differences() {
    check("encoder+decoder+loss", composite_grad_instance);
}

#[test]
fn checker_flags_a_wrong_derivative() {
    use parkcast_core::autodiff::{ParamStore, Tensor};
    let mut store = ParamStore::<f64>::new();
    let x = store.push("x", Tensor::row(vec![0.5, -1.5, 2.0]));
    // x ⊙ stop_grad(x): the recorded gradient is x, the true one 2x
    let err = grad_check(&mut store, None, |s| {
        let xv = s.param(x)?;
        let copy = s.value(xv).data().to_vec();
        let y = s.tape.mul_const(xv, copy)?;
        s.tape.sum(y)
    });
    assert!(err > 0.3, "{err}");
}
