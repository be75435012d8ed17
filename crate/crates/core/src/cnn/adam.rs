//! Adam parameter updates with bias correction.

use super::tensor::Tensor;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
}

impl AdamState {
    pub fn for_parameters(params: &[&Tensor]) -> AdamState {
        AdamState {
            first_moment: params.iter().map(|p| Tensor::zeros(&p.shape)).collect(),
            second_moment: params.iter().map(|p| Tensor::zeros(&p.shape)).collect(),
        }
    }
}

/// Apply one Adam update to every parameter tensor. `t` is the 1-based
/// step count used for bias correction.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    state: &mut AdamState,
    t: u64,
    learning_rate: f64,
) {
    assert!(t >= 1, "adam step count is 1-based");
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.first_moment.len());

    let bias1 = 1.0 - BETA1.powi(t as i32);
    let bias2 = 1.0 - BETA2.powi(t as i32);

    for idx in 0..params.len() {
        let param = &mut params[idx];
        let grad = grads[idx];
        let m = &mut state.first_moment[idx];
        let v = &mut state.second_moment[idx];
        for i in 0..param.data.len() {
            let g = grad.data[i];
            m.data[i] = BETA1 * m.data[i] + (1.0 - BETA1) * g;
            v.data[i] = BETA2 * v.data[i] + (1.0 - BETA2) * g * g;
            let m_hat = m.data[i] / bias1;
            let v_hat = v.data[i] / bias2;
            param.data[i] -= learning_rate * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
}
