//! AdaDelta: per-coordinate step sizes from running averages of squared
//! gradients and squared updates, no global learning rate.

use crate::error::{Error, Result};

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct AdaDeltaState {
    pub rho: f64,
    pub epsilon: f64,
    /// E[g²]
    pub sq_grad: Vec<f64>,
    /// E[Δ²]
    pub sq_update: Vec<f64>,
}

impl AdaDeltaState {
    pub fn new(len: usize, rho: f64, epsilon: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) || epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "adadelta needs 0 < rho < 1 and epsilon > 0, got {rho}, {epsilon}"
            )));
        }
        Ok(Self { rho, epsilon, sq_grad: vec![0.0; len], sq_update: vec![0.0; len] })
    }

    pub fn len(&self) -> usize {
        self.sq_grad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sq_grad.is_empty()
    }
}

/// Applies one AdaDelta step to `param` in place.
pub fn adadelta_update(param: &mut [f64], grad: &[f64], state: &mut AdaDeltaState) -> Result<()> {
    if param.len() != grad.len() || param.len() != state.len() {
        return Err(Error::Dimension(format!(
            "adadelta: param {}, grad {}, state {}",
            param.len(),
            grad.len(),
            state.len()
        )));
    }
    let (rho, eps) = (state.rho, state.epsilon);
    for (((p, &g), eg), ed) in param.iter_mut().zip(grad).zip(&mut state.sq_grad).zip(&mut state.sq_update) {
        *eg = rho * *eg + (1.0 - rho) * g * g;
        let delta = -((*ed + eps).sqrt() / (*eg + eps).sqrt()) * g;
        *ed = rho * *ed + (1.0 - rho) * delta * delta;
        *p += delta;
    }
    Ok(())
}
