//! Single LSTM cell without peepholes.
//!
//! ```text
//! z = [x; h_prev]
//! i = σ(W_i z + b_i)   f = σ(W_f z + b_f)   o = σ(W_o z + b_o)
//! g = tanh(W_g z + b_g)
//! c = f ⊙ c_prev + i ⊙ g
//! h = o ⊙ tanh(c)
//! ```
//!
//! The four gate blocks are stacked in the order i, f, o, g along the rows
//! of one `4D × (d_in + D)` weight matrix.

use rand::Rng;

use super::tensor::{sigmoid, Tensor1, Tensor2};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub weights: Tensor2,
    pub bias: Tensor1,
}

/// Activations of one step, kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct LstmCache {
    /// `[x; h_prev]`
    pub z: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Gate activations `[i, f, o, g]`, each of length `D`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            weights: Tensor2::zeros(4 * hidden_dim, input_dim + hidden_dim),
            bias: Tensor1::zeros(4 * hidden_dim),
        }
    }

    /// Uniform weights in `[-scale, scale]`, zero biases except the forget
    /// gate, which starts at 1.
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, scale: f64, rng: &mut R) -> Self {
        let mut bias = Tensor1::zeros(4 * hidden_dim);
        bias[hidden_dim..2 * hidden_dim].fill(1.0);
        Self {
            input_dim,
            hidden_dim,
            weights: Tensor2::uniform(4 * hidden_dim, input_dim + hidden_dim, scale, rng),
            bias,
        }
    }

    /// One forward step with dimension checks.
    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Tensor1, Tensor1)> {
        let d = self.hidden_dim;
        if x.len() != self.input_dim || h_prev.len() != d || c_prev.len() != d {
            return Err(Error::Dimension(format!(
                "lstm expects x[{}], h[{d}], c[{d}]; got x[{}], h[{}], c[{}]",
                self.input_dim,
                x.len(),
                h_prev.len(),
                c_prev.len()
            )));
        }
        let cache = self.forward(x, h_prev, c_prev);
        Ok((Tensor1(cache.h), Tensor1(cache.c)))
    }

    /// Forward step retaining every activation. Dimensions are the caller's
    /// responsibility.
    pub fn forward(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmCache {
        let d = self.hidden_dim;
        let mut z = Vec::with_capacity(x.len() + d);
        z.extend_from_slice(x);
        z.extend_from_slice(h_prev);
        let mut gates = vec![0.0; 4 * d];
        self.weights.matvec_into(&z, &mut gates);
        for (k, (a, b)) in gates.iter_mut().zip(self.bias.iter()).enumerate() {
            *a += b;
            *a = if k < 3 * d { sigmoid(*a) } else { a.tanh() };
        }
        let (ifo, g) = gates.split_at(3 * d);
        let (i, fo) = ifo.split_at(d);
        let (f, o) = fo.split_at(d);
        let mut c = vec![0.0; d];
        let mut tanh_c = vec![0.0; d];
        let mut h = vec![0.0; d];
        for k in 0..d {
            c[k] = f[k] * c_prev[k] + i[k] * g[k];
            tanh_c[k] = c[k].tanh();
            h[k] = o[k] * tanh_c[k];
        }
        LstmCache { z, c_prev: c_prev.to_vec(), gates, c, tanh_c, h }
    }

    /// Backpropagates `dh`, `dc` (gradients w.r.t. this step's outputs)
    /// through the cell. Parameter gradients accumulate into `grads`;
    /// `dx`, `dh_prev` and `dc_prev` are overwritten.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        cache: &LstmCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut LstmParams,
        dx: &mut [f64],
        dh_prev: &mut [f64],
        dc_prev: &mut [f64],
    ) {
        let d = self.hidden_dim;
        let (ifo, g) = cache.gates.split_at(3 * d);
        let (i, fo) = ifo.split_at(d);
        let (f, o) = fo.split_at(d);
        let mut da = vec![0.0; 4 * d];
        for k in 0..d {
            let dct = dc[k] + dh[k] * o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
            let (di, df, dox, dg) = (dct * g[k], dct * cache.c_prev[k], dh[k] * cache.tanh_c[k], dct * i[k]);
            dc_prev[k] = dct * f[k];
            da[k] = di * i[k] * (1.0 - i[k]);
            da[d + k] = df * f[k] * (1.0 - f[k]);
            da[2 * d + k] = dox * o[k] * (1.0 - o[k]);
            da[3 * d + k] = dg * (1.0 - g[k] * g[k]);
        }
        grads.weights.add_outer(&da, &cache.z);
        for (b, a) in grads.bias.iter_mut().zip(&da) {
            *b += a;
        }
        let mut dz = vec![0.0; self.input_dim + d];
        self.weights.matvec_t_acc(&da, &mut dz);
        dx.copy_from_slice(&dz[..self.input_dim]);
        dh_prev.copy_from_slice(&dz[self.input_dim..]);
    }

    pub fn param_count(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }
}
