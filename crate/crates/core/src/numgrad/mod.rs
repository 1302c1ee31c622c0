//! Dense 64-bit numerics: tensors, the LSTM cell, softmax and
//! cross-entropy, AdaDelta and finite-difference gradient checking.

pub mod adadelta;
pub mod gradcheck;
pub mod lstm;
pub mod softmax;
pub mod tensor;

pub use adadelta::{adadelta_update, AdaDeltaState};
pub use gradcheck::{gradient_check, gradient_check_with_step, GradCheckReport};
pub use lstm::{LstmCache, LstmParams};
pub use softmax::{cross_entropy, log_sum_exp, softmax, softmax_in_place};
pub use tensor::{Tensor1, Tensor2};
