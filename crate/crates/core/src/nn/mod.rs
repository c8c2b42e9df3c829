//! LSTM numerics written out by hand: the cell, backpropagation through
//! time, a linear read-out head, initialization, optimizers and a
//! finite-difference gradient checker.

mod gradcheck;
mod lstm;
mod optim;

pub use gradcheck::{compare_gradients, grad_check, BlockError, GradCheckReport};
pub use lstm::{
    backward_sequence, forward_sequence, init_params, lstm_step, mse, DenseParams, Gradients,
    LstmParams, LstmState, Network, NetworkState, StepRecord, Tape,
};
pub use optim::{adam_step, clip_global_norm, sgd_step, AdamConfig, Moments, Optimizer, OptimizerKind};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
