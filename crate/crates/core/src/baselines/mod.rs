//! Comparison predictors. Each produces a layered J-vector in m/s for the
//! month after a training window, the same shape as the LSTM bank output.

mod mean;
mod mlp;
mod poly;

pub use mean::{mean_predict, MeanMode};
pub use mlp::{mlp_train_layer, mlp_train_predict, MlpConfig, MlpParams};
pub use poly::{poly_fit, poly_predict, PolyFit};
