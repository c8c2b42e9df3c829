//! Forecasting of full-depth ocean sound speed profiles with one small LSTM
//! per standard depth level, plus the mean, polynomial and feed-forward
//! baselines it is compared against and the experiment harness.

pub mod baselines;
pub mod checkpoint;
pub mod csvio;
pub mod error;
pub mod eval;
pub mod hlstm;
pub mod kv;
pub mod month;
pub mod nn;
pub mod profile;
pub mod seed;

pub use error::{Error, Result};
pub use month::Month;
pub use profile::{
    apply_norm, assemble_series, build_depth_schedule, denorm, fit_norm, interpolate_full_depth,
    layer_profile, split_train_validation, training_window, DepthSchedule, LayeredSeries,
    NormParams, Profile, RowNorm, ScheduleSpec, SpeedBand, WindowSpec,
};
