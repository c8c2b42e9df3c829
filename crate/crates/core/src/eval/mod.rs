//! Error metrics, the synthetic ocean, experiment protocols and their
//! CSV/SVG reports.

mod experiments;
pub mod report;
pub mod svg;
mod synth;

pub use experiments::{
    evaluate_method, experiment_compare, experiment_cycle_tracking, experiment_monthly,
    experiment_window_ablation, predict_method, AblationRow, CompareTable, CycleTrace,
    ExperimentConfig, Method, MonthlyTable,
};
pub use synth::{synth_generate, synth_series, SynthSpec};

use crate::error::{Error, Result};
use crate::month::Month;
use crate::profile::Profile;

/// Root mean squared difference of two equal-length vectors.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::dim("rmse operands", truth.len(), pred.len()));
    }
    if pred.is_empty() {
        return Err(Error::Empty("rmse operands"));
    }
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// RMSE of two profiles resampled on a common grid `first, first+step, ...`
/// spanning their shared depth range. Both must cover the same span.
pub fn rmse_full_depth(pred: &Profile, truth: &Profile, step: f64) -> Result<f64> {
    if pred.first_depth() != truth.first_depth() || pred.last_depth() != truth.last_depth() {
        return Err(Error::validation(format!(
            "profile spans differ: [{}, {}] vs [{}, {}] m",
            pred.first_depth(),
            pred.last_depth(),
            truth.first_depth(),
            truth.last_depth()
        )));
    }
    if !(step > 0.0) {
        return Err(Error::validation(format!("step must be positive, got {step}")));
    }
    let first = truth.first_depth();
    let count = ((truth.last_depth() - first) / step + 1e-9).floor() as usize + 1;
    let mut p = Vec::with_capacity(count);
    let mut t = Vec::with_capacity(count);
    for k in 0..count {
        let z = first + k as f64 * step;
        // z never exceeds the shared span by construction
        p.push(pred.speed_at(z).expect("inside span"));
        t.push(truth.speed_at(z).expect("inside span"));
    }
    rmse(&p, &t)
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Error of one method's forecast for one month.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseReport {
    pub method: String,
    pub target: Month,
    /// Training months used, `YYYY-MM..YYYY-MM`.
    pub window: String,
    pub aggregate_rmse: f64,
    /// |predicted - truth| at each schedule level.
    pub per_depth_abs_err: Vec<(f64, f64)>,
    pub predicted: Vec<f64>,
    pub truth: Vec<f64>,
}
