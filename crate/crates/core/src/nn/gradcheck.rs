use super::lstm::{Gradients, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockError {
    pub name: String,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockError>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.max_rel_error < self.tolerance)
    }

    pub fn block(&self, name: &str) -> Option<&BlockError> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

/// |a - n| / max(|a|, |n|, 1e-8)
fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compare the analytic BPTT gradient against central differences with step `eps`.
pub fn grad_check(
    net: &Network,
    xs: &[f64],
    targets: &[f64],
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    let (_, tapes) = net.forward(xs)?;
    let (_, analytic) = net.backward(&tapes, targets)?;
    compare_gradients(net, xs, targets, &analytic, eps, tol)
}

/// Central-difference check of a supplied gradient, block by block.
pub fn compare_gradients(
    net: &Network,
    xs: &[f64],
    targets: &[f64],
    analytic: &Gradients,
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    if analytic.param_count() != net.param_count() {
        return Err(Error::dim("gradient", net.param_count(), analytic.param_count()));
    }
    let base = net.flatten();
    let mut probe = net.clone();
    let mut flat = base.clone();
    let mut numeric_at = |k: usize| -> Result<f64> {
        flat[k] = base[k] + eps;
        probe.load_flat(&flat)?;
        let plus = probe.loss(xs, targets)?;
        flat[k] = base[k] - eps;
        probe.load_flat(&flat)?;
        let minus = probe.loss(xs, targets)?;
        flat[k] = base[k];
        Ok((plus - minus) / (2.0 * eps))
    };

    let mut blocks = Vec::new();
    let mut offset = 0;
    for (name, grad) in analytic.blocks() {
        let mut worst = 0.0f64;
        for (k, &a) in grad.iter().enumerate() {
            let n = numeric_at(offset + k)?;
            worst = worst.max(relative_error(a, n));
        }
        offset += grad.len();
        blocks.push(BlockError {
            name,
            max_rel_error: worst,
        });
    }
    Ok(GradCheckReport {
        blocks,
        tolerance: tol,
    })
}
