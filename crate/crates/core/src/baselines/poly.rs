use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::profile::{training_window, DepthSchedule, LayeredSeries, WindowSpec};

/// Least-squares polynomial in scaled depth `z / depth_scale`.
///
/// Coefficients are in m/s and apply to the scaled depth, so `a_i` has
/// units of m/s per (depth_scale meters)^i.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub depth_scale: f64,
}

impl PolyFit {
    pub fn evaluate(&self, depth: f64) -> f64 {
        let z = depth / self.depth_scale;
        self.coefficients.iter().rev().fold(0.0, |acc, a| acc * z + a)
    }

    pub fn evaluate_schedule(&self, sched: &DepthSchedule) -> Vec<f64> {
        sched.levels().iter().map(|&d| self.evaluate(d)).collect()
    }
}

fn vandermonde(sched: &DepthSchedule, degree: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(sched.len(), degree + 1, |r, c| (sched.levels()[r] / scale).powi(c as i32))
}

/// Fit a degree-`degree` polynomial to a layered profile via SVD least squares.
pub fn poly_fit(profile_mean: &[f64], sched: &DepthSchedule, degree: usize) -> Result<PolyFit> {
    if degree == 0 {
        return Err(Error::validation("polynomial degree must be >= 1"));
    }
    if profile_mean.len() != sched.len() {
        return Err(Error::dim("profile", sched.len(), profile_mean.len()));
    }
    if degree + 1 > sched.len() {
        return Err(Error::validation(format!(
            "degree {degree} needs at least {} depth levels, have {}",
            degree + 1,
            sched.len()
        )));
    }
    let scale = sched.last_level();
    let a = vandermonde(sched, degree, scale);
    let b = DVector::from_column_slice(profile_mean);
    let svd = a.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max();
    if svd.rank(tol) < degree + 1 {
        return Err(Error::Solver(format!("rank-deficient design for degree {degree}")));
    }
    let x = svd.solve(&b, tol).map_err(|e| Error::Solver(e.to_string()))?;
    Ok(PolyFit {
        degree,
        coefficients: x.iter().copied().collect(),
        depth_scale: scale,
    })
}

/// Fit the time-mean of the training window and evaluate it on the schedule.
pub fn poly_predict(series: &LayeredSeries, w: &WindowSpec, degree: usize) -> Result<Vec<f64>> {
    let t = training_window(series, w)?;
    let mean: Vec<f64> = t.row_iter().map(|r| r.mean()).collect();
    Ok(poly_fit(&mean, series.schedule(), degree)?.evaluate_schedule(series.schedule()))
}
