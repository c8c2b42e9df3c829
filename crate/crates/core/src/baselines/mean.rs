use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::profile::{training_window, LayeredSeries, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanMode {
    /// Average the same calendar month of each training cycle.
    #[default]
    SameMonth,
    /// Average every month of the window.
    AllMonths,
}

impl FromStr for MeanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "same_month" => Ok(MeanMode::SameMonth),
            "all_months" => Ok(MeanMode::AllMonths),
            other => Err(Error::validation(format!("unknown mean mode {other:?}"))),
        }
    }
}

impl fmt::Display for MeanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeanMode::SameMonth => "same_month",
            MeanMode::AllMonths => "all_months",
        })
    }
}

/// Historical-mean forecast for `w.target`.
pub fn mean_predict(series: &LayeredSeries, w: &WindowSpec, mode: MeanMode) -> Result<Vec<f64>> {
    let t = training_window(series, w)?;
    let n = t.ncols();
    let cols: Vec<usize> = match mode {
        // n - C, n - 2C, ... all share the target's phase in the cycle
        MeanMode::SameMonth => (1..=w.n_cycles).map(|k| n - k * w.cycle_length).collect(),
        MeanMode::AllMonths => (0..n).collect(),
    };
    Ok(t.row_iter()
        .map(|row| cols.iter().map(|&i| row[i]).sum::<f64>() / cols.len() as f64)
        .collect())
}
