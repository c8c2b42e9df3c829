use std::fmt;
use std::str::FromStr;

use log::info;

use super::{pearson, rmse_full_depth, RmseReport};
use crate::baselines::{mean_predict, mlp_train_predict, poly_predict, MeanMode, MlpConfig};
use crate::error::{Error, Result};
use crate::hlstm::{predict_multi_step, predict_one_step, train_bank_with, Hyperparams};
use crate::month::Month;
use crate::profile::{interpolate_full_depth, LayeredSeries, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Hlstm,
    Mean,
    Polynomial,
    Mlp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mean, Method::Polynomial, Method::Mlp, Method::Hlstm];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hlstm => "hlstm",
            Method::Mean => "mean",
            Method::Polynomial => "polynomial",
            Method::Mlp => "bp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::validation(format!("unknown method {s:?}")))
    }
}

/// Everything an experiment needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub hyperparams: Hyperparams,
    pub cycle_length: usize,
    /// Training cycles for the LSTM bank, the mean and the MLP.
    pub n_cycles: usize,
    /// Training cycles for the polynomial fit.
    pub poly_cycles: usize,
    pub poly_degree: usize,
    pub mean_mode: MeanMode,
    pub mlp: MlpConfig,
    /// Full-depth grid spacing in meters.
    pub step: f64,
    pub seed: u64,
    pub workers: usize,
    /// Also report a single-origin 12-step rollout in the monthly experiment.
    pub fixed_origin: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            hyperparams: Hyperparams::default(),
            cycle_length: 12,
            n_cycles: 4,
            poly_cycles: 2,
            poly_degree: 8,
            mean_mode: MeanMode::SameMonth,
            mlp: MlpConfig::default(),
            step: 1.0,
            seed: 0,
            workers: 0,
            fixed_origin: true,
        }
    }
}

impl ExperimentConfig {
    fn window(&self, target: Month, n_cycles: usize) -> Result<WindowSpec> {
        WindowSpec::new(self.cycle_length, n_cycles, target)
    }

    pub fn method_window(&self, method: Method, target: Month) -> Result<WindowSpec> {
        let n = if method == Method::Polynomial { self.poly_cycles } else { self.n_cycles };
        self.window(target, n)
    }
}

fn window_label(w: &WindowSpec) -> String {
    format!("{}..{}", w.first_month(), w.last_train_month())
}

fn hlstm_forecast(series: &LayeredSeries, w: &WindowSpec, cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let bank = train_bank_with(series, w, &cfg.hyperparams, cfg.seed, cfg.workers)?;
    predict_one_step(&bank, &bank.normalized_training()?)
}

/// Layered forecast of `method` for `target`.
pub fn predict_method(
    series: &LayeredSeries,
    method: Method,
    target: Month,
    cfg: &ExperimentConfig,
) -> Result<Vec<f64>> {
    let w = cfg.method_window(method, target)?;
    match method {
        Method::Hlstm => hlstm_forecast(series, &w, cfg),
        Method::Mean => mean_predict(series, &w, cfg.mean_mode),
        Method::Polynomial => poly_predict(series, &w, cfg.poly_degree),
        Method::Mlp => mlp_train_predict(series, &w, &cfg.mlp, cfg.seed),
    }
}

fn truth_column(series: &LayeredSeries, target: Month) -> Result<Vec<f64>> {
    series.column(target).ok_or(Error::Window {
        first: target,
        last: target,
        have_first: series.start_month(),
        have_last: series.end_month(),
    })
}

fn score(
    series: &LayeredSeries,
    method: &str,
    target: Month,
    window: String,
    predicted: Vec<f64>,
    cfg: &ExperimentConfig,
) -> Result<RmseReport> {
    let truth = truth_column(series, target)?;
    let sched = series.schedule();
    let p = interpolate_full_depth(&predicted, sched, cfg.step, target)?;
    let t = interpolate_full_depth(&truth, sched, cfg.step, target)?;
    let aggregate_rmse = rmse_full_depth(&p, &t, cfg.step)?;
    let per_depth_abs_err = sched
        .levels()
        .iter()
        .zip(predicted.iter().zip(&truth))
        .map(|(&d, (p, t))| (d, (p - t).abs()))
        .collect();
    Ok(RmseReport {
        method: method.to_string(),
        target,
        window,
        aggregate_rmse,
        per_depth_abs_err,
        predicted,
        truth,
    })
}

/// Forecast `target` with `method` and score it against the observed month
/// by full-depth RMSE.
pub fn evaluate_method(
    series: &LayeredSeries,
    method: Method,
    target: Month,
    cfg: &ExperimentConfig,
) -> Result<RmseReport> {
    truth_column(series, target)?;
    let w = cfg.method_window(method, target)?;
    let predicted = predict_method(series, method, target, cfg)?;
    score(series, method.name(), target, window_label(&w), predicted, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub target: Month,
    pub n_cycles: usize,
    pub rmse: f64,
}

/// LSTM-bank error as a function of the number of training cycles.
pub fn experiment_window_ablation(
    series: &LayeredSeries,
    targets: &[Month],
    n_values: &[usize],
    cfg: &ExperimentConfig,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(targets.len() * n_values.len());
    for &target in targets {
        for &n in n_values {
            let local = ExperimentConfig { n_cycles: n, ..cfg.clone() };
            let report = evaluate_method(series, Method::Hlstm, target, &local)?;
            info!("ablation {target} n={n}: {:.4} m/s", report.aggregate_rmse);
            rows.push(AblationRow { target, n_cycles: n, rmse: report.aggregate_rmse });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyTable {
    pub year: i32,
    /// Rolling origin: each month is forecast one step ahead from the
    /// `n_cycles` cycles immediately before it.
    pub rolling: Vec<RmseReport>,
    pub rolling_mean: f64,
    /// Single origin before January, rolled out 12 months.
    pub fixed_origin: Option<Vec<RmseReport>>,
}

impl MonthlyTable {
    pub fn fixed_origin_mean(&self) -> Option<f64> {
        self.fixed_origin
            .as_ref()
            .map(|rows| rows.iter().map(|r| r.aggregate_rmse).sum::<f64>() / rows.len() as f64)
    }
}

/// Per-month full-depth error of the LSTM bank over one calendar year.
pub fn experiment_monthly(series: &LayeredSeries, year: i32, cfg: &ExperimentConfig) -> Result<MonthlyTable> {
    let months: Vec<Month> = (1..=12).map(|m| Month::from_ym(year, m)).collect();
    let rolling = months
        .iter()
        .map(|&target| {
            let r = evaluate_method(series, Method::Hlstm, target, cfg)?;
            info!("monthly {target}: {:.4} m/s", r.aggregate_rmse);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let rolling_mean = rolling.iter().map(|r| r.aggregate_rmse).sum::<f64>() / 12.0;

    let fixed_origin = if cfg.fixed_origin {
        let w = cfg.window(months[0], cfg.n_cycles)?;
        let bank = train_bank_with(series, &w, &cfg.hyperparams, cfg.seed, cfg.workers)?;
        let rollout = predict_multi_step(&bank, &bank.normalized_training()?, 12)?;
        let rows = months
            .iter()
            .enumerate()
            .map(|(s, &target)| {
                let predicted = rollout.column(s).iter().copied().collect();
                score(series, "hlstm_fixed_origin", target, window_label(&w), predicted, cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        Some(rows)
    } else {
        None
    };
    Ok(MonthlyTable {
        year,
        rolling,
        rolling_mean,
        fixed_origin,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub target: Month,
    pub rows: Vec<RmseReport>,
    /// Configuration summary per row, e.g. the mean mode or polynomial degree.
    pub settings: Vec<String>,
}

impl CompareTable {
    pub fn rmse_of(&self, method: Method) -> Option<f64> {
        self.rows.iter().find(|r| r.method == method.name()).map(|r| r.aggregate_rmse)
    }
}

/// All four methods scored against the same observed month.
pub fn experiment_compare(series: &LayeredSeries, target: Month, cfg: &ExperimentConfig) -> Result<CompareTable> {
    let rows = Method::ALL
        .iter()
        .map(|&m| evaluate_method(series, m, target, cfg))
        .collect::<Result<Vec<_>>>()?;
    let settings = Method::ALL.iter().map(|&m| method_setting(m, cfg)).collect();
    Ok(CompareTable { target, rows, settings })
}

fn method_setting(method: Method, cfg: &ExperimentConfig) -> String {
    match method {
        Method::Hlstm => format!(
            "hidden={} epochs={} lr={} optimizer={}",
            cfg.hyperparams.hidden_size, cfg.hyperparams.epochs, cfg.hyperparams.lr, cfg.hyperparams.optimizer
        ),
        Method::Mean => format!("mode={}", cfg.mean_mode),
        Method::Polynomial => format!("degree={}", cfg.poly_degree),
        Method::Mlp => format!("window={} hidden={} epochs={}", cfg.mlp.window, cfg.mlp.hidden, cfg.mlp.epochs),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleTrace {
    pub layer_index: usize,
    pub depth: f64,
    /// Observed speed for every month of the series.
    pub truth: Vec<(Month, f64)>,
    /// Rolled-out forecast from `start`.
    pub predicted: Vec<(Month, f64)>,
    /// Pearson correlation of the forecast with the observed months it
    /// covers; `None` if either trace is flat.
    pub correlation: Option<f64>,
}

/// Train on the `n_cycles` cycles before `start`, roll out `k` months and
/// compare the traces at the selected levels.
pub fn experiment_cycle_tracking(
    series: &LayeredSeries,
    depth_indices: &[usize],
    k: usize,
    start: Month,
    cfg: &ExperimentConfig,
) -> Result<Vec<CycleTrace>> {
    let j = series.schedule().len();
    if let Some(&bad) = depth_indices.iter().find(|&&d| d >= j) {
        return Err(Error::validation(format!("depth index {bad} outside 0..{j}")));
    }
    let observed = series.months_range(start, k)?;
    let w = cfg.window(start, cfg.n_cycles)?;
    let bank = train_bank_with(series, &w, &cfg.hyperparams, cfg.seed, cfg.workers)?;
    let rollout = predict_multi_step(&bank, &bank.normalized_training()?, k)?;

    Ok(depth_indices
        .iter()
        .map(|&d| {
            let truth = (0..series.n_months())
                .map(|i| (series.start_month().offset(i as i32), series.values()[(d, i)]))
                .collect();
            let pred: Vec<f64> = rollout.row(d).iter().copied().collect();
            let obs: Vec<f64> = observed.row(d).iter().copied().collect();
            CycleTrace {
                layer_index: d,
                depth: series.schedule().levels()[d],
                truth,
                predicted: pred.iter().enumerate().map(|(s, &v)| (start.offset(s as i32), v)).collect(),
                correlation: pearson(&pred, &obs),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{synth_series, SynthSpec};
    use crate::profile::DepthSchedule;

    fn quick_cfg() -> ExperimentConfig {
        ExperimentConfig {
            hyperparams: Hyperparams { hidden_size: 4, epochs: 5, ..Hyperparams::default() },
            mlp: MlpConfig { epochs: 5, hidden: 4, ..MlpConfig::default() },
            step: 5.0,
            ..ExperimentConfig::default()
        }
    }

    fn small_schedule() -> DepthSchedule {
        DepthSchedule::custom(vec![0.0, 20.0, 100.0, 300.0, 800.0, 1500.0]).unwrap()
    }

    #[test]
    fn compare_has_four_methods() {
        let s = synth_series(&SynthSpec::default(), &small_schedule()).unwrap();
        let cfg = ExperimentConfig { poly_degree: 3, ..quick_cfg() };
        let t = experiment_compare(&s, Month::from_ym(2021, 10), &cfg).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.rows[1].window, "2019-10..2021-09");
        assert_eq!(t.rows[0].window, "2017-10..2021-09");
        assert!(t.rmse_of(Method::Hlstm).is_some());
        assert_eq!(t.rows[0].per_depth_abs_err.len(), 6);
        assert_eq!(t.settings[0], "mode=same_month");
        assert_eq!(t.settings[1], "degree=3");
    }

    #[test]
    fn monthly_shape() {
        let s = synth_series(&SynthSpec::default(), &small_schedule()).unwrap();
        let t = experiment_monthly(&s, 2021, &quick_cfg()).unwrap();
        assert_eq!(t.rolling.len(), 12);
        assert_eq!(t.fixed_origin.as_ref().unwrap().len(), 12);
        assert_eq!(t.rolling[0].window, "2017-01..2020-12");
        assert_eq!(t.rolling[11].window, "2017-12..2021-11");
        // needs 4 cycles before January
        assert!(experiment_monthly(&s, 2020, &quick_cfg()).is_err());
    }

    #[test]
    fn ablation_rows() {
        let s = synth_series(&SynthSpec::default(), &small_schedule()).unwrap();
        let rows = experiment_window_ablation(&s, &[Month::from_ym(2021, 1)], &[2], &quick_cfg()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].n_cycles, 2);
    }

    #[test]
    fn cycle_tracking_shape_and_errors() {
        let s = synth_series(&SynthSpec::sinusoidal(0), &small_schedule()).unwrap();
        let start = Month::from_ym(2021, 1);
        let traces = experiment_cycle_tracking(&s, &[1, 2], 12, start, &quick_cfg()).unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].truth.len(), 60);
        assert_eq!(traces[0].predicted.len(), 12);
        assert_eq!(traces[0].predicted[0].0, start);
        assert!(experiment_cycle_tracking(&s, &[6], 12, start, &quick_cfg()).is_err());
        assert!(experiment_cycle_tracking(&s, &[1], 13, start, &quick_cfg()).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
    }
}
