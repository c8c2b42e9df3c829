//! Run configuration: defaults, an optional `key = value` file and
//! `--key value` flags, merged in that order of increasing precedence.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ssp_hlstm::baselines::{MeanMode, MlpConfig};
use ssp_hlstm::checkpoint::parse_overrides;
use ssp_hlstm::eval::{ExperimentConfig, SynthSpec};
use ssp_hlstm::hlstm::{Hyperparams, StabilityConfig};
use ssp_hlstm::kv::KvMap;
use ssp_hlstm::{DepthSchedule, Error, Month, Result, WindowSpec};

pub const OUTPUT_ENV: &str = "SSP_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT: &str = "ssp-out";

macro_rules! config_keys {
    ($($key:ident = $default:expr, $help:literal;)*) => {
        /// Per-key command-line overrides.
        #[derive(clap::Args, Debug, Clone, Default)]
        pub struct Overrides {
            $(
                #[arg(long = stringify!($key), value_name = "VALUE", help = $help, global = true)]
                pub $key: Option<String>,
            )*
        }

        impl Overrides {
            pub fn to_kv(&self) -> KvMap {
                let mut kv = KvMap::new();
                $(
                    if let Some(v) = &self.$key {
                        kv.insert(stringify!($key), v);
                    }
                )*
                kv
            }
        }

        /// Every recognized key with its default, if it has one.
        pub const KEYS: &[(&str, Option<&str>)] = &[$((stringify!($key), $default)),*];
    };
}

config_keys! {
    data = None, "Profile CSV (month,depth_m,speed_mps); synthetic data is used when absent";
    output = None, "Output directory [env SSP_OUTPUT_ROOT, default ssp-out]";
    checkpoint = None, "Bank checkpoint directory [default <output>/checkpoint]";
    schedule = Some("paper58"), "paper58 or a comma-separated list of depths in m";
    clamp = Some("false"), "Clamp schedule levels outside a profile's span to its endpoints";
    seed = Some("0"), "Master seed";
    workers = Some("0"), "Parallel layer-training workers (0 = all cores)";
    cycle_length = Some("12"), "Months per cycle";
    n_cycles = Some("4"), "Training cycles";
    target = Some("2021-10"), "Forecast month YYYY-MM";
    step = Some("1"), "Full-depth interpolation step, m";
    hidden_size = Some("128"), "LSTM hidden units";
    lr = Some("0.01"), "Learning rate";
    epochs = Some("300"), "Training epochs";
    stack_depth = Some("1"), "Stacked recurrent layers per depth model";
    optimizer = Some("adam"), "adam or sgd";
    clip_norm = Some("5"), "Global gradient norm cap";
    lr_overrides = Some(""), "Per-layer learning rates, e.g. 0:0.02,5:0.005";
    epoch_overrides = Some(""), "Per-layer epoch counts, e.g. 0:500";
    stabilize = Some("false"), "Retrain with fresh seeds until validation RMSE is stable";
    stability_delta = Some("0.05"), "Relative RMSE change accepted as stable";
    max_rounds = Some("5"), "Retraining rounds cap";
    poly_cycles = Some("2"), "Training cycles for the polynomial baseline";
    poly_degree = Some("8"), "Polynomial degree";
    mean_mode = Some("same_month"), "same_month or all_months";
    mlp_window = Some("12"), "MLP input window, months";
    mlp_hidden = Some("32"), "MLP hidden units";
    mlp_epochs = Some("300"), "MLP training epochs";
    mlp_lr = Some("0.01"), "MLP learning rate";
    k = Some("12"), "Forecast horizon in months";
    year = None, "Year for the monthly experiment [default: year of target]";
    targets = None, "Comma-separated target months for window_ablation [default: target]";
    n_values = Some("1,2,3,4"), "Training cycle counts for window_ablation";
    depth_indices = Some("1,2,3"), "Layer indices for cycle_tracking";
    start = None, "First rollout month for cycle_tracking [default: January of the target year]";
    min_correlation = Some("0.95"), "cycle_tracking assertion threshold";
    max_mean_rmse = Some("1.0"), "monthly assertion: limit on the mean RMSE, m/s";
    max_month_rmse = Some("1.5"), "monthly assertion: limit on every month, m/s";
    ablation_slack = Some("0.1"), "window_ablation assertion: allowed RMSE increase per step, m/s";
    synth_seed = None, "Synthetic ocean seed [default: seed]";
    synth_months = Some("60"), "Synthetic series length";
    synth_start = Some("2017-01"), "Synthetic series first month";
    synth_noise_sigma = Some("0.1"), "Synthetic white noise, m/s";
    synth_anomaly_sigma = Some("0.4"), "Synthetic persistent anomaly, m/s";
    synth_seasonal_amplitude = Some("4"), "Synthetic surface seasonal amplitude, m/s";
    synth_trend_per_year = Some("0.4"), "Synthetic surface trend, m/s per year";
}

/// Defaults, then the file at `config` if any, then `flags`. Also returns
/// the keys the user set explicitly.
pub fn merge(config: Option<&Path>, flags: &KvMap) -> Result<(KvMap, KvMap)> {
    let mut user = KvMap::new();
    let mut kv = KvMap::new();
    for (k, d) in KEYS {
        if let Some(d) = d {
            kv.insert(*k, d);
        }
    }
    if let Ok(root) = std::env::var(OUTPUT_ENV) {
        kv.insert("output", root);
    }
    if let Some(path) = config {
        let file = KvMap::read(path)?;
        if let Some(bad) = file.keys().find(|k| !KEYS.iter().any(|(known, _)| known == k)) {
            return Err(Error::Validation(format!("{}: unknown key {bad:?}", path.display())));
        }
        user.overlay(&file);
    }
    user.overlay(flags);
    kv.overlay(&user);
    if !kv.contains("output") {
        kv.insert("output", DEFAULT_OUTPUT);
    }
    Ok((kv, user))
}

fn parse<T: FromStr>(kv: &KvMap, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    kv.parse_required(key)
}

fn parse_bool(kv: &KvMap, key: &str) -> Result<bool> {
    match kv.require(key)? {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Validation(format!("{key} = {other:?}: expected true or false"))),
    }
}

fn parse_list<T: FromStr>(s: &str, key: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| Error::Validation(format!("{key}: {t:?}: {e}"))))
        .collect()
}

fn parse_schedule(s: &str) -> Result<DepthSchedule> {
    if s.trim() == "paper58" {
        Ok(DepthSchedule::paper58())
    } else {
        DepthSchedule::custom(parse_list(s, "schedule")?)
    }
}

/// Everything a command needs, validated up front.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub synth: SynthSpec,
    pub schedule: DepthSchedule,
    pub clamp: bool,
    pub window: WindowSpec,
    pub experiment: ExperimentConfig,
    pub stabilize: Option<StabilityConfig>,
    pub output: PathBuf,
    pub checkpoint: PathBuf,
    pub k: usize,
    pub year: i32,
    pub targets: Vec<Month>,
    pub n_values: Vec<usize>,
    pub depth_indices: Vec<usize>,
    pub start: Month,
    pub min_correlation: f64,
    pub max_mean_rmse: f64,
    pub max_month_rmse: f64,
    pub ablation_slack: f64,
}

impl RunConfig {
    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let seed: u64 = parse(kv, "seed")?;
        let target: Month = parse(kv, "target")?;
        let hyperparams = Hyperparams {
            hidden_size: parse(kv, "hidden_size")?,
            lr: parse(kv, "lr")?,
            epochs: parse(kv, "epochs")?,
            stack_depth: parse(kv, "stack_depth")?,
            optimizer: parse(kv, "optimizer")?,
            clip_norm: parse(kv, "clip_norm")?,
            lr_overrides: parse_overrides(kv.require("lr_overrides")?)?,
            epoch_overrides: parse_overrides(kv.require("epoch_overrides")?)?,
        };
        hyperparams.validate()?;
        let mlp = MlpConfig {
            window: parse(kv, "mlp_window")?,
            hidden: parse(kv, "mlp_hidden")?,
            epochs: parse(kv, "mlp_epochs")?,
            lr: parse(kv, "mlp_lr")?,
            ..MlpConfig::default()
        };
        if mlp.window == 0 || mlp.hidden == 0 || mlp.epochs == 0 || !(mlp.lr > 0.0) {
            return Err(Error::Validation("MLP window, hidden, epochs and lr must be positive".into()));
        }
        let experiment = ExperimentConfig {
            hyperparams,
            cycle_length: parse(kv, "cycle_length")?,
            n_cycles: parse(kv, "n_cycles")?,
            poly_cycles: parse(kv, "poly_cycles")?,
            poly_degree: parse(kv, "poly_degree")?,
            mean_mode: parse::<MeanMode>(kv, "mean_mode")?,
            mlp,
            step: parse(kv, "step")?,
            seed,
            workers: parse(kv, "workers")?,
            fixed_origin: true,
        };
        if !(experiment.step > 0.0 && experiment.step.is_finite()) {
            return Err(Error::Validation(format!("step must be positive, got {}", experiment.step)));
        }
        let window = WindowSpec::new(experiment.cycle_length, experiment.n_cycles, target)?;
        WindowSpec::new(experiment.cycle_length, experiment.poly_cycles, target)?;

        let stabilize = if parse_bool(kv, "stabilize")? {
            let cfg = StabilityConfig {
                delta: parse(kv, "stability_delta")?,
                max_rounds: parse(kv, "max_rounds")?,
            };
            if !(cfg.delta > 0.0) || cfg.max_rounds == 0 {
                return Err(Error::Validation("stability_delta and max_rounds must be positive".into()));
            }
            Some(cfg)
        } else {
            None
        };

        let synth = SynthSpec {
            seed: kv.parse_value("synth_seed")?.unwrap_or(seed),
            months: parse(kv, "synth_months")?,
            start: parse(kv, "synth_start")?,
            noise_sigma: parse(kv, "synth_noise_sigma")?,
            anomaly_sigma: parse(kv, "synth_anomaly_sigma")?,
            seasonal_amplitude: parse(kv, "synth_seasonal_amplitude")?,
            trend_per_year: parse(kv, "synth_trend_per_year")?,
            ..SynthSpec::default()
        };
        synth.validate()?;

        let output = PathBuf::from(kv.require("output")?);
        let checkpoint = kv
            .get("checkpoint")
            .map(PathBuf::from)
            .unwrap_or_else(|| output.join("checkpoint"));
        let k: usize = parse(kv, "k")?;
        if k == 0 {
            return Err(Error::Validation("k must be >= 1".into()));
        }
        let year = kv.parse_value("year")?.unwrap_or(target.year());
        let targets = match kv.get("targets") {
            Some(s) => parse_list(s, "targets")?,
            None => vec![target],
        };
        let n_values: Vec<usize> = parse_list(kv.require("n_values")?, "n_values")?;
        if targets.is_empty() || n_values.is_empty() || n_values.contains(&0) {
            return Err(Error::Validation("targets and n_values must be non-empty, n >= 1".into()));
        }
        Ok(RunConfig {
            data: kv.get("data").map(PathBuf::from),
            synth,
            schedule: parse_schedule(kv.require("schedule")?)?,
            clamp: parse_bool(kv, "clamp")?,
            window,
            experiment,
            stabilize,
            output,
            checkpoint,
            k,
            year,
            targets,
            n_values,
            depth_indices: parse_list(kv.require("depth_indices")?, "depth_indices")?,
            start: kv.parse_value("start")?.unwrap_or(Month::from_ym(target.year(), 1)),
            min_correlation: parse(kv, "min_correlation")?,
            max_mean_rmse: parse(kv, "max_mean_rmse")?,
            max_month_rmse: parse(kv, "max_month_rmse")?,
            ablation_slack: parse(kv, "ablation_slack")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flag_over_file_over_default() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        std::fs::write(&file, "epochs = 20\nhidden_size = 8\n").unwrap();
        let mut flags = KvMap::new();
        flags.insert("epochs", "5");
        let (kv, user) = merge(Some(&file), &flags).unwrap();
        assert_eq!(user.get("hidden_size"), Some("8"));
        let cfg = RunConfig::from_kv(&kv).unwrap();
        assert_eq!(cfg.experiment.hyperparams.epochs, 5);
        assert_eq!(cfg.experiment.hyperparams.hidden_size, 8);
        assert_eq!(cfg.experiment.hyperparams.lr, 0.01);
    }

    #[test]
    fn unknown_file_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        std::fs::write(&file, "epoch = 20\n").unwrap();
        assert!(merge(Some(&file), &KvMap::new()).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for (k, v) in [
            ("epochs", "0"),
            ("target", "2021-13"),
            ("schedule", "100,50"),
            ("optimizer", "rmsprop"),
            ("synth_months", "12"),
            ("clamp", "maybe"),
            ("k", "0"),
            ("step", "-1"),
        ] {
            let mut flags = KvMap::new();
            flags.insert(k, v);
            let (kv, _) = merge(None, &flags).unwrap();
            assert!(RunConfig::from_kv(&kv).is_err(), "{k} = {v}");
        }
    }

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::from_kv(&merge(None, &KvMap::new()).unwrap().0).unwrap();
        assert_eq!(cfg.schedule.len(), 58);
        assert_eq!(cfg.start, Month::from_ym(2021, 1));
        assert_eq!(cfg.year, 2021);
        assert_eq!(cfg.synth, SynthSpec::default());
    }
}
