use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use ssp_hlstm::checkpoint::{load_bank, save_bank};
use ssp_hlstm::csvio::{read_profiles, write_layered, write_profiles};
use ssp_hlstm::eval::report::{self, report_file_name};
use ssp_hlstm::eval::{
    experiment_compare, experiment_cycle_tracking, experiment_monthly, experiment_window_ablation,
    synth_generate, Method,
};
use ssp_hlstm::hlstm::{predict_multi_step, retrain_until_stable, train_bank_with};
use ssp_hlstm::profile::{assemble_series_with, interpolate_full_depth, training_window};
use ssp_hlstm::{Error, LayeredSeries, Month, Profile, Result, WindowSpec};

// stdout may be a closed pipe (`ssp ingest x.csv | head`)
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    WindowAblation,
    Monthly,
    Compare,
    CycleTracking,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::WindowAblation => "window_ablation",
            Experiment::Monthly => "monthly",
            Experiment::Compare => "compare",
            Experiment::CycleTracking => "cycle_tracking",
        }
    }
}

/// Files produced by a command, written together once compute is done.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, String)>,
}

impl Outputs {
    fn add(&mut self, path: PathBuf, contents: String) {
        self.files.push((path, contents));
    }

    fn write(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, contents) in self.files {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            fs::write(&path, contents)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn span(profiles: &[Profile]) -> String {
    match (profiles.first(), profiles.last()) {
        (Some(a), Some(b)) => format!("{} months, {}..{}", profiles.len(), a.month(), b.month()),
        _ => "0 months".into(),
    }
}

fn load_profiles(cfg: &RunConfig) -> Result<Vec<Profile>> {
    match &cfg.data {
        Some(path) => read_profiles(path),
        None => synth_generate(&cfg.synth),
    }
}

fn dataset_label(cfg: &RunConfig) -> String {
    match &cfg.data {
        Some(p) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into()),
        None => "synthetic".into(),
    }
}

fn load_series(cfg: &RunConfig) -> Result<LayeredSeries> {
    let profiles = load_profiles(cfg)?;
    assemble_series_with(&profiles, &cfg.schedule, cfg.clamp)
}

fn check_window(series: &LayeredSeries, cycle_length: usize, n: usize, target: Month, truth: bool) -> Result<()> {
    let w = WindowSpec::new(cycle_length, n, target)?;
    training_window(series, &w)?;
    if truth {
        series.months_range(target, 1)?;
    }
    Ok(())
}

pub fn ingest(path: &Path, cfg: &RunConfig) -> Result<()> {
    let profiles = read_profiles(path)?;
    let series = assemble_series_with(&profiles, &cfg.schedule, cfg.clamp)?;
    let shallow = profiles.iter().map(|p| p.first_depth()).fold(f64::INFINITY, f64::min);
    let deep = profiles.iter().map(|p| p.last_depth()).fold(f64::NEG_INFINITY, f64::max);
    out!("{}", span(&profiles));
    out!("depth span {shallow}..{deep} m, {} schedule levels", series.schedule().len());
    for p in &profiles {
        out!("{} {} samples", p.month(), p.samples().len());
    }
    let mut out = Outputs::default();
    out.add(cfg.output.join("ingested.csv"), write_profiles(&profiles));
    for p in out.write()? {
        out!("wrote {}", p.display());
    }
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let profiles = synth_generate(&cfg.synth)?;
    let mut out = Outputs::default();
    out.add(
        cfg.output.join(format!("synth_{}.csv", cfg.synth.seed)),
        write_profiles(&profiles),
    );
    for p in out.write()? {
        out!("wrote {} ({})", p.display(), span(&profiles));
    }
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let series = load_series(cfg)?;
    check_window(&series, cfg.window.cycle_length, cfg.window.n_cycles, cfg.window.target, cfg.stabilize.is_some())?;
    let hp = &cfg.experiment.hyperparams;
    let seed = cfg.experiment.seed;
    let bank = match &cfg.stabilize {
        Some(sc) => {
            let s = retrain_until_stable(&series, &cfg.window, hp, seed, sc)?;
            let history: Vec<String> = s.rmse_history.iter().map(|r| format!("{r:.4}")).collect();
            out!(
                "{} rounds, validation RMSE {} m/s, kept round {}{}",
                s.rounds,
                history.join(" "),
                s.best_round,
                if s.stable { "" } else { " (not stable)" }
            );
            s.best
        }
        None => train_bank_with(&series, &cfg.window, hp, seed, cfg.experiment.workers)?,
    };
    for (m, depth) in bank.models.iter().zip(bank.schedule.levels()) {
        out!("layer {:03} {depth} m final loss {:.6e}", m.depth_index, m.meta.final_loss);
    }
    save_bank(&bank, &cfg.checkpoint)?;
    out!("wrote {} ({} layer models)", cfg.checkpoint.display(), bank.models.len());
    Ok(())
}

pub fn predict(cfg: &RunConfig, check_schedule: bool) -> Result<()> {
    let bank = load_bank(&cfg.checkpoint)?;
    if check_schedule && bank.schedule != cfg.schedule {
        return Err(Error::Checkpoint(format!(
            "checkpoint has a {}-level schedule, configuration asks for {} levels",
            bank.schedule.len(),
            cfg.schedule.len()
        )));
    }
    let rollout = predict_multi_step(&bank, &bank.normalized_training()?, cfg.k)?;
    let mut out = Outputs::default();
    for s in 0..cfg.k {
        let month = bank.window.target.offset(s as i32);
        let layered: Vec<f64> = rollout.column(s).iter().copied().collect();
        let profile = interpolate_full_depth(&layered, &bank.schedule, cfg.experiment.step, month)?;
        out.add(cfg.output.join(format!("layered_{month}.csv")), write_layered(&layered, &bank.schedule)?);
        out.add(cfg.output.join(format!("profile_{month}.csv")), write_profiles(&[profile]));
    }
    for p in out.write()? {
        out!("wrote {}", p.display());
    }
    Ok(())
}

/// Run an experiment, write its reports and return violated assertions.
pub fn evaluate(cfg: &RunConfig, experiment: Experiment, assert: bool) -> Result<Vec<String>> {
    let series = load_series(cfg)?;
    let ec = &cfg.experiment;
    let c = ec.cycle_length;
    let seed = ec.seed;
    let name = experiment.name();
    let mut out = Outputs::default();
    let mut violations = Vec::new();
    let file = |label: &str, ext: &str| cfg.output.join(report_file_name(name, label, seed, ext));

    let csv = match experiment {
        Experiment::Compare => {
            let t = cfg.window.target;
            check_window(&series, c, ec.n_cycles, t, true)?;
            check_window(&series, c, ec.poly_cycles, t, true)?;
            if series.schedule().len() <= ec.poly_degree {
                return Err(Error::Validation(format!(
                    "polynomial degree {} needs at least {} schedule levels, have {}",
                    ec.poly_degree,
                    ec.poly_degree + 1,
                    series.schedule().len()
                )));
            }
            let table = experiment_compare(&series, t, ec)?;
            let h = table.rmse_of(Method::Hlstm).unwrap_or(f64::NAN);
            let m = table.rmse_of(Method::Mean).unwrap_or(f64::NAN);
            if !(h < m) {
                violations.push(format!("hlstm RMSE {h:.4} is not below mean RMSE {m:.4}"));
            }
            let csv = report::compare_csv(&table, &dataset_label(cfg));
            for r in &table.rows {
                out.add(
                    cfg.output.join(format!("{name}_{t}_{seed}_{}_layered.csv", r.method)),
                    write_layered(&r.predicted, series.schedule())?,
                );
            }
            out.add(file(&t.to_string(), "svg"), report::compare_svg(&table));
            out.add(file(&t.to_string(), "csv"), csv.clone());
            csv
        }
        Experiment::Monthly => {
            for mo in 1..=12 {
                check_window(&series, c, ec.n_cycles, Month::from_ym(cfg.year, mo), true)?;
            }
            let table = experiment_monthly(&series, cfg.year, ec)?;
            if !(table.rolling_mean <= cfg.max_mean_rmse) {
                violations.push(format!("mean RMSE {:.4} exceeds {}", table.rolling_mean, cfg.max_mean_rmse));
            }
            for r in &table.rolling {
                if !(r.aggregate_rmse <= cfg.max_month_rmse) {
                    violations.push(format!("{} RMSE {:.4} exceeds {}", r.target, r.aggregate_rmse, cfg.max_month_rmse));
                }
            }
            let label = cfg.year.to_string();
            let csv = report::monthly_csv(&table);
            out.add(file(&label, "svg"), report::monthly_svg(&table));
            out.add(file(&label, "csv"), csv.clone());
            csv
        }
        Experiment::WindowAblation => {
            for &t in &cfg.targets {
                for &n in &cfg.n_values {
                    check_window(&series, c, n, t, true)?;
                }
            }
            let rows = experiment_window_ablation(&series, &cfg.targets, &cfg.n_values, ec)?;
            for &t in &cfg.targets {
                let mut mine: Vec<_> = rows.iter().filter(|r| r.target == t).collect();
                mine.sort_by_key(|r| r.n_cycles);
                for w in mine.windows(2) {
                    if !(w[1].rmse <= w[0].rmse + cfg.ablation_slack) {
                        violations.push(format!(
                            "{t}: RMSE rises from {:.4} (n={}) to {:.4} (n={})",
                            w[0].rmse, w[0].n_cycles, w[1].rmse, w[1].n_cycles
                        ));
                    }
                }
            }
            let label = cfg.targets[0].to_string();
            let csv = report::ablation_csv(&rows);
            out.add(file(&label, "svg"), report::ablation_svg(&rows));
            out.add(file(&label, "csv"), csv.clone());
            csv
        }
        Experiment::CycleTracking => {
            check_window(&series, c, ec.n_cycles, cfg.start, false)?;
            series.months_range(cfg.start, cfg.k)?;
            let traces = experiment_cycle_tracking(&series, &cfg.depth_indices, cfg.k, cfg.start, ec)?;
            for t in &traces {
                match t.correlation {
                    Some(r) if r >= cfg.min_correlation => {}
                    Some(r) => violations.push(format!(
                        "layer {} ({} m) correlation {r:.4} below {}",
                        t.layer_index, t.depth, cfg.min_correlation
                    )),
                    None => violations.push(format!("layer {} ({} m) correlation undefined", t.layer_index, t.depth)),
                }
            }
            let label = cfg.start.to_string();
            let csv = report::cycle_csv(&traces);
            out.add(file(&label, "svg"), report::cycle_svg(&traces));
            out.add(file(&label, "csv"), csv.clone());
            csv
        }
    };
    let _ = std::io::Write::write_all(&mut std::io::stdout(), csv.as_bytes());
    for p in out.write()? {
        out!("wrote {}", p.display());
    }
    info!("{name}: {} violated assertion(s)", violations.len());
    if !assert {
        return Ok(Vec::new());
    }
    for v in &violations {
        eprintln!("assertion failed: {v}");
    }
    Ok(violations)
}
