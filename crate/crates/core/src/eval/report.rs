//! CSV tables and SVG figures for the experiment outputs. Every writer is a
//! pure function of its input so reruns serialize byte-identically.

use std::fmt::Write;

use super::svg::{Axis, Chart, Series};
use super::{AblationRow, CompareTable, CycleTrace, MonthlyTable};
use crate::month::Month;

/// `<experiment>_<target>_<seed>.<ext>`
pub fn report_file_name(experiment: &str, target: &str, seed: u64, ext: &str) -> String {
    format!("{experiment}_{target}_{seed}.{ext}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut sorted: Vec<&AblationRow> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.target, r.n_cycles));
    let mut out = String::from("target,n_cycles,rmse_mps\n");
    for r in sorted {
        writeln!(out, "{},{},{:.6}", r.target, r.n_cycles, r.rmse).unwrap();
    }
    out
}

pub fn monthly_csv(table: &MonthlyTable) -> String {
    let fixed = table.fixed_origin.as_ref();
    let mut out = String::from("month,rmse_mps");
    if fixed.is_some() {
        out.push_str(",fixed_origin_rmse_mps");
    }
    out.push('\n');
    for (i, r) in table.rolling.iter().enumerate() {
        write!(out, "{},{:.6}", r.target, r.aggregate_rmse).unwrap();
        if let Some(f) = fixed {
            write!(out, ",{:.6}", f[i].aggregate_rmse).unwrap();
        }
        out.push('\n');
    }
    write!(out, "mean,{:.6}", table.rolling_mean).unwrap();
    if fixed.is_some() {
        write!(out, ",{}", fmt_opt(table.fixed_origin_mean())).unwrap();
    }
    out.push('\n');
    out
}

pub fn compare_csv(table: &CompareTable, dataset: &str) -> String {
    let mut out = String::from("method,dataset,rmse_mps,setting\n");
    for (i, r) in table.rows.iter().enumerate() {
        let setting = table.settings.get(i).map(String::as_str).unwrap_or("");
        writeln!(out, "{},{},{:.6},{}", r.method, dataset, r.aggregate_rmse, setting).unwrap();
    }
    out
}

/// Long format: one row per (layer, month) with the forecast column empty
/// outside the rollout.
pub fn cycle_csv(traces: &[CycleTrace]) -> String {
    let mut out = String::from("layer_index,depth_m,month,truth_mps,predicted_mps,pearson_r\n");
    for t in traces {
        for &(m, v) in &t.truth {
            let p = t.predicted.iter().find(|(pm, _)| *pm == m).map(|&(_, p)| p);
            writeln!(
                out,
                "{},{:.6},{},{:.6},{},{}",
                t.layer_index,
                t.depth,
                m,
                v,
                fmt_opt(p),
                fmt_opt(t.correlation)
            )
            .unwrap();
        }
    }
    out
}

fn month_index(m: Month, origin: Month) -> f64 {
    m.months_since(origin) as f64
}

pub fn ablation_svg(rows: &[AblationRow]) -> String {
    let mut targets: Vec<Month> = rows.iter().map(|r| r.target).collect();
    targets.sort();
    targets.dedup();
    let series = targets
        .iter()
        .map(|&t| {
            let mut pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.target == t)
                .map(|r| (r.n_cycles as f64, r.rmse))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series::new(t.to_string(), pts)
        })
        .collect();
    Chart {
        title: "RMSE by training cycles".into(),
        x: Axis::new("training cycles"),
        y: Axis::new("RMSE (m/s)"),
        series,
    }
    .render()
}

pub fn monthly_svg(table: &MonthlyTable) -> String {
    let origin = Month::from_ym(table.year, 1);
    let pts = |rows: &[super::RmseReport]| {
        rows.iter()
            .map(|r| (month_index(r.target, origin) + 1.0, r.aggregate_rmse))
            .collect::<Vec<_>>()
    };
    let mut series = vec![Series::new("rolling origin", pts(&table.rolling))];
    if let Some(f) = &table.fixed_origin {
        series.push(Series::new("fixed origin", pts(f)));
    }
    Chart {
        title: format!("Monthly RMSE {}", table.year),
        x: Axis::new("month"),
        y: Axis::new("RMSE (m/s)"),
        series,
    }
    .render()
}

/// Predicted profiles of every method against the observed one; depth runs
/// down the vertical axis.
pub fn compare_svg(table: &CompareTable) -> String {
    let mut series = Vec::new();
    if let Some(first) = table.rows.first() {
        let truth = first.per_depth_abs_err.iter().zip(&first.truth).map(|(&(d, _), &v)| (v, d)).collect();
        series.push(Series::new("observed", truth));
    }
    for r in &table.rows {
        let pts = r.per_depth_abs_err.iter().zip(&r.predicted).map(|(&(d, _), &v)| (v, d)).collect();
        series.push(Series::new(r.method.clone(), pts));
    }
    Chart {
        title: format!("Predicted profiles {}", table.target),
        x: Axis::new("sound speed (m/s)"),
        y: Axis::new("depth (m)").inverted(),
        series,
    }
    .render()
}

pub fn cycle_svg(traces: &[CycleTrace]) -> String {
    let origin = traces.first().and_then(|t| t.truth.first()).map(|&(m, _)| m).unwrap_or(Month(0));
    let mut series = Vec::new();
    for t in traces {
        let conv = |v: &[(Month, f64)]| v.iter().map(|&(m, s)| (month_index(m, origin), s)).collect();
        series.push(Series::new(format!("observed {} m", t.depth), conv(&t.truth)));
        series.push(Series::new(format!("forecast {} m", t.depth), conv(&t.predicted)));
    }
    Chart {
        title: "Monthly sound speed by depth".into(),
        x: Axis::new(format!("months since {origin}")),
        y: Axis::new("sound speed (m/s)"),
        series,
    }
    .render()
}
