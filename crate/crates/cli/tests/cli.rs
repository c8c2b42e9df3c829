use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ssp_hlstm::csvio::read_profiles;

const SMALL_SCHEDULE: &str = "0,10,20,50,100,200,500,1000,1975";

fn ssp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssp"))
        .args(args)
        .current_dir(dir)
        .env_remove("SSP_OUTPUT_ROOT")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stdout:\n{}\nstderr:\n{}", stdout(&o), stderr(&o));
    o
}

fn sorted_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn synth_round_trips_through_ingest() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(ssp(d, &["synth", "--output", "a"]));
    ok(ssp(d, &["synth", "--output", "b"]));
    let a = fs::read(d.join("a/synth_0.csv")).unwrap();
    assert_eq!(a, fs::read(d.join("b/synth_0.csv")).unwrap());

    let out = ok(ssp(d, &["ingest", "a/synth_0.csv", "--output", "ing"]));
    assert!(stdout(&out).starts_with("60 months, 2017-01..2021-12\n"), "{}", stdout(&out));
    assert_eq!(fs::read(d.join("ing/ingested.csv")).unwrap(), a);
}

#[test]
fn synth_month_boundary() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(ssp(d, &["synth", "--synth_months", "13", "--output", "o"]));
    assert_eq!(read_profiles(&d.join("o/synth_0.csv")).unwrap().len(), 13);
    let bad = ssp(d, &["synth", "--synth_months", "12", "--output", "o2"]);
    assert_eq!(code(&bad), 2);
    assert!(!d.join("o2").exists());
}

#[test]
fn env_var_sets_default_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = Command::new(env!("CARGO_BIN_EXE_ssp"))
        .args(["synth", "--synth_months", "13"])
        .current_dir(d)
        .env("SSP_OUTPUT_ROOT", d.join("root"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(d.join("root/synth_0.csv").exists());
    // a flag beats the environment
    let o = Command::new(env!("CARGO_BIN_EXE_ssp"))
        .args(["synth", "--synth_months", "13", "--output", "flag"])
        .current_dir(d)
        .env("SSP_OUTPUT_ROOT", d.join("root2"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(d.join("flag/synth_0.csv").exists() && !d.join("root2").exists());
}

#[test]
fn ingest_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("empty.csv"), "").unwrap();
    let o = ssp(d, &["ingest", "empty.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));

    fs::write(
        d.join("dup.csv"),
        "month,depth_m,speed_mps\n2017-01,0,1500\n2017-01,1975,1490\n2017-02,0,1500\n2017-02,1975,1490\n2017-01,0,1500\n",
    )
    .unwrap();
    let o = ssp(d, &["ingest", "dup.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("duplicate month 2017-01"), "{}", stderr(&o));

    fs::write(
        d.join("gap.csv"),
        "month,depth_m,speed_mps\n2017-01,0,1500\n2017-01,1975,1490\n2017-03,0,1500\n2017-03,1975,1490\n",
    )
    .unwrap();
    let o = ssp(d, &["ingest", "gap.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("chronology"), "{}", stderr(&o));

    fs::write(d.join("bad.csv"), "month,depth_m,speed_mps\n2017-01,0,fast\n").unwrap();
    let o = ssp(d, &["ingest", "bad.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.csv:2:"), "{}", stderr(&o));
}

#[test]
fn train_predict_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("run.conf"),
        format!("# toy run\nschedule = {SMALL_SCHEDULE}\nhidden_size = 4\nepochs = 20\ntarget = 2021-01\n"),
    )
    .unwrap();
    let train = |ck: &str| ok(ssp(d, &["train", "--config", "run.conf", "--checkpoint", ck]));
    let out = train("ck1");
    assert_eq!(stdout(&out).lines().filter(|l| l.starts_with("layer ")).count(), 9);
    train("ck2");
    let files = sorted_files(&d.join("ck1"));
    assert_eq!(files.len(), 10);
    for f in &files {
        let other = d.join("ck2").join(f.file_name().unwrap());
        assert_eq!(fs::read(f).unwrap(), fs::read(other).unwrap(), "{}", f.display());
    }

    ok(ssp(d, &["predict", "--config", "run.conf", "--checkpoint", "ck1", "--output", "p12", "--step", "5"]));
    ok(ssp(d, &["predict", "--config", "run.conf", "--checkpoint", "ck1", "--output", "p1", "--k", "1", "--step", "5"]));
    let profiles: Vec<_> = sorted_files(&d.join("p12"))
        .into_iter()
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("profile_"))
        .collect();
    assert_eq!(profiles.len(), 12);
    for p in &profiles {
        let back = read_profiles(p).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].last_depth(), 1975.0);
        assert_eq!(back[0].samples().len(), 396);
    }
    for name in ["layered_2021-01.csv", "profile_2021-01.csv"] {
        assert_eq!(fs::read(d.join("p1").join(name)).unwrap(), fs::read(d.join("p12").join(name)).unwrap());
    }
    assert_eq!(sorted_files(&d.join("p1")).len(), 2);

    let o = ssp(d, &["predict", "--checkpoint", "ck1", "--schedule", "0,100"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("schedule"), "{}", stderr(&o));
}

#[test]
fn single_level_schedule_trains_one_model() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(ssp(d, &["train", "--schedule", "0", "--hidden_size", "3", "--epochs", "5", "--output", "o"]));
    let names: Vec<_> = sorted_files(&d.join("o/checkpoint"))
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["layer_000.model", "manifest.txt"]);
}

#[test]
fn stabilized_training_reports_rounds() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = ok(ssp(
        d,
        &["train", "--schedule", "0,50", "--hidden_size", "3", "--epochs", "5", "--stabilize", "true", "--max_rounds", "3"],
    ));
    assert!(stdout(&o).contains("validation RMSE"), "{}", stdout(&o));
}

#[test]
fn validation_and_divergence_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = ssp(d, &["train", "--target", "2017-06", "--epochs", "5", "--output", "o"]);
    assert_eq!(code(&o), 2);
    assert!(!d.join("o").exists(), "no partial output on a rejected window");

    let o = ssp(d, &["train", "--epochs", "0"]);
    assert_eq!(code(&o), 2);

    fs::write(d.join("bad.conf"), "epoch = 3\n").unwrap();
    assert_eq!(code(&ssp(d, &["train", "--config", "bad.conf"])), 2);

    let o = ssp(
        d,
        &["train", "--schedule", "0,100", "--lr", "1e308", "--optimizer", "sgd", "--hidden_size", "3", "--epochs", "3", "--output", "div"],
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("layer"), "{}", stderr(&o));
    assert!(!d.join("div/checkpoint").exists());

    assert_eq!(code(&ssp(d, &["evaluate", "nonsense"])), 2);
}

#[test]
fn evaluate_compare_with_assert() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = ok(ssp(
        d,
        &["evaluate", "compare", "--assert", "--schedule", SMALL_SCHEDULE, "--hidden_size", "16", "--output", "r"],
    ));
    let csv = fs::read_to_string(d.join("r/compare_2021-10_0.csv")).unwrap();
    let methods: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["mean", "polynomial", "bp", "hlstm"]);
    assert!(d.join("r/compare_2021-10_0.svg").exists());
    assert!(stdout(&o).starts_with("method,dataset,rmse_mps,setting\n"));
    assert!(csv.contains(",mode=same_month"));
    for m in methods {
        let path = d.join(format!("r/compare_2021-10_0_{m}_layered.csv"));
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(ssp_hlstm::csvio::parse_layered(&text, &path).unwrap().len(), 9);
    }
}

#[test]
fn evaluate_assert_failure_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = ssp(
        d,
        &["evaluate", "monthly", "--assert", "--max_mean_rmse", "0", "--schedule", "0,100,1975", "--hidden_size", "3", "--epochs", "5", "--output", "r"],
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("mean RMSE"), "{}", stderr(&o));
    // reports are still written
    assert!(d.join("r/monthly_2021_0.csv").exists());
}

#[test]
fn evaluate_monthly_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(ssp(
        d,
        &["evaluate", "monthly", "--schedule", "0,100,1975", "--hidden_size", "3", "--epochs", "5", "--output", "r"],
    ));
    let csv = fs::read_to_string(d.join("r/monthly_2021_0.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "month,rmse_mps,fixed_origin_rmse_mps");
    assert_eq!(lines.len(), 14);
    assert!(lines[1].starts_with("2021-01,"));
    assert!(lines[13].starts_with("mean,"));
}

#[test]
fn evaluate_ablation_and_cycle_tracking() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let common = ["--schedule", "0,5,10,20,100", "--hidden_size", "3", "--epochs", "5", "--output", "r"];
    let mut args = vec!["evaluate", "window_ablation", "--target", "2021-01"];
    args.extend(common);
    ok(ssp(d, &args));
    let csv = fs::read_to_string(d.join("r/window_ablation_2021-01_0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    let mut args = vec!["evaluate", "cycle_tracking"];
    args.extend(common);
    ok(ssp(d, &args));
    let csv = fs::read_to_string(d.join("r/cycle_tracking_2021-01_0.csv")).unwrap();
    // three layers, 60 months each
    assert_eq!(csv.lines().count(), 1 + 3 * 60);
    assert!(d.join("r/cycle_tracking_2021-01_0.svg").exists());
}

#[test]
fn evaluate_reports_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let args = |out| {
        vec![
            "evaluate", "compare", "--schedule", "0,100,1975", "--poly_degree", "2", "--hidden_size", "3", "--epochs", "5",
            "--mlp_epochs", "5", "--output", out,
        ]
    };
    for out in ["a", "b"] {
        ok(ssp(d, &args(out)));
    }
    let o = ssp(d, &["evaluate", "compare", "--schedule", "0,100,1975", "--epochs", "5", "--output", "c"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("polynomial degree 8"), "{}", stderr(&o));
    for name in ["compare_2021-10_0.csv", "compare_2021-10_0.svg"] {
        assert_eq!(fs::read(d.join("a").join(name)).unwrap(), fs::read(d.join("b").join(name)).unwrap());
    }
}
