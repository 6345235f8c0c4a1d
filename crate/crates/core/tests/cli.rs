use std::path::Path;
use std::process::{Command, Output};

use nrtwin::harness::{parse_figure_csv, FIGURE_HEADER};
use nrtwin::predictor::{fit, BoostedEnsemble, FitParams};
use nrtwin::telemetry::{load_csv, split, CSV_HEADER};
use nrtwin::twin::RUN_REPORT_HEADER;

fn nrtwin(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nrtwin"));
    cmd.args(args);
    for k in ["NRTWIN_SEED", "NRTWIN_CONFIG", "NRTWIN_OUT"] {
        cmd.env_remove(k);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

const MINIMAL: &str = "# minimal scenario\nue_count = 4\nduration_s = 0.3\n";

#[test]
fn simulate_minimal_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", MINIMAL);
    let out = dir.path().join("r.csv");
    let o = nrtwin(&["--config", &cfg, "--out", out.to_str().unwrap(), "simulate"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(RUN_REPORT_HEADER));
    // 3 windows x (network + region + 4 UEs)
    assert_eq!(text.lines().count(), 1 + 3 * 6);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.cfg",
        "ue_count = 6\nduration_s = 0.5\nattack_start_s = 0.1\npolicy = dt-managed\nexplore_forks = 5\n",
    );
    let a = nrtwin(&["--config", &cfg, "--seed", "9", "simulate"], &[]);
    let b = nrtwin(&["--config", &cfg, "--seed", "9", "simulate"], &[]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    let c = nrtwin(&["--config", &cfg, "simulate"], &[("NRTWIN_SEED", "9")]);
    assert_eq!(a.stdout, c.stdout);
    let d = nrtwin(&["--config", &cfg, "--seed", "10", "simulate"], &[]);
    assert_ne!(a.stdout, d.stdout);
}

#[test]
fn config_errors_exit_2_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write(dir.path(), "m.cfg", "duration_s = 1\n");
    let o = nrtwin(&["--config", &missing, "simulate"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ue_count"), "{}", stderr(&o));

    let bad = write(dir.path(), "b.cfg", "ue_count = 4\nduration_s = 1\nnumerology = 7\n");
    let o = nrtwin(&["--config", &bad, "simulate"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let dup = write(dir.path(), "d.cfg", "ue_count = 4\nue_count = 5\n");
    let o = nrtwin(&["--config", &dup, "simulate"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"));

    let o = nrtwin(&["--config", "/nonexistent.cfg", "simulate"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = nrtwin(&["simulate"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn environment_overrides_scenario_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", MINIMAL);
    let o = nrtwin(&["--config", &cfg, "simulate"], &[("NRTWIN_SET_UE_COUNT", "2")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1 + 3 * 4);
    let o = nrtwin(&["--config", &cfg, "simulate"], &[("NRTWIN_SET_BOGUS", "2")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn telemetry_then_train_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.cfg",
        "ue_count = 10\nduration_s = 1\nnumerology = random\nattack_start_s = 0.3\n",
    );
    let tel = dir.path().join("tel.csv");
    let o = nrtwin(
        &["--config", &cfg, "--out", dir.path().join("r.csv").to_str().unwrap(), "simulate", "--telemetry", tel.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&tel).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    assert_eq!(text.lines().count(), 1 + 10 * 9);

    let model = dir.path().join("m.txt");
    let o = nrtwin(&["--out", model.to_str().unwrap(), "train", tel.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let printed = stdout(&o);
    assert!(printed.contains("learning_rate 0.1\n"), "{printed}");
    for key in ["rmse ", "mae ", "r2 "] {
        assert!(printed.contains(key));
    }
    let loaded = BoostedEnsemble::load(&model).unwrap();
    let (train, _) = split(&load_csv(&tel).unwrap(), 0.2, 0).unwrap();
    assert_eq!(loaded, fit(&train, &FitParams::default()).unwrap());

    let o = nrtwin(
        &["--out", model.to_str().unwrap(), "train", tel.to_str().unwrap(), "--learning-rate", "0.3"],
        &[],
    );
    assert!(stdout(&o).contains("learning_rate 0.3\n"));
}

#[test]
fn constant_labels_report_zero_rmse() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = format!("{CSV_HEADER}\n");
    for i in 0..20 {
        let t = i as f64 * 0.1;
        body.push_str(&format!("{t},{},{},1,11,5,1500,3,30000000,{},0.002,1000,5,0,0.004,2000\n", t + 0.1, i % 4, i % 5));
    }
    let tel = write(dir.path(), "c.csv", &body);
    let model = dir.path().join("m.txt");
    let o = nrtwin(&["--out", model.to_str().unwrap(), "train", &tel], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("rmse 0\n"), "{}", stdout(&o));
}

#[test]
fn unparsable_telemetry_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let tel = write(dir.path(), "bad.csv", &format!("{CSV_HEADER}\n0,0.1,0,1,x\n"));
    let o = nrtwin(&["--out", dir.path().join("m").to_str().unwrap(), "train", &tel], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let o = nrtwin(&["train", &tel], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimize_writes_a_plan() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.cfg",
        "ue_count = 5\nduration_s = 0.6\nattack_start_s = 0.1\ntrigger_s = 0.2\nhorizon_s = 0.1\nanneal_iters = 30\n",
    );
    let plan = dir.path().join("plan.csv");
    let trace = dir.path().join("trace.csv");
    let o = nrtwin(
        &["--config", &cfg, "--out", plan.to_str().unwrap(), "optimize", "--search-trace", trace.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(std::fs::read_to_string(&plan).unwrap().starts_with("ue_id,cc_id,numerology\n"));
    let t = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(t.lines().count(), 31);
    let printed = stdout(&o);
    let value = |key: &str| -> f64 {
        printed
            .lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap()
            .trim()
            .parse()
            .unwrap()
    };
    assert!(value("predicted_objective") <= value("baseline_objective"));
}

#[test]
fn oversized_exhaustive_search_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.cfg",
        "ue_count = 20\nduration_s = 0.4\ntrigger_s = 0.1\nemergency_fraction = 1\nneighbor_radius_m = 2000\n",
    );
    let o = nrtwin(&["--config", &cfg, "optimize", "--search", "exhaustive"], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("search"));
}

#[test]
fn experiment_single_cell_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.cfg",
        "cell_modes = single\npolicies = default\nue_counts = 10\nreplications = 1\n",
    );
    let out = dir.path().join("out");
    let o = nrtwin(&["--config", &m, "--out", out.to_str().unwrap(), "experiment"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["figure_delay.csv", "figure_success.csv", "figure_throughput.csv"]);
    for n in &names {
        let text = std::fs::read_to_string(out.join(n)).unwrap();
        assert!(text.starts_with(FIGURE_HEADER));
        let rows = parse_figure_csv(&text).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].ci_low, rows[0].mean);
        assert_eq!(rows[0].ci_high, rows[0].mean);
    }
    let o = nrtwin(&["--config", &m, "experiment"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let bad = write(dir.path(), "bad.cfg", "ue_counts = 12\n");
    let o = nrtwin(&["--config", &bad, "--out", out.to_str().unwrap(), "experiment"], &[]);
    assert_eq!(o.status.code(), Some(2));
}
