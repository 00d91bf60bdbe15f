use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use extremal::nnet::{default_architecture, init_network, load_model};
use serde_json::Value;

fn extremal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_extremal"))
        .args(args)
        .current_dir(dir)
        .env_remove("EXTREMAL_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = extremal(dir, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    out
}

/// Small dataset and briefly trained model for the downstream commands.
fn small_fixture(dir: &Path) {
    ok(
        dir,
        &["generate", "--n", "200", "--seed", "5", "--out", "data.csv"],
    );
    ok(
        dir,
        &[
            "train",
            "--data",
            "data.csv",
            "--epochs",
            "40",
            "--seed",
            "5",
            "--out",
            "model.json",
        ],
    );
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "generate",
            "--n",
            "1000",
            "--seed",
            "42",
            "--noise-std",
            "0.05",
            "--out",
            "a.csv",
        ],
    );
    ok(
        d,
        &[
            "generate",
            "--n",
            "1000",
            "--seed",
            "42",
            "--noise-std",
            "0.05",
            "--out",
            "b.csv",
        ],
    );
    let a = fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, fs::read(d.join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1001);
    let report = json(&d.join("a.report.json"));
    assert_eq!(report["manifest"]["generation"]["n"], 1000);
    assert_eq!(report["stats"]["mu"].as_array().unwrap().len(), 4);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = extremal(dir.path(), &["generate", "--n", "0"]);
    assert_eq!(code(&out), 1);
    assert!(!dir.path().join("data.csv").exists());
    assert_eq!(code(&extremal(dir.path(), &["frobnicate"])), 1);
    assert_eq!(
        code(&extremal(dir.path(), &["train", "--batch-size", "zero"])),
        1
    );
    assert_eq!(code(&extremal(dir.path(), &["train"])), 1);
    assert_eq!(code(&extremal(dir.path(), &["--help"])), 0);
}

#[test]
fn flags_override_config_and_reports_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("cfg.json"),
        r#"{"generation": {"n": 50, "seed": 9}}"#,
    )
    .unwrap();
    ok(
        d,
        &["generate", "--config", "cfg.json", "--out", "from_file.csv"],
    );
    assert_eq!(
        fs::read_to_string(d.join("from_file.csv"))
            .unwrap()
            .lines()
            .count(),
        51
    );
    ok(
        d,
        &[
            "generate", "--config", "cfg.json", "--n", "20", "--out", "flag.csv",
        ],
    );
    assert_eq!(
        fs::read_to_string(d.join("flag.csv"))
            .unwrap()
            .lines()
            .count(),
        21
    );

    ok(
        d,
        &[
            "generate",
            "--config",
            "from_file.report.json",
            "--out",
            "again.csv",
        ],
    );
    assert_eq!(
        fs::read(d.join("from_file.csv")).unwrap(),
        fs::read(d.join("again.csv")).unwrap()
    );
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_extremal"))
        .args(["generate", "--n", "10"])
        .current_dir(dir.path())
        .env("EXTREMAL_OUT_DIR", "runs/today")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("runs/today/data.csv").exists());
    assert!(dir.path().join("runs/today/data.report.json").exists());
}

#[test]
fn train_default_schedule_reaches_noise_floor() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "generate", "--n", "1000", "--seed", "42", "--out", "data.csv",
        ],
    );
    ok(
        d,
        &[
            "train",
            "--data",
            "data.csv",
            "--out",
            "model.json",
            "--seed",
            "7",
        ],
    );
    let net = load_model::<f64>(d.join("model.json")).unwrap();
    assert_eq!(net.input_dim(), 4);
    let report = json(&d.join("model.report.json"));
    let mse = report["train"]["validation_mse"].as_f64().unwrap();
    assert!(mse <= 0.01, "validation MSE {mse}");
    assert_eq!(report["manifest"]["training"]["epochs"], 500);
    assert_eq!(
        report["train"]["loss_history"].as_array().unwrap().len(),
        500
    );
}

#[test]
fn train_missing_data_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = extremal(dir.path(), &["train", "--data", "absent.csv"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("absent.csv"));
}

#[test]
fn train_zero_epochs_keeps_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--n", "100", "--out", "data.csv"]);
    let out = ok(
        d,
        &[
            "train", "--data", "data.csv", "--epochs", "0", "--seed", "11", "--out", "m.json",
        ],
    );
    assert!(stderr(&out).contains("warning"));
    let trained = load_model::<f64>(d.join("m.json")).unwrap();
    let init = init_network::<f64>(&default_architecture(), 4, 11).unwrap();
    assert_eq!(trained.checksum(), init.checksum());
}

#[test]
fn extremize_report_trajectory_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_fixture(d);
    let model_before = fs::read(d.join("model.json")).unwrap();
    let data_before = fs::read(d.join("data.csv")).unwrap();
    let args = [
        "extremize",
        "--model",
        "model.json",
        "--data",
        "data.csv",
        "--restarts",
        "3",
        "--seed",
        "3",
        "--max-iters",
        "3000",
        "--out",
        "report.json",
        "--trajectory",
        "traj.csv",
    ];
    ok(d, &args);
    assert_eq!(fs::read(d.join("model.json")).unwrap(), model_before);
    assert_eq!(fs::read(d.join("data.csv")).unwrap(), data_before);

    let report = json(&d.join("report.json"));
    let result = &report["result"];
    assert_eq!(result["x_hat"].as_array().unwrap().len(), 4);
    assert!(result["y_hat"].is_f64());
    assert_eq!(result["restart_results"].as_array().unwrap().len(), 3);
    assert!(report["manifest"]["constraints"]["terms"][0]["mu"].is_array());

    let traj = fs::read_to_string(d.join("traj.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("iter,x0,x1,x2,x3,y,loss"));
    let iters: Vec<usize> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(iters.len() > 1 && iters.windows(2).all(|w| w[0] < w[1]));

    let first = fs::read(d.join("report.json")).unwrap();
    ok(
        d,
        &[
            "extremize",
            "--config",
            "report.json",
            "--out",
            "again.json",
            "--trajectory",
            "again.csv",
        ],
    );
    let again = json(&d.join("again.json"));
    assert_eq!(again["result"], report["result"]);
    assert_eq!(
        fs::read(d.join("traj.csv")).unwrap(),
        fs::read(d.join("again.csv")).unwrap()
    );
    ok(d, &args);
    assert_eq!(fs::read(d.join("report.json")).unwrap(), first);
}

#[test]
fn extremize_rejects_unknown_term_type() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_fixture(d);
    fs::write(
        d.join("c.json"),
        r#"{"terms": [{"type": "maximize_happiness"}]}"#,
    )
    .unwrap();
    let out = extremal(
        d,
        &[
            "extremize",
            "--model",
            "model.json",
            "--data",
            "data.csv",
            "--constraints",
            "c.json",
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("maximize_happiness"));
}

#[test]
fn extremize_without_data_needs_explicit_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_fixture(d);
    let out = extremal(d, &["extremize", "--model", "model.json"]);
    assert_eq!(code(&out), 1);
    fs::write(
        d.join("c.json"),
        r#"{"terms": [{"type": "extrapolation", "mu": [0,0,0,0], "sigma": [0.5,0.5,0.5,0.5]},
                      {"type": "output_positive_max"}]}"#,
    )
    .unwrap();
    ok(
        d,
        &[
            "extremize",
            "--model",
            "model.json",
            "--constraints",
            "c.json",
            "--max-iters",
            "500",
        ],
    );
    assert!(d.join("extremal_report.json").exists());
}

#[test]
fn plot_files_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_fixture(d);
    ok(
        d,
        &[
            "plot",
            "--data",
            "data.csv",
            "--model",
            "model.json",
            "--out-dir",
            "a",
        ],
    );
    ok(
        d,
        &[
            "plot",
            "--data",
            "data.csv",
            "--model",
            "model.json",
            "--out-dir",
            "b",
        ],
    );
    let mut names: Vec<String> = fs::read_dir(d.join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "feature_x0.svg",
            "feature_x1.svg",
            "feature_x2.svg",
            "feature_x3.svg",
            "loss_curve.svg"
        ]
    );
    for n in &names {
        let a = fs::read_to_string(d.join("a").join(n)).unwrap();
        assert_eq!(a, fs::read_to_string(d.join("b").join(n)).unwrap());
        assert!(a.starts_with("<svg") && !a.contains("NaN"));
    }
    let feature = fs::read_to_string(d.join("a/feature_x2.svg")).unwrap();
    assert_eq!(feature.matches("<circle").count(), 200);
    assert!(feature.contains("<polyline"));

    let out = ok(d, &["plot", "--data", "data.csv", "--out-dir", "c"]);
    assert!(stderr(&out).contains("warning"));
    assert_eq!(fs::read_dir(d.join("c")).unwrap().count(), 4);
    assert!(!fs::read_to_string(d.join("c/feature_x0.svg"))
        .unwrap()
        .contains("<polyline"));
}

#[test]
fn reproduce_quick_profile() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let start = Instant::now();
    let out = extremal(d, &["reproduce", "--quick", "--out", "table.csv"]);
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(
        code(&out),
        0,
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        stderr(&out)
    );
    assert!(elapsed < 30.0, "{elapsed:.1}s");
    let table = fs::read_to_string(d.join("table.csv")).unwrap();
    assert_eq!(
        table.lines().next(),
        Some("quantity,reference,reproduced,band_lo,band_hi,pass")
    );
    assert_eq!(table.lines().count(), 16);
    let report = json(&d.join("table.report.json"));
    assert_eq!(
        report["manifest"]["reproduce"]["seeds"],
        serde_json::json!([0, 1, 2, 3, 4])
    );
    assert_eq!(report["outcomes"].as_array().unwrap().len(), 5);
}
