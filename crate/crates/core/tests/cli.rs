use std::path::Path;
use std::process::Command;

fn loadcast(args: &[&str], dir: &Path) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_loadcast"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    out.status.code().unwrap_or(-1)
}

fn ok(args: &[&str], dir: &Path) {
    assert_eq!(loadcast(args, dir), 0, "{args:?}");
}

fn rmse_column(path: &Path) -> Vec<f64> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect()
}

fn prepare(dir: &Path) {
    ok(&["synth", "--out-dir", "data"], dir);
    ok(&["calibrate-nwp", "--nwp", "data/nwp.csv", "--temp", "data/temp.csv", "--output", "data/nwp_cal.csv"], dir);
    ok(&["fit-spline", "--load", "data/load.csv", "--temp", "data/temp.csv", "--output", "data/spline.txt"], dir);
}

fn forecast(dir: &Path, model: &str, out: &str) {
    let mut args = vec![
        "forecast", "--model", model, "--load", "data/load.csv", "--temp", "data/temp.csv", "--nwp", "data/nwp_cal.csv",
        "--out-dir", out,
    ];
    if model == "var-nonlin" {
        args.extend(["--spline", "data/spline.txt"]);
    }
    ok(&args, dir);
}

#[test]
fn pipeline_produces_rmse_for_every_horizon_in_model_order() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    prepare(dir);
    let mut curves = Vec::new();
    for model in ["fix-lin", "var-lin", "var-nonlin"] {
        forecast(dir, model, model);
        let eval = format!("{model}/eval");
        ok(&["evaluate", "--residuals", &format!("{model}/residuals.csv"), "--out-dir", &eval], dir);
        for f in ["rmse.csv", "acf.csv", "qq.csv", "hist.csv"] {
            assert!(dir.join(&eval).join(f).exists(), "{f}");
        }
        curves.push(rmse_column(&dir.join(&eval).join("rmse.csv")));
    }
    assert!(curves.iter().all(|c| c.len() == 42));
    let ordered = (0..42)
        .filter(|&k| curves[2][k] <= curves[1][k] && curves[1][k] <= curves[0][k])
        .count();
    assert!(ordered >= 34, "{ordered} of 42 horizons ordered");
}

#[test]
fn nonlinear_model_without_spline_is_a_model_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&["synth", "--hours", "720", "--out-dir", "data"], dir);
    let code = loadcast(
        &[
            "forecast", "--model", "var-nonlin", "--load", "data/load.csv", "--temp", "data/temp.csv", "--nwp",
            "data/nwp.csv", "--out-dir", "out",
        ],
        dir,
    );
    assert_eq!(code, 2);
    assert!(!dir.join("out").exists());
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(loadcast(&["forecast", "--unknown-flag"], tmp.path()), 1);
    assert_eq!(loadcast(&["no-such-command"], tmp.path()), 1);
    assert_eq!(loadcast(&["forecast", "--model", "cubic"], tmp.path()), 1);
}

#[test]
fn missing_input_file_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let code = loadcast(
        &["calibrate-nwp", "--nwp", "absent.csv", "--temp", "absent.csv", "--output", "x.csv"],
        tmp.path(),
    );
    assert_eq!(code, 2);
}

#[test]
fn repair_noise_and_optimize_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    prepare(dir);
    ok(&["repair", "--input", "data/load.csv", "--input", "data/temp.csv", "--nwp", "data/nwp_cal.csv", "--out-dir", "fixed"], dir);
    forecast(dir, "fix-lin", "f");
    ok(&["noise", "--residuals", "f/residuals.csv", "--grid", "0.99:0.999:0.001", "--scores", "scores.csv", "--output", "noise.csv"], dir);
    assert_eq!(rmse_column(&dir.join("scores.csv")).len(), 10);
    ok(&["evaluate", "--residuals", "f/residuals.csv", "--noise", "noise.csv", "--out-dir", "e"], dir);
    ok(
        &[
            "optimize", "--model-kind", "fix-lin", "--load", "data/load.csv", "--temp", "data/temp.csv", "--nwp",
            "data/nwp_cal.csv", "--horizons", "1,2", "--jobs", "2", "--output", "params.csv",
        ],
        dir,
    );
    let params = std::fs::read_to_string(dir.join("params.csv")).unwrap();
    assert_eq!(params.lines().count(), 3);
    ok(&["forecast", "--model", "fix-lin", "--params", "params.csv", "--load", "data/load.csv", "--temp", "data/temp.csv", "--nwp", "data/nwp_cal.csv", "--out-dir", "g"], dir);
}
