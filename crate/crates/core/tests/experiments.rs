use std::path::Path;
use std::process::Command;

use flocklab::experiments::{self, ExperimentConfig, ExperimentError, Preset};
use flocklab::par::Execution;

const STEP: &str = r#"schema_version = 1
kind = "step-response"
seed = 7

[model]
type = "standard"
n = 6
rho = 0.45

[time]
v = 0.1
dt = 0.01
horizon = 20.0
record_interval = 0.5
"#;

fn flocklab(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_flocklab")).args(args).current_dir(dir).output().unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn runs_are_deterministic_across_execution_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(STEP).unwrap();
    experiments::run(&cfg, &tmp.path().join("a"), Execution::Parallel).unwrap();
    experiments::run(&cfg, &tmp.path().join("b"), Execution::Sequential).unwrap();
    for f in ["trajectory.csv", "spacetime.svg"] {
        assert_eq!(read(tmp.path().join("a").join(f)), read(tmp.path().join("b").join(f)), "{f}");
    }
}

#[test]
fn manifest_records_config_and_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(STEP).unwrap();
    let summary = experiments::run(&cfg, tmp.path(), Execution::Sequential).unwrap();
    let m: serde_json::Value = serde_json::from_str(&read(tmp.path().join("manifest.json"))).unwrap();
    for key in ["flocklab_version", "schema_version", "kind", "seed", "execution", "threads", "config", "outputs", "results"] {
        assert!(m.get(key).is_some(), "manifest lacks {key}");
    }
    assert_eq!(m["seed"], 7);
    assert_eq!(m["execution"], "sequential");
    assert_eq!(m["config"]["model"]["rho"], 0.45);
    assert_eq!(m["outputs"], serde_json::json!(summary.files));
    assert!(summary.metric("max_abs_zn").unwrap() > 0.0);
}

#[test]
fn trajectory_csv_has_header_and_rows() {
    let tmp = tempfile::tempdir().unwrap();
    experiments::run(&ExperimentConfig::from_toml(STEP).unwrap(), tmp.path(), Execution::Sequential).unwrap();
    let text = read(tmp.path().join("trajectory.csv"));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 2 * 7);
    assert_eq!(header[0], "t");
    assert_eq!(lines.count(), 41);
}

#[test]
fn config_errors_point_at_the_offending_line() {
    let bad = STEP.replace("rho = 0.45", "rho = 1.5");
    match ExperimentConfig::from_toml(&bad) {
        Err(ExperimentError::Config { line, message }) => {
            assert_eq!(line, Some(8));
            assert!(message.contains("rho"), "{message}");
        }
        other => panic!("expected config error, got {other:?}"),
    }
    let unknown = STEP.replace("record_interval = 0.5", "record_interval = 0.5\nbogus = 1");
    let e = ExperimentConfig::from_toml(&unknown).unwrap_err();
    assert!(matches!(e, ExperimentError::Config { line: Some(15), .. }), "{e:?}");
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("ok.toml"), STEP).unwrap();
    std::fs::write(dir.join("gain.toml"), STEP.replace("rho = 0.45", "rho = 0.45\nf = 1.0")).unwrap();

    let ok = flocklab(&["run", "ok.toml", "--out", "out"], dir);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(dir.join("out/trajectory.csv").exists());

    let gain = flocklab(&["run", "gain.toml"], dir);
    assert_eq!(gain.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&gain.stderr).contains("line 9"));

    // An unreadable config is a config error.
    assert_eq!(flocklab(&["run", "missing.toml"], dir).status.code(), Some(2));

    let threads = Command::new(env!("CARGO_BIN_EXE_flocklab"))
        .args(["run", "ok.toml", "--out", "o2"])
        .env("FLOCKLAB_THREADS", "zero")
        .current_dir(dir)
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));

    std::fs::write(dir.join("broken.csv"), "t,z0\n0,1\n1,oops\n").unwrap();
    let plot = flocklab(&["plot", "broken.csv", "--kind", "spacetime"], dir);
    assert_eq!(plot.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&plot.stderr).contains("row 3"));
}

#[test]
fn cli_plot_rerenders_run_output() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("ok.toml"), STEP).unwrap();
    assert!(flocklab(&["--sequential", "run", "ok.toml", "--out", "out"], dir).status.success());
    let plot = flocklab(
        &["plot", "out/trajectory.csv", "--kind", "spacetime", "--offset-spacing", "1", "--out", "p.svg"],
        dir,
    );
    assert!(plot.status.success());
    assert!(read(dir.join("p.svg")).starts_with("<svg"));
}

#[test]
fn small_presets_produce_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    for (preset, files) in [
        (Preset::Fig3, &["response.csv", "response.svg", "manifest.json", "config.toml"][..]),
        (Preset::Fig4, &["spectrum.csv", "spectrum.svg", "manifest.json", "config.toml"][..]),
    ] {
        let runs = experiments::run_preset(preset, tmp.path(), Some(8), Execution::Parallel).unwrap();
        assert_eq!(runs.len(), 3);
        for (sub, _) in runs {
            for f in files {
                let p = tmp.path().join(preset.name()).join(&sub).join(f);
                assert!(p.exists(), "{}", p.display());
            }
        }
    }
}
