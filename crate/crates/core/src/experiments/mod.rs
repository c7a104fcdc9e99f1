//! Configuration-driven experiment runner, presets, CSV output and plots.

pub mod config;
pub mod output;
pub mod plot;

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};
use thiserror::Error;

pub use config::{ExperimentConfig, ExperimentKind, Frame, ModelSpec};
pub use plot::{plot, plot_response, plot_space_time, plot_spectrum, PlotError, PlotKind, PlotStyle};

use crate::dynamics::{self, step_response, IntegrateOptions, StopRule};
use crate::energy;
use crate::frequency;
use crate::par::{self, Execution};
use crate::planar::{
    equilibrium_state, formation_error, heading, hexagon_flock, integrate_planar, sample_masses,
    PlanarLeaderProgram, PlanarOptions,
};
use crate::stability::{self, ClassifierOptions, FlockFamily};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config { .. } => EXIT_CONFIG,
            ExperimentError::Numeric(_) => EXIT_NUMERIC,
            ExperimentError::Io { .. } => EXIT_IO,
        }
    }

    pub(crate) fn io(path: &Path, e: impl Display) -> Self {
        ExperimentError::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    pub(crate) fn in_file(self, path: &Path) -> Self {
        match self {
            ExperimentError::Config { line, message } => {
                ExperimentError::Config { line, message: format!("{}: {message}", path.display()) }
            }
            other => other,
        }
    }
}

fn numeric(e: impl Display) -> ExperimentError {
    ExperimentError::Numeric(e.to_string())
}

/// What a run produced: files relative to its output directory and the
/// headline numbers also written to the manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub kind: ExperimentKind,
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub results: Map<String, Value>,
}

impl RunSummary {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.results.get(key).and_then(Value::as_f64)
    }
}

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Outputs<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn plot(&mut self, csv: &Path, name: &str, kind: PlotKind, style: &PlotStyle) -> Result<(), ExperimentError> {
        let text = std::fs::read_to_string(csv).map_err(|e| ExperimentError::io(csv, e))?;
        let svg = plot::plot(kind, &text, style).map_err(numeric)?;
        let path = self.path(name);
        std::fs::write(&path, svg).map_err(|e| ExperimentError::io(&path, e))
    }
}

/// Runs one experiment into `out_dir` (created if needed) and writes
/// `manifest.json` next to its artifacts.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path, exec: Execution) -> Result<RunSummary, ExperimentError> {
    cfg.validate("")?;
    std::fs::create_dir_all(out_dir).map_err(|e| ExperimentError::io(out_dir, e))?;
    let started = Instant::now();
    let mut out = Outputs { dir: out_dir, files: Vec::new() };
    let mut results = Map::new();
    let title = |s: String| PlotStyle { title: Some(s), ..PlotStyle::default() };

    match cfg.kind {
        ExperimentKind::StepResponse | ExperimentKind::Ledger => {
            let m = cfg.build_model()?;
            let t = &cfg.time;
            let opts = IntegrateOptions::new(t.dt, t.horizon)
                .with_stop(StopRule::Horizon)
                .with_record_interval(t.record_interval);
            let traj = step_response(&m, t.v, &opts).map_err(numeric)?;
            results.insert("max_abs_zn".into(), json!(traj.max_abs_zn));
            results.insert("t_max_abs_zn".into(), json!(traj.t_max_abs_zn));
            results.insert("max_abs_z_any".into(), json!(traj.max_abs_z_any));
            if cfg.kind == ExperimentKind::StepResponse {
                let csv = out.path("trajectory.csv");
                output::write_trajectory(&csv, &traj, &m, t.frame, t.v)?;
                let spacing = match t.frame {
                    Frame::Leader => Some(1.0),
                    Frame::Lab => None,
                };
                let style = PlotStyle { offset_spacing: spacing, ..title(model_title(cfg)) };
                out.plot(&csv, "spacetime.svg", PlotKind::SpaceTime, &style)?;
            } else {
                let series = energy::ledger(&traj, &m).map_err(numeric)?;
                results.insert("relative_residual".into(), json!(series.relative_residual()));
                results.insert("max_abs_residual".into(), json!(series.max_abs_residual()));
                output::write_ledger(&out.path("ledger.csv"), &series)?;
            }
        }
        ExperimentKind::FrequencySweep => {
            let m = cfg.build_model()?;
            let s = &cfg.sweep;
            let grid = if s.adaptive {
                frequency::adaptive_grid(&m, s.omega_min, s.omega_max, s.points).map_err(numeric)?
            } else {
                frequency::log_grid(s.omega_min, s.omega_max, s.points)
            };
            let table = frequency::sweep(&m, &grid, exec).map_err(numeric)?;
            let tail = table.agent_gains(m.n_agents() - 1);
            let (w, g) = table
                .omegas
                .iter()
                .zip(&tail)
                .filter_map(|(w, g)| g.map(|g| (*w, g)))
                .fold((f64::NAN, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
            results.insert("grid_points".into(), json!(grid.len()));
            results.insert("grid_peak_gain".into(), json!(g));
            results.insert("grid_peak_omega".into(), json!(w));
            results.insert("failed_points".into(), json!(table.failures.len()));
            let csv = out.path("response.csv");
            output::write_response(&csv, &table, m.n_agents())?;
            out.plot(&csv, "response.svg", PlotKind::Response, &title(model_title(cfg)))?;
        }
        ExperimentKind::Spectrum => {
            let m = cfg.build_model()?;
            let rep = dynamics::model_spectrum(&m, cfg.spectrum.near_zero_threshold).map_err(numeric)?;
            results.insert("spectral_abscissa".into(), json!(rep.spectral_abscissa));
            results.insert("min_abs_real".into(), json!(rep.min_abs_real));
            results.insert("min_modulus".into(), json!(rep.min_modulus));
            results.insert("near_zero_count".into(), json!(rep.near_zero_count));
            let csv = out.path("spectrum.csv");
            output::write_spectrum(&csv, &rep.eigenvalues)?;
            out.plot(&csv, "spectrum.svg", PlotKind::Spectrum, &title(model_title(cfg)))?;
        }
        ExperimentKind::Classify => {
            let c = &cfg.classify;
            let Some(ModelSpec::Standard { rho, r, f, g, .. }) = cfg.model.clone() else {
                unreachable!("validated above");
            };
            let fam = FlockFamily::standard(rho, r.unwrap_or(rho), f, g, &c.n_list).map_err(numeric)?;
            let opts = ClassifierOptions {
                omega_min: c.omega_min,
                omega_max: c.omega_max,
                grid_points: c.points,
                refine_iters: c.refine_iters,
                impulse: IntegrateOptions::new(c.dt, c.horizon)
                    .with_stop(StopRule::impulse_default())
                    .with_record_interval(c.horizon),
                slope_threshold: c.threshold,
                exec,
            };
            let report = stability::classify(&fam, c.v, &opts).map_err(numeric)?;
            results.insert("harmonic_slope".into(), json!(report.harmonic.slope));
            results.insert("impulse_slope".into(), json!(report.impulse.slope));
            results.insert("verdict".into(), json!(report.verdict.to_string()));
            output::write_classify(&out.path("classify.csv"), &report)?;
        }
        ExperimentKind::PlanarTurn => run_planar_turn(cfg, &mut out, &mut results)?,
    }

    let manifest = json!({
        "flocklab_version": env!("CARGO_PKG_VERSION"),
        "schema_version": cfg.schema_version,
        "kind": cfg.kind.name(),
        "seed": cfg.seed,
        "execution": if exec.is_parallel() { "parallel" } else { "sequential" },
        "threads": par::threads(exec),
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "outputs": out.files,
        "results": Value::Object(results.clone()),
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    let mpath = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&mpath, text + "\n").map_err(|e| ExperimentError::io(&mpath, e))?;
    log::info!("{} finished in {:?} -> {}", cfg.kind.name(), started.elapsed(), out_dir.display());
    Ok(RunSummary { kind: cfg.kind, output_dir: out_dir.to_path_buf(), files: out.files, results })
}

fn model_title(cfg: &ExperimentConfig) -> String {
    match &cfg.model {
        Some(ModelSpec::Standard { n, rho, r, f, g }) => {
            format!("N = {n}, rho = {rho}, r = {}, f = {f}, g = {g}", r.unwrap_or(*rho))
        }
        Some(ModelSpec::Custom(_)) => "custom flock".into(),
        None => String::new(),
    }
}

fn run_planar_turn(
    cfg: &ExperimentConfig,
    out: &mut Outputs<'_>,
    results: &mut Map<String, Value>,
) -> Result<(), ExperimentError> {
    let p = &cfg.planar;
    let mut m = hexagon_flock(p.spacing, p.f, p.g)
        .and_then(|m| m.with_cruise(p.alpha, p.cruise_speed))
        .and_then(|m| m.with_epsilon_v(p.epsilon_v))
        .map_err(|e| ExperimentError::Config { line: None, message: e.to_string() })?;
    if p.mass_delta > 0.0 {
        let masses = sample_masses(m.n_agents(), p.mass_delta, cfg.seed).map_err(numeric)?;
        m = m.with_masses(masses).map_err(numeric)?;
    }
    let init = equilibrium_state(&m, 0.0, p.cruise_speed).map_err(numeric)?;
    let program = PlanarLeaderProgram::HeadingRamp {
        origin: [init.positions[0].x, init.positions[0].y],
        speed: p.cruise_speed,
        heading: 0.0,
        turn: p.turn_deg.to_radians(),
        t_start: p.t_start,
        duration: p.duration,
    };
    let opts = PlanarOptions::new(p.dt, p.horizon)
        .with_record_interval(p.record_interval)
        .with_snapshots(p.snapshots.clone());
    let traj = integrate_planar(&m, &init, std::slice::from_ref(&program), &opts).map_err(numeric)?;

    let fpath = out.path("formation.csv");
    let mut w = csv::Writer::from_path(&fpath).map_err(|e| ExperimentError::io(&fpath, e))?;
    w.write_record(["t", "formation_error", "mean_heading", "leader_heading"])
        .map_err(|e| ExperimentError::io(&fpath, e))?;
    let mut peak: f64 = 0.0;
    let mut last = (0.0, 0.0);
    for s in &traj.states {
        let err = formation_error(s, &m).map_err(numeric)?;
        let mh = heading(s.mean_velocity(), m.epsilon_v()).map_err(numeric)?;
        peak = peak.max(err);
        last = (err, mh);
        w.write_record([format!("{}", s.t), format!("{err}"), format!("{mh}"), format!("{}", program.heading_at(s.t))])
            .map_err(|e| ExperimentError::io(&fpath, e))?;
    }
    w.flush().map_err(|e| ExperimentError::io(&fpath, e))?;
    output::write_planar(&out.path("planar.csv"), &traj)?;
    for (i, s) in traj.snapshots.iter().enumerate() {
        output::write_snapshot(&out.path(&format!("snapshot_{i:02}.csv")), s)?;
    }
    results.insert("peak_formation_error".into(), json!(peak));
    results.insert("final_formation_error".into(), json!(last.0));
    results.insert("final_mean_heading".into(), json!(last.1));
    results.insert("final_leader_heading".into(), json!(program.heading_at(traj.final_state().t)));
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Turn,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Turn => "turn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Preset::Fig2, Preset::Fig3, Preset::Fig4, Preset::Turn].into_iter().find(|p| p.name() == s)
    }
}

pub const PRESET_RHOS: [f64; 3] = [0.45, 0.5, 0.55];
pub const PRESET_N: usize = 100;

fn standard_model(n: usize, rho: f64) -> ModelSpec {
    ModelSpec::Standard { n, rho, r: None, f: -1.0, g: -2.0 }
}

fn base_config(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg: ExperimentConfig =
        toml::from_str(&format!("kind = \"{}\"", kind.name())).expect("minimal config parses");
    cfg.output = None;
    cfg
}

/// Sub-experiments of a preset, keyed by subdirectory name. `scale`
/// overrides the follower count `N` of the linear presets; the planar turn
/// has a fixed seven-agent formation and ignores it.
pub fn preset_configs(preset: Preset, scale: Option<usize>) -> Vec<(String, ExperimentConfig)> {
    let n = scale.unwrap_or(PRESET_N);
    let linear = |kind: ExperimentKind, tweak: &dyn Fn(&mut ExperimentConfig)| -> Vec<(String, ExperimentConfig)> {
        PRESET_RHOS
            .iter()
            .map(|&rho| {
                let mut cfg = base_config(kind);
                cfg.model = Some(standard_model(n, rho));
                tweak(&mut cfg);
                (format!("rho_{rho}"), cfg)
            })
            .collect()
    };
    match preset {
        Preset::Fig2 => linear(ExperimentKind::StepResponse, &|c| {
            c.time.v = 0.1;
            c.time.dt = 0.01;
            c.time.horizon = 1000.0;
            c.time.record_interval = 0.5;
            c.time.frame = Frame::Lab;
        }),
        Preset::Fig3 => linear(ExperimentKind::FrequencySweep, &|c| c.sweep.adaptive = true),
        Preset::Fig4 => linear(ExperimentKind::Spectrum, &|_| {}),
        Preset::Turn => vec![("hexagon".into(), base_config(ExperimentKind::PlanarTurn))],
    }
}

/// Runs every sub-experiment of `preset` into `out_dir/<preset>/<name>/`.
pub fn run_preset(
    preset: Preset,
    out_dir: &Path,
    scale: Option<usize>,
    exec: Execution,
) -> Result<Vec<(String, RunSummary)>, ExperimentError> {
    if scale == Some(0) {
        return Err(ExperimentError::Config { line: None, message: "--scale must be at least 1".into() });
    }
    let root = out_dir.join(preset.name());
    preset_configs(preset, scale)
        .into_iter()
        .map(|(name, cfg)| {
            let dir = root.join(&name);
            std::fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
            std::fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(|e| ExperimentError::io(&dir, e))?;
            run(&cfg, &dir, exec).map(|s| (name, s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(ExperimentError::Config { line: Some(3), message: "x".into() }.exit_code(), 2);
        assert_eq!(ExperimentError::Numeric("x".into()).exit_code(), 3);
        let e = ExperimentError::Config { line: Some(3), message: "bad".into() };
        assert_eq!(e.to_string(), "config error at line 3: bad");
    }

    #[test]
    fn presets_expand_to_valid_configs() {
        for p in [Preset::Fig2, Preset::Fig3, Preset::Fig4, Preset::Turn] {
            let cfgs = preset_configs(p, Some(5));
            assert!(!cfgs.is_empty());
            for (_, c) in cfgs {
                c.validate("").unwrap();
                assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
            }
        }
        assert_eq!(Preset::parse("fig3"), Some(Preset::Fig3));
        assert_eq!(Preset::parse("fig5"), None);
    }
}
