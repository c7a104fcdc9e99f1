//! TOML experiment configuration, schema version 1.
//!
//! ```toml
//! schema_version = 1
//! kind = "step-response"   # frequency-sweep | spectrum | classify | ledger | planar-turn
//! output = "runs/chain"    # optional, the CLI may override
//! seed = 0
//!
//! [model]                  # not used by planar-turn
//! type = "standard"        # or "custom"
//! n = 100
//! rho = 0.45
//! r = 0.45                 # defaults to rho
//! f = -1.0
//! g = -2.0
//!
//! [time]                   # step-response, ledger
//! v = 0.1
//! dt = 0.01
//! horizon = 1000.0
//! record_interval = 0.5
//! frame = "lab"            # or "leader"
//! ```
//!
//! Custom models list directed weighted edges `[agent, neighbor, weight]`:
//!
//! ```toml
//! [model]
//! type = "custom"
//! leaders = [0]
//! f = -1.0
//! g = -2.0
//! rho_edges = [[1, 0, 0.5], [1, 2, 0.5], [2, 1, 1.0]]
//! r_edges = [[1, 0, 0.5], [1, 2, 0.5], [2, 1, 1.0]]
//! offsets = [0.0, -1.0, -2.0]   # optional
//! ```
//!
//! or point at a file holding that table with `file = "model.toml"`
//! (resolved relative to the config file).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::frequency;
use crate::model::{LinearFlockModel, StandardExampleParams};
use crate::stability;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    StepResponse,
    FrequencySweep,
    Spectrum,
    Classify,
    Ledger,
    PlanarTurn,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::StepResponse => "step-response",
            ExperimentKind::FrequencySweep => "frequency-sweep",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Classify => "classify",
            ExperimentKind::Ledger => "ledger",
            ExperimentKind::PlanarTurn => "planar-turn",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub time: TimeControls,
    #[serde(default)]
    pub sweep: SweepControls,
    #[serde(default)]
    pub spectrum: SpectrumControls,
    #[serde(default)]
    pub classify: ClassifyControls,
    #[serde(default)]
    pub planar: PlanarControls,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Standard {
        n: usize,
        rho: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<f64>,
        #[serde(default = "default_f")]
        f: f64,
        #[serde(default = "default_g")]
        g: f64,
    },
    Custom(CustomModel),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub leaders: Vec<usize>,
    #[serde(default = "default_f")]
    pub f: f64,
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default)]
    pub rho_edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub r_edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<f64>>,
}

fn default_f() -> f64 {
    -1.0
}

fn default_g() -> f64 {
    -2.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    /// Deviations `z` in the frame moving with the leader.
    #[default]
    Leader,
    /// Positions `z + h + v t` as seen by a stationary observer.
    Lab,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeControls {
    pub v: f64,
    pub dt: f64,
    pub horizon: f64,
    pub record_interval: f64,
    pub frame: Frame,
}

impl Default for TimeControls {
    fn default() -> Self {
        Self { v: 0.1, dt: 0.01, horizon: 100.0, record_interval: 0.1, frame: Frame::Leader }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepControls {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    /// Extend the grid below the slowest mode and seed it at resonances.
    pub adaptive: bool,
}

impl Default for SweepControls {
    fn default() -> Self {
        Self {
            omega_min: frequency::DEFAULT_OMEGA_MIN,
            omega_max: frequency::DEFAULT_OMEGA_MAX,
            points: frequency::DEFAULT_GRID_POINTS,
            adaptive: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumControls {
    pub near_zero_threshold: f64,
}

impl Default for SpectrumControls {
    fn default() -> Self {
        Self { near_zero_threshold: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyControls {
    pub n_list: Vec<usize>,
    pub v: f64,
    pub threshold: f64,
    pub dt: f64,
    pub horizon: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    pub refine_iters: usize,
}

impl Default for ClassifyControls {
    fn default() -> Self {
        Self {
            n_list: stability::DEFAULT_N_LIST.to_vec(),
            v: 0.1,
            threshold: stability::DEFAULT_SLOPE_THRESHOLD,
            dt: stability::IMPULSE_DT,
            horizon: crate::dynamics::DEFAULT_HORIZON_CAP,
            omega_min: frequency::DEFAULT_OMEGA_MIN,
            omega_max: frequency::DEFAULT_OMEGA_MAX,
            points: frequency::DEFAULT_GRID_POINTS,
            refine_iters: frequency::DEFAULT_REFINE_ITERS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanarControls {
    pub spacing: f64,
    pub f: f64,
    pub g: f64,
    pub alpha: f64,
    pub cruise_speed: f64,
    pub epsilon_v: f64,
    /// Half-width of the uniform mass distribution around 1 (0 = unit masses).
    pub mass_delta: f64,
    pub turn_deg: f64,
    pub t_start: f64,
    pub duration: f64,
    pub dt: f64,
    pub horizon: f64,
    pub record_interval: f64,
    pub snapshots: Vec<f64>,
}

impl Default for PlanarControls {
    fn default() -> Self {
        Self {
            spacing: 1.0,
            f: -1.0,
            g: -2.0,
            alpha: -0.5,
            cruise_speed: 1.0,
            epsilon_v: crate::planar::DEFAULT_EPSILON_V,
            mass_delta: 0.0,
            turn_deg: 90.0,
            t_start: 10.0,
            duration: 200.0,
            dt: 0.01,
            horizon: 400.0,
            record_interval: 1.0,
            snapshots: vec![0.0, 60.0, 110.0, 160.0, 210.0, 400.0],
        }
    }
}

/// 1-based line of `key` inside `[section]` (top level when `section` is
/// empty), or of the section header when the key is absent.
pub fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header_line = None;
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if current == section {
                header_line = Some(i + 1);
            }
            continue;
        }
        if current == section {
            let lhs = t.split('=').next().unwrap_or("").trim();
            if !key.is_empty() && lhs == key {
                return Some(i + 1);
            }
        }
    }
    header_line
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the offending line when known.
    pub fn from_toml(src: &str) -> Result<Self, ExperimentError> {
        let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| ExperimentError::Config {
            line: e.span().map(|s| line_of_offset(src, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate(src)?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ExperimentError> {
        let src = std::fs::read_to_string(path).map_err(|e| ExperimentError::Config {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let mut cfg = Self::from_toml(&src).map_err(|e| e.in_file(path))?;
        if let Some(ModelSpec::Custom(c)) = &mut cfg.model {
            if let Some(file) = &c.file {
                let resolved = path.parent().unwrap_or(Path::new(".")).join(file);
                *c = load_custom(&resolved)?;
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Checks kind-specific requirements and numeric ranges. `src` is only
    /// used to anchor messages.
    pub fn validate(&self, src: &str) -> Result<(), ExperimentError> {
        let err = |section: &str, key: &str, message: String| ExperimentError::Config {
            line: locate(src, section, key),
            message,
        };
        let positive = |section: &str, key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(err(section, key, format!("{section}.{key} must be positive and finite, got {v}")))
            }
        };

        if self.schema_version != SCHEMA_VERSION {
            return Err(err(
                "",
                "schema_version",
                format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.kind != ExperimentKind::PlanarTurn {
            match &self.model {
                None => return Err(err("", "kind", format!("kind {} needs a [model] section", self.kind.name()))),
                Some(ModelSpec::Standard { n, rho, r, f, g }) => {
                    if *n == 0 {
                        return Err(err("model", "n", "model.n must be at least 1".into()));
                    }
                    for (key, w) in [("f", *f), ("g", *g)] {
                        if !(w < 0.0 && w.is_finite()) {
                            return Err(err("model", key, format!("model.{key} must be negative and finite, got {w}")));
                        }
                    }
                    for (key, w) in [("rho", Some(*rho)), ("r", *r)] {
                        if let Some(w) = w {
                            if !(w > 0.0 && w < 1.0) {
                                return Err(err("model", key, format!("model.{key} must lie in (0, 1), got {w}")));
                            }
                        }
                    }
                }
                Some(ModelSpec::Custom(c)) => {
                    if c.file.is_none() && c.rho_edges.is_empty() {
                        return Err(err("model", "rho_edges", "custom model needs rho_edges or file".into()));
                    }
                }
            }
        }
        match self.kind {
            ExperimentKind::StepResponse | ExperimentKind::Ledger => {
                positive("time", "dt", self.time.dt)?;
                positive("time", "horizon", self.time.horizon)?;
                positive("time", "record_interval", self.time.record_interval)?;
                if !self.time.v.is_finite() {
                    return Err(err("time", "v", "time.v must be finite".into()));
                }
            }
            ExperimentKind::FrequencySweep => {
                positive("sweep", "omega_min", self.sweep.omega_min)?;
                if !(self.sweep.omega_max > self.sweep.omega_min && self.sweep.omega_max.is_finite()) {
                    return Err(err("sweep", "omega_max", "sweep.omega_max must exceed omega_min".into()));
                }
                if self.sweep.points < 2 {
                    return Err(err("sweep", "points", "sweep.points must be at least 2".into()));
                }
            }
            ExperimentKind::Spectrum => {
                positive("spectrum", "near_zero_threshold", self.spectrum.near_zero_threshold)?;
            }
            ExperimentKind::Classify => {
                let c = &self.classify;
                if !matches!(self.model, Some(ModelSpec::Standard { .. })) {
                    return Err(err("model", "type", "classify runs over standard-example families".into()));
                }
                if c.n_list.len() < 3 || c.n_list.windows(2).any(|w| w[1] <= w[0]) || c.n_list[0] == 0 {
                    return Err(err(
                        "classify",
                        "n_list",
                        "classify.n_list needs at least 3 strictly increasing positive sizes".into(),
                    ));
                }
                positive("classify", "threshold", c.threshold)?;
                positive("classify", "dt", c.dt)?;
                positive("classify", "horizon", c.horizon)?;
                positive("classify", "omega_min", c.omega_min)?;
                if !(c.omega_max > c.omega_min) {
                    return Err(err("classify", "omega_max", "classify.omega_max must exceed omega_min".into()));
                }
                if c.points < 2 {
                    return Err(err("classify", "points", "classify.points must be at least 2".into()));
                }
            }
            ExperimentKind::PlanarTurn => {
                let p = &self.planar;
                positive("planar", "spacing", p.spacing)?;
                positive("planar", "dt", p.dt)?;
                positive("planar", "horizon", p.horizon)?;
                positive("planar", "record_interval", p.record_interval)?;
                positive("planar", "cruise_speed", p.cruise_speed)?;
                positive("planar", "epsilon_v", p.epsilon_v)?;
                if p.alpha > 0.0 {
                    return Err(err("planar", "alpha", "planar.alpha must be <= 0".into()));
                }
                if !(0.0..1.0).contains(&p.mass_delta) {
                    return Err(err("planar", "mass_delta", "planar.mass_delta must lie in [0, 1)".into()));
                }
                if p.duration < 0.0 || p.t_start < 0.0 {
                    return Err(err("planar", "duration", "planar.t_start and duration must be >= 0".into()));
                }
            }
        }
        Ok(())
    }

    /// Builds the linear model described by `[model]`.
    pub fn build_model(&self) -> Result<LinearFlockModel, ExperimentError> {
        let spec = self.model.as_ref().ok_or_else(|| ExperimentError::Config {
            line: None,
            message: "missing [model] section".into(),
        })?;
        let built = match spec {
            ModelSpec::Standard { n, rho, r, f, g } => {
                LinearFlockModel::standard(&StandardExampleParams::new(*n, *rho, r.unwrap_or(*rho), *f, *g))
            }
            ModelSpec::Custom(c) => {
                let n = c
                    .rho_edges
                    .iter()
                    .chain(&c.r_edges)
                    .flat_map(|&(k, i, _)| [k, i])
                    .chain(c.leaders.iter().copied())
                    .max()
                    .map_or(0, |m| m + 1);
                let n = c.offsets.as_ref().map_or(n, |h| h.len().max(n));
                let rows = |edges: &[(usize, usize, f64)]| {
                    let mut rows = vec![Vec::new(); n];
                    for &(k, i, w) in edges {
                        rows[k].push((i, w));
                    }
                    rows
                };
                LinearFlockModel::custom(&rows(&c.rho_edges), &rows(&c.r_edges), &c.leaders, c.f, c.g, c.offsets.clone())
            }
        };
        built.map_err(|e| ExperimentError::Config { line: None, message: format!("model: {e}") })
    }
}

fn load_custom(path: &Path) -> Result<CustomModel, ExperimentError> {
    let src = std::fs::read_to_string(path).map_err(|e| ExperimentError::Config {
        line: None,
        message: format!("cannot read model file {}: {e}", path.display()),
    })?;
    let c: CustomModel = toml::from_str(&src).map_err(|e| {
        ExperimentError::Config { line: e.span().map(|s| line_of_offset(&src, s.start)), message: e.message().to_string() }
            .in_file(path)
    })?;
    if c.file.is_some() {
        return Err(ExperimentError::Config { line: None, message: "model files cannot nest".into() }.in_file(path));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "kind = \"step-response\"\n[model]\ntype = \"standard\"\nn = 5\nrho = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.time, TimeControls::default());
        assert_eq!(cfg.schema_version, 1);
        let m = cfg.build_model().unwrap();
        assert_eq!(m.n_agents(), 6);
        assert_eq!((m.f(), m.g()), (-1.0, -2.0));
    }

    #[test]
    fn round_trip_through_toml() {
        let src = "kind = \"classify\"\nseed = 3\n[model]\ntype = \"standard\"\nn = 5\nrho = 0.45\n[classify]\nn_list = [5, 10, 20]\n";
        let cfg = ExperimentConfig::from_toml(src).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn errors_point_at_lines() {
        let src = "kind = \"step-response\"\n[model]\ntype = \"standard\"\nn = 5\nrho = 0.5\n[time]\ndt = -0.1\n";
        match ExperimentConfig::from_toml(src) {
            Err(ExperimentError::Config { line: Some(7), .. }) => {}
            other => panic!("{other:?}"),
        }
        let typo = "kind = \"spectrum\"\n[model]\ntype = \"standard\"\nn = 5\nrhoo = 0.5\n";
        match ExperimentConfig::from_toml(typo) {
            Err(ExperimentError::Config { line: Some(l), .. }) => assert!((2..=5).contains(&l)),
            other => panic!("{other:?}"),
        }
        let no_model = "kind = \"spectrum\"\n";
        assert!(matches!(ExperimentConfig::from_toml(no_model), Err(ExperimentError::Config { line: Some(1), .. })));
    }

    #[test]
    fn custom_edges_build_a_model() {
        let src = r#"
kind = "spectrum"
[model]
type = "custom"
leaders = [0]
rho_edges = [[1, 0, 0.5], [1, 2, 0.5], [2, 1, 1.0]]
r_edges = [[1, 0, 0.5], [1, 2, 0.5], [2, 1, 1.0]]
"#;
        let m = ExperimentConfig::from_toml(src).unwrap().build_model().unwrap();
        let std = LinearFlockModel::standard(&StandardExampleParams::symmetric(2, 0.5)).unwrap();
        assert_eq!(m.l_rho(), std.l_rho());
        assert!(m.is_well_formed());
    }
}
