//! Linear flock models in leader/follower form.
//!
//! A model holds two "Laplacian" coupling matrices over all agents: one for
//! relative positions and one for relative velocities. Follower rows sum to
//! zero, leader rows are identically zero, and the deviation coordinates
//! `z = x - h` obey
//!
//! ```text
//! z'' = f * L_rho * z + g * L_r * z'
//! ```
//!
//! Leaders receive no feedback; their motion is injected at simulation time.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

/// Structural tolerance for row sums and zero leader rows.
pub const STRUCTURAL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{field}` = {value}: {reason}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("a flock needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("at least one leader is required")]
    NoLeaders,
    #[error("agent index {index} out of range for {n} agents")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("follower {agent} has no neighbors in the {matrix} coupling and would be uncontrolled")]
    UncontrolledAgent { agent: usize, matrix: &'static str },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Parameters of the nearest-neighbor chain with one leader at index 0.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StandardExampleParams {
    /// Number of followers; the flock has `n + 1` agents.
    pub n: usize,
    pub rho: f64,
    pub r: f64,
    pub f: f64,
    pub g: f64,
}

impl StandardExampleParams {
    pub fn new(n: usize, rho: f64, r: f64, f: f64, g: f64) -> Self {
        Self { n, rho, r, f, g }
    }

    /// Symmetric weights `rho = r` with the gains used throughout the
    /// experiments (`f = -1`, `g = -2`).
    pub fn symmetric(n: usize, rho: f64) -> Self {
        Self::new(n, rho, rho, -1.0, -2.0)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if self.n < 1 {
            return Err(ModelError::TooFewAgents(self.n + 1));
        }
        let open_unit = |field, value: f64| {
            if value > 0.0 && value < 1.0 {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter {
                    field,
                    value,
                    reason: "must lie in the open interval (0, 1)",
                })
            }
        };
        let negative = |field, value: f64| {
            if value < 0.0 {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter {
                    field,
                    value,
                    reason: "must be negative",
                })
            }
        };
        open_unit("rho", self.rho)?;
        open_unit("r", self.r)?;
        negative("f", self.f)?;
        negative("g", self.g)?;
        Ok(())
    }
}

/// Deviation state `z = x - h` of every agent at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlockState {
    pub t: f64,
    pub z: Vec<f64>,
    pub zdot: Vec<f64>,
}

impl FlockState {
    pub fn new(t: f64, z: Vec<f64>, zdot: Vec<f64>) -> Self {
        debug_assert_eq!(z.len(), zdot.len());
        Self { t, z, zdot }
    }

    pub fn at_rest(n_agents: usize) -> Self {
        Self::new(0.0, vec![0.0; n_agents], vec![0.0; n_agents])
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self::new(
            self.t,
            self.z.iter().map(|v| alpha * v).collect(),
            self.zdot.iter().map(|v| alpha * v).collect(),
        )
    }
}

/// Uniform translation by `offset` plus uniform velocity boost `velocity`.
pub fn galilean_shift(s: &FlockState, offset: f64, velocity: f64) -> FlockState {
    let shift = offset + velocity * s.t;
    FlockState::new(
        s.t,
        s.z.iter().map(|z| z + shift).collect(),
        s.zdot.iter().map(|v| v + velocity).collect(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearFlockModel {
    n_agents: usize,
    leaders: Vec<usize>,
    is_leader: Vec<bool>,
    l_rho: DMatrix<f64>,
    l_r: DMatrix<f64>,
    f: f64,
    g: f64,
    h: Vec<f64>,
}

/// Unit spacing with agent 0 rightmost.
pub fn default_offsets(n_agents: usize) -> Vec<f64> {
    (0..n_agents).map(|k| -(k as f64)).collect()
}

fn chain_matrix(n: usize, w: f64) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n + 1, n + 1);
    for k in 1..n {
        l[(k, k - 1)] = -(1.0 - w);
        l[(k, k)] = 1.0;
        l[(k, k + 1)] = -w;
    }
    l[(n, n - 1)] = -1.0;
    l[(n, n)] = 1.0;
    l
}

impl LinearFlockModel {
    /// Chain of `n + 1` agents, agent 0 the only leader, agent `n` the free end.
    pub fn standard(p: &StandardExampleParams) -> Result<Self, ModelError> {
        p.check()?;
        let n_agents = p.n + 1;
        Ok(Self {
            n_agents,
            leaders: vec![0],
            is_leader: (0..n_agents).map(|k| k == 0).collect(),
            l_rho: chain_matrix(p.n, p.rho),
            l_r: chain_matrix(p.n, p.r),
            f: p.f,
            g: p.g,
            h: default_offsets(n_agents),
        })
    }

    /// Assembles the couplings from per-row neighbor weights.
    ///
    /// `weights_rho[k]` lists `(neighbor, weight)` pairs for agent `k`; each
    /// becomes the off-diagonal entry `-weight`, and the diagonal is set so
    /// the row sums to zero. Leader rows are zeroed whatever they contain.
    /// `h = None` selects unit spacing.
    pub fn custom(
        weights_rho: &[Vec<(usize, f64)>],
        weights_r: &[Vec<(usize, f64)>],
        leaders: &[usize],
        f: f64,
        g: f64,
        h: Option<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let n_agents = weights_rho.len();
        if weights_r.len() != n_agents {
            return Err(ModelError::Dimension(format!(
                "{} position rows but {} velocity rows",
                n_agents,
                weights_r.len()
            )));
        }
        let leaders = normalize_leaders(leaders, n_agents)?;
        let is_leader: Vec<bool> = (0..n_agents).map(|k| leaders.contains(&k)).collect();
        let assemble = |rows: &[Vec<(usize, f64)>], name: &'static str| {
            let mut l = DMatrix::zeros(n_agents, n_agents);
            for (k, row) in rows.iter().enumerate() {
                if is_leader[k] {
                    continue;
                }
                let mut off = 0.0;
                let mut any = false;
                for &(i, w) in row {
                    if i >= n_agents {
                        return Err(ModelError::IndexOutOfRange { index: i, n: n_agents });
                    }
                    if i == k || w == 0.0 {
                        continue;
                    }
                    l[(k, i)] -= w;
                    off -= w;
                    any = true;
                }
                if !any {
                    return Err(ModelError::UncontrolledAgent { agent: k, matrix: name });
                }
                l[(k, k)] = -off;
            }
            Ok(l)
        };
        let l_rho = assemble(weights_rho, "position")?;
        let l_r = assemble(weights_r, "velocity")?;
        let h = h.unwrap_or_else(|| default_offsets(n_agents));
        if h.len() != n_agents {
            return Err(ModelError::Dimension(format!(
                "{} offsets for {} agents",
                h.len(),
                n_agents
            )));
        }
        Ok(Self { n_agents, leaders, is_leader, l_rho, l_r, f, g, h })
    }

    /// Wraps explicit matrices. Only shapes and indices are checked; use
    /// [`LinearFlockModel::validate`] for the structural invariants.
    pub fn from_matrices(
        l_rho: DMatrix<f64>,
        l_r: DMatrix<f64>,
        leaders: &[usize],
        f: f64,
        g: f64,
        h: Option<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let n_agents = l_rho.nrows();
        if !l_rho.is_square() || l_r.shape() != l_rho.shape() {
            return Err(ModelError::Dimension(format!(
                "couplings must be square and equal in size, got {:?} and {:?}",
                l_rho.shape(),
                l_r.shape()
            )));
        }
        let leaders = normalize_leaders(leaders, n_agents)?;
        let is_leader = (0..n_agents).map(|k| leaders.contains(&k)).collect();
        let h = h.unwrap_or_else(|| default_offsets(n_agents));
        if h.len() != n_agents {
            return Err(ModelError::Dimension(format!(
                "{} offsets for {} agents",
                h.len(),
                n_agents
            )));
        }
        Ok(Self { n_agents, leaders, is_leader, l_rho, l_r, f, g, h })
    }

    pub fn with_offsets(mut self, h: Vec<f64>) -> Result<Self, ModelError> {
        if h.len() != self.n_agents {
            return Err(ModelError::Dimension(format!(
                "{} offsets for {} agents",
                h.len(),
                self.n_agents
            )));
        }
        self.h = h;
        Ok(self)
    }

    pub fn with_gains(mut self, f: f64, g: f64) -> Self {
        self.f = f;
        self.g = g;
        self
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// Leader indices, ascending.
    pub fn leaders(&self) -> &[usize] {
        &self.leaders
    }

    /// Follower indices, ascending.
    pub fn followers(&self) -> Vec<usize> {
        (0..self.n_agents).filter(|&k| !self.is_leader[k]).collect()
    }

    pub fn is_leader(&self, k: usize) -> bool {
        self.is_leader[k]
    }

    pub fn l_rho(&self) -> &DMatrix<f64> {
        &self.l_rho
    }

    pub fn l_r(&self) -> &DMatrix<f64> {
        &self.l_r
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Index of the last agent, the one whose excursions define flock
    /// (in)stability.
    pub fn tail(&self) -> usize {
        self.n_agents - 1
    }

    /// Full-vector acceleration `f L_rho z + g L_r zdot`. Leader rows are
    /// whatever the matrices say (zero for well-formed models).
    pub fn acceleration(&self, z: &[f64], zdot: &[f64]) -> Vec<f64> {
        let n = self.n_agents;
        (0..n)
            .map(|k| {
                let mut a = 0.0;
                for i in 0..n {
                    a += self.f * self.l_rho[(k, i)] * z[i] + self.g * self.l_r[(k, i)] * zdot[i];
                }
                a
            })
            .collect()
    }

    pub fn validate(&self) -> ValidationReport {
        let row_sums = |l: &DMatrix<f64>| -> Vec<f64> {
            (0..self.n_agents).map(|k| l.row(k).iter().sum::<f64>().abs()).collect()
        };
        let mut leader_row_entries = Vec::new();
        for &k in &self.leaders {
            for (name, l) in [("position", &self.l_rho), ("velocity", &self.l_r)] {
                for i in 0..self.n_agents {
                    if l[(k, i)] != 0.0 {
                        leader_row_entries.push(LeaderRowEntry {
                            matrix: name,
                            row: k,
                            col: i,
                            value: l[(k, i)],
                        });
                    }
                }
            }
        }
        let mut warnings = Vec::new();
        if !(self.f < 0.0) {
            warnings.push(GainWarning::PositionGain(self.f));
        }
        if !(self.g < 0.0) {
            warnings.push(GainWarning::VelocityGain(self.g));
        }
        ValidationReport {
            rho_row_residuals: row_sums(&self.l_rho),
            r_row_residuals: row_sums(&self.l_r),
            leader_row_entries,
            warnings,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.validate().is_well_formed()
    }
}

fn normalize_leaders(leaders: &[usize], n_agents: usize) -> Result<Vec<usize>, ModelError> {
    if n_agents < 2 {
        return Err(ModelError::TooFewAgents(n_agents));
    }
    if leaders.is_empty() {
        return Err(ModelError::NoLeaders);
    }
    let set: BTreeSet<usize> = leaders.iter().copied().collect();
    if let Some(&bad) = set.iter().find(|&&k| k >= n_agents) {
        return Err(ModelError::IndexOutOfRange { index: bad, n: n_agents });
    }
    Ok(set.into_iter().collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeaderRowEntry {
    pub matrix: &'static str,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GainWarning {
    PositionGain(f64),
    VelocityGain(f64),
}

impl fmt::Display for GainWarning {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GainWarning::PositionGain(v) => {
                write!(out, "f = {v} is not negative: not stabilized by sign convention")
            }
            GainWarning::VelocityGain(v) => {
                write!(out, "g = {v} is not negative: not stabilized by sign convention")
            }
        }
    }
}

/// Diagnostic summary of a model's structural invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    /// `|row sum|` of the position coupling, one per agent.
    pub rho_row_residuals: Vec<f64>,
    pub r_row_residuals: Vec<f64>,
    /// Nonzero entries found in leader rows.
    pub leader_row_entries: Vec<LeaderRowEntry>,
    pub warnings: Vec<GainWarning>,
}

impl ValidationReport {
    pub fn max_residual(&self) -> f64 {
        self.rho_row_residuals
            .iter()
            .chain(&self.r_row_residuals)
            .fold(0.0, |m, &v| m.max(v))
    }

    /// Gain warnings do not affect well-formedness.
    pub fn is_well_formed(&self) -> bool {
        self.max_residual() < STRUCTURAL_TOL && self.leader_row_entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(l: &DMatrix<f64>, k: usize) -> Vec<f64> {
        l.row(k).iter().copied().collect()
    }

    #[test]
    fn standard_two_followers_transcribes_rows() {
        let m = LinearFlockModel::standard(&StandardExampleParams::new(2, 0.5, 0.3, -1.0, -2.0)).unwrap();
        assert_eq!(row(m.l_rho(), 0), vec![0.0, 0.0, 0.0]);
        assert_eq!(row(m.l_rho(), 1), vec![-0.5, 1.0, -0.5]);
        assert_eq!(row(m.l_rho(), 2), vec![0.0, -1.0, 1.0]);
        assert_eq!(row(m.l_r(), 1), vec![-0.7, 1.0, -0.3]);
        assert_eq!(m.h(), &[0.0, -1.0, -2.0]);
        assert_eq!(m.leaders(), &[0]);
        assert_eq!(m.followers(), vec![1, 2]);
    }

    #[test]
    fn standard_fig2_size_is_valid() {
        let m = LinearFlockModel::standard(&StandardExampleParams::new(100, 0.45, 0.45, -1.0, -2.0)).unwrap();
        assert_eq!(m.n_agents(), 101);
        assert!(m.is_well_formed());
        assert!(m.validate().warnings.is_empty());
    }

    #[test]
    fn parameter_errors_name_the_field() {
        let cases = [
            (StandardExampleParams::new(5, 0.0, 0.5, -1.0, -2.0), "rho"),
            (StandardExampleParams::new(5, 0.5, 1.0, -1.0, -2.0), "r"),
            (StandardExampleParams::new(5, 0.5, 0.5, 0.0, -2.0), "f"),
            (StandardExampleParams::new(5, 0.5, 0.5, -1.0, 2.0), "g"),
        ];
        for (p, name) in cases {
            match LinearFlockModel::standard(&p) {
                Err(ModelError::InvalidParameter { field, .. }) => assert_eq!(field, name),
                other => panic!("expected error for {name}, got {other:?}"),
            }
        }
    }

    #[test]
    fn custom_path_matches_symmetric_chain_after_row_normalisation() {
        let w = vec![vec![], vec![(0, 1.0), (2, 1.0)], vec![(1, 1.0)]];
        let custom = LinearFlockModel::custom(&w, &w, &[0], -1.0, -2.0, None).unwrap();
        let chain = LinearFlockModel::standard(&StandardExampleParams::symmetric(2, 0.5)).unwrap();
        for k in 1..3 {
            let dc = custom.l_rho()[(k, k)];
            let ds = chain.l_rho()[(k, k)];
            for i in 0..3 {
                assert_eq!(custom.l_rho()[(k, i)] / dc, chain.l_rho()[(k, i)] / ds);
            }
        }
    }

    #[test]
    fn custom_single_follower() {
        let w = vec![vec![], vec![(0, 1.0)]];
        let m = LinearFlockModel::custom(&w, &w, &[0], -1.0, -2.0, None).unwrap();
        assert_eq!(row(m.l_rho(), 1), vec![-1.0, 1.0]);
    }

    #[test]
    fn custom_rejects_empty_follower_row() {
        let w = vec![vec![], vec![(0, 1.0)], vec![]];
        let err = LinearFlockModel::custom(&w, &w, &[0], -1.0, -2.0, None).unwrap_err();
        assert_eq!(err, ModelError::UncontrolledAgent { agent: 2, matrix: "position" });
    }

    #[test]
    fn custom_zeroes_leader_rows() {
        let w = vec![vec![(1, 3.0)], vec![(0, 1.0)]];
        let m = LinearFlockModel::custom(&w, &w, &[0], -1.0, -2.0, None).unwrap();
        assert_eq!(row(m.l_rho(), 0), vec![0.0, 0.0]);
    }

    #[test]
    fn validate_reports_row_sum_residual() {
        let mut l = LinearFlockModel::standard(&StandardExampleParams::symmetric(3, 0.5))
            .unwrap()
            .l_rho()
            .clone();
        l[(2, 2)] += 0.1;
        let lr = l.clone();
        let m = LinearFlockModel::from_matrices(l, lr, &[0], -1.0, -2.0, None).unwrap();
        let rep = m.validate();
        assert!(!rep.is_well_formed());
        assert!((rep.rho_row_residuals[2] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn validate_flags_leader_row_entries() {
        let mut l = DMatrix::zeros(2, 2);
        l[(0, 0)] = 1.0;
        l[(0, 1)] = -1.0;
        l[(1, 0)] = -1.0;
        l[(1, 1)] = 1.0;
        let m = LinearFlockModel::from_matrices(l.clone(), l, &[0], -1.0, -2.0, None).unwrap();
        let rep = m.validate();
        assert_eq!(rep.leader_row_entries.len(), 4);
        assert!(!rep.is_well_formed());
    }

    #[test]
    fn positive_gain_is_warning_not_error() {
        let m = LinearFlockModel::standard(&StandardExampleParams::symmetric(3, 0.5))
            .unwrap()
            .with_gains(1.0, -2.0);
        let rep = m.validate();
        assert!(rep.is_well_formed());
        assert_eq!(rep.warnings, vec![GainWarning::PositionGain(1.0)]);
        assert!(rep.warnings[0].to_string().contains("not stabilized by sign convention"));
    }

    #[test]
    fn galilean_identity_shift() {
        let s = FlockState::new(2.5, vec![1.0, -2.0], vec![0.5, 0.25]);
        assert_eq!(galilean_shift(&s, 0.0, 0.0), s);
        let shifted = galilean_shift(&s, 1.0, 2.0);
        assert_eq!(shifted.z, vec![7.0, 4.0]);
        assert_eq!(shifted.zdot, vec![2.5, 2.25]);
    }

    #[test]
    fn uniform_motion_has_zero_acceleration() {
        let m = LinearFlockModel::standard(&StandardExampleParams::symmetric(6, 0.45)).unwrap();
        let s = FlockState::new(3.0, vec![0.7 * 3.0 + 1.5; 7], vec![0.7; 7]);
        assert!(m.acceleration(&s.z, &s.zdot).iter().all(|a| a.abs() < 1e-15));
    }

    #[test]
    fn symmetric_weight_rows_are_mirror_symmetric() {
        let m = LinearFlockModel::standard(&StandardExampleParams::symmetric(8, 0.5)).unwrap();
        let l = m.l_rho();
        for k in 1..8 {
            assert_eq!(l[(k, k - 1)], l[(k, k + 1)]);
        }
    }
}
