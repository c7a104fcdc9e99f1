//! Orientable flocks in the plane.
//!
//! Each follower rotates the formation offsets by its own heading, the
//! direction of its velocity, so the formation turns with the flock:
//!
//! ```text
//! m_k x_k'' = f sum_i L_rho,ki (x_i - R(theta_k) h_i) + g sum_i L_r,ki x_i'
//!             + alpha (1 - V / |x_k'|) x_k'
//! ```
//!
//! The heading is undefined at zero speed; see [`SingularityPolicy`].

mod integrate;
mod leader;

pub use integrate::{integrate_planar, PlanarOptions, PlanarTrajectory};
pub use leader::PlanarLeaderProgram;

use nalgebra::{Rotation2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::SparseRows;
use crate::model::{LinearFlockModel, ModelError};

pub type Vec2 = Vector2<f64>;

pub const DEFAULT_EPSILON_V: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanarError {
    #[error("invalid {field} = {value}: {reason}")]
    InvalidParameter { field: &'static str, value: f64, reason: &'static str },
    #[error("{0}")]
    Dimension(String),
    #[error("agent {agent} speed {speed:e} is below the heading guard at t = {t}")]
    Singular { agent: usize, speed: f64, t: f64 },
    #[error("planar state blew up at t = {t}")]
    BlowUp { t: f64 },
    #[error("base model is not well-formed (max row-sum residual {0:e})")]
    NotWellFormed(f64),
    #[error("expected one program per leader ({expected}), got {got}")]
    LeaderCount { expected: usize, got: usize },
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What to do when a follower's speed falls below `epsilon_v`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SingularityPolicy {
    #[default]
    Error,
    /// Keep the last heading computed at a valid speed.
    FreezeHeading,
}

/// Angle of `v` in `(-pi, pi]`.
pub fn heading(v: Vec2, epsilon_v: f64) -> Result<f64, PlanarError> {
    let speed = v.norm();
    if !(speed >= epsilon_v) {
        return Err(PlanarError::Singular { agent: 0, speed, t: f64::NAN });
    }
    let th = v.y.atan2(v.x);
    Ok(if th == -std::f64::consts::PI { std::f64::consts::PI } else { th })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanarState {
    pub t: f64,
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
}

impl PlanarState {
    pub fn new(t: f64, positions: Vec<Vec2>, velocities: Vec<Vec2>) -> Self {
        assert_eq!(positions.len(), velocities.len(), "position/velocity length mismatch");
        Self { t, positions, velocities }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// The state rotated about the origin by `phi`.
    pub fn rotated(&self, phi: f64) -> Self {
        let r = Rotation2::new(phi);
        Self {
            t: self.t,
            positions: self.positions.iter().map(|p| r * p).collect(),
            velocities: self.velocities.iter().map(|v| r * v).collect(),
        }
    }

    pub fn mean_position(&self) -> Vec2 {
        mean(&self.positions)
    }

    pub fn mean_velocity(&self) -> Vec2 {
        mean(&self.velocities)
    }
}

fn mean(v: &[Vec2]) -> Vec2 {
    v.iter().sum::<Vec2>() / v.len().max(1) as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanarFlockModel {
    base: LinearFlockModel,
    formation: Vec<Vec2>,
    masses: Vec<f64>,
    alpha: f64,
    cruise_speed: f64,
    epsilon_v: f64,
    policy: SingularityPolicy,
}

impl PlanarFlockModel {
    /// Unit masses, no cruise term, hard singularity errors.
    pub fn new(base: LinearFlockModel, formation: Vec<Vec2>) -> Result<Self, PlanarError> {
        if formation.len() != base.n_agents() {
            return Err(PlanarError::Dimension(format!(
                "{} formation offsets for {} agents",
                formation.len(),
                base.n_agents()
            )));
        }
        let n = base.n_agents();
        Ok(Self {
            base,
            formation,
            masses: vec![1.0; n],
            alpha: 0.0,
            cruise_speed: 0.0,
            epsilon_v: DEFAULT_EPSILON_V,
            policy: SingularityPolicy::Error,
        })
    }

    /// Embeds the 1-D offsets of `base` along the x-axis.
    pub fn from_linear(base: LinearFlockModel) -> Result<Self, PlanarError> {
        let formation = base.h().iter().map(|&h| Vec2::new(h, 0.0)).collect();
        Self::new(base, formation)
    }

    pub fn with_masses(mut self, masses: Vec<f64>) -> Result<Self, PlanarError> {
        if masses.len() != self.n_agents() {
            return Err(PlanarError::Dimension(format!(
                "{} masses for {} agents",
                masses.len(),
                self.n_agents()
            )));
        }
        if let Some(&m) = masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(PlanarError::InvalidParameter { field: "mass", value: m, reason: "must be positive" });
        }
        self.masses = masses;
        Ok(self)
    }

    pub fn with_cruise(mut self, alpha: f64, cruise_speed: f64) -> Result<Self, PlanarError> {
        if !(alpha <= 0.0) {
            return Err(PlanarError::InvalidParameter { field: "alpha", value: alpha, reason: "must be <= 0" });
        }
        if !(cruise_speed >= 0.0 && cruise_speed.is_finite()) {
            return Err(PlanarError::InvalidParameter {
                field: "cruise_speed",
                value: cruise_speed,
                reason: "must be >= 0",
            });
        }
        self.alpha = alpha;
        self.cruise_speed = cruise_speed;
        Ok(self)
    }

    pub fn with_epsilon_v(mut self, epsilon_v: f64) -> Result<Self, PlanarError> {
        if !(epsilon_v > 0.0 && epsilon_v.is_finite()) {
            return Err(PlanarError::InvalidParameter { field: "epsilon_v", value: epsilon_v, reason: "must be > 0" });
        }
        self.epsilon_v = epsilon_v;
        Ok(self)
    }

    pub fn with_policy(mut self, policy: SingularityPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn base(&self) -> &LinearFlockModel {
        &self.base
    }

    pub fn n_agents(&self) -> usize {
        self.base.n_agents()
    }

    pub fn formation(&self) -> &[Vec2] {
        &self.formation
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cruise_speed(&self) -> f64 {
        self.cruise_speed
    }

    pub fn epsilon_v(&self) -> f64 {
        self.epsilon_v
    }

    pub fn policy(&self) -> SingularityPolicy {
        self.policy
    }

    /// Cruise-speed force `alpha (1 - V/|v|) v` on a single agent.
    pub fn cruise_force(&self, v: Vec2) -> Vec2 {
        if self.alpha == 0.0 {
            return Vec2::zeros();
        }
        v * (self.alpha * (1.0 - self.cruise_speed / v.norm()))
    }
}

/// Precomputed rows used by the right-hand side.
pub(crate) struct PlanarRhs {
    rows_rho: SparseRows,
    rows_r: SparseRows,
    /// `sum_i L_rho,ki h_i` per agent; rotating it equals rotating every offset.
    coupled_offsets: Vec<Vec2>,
}

impl PlanarRhs {
    pub(crate) fn new(m: &PlanarFlockModel) -> Self {
        let rows_rho = SparseRows::from_dense(m.base.l_rho());
        let n = m.n_agents();
        let hx: Vec<f64> = m.formation.iter().map(|h| h.x).collect();
        let hy: Vec<f64> = m.formation.iter().map(|h| h.y).collect();
        let coupled_offsets = (0..n).map(|k| Vec2::new(rows_rho.row_dot(k, &hx), rows_rho.row_dot(k, &hy))).collect();
        Self { rows_rho, rows_r: SparseRows::from_dense(m.base.l_r()), coupled_offsets }
    }

    /// Accelerations of all agents (zero for leaders). `fallback` supplies
    /// headings for the freeze policy; `headings` receives those used.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn eval(
        &self,
        m: &PlanarFlockModel,
        t: f64,
        x: &[Vec2],
        v: &[Vec2],
        fallback: Option<&[f64]>,
        headings: &mut [f64],
        out: &mut [Vec2],
    ) -> Result<(), PlanarError> {
        let n = m.n_agents();
        let xs: Vec<f64> = x.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = x.iter().map(|p| p.y).collect();
        let vxs: Vec<f64> = v.iter().map(|p| p.x).collect();
        let vys: Vec<f64> = v.iter().map(|p| p.y).collect();
        let (f, g) = (m.base.f(), m.base.g());
        for k in 0..n {
            if m.base.is_leader(k) {
                out[k] = Vec2::zeros();
                continue;
            }
            let speed = v[k].norm();
            let frozen = !(speed >= m.epsilon_v);
            let th = if !frozen {
                v[k].y.atan2(v[k].x)
            } else {
                match (m.policy, fallback) {
                    (SingularityPolicy::FreezeHeading, Some(fb)) => fb[k],
                    _ => return Err(PlanarError::Singular { agent: k, speed, t }),
                }
            };
            headings[k] = th;
            let lx = Vec2::new(self.rows_rho.row_dot(k, &xs), self.rows_rho.row_dot(k, &ys));
            let lv = Vec2::new(self.rows_r.row_dot(k, &vxs), self.rows_r.row_dot(k, &vys));
            let slot = Rotation2::new(th) * self.coupled_offsets[k];
            let mut a = (lx - slot) * f + lv * g;
            if m.alpha != 0.0 {
                a += if frozen {
                    let dir = Vec2::new(th.cos(), th.sin());
                    (v[k] - dir * m.cruise_speed) * m.alpha
                } else {
                    m.cruise_force(v[k])
                };
            }
            out[k] = a / m.masses[k];
        }
        Ok(())
    }
}

/// Accelerations at `s`; leaders get zero since their motion is prescribed.
/// The freeze policy has no heading history here, so low speeds always error.
pub fn planar_accel(s: &PlanarState, m: &PlanarFlockModel) -> Result<Vec<Vec2>, PlanarError> {
    let n = m.n_agents();
    if s.len() != n {
        return Err(PlanarError::Dimension(format!("state has {} agents, model has {}", s.len(), n)));
    }
    let mut out = vec![Vec2::zeros(); n];
    let mut headings = vec![0.0; n];
    PlanarRhs::new(m).eval(m, s.t, &s.positions, &s.velocities, None, &mut headings, &mut out)?;
    Ok(out)
}

/// Same as [`planar_accel`] but with explicit headings for agents below the
/// speed guard when the model uses [`SingularityPolicy::FreezeHeading`].
pub fn planar_accel_with_headings(
    s: &PlanarState,
    m: &PlanarFlockModel,
    last_headings: &[f64],
) -> Result<Vec<Vec2>, PlanarError> {
    let n = m.n_agents();
    if s.len() != n || last_headings.len() != n {
        return Err(PlanarError::Dimension(format!("state/headings do not match {} agents", n)));
    }
    let mut out = vec![Vec2::zeros(); n];
    let mut headings = vec![0.0; n];
    PlanarRhs::new(m).eval(m, s.t, &s.positions, &s.velocities, Some(last_headings), &mut headings, &mut out)?;
    Ok(out)
}

/// RMS distance of each agent from its slot in the formation rotated to the
/// mean heading, both measured from their centroids.
pub fn formation_error(s: &PlanarState, m: &PlanarFlockModel) -> Result<f64, PlanarError> {
    let n = m.n_agents();
    if s.len() != n {
        return Err(PlanarError::Dimension(format!("state has {} agents, model has {}", s.len(), n)));
    }
    let vbar = s.mean_velocity();
    let th = heading(vbar, m.epsilon_v).map_err(|_| PlanarError::Singular { agent: n, speed: vbar.norm(), t: s.t })?;
    let r = Rotation2::new(th);
    let xbar = s.mean_position();
    let hbar = mean(&m.formation);
    let ss: f64 = (0..n).map(|k| ((s.positions[k] - xbar) - r * (m.formation[k] - hbar)).norm_squared()).sum();
    Ok((ss / n as f64).sqrt())
}

/// Rigidly translating formation: positions `R(heading) h_k`, all
/// velocities `speed` along `heading`.
pub fn equilibrium_state(m: &PlanarFlockModel, heading: f64, speed: f64) -> Result<PlanarState, PlanarError> {
    if !(speed >= m.epsilon_v && speed.is_finite()) {
        return Err(PlanarError::InvalidParameter { field: "speed", value: speed, reason: "must be at least epsilon_v" });
    }
    let r = Rotation2::new(heading);
    let v = Vec2::new(heading.cos(), heading.sin()) * speed;
    Ok(PlanarState::new(0.0, m.formation.iter().map(|h| r * h).collect(), vec![v; m.n_agents()]))
}

/// `n` masses uniform on `[1 - delta, 1 + delta]`, reproducible from `seed`.
pub fn sample_masses(n: usize, delta: f64, seed: u64) -> Result<Vec<f64>, PlanarError> {
    if !(0.0..1.0).contains(&delta) {
        return Err(PlanarError::InvalidParameter { field: "delta", value: delta, reason: "must be in [0, 1)" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| if delta == 0.0 { 1.0 } else { rng.random_range(1.0 - delta..=1.0 + delta) })
        .collect())
}

/// Hexagon of radius `spacing` around a center agent, in the body frame
/// (heading along +x). Agent 0 is the front vertex, 1..=5 the remaining
/// vertices counter-clockwise, 6 the center.
pub fn hexagon_formation(spacing: f64) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = (0..6)
        .map(|j| {
            let a = j as f64 * std::f64::consts::FRAC_PI_3;
            Vec2::new(a.cos(), a.sin()) * spacing
        })
        .collect();
    pts.push(Vec2::zeros());
    pts
}

/// Seven-agent hexagon-plus-center flock led by the front vertex. Every
/// follower averages its two ring neighbors and the center; the center
/// averages all six vertices.
pub fn hexagon_flock(spacing: f64, f: f64, g: f64) -> Result<PlanarFlockModel, PlanarError> {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 7];
    for (j, row) in rows.iter_mut().enumerate().take(6).skip(1) {
        let w = 1.0 / 3.0;
        *row = vec![((j + 5) % 6, w), ((j + 1) % 6, w), (6, w)];
    }
    rows[6] = (0..6).map(|j| (j, 1.0 / 6.0)).collect();
    let base = LinearFlockModel::custom(&rows, &rows, &[0], f, g, Some(vec![0.0; 7]))?;
    PlanarFlockModel::new(base, hexagon_formation(spacing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StandardExampleParams;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn chain(n: usize) -> PlanarFlockModel {
        let base = LinearFlockModel::standard(&StandardExampleParams::symmetric(n, 0.45)).unwrap();
        PlanarFlockModel::from_linear(base).unwrap()
    }

    #[test]
    fn heading_examples() {
        assert_eq!(heading(Vec2::new(1.0, 0.0), 1e-6).unwrap(), 0.0);
        assert!((heading(Vec2::new(0.0, -1.0), 1e-6).unwrap() + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(heading(Vec2::new(-1.0, -0.0), 1e-6).unwrap(), PI);
        assert!(matches!(heading(Vec2::new(1e-12, 0.0), 1e-6), Err(PlanarError::Singular { .. })));
    }

    #[test]
    fn equilibrium_has_zero_acceleration_on_all_headings() {
        let m = hexagon_flock(1.0, -1.0, -2.0).unwrap().with_cruise(-0.5, 1.3).unwrap();
        for j in 0..8 {
            let s = equilibrium_state(&m, j as f64 * PI / 4.0, 1.3).unwrap();
            for a in planar_accel(&s, &m).unwrap() {
                assert!(a.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_follower_is_pulled_toward_its_slot() {
        // Leader at the origin heading +x, follower slot one unit behind.
        let base = LinearFlockModel::standard(&StandardExampleParams::symmetric(1, 0.5)).unwrap();
        let m = PlanarFlockModel::new(base, vec![Vec2::zeros(), Vec2::new(-1.0, 0.0)]).unwrap();
        let v = Vec2::new(1.0, 0.0);
        let s = PlanarState::new(0.0, vec![Vec2::new(0.0, 0.2), Vec2::new(-1.0, 0.0)], vec![v, v]);
        let a = planar_accel(&s, &m).unwrap();
        // Slot is (-1, 0.2); f = -1 gives a = (0, 0.2).
        assert!((a[1] - Vec2::new(0.0, 0.2)).norm() < 1e-15);
        assert_eq!(a[0], Vec2::zeros());
    }

    #[test]
    fn axis_confined_accel_matches_linear_model() {
        let m = chain(6);
        let n = m.n_agents();
        let z: Vec<f64> = (0..n).map(|k| 0.1 * (k as f64).sin()).collect();
        let zd: Vec<f64> = (0..n).map(|k| 1.0 + 0.05 * (k as f64).cos()).collect();
        let x: Vec<Vec2> = (0..n).map(|k| Vec2::new(z[k] + m.base().h()[k], 0.0)).collect();
        let v: Vec<Vec2> = zd.iter().map(|&u| Vec2::new(u, 0.0)).collect();
        let a = planar_accel(&PlanarState::new(0.0, x, v), &m).unwrap();
        let lin = m.base().acceleration(&z, &zd);
        for k in 1..n {
            assert!((a[k].x - lin[k]).abs() < 1e-12 && a[k].y == 0.0);
        }
    }

    #[test]
    fn cruise_term_sign() {
        let m = chain(2).with_cruise(-1.0, 1.0).unwrap();
        let fast = Vec2::new(2.0, 1.0);
        let slow = Vec2::new(0.3, 0.1);
        assert!(m.cruise_force(fast).dot(&fast) < 0.0);
        assert!(m.cruise_force(slow).dot(&slow) > 0.0);
    }

    #[test]
    fn singular_follower_is_reported_and_freeze_uses_history() {
        let m = chain(2);
        let s = PlanarState::new(
            1.5,
            vec![Vec2::zeros(), Vec2::new(-1.0, 0.0), Vec2::new(-2.0, 0.0)],
            vec![Vec2::new(1.0, 0.0), Vec2::zeros(), Vec2::new(1.0, 0.0)],
        );
        assert!(matches!(planar_accel(&s, &m), Err(PlanarError::Singular { agent: 1, t, .. }) if t == 1.5));
        let frozen = m.clone().with_policy(SingularityPolicy::FreezeHeading);
        assert!(planar_accel(&s, &frozen).is_err());
        assert!(planar_accel_with_headings(&s, &frozen, &[0.0; 3]).is_ok());
    }

    #[test]
    fn formation_error_cases() {
        let m = hexagon_flock(1.0, -1.0, -2.0).unwrap();
        let s = equilibrium_state(&m, 0.4, 1.0).unwrap();
        assert!(formation_error(&s, &m).unwrap() < 1e-12);

        // Two agents, formation flipped against the heading: every agent is
        // off its slot by 2 |h_k - hbar|.
        let base = LinearFlockModel::standard(&StandardExampleParams::symmetric(1, 0.5)).unwrap();
        let two = PlanarFlockModel::new(base, vec![Vec2::new(0.5, 0.0), Vec2::new(-0.5, 0.0)]).unwrap();
        let v = Vec2::new(1.0, 0.0);
        let flipped = PlanarState::new(0.0, vec![Vec2::new(-0.5, 0.0), Vec2::new(0.5, 0.0)], vec![v, v]);
        assert!((formation_error(&flipped, &two).unwrap() - 1.0).abs() < 1e-15);

        let doubled = PlanarFlockModel::new(two.base().clone(), vec![Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)]).unwrap();
        let flipped2 = PlanarState::new(0.0, vec![Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)], vec![v, v]);
        assert!((formation_error(&flipped2, &doubled).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn masses_are_seeded_and_bounded() {
        let a = sample_masses(50, 0.2, 7).unwrap();
        assert_eq!(a, sample_masses(50, 0.2, 7).unwrap());
        assert_ne!(a, sample_masses(50, 0.2, 8).unwrap());
        assert!(a.iter().all(|m| (0.8..=1.2).contains(m)));
        assert_eq!(sample_masses(3, 0.0, 1).unwrap(), vec![1.0; 3]);
        assert!(sample_masses(3, 1.0, 1).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(chain(2).with_cruise(0.5, 1.0).is_err());
        assert!(chain(2).with_epsilon_v(0.0).is_err());
        assert!(chain(2).with_masses(vec![1.0, 0.0, 1.0]).is_err());
        assert!(chain(2).with_masses(vec![1.0; 2]).is_err());
    }
}
