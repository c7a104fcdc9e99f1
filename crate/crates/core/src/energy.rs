//! Work-energy bookkeeping along linear flock trajectories.
//!
//! For `z'' = f L_rho z + g L_r z'` with any couplings,
//!
//! ```text
//! 1/2 [(z',z') - f (L_rho^S z, z)](t) = 1/2 [(z',z') - f (L_rho^S z, z)](0)
//!     + g ∫ (L_r^S z', z') dt + f ∫ (L_rho^A z, z') dt
//! ```
//!
//! where `S`/`A` denote symmetric and antisymmetric parts. [`ledger`]
//! evaluates both sides on a recorded trajectory; the time integrals use the
//! trapezoid rule on the sample grid.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::linalg::{symmetric_eigenvalues, EigenError, SparseRows};
use crate::model::LinearFlockModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("trajectory has {traj} agents but the model has {model}")]
    SizeMismatch { traj: usize, model: usize },
    #[error("trajectory is empty")]
    Empty,
    #[error("leader {agent} is forced (its velocity changes), the identity needs unforced leaders")]
    ForcedLeader { agent: usize },
}

/// `(L + L^T)/2` and `(L - L^T)/2`.
pub fn split(l: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let lt = l.transpose();
    ((l + &lt) * 0.5, (l - lt) * 0.5)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LedgerSeries {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub residual: Vec<f64>,
    /// Running `f ∫ (L_rho^A z, z') dt`, reported separately.
    pub antisymmetric_work: Vec<f64>,
}

impl LedgerSeries {
    pub fn max_abs_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn max_abs_lhs(&self) -> f64 {
        self.lhs.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// `max |residual| / max |lhs|`, or 0 for an identically zero series.
    pub fn relative_residual(&self) -> f64 {
        let scale = self.max_abs_lhs();
        if scale == 0.0 {
            self.max_abs_residual()
        } else {
            self.max_abs_residual() / scale
        }
    }
}

pub fn ledger(traj: &Trajectory, m: &LinearFlockModel) -> Result<LedgerSeries, LedgerError> {
    let n = m.n_agents();
    let first = traj.states.first().ok_or(LedgerError::Empty)?;
    if first.len() != n {
        return Err(LedgerError::SizeMismatch { traj: first.len(), model: n });
    }
    for &k in m.leaders() {
        let v0 = first.zdot[k];
        let tol = 1e-12 * v0.abs().max(1.0);
        if traj.states.iter().any(|s| (s.zdot[k] - v0).abs() > tol) {
            return Err(LedgerError::ForcedLeader { agent: k });
        }
    }

    let (_, a_rho) = split(m.l_rho());
    let l_rho = SparseRows::from_dense(m.l_rho());
    let l_r = SparseRows::from_dense(m.l_r());
    let a_rho = SparseRows::from_dense(&a_rho);
    let (f, g) = (m.f(), m.g());

    let samples = traj.states.len();
    let mut lhs = Vec::with_capacity(samples);
    let mut sym_power = Vec::with_capacity(samples);
    let mut anti_power = Vec::with_capacity(samples);
    for s in &traj.states {
        let kinetic: f64 = s.zdot.iter().map(|v| v * v).sum();
        lhs.push(0.5 * (kinetic - f * l_rho.quadratic_form(&s.z)));
        sym_power.push(g * l_r.quadratic_form(&s.zdot));
        let anti: f64 = (0..n).map(|i| a_rho.row_dot(i, &s.z) * s.zdot[i]).sum();
        anti_power.push(f * anti);
    }

    let mut rhs = Vec::with_capacity(samples);
    let mut antisymmetric_work = Vec::with_capacity(samples);
    let (mut w_sym, mut w_anti) = (0.0, 0.0);
    rhs.push(lhs[0]);
    antisymmetric_work.push(0.0);
    for i in 1..samples {
        let h = traj.times[i] - traj.times[i - 1];
        w_sym += 0.5 * h * (sym_power[i] + sym_power[i - 1]);
        w_anti += 0.5 * h * (anti_power[i] + anti_power[i - 1]);
        rhs.push(lhs[0] + w_sym + w_anti);
        antisymmetric_work.push(w_anti);
    }
    let residual = lhs.iter().zip(&rhs).map(|(l, r)| l - r).collect();
    Ok(LedgerSeries { times: traj.times.clone(), lhs, rhs, residual, antisymmetric_work })
}

/// Real eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_spectrum(ls: &DMatrix<f64>) -> Result<Vec<f64>, EigenError> {
    symmetric_eigenvalues(ls)
}
