//! Time-domain behaviour of linear flocks: follower/leader partitioning, the
//! first-order companion matrix and its spectrum, and fixed-step
//! integration of leader-driven experiments.

mod integrate;
mod leader;

pub use integrate::{
    integrate, mechanical_energy, step_response, unit_step_initial_state, IntegrateOptions, StopRule,
    Trajectory, DEFAULT_DT, DEFAULT_HORIZON_CAP, MAX_RECORDED_SAMPLES, RK4_STABILITY_MARGIN,
};
pub use leader::LeaderSignal;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{self, EigenError};
use crate::model::LinearFlockModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("model is not well-formed (max row-sum residual {0:e})")]
    NotWellFormed(f64),
    #[error("expected one leader signal per leader ({expected}), got {got}")]
    LeaderCount { expected: usize, got: usize },
    #[error("initial state has {got} entries, model has {expected} agents")]
    StateSize { expected: usize, got: usize },
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("state blew up (non-finite or overflow) at t = {t}")]
    BlowUp { t: f64 },
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// Follower-follower blocks and follower-leader coupling columns.
#[derive(Clone, Debug, PartialEq)]
pub struct FollowerBlocks {
    pub followers: Vec<usize>,
    pub leaders: Vec<usize>,
    pub ff_rho: DMatrix<f64>,
    pub ff_r: DMatrix<f64>,
    pub fl_rho: DMatrix<f64>,
    pub fl_r: DMatrix<f64>,
}

impl FollowerBlocks {
    /// Rebuilds the follower rows of `(L_rho, L_r)` as full-width rows.
    pub fn reassemble_rows(&self, n_agents: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let nf = self.followers.len();
        let mut rho = DMatrix::zeros(nf, n_agents);
        let mut r = DMatrix::zeros(nf, n_agents);
        for a in 0..nf {
            for (b, &j) in self.followers.iter().enumerate() {
                rho[(a, j)] = self.ff_rho[(a, b)];
                r[(a, j)] = self.ff_r[(a, b)];
            }
            for (b, &j) in self.leaders.iter().enumerate() {
                rho[(a, j)] = self.fl_rho[(a, b)];
                r[(a, j)] = self.fl_r[(a, b)];
            }
        }
        (rho, r)
    }
}

pub fn follower_reduction(m: &LinearFlockModel) -> FollowerBlocks {
    let followers = m.followers();
    let leaders = m.leaders().to_vec();
    let pick = |l: &DMatrix<f64>, cols: &[usize]| {
        DMatrix::from_fn(followers.len(), cols.len(), |a, b| l[(followers[a], cols[b])])
    };
    FollowerBlocks {
        ff_rho: pick(m.l_rho(), &followers),
        ff_r: pick(m.l_r(), &followers),
        fl_rho: pick(m.l_rho(), &leaders),
        fl_r: pick(m.l_r(), &leaders),
        followers,
        leaders,
    }
}

/// First-order system matrix acting on `(z_f, z_f')` with leaders held
/// fixed: `[[0, I], [f * Lff_rho, g * Lff_r]]`.
pub fn companion_matrix(m: &LinearFlockModel) -> DMatrix<f64> {
    let b = follower_reduction(m);
    let nf = b.followers.len();
    let mut c = DMatrix::zeros(2 * nf, 2 * nf);
    for i in 0..nf {
        c[(i, nf + i)] = 1.0;
        for j in 0..nf {
            c[(nf + i, j)] = m.f() * b.ff_rho[(i, j)];
            c[(nf + i, nf + j)] = m.g() * b.ff_r[(i, j)];
        }
    }
    c
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>, EigenError> {
    linalg::eigenvalues(m)
}

/// Spectral statistics of a companion matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    /// `max Re(lambda)`.
    pub spectral_abscissa: f64,
    /// `min |Re(lambda)|`: distance of the spectrum to the imaginary axis.
    pub min_abs_real: f64,
    pub min_modulus: f64,
    pub near_zero_threshold: f64,
    pub near_zero_count: usize,
}

/// Panics on an empty eigenvalue list.
pub fn spectral_summary(eigs: &[Complex64], near_zero_threshold: f64) -> SpectrumReport {
    assert!(!eigs.is_empty(), "spectral summary of an empty spectrum");
    let spectral_abscissa = eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let min_abs_real = eigs.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
    let min_modulus = eigs.iter().map(|l| l.norm()).fold(f64::INFINITY, f64::min);
    let near_zero_count = eigs.iter().filter(|l| l.norm() < near_zero_threshold).count();
    SpectrumReport {
        eigenvalues: eigs.to_vec(),
        spectral_abscissa,
        min_abs_real,
        min_modulus,
        near_zero_threshold,
        near_zero_count,
    }
}

/// Companion spectrum of a model, summarised.
pub fn model_spectrum(m: &LinearFlockModel, near_zero_threshold: f64) -> Result<SpectrumReport, EigenError> {
    let eigs = eigenvalues(&companion_matrix(m))?;
    Ok(spectral_summary(&eigs, near_zero_threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StandardExampleParams;

    fn standard(n: usize, rho: f64) -> LinearFlockModel {
        LinearFlockModel::standard(&StandardExampleParams::symmetric(n, rho)).unwrap()
    }

    #[test]
    fn reduction_of_two_follower_chain() {
        let b = follower_reduction(&standard(2, 0.5));
        assert_eq!(b.ff_rho, DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -1.0, 1.0]));
        assert_eq!(b.fl_rho, DMatrix::from_row_slice(2, 1, &[-0.5, 0.0]));
    }

    #[test]
    fn reduction_round_trips() {
        let m = standard(7, 0.45);
        let b = follower_reduction(&m);
        let (rho, r) = b.reassemble_rows(m.n_agents());
        for (a, &k) in b.followers.iter().enumerate() {
            for j in 0..m.n_agents() {
                assert_eq!(rho[(a, j)], m.l_rho()[(k, j)]);
                assert_eq!(r[(a, j)], m.l_r()[(k, j)]);
            }
        }
    }

    #[test]
    fn all_leaders_gives_empty_blocks() {
        let l = DMatrix::zeros(3, 3);
        let m = LinearFlockModel::from_matrices(l.clone(), l, &[0, 1, 2], -1.0, -2.0, None).unwrap();
        let b = follower_reduction(&m);
        assert_eq!(b.ff_rho.shape(), (0, 0));
        assert_eq!(b.fl_rho.shape(), (0, 3));
        assert_eq!(companion_matrix(&m).shape(), (0, 0));
    }

    #[test]
    fn single_follower_companion_pins_sign_convention() {
        let m = LinearFlockModel::standard(&StandardExampleParams::new(1, 0.5, 0.5, -1.0, -2.0)).unwrap();
        let c = companion_matrix(&m);
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0]));
        for l in eigenvalues(&c).unwrap() {
            assert!((l + 1.0).norm() < 1e-7);
        }
    }

    #[test]
    fn zero_gains_give_nilpotent_companion() {
        let m = standard(5, 0.45).with_gains(0.0, 0.0);
        let ev = eigenvalues(&companion_matrix(&m)).unwrap();
        assert!(ev.iter().all(|l| l.norm() == 0.0));
    }

    #[test]
    fn summary_of_double_root() {
        let s = spectral_summary(&[Complex64::new(-1.0, 0.0); 2], 1e-3);
        assert_eq!(s.spectral_abscissa, -1.0);
        assert_eq!(s.min_abs_real, 1.0);
        assert_eq!(s.min_modulus, 1.0);
        assert_eq!(s.near_zero_count, 0);
    }
}
