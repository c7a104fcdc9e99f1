//! Steady-state response of a flock to a harmonic leader.
//!
//! With every leader moving as `exp(i w t)`, the orbit converges to
//! `a * exp(i w t)` where the follower amplitudes solve
//!
//! ```text
//! (-w^2 I - f Lff_rho - i w g Lff_r) a_f = (f Lfl_rho + i w g Lfl_r) 1
//! ```
//!
//! and leader amplitudes are 1. The tail amplitude `|a_N(w)|` and its
//! maximum over `w` measure how perturbations amplify along the flock.

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::{companion_matrix, follower_reduction, FollowerBlocks};
use crate::linalg::{eigenvalues, ComplexLu, EigenError};
use crate::model::LinearFlockModel;
use crate::par::{self, Execution};

pub const DEFAULT_OMEGA_MIN: f64 = 1e-4;
pub const DEFAULT_OMEGA_MAX: f64 = 1e2;
pub const DEFAULT_GRID_POINTS: usize = 2000;
pub const DEFAULT_REFINE_ITERS: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrequencyError {
    #[error("frequency must be positive and finite, got {0}")]
    InvalidOmega(f64),
    #[error("follower system is singular at omega = {omega} (undamped resonance)")]
    Singular { omega: f64 },
    #[error("model is not well-formed (max row-sum residual {0:e})")]
    NotWellFormed(f64),
    #[error("frequency grid must be nonempty and strictly increasing")]
    BadGrid,
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// Reusable solver for one model; the block partition is computed once.
#[derive(Clone, Debug)]
pub struct ResponseSolver {
    blocks: FollowerBlocks,
    n_agents: usize,
    f: f64,
    g: f64,
}

impl ResponseSolver {
    pub fn new(m: &LinearFlockModel) -> Result<Self, FrequencyError> {
        let report = m.validate();
        if !report.is_well_formed() {
            return Err(FrequencyError::NotWellFormed(report.max_residual()));
        }
        Ok(Self { blocks: follower_reduction(m), n_agents: m.n_agents(), f: m.f(), g: m.g() })
    }

    /// Amplitudes over all agents at `omega > 0`.
    pub fn solve(&self, omega: f64) -> Result<Vec<Complex64>, FrequencyError> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(FrequencyError::InvalidOmega(omega));
        }
        self.solve_signed(omega)
    }

    /// Same as [`ResponseSolver::solve`] but accepts any nonzero real
    /// frequency; used to check `a(-w) = conj(a(w))`.
    pub fn solve_signed(&self, omega: f64) -> Result<Vec<Complex64>, FrequencyError> {
        if !(omega != 0.0 && omega.is_finite()) {
            return Err(FrequencyError::InvalidOmega(omega));
        }
        let b = &self.blocks;
        let nf = b.followers.len();
        let iwg = Complex64::new(0.0, omega * self.g);
        let fc = Complex64::new(self.f, 0.0);
        let a = nalgebra::DMatrix::from_fn(nf, nf, |i, j| {
            let diag = if i == j { -omega * omega } else { 0.0 };
            Complex64::new(diag, 0.0) - fc * b.ff_rho[(i, j)] - iwg * b.ff_r[(i, j)]
        });
        let rhs: Vec<Complex64> = (0..nf)
            .map(|i| (0..b.leaders.len()).map(|j| fc * b.fl_rho[(i, j)] + iwg * b.fl_r[(i, j)]).sum())
            .collect();
        let lu = ComplexLu::factor(a).map_err(|_| FrequencyError::Singular { omega })?;
        let af = lu.solve(&rhs);
        if af.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(FrequencyError::Singular { omega });
        }
        let mut out = vec![Complex64::new(1.0, 0.0); self.n_agents];
        for (a, &k) in b.followers.iter().enumerate() {
            out[k] = af[a];
        }
        Ok(out)
    }

    pub fn tail_gain(&self, omega: f64) -> Result<f64, FrequencyError> {
        Ok(self.solve(omega)?[self.n_agents - 1].norm())
    }
}

pub fn response_at(m: &LinearFlockModel, omega: f64) -> Result<Vec<Complex64>, FrequencyError> {
    ResponseSolver::new(m)?.solve(omega)
}

/// Per-frequency amplitudes; failed points keep `None` and are listed in
/// `failures`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseTable {
    pub omegas: Vec<f64>,
    pub amplitudes: Vec<Option<Vec<Complex64>>>,
    pub gains: Vec<Option<Vec<f64>>>,
    pub failures: Vec<(f64, FrequencyError)>,
}

impl ResponseTable {
    /// `|a_k(w)|` across the grid for one agent (`None` where the solve failed).
    pub fn agent_gains(&self, k: usize) -> Vec<Option<f64>> {
        self.gains.iter().map(|g| g.as_ref().map(|g| g[k])).collect()
    }
}

fn check_grid(grid: &[f64]) -> Result<(), FrequencyError> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FrequencyError::BadGrid);
    }
    match grid.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        Some(&w) => Err(FrequencyError::InvalidOmega(w)),
        None => Ok(()),
    }
}

pub fn sweep(m: &LinearFlockModel, grid: &[f64], exec: Execution) -> Result<ResponseTable, FrequencyError> {
    check_grid(grid)?;
    let solver = ResponseSolver::new(m)?;
    let results = par::map(exec, grid, |&w| solver.solve(w));
    let mut table = ResponseTable {
        omegas: grid.to_vec(),
        amplitudes: Vec::with_capacity(grid.len()),
        gains: Vec::with_capacity(grid.len()),
        failures: Vec::new(),
    };
    for (&w, r) in grid.iter().zip(results) {
        match r {
            Ok(a) => {
                table.gains.push(Some(a.iter().map(|c| c.norm()).collect()));
                table.amplitudes.push(Some(a));
            }
            Err(e) => {
                table.amplitudes.push(None);
                table.gains.push(None);
                table.failures.push((w, e));
            }
        }
    }
    Ok(table)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2, "log_grid({lo}, {hi}, {n})");
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

pub fn default_grid() -> Vec<f64> {
    log_grid(DEFAULT_OMEGA_MIN, DEFAULT_OMEGA_MAX, DEFAULT_GRID_POINTS)
}

/// Log grid that reaches below the slowest companion eigenvalue, plus
/// points placed on and around the least-damped resonances.
///
/// Sharp low-frequency resonances (eigenvalues exponentially close to the
/// origin) otherwise fall below or between the points of a fixed grid. The
/// point density per decade of `[omega_min, omega_max]` with `points` is
/// kept when the range is extended.
pub fn adaptive_grid(
    m: &LinearFlockModel,
    omega_min: f64,
    omega_max: f64,
    points: usize,
) -> Result<Vec<f64>, FrequencyError> {
    let eigs = eigenvalues(&companion_matrix(m))?;
    let slowest = eigs.iter().map(|l| l.norm()).filter(|&r| r > 0.0).fold(f64::INFINITY, f64::min);
    let lo = if slowest.is_finite() { omega_min.min(0.1 * slowest) } else { omega_min };
    let per_decade = points as f64 / (omega_max / omega_min).log10();
    let n = ((omega_max / lo).log10() * per_decade).ceil().max(points as f64) as usize;
    let mut grid = log_grid(lo, omega_max, n);

    let mut resonant: Vec<_> = eigs.iter().filter(|l| l.im > 0.0).collect();
    resonant.sort_by(|a, b| (a.re.abs() / a.im).partial_cmp(&(b.re.abs() / b.im)).unwrap());
    for l in resonant.into_iter().take(8) {
        let width = l.re.abs();
        for j in [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
            let w = l.im + j * width;
            if w > lo && w < omega_max {
                grid.push(w);
            }
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    Ok(grid)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub omega: f64,
    pub gain: f64,
}

/// Maximum of `|a_N(w)|` over `grid`, refined by golden-section search in
/// `log w` on the bracket around the best grid point.
pub fn peak_gain(
    m: &LinearFlockModel,
    grid: &[f64],
    refine_iters: usize,
    exec: Execution,
) -> Result<Peak, FrequencyError> {
    check_grid(grid)?;
    let solver = ResponseSolver::new(m)?;
    let gains = par::map(exec, grid, |&w| solver.tail_gain(w));
    let mut best = Peak { omega: grid[0], gain: f64::NEG_INFINITY };
    let mut best_i = 0;
    for (i, (g, &w)) in gains.into_iter().zip(grid).enumerate() {
        let g = g?;
        if g > best.gain {
            best = Peak { omega: w, gain: g };
            best_i = i;
        }
    }
    if refine_iters == 0 || grid.len() < 2 {
        return Ok(best);
    }
    let lo = grid[best_i.saturating_sub(1)].ln();
    let hi = grid[(best_i + 1).min(grid.len() - 1)].ln();
    let refined = golden_max(|u| solver.tail_gain(u.exp()), lo, hi, refine_iters)?;
    if refined.1 > best.gain {
        best = Peak { omega: refined.0.exp(), gain: refined.1 };
    }
    Ok(best)
}

/// Golden-section search for a maximum of `f` on `[a, b]`. Returns the best
/// abscissa evaluated and its value.
fn golden_max<F>(f: F, mut a: f64, mut b: f64, iters: usize) -> Result<(f64, f64), FrequencyError>
where
    F: Fn(f64) -> Result<f64, FrequencyError>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    Ok(best)
}
