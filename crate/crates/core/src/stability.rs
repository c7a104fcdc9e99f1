//! Flock (in)stability of growing families.
//!
//! A family is harmonically unstable when `ln max_w |a_N(w)|` grows linearly
//! in the flock size, and impulse unstable when `ln max_t |z_N(t)|` after a
//! leader velocity step does. At finite sizes both rates are estimated by a
//! least-squares slope against `N` and compared with a threshold.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::dynamics::{self, step_response, DynamicsError, IntegrateOptions, StopRule};
use crate::frequency::{self, FrequencyError};
use crate::model::{LinearFlockModel, ModelError, StandardExampleParams};
use crate::par::{self, Execution};

pub const DEFAULT_SLOPE_THRESHOLD: f64 = 0.01;
pub const DEFAULT_N_LIST: [usize; 3] = [25, 50, 100];
/// Step used for impulse maxima. The transients of interest evolve on
/// timescales far slower than the step, and the companion spectral radius
/// for `f = -1, g = -2` keeps `dt * radius` well inside the RK4 region.
pub const IMPULSE_DT: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("follower counts must be strictly increasing with at least 3 entries, got {0:?}")]
    BadSizeList(Vec<usize>),
    #[error("family member N = {n} is not stabilized (spectral abscissa {abscissa:e})")]
    NotStabilized { n: usize, abscissa: f64 },
    #[error("building family member N = {n}: {source}")]
    Model { n: usize, source: ModelError },
    #[error("frequency response for N = {n}: {source}")]
    Frequency { n: usize, source: FrequencyError },
    #[error("impulse run for N = {n} failed ({source}); completed maxima: {partial:?}")]
    Impulse { n: usize, source: DynamicsError, partial: Vec<(usize, f64)> },
    #[error("peak values must be positive and finite")]
    NonPositivePeaks,
    #[error("need at least 2 points with distinct abscissae for a fit")]
    DegenerateFit,
}

type Generator = Arc<dyn Fn(usize) -> Result<LinearFlockModel, ModelError> + Send + Sync>;

/// How family members are built from their follower count.
#[derive(Clone)]
pub enum FamilyGenerator {
    Standard { rho: f64, r: f64, f: f64, g: f64 },
    Custom(Generator),
}

impl fmt::Debug for FamilyGenerator {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyGenerator::Standard { rho, r, f, g } => {
                write!(out, "Standard {{ rho: {rho}, r: {r}, f: {f}, g: {g} }}")
            }
            FamilyGenerator::Custom(_) => write!(out, "Custom(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlockFamily {
    pub generator: FamilyGenerator,
    pub n_list: Vec<usize>,
}

impl FlockFamily {
    pub fn standard(rho: f64, r: f64, f: f64, g: f64, n_list: &[usize]) -> Result<Self, StabilityError> {
        Self::new(FamilyGenerator::Standard { rho, r, f, g }, n_list)
    }

    pub fn custom<F>(gen: F, n_list: &[usize]) -> Result<Self, StabilityError>
    where
        F: Fn(usize) -> Result<LinearFlockModel, ModelError> + Send + Sync + 'static,
    {
        Self::new(FamilyGenerator::Custom(Arc::new(gen)), n_list)
    }

    fn new(generator: FamilyGenerator, n_list: &[usize]) -> Result<Self, StabilityError> {
        if n_list.len() < 3 || n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(StabilityError::BadSizeList(n_list.to_vec()));
        }
        Ok(Self { generator, n_list: n_list.to_vec() })
    }

    pub fn model(&self, n: usize) -> Result<LinearFlockModel, StabilityError> {
        let built = match &self.generator {
            FamilyGenerator::Standard { rho, r, f, g } => {
                LinearFlockModel::standard(&StandardExampleParams::new(n, *rho, *r, *f, *g))
            }
            FamilyGenerator::Custom(gen) => gen(n),
        };
        built.map_err(|source| StabilityError::Model { n, source })
    }

    fn stabilized_model(&self, n: usize) -> Result<LinearFlockModel, StabilityError> {
        let m = self.model(n)?;
        let spec = dynamics::model_spectrum(&m, 0.0)
            .map_err(|e| StabilityError::Frequency { n, source: e.into() })?;
        if !(spec.spectral_abscissa < 0.0) {
            return Err(StabilityError::NotStabilized { n, abscissa: spec.spectral_abscissa });
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierOptions {
    pub omega_min: f64,
    pub omega_max: f64,
    pub grid_points: usize,
    pub refine_iters: usize,
    pub impulse: IntegrateOptions,
    pub slope_threshold: f64,
    pub exec: Execution,
}

impl Default for ClassifierOptions {
    fn default() -> Self {
        Self {
            omega_min: frequency::DEFAULT_OMEGA_MIN,
            omega_max: frequency::DEFAULT_OMEGA_MAX,
            grid_points: frequency::DEFAULT_GRID_POINTS,
            refine_iters: frequency::DEFAULT_REFINE_ITERS,
            impulse: IntegrateOptions::new(IMPULSE_DT, dynamics::DEFAULT_HORIZON_CAP)
                .with_stop(StopRule::impulse_default())
                .with_record_interval(1e3),
            slope_threshold: DEFAULT_SLOPE_THRESHOLD,
            exec: Execution::Parallel,
        }
    }
}

/// Ordinary least-squares line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit, StabilityError> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(StabilityError::DegenerateFit);
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(StabilityError::DegenerateFit);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(LineFit { slope, intercept, rms: (ss / n as f64).sqrt() })
}

/// Growth rate of `ln(max)` per added agent.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentEstimate {
    pub n_list: Vec<usize>,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    /// `ln` of the per-member maxima, aligned with `n_list`.
    pub per_n_values: Vec<f64>,
}

fn estimate(n_list: &[usize], maxima: &[f64]) -> Result<ExponentEstimate, StabilityError> {
    let per_n_values: Vec<f64> = maxima.iter().map(|m| m.ln()).collect();
    if maxima.iter().all(|&m| m == 0.0) {
        return Ok(ExponentEstimate {
            n_list: n_list.to_vec(),
            slope: 0.0,
            intercept: f64::NEG_INFINITY,
            residual: 0.0,
            per_n_values,
        });
    }
    if per_n_values.iter().any(|v| !v.is_finite()) {
        return Err(StabilityError::NonPositivePeaks);
    }
    let xs: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    let fit = fit_line(&xs, &per_n_values)?;
    Ok(ExponentEstimate {
        n_list: n_list.to_vec(),
        slope: fit.slope,
        intercept: fit.intercept,
        residual: fit.rms,
        per_n_values,
    })
}

/// Maximum tail gain of one member over the adaptive frequency grid.
pub fn member_peak_gain(m: &LinearFlockModel, opts: &ClassifierOptions) -> Result<frequency::Peak, FrequencyError> {
    let grid = frequency::adaptive_grid(m, opts.omega_min, opts.omega_max, opts.grid_points)?;
    frequency::peak_gain(m, &grid, opts.refine_iters, opts.exec)
}

pub fn harmonic_exponent(fam: &FlockFamily, opts: &ClassifierOptions) -> Result<ExponentEstimate, StabilityError> {
    let peaks = par::map(opts.exec, &fam.n_list, |&n| {
        let m = fam.stabilized_model(n)?;
        member_peak_gain(&m, opts)
            .map(|p| p.gain)
            .map_err(|source| StabilityError::Frequency { n, source })
    });
    let peaks: Vec<f64> = peaks.into_iter().collect::<Result<_, _>>()?;
    estimate(&fam.n_list, &peaks)
}

pub fn impulse_exponent(
    fam: &FlockFamily,
    v_leader: f64,
    opts: &ClassifierOptions,
) -> Result<ExponentEstimate, StabilityError> {
    let runs = par::map(opts.exec, &fam.n_list, |&n| {
        let m = fam.stabilized_model(n)?;
        step_response(&m, v_leader, &opts.impulse)
            .map(|t| t.max_abs_zn)
            .map_err(|source| StabilityError::Impulse { n, source, partial: Vec::new() })
    });
    let partial: Vec<(usize, f64)> = fam
        .n_list
        .iter()
        .zip(&runs)
        .filter_map(|(&n, r)| r.as_ref().ok().map(|&v| (n, v)))
        .collect();
    let mut maxima = Vec::with_capacity(runs.len());
    for r in runs {
        match r {
            Ok(v) => maxima.push(v),
            Err(StabilityError::Impulse { n, source, .. }) => {
                return Err(StabilityError::Impulse { n, source, partial });
            }
            Err(e) => return Err(e),
        }
    }
    estimate(&fam.n_list, &maxima)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    FlockStable,
    HarmonicallyUnstable,
    ImpulseUnstable,
    BothUnstable,
}

impl Verdict {
    pub fn from_slopes(harmonic: f64, impulse: f64, threshold: f64) -> Self {
        match (harmonic > threshold, impulse > threshold) {
            (false, false) => Verdict::FlockStable,
            (true, false) => Verdict::HarmonicallyUnstable,
            (false, true) => Verdict::ImpulseUnstable,
            (true, true) => Verdict::BothUnstable,
        }
    }

    pub fn is_stable(self) -> bool {
        self == Verdict::FlockStable
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        out.write_str(match self {
            Verdict::FlockStable => "flock-stable",
            Verdict::HarmonicallyUnstable => "harmonically-unstable",
            Verdict::ImpulseUnstable => "impulse-unstable",
            Verdict::BothUnstable => "both-unstable",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierReport {
    pub harmonic: ExponentEstimate,
    pub impulse: ExponentEstimate,
    pub threshold: f64,
    pub verdict: Verdict,
}

pub fn classify(fam: &FlockFamily, v_leader: f64, opts: &ClassifierOptions) -> Result<ClassifierReport, StabilityError> {
    let harmonic = harmonic_exponent(fam, opts)?;
    let impulse = impulse_exponent(fam, v_leader, opts)?;
    let verdict = Verdict::from_slopes(harmonic.slope, impulse.slope, opts.slope_threshold);
    Ok(ClassifierReport { harmonic, impulse, threshold: opts.slope_threshold, verdict })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthLaw {
    Exponential,
    Power,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingFit {
    /// Slope of `ln(peak)` against `N`.
    pub exp_rate: f64,
    pub exp_fit: LineFit,
    /// Slope of `ln(peak)` against `ln(N)`.
    pub power_exponent: f64,
    pub power_fit: LineFit,
    pub preferred: GrowthLaw,
}

/// Compares exponential and power-law growth of positive peaks; the model
/// with the smaller RMS residual in `ln(peak)` wins (ties go to power law).
pub fn scaling_fit(peaks: &[f64], n_list: &[usize]) -> Result<ScalingFit, StabilityError> {
    if peaks.iter().any(|&p| !(p > 0.0 && p.is_finite())) || n_list.contains(&0) {
        return Err(StabilityError::NonPositivePeaks);
    }
    let ys: Vec<f64> = peaks.iter().map(|p| p.ln()).collect();
    let ns: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    let ln_ns: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let exp_fit = fit_line(&ns, &ys)?;
    let power_fit = fit_line(&ln_ns, &ys)?;
    let preferred = if exp_fit.rms < power_fit.rms { GrowthLaw::Exponential } else { GrowthLaw::Power };
    Ok(ScalingFit {
        exp_rate: exp_fit.slope,
        exp_fit,
        power_exponent: power_fit.slope,
        power_fit,
        preferred,
    })
}
