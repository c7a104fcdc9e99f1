use log::warn;

use super::{companion_matrix, eigenvalues, DynamicsError, LeaderSignal};
use crate::linalg::SparseRows;
use crate::model::{FlockState, LinearFlockModel};

pub const DEFAULT_DT: f64 = 0.01;
/// Horizon cap for impulse-maximum experiments.
pub const DEFAULT_HORIZON_CAP: f64 = 1e6;
/// Upper bound on stored samples when no record interval is given.
pub const MAX_RECORDED_SAMPLES: f64 = 1e5;
/// `dt * spectral_radius` above which classical RK4 is flagged.
pub const RK4_STABILITY_MARGIN: f64 = 2.5;

/// When an integration may end before its horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// Run to the horizon.
    Horizon,
    /// Stop once the mechanical energy has fallen below `energy_ratio` times
    /// its running peak and the tail excursion `|z_N|` has not grown during
    /// the trailing `stall_fraction` of elapsed time.
    EnergyDecay { energy_ratio: f64, stall_fraction: f64 },
}

impl StopRule {
    pub fn impulse_default() -> Self {
        StopRule::EnergyDecay { energy_ratio: 1e-6, stall_fraction: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub horizon: f64,
    pub stop: StopRule,
    /// Sampling interval of the stored trajectory. `None` keeps at most
    /// about [`MAX_RECORDED_SAMPLES`] samples.
    pub record_interval: Option<f64>,
}

impl IntegrateOptions {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self { dt, horizon, stop: StopRule::Horizon, record_interval: None }
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_record_interval(mut self, interval: f64) -> Self {
        self.record_interval = Some(interval);
        self
    }

    fn record_every(&self) -> usize {
        let steps = match self.record_interval {
            Some(iv) => (iv / self.dt).round(),
            None => ((self.horizon / self.dt) / MAX_RECORDED_SAMPLES).ceil(),
        };
        if steps.is_finite() && steps >= 1.0 {
            steps as usize
        } else {
            1
        }
    }
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self::new(DEFAULT_DT, DEFAULT_HORIZON_CAP).with_stop(StopRule::impulse_default())
    }
}

/// Sampled solution. Maxima are tracked at every integration step, so they
/// can exceed what the thinned samples show.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<FlockState>,
    /// Index of the agent tracked by `max_abs_zn`.
    pub tail: usize,
    pub max_abs_zn: f64,
    pub t_max_abs_zn: f64,
    pub max_abs_z_any: f64,
    /// Set when the stop rule ended the run before the horizon.
    pub stopped_early: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> &FlockState {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn n_agents(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }
}

/// `1/2 [ (z', z') - f (L_rho z, z) ]`. The antisymmetric part of `L_rho`
/// drops out of the quadratic form.
pub fn mechanical_energy(m: &LinearFlockModel, z: &[f64], zdot: &[f64]) -> f64 {
    let rows = SparseRows::from_dense(m.l_rho());
    energy_with(&rows, m.f(), z, zdot)
}

fn energy_with(l_rho: &SparseRows, f: f64, z: &[f64], zdot: &[f64]) -> f64 {
    let kinetic: f64 = zdot.iter().map(|v| v * v).sum();
    0.5 * (kinetic - f * l_rho.quadratic_form(z))
}

/// Followers at rest in formation while every leader starts moving with
/// velocity `v`, expressed in the leaders' frame: `z = 0`, follower
/// velocities `-v`, leaders pinned.
pub fn unit_step_initial_state(m: &LinearFlockModel, v: f64) -> FlockState {
    let n = m.n_agents();
    let zdot = (0..n).map(|k| if m.is_leader(k) { 0.0 } else { -v }).collect();
    FlockState::new(0.0, vec![0.0; n], zdot)
}

/// Leader velocity step in the leaders' frame, with the impulse stop rule
/// unless `opts` says otherwise.
pub fn step_response(m: &LinearFlockModel, v_leader: f64, opts: &IntegrateOptions) -> Result<Trajectory, DynamicsError> {
    let init = unit_step_initial_state(m, v_leader);
    let leaders = vec![LeaderSignal::pinned(); m.leaders().len()];
    integrate(m, &init, &leaders, opts)
}

struct System<'a> {
    followers: Vec<usize>,
    leaders: &'a [usize],
    signals: &'a [LeaderSignal],
    rows_rho: SparseRows,
    rows_r: SparseRows,
    f: f64,
    g: f64,
    zfull: Vec<f64>,
    vfull: Vec<f64>,
}

impl System<'_> {
    fn load(&mut self, t: f64, zf: &[f64], vf: &[f64]) {
        for (a, &k) in self.followers.iter().enumerate() {
            self.zfull[k] = zf[a];
            self.vfull[k] = vf[a];
        }
        for (&k, sig) in self.leaders.iter().zip(self.signals) {
            let (p, v) = sig.eval(t);
            self.zfull[k] = p;
            self.vfull[k] = v;
        }
    }

    fn deriv(&mut self, t: f64, zf: &[f64], vf: &[f64], dz: &mut [f64], dv: &mut [f64]) {
        self.load(t, zf, vf);
        dz.copy_from_slice(vf);
        for a in 0..self.followers.len() {
            dv[a] = self.f * self.rows_rho.row_dot(a, &self.zfull) + self.g * self.rows_r.row_dot(a, &self.vfull);
        }
    }
}

fn check_step_size(m: &LinearFlockModel, dt: f64) -> Result<(), DynamicsError> {
    // Cheap row-norm bound first; only eigensolve when it is inconclusive.
    let (f, g) = (m.f().abs(), m.g().abs());
    let bound = (0..m.n_agents())
        .map(|k| {
            let s: f64 = (0..m.n_agents()).map(|i| f * m.l_rho()[(k, i)].abs() + g * m.l_r()[(k, i)].abs()).sum();
            s.max(1.0)
        })
        .fold(1.0, f64::max);
    if dt * bound < RK4_STABILITY_MARGIN {
        return Ok(());
    }
    let radius = eigenvalues(&companion_matrix(m))?.iter().map(|l| l.norm()).fold(0.0, f64::max);
    if dt * radius >= RK4_STABILITY_MARGIN {
        warn!(
            "dt * spectral radius = {:.3} exceeds the RK4 margin {}; results may be unstable",
            dt * radius,
            RK4_STABILITY_MARGIN
        );
    }
    Ok(())
}

/// Classical fourth-order Runge-Kutta on the follower equations, leaders
/// supplied by `leader_program` (one signal per leader, ascending index).
pub fn integrate(
    m: &LinearFlockModel,
    init: &FlockState,
    leader_program: &[LeaderSignal],
    opts: &IntegrateOptions,
) -> Result<Trajectory, DynamicsError> {
    let n = m.n_agents();
    let report = m.validate();
    if !report.is_well_formed() {
        return Err(DynamicsError::NotWellFormed(report.max_residual()));
    }
    if init.len() != n || init.zdot.len() != n {
        return Err(DynamicsError::StateSize { expected: n, got: init.len() });
    }
    if leader_program.len() != m.leaders().len() {
        return Err(DynamicsError::LeaderCount { expected: m.leaders().len(), got: leader_program.len() });
    }
    let dt = opts.dt;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    check_step_size(m, dt)?;

    let followers = m.followers();
    let nf = followers.len();
    let mut sys = System {
        rows_rho: SparseRows::select_rows(m.l_rho(), &followers),
        rows_r: SparseRows::select_rows(m.l_r(), &followers),
        followers,
        leaders: m.leaders(),
        signals: leader_program,
        f: m.f(),
        g: m.g(),
        zfull: init.z.clone(),
        vfull: init.zdot.clone(),
    };
    let energy_rows = SparseRows::from_dense(m.l_rho());

    let t0 = init.t;
    let mut zf: Vec<f64> = sys.followers.iter().map(|&k| init.z[k]).collect();
    let mut vf: Vec<f64> = sys.followers.iter().map(|&k| init.zdot[k]).collect();
    sys.load(t0, &zf, &vf);

    let tail = m.tail();
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![FlockState::new(t0, sys.zfull.clone(), sys.vfull.clone())],
        tail,
        max_abs_zn: sys.zfull[tail].abs(),
        t_max_abs_zn: t0,
        max_abs_z_any: sys.zfull.iter().fold(0.0, |a, z| a.max(z.abs())),
        stopped_early: false,
    };
    let mut peak_energy = energy_with(&energy_rows, m.f(), &sys.zfull, &sys.vfull).abs();

    let n_steps = (opts.horizon / dt).round().max(0.0) as usize;
    let record_every = opts.record_every();
    const ENERGY_CHECK_EVERY: usize = 16;

    let mut k1 = (vec![0.0; nf], vec![0.0; nf]);
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tz = vec![0.0; nf];
    let mut tv = vec![0.0; nf];

    for step in 1..=n_steps {
        let t = t0 + (step - 1) as f64 * dt;
        let half = 0.5 * dt;
        sys.deriv(t, &zf, &vf, &mut k1.0, &mut k1.1);
        for i in 0..nf {
            tz[i] = zf[i] + half * k1.0[i];
            tv[i] = vf[i] + half * k1.1[i];
        }
        sys.deriv(t + half, &tz, &tv, &mut k2.0, &mut k2.1);
        for i in 0..nf {
            tz[i] = zf[i] + half * k2.0[i];
            tv[i] = vf[i] + half * k2.1[i];
        }
        sys.deriv(t + half, &tz, &tv, &mut k3.0, &mut k3.1);
        for i in 0..nf {
            tz[i] = zf[i] + dt * k3.0[i];
            tv[i] = vf[i] + dt * k3.1[i];
        }
        sys.deriv(t + dt, &tz, &tv, &mut k4.0, &mut k4.1);
        let sixth = dt / 6.0;
        for i in 0..nf {
            zf[i] += sixth * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
            vf[i] += sixth * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]);
        }

        let t_new = t0 + step as f64 * dt;
        sys.load(t_new, &zf, &vf);
        let mut any_max = 0.0f64;
        for (z, v) in sys.zfull.iter().zip(&sys.vfull) {
            if !(z.is_finite() && v.is_finite()) || z.abs() > 1e150 {
                return Err(DynamicsError::BlowUp { t: t_new });
            }
            any_max = any_max.max(z.abs());
        }
        traj.max_abs_z_any = traj.max_abs_z_any.max(any_max);
        let zn = sys.zfull[tail].abs();
        if zn > traj.max_abs_zn {
            traj.max_abs_zn = zn;
            traj.t_max_abs_zn = t_new;
        }

        let last = step == n_steps;
        let mut stop = false;
        if let StopRule::EnergyDecay { energy_ratio, stall_fraction } = opts.stop {
            if step % ENERGY_CHECK_EVERY == 0 {
                let e = energy_with(&energy_rows, m.f(), &sys.zfull, &sys.vfull).abs();
                peak_energy = peak_energy.max(e);
                let elapsed = t_new - t0;
                let stalled = (t_new - traj.t_max_abs_zn) >= stall_fraction * elapsed;
                stop = e < energy_ratio * peak_energy && stalled;
            }
        }
        if last || stop || step % record_every == 0 {
            traj.times.push(t_new);
            traj.states.push(FlockState::new(t_new, sys.zfull.clone(), sys.vfull.clone()));
        }
        if stop {
            traj.stopped_early = !last;
            break;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StandardExampleParams;

    fn single_follower() -> LinearFlockModel {
        LinearFlockModel::standard(&StandardExampleParams::new(1, 0.5, 0.5, -1.0, -2.0)).unwrap()
    }

    #[test]
    fn single_follower_matches_critically_damped_solution() {
        let m = single_follower();
        let opts = IntegrateOptions::new(0.01, 10.0);
        let traj = step_response(&m, 0.1, &opts).unwrap();
        let err = traj
            .states
            .iter()
            .map(|s| (s.z[1] - (-0.1 * s.t * (-s.t).exp())).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err}");
        assert!((traj.max_abs_zn - 0.1 / std::f64::consts::E).abs() < 1e-6);
        assert!((traj.t_max_abs_zn - 1.0).abs() < 0.011);
    }

    #[test]
    fn zero_step_is_identically_zero() {
        let m = LinearFlockModel::standard(&StandardExampleParams::symmetric(10, 0.45)).unwrap();
        let traj = step_response(&m, 0.0, &IntegrateOptions::new(0.01, 50.0)).unwrap();
        assert_eq!(traj.max_abs_z_any, 0.0);
        assert!(traj.states.iter().all(|s| s.z.iter().chain(&s.zdot).all(|&v| v == 0.0)));
    }

    #[test]
    fn uniform_motion_is_preserved() {
        let m = LinearFlockModel::standard(&StandardExampleParams::symmetric(6, 0.45)).unwrap();
        let (z0, v) = (0.3, 0.7);
        let init = FlockState::new(0.0, vec![z0; 7], vec![v; 7]);
        let leaders = [LeaderSignal::Constant { position: z0, velocity: v }];
        let traj = integrate(&m, &init, &leaders, &IntegrateOptions::new(0.01, 20.0)).unwrap();
        for s in &traj.states {
            for k in 0..7 {
                assert!((s.z[k] - (z0 + v * s.t)).abs() < 1e-12);
                assert!((s.zdot[k] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn record_interval_thins_but_keeps_endpoints() {
        let m = single_follower();
        let traj = step_response(&m, 0.1, &IntegrateOptions::new(0.01, 10.0).with_record_interval(1.0)).unwrap();
        assert_eq!(traj.times.len(), 11);
        assert!((traj.times[10] - 10.0).abs() < 1e-12);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn energy_stop_rule_ends_decayed_runs() {
        let m = single_follower();
        let opts = IntegrateOptions::new(0.01, 1e4).with_stop(StopRule::impulse_default());
        let traj = step_response(&m, 0.1, &opts).unwrap();
        assert!(traj.stopped_early);
        assert!(traj.final_state().t < 100.0);
        assert!((traj.max_abs_zn - 0.1 / std::f64::consts::E).abs() < 1e-6);
    }

    #[test]
    fn blow_up_is_reported_with_time() {
        let m = LinearFlockModel::standard(&StandardExampleParams::symmetric(3, 0.5))
            .unwrap()
            .with_gains(1.0, 1.0);
        let err = step_response(&m, 0.1, &IntegrateOptions::new(0.01, 1e5)).unwrap_err();
        assert!(matches!(err, DynamicsError::BlowUp { t } if t > 0.0));
    }

    #[test]
    fn argument_errors() {
        let m = single_follower();
        let init = FlockState::at_rest(2);
        assert!(matches!(
            integrate(&m, &init, &[], &IntegrateOptions::new(0.01, 1.0)),
            Err(DynamicsError::LeaderCount { expected: 1, got: 0 })
        ));
        assert!(matches!(
            integrate(&m, &init, &[LeaderSignal::pinned()], &IntegrateOptions::new(0.0, 1.0)),
            Err(DynamicsError::InvalidStep(_))
        ));
        assert!(matches!(
            integrate(&m, &FlockState::at_rest(3), &[LeaderSignal::pinned()], &IntegrateOptions::new(0.01, 1.0)),
            Err(DynamicsError::StateSize { .. })
        ));
    }
}
