use super::{PlanarError, PlanarFlockModel, PlanarLeaderProgram, PlanarRhs, PlanarState, Vec2};

#[derive(Clone, Debug, PartialEq)]
pub struct PlanarOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Sampling interval of the stored trajectory; `None` stores every step.
    pub record_interval: Option<f64>,
    /// Times at which full snapshots are kept for space plots (rounded to
    /// the nearest step).
    pub snapshot_times: Vec<f64>,
}

impl PlanarOptions {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self { dt, horizon, record_interval: None, snapshot_times: Vec::new() }
    }

    pub fn with_record_interval(mut self, interval: f64) -> Self {
        self.record_interval = Some(interval);
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanarTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<PlanarState>,
    pub snapshots: Vec<PlanarState>,
}

impl PlanarTrajectory {
    pub fn final_state(&self) -> &PlanarState {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

/// Classical RK4 on the follower equations. Leader positions and velocities
/// come from `leader_program` (one per leader, ascending index) at every
/// substep, overriding the leader entries of `init`.
pub fn integrate_planar(
    m: &PlanarFlockModel,
    init: &PlanarState,
    leader_program: &[PlanarLeaderProgram],
    opts: &PlanarOptions,
) -> Result<PlanarTrajectory, PlanarError> {
    let n = m.n_agents();
    let report = m.base().validate();
    if !report.is_well_formed() {
        return Err(PlanarError::NotWellFormed(report.max_residual()));
    }
    if init.len() != n || init.velocities.len() != n {
        return Err(PlanarError::Dimension(format!("state has {} agents, model has {}", init.len(), n)));
    }
    let leaders = m.base().leaders().to_vec();
    if leader_program.len() != leaders.len() {
        return Err(PlanarError::LeaderCount { expected: leaders.len(), got: leader_program.len() });
    }
    let dt = opts.dt;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PlanarError::InvalidStep(dt));
    }

    let rhs = PlanarRhs::new(m);
    let place_leaders = |t: f64, x: &mut [Vec2], v: &mut [Vec2]| {
        for (&k, p) in leaders.iter().zip(leader_program) {
            let (pos, vel) = p.eval(t);
            x[k] = pos;
            v[k] = vel;
        }
    };

    let t0 = init.t;
    let mut x = init.positions.clone();
    let mut v = init.velocities.clone();
    place_leaders(t0, &mut x, &mut v);

    // Headings at the start of the current step; the freeze policy falls
    // back to these during substeps.
    let mut headings = vec![0.0; n];
    let mut scratch = vec![Vec2::zeros(); n];
    rhs.eval(m, t0, &x, &v, None, &mut headings, &mut scratch)?;

    let n_steps = (opts.horizon / dt).round().max(0.0) as usize;
    let record_every = match opts.record_interval {
        Some(iv) if (iv / dt).round() >= 1.0 => (iv / dt).round() as usize,
        _ => 1,
    };
    let snapshot_steps: Vec<usize> =
        opts.snapshot_times.iter().map(|&ts| ((ts - t0) / dt).round().max(0.0) as usize).collect();

    let start = PlanarState::new(t0, x.clone(), v.clone());
    let mut traj = PlanarTrajectory {
        times: vec![t0],
        states: vec![start.clone()],
        snapshots: snapshot_steps.iter().filter(|&&s| s == 0).map(|_| start.clone()).collect(),
    };

    let mut kx: [Vec<Vec2>; 4] = std::array::from_fn(|_| vec![Vec2::zeros(); n]);
    let mut kv: [Vec<Vec2>; 4] = std::array::from_fn(|_| vec![Vec2::zeros(); n]);
    let mut tx = x.clone();
    let mut tv = v.clone();
    let mut used = vec![0.0; n];

    for step in 1..=n_steps {
        let t = t0 + (step - 1) as f64 * dt;
        let half = 0.5 * dt;
        let fallback = headings.clone();
        let stages = [(0.0, 0.0), (half, half), (half, half), (dt, dt)];
        for s in 0..4 {
            let (tau, w) = stages[s];
            if s == 0 {
                tx.copy_from_slice(&x);
                tv.copy_from_slice(&v);
            } else {
                for k in 0..n {
                    tx[k] = x[k] + kx[s - 1][k] * w;
                    tv[k] = v[k] + kv[s - 1][k] * w;
                }
            }
            place_leaders(t + tau, &mut tx, &mut tv);
            kx[s].copy_from_slice(&tv);
            let (_, rest) = kv.split_at_mut(s);
            rhs.eval(m, t + tau, &tx, &tv, Some(&fallback), &mut used, &mut rest[0])?;
            if s == 0 {
                headings.copy_from_slice(&used);
            }
        }
        let sixth = dt / 6.0;
        for k in 0..n {
            x[k] += (kx[0][k] + (kx[1][k] + kx[2][k]) * 2.0 + kx[3][k]) * sixth;
            v[k] += (kv[0][k] + (kv[1][k] + kv[2][k]) * 2.0 + kv[3][k]) * sixth;
        }
        let t_new = t0 + step as f64 * dt;
        place_leaders(t_new, &mut x, &mut v);
        if x.iter().chain(&v).any(|p| !(p.x.is_finite() && p.y.is_finite()) || p.norm() > 1e150) {
            return Err(PlanarError::BlowUp { t: t_new });
        }
        let record = step == n_steps || step % record_every == 0;
        let snap = snapshot_steps.iter().filter(|&&s| s == step).count();
        if record || snap > 0 {
            let state = PlanarState::new(t_new, x.clone(), v.clone());
            for _ in 0..snap {
                traj.snapshots.push(state.clone());
            }
            if record {
                traj.times.push(t_new);
                traj.states.push(state);
            }
        }
    }
    Ok(traj)
}
