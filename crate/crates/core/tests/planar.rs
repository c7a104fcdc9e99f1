#![allow(clippy::needless_range_loop)]

use std::f64::consts::FRAC_PI_2;

use flocklab::dynamics::{integrate, IntegrateOptions, LeaderSignal};
use flocklab::model::{FlockState, LinearFlockModel, StandardExampleParams};
use flocklab::planar::{
    equilibrium_state, formation_error, hexagon_flock, heading, integrate_planar, PlanarFlockModel,
    PlanarLeaderProgram, PlanarOptions, PlanarState, PlanarTrajectory, Vec2,
};

fn turn_program() -> PlanarLeaderProgram {
    PlanarLeaderProgram::HeadingRamp {
        origin: [1.0, 0.0],
        speed: 1.0,
        heading: 0.0,
        turn: FRAC_PI_2,
        t_start: 10.0,
        duration: 200.0,
    }
}

fn turn_model() -> PlanarFlockModel {
    hexagon_flock(1.0, -1.0, -2.0).unwrap().with_cruise(-0.5, 1.0).unwrap()
}

fn turn_run(dt: f64, horizon: f64, phi: f64) -> PlanarTrajectory {
    let m = turn_model();
    let init = equilibrium_state(&m, 0.0, 1.0).unwrap().rotated(phi);
    let opts = PlanarOptions::new(dt, horizon).with_record_interval(1.0);
    integrate_planar(&m, &init, &[turn_program().rotated(phi)], &opts).unwrap()
}

fn max_deviation(a: &PlanarTrajectory, b: &PlanarTrajectory) -> f64 {
    assert_eq!(a.times.len(), b.times.len());
    let mut worst = 0.0f64;
    for (s, r) in a.states.iter().zip(&b.states) {
        assert!((s.t - r.t).abs() < 1e-9);
        for (p, q) in s.positions.iter().zip(&r.positions) {
            worst = worst.max((p - q).norm());
        }
    }
    worst
}

#[test]
fn rotated_scenario_rotates_the_trajectory() {
    let phi = 1.1;
    let base = turn_run(0.01, 100.0, 0.0);
    let rot = turn_run(0.01, 100.0, phi);
    let expected: Vec<PlanarState> = base.states.iter().map(|s| s.rotated(phi)).collect();
    let expected = PlanarTrajectory { times: base.times.clone(), states: expected, snapshots: vec![] };
    let dev = max_deviation(&rot, &expected);
    assert!(dev < 1e-8, "deviation {dev:e}");
}

#[test]
fn axis_confined_run_matches_linear_dynamics() {
    let n = 10;
    let lin = LinearFlockModel::standard(&StandardExampleParams::symmetric(n, 0.45)).unwrap();
    let planar = PlanarFlockModel::from_linear(lin.clone()).unwrap();
    let z: Vec<f64> = (0..=n).map(|k| if k == 0 { 0.0 } else { 0.1 * (k as f64).sin() }).collect();
    let zd: Vec<f64> = (0..=n).map(|k| if k == 0 { 1.1 } else { 1.0 + 0.05 * (k as f64).cos() }).collect();
    let opts = IntegrateOptions::new(0.01, 50.0).with_record_interval(0.5);
    let lt = integrate(
        &lin,
        &FlockState::new(0.0, z.clone(), zd.clone()),
        &[LeaderSignal::Constant { position: 0.0, velocity: 1.1 }],
        &opts,
    )
    .unwrap();

    let h = lin.h();
    let x: Vec<Vec2> = (0..=n).map(|k| Vec2::new(z[k] + h[k], 0.0)).collect();
    let v: Vec<Vec2> = zd.iter().map(|&u| Vec2::new(u, 0.0)).collect();
    let prog = PlanarLeaderProgram::Straight { origin: [h[0], 0.0], velocity: [1.1, 0.0] };
    let pt = integrate_planar(
        &planar,
        &PlanarState::new(0.0, x, v),
        &[prog],
        &PlanarOptions::new(0.01, 50.0).with_record_interval(0.5),
    )
    .unwrap();

    assert_eq!(lt.times.len(), pt.times.len());
    let mut worst = 0.0f64;
    for (ls, ps) in lt.states.iter().zip(&pt.states) {
        for k in 0..=n {
            worst = worst.max((ps.positions[k].x - h[k] - ls.z[k]).abs());
            worst = worst.max((ps.velocities[k].x - ls.zdot[k]).abs());
            assert_eq!(ps.positions[k].y, 0.0);
        }
    }
    assert!(worst < 1e-8, "max deviation {worst:e}");
}

#[test]
fn halving_the_step_shrinks_the_error_sixteenfold() {
    let dt = 0.2;
    let reference = turn_run(dt / 4.0, 60.0, 0.0);
    let coarse = max_deviation(&turn_run(dt, 60.0, 0.0), &reference);
    let fine = max_deviation(&turn_run(dt / 2.0, 60.0, 0.0), &reference);
    assert!(fine > 0.0);
    assert!(coarse / fine >= 12.0, "ratio {}", coarse / fine);
}

#[test]
fn turn_maneuver_realigns_the_formation() {
    let m = turn_model();
    let traj = turn_run(0.01, 400.0, 0.0);
    let errors: Vec<f64> = traj.states.iter().map(|s| formation_error(s, &m).unwrap()).collect();
    let turn_end = traj.times.iter().position(|&t| t >= 210.0).unwrap();
    let peak = errors[..=turn_end].iter().cloned().fold(0.0, f64::max);
    let last = *errors.last().unwrap();
    assert!(peak > 0.0);
    assert!(last * 10.0 < peak, "final {last:e}, peak {peak:e}");

    let fin = traj.final_state();
    let mean_heading = heading(fin.mean_velocity(), m.epsilon_v()).unwrap();
    let leader_heading = turn_program().heading_at(fin.t);
    assert!((mean_heading - leader_heading).abs() < 5f64.to_radians());
}
