//! CSV writers. Floats are written with Rust's shortest round-trip
//! formatting, so identical results give byte-identical files.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use super::config::Frame;
use super::ExperimentError;
use crate::dynamics::Trajectory;
use crate::energy::LedgerSeries;
use crate::frequency::ResponseTable;
use crate::model::LinearFlockModel;
use crate::planar::{PlanarState, PlanarTrajectory};
use crate::stability::ClassifierReport;

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, ExperimentError> {
    csv::Writer::from_path(path).map_err(|e| ExperimentError::io(path, e))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<(), ExperimentError> {
    w.flush().map_err(|e| ExperimentError::io(path, e))
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// `t,z0..zN,zdot0..zdotN`. In the lab frame positions become
/// `z_k + h_k + v t` and velocities `zdot_k + v`.
pub fn write_trajectory(
    path: &Path,
    traj: &Trajectory,
    m: &LinearFlockModel,
    frame: Frame,
    v: f64,
) -> Result<(), ExperimentError> {
    let n = m.n_agents();
    let mut w = writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|k| format!("z{k}")));
    header.extend((0..n).map(|k| format!("zdot{k}")));
    w.write_record(&header).map_err(|e| ExperimentError::io(path, e))?;
    for s in &traj.states {
        let mut row = Vec::with_capacity(2 * n + 1);
        row.push(num(s.t));
        for k in 0..n {
            row.push(num(match frame {
                Frame::Leader => s.z[k],
                Frame::Lab => s.z[k] + m.h()[k] + v * s.t,
            }));
        }
        for k in 0..n {
            row.push(num(match frame {
                Frame::Leader => s.zdot[k],
                Frame::Lab => s.zdot[k] + v,
            }));
        }
        w.write_record(&row).map_err(|e| ExperimentError::io(path, e))?;
    }
    finish(w, path)
}

/// `omega,re_a0,im_a0,...,re_aN,im_aN,gain_aN`; failed frequencies are
/// written with empty fields.
pub fn write_response(path: &Path, table: &ResponseTable, n_agents: usize) -> Result<(), ExperimentError> {
    let mut w = writer(path)?;
    let mut header = vec!["omega".to_string()];
    for k in 0..n_agents {
        header.push(format!("re_a{k}"));
        header.push(format!("im_a{k}"));
    }
    header.push(format!("gain_a{}", n_agents - 1));
    w.write_record(&header).map_err(|e| ExperimentError::io(path, e))?;
    for (omega, amps) in table.omegas.iter().zip(&table.amplitudes) {
        let mut row = vec![num(*omega)];
        match amps {
            Some(a) => {
                for c in a {
                    row.push(num(c.re));
                    row.push(num(c.im));
                }
                row.push(num(a[n_agents - 1].norm()));
            }
            None => row.extend(std::iter::repeat_n(String::new(), 2 * n_agents + 1)),
        }
        w.write_record(&row).map_err(|e| ExperimentError::io(path, e))?;
    }
    finish(w, path)
}

/// `re,im`, sorted by real part then imaginary part.
pub fn write_spectrum(path: &Path, eigs: &[Complex64]) -> Result<(), ExperimentError> {
    let mut sorted = eigs.to_vec();
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut w = writer(path)?;
    w.write_record(["re", "im"]).map_err(|e| ExperimentError::io(path, e))?;
    for l in sorted {
        w.write_record([num(l.re), num(l.im)]).map_err(|e| ExperimentError::io(path, e))?;
    }
    finish(w, path)
}

/// `N,ln_max_harmonic,ln_max_impulse` plus a `#` summary line.
pub fn write_classify(path: &Path, report: &ClassifierReport) -> Result<(), ExperimentError> {
    let mut w = writer(path)?;
    w.write_record(["N", "ln_max_harmonic", "ln_max_impulse"]).map_err(|e| ExperimentError::io(path, e))?;
    for (i, n) in report.harmonic.n_list.iter().enumerate() {
        w.write_record([n.to_string(), num(report.harmonic.per_n_values[i]), num(report.impulse.per_n_values[i])])
            .map_err(|e| ExperimentError::io(path, e))?;
    }
    let mut file = w.into_inner().map_err(|e| ExperimentError::io(path, e.into_error()))?;
    writeln!(
        file,
        "# harmonic_slope={} impulse_slope={} threshold={} verdict={}",
        report.harmonic.slope, report.impulse.slope, report.threshold, report.verdict
    )
    .map_err(|e| ExperimentError::io(path, e))
}

/// `t,lhs,rhs,residual`.
pub fn write_ledger(path: &Path, series: &LedgerSeries) -> Result<(), ExperimentError> {
    let mut w = writer(path)?;
    w.write_record(["t", "lhs", "rhs", "residual"]).map_err(|e| ExperimentError::io(path, e))?;
    for i in 0..series.times.len() {
        w.write_record([num(series.times[i]), num(series.lhs[i]), num(series.rhs[i]), num(series.residual[i])])
            .map_err(|e| ExperimentError::io(path, e))?;
    }
    finish(w, path)
}

/// `t,x0,y0,...,xN,yN,vx0,vy0,...,vxN,vyN`.
pub fn write_planar(path: &Path, traj: &PlanarTrajectory) -> Result<(), ExperimentError> {
    let n = traj.states.first().map_or(0, |s| s.len());
    let mut w = writer(path)?;
    let mut header = vec!["t".to_string()];
    for k in 0..n {
        header.push(format!("x{k}"));
        header.push(format!("y{k}"));
    }
    for k in 0..n {
        header.push(format!("vx{k}"));
        header.push(format!("vy{k}"));
    }
    w.write_record(&header).map_err(|e| ExperimentError::io(path, e))?;
    for s in &traj.states {
        let mut row = vec![num(s.t)];
        for p in s.positions.iter().chain(&s.velocities) {
            row.push(num(p.x));
            row.push(num(p.y));
        }
        w.write_record(&row).map_err(|e| ExperimentError::io(path, e))?;
    }
    finish(w, path)
}

/// One row per agent: `agent,x,y,vx,vy`.
pub fn write_snapshot(path: &Path, s: &PlanarState) -> Result<(), ExperimentError> {
    let mut w = writer(path)?;
    w.write_record(["agent", "x", "y", "vx", "vy"]).map_err(|e| ExperimentError::io(path, e))?;
    for (k, (p, v)) in s.positions.iter().zip(&s.velocities).enumerate() {
        w.write_record([k.to_string(), num(p.x), num(p.y), num(v.x), num(v.y)])
            .map_err(|e| ExperimentError::io(path, e))?;
    }
    finish(w, path)
}
