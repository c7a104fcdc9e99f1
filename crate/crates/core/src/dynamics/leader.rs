use serde::{Deserialize, Serialize};

/// Prescribed 1-D motion of a leader, giving position and velocity at time t.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LeaderSignal {
    /// `z(t) = position + velocity * t`.
    Constant { position: f64, velocity: f64 },
    /// `z(t) = amplitude * sin(omega * t + phase)`.
    Sinusoid { amplitude: f64, omega: f64, phase: f64 },
    /// Linear interpolation through `(times[i], positions[i])`, held with
    /// the end slopes outside the knot range.
    PiecewiseLinear { times: Vec<f64>, positions: Vec<f64> },
}

impl LeaderSignal {
    pub fn pinned() -> Self {
        LeaderSignal::Constant { position: 0.0, velocity: 0.0 }
    }

    pub fn sine(omega: f64) -> Self {
        LeaderSignal::Sinusoid { amplitude: 1.0, omega, phase: 0.0 }
    }

    /// `(position, velocity)` at time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            LeaderSignal::Constant { position, velocity } => (position + velocity * t, *velocity),
            LeaderSignal::Sinusoid { amplitude, omega, phase } => {
                let arg = omega * t + phase;
                (amplitude * arg.sin(), amplitude * omega * arg.cos())
            }
            LeaderSignal::PiecewiseLinear { times, positions } => {
                let n = times.len();
                match n {
                    0 => (0.0, 0.0),
                    1 => (positions[0], 0.0),
                    _ => {
                        let seg = match times.iter().position(|&tk| tk > t) {
                            Some(0) => 0,
                            Some(i) => i - 1,
                            None => n - 2,
                        };
                        let slope = (positions[seg + 1] - positions[seg]) / (times[seg + 1] - times[seg]);
                        (positions[seg] + slope * (t - times[seg]), slope)
                    }
                }
            }
        }
    }

    /// True when the leader moves with constant velocity for all time.
    pub fn is_unforced(&self) -> bool {
        match self {
            LeaderSignal::Constant { .. } => true,
            LeaderSignal::Sinusoid { amplitude, omega, .. } => *amplitude == 0.0 || *omega == 0.0,
            LeaderSignal::PiecewiseLinear { times, positions } => {
                if times.len() < 3 {
                    return true;
                }
                let slopes: Vec<f64> = (0..times.len() - 1)
                    .map(|i| (positions[i + 1] - positions[i]) / (times[i + 1] - times[i]))
                    .collect();
                slopes.windows(2).all(|w| w[0] == w[1])
            }
        }
    }
}
