use nalgebra::{Rotation2, Vector2};
use serde::{Deserialize, Serialize};

fn unit(theta: f64) -> Vector2<f64> {
    Vector2::new(theta.cos(), theta.sin())
}

/// Prescribed planar motion of a leader. All programs are C¹ in position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum PlanarLeaderProgram {
    /// `x(t) = origin + velocity * t`.
    Straight { origin: [f64; 2], velocity: [f64; 2] },
    /// Constant speed; the heading turns at a constant rate by `turn`
    /// radians during `[t_start, t_start + duration]` and is held otherwise.
    HeadingRamp { origin: [f64; 2], speed: f64, heading: f64, turn: f64, t_start: f64, duration: f64 },
    /// Cubic Hermite interpolation through `points` at `times` with
    /// Catmull-Rom tangents (one-sided at the ends); extrapolated linearly
    /// with the end tangents.
    WaypointSpline { times: Vec<f64>, points: Vec<[f64; 2]> },
}

impl PlanarLeaderProgram {
    /// `(position, velocity)` at time `t`.
    pub fn eval(&self, t: f64) -> (Vector2<f64>, Vector2<f64>) {
        match self {
            PlanarLeaderProgram::Straight { origin, velocity } => {
                let v = Vector2::from(*velocity);
                (Vector2::from(*origin) + v * t, v)
            }
            PlanarLeaderProgram::HeadingRamp { origin, speed, heading, turn, t_start, duration } => {
                ramp_eval(Vector2::from(*origin), *speed, *heading, *turn, *t_start, *duration, t)
            }
            PlanarLeaderProgram::WaypointSpline { times, points } => spline_eval(times, points, t),
        }
    }

    /// Same program seen in a frame rotated by `phi` about the origin.
    pub fn rotated(&self, phi: f64) -> Self {
        let r = Rotation2::new(phi);
        let rot = |p: &[f64; 2]| -> [f64; 2] {
            let q = r * Vector2::from(*p);
            [q.x, q.y]
        };
        match self {
            PlanarLeaderProgram::Straight { origin, velocity } => {
                PlanarLeaderProgram::Straight { origin: rot(origin), velocity: rot(velocity) }
            }
            PlanarLeaderProgram::HeadingRamp { origin, speed, heading, turn, t_start, duration } => {
                PlanarLeaderProgram::HeadingRamp {
                    origin: rot(origin),
                    speed: *speed,
                    heading: heading + phi,
                    turn: *turn,
                    t_start: *t_start,
                    duration: *duration,
                }
            }
            PlanarLeaderProgram::WaypointSpline { times, points } => PlanarLeaderProgram::WaypointSpline {
                times: times.clone(),
                points: points.iter().map(rot).collect(),
            },
        }
    }

    /// Heading of the program's velocity at `t`.
    pub fn heading_at(&self, t: f64) -> f64 {
        let (_, v) = self.eval(t);
        v.y.atan2(v.x)
    }
}

fn ramp_eval(
    origin: Vector2<f64>,
    speed: f64,
    heading: f64,
    turn: f64,
    t_start: f64,
    duration: f64,
    t: f64,
) -> (Vector2<f64>, Vector2<f64>) {
    let t_end = t_start + duration;
    if t <= t_start || duration <= 0.0 {
        let (before, after) = (t.min(t_start), (t - t_start).max(0.0));
        let p = origin + unit(heading) * speed * before;
        if t <= t_start {
            return (p, unit(heading) * speed);
        }
        // Zero-length ramp: instantaneous turn.
        let h1 = heading + turn;
        return (p + unit(h1) * speed * after, unit(h1) * speed);
    }
    let p_start = origin + unit(heading) * speed * t_start;
    let rate = turn / duration;
    let arc = |tau: f64| -> Vector2<f64> {
        if rate == 0.0 {
            return unit(heading) * speed * tau;
        }
        let th = heading + rate * tau;
        Vector2::new(th.sin() - heading.sin(), heading.cos() - th.cos()) * (speed / rate)
    };
    if t <= t_end {
        let tau = t - t_start;
        (p_start + arc(tau), unit(heading + rate * tau) * speed)
    } else {
        let h1 = heading + turn;
        (p_start + arc(duration) + unit(h1) * speed * (t - t_end), unit(h1) * speed)
    }
}

fn spline_tangents(times: &[f64], pts: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (pts[b] - pts[a]) / (times[b] - times[a])
        })
        .collect()
}

fn spline_eval(times: &[f64], points: &[[f64; 2]], t: f64) -> (Vector2<f64>, Vector2<f64>) {
    let pts: Vec<Vector2<f64>> = points.iter().map(|p| Vector2::from(*p)).collect();
    match pts.len() {
        0 => return (Vector2::zeros(), Vector2::zeros()),
        1 => return (pts[0], Vector2::zeros()),
        _ => {}
    }
    let n = pts.len();
    let m = spline_tangents(times, &pts);
    if t <= times[0] {
        return (pts[0] + m[0] * (t - times[0]), m[0]);
    }
    if t >= times[n - 1] {
        return (pts[n - 1] + m[n - 1] * (t - times[n - 1]), m[n - 1]);
    }
    let i = times.iter().position(|&tk| tk > t).unwrap() - 1;
    let h = times[i + 1] - times[i];
    let s = (t - times[i]) / h;
    let (s2, s3) = (s * s, s * s * s);
    let p = pts[i] * (2.0 * s3 - 3.0 * s2 + 1.0)
        + m[i] * h * (s3 - 2.0 * s2 + s)
        + pts[i + 1] * (-2.0 * s3 + 3.0 * s2)
        + m[i + 1] * h * (s3 - s2);
    let v = pts[i] * ((6.0 * s2 - 6.0 * s) / h)
        + m[i] * (3.0 * s2 - 4.0 * s + 1.0)
        + pts[i + 1] * ((-6.0 * s2 + 6.0 * s) / h)
        + m[i + 1] * (3.0 * s2 - 2.0 * s);
    (p, v)
}
