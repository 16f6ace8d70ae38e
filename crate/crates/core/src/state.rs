use std::f64::consts::PI;
use std::io::Write;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// A point of the two-dimensional state manifold. For vessel tracks `x` is
/// longitude and `y` latitude, both in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State2 {
    pub x: f64,
    pub y: f64,
}

impl State2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: State2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }
}

impl Add for State2 {
    type Output = State2;
    fn add(self, rhs: State2) -> State2 {
        State2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for State2 {
    type Output = State2;
    fn sub(self, rhs: State2) -> State2 {
        State2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for State2 {
    type Output = State2;
    fn mul(self, rhs: f64) -> State2 {
        State2::new(self.x * rhs, self.y * rhs)
    }
}

/// Wraps an angle in radians into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

/// Planar decision: speed and steering angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action2 {
    pub u: f64,
    pub xi: f64,
}

impl Action2 {
    /// Builds an action, normalizing the steering angle into `(-π, π]`.
    pub fn new(u: f64, xi: f64) -> Result<Self> {
        if !u.is_finite() || !xi.is_finite() {
            return Err(CoreError::Numeric("action"));
        }
        if u < 0.0 {
            return Err(CoreError::Parameter(format!("negative speed {u}")));
        }
        Ok(Self { u, xi: wrap_angle(xi) })
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.u, self.xi]
    }
}

/// A time-indexed sequence of states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<State2>,
    pub times: Vec<f64>,
}

impl Trajectory {
    pub fn new(states: Vec<State2>, times: Vec<f64>) -> Result<Self> {
        if states.len() != times.len() {
            return Err(CoreError::Parameter(format!(
                "{} states but {} timestamps",
                states.len(),
                times.len()
            )));
        }
        if states.is_empty() {
            return Err(CoreError::Parameter("empty trajectory".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CoreError::Parameter("timestamps must increase strictly".into()));
        }
        Ok(Self { states, times })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of transitions, i.e. `len() - 1`.
    pub fn n_steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn start(&self) -> State2 {
        self.states[0]
    }

    pub fn dt(&self, step: usize) -> f64 {
        self.times[step + 1] - self.times[step]
    }

    /// Writes the trajectory as CSV with header `t,x,y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,y")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(w, "{t},{},{}", s.x, s.y)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_angle(-0.5 - 2.0 * PI) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn action_rejects_bad_values() {
        assert!(Action2::new(f64::NAN, 0.0).is_err());
        assert!(Action2::new(-1.0, 0.0).is_err());
        assert_eq!(Action2::new(1.0, -PI).unwrap().xi, PI);
    }

    #[test]
    fn trajectory_validation() {
        let s = vec![State2::new(0.0, 0.0); 2];
        assert!(Trajectory::new(s.clone(), vec![0.0]).is_err());
        assert!(Trajectory::new(s.clone(), vec![1.0, 1.0]).is_err());
        let tr = Trajectory::new(s, vec![0.0, 0.5]).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x,y\n0,0,0\n0.5,0,0\n");
    }
}
