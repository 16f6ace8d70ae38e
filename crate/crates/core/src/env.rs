//! Episodic trajectory-imitation environment.
//!
//! The agent starts on the first point of a hidden reference trajectory and
//! moves by applying decisions through a known kinematic map. Each step is
//! rewarded `±1` depending on whether the smoothed, normalized prefix DTW to
//! the reference is below `ε`. Steps leaving the region of interest keep the
//! agent in place.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dtw::{reward, DtwConfig, GroundMetric, PrefixDtwState};
use crate::error::{CoreError, Result};
use crate::family::FamilySpec;
use crate::seed::Stream;
use crate::state::{wrap_angle, Action2, State2, Trajectory};

/// Known kinematic map `g(s, a)` of a domain.
pub trait Kinematics: Send + Sync + Debug {
    fn action_dim(&self) -> usize;

    /// Next state and elapsed time for `action` applied at `s`; `dt` is the
    /// environment's nominal step, which kinematics may override.
    fn apply(&self, s: State2, action: &[f64], dt: f64) -> Result<(State2, f64)>;

    /// The action carrying `s` exactly onto `next` over `dt`.
    fn perfect_action(&self, s: State2, next: State2, dt: f64) -> Vec<f64>;

    fn ground_metric(&self) -> GroundMetric;
}

/// Planar kinematics `s' = s + (u cos ξ, u sin ξ)·dt`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Planar;

impl Kinematics for Planar {
    fn action_dim(&self) -> usize {
        2
    }

    fn apply(&self, s: State2, action: &[f64], dt: f64) -> Result<(State2, f64)> {
        let [u, xi] = action else {
            return Err(CoreError::Parameter(format!("expected 2 action values, got {}", action.len())));
        };
        let a = Action2::new(*u, *xi)?;
        Ok((planar_candidate(s, a, dt)?, dt))
    }

    fn perfect_action(&self, s: State2, next: State2, dt: f64) -> Vec<f64> {
        let a = perfect_policy(s, next, dt);
        vec![a.u, a.xi]
    }

    fn ground_metric(&self) -> GroundMetric {
        GroundMetric::Euclidean2D
    }
}

fn planar_candidate(s: State2, a: Action2, dt: f64) -> Result<State2> {
    if !(dt > 0.0) {
        return Err(CoreError::Parameter(format!("dt {dt} must be > 0")));
    }
    let next = State2::new(s.x + a.u * a.xi.cos() * dt, s.y + a.u * a.xi.sin() * dt);
    if !next.is_finite() {
        return Err(CoreError::Numeric("planar step"));
    }
    Ok(next)
}

/// Planar step with sticking: returns the next state and whether the
/// candidate left the ROI (in which case the state is unchanged).
pub fn env_step(current: State2, action: Action2, dt: f64, roi: &Roi) -> Result<(State2, bool)> {
    let candidate = planar_candidate(current, action, dt)?;
    if roi.contains(candidate) {
        Ok((candidate, false))
    } else {
        Ok((current, true))
    }
}

/// Speed and heading moving `s` onto `next` in `dt`. Zero displacement
/// maps to `(0, 0)`.
pub fn perfect_policy(s: State2, next: State2, dt: f64) -> Action2 {
    let d = next - s;
    let u = d.norm() / dt;
    let xi = if d.x == 0.0 && d.y == 0.0 { 0.0 } else { wrap_angle(d.y.atan2(d.x)) };
    Action2 { u, xi }
}

/// Axis-aligned region of interest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Roi {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if !(x_min < x_max && y_min < y_max) {
            return Err(CoreError::Parameter(format!(
                "degenerate ROI [{x_min}, {x_max}]x[{y_min}, {y_max}]"
            )));
        }
        Ok(Self { x_min, x_max, y_min, y_max })
    }

    pub fn contains(&self, s: State2) -> bool {
        (self.x_min..=self.x_max).contains(&s.x) && (self.y_min..=self.y_max).contains(&s.y)
    }

    /// Smallest box containing every point, grown by `margin` times its extent on each side.
    pub fn bounding<'a, I: IntoIterator<Item = &'a State2>>(points: I, margin: f64) -> Result<Self> {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        if margin < 0.0 {
            return Err(CoreError::Parameter(format!("negative margin {margin}")));
        }
        let (ex, ey) = (x1 - x0, y1 - y0);
        Self::new(x0 - margin * ex, x1 + margin * ex, y0 - margin * ey, y1 + margin * ey)
    }

    pub fn center(&self) -> State2 {
        State2::new((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn half_extent(&self) -> State2 {
        State2::new((self.x_max - self.x_min) / 2.0, (self.y_max - self.y_min) / 2.0)
    }

    /// Maps the box onto `[-1, 1]²`.
    pub fn normalize(&self, s: State2) -> [f64; 2] {
        let (c, h) = (self.center(), self.half_extent());
        [(s.x - c.x) / h.x, (s.y - c.y) / h.y]
    }

    pub fn denormalize(&self, v: [f64; 2]) -> State2 {
        let (c, h) = (self.center(), self.half_extent());
        State2::new(c.x + v[0] * h.x, c.y + v[1] * h.y)
    }
}

/// Bounding box of the family's trajectories over an `α` grid that includes
/// both boundary values, grown by `margin` times the box extent per axis.
pub fn compute_roi(spec: &FamilySpec, margin: f64) -> Result<Roi> {
    spec.validate()?;
    let mut pts = Vec::new();
    for alpha in spec.alpha_grid(33) {
        pts.extend(spec.sample(alpha, spec.n_steps)?.states);
    }
    Roi::bounding(&pts, margin)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub raw_dtw: f64,
    pub smoothed_dtw: f64,
    /// `smoothed_dtw / diameter`, the quantity compared against `ε`.
    pub normalized: f64,
    pub stuck: bool,
    pub elapsed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub next_state: State2,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Single-writer episodic environment over an arbitrary kinematic map.
#[derive(Debug, Clone)]
pub struct TrajectoryEnv {
    kinematics: Arc<dyn Kinematics>,
    roi: Roi,
    dtw: DtwConfig,
    reference: Option<Trajectory>,
    step: usize,
    state: State2,
    time: f64,
    prefix: PrefixDtwState,
    sticking_events: usize,
}

impl TrajectoryEnv {
    pub fn new(kinematics: Arc<dyn Kinematics>, roi: Roi, dtw: DtwConfig) -> Result<Self> {
        dtw.validate()?;
        let prefix = PrefixDtwState::new(dtw.ground_metric, dtw.smoothing);
        Ok(Self {
            kinematics,
            roi,
            dtw,
            reference: None,
            step: 0,
            state: State2::default(),
            time: 0.0,
            prefix,
            sticking_events: 0,
        })
    }

    pub fn kinematics(&self) -> &Arc<dyn Kinematics> {
        &self.kinematics
    }

    pub fn roi(&self) -> &Roi {
        &self.roi
    }

    pub fn dtw_config(&self) -> &DtwConfig {
        &self.dtw
    }

    /// Starts an episode on `reference`; the agent is placed on its first point.
    pub fn reset_with(&mut self, reference: Trajectory) -> State2 {
        self.state = reference.start();
        self.time = reference.times[0];
        self.step = 0;
        self.sticking_events = 0;
        self.prefix = PrefixDtwState::new(self.dtw.ground_metric, self.dtw.smoothing);
        self.prefix.push(self.state, reference.start());
        self.reference = Some(reference);
        self.state
    }

    fn reference_ref(&self) -> Result<&Trajectory> {
        self.reference
            .as_ref()
            .ok_or_else(|| CoreError::Parameter("environment used before reset".into()))
    }

    pub fn reference(&self) -> Option<&Trajectory> {
        self.reference.as_ref()
    }

    pub fn state(&self) -> State2 {
        self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn horizon_steps(&self) -> usize {
        self.reference.as_ref().map_or(0, Trajectory::n_steps)
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.horizon_steps()
    }

    pub fn sticking_events(&self) -> usize {
        self.sticking_events
    }

    /// Perfect action between the current and next reference points.
    pub fn expert_action(&self) -> Result<Vec<f64>> {
        let r = self.reference_ref()?;
        if self.step >= r.n_steps() {
            return Err(CoreError::Parameter("episode already finished".into()));
        }
        Ok(self.kinematics.perfect_action(r.states[self.step], r.states[self.step + 1], r.dt(self.step)))
    }

    pub fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        let r = self.reference_ref()?;
        let n = r.n_steps();
        if self.step >= n {
            return Err(CoreError::Parameter("episode already finished".into()));
        }
        if action.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Numeric("action"));
        }
        let nominal_dt = r.dt(self.step);
        let ref_next = r.states[self.step + 1];
        let (candidate, elapsed) = self.kinematics.apply(self.state, action, nominal_dt)?;
        let stuck = !self.roi.contains(candidate);
        if stuck {
            self.sticking_events += 1;
        } else {
            self.state = candidate;
        }
        self.time += elapsed;
        self.step += 1;
        let (raw, smoothed) = self.prefix.push(self.state, ref_next);
        let normalized = smoothed / self.dtw.diameter;
        Ok(EnvStep {
            next_state: self.state,
            reward: reward(normalized, self.dtw.epsilon) as f64,
            done: self.step >= n,
            info: StepInfo { raw_dtw: raw, smoothed_dtw: smoothed, normalized, stuck, elapsed },
        })
    }
}

/// Planar environment drawing one family member per episode.
#[derive(Debug, Clone)]
pub struct FamilyEnv {
    pub spec: FamilySpec,
    pub env: TrajectoryEnv,
}

impl FamilyEnv {
    pub fn new(spec: FamilySpec, roi_margin: f64, epsilon: f64) -> Result<Self> {
        spec.validate()?;
        let roi = compute_roi(&spec, roi_margin)?;
        let diameter = crate::dtw::dtw_diameter(&spec)?;
        let dtw = DtwConfig::new(GroundMetric::Euclidean2D, epsilon, diameter);
        let env = TrajectoryEnv::new(Arc::new(Planar), roi, dtw)?;
        Ok(Self { spec, env })
    }

    /// Draws `α` from the stream of `seed` and starts an episode on the
    /// resulting reference. Returns the start state and the reference.
    pub fn reset(&mut self, seed: u64) -> Result<(State2, Trajectory)> {
        self.reset_episode(seed, 0)
    }

    /// Episode `index` of the run seeded with `run_seed`.
    pub fn reset_episode(&mut self, run_seed: u64, index: u64) -> Result<(State2, Trajectory)> {
        let alpha = self.spec.draw_alpha(run_seed, Stream::TrainReference, index);
        let reference = self.spec.sample(alpha, self.spec.n_steps)?;
        let s0 = self.env.reset_with(reference.clone());
        Ok((s0, reference))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

    fn unit_roi() -> Roi {
        Roi::new(-10.0, 10.0, -10.0, 10.0).unwrap()
    }

    #[test]
    fn planar_step_examples() {
        let (n, stuck) = env_step(State2::new(0.0, 0.0), Action2::new(SQRT_2, FRAC_PI_4).unwrap(), 1.0, &unit_roi()).unwrap();
        assert!(!stuck);
        assert!((n.x - 1.0).abs() < 1e-15 && (n.y - 1.0).abs() < 1e-15);
        let (z, _) = env_step(State2::new(0.0, 0.0), Action2::new(0.0, 2.0).unwrap(), 1.0, &unit_roi()).unwrap();
        assert_eq!(z, State2::new(0.0, 0.0));
    }

    #[test]
    fn sticking_keeps_state() {
        let roi = Roi::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let s = State2::new(0.9, 0.0);
        let (n, stuck) = env_step(s, Action2::new(1.0, 0.0).unwrap(), 0.5, &roi).unwrap();
        assert!(stuck);
        assert_eq!(n, s);
    }

    #[test]
    fn perfect_policy_examples() {
        let a = perfect_policy(State2::new(0.0, 0.0), State2::new(1.0, 1.0), 1.0);
        assert!((a.u - SQRT_2).abs() < 1e-15 && (a.xi - FRAC_PI_4).abs() < 1e-15);
        let b = perfect_policy(State2::new(0.0, 0.0), State2::new(-1.0, 0.0), 0.5);
        assert_eq!((b.u, b.xi), (2.0, PI));
        let c = perfect_policy(State2::new(0.3, 0.3), State2::new(0.3, 0.3), 0.5);
        assert_eq!((c.u, c.xi), (0.0, 0.0));
    }

    #[test]
    fn roi_examples() {
        let roi = compute_roi(&FamilySpec::circles(), 0.0).unwrap();
        assert!((roi.x_min + 1.0).abs() < 1e-12 && (roi.x_max - 1.0).abs() < 1e-12);
        assert!((roi.y_min + 1.0).abs() < 1e-3 && (roi.y_max - 1.0).abs() < 1e-3);
        let unit = [State2::new(-1.0, -1.0), State2::new(1.0, 1.0)];
        let grown = Roi::bounding(&unit, 0.1).unwrap();
        assert!((grown.x_min + 1.2).abs() < 1e-12 && (grown.y_max - 1.2).abs() < 1e-12);
        assert!(Roi::bounding(&unit, -0.1).is_err());
    }

    #[test]
    fn normalize_roundtrip() {
        let roi = Roi::new(-3.0, 1.0, 2.0, 6.0).unwrap();
        let s = State2::new(0.5, 2.5);
        let v = roi.normalize(s);
        assert_eq!(roi.normalize(roi.center()), [0.0, 0.0]);
        let back = roi.denormalize(v);
        assert!((back.x - s.x).abs() < 1e-15 && (back.y - s.y).abs() < 1e-15);
    }

    #[test]
    fn reset_is_deterministic() {
        let mut env = FamilyEnv::new(FamilySpec::circles(), 0.1, 0.1).unwrap();
        let (_, a) = env.reset(3).unwrap();
        let (_, b) = env.reset(3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perfect_rollout_scores_zero() {
        let mut env = FamilyEnv::new(FamilySpec::ribbons(), 0.1, 0.1).unwrap();
        let (_, reference) = env.reset(11).unwrap();
        let mut rewards = Vec::new();
        loop {
            let a = env.env.expert_action().unwrap();
            let st = env.env.step(&a).unwrap();
            assert!(!st.info.stuck);
            rewards.push(st.reward);
            if st.done {
                break;
            }
        }
        assert_eq!(rewards.len(), reference.n_steps());
        assert!(rewards.iter().all(|&r| r == 1.0));
        assert!(env.env.state().distance(*reference.states.last().unwrap()) < 1e-9);
    }

    #[test]
    fn step_after_done_and_bad_action() {
        let mut env = FamilyEnv::new(FamilySpec::circles(), 0.1, 0.1).unwrap();
        env.reset(0).unwrap();
        assert!(matches!(env.env.step(&[f64::NAN, 0.0]), Err(CoreError::Numeric(_))));
        for _ in 0..200 {
            env.env.step(&[0.0, 0.0]).unwrap();
        }
        assert!(env.env.is_done());
        assert!(env.env.step(&[0.0, 0.0]).is_err());
    }
}
