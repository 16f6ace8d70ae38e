//! Parametric families of reference trajectories.
//!
//! Each family is a closed-form map `(α, t) -> (x, y)` with every shape
//! parameter fixed except `α`, which is drawn uniformly per episode.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::seed::{stream_rng, Stream};
use crate::state::{State2, Trajectory};

/// User-supplied family: `(α, t, fixed parameters) -> state`.
pub type FamilyFn = Arc<dyn Fn(f64, f64, &BTreeMap<String, f64>) -> State2 + Send + Sync>;

fn registry() -> &'static RwLock<HashMap<String, FamilyFn>> {
    static REGISTRY: OnceLock<RwLock<HashMap<String, FamilyFn>>> = OnceLock::new();
    REGISTRY.get_or_init(Default::default)
}

/// Registers (or replaces) a custom family under `name`.
pub fn register_family(name: &str, f: FamilyFn) {
    registry()
        .write()
        .expect("family registry poisoned")
        .insert(name.to_string(), f);
}

fn lookup_family(name: &str) -> Result<FamilyFn> {
    registry()
        .read()
        .expect("family registry poisoned")
        .get(name)
        .cloned()
        .ok_or_else(|| CoreError::UnknownFamily(name.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    FixedStart,
    UShaped,
    Circles,
    Ribbons,
    Custom(String),
}

impl FamilyKind {
    pub fn name(&self) -> &str {
        match self {
            FamilyKind::FixedStart => "fixed_start",
            FamilyKind::UShaped => "u_shaped",
            FamilyKind::Circles => "circles",
            FamilyKind::Ribbons => "ribbons",
            FamilyKind::Custom(n) => n,
        }
    }

    /// Parses a built-in family name, ignoring case, `-` and `_`.
    pub fn parse_builtin(name: &str) -> Result<Self> {
        let key: String = name
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "fixedstart" => Ok(FamilyKind::FixedStart),
            "ushaped" => Ok(FamilyKind::UShaped),
            "circles" => Ok(FamilyKind::Circles),
            "ribbons" => Ok(FamilyKind::Ribbons),
            _ => Err(CoreError::UnknownFamily(name.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    /// Fixed shape parameters (`omega`, `kappa`, `r1`, `r2`).
    pub params: BTreeMap<String, f64>,
    pub alpha_range: [f64; 2],
    /// Time horizon `T`; `2π/ω` for the built-in families.
    pub horizon: f64,
    pub n_steps: usize,
}

pub const DEFAULT_STEPS: usize = 200;

impl FamilySpec {
    fn builtin(kind: FamilyKind, params: &[(&str, f64)], alpha_range: [f64; 2]) -> Self {
        let params: BTreeMap<String, f64> =
            params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let horizon = 2.0 * PI / params["omega"];
        Self { kind, params, alpha_range, horizon, n_steps: DEFAULT_STEPS }
    }

    pub fn fixed_start() -> Self {
        Self::builtin(FamilyKind::FixedStart, &[("omega", 0.9), ("kappa", 0.9)], [5.0, 10.0])
    }

    pub fn u_shaped() -> Self {
        Self::builtin(FamilyKind::UShaped, &[("omega", 0.9)], [0.2, 0.8])
    }

    pub fn circles() -> Self {
        Self::builtin(FamilyKind::Circles, &[("omega", 0.4)], [0.5, 1.0])
    }

    pub fn ribbons() -> Self {
        Self::builtin(
            FamilyKind::Ribbons,
            &[("omega", 0.4), ("r1", 1.0), ("r2", 2.0)],
            [-PI, PI],
        )
    }

    /// Default spec for a built-in family name.
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match FamilyKind::parse_builtin(name)? {
            FamilyKind::FixedStart => Self::fixed_start(),
            FamilyKind::UShaped => Self::u_shaped(),
            FamilyKind::Circles => Self::circles(),
            FamilyKind::Ribbons => Self::ribbons(),
            FamilyKind::Custom(_) => unreachable!(),
        })
    }

    /// A custom family registered with [`register_family`].
    pub fn custom(
        name: &str,
        params: BTreeMap<String, f64>,
        alpha_range: [f64; 2],
        horizon: f64,
        n_steps: usize,
    ) -> Self {
        Self { kind: FamilyKind::Custom(name.to_string()), params, alpha_range, horizon, n_steps }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.alpha_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CoreError::Parameter(format!("alpha range [{lo}, {hi}] must have lo < hi")));
        }
        if self.n_steps < 2 {
            return Err(CoreError::Parameter(format!("n_steps = {} < 2", self.n_steps)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(CoreError::Parameter(format!("horizon {} must be positive", self.horizon)));
        }
        if let Some((k, v)) = self.params.iter().find(|(_, v)| !v.is_finite()) {
            return Err(CoreError::Parameter(format!("parameter {k} = {v} is not finite")));
        }
        if let FamilyKind::Custom(name) = &self.kind {
            lookup_family(name)?;
        }
        Ok(())
    }

    fn param(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| CoreError::Parameter(format!("family {} needs `{name}`", self.kind.name())))
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Closed-form state at time `t` for shape parameter `alpha`.
    pub fn evaluate(&self, alpha: f64, t: f64) -> Result<State2> {
        Ok(match &self.kind {
            FamilyKind::FixedStart => {
                let (w, k) = (self.param("omega")?, self.param("kappa")?);
                State2::new((alpha * t).sqrt(), (w * t).cos() * (-k * t).exp())
            }
            FamilyKind::UShaped => {
                let w = self.param("omega")?;
                State2::new(w * t, (w * t).cos() - alpha * (2.0 * w * t).cos() / 2.0)
            }
            FamilyKind::Circles => {
                let w = self.param("omega")?;
                State2::new(alpha * (w * t).cos(), alpha * (w * t).sin())
            }
            FamilyKind::Ribbons => {
                let (w, r1, r2) = (self.param("omega")?, self.param("r1")?, self.param("r2")?);
                let radius = r1 - r2 * (w * t / 4.0).cos();
                State2::new(radius * (w * t + alpha).cos(), radius * (w * t + alpha).sin())
            }
            FamilyKind::Custom(name) => lookup_family(name)?(alpha, t, &self.params),
        })
    }

    /// Samples the trajectory at `t_i = i·T/τ`, `i = 0..=τ`.
    pub fn sample(&self, alpha: f64, n_steps: usize) -> Result<Trajectory> {
        let [lo, hi] = self.alpha_range;
        if !(lo..=hi).contains(&alpha) {
            return Err(CoreError::Parameter(format!("alpha {alpha} outside [{lo}, {hi}]")));
        }
        if n_steps < 2 {
            return Err(CoreError::Parameter(format!("n_steps = {n_steps} < 2")));
        }
        let dt = self.horizon / n_steps as f64;
        let mut states = Vec::with_capacity(n_steps + 1);
        let mut times = Vec::with_capacity(n_steps + 1);
        for i in 0..=n_steps {
            let t = i as f64 * dt;
            let s = self.evaluate(alpha, t)?;
            if !s.is_finite() {
                return Err(CoreError::Numeric("family evaluation"));
            }
            states.push(s);
            times.push(t);
        }
        Trajectory::new(states, times)
    }

    /// Draws `α` uniformly from the episode stream `(seed, stream, index)`.
    pub fn draw_alpha(&self, seed: u64, stream: Stream, index: u64) -> f64 {
        let [lo, hi] = self.alpha_range;
        stream_rng(seed, stream, index).random_range(lo..=hi)
    }

    /// Evenly spaced `α` values covering the range, boundaries included.
    pub fn alpha_grid(&self, n: usize) -> Vec<f64> {
        let [lo, hi] = self.alpha_range;
        let n = n.max(2);
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn boundary_trajectories(&self) -> Result<(Trajectory, Trajectory)> {
        let [lo, hi] = self.alpha_range;
        Ok((self.sample(lo, self.n_steps)?, self.sample(hi, self.n_steps)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circles_start_and_radius() {
        let spec = FamilySpec::circles();
        let tr = spec.sample(1.0, 200).unwrap();
        assert_eq!(tr.states[0], State2::new(1.0, 0.0));
        let half = spec.sample(0.5, 200).unwrap();
        for s in &half.states {
            assert!((s.x * s.x + s.y * s.y - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_start_shares_origin() {
        let spec = FamilySpec::fixed_start();
        for alpha in [5.0, 7.3, 10.0] {
            assert_eq!(spec.sample(alpha, 10).unwrap().states[0], State2::new(0.0, 1.0));
        }
    }

    #[test]
    fn u_shaped_start() {
        let spec = FamilySpec::u_shaped();
        for alpha in [0.2, 0.5, 0.8] {
            let s0 = spec.sample(alpha, 10).unwrap().states[0];
            assert_eq!(s0.x, 0.0);
            assert!((s0.y - (1.0 - alpha / 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn ribbons_radius_profile() {
        let spec = FamilySpec::ribbons();
        let tr = spec.sample(0.3, 200).unwrap();
        // radius 1 - 2cos(ωt/4) starts at -1 and ends at 1
        assert!((tr.states[0].norm() - 1.0).abs() < 1e-12);
        assert!((tr.states[200].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn horizon_and_times() {
        let spec = FamilySpec::circles();
        assert!((spec.horizon - 2.0 * PI / 0.4).abs() < 1e-12);
        let tr = spec.sample(0.7, 200).unwrap();
        assert_eq!(tr.len(), 201);
        assert!((tr.times[200] - spec.horizon).abs() < 1e-12);
    }

    #[test]
    fn alpha_out_of_range() {
        assert!(FamilySpec::circles().sample(1.5, 200).is_err());
        assert!(FamilySpec::circles().sample(0.7, 1).is_err());
    }

    #[test]
    fn invalid_specs() {
        let mut spec = FamilySpec::circles();
        spec.alpha_range = [1.0, 1.0];
        assert!(spec.validate().is_err());
        let mut spec = FamilySpec::circles();
        spec.n_steps = 1;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!(FamilyKind::parse_builtin("FixedStart").unwrap(), FamilyKind::FixedStart);
        assert_eq!(FamilyKind::parse_builtin("u-shaped").unwrap(), FamilyKind::UShaped);
        assert!(FamilyKind::parse_builtin("spirals").is_err());
    }

    #[test]
    fn custom_family_plugin() {
        register_family(
            "line",
            Arc::new(|alpha, t, p: &BTreeMap<String, f64>| State2::new(t, alpha * t + p["b"])),
        );
        let spec = FamilySpec::custom("line", [("b".to_string(), 1.0)].into(), [0.0, 1.0], 2.0, 4);
        spec.validate().unwrap();
        let tr = spec.sample(0.5, 4).unwrap();
        assert_eq!(tr.states[4], State2::new(2.0, 2.0));
        assert!(FamilySpec::custom("nope", BTreeMap::new(), [0.0, 1.0], 1.0, 4).validate().is_err());
    }

    #[test]
    fn alpha_draws_are_deterministic_and_in_range() {
        let spec = FamilySpec::circles();
        for i in 0..10 {
            let a = spec.draw_alpha(0, Stream::TrainReference, i);
            assert!((0.5..=1.0).contains(&a));
            assert_eq!(a, spec.draw_alpha(0, Stream::TrainReference, i));
        }
    }
}
