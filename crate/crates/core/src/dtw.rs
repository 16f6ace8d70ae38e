//! Exact dynamic time warping, its incremental prefix form, smoothing and
//! the normalized reward predicate.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::family::FamilySpec;
use crate::geo::{haversine_km, EARTH_RADIUS_KM};
use crate::state::{State2, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundMetric {
    Euclidean2D,
    /// Haversine distance in kilometres; points are `(lon, lat)` in degrees.
    GreatCircle,
}

impl GroundMetric {
    #[inline]
    pub fn cost(self, a: State2, b: State2) -> f64 {
        match self {
            GroundMetric::Euclidean2D => (a.x - b.x).hypot(a.y - b.y),
            GroundMetric::GreatCircle => haversine_km(a, b, EARTH_RADIUS_KM),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtwConfig {
    pub ground_metric: GroundMetric,
    /// Weight of the previous smoothed value in the exponential smoothing.
    pub smoothing: f64,
    /// Reward threshold on the normalized smoothed distance.
    pub epsilon: f64,
    /// Normalization constant; the family diameter, or 1 for raw units.
    pub diameter: f64,
}

impl DtwConfig {
    pub fn new(ground_metric: GroundMetric, epsilon: f64, diameter: f64) -> Self {
        Self { ground_metric, smoothing: 0.9, epsilon, diameter }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(CoreError::Parameter(format!("epsilon {} must be > 0", self.epsilon)));
        }
        if !(self.diameter > 0.0 && self.diameter.is_finite()) {
            return Err(CoreError::Parameter(format!("diameter {} must be > 0", self.diameter)));
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(CoreError::Parameter(format!("smoothing {} not in [0, 1)", self.smoothing)));
        }
        Ok(())
    }
}

/// DTW with symmetric unit steps under an arbitrary point cost.
pub fn dtw_with<P, F>(a: &[P], b: &[P], cost: F) -> Result<f64>
where
    F: Fn(&P, &P) -> f64,
{
    if a.is_empty() || b.is_empty() {
        return Err(CoreError::Parameter("dtw of an empty sequence".into()));
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![f64::INFINITY; m];
    for (i, pa) in a.iter().enumerate() {
        for (j, pb) in b.iter().enumerate() {
            let c = cost(pa, pb);
            cur[j] = if i == 0 && j == 0 {
                c
            } else {
                let up = prev[j];
                let left = if j > 0 { cur[j - 1] } else { f64::INFINITY };
                let diag = if j > 0 { prev[j - 1] } else { f64::INFINITY };
                c + up.min(left).min(diag)
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

pub fn dtw_distance(a: &[State2], b: &[State2], metric: GroundMetric) -> Result<f64> {
    dtw_with(a, b, |p, q| metric.cost(*p, *q))
}

/// DTW restricted to a Sakoe-Chiba band `|i - j·n/m| <= window`.
pub fn dtw_banded(a: &[State2], b: &[State2], metric: GroundMetric, window: usize) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(CoreError::Parameter("dtw of an empty sequence".into()));
    }
    let (n, m) = (a.len(), b.len());
    let w = window.max(n.abs_diff(m));
    let mut d = vec![vec![f64::INFINITY; m]; n];
    for i in 0..n {
        let lo = i.saturating_sub(w);
        let hi = (i + w + 1).min(m);
        for j in lo..hi {
            let c = metric.cost(a[i], b[j]);
            d[i][j] = if i == 0 && j == 0 {
                c
            } else {
                let up = if i > 0 { d[i - 1][j] } else { f64::INFINITY };
                let left = if j > 0 { d[i][j - 1] } else { f64::INFINITY };
                let diag = if i > 0 && j > 0 { d[i - 1][j - 1] } else { f64::INFINITY };
                c + up.min(left).min(diag)
            };
        }
    }
    Ok(d[n - 1][m - 1])
}

/// Incremental DTW between two sequences growing in lock step.
///
/// Holds the last row and last column of the cost matrix, so each new pair
/// of points costs `O(t)`; the values are bit-identical to [`dtw_distance`]
/// on the prefixes.
#[derive(Debug, Clone)]
pub struct PrefixDtwState {
    metric: GroundMetric,
    smoothing: f64,
    rollout: Vec<State2>,
    reference: Vec<State2>,
    /// `D[t][0..=t]`
    row: Vec<f64>,
    /// `D[0..=t][t]`
    col: Vec<f64>,
    raw: f64,
    smoothed: f64,
}

impl PrefixDtwState {
    pub fn new(metric: GroundMetric, smoothing: f64) -> Self {
        Self {
            metric,
            smoothing,
            rollout: Vec::new(),
            reference: Vec::new(),
            row: Vec::new(),
            col: Vec::new(),
            raw: 0.0,
            smoothed: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.rollout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rollout.is_empty()
    }

    pub fn raw(&self) -> f64 {
        self.raw
    }

    pub fn smoothed(&self) -> f64 {
        self.smoothed
    }

    /// Appends one rollout point and one reference point; returns
    /// `(raw, smoothed)` for the extended prefixes.
    pub fn push(&mut self, rollout_pt: State2, reference_pt: State2) -> (f64, f64) {
        let t = self.rollout.len();
        self.rollout.push(rollout_pt);
        self.reference.push(reference_pt);
        let cost = |i: usize, j: usize| self.metric.cost(self.rollout[i], self.reference[j]);
        if t == 0 {
            let c = cost(0, 0);
            self.row = vec![c];
            self.col = vec![c];
            self.raw = c;
            self.smoothed = c;
            return (c, c);
        }

        let mut row = Vec::with_capacity(t + 1);
        for j in 0..t {
            let up = self.row[j];
            let left = if j > 0 { row[j - 1] } else { f64::INFINITY };
            let diag = if j > 0 { self.row[j - 1] } else { f64::INFINITY };
            row.push(cost(t, j) + up.min(left).min(diag));
        }
        let mut col = Vec::with_capacity(t + 1);
        for i in 0..t {
            let up = if i > 0 { col[i - 1] } else { f64::INFINITY };
            let left = self.col[i];
            let diag = if i > 0 { self.col[i - 1] } else { f64::INFINITY };
            col.push(cost(i, t) + up.min(left).min(diag));
        }
        let corner = cost(t, t) + col[t - 1].min(row[t - 1]).min(self.row[t - 1]);
        row.push(corner);
        col.push(corner);
        self.row = row;
        self.col = col;

        self.raw = corner;
        self.smoothed = self.smoothing * self.smoothed + (1.0 - self.smoothing) * corner;
        (self.raw, self.smoothed)
    }
}

/// `+1` if the normalized smoothed distance is strictly below `epsilon`.
pub fn reward(smoothed_norm: f64, epsilon: f64) -> i32 {
    if smoothed_norm < epsilon {
        1
    } else {
        -1
    }
}

/// Final `(raw, smoothed)` prefix distances of two equal-length sequences.
pub fn smoothed_dtw(a: &[State2], b: &[State2], metric: GroundMetric, smoothing: f64) -> Result<(f64, f64)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(CoreError::Parameter(format!(
            "lock-step dtw needs equal non-empty lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let mut st = PrefixDtwState::new(metric, smoothing);
    let mut out = (0.0, 0.0);
    for (p, q) in a.iter().zip(b) {
        out = st.push(*p, *q);
    }
    Ok(out)
}

/// DTW distance between the two boundary trajectories of the family.
///
/// When the boundaries coincide (a periodic shape parameter such as the
/// Ribbons phase over `[-π, π]`) the largest distance from the lower
/// boundary over an `α` grid is used instead.
pub fn dtw_diameter(spec: &FamilySpec) -> Result<f64> {
    spec.validate()?;
    let (lo, hi) = spec.boundary_trajectories()?;
    let d = dtw_distance(&lo.states, &hi.states, GroundMetric::Euclidean2D)?;
    let scale: f64 = lo.states.iter().map(|s| s.norm()).sum::<f64>().max(1.0);
    if d > 1e-9 * scale {
        return Ok(d);
    }
    let mut best = 0.0f64;
    for alpha in spec.alpha_grid(33) {
        let tr = spec.sample(alpha, spec.n_steps)?;
        best = best.max(dtw_distance(&lo.states, &tr.states, GroundMetric::Euclidean2D)?);
    }
    if best > 0.0 {
        Ok(best)
    } else {
        Err(CoreError::Parameter(format!("family {} has zero diameter", spec.kind.name())))
    }
}

/// Whether `rollout` lies within normalized distance `epsilon` of some reference.
pub fn is_representative(
    rollout: &Trajectory,
    refs: &[Trajectory],
    epsilon: f64,
    diameter: f64,
    metric: GroundMetric,
) -> Result<bool> {
    Ok(min_normalized_distance(rollout, refs, diameter, metric)? < epsilon)
}

pub fn min_normalized_distance(
    rollout: &Trajectory,
    refs: &[Trajectory],
    diameter: f64,
    metric: GroundMetric,
) -> Result<f64> {
    if refs.is_empty() {
        return Err(CoreError::Parameter("no reference trajectories".into()));
    }
    let mut best = f64::INFINITY;
    for r in refs {
        best = best.min(dtw_distance(&rollout.states, &r.states, metric)? / diameter);
    }
    Ok(best)
}
