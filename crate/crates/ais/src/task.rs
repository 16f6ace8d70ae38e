//! Imitation task over recorded vessel tracks.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use traji_agents::codec::{Codec, Component};
use traji_agents::task::ReferenceSource;
use traji_agents::{AgentError, Task};
use traji_core::seed::{stream_rng, Stream};
use traji_core::{DtwConfig, GeoKinematics, GroundMetric, Roi, Trajectory};

use crate::error::{AisError, Result};
use crate::segment::VesselTrack;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AisTaskConfig {
    /// Reward threshold on the smoothed great-circle DTW, in kilometres.
    pub epsilon_km: f64,
    /// ROI growth as a fraction of the tracks' extent.
    pub roi_margin: f64,
    /// Quantile of observed time steps used as the largest learnable step.
    pub dt_quantile: f64,
}

impl Default for AisTaskConfig {
    fn default() -> Self {
        Self { epsilon_km: 0.5, roi_margin: 0.1, dt_quantile: 0.99 }
    }
}

/// Smallest learnable time step, hours.
const DT_FLOOR: f64 = 1e-6;

/// Draws whole tracks uniformly; training and evaluation use separate streams.
#[derive(Debug, Clone)]
pub struct TrackSource {
    pub trajectories: Vec<Trajectory>,
}

impl TrackSource {
    fn pick(&self, run_seed: u64, stream: Stream, index: u64) -> traji_agents::Result<Trajectory> {
        if self.trajectories.is_empty() {
            return Err(AgentError::Config("no tracks to draw from".into()));
        }
        let i = stream_rng(run_seed, stream, index).random_range(0..self.trajectories.len());
        Ok(self.trajectories[i].clone())
    }
}

impl ReferenceSource for TrackSource {
    fn train(&self, run_seed: u64, episode: u64) -> traji_agents::Result<Trajectory> {
        self.pick(run_seed, Stream::TrainReference, episode)
    }

    fn eval(&self, run_seed: u64, index: u64) -> traji_agents::Result<Trajectory> {
        self.pick(run_seed, Stream::EvalReference, index)
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Task with `(lon, lat)` states, `[sog, cog, dt]` actions and raw
/// great-circle rewards.
pub fn ais_task(name: &str, tracks: &[VesselTrack], cfg: &AisTaskConfig) -> Result<Task> {
    let trajectories = tracks.iter().map(VesselTrack::to_trajectory).collect::<Result<Vec<_>>>()?;
    if trajectories.iter().all(|t| t.n_steps() == 0) {
        return Err(AisError::Config("AIS task needs tracks with at least two fixes".into()));
    }
    let roi = Roi::bounding(trajectories.iter().flat_map(|t| t.states.iter()), cfg.roi_margin)?;
    let mut dts: Vec<f64> = trajectories.iter().flat_map(|t| (0..t.n_steps()).map(|i| t.dt(i))).collect();
    dts.sort_by(f64::total_cmp);
    let dt_max = quantile(&dts, cfg.dt_quantile).max(2.0 * DT_FLOOR);
    let max_sog = tracks.iter().flat_map(|t| t.points.iter().map(|p| p.sog)).fold(0.0, f64::max);
    let codec = Codec::new(
        roi,
        vec![
            Component::Bounded { lo: 0.0, hi: 2.0 * max_sog.max(1.0) },
            Component::Angle { period: 360.0, offset: 0.0 },
            Component::Bounded { lo: DT_FLOOR, hi: dt_max },
        ],
    )?;
    let dtw = DtwConfig::new(GroundMetric::GreatCircle, cfg.epsilon_km, 1.0);
    dtw.validate()?;
    let horizon = trajectories.iter().map(|t| t.times[t.times.len() - 1]).fold(0.0, f64::max);
    Ok(Task {
        name: name.to_string(),
        kinematics: Arc::new(GeoKinematics),
        roi,
        dtw,
        codec,
        time_horizon: horizon.max(dt_max),
        nominal_dt: quantile(&dts, 0.5),
        source: Arc::new(TrackSource { trajectories }),
    })
}
