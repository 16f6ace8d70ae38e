//! An imitation task: kinematics, region, reward config, feature codec and a
//! source of reference trajectories.

use std::fmt::Debug;
use std::sync::Arc;

use traji_core::dtw::dtw_diameter;
use traji_core::env::compute_roi;
use traji_core::seed::Stream;
use traji_core::{DtwConfig, FamilySpec, GroundMetric, Kinematics, Planar, Roi, Trajectory, TrajectoryEnv};

use crate::codec::Codec;
use crate::error::{AgentError, Result};

/// Supplies reference trajectories. Training and evaluation draws must come
/// from disjoint streams.
pub trait ReferenceSource: Send + Sync + Debug {
    fn train(&self, run_seed: u64, episode: u64) -> Result<Trajectory>;
    fn eval(&self, run_seed: u64, index: u64) -> Result<Trajectory>;
}

#[derive(Debug, Clone)]
pub struct FamilySource {
    pub spec: FamilySpec,
}

impl ReferenceSource for FamilySource {
    fn train(&self, run_seed: u64, episode: u64) -> Result<Trajectory> {
        let alpha = self.spec.draw_alpha(run_seed, Stream::TrainReference, episode);
        Ok(self.spec.sample(alpha, self.spec.n_steps)?)
    }

    fn eval(&self, run_seed: u64, index: u64) -> Result<Trajectory> {
        let alpha = self.spec.draw_alpha(run_seed, Stream::EvalReference, index);
        Ok(self.spec.sample(alpha, self.spec.n_steps)?)
    }
}

#[derive(Debug, Clone)]
pub struct Task {
    pub name: String,
    pub kinematics: Arc<dyn Kinematics>,
    pub roi: Roi,
    pub dtw: DtwConfig,
    pub codec: Codec,
    /// Time scale handed to the time embeddings.
    pub time_horizon: f64,
    /// Nominal step used by noise processes.
    pub nominal_dt: f64,
    pub source: Arc<dyn ReferenceSource>,
}

/// Grid resolution for family-wide statistics (ROI, speed bound).
const GRID: usize = 33;

impl Task {
    /// Planar task over a synthetic family.
    pub fn family(spec: FamilySpec, roi_margin: f64, epsilon: f64) -> Result<Self> {
        spec.validate()?;
        let roi = compute_roi(&spec, roi_margin)?;
        let diameter = dtw_diameter(&spec)?;
        let dtw = DtwConfig::new(GroundMetric::Euclidean2D, epsilon, diameter);
        dtw.validate()?;
        let mut max_speed: f64 = 0.0;
        for alpha in spec.alpha_grid(GRID) {
            let tr = spec.sample(alpha, spec.n_steps)?;
            for i in 0..tr.n_steps() {
                max_speed = max_speed.max(tr.states[i].distance(tr.states[i + 1]) / tr.dt(i));
            }
        }
        if !(max_speed > 0.0) {
            return Err(AgentError::Config(format!("family `{}` never moves", spec.kind.name())));
        }
        let codec = Codec::planar(roi, 2.0 * max_speed)?;
        Ok(Self {
            name: spec.kind.name().to_string(),
            kinematics: Arc::new(Planar),
            roi,
            dtw,
            codec,
            time_horizon: spec.horizon,
            nominal_dt: spec.dt(),
            source: Arc::new(FamilySource { spec }),
        })
    }

    pub fn make_env(&self) -> Result<TrajectoryEnv> {
        Ok(TrajectoryEnv::new(self.kinematics.clone(), self.roi, self.dtw)?)
    }

    pub fn state_dim(&self) -> usize {
        self.codec.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.codec.action_dim()
    }
}
