//! Trajectory-imitation primitives: synthetic trajectory families, the
//! episodic imitation environment, dynamic time warping metrics and the
//! spherical-Earth kinematics used for vessel tracks.

pub mod dtw;
pub mod env;
pub mod error;
pub mod family;
pub mod geo;
pub mod seed;
pub mod state;

pub use dtw::{DtwConfig, GroundMetric, PrefixDtwState};
pub use env::{EnvStep, Kinematics, Planar, Roi, StepInfo, TrajectoryEnv};
pub use error::{CoreError, Result};
pub use family::{FamilyKind, FamilySpec};
pub use geo::{GeoAction, GeoKinematics, GeoState};
pub use state::{Action2, State2, Trajectory};
