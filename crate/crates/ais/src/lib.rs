//! Vessel-traffic pipeline: CSV ingestion, segmentation into voyages,
//! heading clusters, kink statistics, training-set assembly and anomaly
//! detection with a trained trajectory generator.

pub mod cluster;
pub mod detect;
pub mod error;
pub mod fixture;
pub mod ingest;
pub mod kinks;
pub mod record;
pub mod segment;
pub mod store;
pub mod task;
pub mod trainset;

pub use cluster::{cluster_tracks, ClusterLabel};
pub use detect::{detect_anomalies, threshold_scores, AnomalyReport};
pub use error::{AisError, Result};
pub use ingest::{ingest_csv, ingest_reader, GeoBox, IngestConfig, Polygon};
pub use kinks::{kink_histogram, KinkHistogram};
pub use record::AisRecord;
pub use segment::{segment_tracks, SegmentConfig, TrackPoint, VesselTrack};
pub use task::{ais_task, AisTaskConfig};
pub use trainset::{build_train_set, select_by_start};
