//! Training-corpus assembly and test-set selection.

use rand::seq::index;
use traji_core::seed::{stream_rng, Stream};

use crate::ingest::Polygon;
use crate::segment::VesselTrack;

/// Uniform subsample of `min(per_cluster, len)` tracks, kept in input order.
/// Deterministic for a given seed.
pub fn build_train_set(cluster: &[VesselTrack], per_cluster: usize, seed: u64) -> Vec<VesselTrack> {
    if cluster.len() <= per_cluster {
        if cluster.len() < per_cluster {
            log::warn!("cluster has {} tracks, fewer than the requested {per_cluster}; taking all", cluster.len());
        }
        return cluster.to_vec();
    }
    let mut rng = stream_rng(seed, Stream::Subsample, 0);
    let mut picked = index::sample(&mut rng, cluster.len(), per_cluster).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| cluster[i].clone()).collect()
}

/// Tracks whose first fix lies inside `start_region`.
pub fn select_by_start(tracks: &[VesselTrack], start_region: &Polygon) -> Vec<VesselTrack> {
    tracks
        .iter()
        .filter(|t| t.points.first().is_some_and(|p| start_region.contains(p.lon, p.lat)))
        .cloned()
        .collect()
}
