//! Anomaly scoring: roll a generator out from each test track's first fix and
//! flag tracks it fails to reproduce.

use std::io::Write;

use serde::{Deserialize, Serialize};
use traji_agents::policy::{rollout, Policy};
use traji_agents::Task;
use traji_core::seed::{stream_rng, Stream};

use crate::error::{AisError, Result};
use crate::segment::VesselTrack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub track_ids: Vec<String>,
    /// Raw great-circle DTW in kilometres.
    pub raw: Vec<f64>,
    /// `raw / max(raw)`, in `[0, 1]`.
    pub scores: Vec<f64>,
    pub quantile: f64,
    /// Flag threshold; `-inf` when every track is flagged.
    pub threshold: f64,
    pub flagged: Vec<bool>,
}

impl AnomalyReport {
    pub fn n_flagged(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }

    /// `track_id,score,flagged`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["track_id", "score", "flagged"])?;
        for ((id, s), f) in self.track_ids.iter().zip(&self.scores).zip(&self.flagged) {
            out.write_record([id.as_str(), &format!("{s:.9}"), if *f { "true" } else { "false" }])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Number of tracks above the `quantile` of `n` scores: `ceil((1 - q) n)`,
/// guarded against representation error in `1 - q`.
pub fn expected_flags(n: usize, quantile: f64) -> usize {
    (((1.0 - quantile) * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Normalizes raw distances by their maximum and flags those strictly above
/// the `(k+1)`-th largest score, where `k = expected_flags(n, quantile)`.
/// With distinct scores exactly `k` tracks are flagged; ties at the threshold
/// are all left unflagged.
pub fn threshold_scores(track_ids: Vec<String>, raw: Vec<f64>, quantile: f64) -> Result<AnomalyReport> {
    if !(0.0..=1.0).contains(&quantile) {
        return Err(AisError::Config(format!("quantile {quantile} not in [0, 1]")));
    }
    if track_ids.len() != raw.len() {
        return Err(AisError::Config("one score per track required".into()));
    }
    if raw.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(AisError::Config("scores must be finite and non-negative".into()));
    }
    let max = raw.iter().copied().fold(0.0, f64::max);
    let scores: Vec<f64> = if max > 0.0 { raw.iter().map(|v| v / max).collect() } else { vec![0.0; raw.len()] };
    let k = expected_flags(scores.len(), quantile);
    let mut sorted = scores.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted.get(k).copied().unwrap_or(f64::NEG_INFINITY);
    let flagged = scores.iter().map(|&s| s > threshold).collect();
    Ok(AnomalyReport { track_ids, raw, scores, quantile, threshold, flagged })
}

/// Raw DTW between a rollout of `policy` and each track. Rollout noise for
/// track `i` comes from its own evaluation stream of `seed`.
pub fn score_tracks(task: &Task, policy: &mut dyn Policy, tracks: &[VesselTrack], seed: u64) -> Result<Vec<f64>> {
    tracks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut rng = stream_rng(seed, Stream::Noise, (1 << 33) + i as u64);
            Ok(rollout(task, policy, t.to_trajectory()?, &mut rng)?.raw_dtw)
        })
        .collect()
}

pub fn detect_anomalies(
    task: &Task,
    policy: &mut dyn Policy,
    tracks: &[VesselTrack],
    quantile: f64,
    seed: u64,
) -> Result<AnomalyReport> {
    let raw = score_tracks(task, policy, tracks, seed)?;
    threshold_scores(tracks.iter().map(|t| t.id.clone()).collect(), raw, quantile)
}
