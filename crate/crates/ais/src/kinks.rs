//! Course-change ("kink") statistics.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::record::course_change;
use crate::segment::VesselTrack;

pub const DEFAULT_KINK_THRESHOLD_DEG: f64 = 10.0;

/// Consecutive-fix course changes strictly above `threshold_deg`.
pub fn count_kinks(cogs: impl IntoIterator<Item = f64>, threshold_deg: f64) -> usize {
    let mut it = cogs.into_iter();
    let Some(mut prev) = it.next() else { return 0 };
    let mut n = 0;
    for c in it {
        if course_change(prev, c) > threshold_deg {
            n += 1;
        }
        prev = c;
    }
    n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinkHistogram {
    pub threshold_deg: f64,
    /// `(track id, kinks)` in input order.
    pub per_track: Vec<(String, usize)>,
    /// kinks -> number of tracks
    pub counts: BTreeMap<usize, usize>,
}

impl KinkHistogram {
    pub fn n_tracks(&self) -> usize {
        self.per_track.len()
    }

    pub fn proportion(&self, kinks: usize) -> f64 {
        let n = self.n_tracks();
        if n == 0 {
            return 0.0;
        }
        self.counts.get(&kinks).copied().unwrap_or(0) as f64 / n as f64
    }

    /// `kinks,tracks,proportion`, one row per count from 0 to the maximum.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["kinks", "tracks", "proportion"])?;
        let max = self.counts.keys().next_back().copied().unwrap_or(0);
        for k in 0..=max {
            let c = self.counts.get(&k).copied().unwrap_or(0);
            out.write_record([k.to_string(), c.to_string(), format!("{:.6}", self.proportion(k))])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn kink_histogram(tracks: &[VesselTrack], threshold_deg: f64) -> KinkHistogram {
    let per_track: Vec<(String, usize)> = tracks
        .iter()
        .map(|t| (t.id.clone(), count_kinks(t.points.iter().map(|p| p.cog), threshold_deg)))
        .collect();
    let mut counts = BTreeMap::new();
    for (_, k) in &per_track {
        *counts.entry(*k).or_insert(0) += 1;
    }
    KinkHistogram { threshold_deg, per_track, counts }
}
