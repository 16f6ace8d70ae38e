//! Outlier removal and splitting of per-vessel record streams into tracks.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use traji_core::geo::{haversine_km, EARTH_RADIUS_KM, NMI_KM};
use traji_core::{State2, Trajectory};

use crate::error::{AisError, Result};
use crate::record::AisRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub timestamp: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    pub sog: f64,
    pub cog: f64,
}

impl From<&AisRecord> for TrackPoint {
    fn from(r: &AisRecord) -> Self {
        Self { timestamp: r.timestamp, lat: r.lat, lon: r.lon, sog: r.sog, cog: r.cog }
    }
}

impl TrackPoint {
    pub fn state(&self) -> State2 {
        State2::new(self.lon, self.lat)
    }
}

/// A contiguous voyage segment of one vessel, strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselTrack {
    /// `{vessel_id}_{k}` with `k` counting the vessel's retained segments.
    pub id: String,
    pub vessel_id: String,
    pub points: Vec<TrackPoint>,
}

fn hours(a: DateTime<Utc>, b: DateTime<Utc>) -> f64 {
    (b - a).num_milliseconds() as f64 / 3.6e6
}

impl VesselTrack {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Hours from point `i` to point `i + 1`.
    pub fn dt(&self, i: usize) -> f64 {
        hours(self.points[i].timestamp, self.points[i + 1].timestamp)
    }

    pub fn duration_hours(&self) -> f64 {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => hours(a.timestamp, b.timestamp),
            _ => 0.0,
        }
    }

    /// `(lon, lat)` states with times in hours since the first fix.
    pub fn to_trajectory(&self) -> Result<Trajectory> {
        let t0 = self
            .points
            .first()
            .ok_or_else(|| AisError::Config(format!("track `{}` is empty", self.id)))?
            .timestamp;
        let states = self.points.iter().map(TrackPoint::state).collect();
        let times = self.points.iter().map(|p| hours(t0, p.timestamp)).collect();
        Ok(Trajectory::new(states, times)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    /// Split when consecutive fixes are more than this many hours apart.
    pub stop_gap_hours: f64,
    /// Shorter segments are dropped.
    pub min_points: usize,
    /// Knots; fixes implying a faster jump from the last kept fix are outliers.
    pub max_implied_speed: f64,
    /// Knots; fixes whose SOG differs more than this from the implied speed are outliers.
    pub max_sog_mismatch: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self { stop_gap_hours: 1.0, min_points: 900, max_implied_speed: 50.0, max_sog_mismatch: 30.0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub outliers: usize,
    pub segments: usize,
    pub short_segments: usize,
    pub tracks: usize,
}

/// Knots between two fixes; infinite for non-increasing timestamps.
pub fn implied_speed(a: &TrackPoint, b: &TrackPoint) -> f64 {
    let h = hours(a.timestamp, b.timestamp);
    let nmi = haversine_km(a.state(), b.state(), EARTH_RADIUS_KM) / NMI_KM;
    if h > 0.0 {
        nmi / h
    } else {
        f64::INFINITY
    }
}

/// Removes outliers from one vessel's time-sorted records and splits the rest
/// at stop gaps. Each segment's first fix is trusted; later fixes are checked
/// against the last fix kept in the same segment.
pub fn split_vessel(records: &[AisRecord], cfg: &SegmentConfig, stats: &mut SegmentStats) -> Vec<Vec<TrackPoint>> {
    let mut segments: Vec<Vec<TrackPoint>> = Vec::new();
    let mut current: Vec<TrackPoint> = Vec::new();
    for r in records {
        let p = TrackPoint::from(r);
        if let Some(last) = current.last() {
            if hours(last.timestamp, p.timestamp) > cfg.stop_gap_hours {
                segments.push(std::mem::take(&mut current));
            } else {
                let v = implied_speed(last, &p);
                if v > cfg.max_implied_speed || (p.sog - v).abs() > cfg.max_sog_mismatch {
                    stats.outliers += 1;
                    continue;
                }
            }
        }
        current.push(p);
    }
    if !current.is_empty() {
        segments.push(current);
    }
    segments
}

pub fn segment_tracks(by_vessel: &BTreeMap<String, Vec<AisRecord>>, cfg: &SegmentConfig) -> (Vec<VesselTrack>, SegmentStats) {
    let mut stats = SegmentStats::default();
    let mut tracks = Vec::new();
    for (vessel, records) in by_vessel {
        let mut k = 0;
        for points in split_vessel(records, cfg, &mut stats) {
            stats.segments += 1;
            if points.len() < cfg.min_points {
                stats.short_segments += 1;
                continue;
            }
            tracks.push(VesselTrack { id: format!("{vessel}_{k}"), vessel_id: vessel.clone(), points });
            k += 1;
        }
    }
    stats.tracks = tracks.len();
    (tracks, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};
    use traji_core::geo::{geo_step, GeoAction, GeoState};

    fn straight(n: usize, gap_at: Option<usize>) -> Vec<AisRecord> {
        let t0 = Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap();
        let mut s = GeoState::new(-80.0, 24.0).unwrap();
        let mut t = t0;
        let mut out = Vec::new();
        for i in 0..n {
            if Some(i) == gap_at {
                t += Duration::minutes(120);
            }
            out.push(AisRecord { vessel_id: "v".into(), timestamp: t, lat: s.lat, lon: s.lon, sog: 12.0, cog: 10.0 });
            s = geo_step(s, GeoAction::new(12.0, 10.0, 1.0 / 60.0).unwrap()).unwrap();
            t += Duration::minutes(1);
        }
        out
    }

    fn run(records: Vec<AisRecord>) -> (Vec<VesselTrack>, SegmentStats) {
        let map = BTreeMap::from([("v".to_string(), records)]);
        segment_tracks(&map, &SegmentConfig::default())
    }

    #[test]
    fn short_segment_is_dropped() {
        let (tracks, stats) = run(straight(500, None));
        assert!(tracks.is_empty());
        assert_eq!(stats.short_segments, 1);
    }

    #[test]
    fn gap_splits() {
        let (tracks, stats) = run(straight(2000, Some(1000)));
        assert_eq!(stats.segments, 2);
        assert_eq!(tracks.iter().map(|t| t.len()).collect::<Vec<_>>(), vec![1000, 1000]);
        assert_eq!(tracks[1].id, "v_1");
    }

    #[test]
    fn teleport_is_removed() {
        let mut recs = straight(1000, None);
        // 1/60 h apart, ~0.056 deg off course: ~200 kn implied
        recs[400].lat += 200.0 / 60.0 / 60.0;
        let (tracks, stats) = run(recs);
        assert_eq!(stats.outliers, 1);
        assert_eq!(tracks[0].len(), 999);
    }

    #[test]
    fn bad_sog_is_removed() {
        let mut recs = straight(1000, None);
        recs[10].sog = 45.0;
        let (_, stats) = run(recs);
        assert_eq!(stats.outliers, 1);
    }

    #[test]
    fn trajectory_times_in_hours() {
        let (tracks, _) = run(straight(900, None));
        let tr = tracks[0].to_trajectory().unwrap();
        assert_eq!(tr.times[0], 0.0);
        assert!((tr.times[60] - 1.0).abs() < 1e-12);
    }
}
