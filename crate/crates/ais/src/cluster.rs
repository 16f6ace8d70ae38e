//! Heading-based partition of tracks into up/down/other.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::record::signed_course;
use crate::segment::VesselTrack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterLabel {
    Up,
    Down,
    Other,
}

impl ClusterLabel {
    pub const ALL: [ClusterLabel; 3] = [ClusterLabel::Up, ClusterLabel::Down, ClusterLabel::Other];

    pub fn name(self) -> &'static str {
        match self {
            ClusterLabel::Up => "up",
            ClusterLabel::Down => "down",
            ClusterLabel::Other => "other",
        }
    }
}

impl fmt::Display for ClusterLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClusterLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|l| l.name() == s).ok_or_else(|| format!("unknown cluster `{s}`"))
    }
}

/// Northbound iff the course lies in `[-90, 90]`; the boundary counts as up.
pub fn is_northbound(cog: f64) -> bool {
    signed_course(cog).abs() <= 90.0
}

pub fn label_track(track: &VesselTrack) -> ClusterLabel {
    let up = track.points.iter().filter(|p| is_northbound(p.cog)).count();
    if up == track.points.len() {
        ClusterLabel::Up
    } else if up == 0 {
        ClusterLabel::Down
    } else {
        ClusterLabel::Other
    }
}

/// Every label is present in the result; each list is sorted by track id.
pub fn cluster_tracks(tracks: Vec<VesselTrack>) -> BTreeMap<ClusterLabel, Vec<VesselTrack>> {
    let mut out: BTreeMap<ClusterLabel, Vec<VesselTrack>> = ClusterLabel::ALL.iter().map(|&l| (l, Vec::new())).collect();
    for t in tracks {
        out.get_mut(&label_track(&t)).expect("all labels present").push(t);
    }
    for v in out.values_mut() {
        v.sort_by(|a, b| a.id.cmp(&b.id));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::TrackPoint;
    use chrono::Utc;

    fn track(cogs: &[f64]) -> VesselTrack {
        let t = Utc::now();
        VesselTrack {
            id: "x_0".into(),
            vessel_id: "x".into(),
            points: cogs.iter().map(|&cog| TrackPoint { timestamp: t, lat: 0.0, lon: 0.0, sog: 10.0, cog }).collect(),
        }
    }

    #[test]
    fn labels() {
        assert_eq!(label_track(&track(&[45.0; 5])), ClusterLabel::Up);
        assert_eq!(label_track(&track(&[180.0; 5])), ClusterLabel::Down);
        assert_eq!(label_track(&track(&[45.0, 180.0])), ClusterLabel::Other);
        assert_eq!(label_track(&track(&[270.0, 90.0, 0.0])), ClusterLabel::Up);
        assert_eq!(label_track(&track(&[90.01, 269.99])), ClusterLabel::Down);
    }
}
