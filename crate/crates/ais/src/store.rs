//! Newline-delimited JSON track store: one track per line as
//! `{"id", "label", "points": [[iso-time, lat, lon, sog, cog], ...]}`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterLabel;
use crate::error::{AisError, Result};
use crate::record::{format_timestamp, parse_timestamp};
use crate::segment::{TrackPoint, VesselTrack};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Line {
    id: String,
    vessel_id: String,
    label: Option<ClusterLabel>,
    points: Vec<(String, f64, f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredTrack {
    pub track: VesselTrack,
    pub label: Option<ClusterLabel>,
}

pub fn write_tracks<'a, W: Write>(mut w: W, tracks: impl IntoIterator<Item = (&'a VesselTrack, Option<ClusterLabel>)>) -> Result<()> {
    for (t, label) in tracks {
        let line = Line {
            id: t.id.clone(),
            vessel_id: t.vessel_id.clone(),
            label,
            points: t.points.iter().map(|p| (format_timestamp(&p.timestamp), p.lat, p.lon, p.sog, p.cog)).collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tracks<R: BufRead>(r: R) -> Result<Vec<StoredTrack>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(&line)?;
        let points = l
            .points
            .into_iter()
            .map(|(ts, lat, lon, sog, cog)| {
                let timestamp = parse_timestamp(&ts)
                    .ok_or_else(|| AisError::Config(format!("line {}: bad timestamp `{ts}`", n + 1)))?;
                Ok(TrackPoint { timestamp, lat, lon, sog, cog })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(StoredTrack { track: VesselTrack { id: l.id, vessel_id: l.vessel_id, points }, label: l.label });
    }
    Ok(out)
}
