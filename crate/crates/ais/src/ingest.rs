//! CSV ingestion with range, region and speed filters.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AisError, Result};
use crate::record::{parse_timestamp, AisRecord, ColumnMap};

/// Axis-aligned longitude/latitude box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBox {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
}

impl GeoBox {
    pub fn world() -> Self {
        Self { lon_min: -180.0, lon_max: 180.0, lat_min: -90.0, lat_max: 90.0 }
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        (self.lon_min..=self.lon_max).contains(&lon) && (self.lat_min..=self.lat_max).contains(&lat)
    }
}

/// Simple polygon of `[lon, lat]` vertices (implicitly closed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon(pub Vec<[f64; 2]>);

impl Polygon {
    /// Even-odd ray casting.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        let v = &self.0;
        if v.len() < 3 {
            return false;
        }
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let ([xi, yi], [xj, yj]) = (v[i], v[j]);
            if (yi > lat) != (yj > lat) && lon < (xj - xi) * (lat - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub columns: ColumnMap,
    pub roi: GeoBox,
    /// Records inside any of these are dropped.
    pub exclusions: Vec<Polygon>,
    /// Records need SOG strictly above this (knots).
    pub min_sog: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { columns: ColumnMap::default(), roi: GeoBox::world(), exclusions: Vec::new(), min_sog: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows: usize,
    /// Unparseable or out-of-range rows.
    pub malformed: usize,
    pub outside_roi: usize,
    pub excluded: usize,
    pub slow: usize,
    /// Later records sharing a vessel's timestamp.
    pub duplicates: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    /// Time-sorted records per vessel.
    pub by_vessel: BTreeMap<String, Vec<AisRecord>>,
    pub stats: IngestStats,
}

impl Ingested {
    pub fn n_records(&self) -> usize {
        self.by_vessel.values().map(Vec::len).sum()
    }
}

struct Indices {
    id: usize,
    time: usize,
    lat: usize,
    lon: usize,
    sog: usize,
    cog: usize,
}

fn find(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| AisError::MissingColumn(name.into()))
}

fn parse_row(row: &csv::StringRecord, ix: &Indices) -> Option<AisRecord> {
    let num = |i: usize| row.get(i).and_then(|v| v.trim().parse::<f64>().ok()).filter(|v| v.is_finite());
    let vessel_id = row.get(ix.id)?.trim().to_string();
    if vessel_id.is_empty() {
        return None;
    }
    let timestamp = parse_timestamp(row.get(ix.time)?)?;
    let (lat, lon, sog, cog) = (num(ix.lat)?, num(ix.lon)?, num(ix.sog)?, num(ix.cog)?);
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) || sog < 0.0 || !(0.0..=360.0).contains(&cog) {
        return None;
    }
    Some(AisRecord { vessel_id, timestamp, lat, lon, sog, cog: cog.rem_euclid(360.0) })
}

pub fn ingest_reader<R: Read>(reader: R, cfg: &IngestConfig) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let c = &cfg.columns;
    let ix = Indices {
        id: find(&headers, &c.vessel_id)?,
        time: find(&headers, &c.timestamp)?,
        lat: find(&headers, &c.lat)?,
        lon: find(&headers, &c.lon)?,
        sog: find(&headers, &c.sog)?,
        cog: find(&headers, &c.cog)?,
    };
    let mut out = Ingested::default();
    let mut row = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut row) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                out.stats.rows += 1;
                out.stats.malformed += 1;
                log::warn!("skipping malformed AIS row: {e}");
                continue;
            }
        }
        out.stats.rows += 1;
        let Some(rec) = parse_row(&row, &ix) else {
            out.stats.malformed += 1;
            log::warn!("skipping invalid AIS row {}", out.stats.rows);
            continue;
        };
        if !cfg.roi.contains(rec.lon, rec.lat) {
            out.stats.outside_roi += 1;
        } else if cfg.exclusions.iter().any(|p| p.contains(rec.lon, rec.lat)) {
            out.stats.excluded += 1;
        } else if !(rec.sog > cfg.min_sog) {
            out.stats.slow += 1;
        } else {
            out.by_vessel.entry(rec.vessel_id.clone()).or_default().push(rec);
        }
    }
    for records in out.by_vessel.values_mut() {
        // Stable: among equal timestamps the first in file order survives.
        records.sort_by_key(|r| r.timestamp);
        let before = records.len();
        records.dedup_by(|later, earlier| later.timestamp == earlier.timestamp);
        out.stats.duplicates += before - records.len();
    }
    out.stats.kept = out.n_records();
    Ok(out)
}

pub fn ingest_csv(path: &Path, cfg: &IngestConfig) -> Result<Ingested> {
    let file = std::fs::File::open(path)?;
    ingest_reader(std::io::BufReader::new(file), cfg)
}
