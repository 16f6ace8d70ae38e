//! Synthetic AIS traffic with known ground truth: planted clusters, kinks,
//! stop gaps, short segments, outliers, slow fixes, duplicates and a
//! malformed row.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use traji_agents::policy::Policy;
use traji_agents::Task;
use traji_core::geo::{geo_step, GeoAction, GeoState};
use traji_core::seed::{stream_rng, Stream};
use traji_core::TrajectoryEnv;

use crate::cluster::ClusterLabel;
use crate::error::Result;
use crate::ingest::Polygon;
use crate::segment::{TrackPoint, VesselTrack};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureConfig {
    pub seed: u64,
    pub vessels: usize,
    /// Retained segments have `min_points..min_points + extra_points` fixes.
    pub min_points: usize,
    pub extra_points: usize,
    pub interval_secs: i64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self { seed: 0, vessels: 24, min_points: 900, extra_points: 200, interval_secs: 60 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureTruth {
    pub rows: usize,
    pub malformed: usize,
    pub slow: usize,
    pub duplicates: usize,
    pub outliers: usize,
    /// Includes the short ones.
    pub segments: usize,
    pub short_segments: usize,
    pub labels: BTreeMap<String, ClusterLabel>,
    pub kinks: BTreeMap<String, usize>,
    /// Other-cluster tracks starting inside [`start_region`].
    pub test_tracks: Vec<String>,
}

impl FixtureTruth {
    pub fn cluster_sizes(&self) -> BTreeMap<ClusterLabel, usize> {
        let mut out: BTreeMap<ClusterLabel, usize> = ClusterLabel::ALL.iter().map(|&l| (l, 0)).collect();
        for l in self.labels.values() {
            *out.get_mut(l).expect("all labels") += 1;
        }
        out
    }

    pub fn kink_counts(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for k in self.kinks.values() {
            *out.entry(*k).or_insert(0) += 1;
        }
        out
    }
}

/// Entrance box where southern starts are placed.
pub fn start_region() -> Polygon {
    Polygon(vec![[-80.6, 23.9], [-79.4, 23.9], [-79.4, 25.1], [-80.6, 25.1]])
}

/// Bounding box of all generated traffic.
pub fn fixture_roi() -> crate::ingest::GeoBox {
    crate::ingest::GeoBox { lon_min: -84.0, lon_max: -76.0, lat_min: 20.0, lat_max: 34.0 }
}

struct Row {
    t: DateTime<Utc>,
    mmsi: String,
    lat: String,
    lon: String,
    sog: f64,
    cog: f64,
}

impl Row {
    fn new(t: DateTime<Utc>, mmsi: &str, s: GeoState, sog: f64, cog: f64) -> Self {
        Self { t, mmsi: mmsi.to_string(), lat: format!("{:.6}", s.lat), lon: format!("{:.6}", s.lon), sog, cog }
    }
}

/// Course sequence for one segment with `kinks` planted changes.
fn plan_courses(label: ClusterLabel, n: usize, kinks: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<usize>) {
    let chunk = n / (kinks + 1);
    let at: Vec<usize> = (1..=kinks).map(|j| j * chunk + rng.random_range(0..5)).collect();
    let (base, mut turn_to_down) = match label {
        ClusterLabel::Up => (rng.random_range(-40.0..40.0), false),
        ClusterLabel::Down => (180.0 + rng.random_range(-40.0..40.0), false),
        ClusterLabel::Other => (rng.random_range(0.0..40.0), true),
    };
    let mut course = base;
    let mut centre = base;
    let mut sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(n);
    let mut next = at.iter().peekable();
    for i in 0..n {
        if next.peek() == Some(&&i) {
            next.next();
            if turn_to_down {
                centre = 180.0 + rng.random_range(-30.0..30.0);
                course = centre;
                turn_to_down = false;
            } else {
                // swing to one side of the centre line and back
                course = if course == centre { centre + sign * rng.random_range(15.0..35.0) } else { centre };
                sign = -sign;
            }
        }
        out.push(course);
    }
    (out, at)
}

/// CSV text in the default column schema and the matching ground truth.
pub fn generate_fixture(cfg: &FixtureConfig) -> Result<(Vec<u8>, FixtureTruth)> {
    let mut truth = FixtureTruth::default();
    let mut rows: Vec<Row> = Vec::new();
    let t0 = Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).single().expect("valid date");
    let step = Duration::seconds(cfg.interval_secs);
    let dt_h = cfg.interval_secs as f64 / 3600.0;
    let region = start_region();
    for v in 0..cfg.vessels {
        let mut rng = stream_rng(cfg.seed, Stream::Fixture, v as u64);
        let mmsi = format!("{}", 367_000_000 + v);
        let mut t = t0 + Duration::minutes(7 * v as i64);
        let n_segments = if v % 3 == 0 { 2 } else { 1 };
        for seg in 0..n_segments {
            if seg > 0 {
                t += Duration::minutes(120);
            }
            let label = ClusterLabel::ALL[(v + seg) % 3];
            let kinks = match label {
                ClusterLabel::Other => rng.random_range(1..=4),
                _ => rng.random_range(0..=4),
            };
            let n = cfg.min_points + rng.random_range(0..cfg.extra_points.max(1));
            let (courses, _) = plan_courses(label, n, kinks, &mut rng);
            let south = label != ClusterLabel::Down;
            let in_region = south && (v + seg) % 2 == 0;
            let lat0 = if !south { rng.random_range(28.0..29.0) } else if in_region { rng.random_range(24.0..25.0) } else { rng.random_range(25.6..26.0) };
            let mut s = GeoState::new(rng.random_range(-80.5..-79.5), lat0)?;
            let sog0: f64 = rng.random_range(10.0..16.0);
            let id = format!("{mmsi}_{seg}");
            truth.labels.insert(id.clone(), label);
            truth.kinks.insert(id.clone(), kinks);
            if label == ClusterLabel::Other && region.contains(s.lon, s.lat) {
                truth.test_tracks.push(id);
            }
            truth.segments += 1;
            // fixes far from any course change, in the first straight run
            let quiet = n / (kinks + 1) / 2;
            for (i, &course) in courses.iter().enumerate() {
                let sog = ((sog0 + rng.random_range(-0.5..0.5)) * 100.0).round() / 100.0;
                let cog = ((course + rng.random_range(-2.0..2.0)).rem_euclid(360.0) * 100.0).round() / 100.0;
                let mut row = Row::new(t, &mmsi, s, sog, cog);
                if v % 5 == 1 && i == quiet {
                    // ~180 kn jump
                    row.lat = format!("{:.6}", s.lat + 0.05);
                    truth.outliers += 1;
                }
                rows.push(row);
                if v % 7 == 2 && i == quiet + 10 {
                    let mut dup = Row::new(t, &mmsi, s, sog, cog);
                    dup.lon = format!("{:.6}", s.lon + 1e-4);
                    rows.push(dup);
                    truth.duplicates += 1;
                }
                if v % 6 == 3 && i == quiet + 20 {
                    rows.push(Row::new(t + step / 2, &mmsi, s, 1.5, cog));
                    truth.slow += 1;
                }
                if v == 0 && i == quiet + 30 {
                    let mut bad = Row::new(t + step / 3, &mmsi, s, sog, cog);
                    bad.lat = "n/a".into();
                    rows.push(bad);
                    truth.malformed += 1;
                }
                s = geo_step(s, GeoAction::new(sog, cog, dt_h)?)?;
                t += step;
            }
        }
        if v % 4 == 1 {
            // trailing short segment after a stop
            t += Duration::minutes(90);
            let mut s = GeoState::new(-79.0, 30.0)?;
            for _ in 0..300 {
                rows.push(Row::new(t, &mmsi, s, 11.0, 90.0));
                s = geo_step(s, GeoAction::new(11.0, 90.0, dt_h)?)?;
                t += step;
            }
            truth.segments += 1;
            truth.short_segments += 1;
        }
    }
    rows.sort_by_key(|r| r.t);
    truth.rows = rows.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["MMSI", "BaseDateTime", "LAT", "LON", "SOG", "COG"])?;
    for r in &rows {
        w.write_record([
            r.mmsi.clone(),
            r.t.format("%Y-%m-%dT%H:%M:%S").to_string(),
            r.lat.clone(),
            r.lon.clone(),
            format!("{:.2}", r.sog),
            format!("{:.2}", r.cog),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok((bytes, truth))
}

pub fn write_fixture<W: Write>(mut w: W, cfg: &FixtureConfig) -> Result<FixtureTruth> {
    let (bytes, truth) = generate_fixture(cfg)?;
    w.write_all(&bytes)?;
    Ok(truth)
}

/// Short random-walk tracks starting in the entrance region, for exercising
/// detection without a trained model.
pub fn mock_tracks(n: usize, points: usize, seed: u64) -> Result<Vec<VesselTrack>> {
    let t0 = Utc.with_ymd_and_hms(2017, 6, 1, 0, 0, 0).single().expect("valid date");
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut rng = stream_rng(seed, Stream::Fixture, (1 << 20) + k as u64);
        let mut s = GeoState::new(rng.random_range(-80.5..-79.5), rng.random_range(24.0..25.0))?;
        let mut cog: f64 = rng.random_range(-30.0..30.0);
        let sog = rng.random_range(8.0..16.0);
        let wander = rng.random_range(0.0..8.0);
        let mut pts = Vec::with_capacity(points);
        for i in 0..points {
            let c = cog.rem_euclid(360.0);
            pts.push(TrackPoint { timestamp: t0 + Duration::minutes(i as i64), lat: s.lat, lon: s.lon, sog, cog: c });
            s = geo_step(s, GeoAction::new(sog, c, 1.0 / 60.0)?)?;
            cog += rng.random_range(-wander..=wander);
        }
        out.push(VesselTrack { id: format!("mock_{k}"), vessel_id: format!("mock{k}"), points: pts });
    }
    Ok(out)
}

/// Keeps the first observed speed, course and step for the whole episode.
#[derive(Debug, Clone, Default)]
pub struct HoldCourse {
    action: Option<Vec<f64>>,
}

impl Policy for HoldCourse {
    fn begin_episode(&mut self) {
        self.action = None;
    }

    fn act(&mut self, _task: &Task, env: &TrajectoryEnv, _rng: &mut ChaCha8Rng) -> traji_agents::Result<Vec<f64>> {
        if self.action.is_none() {
            self.action = Some(env.expert_action()?);
        }
        Ok(self.action.clone().expect("set above"))
    }
}
