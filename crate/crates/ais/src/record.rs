use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

/// One AIS position report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AisRecord {
    pub vessel_id: String,
    pub timestamp: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    /// Knots.
    pub sog: f64,
    /// Degrees clockwise from North, in `[0, 360)`.
    pub cog: f64,
}

/// CSV header names for each field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub vessel_id: String,
    pub timestamp: String,
    pub lat: String,
    pub lon: String,
    pub sog: String,
    pub cog: String,
}

impl Default for ColumnMap {
    /// marinecadastre.gov schema.
    fn default() -> Self {
        Self {
            vessel_id: "MMSI".into(),
            timestamp: "BaseDateTime".into(),
            lat: "LAT".into(),
            lon: "LON".into(),
            sog: "SOG".into(),
            cog: "COG".into(),
        }
    }
}

/// Accepts RFC 3339 and naive `YYYY-MM-DD[T ]HH:MM:SS` (taken as UTC).
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Course normalized to `(-180, 180]`.
pub fn signed_course(cog: f64) -> f64 {
    let c = cog.rem_euclid(360.0);
    if c > 180.0 {
        c - 360.0
    } else {
        c
    }
}

/// Absolute course change along the shorter arc, in `[0, 180]`.
pub fn course_change(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps() {
        let a = parse_timestamp("2017-01-01T00:00:05").unwrap();
        let b = parse_timestamp("2017-01-01 00:00:05").unwrap();
        let c = parse_timestamp("2017-01-01T00:00:05Z").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(format_timestamp(&a), "2017-01-01T00:00:05Z");
        assert!(parse_timestamp("yesterday").is_none());
    }

    #[test]
    fn course_arithmetic() {
        assert_eq!(signed_course(270.0), -90.0);
        assert_eq!(signed_course(180.0), 180.0);
        assert_eq!(signed_course(-30.0), -30.0);
        assert_eq!(course_change(350.0, 10.0), 20.0);
        assert_eq!(course_change(10.0, 350.0), 20.0);
        assert_eq!(course_change(0.0, 180.0), 180.0);
    }
}
