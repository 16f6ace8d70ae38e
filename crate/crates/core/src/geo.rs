//! Spherical-Earth kinematics for vessel motion.
//!
//! Positions are `(longitude, latitude)` in degrees, speeds in knots, courses
//! in degrees clockwise from North and time steps in hours.

use serde::{Deserialize, Serialize};

use crate::dtw::GroundMetric;
use crate::env::Kinematics;
use crate::error::{CoreError, Result};
use crate::state::State2;

/// Equatorial Earth radius.
pub const EARTH_RADIUS_KM: f64 = 6378.137;
/// International nautical mile.
pub const NMI_KM: f64 = 1.852;
/// Latitudes beyond this are rejected by [`geo_step`].
pub const POLAR_CUTOFF_DEG: f64 = 85.0;

/// One arc-minute on a sphere of the given radius, the length unit implied by
/// the `1/60` degree-per-mile factor of the flat step.
pub fn arc_minute_km(radius_km: f64) -> f64 {
    radius_km * std::f64::consts::PI / (180.0 * 60.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoState {
    pub lon: f64,
    pub lat: f64,
}

impl GeoState {
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        if !lon.is_finite() || !lat.is_finite() {
            return Err(CoreError::Numeric("geo state"));
        }
        if !(-180.0..180.0).contains(&lon) || !(lat > -90.0 && lat < 90.0) {
            return Err(CoreError::Parameter(format!("({lon}, {lat}) outside the lon/lat ranges")));
        }
        Ok(Self { lon, lat })
    }

    pub fn to_state(self) -> State2 {
        State2::new(self.lon, self.lat)
    }

    pub fn from_state(s: State2) -> Result<Self> {
        Self::new(s.x, s.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoAction {
    /// knots
    pub sog: f64,
    /// degrees from North in `[0, 360)`
    pub cog: f64,
    /// hours
    pub dt: f64,
}

impl GeoAction {
    pub fn new(sog: f64, cog: f64, dt: f64) -> Result<Self> {
        if !(sog.is_finite() && cog.is_finite() && dt.is_finite()) {
            return Err(CoreError::Numeric("geo action"));
        }
        if sog < 0.0 || dt <= 0.0 {
            return Err(CoreError::Parameter(format!("sog {sog} must be >= 0 and dt {dt} > 0")));
        }
        Ok(Self { sog, cog: cog.rem_euclid(360.0), dt })
    }
}

/// Wraps a longitude into `[-180, 180)`.
pub fn wrap_lon(lon: f64) -> f64 {
    let w = (lon + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

fn hav(x: f64) -> f64 {
    let s = (x / 2.0).sin();
    s * s
}

pub fn haversine_distance(p1: GeoState, p2: GeoState, radius_km: f64) -> f64 {
    haversine_km(p1.to_state(), p2.to_state(), radius_km)
}

/// Great-circle distance between `(lon, lat)` points given in degrees.
pub fn haversine_km(p1: State2, p2: State2, radius_km: f64) -> f64 {
    let (phi1, phi2) = (p1.y.to_radians(), p2.y.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (p2.x - p1.x).to_radians();
    let h = hav(dphi) + phi1.cos() * phi2.cos() * hav(dlambda);
    2.0 * radius_km * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Locally-flat update of position under course `cog` and speed `sog` for `dt` hours.
pub fn geo_step(s: GeoState, a: GeoAction) -> Result<GeoState> {
    if s.lat.abs() > POLAR_CUTOFF_DEG {
        return Err(CoreError::PolarSingularity(s.lat));
    }
    let cog = a.cog.to_radians();
    let dist_deg = a.sog * a.dt / 60.0;
    let lat = s.lat + cog.cos() * dist_deg;
    let lon = s.lon + cog.sin() * dist_deg / s.lat.to_radians().cos();
    if !(lat > -90.0 && lat < 90.0) {
        return Err(CoreError::PolarSingularity(lat));
    }
    Ok(GeoState { lon: wrap_lon(lon), lat })
}

/// Action that moves `s` onto `next` in `dt` hours under [`geo_step`].
pub fn perfect_geo_action(s: GeoState, next: GeoState, dt: f64) -> GeoAction {
    let north = 60.0 * (next.lat - s.lat);
    let east = 60.0 * wrap_lon(next.lon - s.lon) * s.lat.to_radians().cos();
    let dist = north.hypot(east);
    let cog = if dist == 0.0 { 0.0 } else { east.atan2(north).to_degrees().rem_euclid(360.0) };
    GeoAction { sog: dist / dt, cog, dt }
}

/// Relative gap between the haversine length of one step and its nominal
/// length `sog·dt`, measured in arc-minutes of the model sphere.
pub fn geo_consistency_check(s: GeoState, a: GeoAction) -> Result<f64> {
    geo_consistency_check_with(s, a, arc_minute_km(EARTH_RADIUS_KM))
}

/// As [`geo_consistency_check`] with an explicit length of one nautical mile.
pub fn geo_consistency_check_with(s: GeoState, a: GeoAction, nmi_km: f64) -> Result<f64> {
    let nominal = a.sog * a.dt * nmi_km;
    let next = geo_step(s, a)?;
    let actual = haversine_distance(s, next, EARTH_RADIUS_KM);
    if nominal == 0.0 {
        return Ok(actual);
    }
    Ok((actual - nominal).abs() / nominal)
}

/// Vessel kinematics: actions are `[sog, cog, dt]` and time advances by the
/// action's own `dt`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GeoKinematics;

impl Kinematics for GeoKinematics {
    fn action_dim(&self) -> usize {
        3
    }

    fn apply(&self, s: State2, action: &[f64], _dt: f64) -> Result<(State2, f64)> {
        let [sog, cog, dt] = action else {
            return Err(CoreError::Parameter(format!("expected 3 action values, got {}", action.len())));
        };
        let a = GeoAction::new(*sog, *cog, *dt)?;
        let next = geo_step(GeoState { lon: s.x, lat: s.y }, a)?;
        Ok((next.to_state(), a.dt))
    }

    fn perfect_action(&self, s: State2, next: State2, dt: f64) -> Vec<f64> {
        let a = perfect_geo_action(GeoState { lon: s.x, lat: s.y }, GeoState { lon: next.x, lat: next.y }, dt);
        vec![a.sog, a.cog, a.dt]
    }

    fn ground_metric(&self) -> GroundMetric {
        GroundMetric::GreatCircle
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gs(lon: f64, lat: f64) -> GeoState {
        GeoState::new(lon, lat).unwrap()
    }

    #[test]
    fn haversine_examples() {
        assert_eq!(haversine_distance(gs(10.0, 20.0), gs(10.0, 20.0), EARTH_RADIUS_KM), 0.0);
        let q = haversine_distance(gs(0.0, 0.0), gs(90.0, 0.0), EARTH_RADIUS_KM);
        assert!((q - std::f64::consts::PI * EARTH_RADIUS_KM / 2.0).abs() < 1e-9);
        assert!((q - 10018.75).abs() < 0.01);
        let one_deg_nmi = haversine_distance(gs(0.0, 0.0), gs(0.0, 1.0), EARTH_RADIUS_KM) / NMI_KM;
        assert!((one_deg_nmi - 60.0).abs() / 60.0 < 2e-3);
    }

    #[test]
    fn step_examples() {
        let n = geo_step(gs(0.0, 0.0), GeoAction::new(60.0, 0.0, 1.0).unwrap()).unwrap();
        assert!((n.lat - 1.0).abs() < 1e-12 && n.lon.abs() < 1e-12);
        let e = geo_step(gs(0.0, 0.0), GeoAction::new(60.0, 90.0, 1.0).unwrap()).unwrap();
        assert!((e.lon - 1.0).abs() < 1e-12 && e.lat.abs() < 1e-12);
        let s = gs(-80.5, 24.3);
        assert_eq!(geo_step(s, GeoAction::new(0.0, 123.0, 0.5).unwrap()).unwrap(), s);
    }

    #[test]
    fn polar_cutoff() {
        let err = geo_step(gs(0.0, 86.0), GeoAction::new(10.0, 0.0, 1.0).unwrap());
        assert!(matches!(err, Err(CoreError::PolarSingularity(_))));
    }

    #[test]
    fn consistency_examples() {
        let eq = geo_consistency_check(gs(0.0, 0.0), GeoAction::new(1.0, 90.0, 1.0).unwrap()).unwrap();
        assert!(eq < 1e-3, "{eq}");
        let north = geo_consistency_check(gs(0.0, 0.0), GeoAction::new(1.0, 0.0, 1.0).unwrap()).unwrap();
        assert!(north < 1e-3, "{north}");
        assert_eq!(geo_consistency_check(gs(0.0, 0.0), GeoAction::new(0.0, 0.0, 1.0).unwrap()).unwrap(), 0.0);
        for cog in [0.0, 45.0, 90.0, 200.0] {
            let r = geo_consistency_check(gs(3.0, 60.0), GeoAction::new(5.0, cog, 1.0).unwrap()).unwrap();
            assert!(r < 1e-2, "{cog}: {r}");
        }
    }

    #[test]
    fn perfect_action_reproduces_next_fix() {
        let s = gs(-81.2, 24.6);
        let n = gs(-81.17, 24.64);
        let a = perfect_geo_action(s, n, 0.1);
        let got = geo_step(s, GeoAction::new(a.sog, a.cog, a.dt).unwrap()).unwrap();
        assert!((got.lon - n.lon).abs() < 1e-12 && (got.lat - n.lat).abs() < 1e-12);
    }

    #[test]
    fn lon_wrapping() {
        assert_eq!(wrap_lon(180.0), -180.0);
        assert_eq!(wrap_lon(-180.0), -180.0);
        assert!((wrap_lon(190.0) + 170.0).abs() < 1e-12);
        let e = geo_step(gs(179.99, 0.0), GeoAction::new(60.0, 90.0, 1.0).unwrap()).unwrap();
        assert!((-180.0..180.0).contains(&e.lon));
    }

    proptest! {
        #[test]
        fn wrapped_longitude_in_range(lon in -1e4f64..1e4) {
            let w = wrap_lon(lon);
            prop_assert!((-180.0..180.0).contains(&w));
        }

        #[test]
        fn opposite_courses_cancel_near_equator(
            lon in -179.0f64..179.0, lat in -10.0f64..10.0,
            cog in 0.0f64..360.0, dist in 0.0f64..1.0,
        ) {
            let s = gs(lon, lat);
            let out = geo_step(s, GeoAction::new(dist, cog, 1.0).unwrap()).unwrap();
            let back = geo_step(out, GeoAction::new(dist, cog + 180.0, 1.0).unwrap()).unwrap();
            prop_assert!((back.lat - s.lat).abs() < 1e-6);
            prop_assert!((back.lon - s.lon).abs() < 1e-6);
        }

        #[test]
        fn small_steps_match_haversine(
            lat in -60.0f64..60.0, cog in 0.0f64..360.0, dist in 0.01f64..5.0,
        ) {
            let r = geo_consistency_check(gs(-80.0, lat), GeoAction::new(dist, cog, 1.0).unwrap()).unwrap();
            prop_assert!(r < 1e-2);
        }
    }
}
