//! Geographic anchoring of the local metric frame.
//!
//! The local frame is east-north-up: `x` points east, `y` points north and `z`
//! is up, all in meters relative to the datum origin. Points are projected with
//! an equirectangular tangent plane about the origin, which is exactly
//! invertible and accurate to well under a part in a thousand at farm and
//! campus scale.

use std::f64::consts::PI;

use serde_yaml::Mapping;
use thiserror::Error;

/// WGS84 semi-major axis in meters, used as the sphere radius of the projection.
pub const EARTH_RADIUS: f64 = 6_378_137.0;

/// Comment line written at the top of every emitted text file.
pub const FRAME_NOTE: &str = "local frame: east-north-up, x = east, y = north, meters from datum origin";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("projection domain: {0}")]
    ProjectionDomain(String),
    #[error("invalid datum: {0}")]
    InvalidDatum(String),
}

/// A WGS84 position in decimal degrees, elevation in meters above the ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
    pub elevation: f64,
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self, GeoError> {
        Self::with_elevation(latitude, longitude, 0.0)
    }

    pub fn with_elevation(latitude: f64, longitude: f64, elevation: f64) -> Result<Self, GeoError> {
        let p = GeoPoint { latitude, longitude, elevation };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !self.latitude.is_finite() || !(-90.0..=90.0).contains(&self.latitude) {
            return Err(GeoError::InvalidCoordinate(format!(
                "latitude {} outside [-90, 90]",
                self.latitude
            )));
        }
        if !self.longitude.is_finite() || !(-180.0..=180.0).contains(&self.longitude) {
            return Err(GeoError::InvalidCoordinate(format!(
                "longitude {} outside [-180, 180]",
                self.longitude
            )));
        }
        if !self.elevation.is_finite() {
            return Err(GeoError::InvalidCoordinate(format!(
                "elevation {} is not finite",
                self.elevation
            )));
        }
        Ok(())
    }
}

/// A position in the local metric frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl LocalPoint {
    pub const ORIGIN: LocalPoint = LocalPoint { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        LocalPoint { x, y, z }
    }

    pub fn xy(x: f64, y: f64) -> Self {
        LocalPoint { x, y, z: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Width and height of the mapped area in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSize {
    pub width: f64,
    pub height: f64,
}

/// Georeference binding the local frame to WGS84.
///
/// `extras` carries keys this crate does not interpret (mapviz origins,
/// navsat transform points, ...) so they survive a parse/emit cycle.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Datum {
    pub origin: GeoPoint,
    pub fence: Vec<GeoPoint>,
    pub map_size: Option<MapSize>,
    pub extras: Mapping,
}

impl Datum {
    pub fn new(origin: GeoPoint) -> Self {
        Datum { origin, ..Default::default() }
    }

    pub fn with_fence(mut self, fence: Vec<GeoPoint>) -> Self {
        self.fence = fence;
        self
    }

    pub fn has_fence(&self) -> bool {
        !self.fence.is_empty()
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        self.origin.validate()?;
        if self.fence.is_empty() {
            return Ok(());
        }
        if self.fence.len() < 3 {
            return Err(GeoError::InvalidDatum(format!(
                "fence has {} vertices, at least 3 required",
                self.fence.len()
            )));
        }
        for (i, p) in self.fence.iter().enumerate() {
            p.validate()?;
            let next = &self.fence[(i + 1) % self.fence.len()];
            if p.latitude == next.latitude && p.longitude == next.longitude {
                return Err(GeoError::InvalidDatum(format!(
                    "fence vertices {} and {} are identical",
                    i,
                    (i + 1) % self.fence.len()
                )));
            }
        }
        Ok(())
    }

    fn cos_lat0(&self) -> f64 {
        self.origin.latitude.to_radians().cos()
    }
}

fn wrap_degrees(d: f64) -> f64 {
    // in-range values pass through untouched to avoid rounding noise
    if (-180.0..=180.0).contains(&d) {
        return d;
    }
    let w = (d + 180.0).rem_euclid(360.0) - 180.0;
    // keep +180 rather than folding it to -180
    if w == -180.0 && d > 0.0 {
        180.0
    } else {
        w
    }
}

/// Projects a geographic point into the datum's local frame.
pub fn geo_to_local(datum: &Datum, p: &GeoPoint) -> Result<LocalPoint, GeoError> {
    datum.origin.validate()?;
    p.validate()?;
    let o = &datum.origin;
    let dlat = p.latitude - o.latitude;
    let dlon = wrap_degrees(p.longitude - o.longitude);
    Ok(LocalPoint {
        x: dlon * (PI / 180.0) * EARTH_RADIUS * datum.cos_lat0(),
        y: dlat * (PI / 180.0) * EARTH_RADIUS,
        z: p.elevation - o.elevation,
    })
}

/// Inverse of [`geo_to_local`].
pub fn local_to_geo(datum: &Datum, p: &LocalPoint) -> Result<GeoPoint, GeoError> {
    datum.origin.validate()?;
    if !p.is_finite() {
        return Err(GeoError::InvalidCoordinate(format!("local point {p:?} is not finite")));
    }
    let o = &datum.origin;
    let cos_lat0 = datum.cos_lat0();
    if cos_lat0.abs() < 1e-12 {
        return Err(GeoError::ProjectionDomain(
            "datum origin at a pole has no east axis".to_string(),
        ));
    }
    let latitude = o.latitude + (p.y / EARTH_RADIUS) * (180.0 / PI);
    if latitude.abs() > 90.0 {
        return Err(GeoError::ProjectionDomain(format!(
            "latitude {latitude} outside [-90, 90]"
        )));
    }
    let longitude = wrap_degrees(o.longitude + (p.x / (EARTH_RADIUS * cos_lat0)) * (180.0 / PI));
    Ok(GeoPoint {
        latitude,
        longitude,
        elevation: o.elevation + p.z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn datum(lat: f64, lon: f64) -> Datum {
        Datum::new(GeoPoint::new(lat, lon).unwrap())
    }

    #[test]
    fn origin_maps_to_zero() {
        let d = datum(53.26, -0.52);
        let l = geo_to_local(&d, &d.origin).unwrap();
        assert_eq!(l, LocalPoint::ORIGIN);
        assert_eq!(local_to_geo(&d, &LocalPoint::ORIGIN).unwrap(), d.origin);
    }

    #[test]
    fn north_offset_at_equator() {
        // 0.001 deg * pi/180 * 6378137
        let l = geo_to_local(&datum(0.0, 0.0), &GeoPoint::new(0.001, 0.0).unwrap()).unwrap();
        assert!(l.x.abs() < 1e-12);
        assert!((l.y - 111.319_490_793_273_57).abs() < 1e-3);
    }

    #[test]
    fn east_offset_scaled_by_latitude() {
        let l = geo_to_local(&datum(60.0, 0.0), &GeoPoint::new(60.0, 0.001).unwrap()).unwrap();
        assert!((l.x - 55.659_745_396_636_79).abs() < 1e-3);
        assert!(l.y.abs() < 1e-12);
    }

    #[test]
    fn inverse_of_north_offset() {
        let g = local_to_geo(&datum(0.0, 0.0), &LocalPoint::xy(0.0, 111.3195)).unwrap();
        assert!((g.latitude - 0.001).abs() < 1e-9);
        assert!(g.longitude.abs() < 1e-12);
    }

    #[test]
    fn out_of_range_point_is_rejected() {
        let d = datum(0.0, 0.0);
        let bad = GeoPoint { latitude: 91.0, longitude: 0.0, elevation: 0.0 };
        assert!(matches!(geo_to_local(&d, &bad), Err(GeoError::InvalidCoordinate(_))));
        let bad = GeoPoint { latitude: 0.0, longitude: -180.5, elevation: 0.0 };
        assert!(matches!(geo_to_local(&d, &bad), Err(GeoError::InvalidCoordinate(_))));
    }

    #[test]
    fn inverse_beyond_pole_is_domain_error() {
        let d = datum(89.99, 0.0);
        let r = local_to_geo(&d, &LocalPoint::xy(0.0, 10_000.0));
        assert!(matches!(r, Err(GeoError::ProjectionDomain(_))));
    }

    #[test]
    fn antimeridian_wraps() {
        let d = datum(0.0, 179.9999);
        let p = GeoPoint::new(0.0, -179.9999).unwrap();
        let l = geo_to_local(&d, &p).unwrap();
        assert!(l.x > 0.0 && l.x < 30.0);
        let back = local_to_geo(&d, &l).unwrap();
        assert!((back.longitude - p.longitude).abs() < 1e-9);
    }

    #[test]
    fn elevation_is_additive() {
        let mut d = datum(10.0, 10.0);
        d.origin.elevation = 12.0;
        let p = GeoPoint::with_elevation(10.0, 10.0, 15.5).unwrap();
        assert_eq!(geo_to_local(&d, &p).unwrap().z, 3.5);
    }

    #[test]
    fn fence_validation() {
        let p = |a, b| GeoPoint::new(a, b).unwrap();
        let ok = datum(0.0, 0.0).with_fence(vec![p(0.0, 0.0), p(0.0, 1.0), p(1.0, 1.0)]);
        assert!(ok.validate().is_ok());
        let short = datum(0.0, 0.0).with_fence(vec![p(0.0, 0.0), p(0.0, 1.0)]);
        assert!(short.validate().is_err());
        let repeated =
            datum(0.0, 0.0).with_fence(vec![p(0.0, 0.0), p(0.0, 1.0), p(1.0, 1.0), p(0.0, 0.0)]);
        assert!(repeated.validate().is_err());
    }
}
