//! Datum YAML.
//!
//! ```yaml
//! datum_latitude: 53.268642
//! datum_longitude: -0.524509
//! fence:
//!   - [53.2680, -0.5250]
//!   - [53.2680, -0.5240]
//!   - [53.2690, -0.5240]
//! ```

use serde_yaml::{Mapping, Value};

use super::yaml::{self, At};
use super::FormatError;
use crate::geo::{Datum, GeoPoint, MapSize};

const KNOWN: &[&str] = &["datum_latitude", "datum_longitude", "datum_elevation", "map_size", "fence"];

pub fn parse_datum(text: &str) -> Result<Datum, FormatError> {
    let root = yaml::load(text)?;
    parse_datum_value(&At::root(&root))
}

pub(crate) fn parse_datum_value(doc: &At<'_>) -> Result<Datum, FormatError> {
    doc.mapping()?;
    let lat = doc.req("datum_latitude")?.f64()?;
    let lon = doc.req("datum_longitude")?.f64()?;
    let elevation = match doc.get_present("datum_elevation")? {
        Some(e) => e.f64()?,
        None => 0.0,
    };
    let origin = GeoPoint::with_elevation(lat, lon, elevation)
        .map_err(|e| FormatError::coordinate(doc.path(), e))?;

    let map_size = match doc.get_present("map_size")? {
        Some(m) => {
            let dims = m.seq()?;
            if dims.len() != 2 {
                return Err(FormatError::malformed(m.path(), "map_size must be [width, height]"));
            }
            Some(MapSize { width: dims[0].f64()?, height: dims[1].f64()? })
        }
        None => None,
    };

    let mut fence = Vec::new();
    if let Some(f) = doc.get_present("fence")? {
        for v in f.seq()? {
            let c = v.seq()?;
            if c.len() < 2 || c.len() > 3 {
                return Err(FormatError::malformed(v.path(), "fence vertex must be [lat, lon] or [lat, lon, elevation]"));
            }
            let elev = if c.len() == 3 { c[2].f64()? } else { 0.0 };
            let p = GeoPoint::with_elevation(c[0].f64()?, c[1].f64()?, elev)
                .map_err(|e| FormatError::coordinate(v.path(), e))?;
            fence.push(p);
        }
        let at = f.path().to_string();
        let datum = Datum::new(origin).with_fence(fence.clone());
        datum.validate().map_err(|e| FormatError::malformed(at, e.to_string()))?;
    }

    Ok(Datum { origin, fence, map_size, extras: doc.extras(KNOWN)? })
}

pub(crate) fn datum_value(d: &Datum) -> Value {
    let mut m = Mapping::new();
    m.insert(yaml::key("datum_latitude"), yaml::num(d.origin.latitude));
    m.insert(yaml::key("datum_longitude"), yaml::num(d.origin.longitude));
    if d.origin.elevation != 0.0 {
        m.insert(yaml::key("datum_elevation"), yaml::num(d.origin.elevation));
    }
    if let Some(size) = d.map_size {
        m.insert(
            yaml::key("map_size"),
            Value::Sequence(vec![yaml::num(size.width), yaml::num(size.height)]),
        );
    }
    if !d.fence.is_empty() {
        let verts = d
            .fence
            .iter()
            .map(|p| {
                let mut v = vec![yaml::num(p.latitude), yaml::num(p.longitude)];
                if p.elevation != 0.0 {
                    v.push(yaml::num(p.elevation));
                }
                Value::Sequence(v)
            })
            .collect();
        m.insert(yaml::key("fence"), Value::Sequence(verts));
    }
    for (k, v) in &d.extras {
        m.insert(k.clone(), v.clone());
    }
    Value::Mapping(m)
}

pub fn emit_datum(d: &Datum) -> String {
    yaml::dump(&datum_value(d), "datum")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let d = parse_datum("datum_latitude: 0.0\ndatum_longitude: 0.0").unwrap();
        assert_eq!(d.origin, GeoPoint::default());
        assert!(d.fence.is_empty());
        assert!(d.extras.is_empty());
    }

    #[test]
    fn missing_longitude() {
        let err = parse_datum("datum_latitude: 0.0\n").unwrap_err();
        assert_eq!(
            err,
            FormatError::MissingField { key: "datum_longitude".into(), at: "document".into() }
        );
    }

    #[test]
    fn out_of_range_origin() {
        let err = parse_datum("datum_latitude: 95.0\ndatum_longitude: 0.0").unwrap_err();
        assert!(matches!(err, FormatError::InvalidCoordinate { .. }));
    }

    #[test]
    fn fence_order_survives_round_trip() {
        let text = "datum_latitude: 53.0\ndatum_longitude: -0.5\nfence:\n  - [53.0, -0.5]\n  - [53.0, -0.4]\n  - [53.1, -0.4]\n  - [53.1, -0.5]\n";
        let d = parse_datum(text).unwrap();
        assert_eq!(d.fence.len(), 4);
        let again = parse_datum(&emit_datum(&d)).unwrap();
        assert_eq!(again, d);
        let lons: Vec<f64> = again.fence.iter().map(|p| p.longitude).collect();
        assert_eq!(lons, vec![-0.5, -0.4, -0.4, -0.5]);
    }

    #[test]
    fn extras_are_preserved() {
        let text = "datum_latitude: 1.5\ndatum_longitude: 2.5\nmapviz_origin:\n  name: farm\n  xyz: [1, 2, 3]\nnavsat: {frequency: 10}\n";
        let d = parse_datum(text).unwrap();
        assert_eq!(d.extras.len(), 2);
        let again = parse_datum(&emit_datum(&d)).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn short_fence_is_rejected_with_path() {
        let text = "datum_latitude: 0\ndatum_longitude: 0\nfence: [[0, 0], [0, 1]]";
        match parse_datum(text).unwrap_err() {
            FormatError::MalformedDocument { at, .. } => assert_eq!(at, "fence"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_line() {
        let err = parse_datum("datum_latitude: [1,\n  datum_longitude: 0").unwrap_err();
        match err {
            FormatError::MalformedDocument { at, .. } => assert!(at.starts_with("line ")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
