//! KML 2.2 writer and a reader for the subset the writer produces.
//!
//! The writer is hand-rolled so output is stable byte for byte. KML
//! coordinates are `lon,lat,alt`; everything else in the crate is
//! latitude-first, so this is the one place the order flips.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::escape::escape;
use quick_xml::events::Event;
use quick_xml::Reader;

use super::{fmt_f64, line_of, FormatError};
use crate::geo::GeoPoint;

pub const KML_NAMESPACE: &str = "http://www.opengis.net/kml/2.2";

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(GeoPoint),
    LineString(Vec<GeoPoint>),
    /// Outer ring, stored open (closing vertex added on write).
    Polygon(Vec<GeoPoint>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placemark {
    pub name: String,
    pub style: Option<String>,
    pub geometry: Geometry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundOverlay {
    pub name: String,
    pub href: String,
    pub north: f64,
    pub south: f64,
    pub east: f64,
    pub west: f64,
    /// Degrees counter-clockwise.
    pub rotation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KmlFeature {
    Placemark(Placemark),
    GroundOverlay(GroundOverlay),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Style {
    /// `aabbggrr` hex, as KML wants it.
    pub line_color: Option<String>,
    pub line_width: Option<f64>,
    pub poly_color: Option<String>,
    pub icon_href: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KmlDoc {
    pub name: String,
    pub features: Vec<KmlFeature>,
    pub styles: BTreeMap<String, Style>,
}

impl KmlDoc {
    pub fn new(name: impl Into<String>) -> Self {
        KmlDoc { name: name.into(), ..Default::default() }
    }

    pub fn placemarks(&self) -> impl Iterator<Item = &Placemark> {
        self.features.iter().filter_map(|f| match f {
            KmlFeature::Placemark(p) => Some(p),
            _ => None,
        })
    }

    pub fn point_count(&self) -> usize {
        self.placemarks().filter(|p| matches!(p.geometry, Geometry::Point(_))).count()
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        for (i, f) in self.features.iter().enumerate() {
            let KmlFeature::Placemark(p) = f else { continue };
            let at = format!("features[{i}]");
            if let Some(s) = &p.style {
                if !self.styles.contains_key(s) {
                    return Err(FormatError::UnstyledReference { style: s.clone(), at });
                }
            }
            let pts: &[GeoPoint] = match &p.geometry {
                Geometry::Point(g) => std::slice::from_ref(g),
                Geometry::LineString(v) => {
                    if v.len() < 2 {
                        return Err(FormatError::malformed(at, "line string needs at least 2 points"));
                    }
                    v
                }
                Geometry::Polygon(v) => {
                    if v.len() < 3 {
                        return Err(FormatError::malformed(at, "polygon needs at least 3 vertices"));
                    }
                    v
                }
            };
            for g in pts {
                g.validate().map_err(|e| FormatError::coordinate(&at, e))?;
            }
        }
        Ok(())
    }
}

fn coord(out: &mut String, g: &GeoPoint) {
    let _ = write!(out, "{},{},{}", fmt_f64(g.longitude), fmt_f64(g.latitude), fmt_f64(g.elevation));
}

fn coords(pts: &[GeoPoint], close: bool) -> String {
    let mut out = String::new();
    let closing = if close && pts.first() != pts.last() { pts.first() } else { None };
    for (i, g) in pts.iter().chain(closing).enumerate() {
        if i > 0 {
            out.push(' ');
        }
        coord(&mut out, g);
    }
    out
}

pub fn emit_kml(doc: &KmlDoc) -> Result<String, FormatError> {
    doc.validate()?;
    let mut o = String::new();
    o.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(o, "<kml xmlns=\"{KML_NAMESPACE}\">");
    o.push_str("<Document>\n");
    let _ = writeln!(o, "  <name>{}</name>", escape(doc.name.as_str()));
    for (id, s) in &doc.styles {
        let _ = writeln!(o, "  <Style id=\"{}\">", escape(id.as_str()));
        if let Some(href) = &s.icon_href {
            let _ = writeln!(o, "    <IconStyle><Icon><href>{}</href></Icon></IconStyle>", escape(href.as_str()));
        }
        if s.line_color.is_some() || s.line_width.is_some() {
            o.push_str("    <LineStyle>");
            if let Some(c) = &s.line_color {
                let _ = write!(o, "<color>{}</color>", escape(c.as_str()));
            }
            if let Some(w) = s.line_width {
                let _ = write!(o, "<width>{}</width>", fmt_f64(w));
            }
            o.push_str("</LineStyle>\n");
        }
        if let Some(c) = &s.poly_color {
            let _ = writeln!(o, "    <PolyStyle><color>{}</color></PolyStyle>", escape(c.as_str()));
        }
        o.push_str("  </Style>\n");
    }
    for f in &doc.features {
        match f {
            KmlFeature::Placemark(p) => {
                o.push_str("  <Placemark>\n");
                let _ = writeln!(o, "    <name>{}</name>", escape(p.name.as_str()));
                if let Some(s) = &p.style {
                    let _ = writeln!(o, "    <styleUrl>#{}</styleUrl>", escape(s.as_str()));
                }
                match &p.geometry {
                    Geometry::Point(g) => {
                        let _ = writeln!(o, "    <Point><coordinates>{}</coordinates></Point>", coords(std::slice::from_ref(g), false));
                    }
                    Geometry::LineString(v) => {
                        let _ = writeln!(o, "    <LineString><coordinates>{}</coordinates></LineString>", coords(v, false));
                    }
                    Geometry::Polygon(v) => {
                        let _ = writeln!(
                            o,
                            "    <Polygon><outerBoundaryIs><LinearRing><coordinates>{}</coordinates></LinearRing></outerBoundaryIs></Polygon>",
                            coords(v, true)
                        );
                    }
                }
                o.push_str("  </Placemark>\n");
            }
            KmlFeature::GroundOverlay(g) => {
                o.push_str("  <GroundOverlay>\n");
                let _ = writeln!(o, "    <name>{}</name>", escape(g.name.as_str()));
                let _ = writeln!(o, "    <Icon><href>{}</href></Icon>", escape(g.href.as_str()));
                o.push_str("    <LatLonBox>\n");
                for (tag, v) in [("north", g.north), ("south", g.south), ("east", g.east), ("west", g.west), ("rotation", g.rotation)] {
                    let _ = writeln!(o, "      <{tag}>{}</{tag}>", fmt_f64(v));
                }
                o.push_str("    </LatLonBox>\n");
                o.push_str("  </GroundOverlay>\n");
            }
        }
    }
    o.push_str("</Document>\n</kml>\n");
    Ok(o)
}

fn parse_coords(text: &str, at: &str) -> Result<Vec<GeoPoint>, FormatError> {
    let mut out = Vec::new();
    for tuple in text.split_whitespace() {
        let parts: Vec<&str> = tuple.split(',').collect();
        if parts.len() < 2 || parts.len() > 3 {
            return Err(FormatError::malformed(at, format!("bad coordinate tuple `{tuple}`")));
        }
        let mut v = [0.0; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| FormatError::malformed(at, format!("bad coordinate tuple `{tuple}`")))?;
        }
        out.push(GeoPoint::with_elevation(v[1], v[0], v[2]).map_err(|e| FormatError::coordinate(at, e))?);
    }
    Ok(out)
}

#[derive(Default)]
struct Pending {
    name: String,
    style: Option<String>,
    geometry: Option<Geometry>,
    href: String,
    bounds: [f64; 5],
}

/// Reads Document name, Styles, Placemarks (Point, LineString, Polygon outer
/// ring) and GroundOverlays. Folders are flattened; other elements are skipped.
pub fn parse_kml(text: &str) -> Result<KmlDoc, FormatError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut doc = KmlDoc::default();
    let mut stack: Vec<String> = Vec::new();
    let mut style: Option<(String, Style)> = None;
    let mut feature: Option<Pending> = None;
    let mut saw_root = false;
    loop {
        let event = reader.read_event();
        let at = format!("line {}", line_of(text, reader.buffer_position() as usize));
        let event = event.map_err(|e| FormatError::malformed(&at, e.to_string()))?;
        match event {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                if stack.is_empty() {
                    if name != "kml" {
                        return Err(FormatError::malformed(at, format!("root element is `{name}`, expected `kml`")));
                    }
                    saw_root = true;
                }
                match name.as_str() {
                    "Style" => {
                        let id = e
                            .try_get_attribute("id")
                            .map_err(|err| FormatError::malformed(&at, err.to_string()))?
                            .map(|a| String::from_utf8_lossy(&a.value).into_owned())
                            .unwrap_or_default();
                        style = Some((id, Style::default()));
                    }
                    "Placemark" | "GroundOverlay" => feature = Some(Pending::default()),
                    _ => {}
                }
                stack.push(name);
            }
            Event::End(_) => {
                let name = stack.pop().unwrap_or_default();
                match name.as_str() {
                    "Style" => {
                        if let Some((id, s)) = style.take() {
                            doc.styles.insert(id, s);
                        }
                    }
                    "Placemark" => {
                        let p = feature.take().unwrap_or_default();
                        let geometry = p
                            .geometry
                            .ok_or_else(|| FormatError::malformed(&at, "placemark without geometry"))?;
                        doc.features.push(KmlFeature::Placemark(Placemark { name: p.name, style: p.style, geometry }));
                    }
                    "GroundOverlay" => {
                        let p = feature.take().unwrap_or_default();
                        let [north, south, east, west, rotation] = p.bounds;
                        doc.features.push(KmlFeature::GroundOverlay(GroundOverlay {
                            name: p.name,
                            href: p.href,
                            north,
                            south,
                            east,
                            west,
                            rotation,
                        }));
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                let value = t.unescape().map_err(|e| FormatError::malformed(&at, e.to_string()))?.into_owned();
                let leaf = stack.last().map(String::as_str).unwrap_or("");
                let parent = stack.len().checked_sub(2).map(|i| stack[i].as_str()).unwrap_or("");
                if let Some((_, s)) = style.as_mut() {
                    match (parent, leaf) {
                        ("LineStyle", "color") => s.line_color = Some(value),
                        ("LineStyle", "width") => {
                            s.line_width = Some(value.parse().map_err(|_| FormatError::malformed(&at, "bad width"))?)
                        }
                        ("PolyStyle", "color") => s.poly_color = Some(value),
                        ("Icon", "href") => s.icon_href = Some(value),
                        _ => {}
                    }
                } else if let Some(p) = feature.as_mut() {
                    let in_polygon = stack.iter().any(|s| s == "Polygon");
                    match (parent, leaf) {
                        ("Placemark" | "GroundOverlay", "name") => p.name = value,
                        ("Placemark", "styleUrl") => p.style = Some(value.trim_start_matches('#').to_string()),
                        ("Icon", "href") => p.href = value,
                        ("LatLonBox", b) => {
                            let slot = match b {
                                "north" => 0,
                                "south" => 1,
                                "east" => 2,
                                "west" => 3,
                                "rotation" => 4,
                                _ => continue,
                            };
                            p.bounds[slot] =
                                value.parse().map_err(|_| FormatError::malformed(&at, format!("bad {b}")))?;
                        }
                        (_, "coordinates") => {
                            let mut pts = parse_coords(&value, &at)?;
                            p.geometry = Some(match parent {
                                "Point" if pts.len() == 1 => Geometry::Point(pts[0]),
                                "Point" => return Err(FormatError::malformed(at, "point needs one coordinate")),
                                "LineString" => Geometry::LineString(pts),
                                "LinearRing" if in_polygon => {
                                    if pts.len() > 1 && pts.first() == pts.last() {
                                        pts.pop();
                                    }
                                    Geometry::Polygon(pts)
                                }
                                _ => continue,
                            });
                        }
                        _ => {}
                    }
                } else if (parent, leaf) == ("Document", "name") {
                    doc.name = value;
                }
            }
            Event::Empty(e) if stack.is_empty() => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                if name != "kml" {
                    return Err(FormatError::malformed(at, format!("root element is `{name}`, expected `kml`")));
                }
                saw_root = true;
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !saw_root {
        return Err(FormatError::malformed("line 1", "no `kml` root element"));
    }
    if !stack.is_empty() {
        return Err(FormatError::malformed(format!("line {}", line_of(text, text.len())), "unclosed elements"));
    }
    Ok(doc)
}
