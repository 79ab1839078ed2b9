//! Format identifiers and content sniffing.

use std::fmt;
use std::str::FromStr;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde_yaml::Value;
use thiserror::Error;

use crate::formats::pgm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FormatId {
    Datum,
    OccGrid,
    TopoMap,
    NavGraph,
    Osm,
    OpenRmf,
    Kml,
    TileGrid,
}

impl FormatId {
    pub const ALL: [FormatId; 8] = [
        FormatId::Datum,
        FormatId::OccGrid,
        FormatId::TopoMap,
        FormatId::NavGraph,
        FormatId::Osm,
        FormatId::OpenRmf,
        FormatId::Kml,
        FormatId::TileGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormatId::Datum => "datum",
            FormatId::OccGrid => "occgrid",
            FormatId::TopoMap => "topomap",
            FormatId::NavGraph => "navgraph",
            FormatId::Osm => "osm",
            FormatId::OpenRmf => "openrmf",
            FormatId::Kml => "kml",
            FormatId::TileGrid => "tilegrid",
        }
    }

    /// Bit used by the planner's format sets.
    pub(crate) fn bit(self) -> u16 {
        1 << (self as u16)
    }

    /// Usual file extension for a single-file artifact.
    pub fn extension(self) -> &'static str {
        match self {
            FormatId::Osm => "osm",
            FormatId::Kml => "kml",
            FormatId::TileGrid => "pgm",
            _ => "yaml",
        }
    }
}

impl fmt::Display for FormatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DetectError {
    #[error("unknown format name `{0}`")]
    UnknownName(String),
    #[error("unknown format: {0}")]
    UnknownFormat(String),
    #[error("ambiguous format: content matches {0}")]
    Ambiguous(String),
}

impl FromStr for FormatId {
    type Err = DetectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FormatId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| DetectError::UnknownName(s.to_string()))
    }
}

fn xml_root(text: &str) -> Option<String> {
    let mut reader = Reader::from_str(text);
    loop {
        match reader.read_event().ok()? {
            Event::Start(e) | Event::Empty(e) => {
                return Some(String::from_utf8_lossy(e.local_name().as_ref()).into_owned())
            }
            Event::Eof => return None,
            _ => {}
        }
    }
}

fn has(v: &Value, key: &str) -> bool {
    v.get(key).is_some()
}

fn yaml_probes(doc: &Value) -> Vec<FormatId> {
    let mut hits = Vec::new();
    if !doc.is_mapping() {
        return hits;
    }
    if has(doc, "datum_latitude") {
        hits.push(FormatId::Datum);
    }
    if has(doc, "image") && has(doc, "resolution") {
        hits.push(FormatId::OccGrid);
    }
    let navgraph_keys = has(doc, "connections") || has(doc, "graph-name") || has(doc, "default-properties");
    if let Some(Value::Sequence(nodes)) = doc.get("nodes") {
        let per_node_edges = nodes
            .iter()
            .all(|n| n.get("node").map(|inner| has(inner, "edges")).unwrap_or(false));
        if per_node_edges && (!nodes.is_empty() || !navgraph_keys) {
            hits.push(FormatId::TopoMap);
        }
    }
    if navgraph_keys {
        hits.push(FormatId::NavGraph);
    }
    if let Some(Value::Mapping(levels)) = doc.get("levels") {
        if levels.values().any(|l| has(l, "lanes")) {
            hits.push(FormatId::OpenRmf);
        }
    }
    hits
}

/// Format suggested by a file name alone; used only to break ties.
fn hinted(hint: &str) -> Option<FormatId> {
    let lower = hint.to_ascii_lowercase();
    let file = lower.rsplit(['/', '\\']).next().unwrap_or(&lower);
    let ext = file.rsplit_once('.').map(|(_, e)| e).unwrap_or("");
    match ext {
        "osm" => return Some(FormatId::Osm),
        "kml" => return Some(FormatId::Kml),
        "pgm" | "png" => return Some(FormatId::OccGrid),
        _ => {}
    }
    let table = [
        ("datum", FormatId::Datum),
        ("tmap", FormatId::TopoMap),
        ("topo", FormatId::TopoMap),
        ("navgraph", FormatId::NavGraph),
        ("building", FormatId::OpenRmf),
        ("rmf", FormatId::OpenRmf),
        ("map", FormatId::OccGrid),
    ];
    table.into_iter().find(|(k, _)| file.contains(k)).map(|(_, f)| f)
}

/// Classifies file content by structural probes. The hint only resolves
/// content that matches more than one probe; it never rescues content that
/// matches none.
pub fn detect_format(bytes: &[u8], filename_hint: Option<&str>) -> Result<FormatId, DetectError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(DetectError::UnknownFormat("empty input".into()));
    }
    if pgm::is_png(bytes) || pgm::is_pgm(bytes) {
        return Ok(FormatId::OccGrid);
    }
    let text = std::str::from_utf8(bytes)
        .map_err(|_| DetectError::UnknownFormat("binary content that is not a PGM or PNG image".into()))?;
    let trimmed = text.trim_start_matches('\u{feff}').trim_start();
    let hits = if trimmed.starts_with('<') {
        match xml_root(trimmed).as_deref() {
            Some("osm") => vec![FormatId::Osm],
            Some("kml") => vec![FormatId::Kml],
            Some(other) => return Err(DetectError::UnknownFormat(format!("XML root element `{other}`"))),
            None => return Err(DetectError::UnknownFormat("XML without a root element".into())),
        }
    } else {
        match serde_yaml::from_str::<Value>(text) {
            Ok(doc) => yaml_probes(&doc),
            Err(_) => Vec::new(),
        }
    };
    match hits.as_slice() {
        [one] => Ok(*one),
        [] => Err(DetectError::UnknownFormat("no structural probe matched".into())),
        many => {
            if let Some(h) = filename_hint.and_then(hinted).filter(|h| many.contains(h)) {
                return Ok(h);
            }
            let names: Vec<&str> = many.iter().map(|f| f.name()).collect();
            Err(DetectError::Ambiguous(names.join(", ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for f in FormatId::ALL {
            assert_eq!(f.name().parse::<FormatId>().unwrap(), f);
        }
        assert!("shp".parse::<FormatId>().is_err());
    }

    #[test]
    fn minimal_datum() {
        let d = detect_format(b"datum_latitude: 0.0\ndatum_longitude: 0.0\n", None).unwrap();
        assert_eq!(d, FormatId::Datum);
    }

    #[test]
    fn osm_root() {
        let d = detect_format(b"<?xml version=\"1.0\"?>\n<osm version=\"0.6\"></osm>", None).unwrap();
        assert_eq!(d, FormatId::Osm);
    }

    #[test]
    fn kml_root() {
        let d = detect_format(b"<kml xmlns=\"http://www.opengis.net/kml/2.2\"><Document/></kml>", None);
        assert_eq!(d.unwrap(), FormatId::Kml);
    }

    #[test]
    fn empty_yaml_is_unknown() {
        assert!(matches!(detect_format(b"---\n", None), Err(DetectError::UnknownFormat(_))));
        assert!(matches!(detect_format(b"", None), Err(DetectError::UnknownFormat(_))));
    }

    #[test]
    fn yaml_probes_each_format() {
        let cases: [(&str, FormatId); 4] = [
            ("image: m.pgm\nresolution: 0.05\norigin: [0, 0, 0]\n", FormatId::OccGrid),
            ("name: t\nnodes:\n  - node: {name: a, edges: []}\n", FormatId::TopoMap),
            ("connections: []\nnodes: []\n", FormatId::NavGraph),
            ("levels:\n  L1: {vertices: [], lanes: []}\n", FormatId::OpenRmf),
        ];
        for (text, want) in cases {
            assert_eq!(detect_format(text.as_bytes(), None).unwrap(), want, "{text}");
        }
    }

    #[test]
    fn hint_breaks_ties_only() {
        let both = b"datum_latitude: 1\nimage: m.pgm\nresolution: 1\n";
        assert!(matches!(detect_format(both, None), Err(DetectError::Ambiguous(_))));
        assert_eq!(detect_format(both, Some("site/datum.yaml")).unwrap(), FormatId::Datum);
        // a hint cannot promote content that matches nothing
        assert!(detect_format(b"foo: 1\n", Some("datum.yaml")).is_err());
    }

    #[test]
    fn images_are_occupancy() {
        assert_eq!(detect_format(b"P5\n1 1\n255\n\x00", None).unwrap(), FormatId::OccGrid);
    }
}
