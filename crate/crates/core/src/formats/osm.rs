//! OpenStreetMap XML (API 0.6).

use indexmap::IndexMap;
use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{fmt_f64, line_of, FormatError};
use crate::geo::GeoPoint;
use crate::Warning;

pub type Tag = (String, String);

#[derive(Debug, Clone, PartialEq)]
pub struct OsmNode {
    pub position: GeoPoint,
    pub tags: Vec<Tag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OsmWay {
    pub refs: Vec<String>,
    pub tags: Vec<Tag>,
}

impl OsmWay {
    pub fn tag(&self, key: &str) -> Option<&str> {
        tag_value(&self.tags, key)
    }
}

pub fn tag_value<'a>(tags: &'a [Tag], key: &str) -> Option<&'a str> {
    tags.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OsmMember {
    pub kind: String,
    pub reference: String,
    pub role: String,
}

/// Kept for re-emission only.
#[derive(Debug, Clone, PartialEq)]
pub struct OsmRelation {
    pub members: Vec<OsmMember>,
    pub tags: Vec<Tag>,
}

/// Ids are opaque text; maps preserve document order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OsmGraph {
    pub nodes: IndexMap<String, OsmNode>,
    pub ways: IndexMap<String, OsmWay>,
    pub relations: IndexMap<String, OsmRelation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OsmMode {
    /// Reject ways with unresolvable or too few node references.
    #[default]
    Strict,
    /// Drop such ways and report a warning instead.
    Lenient,
}

enum Open {
    None,
    Node(String),
    Way(String),
    Relation(String),
}

fn attrs(e: &BytesStart<'_>, at: &str) -> Result<IndexMap<String, String>, FormatError> {
    let mut out = IndexMap::new();
    for a in e.attributes() {
        let a = a.map_err(|err| FormatError::malformed(at, err.to_string()))?;
        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
        let value = a
            .unescape_value()
            .map_err(|err| FormatError::malformed(at, err.to_string()))?
            .into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

fn required<'a>(a: &'a IndexMap<String, String>, key: &str, at: &str) -> Result<&'a str, FormatError> {
    a.get(key).map(String::as_str).ok_or_else(|| FormatError::missing(at, key))
}

pub fn parse_osm(text: &str, mode: OsmMode) -> Result<(OsmGraph, Vec<Warning>), FormatError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut graph = OsmGraph::default();
    let mut way_lines: IndexMap<String, String> = IndexMap::new();
    let mut open = Open::None;
    let mut saw_root = false;
    loop {
        let event = reader.read_event();
        // position just past the element's start tag
        let at = format!("line {}", line_of(text, reader.buffer_position() as usize));
        let event = event.map_err(|e| FormatError::malformed(&at, e.to_string()))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(event, Event::Empty(_));
                let name = e.name();
                let name = name.as_ref();
                if !saw_root {
                    if name != b"osm" {
                        return Err(FormatError::malformed(at, "root element is not <osm>"));
                    }
                    saw_root = true;
                    continue;
                }
                match name {
                    b"node" => {
                        let a = attrs(e, &at)?;
                        let id = required(&a, "id", &at)?.to_string();
                        let lat: f64 = required(&a, "lat", &at)?
                            .parse()
                            .map_err(|_| FormatError::malformed(&at, "lat is not a number"))?;
                        let lon: f64 = required(&a, "lon", &at)?
                            .parse()
                            .map_err(|_| FormatError::malformed(&at, "lon is not a number"))?;
                        let position = GeoPoint::new(lat, lon).map_err(|err| FormatError::coordinate(&at, err))?;
                        if graph.nodes.insert(id.clone(), OsmNode { position, tags: Vec::new() }).is_some() {
                            return Err(FormatError::malformed(at, format!("duplicate node id {id}")));
                        }
                        if !empty {
                            open = Open::Node(id);
                        }
                    }
                    b"way" => {
                        let a = attrs(e, &at)?;
                        let id = required(&a, "id", &at)?.to_string();
                        if graph.ways.insert(id.clone(), OsmWay { refs: Vec::new(), tags: Vec::new() }).is_some() {
                            return Err(FormatError::malformed(at, format!("duplicate way id {id}")));
                        }
                        way_lines.insert(id.clone(), at.clone());
                        if !empty {
                            open = Open::Way(id);
                        }
                    }
                    b"relation" => {
                        let a = attrs(e, &at)?;
                        let id = required(&a, "id", &at)?.to_string();
                        let rel = OsmRelation { members: Vec::new(), tags: Vec::new() };
                        if graph.relations.insert(id.clone(), rel).is_some() {
                            return Err(FormatError::malformed(at, format!("duplicate relation id {id}")));
                        }
                        if !empty {
                            open = Open::Relation(id);
                        }
                    }
                    b"tag" => {
                        let a = attrs(e, &at)?;
                        let tag = (required(&a, "k", &at)?.to_string(), required(&a, "v", &at)?.to_string());
                        match &open {
                            Open::Node(id) => graph.nodes[id].tags.push(tag),
                            Open::Way(id) => graph.ways[id].tags.push(tag),
                            Open::Relation(id) => graph.relations[id].tags.push(tag),
                            Open::None => {}
                        }
                    }
                    b"nd" => {
                        let a = attrs(e, &at)?;
                        let r = required(&a, "ref", &at)?.to_string();
                        match &open {
                            Open::Way(id) => graph.ways[id].refs.push(r),
                            _ => return Err(FormatError::malformed(at, "<nd> outside of a <way>")),
                        }
                    }
                    b"member" => {
                        let a = attrs(e, &at)?;
                        let m = OsmMember {
                            kind: required(&a, "type", &at)?.to_string(),
                            reference: required(&a, "ref", &at)?.to_string(),
                            role: a.get("role").cloned().unwrap_or_default(),
                        };
                        match &open {
                            Open::Relation(id) => graph.relations[id].members.push(m),
                            _ => return Err(FormatError::malformed(at, "<member> outside of a <relation>")),
                        }
                    }
                    _ => {}
                }
            }
            Event::End(ref e) => {
                if matches!(e.name().as_ref(), b"node" | b"way" | b"relation") {
                    open = Open::None;
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !saw_root {
        return Err(FormatError::malformed("document", "no <osm> root element"));
    }

    let mut warnings = Vec::new();
    let mut dropped = Vec::new();
    for (id, way) in &graph.ways {
        let at = way_lines.get(id).cloned().unwrap_or_default();
        let problem = if let Some(r) = way.refs.iter().find(|r| !graph.nodes.contains_key(*r)) {
            Some(FormatError::DanglingNodeRef { way: id.clone(), node_ref: r.clone(), at })
        } else if way.refs.len() < 2 {
            Some(FormatError::malformed(at, format!("way {id} has fewer than 2 node references")))
        } else {
            None
        };
        if let Some(err) = problem {
            match mode {
                OsmMode::Strict => return Err(err),
                OsmMode::Lenient => {
                    warnings.push(Warning::new(format!("way {id}"), format!("dropped: {err}")));
                    dropped.push(id.clone());
                }
            }
        }
    }
    for id in dropped {
        graph.ways.shift_remove(&id);
    }
    Ok((graph, warnings))
}

fn write_tags(out: &mut String, tags: &[Tag]) {
    for (k, v) in tags {
        out.push_str(&format!("    <tag k=\"{}\" v=\"{}\"/>\n", escape(k.as_str()), escape(v.as_str())));
    }
}

pub fn emit_osm(graph: &OsmGraph) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\" generator=\"mapforge\">\n");
    for (id, n) in &graph.nodes {
        let head = format!(
            "  <node id=\"{}\" lat=\"{}\" lon=\"{}\"",
            escape(id.as_str()),
            fmt_f64(n.position.latitude),
            fmt_f64(n.position.longitude)
        );
        if n.tags.is_empty() {
            out.push_str(&head);
            out.push_str("/>\n");
        } else {
            out.push_str(&head);
            out.push_str(">\n");
            write_tags(&mut out, &n.tags);
            out.push_str("  </node>\n");
        }
    }
    for (id, w) in &graph.ways {
        out.push_str(&format!("  <way id=\"{}\">\n", escape(id.as_str())));
        for r in &w.refs {
            out.push_str(&format!("    <nd ref=\"{}\"/>\n", escape(r.as_str())));
        }
        write_tags(&mut out, &w.tags);
        out.push_str("  </way>\n");
    }
    for (id, rel) in &graph.relations {
        out.push_str(&format!("  <relation id=\"{}\">\n", escape(id.as_str())));
        for m in &rel.members {
            out.push_str(&format!(
                "    <member type=\"{}\" ref=\"{}\" role=\"{}\"/>\n",
                escape(m.kind.as_str()),
                escape(m.reference.as_str()),
                escape(m.role.as_str())
            ));
        }
        write_tags(&mut out, &rel.tags);
        out.push_str("  </relation>\n");
    }
    out.push_str("</osm>\n");
    out
}
