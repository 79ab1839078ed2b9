//! NavGraph YAML: default properties, nodes, then connections.
//!
//! ```yaml
//! graph-name: warehouse
//! default-properties:
//!   - travel_tolerance: 0.5
//!   - target_tolerance: 0.3
//! nodes:
//!   - name: dock
//!     pos: [1.0, 2.0]
//!     properties:
//!       - orientation: 1.57
//! connections:
//!   - [dock, aisle-1]
//! ```

use std::collections::HashSet;

use indexmap::IndexMap;
use serde_yaml::{Mapping, Value};

use super::yaml::{self, At};
use super::FormatError;
use crate::Warning;

#[derive(Debug, Clone, PartialEq)]
pub struct NavNode {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub properties: IndexMap<String, String>,
}

impl NavNode {
    pub fn new(name: impl Into<String>, x: f64, y: f64) -> Self {
        NavNode { name: name.into(), x, y, properties: IndexMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavGraph {
    pub travel_tolerance: f64,
    pub target_tolerance: f64,
    pub nodes: Vec<NavNode>,
    /// Undirected links, each stored once in first-seen orientation.
    pub connections: Vec<(String, String)>,
    /// Default properties other than the two tolerances.
    pub default_extras: IndexMap<String, String>,
    pub extras: Mapping,
}

impl NavGraph {
    pub fn new(travel_tolerance: f64, target_tolerance: f64) -> Self {
        NavGraph {
            travel_tolerance,
            target_tolerance,
            nodes: Vec::new(),
            connections: Vec::new(),
            default_extras: IndexMap::new(),
            extras: Mapping::new(),
        }
    }

    pub fn node(&self, name: &str) -> Option<&NavNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        if !(self.travel_tolerance > 0.0 && self.target_tolerance > 0.0) {
            return Err(FormatError::malformed("default-properties", "tolerances must be positive"));
        }
        let mut names = HashSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !names.insert(n.name.as_str()) {
                return Err(FormatError::DuplicateNode { name: n.name.clone(), at: format!("nodes[{i}]") });
            }
        }
        let mut pairs = HashSet::new();
        for (i, (a, b)) in self.connections.iter().enumerate() {
            let at = format!("connections[{i}]");
            for end in [a, b] {
                if !names.contains(end.as_str()) {
                    return Err(FormatError::UnknownNodeInConnection { name: end.clone(), at });
                }
            }
            if a == b {
                return Err(FormatError::SelfConnection { name: a.clone(), at });
            }
            if !pairs.insert(sorted_pair(a, b)) {
                return Err(FormatError::malformed(at, format!("duplicate connection {a} - {b}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn sorted_pair<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Reads a list of single-key mappings (or bare flags) into an ordered map.
fn property_list(at: &At<'_>) -> Result<IndexMap<String, String>, FormatError> {
    let mut out = IndexMap::new();
    match at.value {
        Value::Mapping(_) => {
            for (k, v) in at.mapping()? {
                let k = yaml::scalar_text(k).ok_or_else(|| FormatError::malformed(at.path(), "non-scalar key"))?;
                let v = yaml::scalar_text(v)
                    .ok_or_else(|| FormatError::malformed(format!("{}.{k}", at.path()), "expected a scalar"))?;
                out.insert(k, v);
            }
        }
        _ => {
            for item in at.seq()? {
                match item.value {
                    Value::Mapping(m) => {
                        for (k, v) in m {
                            let k = yaml::scalar_text(k)
                                .ok_or_else(|| FormatError::malformed(item.path(), "non-scalar key"))?;
                            let v = yaml::scalar_text(v)
                                .ok_or_else(|| FormatError::malformed(item.path(), "expected a scalar"))?;
                            out.insert(k, v);
                        }
                    }
                    _ => {
                        out.insert(item.text()?, "True".to_string());
                    }
                }
            }
        }
    }
    Ok(out)
}

fn property_values(props: &IndexMap<String, String>) -> Value {
    Value::Sequence(
        props
            .iter()
            .map(|(k, v)| {
                let mut m = Mapping::new();
                let value = if let Ok(i) = v.parse::<i64>() {
                    Value::Number(i.into())
                } else {
                    match v.parse::<f64>() {
                        Ok(f) if f.is_finite() && serde_yaml::Number::from(f).to_string() == *v => yaml::num(f),
                        _ => yaml::string(v),
                    }
                };
                m.insert(yaml::key(k), value);
                Value::Mapping(m)
            })
            .collect(),
    )
}

/// Parses a NavGraph. Duplicate connections (in either orientation) are
/// collapsed into one and reported as warnings.
pub fn parse_navgraph(text: &str) -> Result<(NavGraph, Vec<Warning>), FormatError> {
    let root = yaml::load(text)?;
    let doc = At::root(&root);
    doc.mapping()?;
    let defaults_at = doc.req("default-properties")?;
    let mut defaults = property_list(&defaults_at)?;
    let tol = |defaults: &mut IndexMap<String, String>, key: &str| -> Result<f64, FormatError> {
        let v = defaults
            .shift_remove(key)
            .ok_or_else(|| FormatError::missing(defaults_at.path(), key))?;
        v.parse::<f64>()
            .ok()
            .filter(|f| f.is_finite())
            .ok_or_else(|| FormatError::malformed(format!("{}.{key}", defaults_at.path()), "expected a number"))
    };
    let travel_tolerance = tol(&mut defaults, "travel_tolerance")?;
    let target_tolerance = tol(&mut defaults, "target_tolerance")?;

    let mut graph = NavGraph::new(travel_tolerance, target_tolerance);
    graph.default_extras = defaults;
    graph.extras = doc.extras(&["default-properties", "nodes", "connections"])?;

    if let Some(nodes) = doc.get_present("nodes")? {
        for n in nodes.seq()? {
            let name = n.req("name")?.text()?;
            let pos_at = n.req("pos")?;
            let pos = pos_at.seq()?;
            if pos.len() < 2 {
                return Err(FormatError::malformed(pos_at.path(), "pos must be [x, y]"));
            }
            let mut node = NavNode::new(name, pos[0].f64()?, pos[1].f64()?);
            if let Some(p) = n.get_present("properties")? {
                node.properties = property_list(&p)?;
            }
            graph.nodes.push(node);
        }
    }

    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    if let Some(conns) = doc.get_present("connections")? {
        for c in conns.seq()? {
            let ends = c.seq()?;
            if ends.len() != 2 {
                return Err(FormatError::malformed(c.path(), "connection must be a pair of node names"));
            }
            let a = ends[0].text()?;
            let b = ends[1].text()?;
            for end in [&a, &b] {
                if graph.node(end).is_none() {
                    return Err(FormatError::UnknownNodeInConnection { name: end.clone(), at: c.path().to_string() });
                }
            }
            if a == b {
                return Err(FormatError::SelfConnection { name: a, at: c.path().to_string() });
            }
            let key = {
                let (x, y) = sorted_pair(&a, &b);
                (x.to_string(), y.to_string())
            };
            if !seen.insert(key) {
                warnings.push(Warning::new(c.path(), format!("duplicate connection {a} - {b} collapsed")));
                continue;
            }
            graph.connections.push((a, b));
        }
    }
    graph.validate()?;
    Ok((graph, warnings))
}

pub fn emit_navgraph(graph: &NavGraph) -> String {
    let mut m = Mapping::new();
    for (k, v) in &graph.extras {
        m.insert(k.clone(), v.clone());
    }
    let mut defaults = IndexMap::new();
    defaults.insert("travel_tolerance".to_string(), graph.travel_tolerance.to_string());
    defaults.insert("target_tolerance".to_string(), graph.target_tolerance.to_string());
    defaults.extend(graph.default_extras.iter().map(|(k, v)| (k.clone(), v.clone())));
    m.insert(yaml::key("default-properties"), property_values(&defaults));
    let nodes = graph
        .nodes
        .iter()
        .map(|n| {
            let mut nm = Mapping::new();
            nm.insert(yaml::key("name"), yaml::string(&n.name));
            nm.insert(yaml::key("pos"), Value::Sequence(vec![yaml::num(n.x), yaml::num(n.y)]));
            if !n.properties.is_empty() {
                nm.insert(yaml::key("properties"), property_values(&n.properties));
            }
            Value::Mapping(nm)
        })
        .collect();
    m.insert(yaml::key("nodes"), Value::Sequence(nodes));
    let conns = graph
        .connections
        .iter()
        .map(|(a, b)| Value::Sequence(vec![yaml::string(a), yaml::string(b)]))
        .collect();
    m.insert(yaml::key("connections"), Value::Sequence(conns));
    yaml::dump(&Value::Mapping(m), "navgraph")
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "default-properties:\n  - travel_tolerance: 0.5\n  - target_tolerance: 0.3\nnodes:\n  - {name: a, pos: [0, 0]}\n  - {name: b, pos: [1.5, 2]}\n";

    #[test]
    fn two_nodes_one_link() {
        let (g, w) = parse_navgraph(&format!("{BASE}connections:\n  - [a, b]\n")).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.connections, vec![("a".to_string(), "b".to_string())]);
        assert!(w.is_empty());
        assert_eq!(g.node("b").unwrap().x, 1.5);
    }

    #[test]
    fn self_pair_rejected() {
        let err = parse_navgraph(&format!("{BASE}connections:\n  - [a, a]\n")).unwrap_err();
        assert!(matches!(err, FormatError::SelfConnection { .. }));
    }

    #[test]
    fn reversed_duplicate_collapsed_with_warning() {
        let (g, w) = parse_navgraph(&format!("{BASE}connections:\n  - [a, b]\n  - [b, a]\n")).unwrap();
        assert_eq!(g.connections.len(), 1);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].at, "connections[1]");
    }

    #[test]
    fn unknown_node_in_connection() {
        let err = parse_navgraph(&format!("{BASE}connections:\n  - [a, q]\n")).unwrap_err();
        assert_eq!(
            err,
            FormatError::UnknownNodeInConnection { name: "q".into(), at: "connections[0]".into() }
        );
    }

    #[test]
    fn missing_tolerance() {
        let err = parse_navgraph("default-properties:\n  - travel_tolerance: 0.5\nnodes: []\n").unwrap_err();
        assert!(matches!(err, FormatError::MissingField { ref key, .. } if key == "target_tolerance"));
    }

    #[test]
    fn sections_emitted_in_order() {
        let (g, _) = parse_navgraph(&format!("graph-name: w\n{BASE}connections:\n  - [a, b]\n")).unwrap();
        let text = emit_navgraph(&g);
        let d = text.find("default-properties").unwrap();
        let n = text.find("\nnodes").unwrap();
        let c = text.find("connections").unwrap();
        assert!(d < n && n < c);
        assert_eq!(parse_navgraph(&text).unwrap().0, g);
    }

    #[test]
    fn properties_round_trip() {
        let text = format!(
            "{BASE}  - name: c\n    pos: [3, 3]\n    properties:\n      - orientation: 1.57\n      - dead-end\n      - label: dock\nconnections: []\n"
        );
        let (g, _) = parse_navgraph(&text).unwrap();
        let c = g.node("c").unwrap();
        assert_eq!(c.properties.get("orientation").map(String::as_str), Some("1.57"));
        assert_eq!(c.properties.get("dead-end").map(String::as_str), Some("True"));
        assert_eq!(parse_navgraph(&emit_navgraph(&g)).unwrap().0, g);
    }
}
