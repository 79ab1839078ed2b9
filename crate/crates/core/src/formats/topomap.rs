//! Topological map YAML.
//!
//! Edges live under their source node on disk and are hoisted into
//! [`TopologicalMap::edges`] in memory:
//!
//! ```yaml
//! name: riseholme
//! nodes:
//!   - node:
//!       name: WayPoint1
//!       pose:
//!         position: {x: 0.0, y: 0.0, z: 0.0}
//!         orientation: {w: 1.0, x: 0.0, y: 0.0, z: 0.0}
//!       verts: [{x: 0.5, y: 0.5}, {x: -0.5, y: 0.5}]
//!       properties: {xy_goal_tolerance: 0.3, yaw_goal_tolerance: 0.1}
//!       restrictions: "True"
//!       edges:
//!         - {edge_id: WayPoint1_WayPoint2, node: WayPoint2, action: move_base}
//! ```
//!
//! Tolerances and restrictions that are absent from a file are filled with
//! defaults and flagged, so that emitting the map leaves them out again.

use std::collections::HashSet;

use serde_yaml::{Mapping, Value};

use super::datum::{datum_value, parse_datum_value};
use super::yaml::{self, At};
use super::FormatError;
use crate::geo::{Datum, LocalPoint};

pub const DEFAULT_ACTION: &str = "move_base";
pub const DEFAULT_RESTRICTIONS: &str = "True";
pub const DEFAULT_XY_TOLERANCE: f64 = 0.3;
pub const DEFAULT_YAW_TOLERANCE: f64 = 0.1;

/// Unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Orientation {
    fn default() -> Self {
        Orientation { w: 1.0, x: 0.0, y: 0.0, z: 0.0 }
    }
}

impl Orientation {
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = (yaw / 2.0).sin_cos();
        Orientation { w: c, x: 0.0, y: 0.0, z: s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: LocalPoint,
    pub orientation: Orientation,
}

/// Which node fields were filled in from defaults rather than read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeDefaults {
    pub xy_tolerance: bool,
    pub yaw_tolerance: bool,
    pub restrictions: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoNode {
    pub name: String,
    pub pose: Pose,
    /// Influence-zone polygon as offsets from the node position.
    pub boundary: Vec<LocalPoint>,
    pub xy_tolerance: f64,
    pub yaw_tolerance: f64,
    pub restrictions: String,
    pub defaulted: NodeDefaults,
    /// Entries of `properties` other than the goal tolerances.
    pub properties: Mapping,
    /// Unrecognised keys of the `node` mapping.
    pub extras: Mapping,
    /// Keys next to `node` in the list entry (e.g. `meta`).
    pub entry_extras: Mapping,
}

impl TopoNode {
    pub fn new(name: impl Into<String>, position: LocalPoint) -> Self {
        TopoNode {
            name: name.into(),
            pose: Pose { position, orientation: Orientation::default() },
            boundary: Vec::new(),
            xy_tolerance: DEFAULT_XY_TOLERANCE,
            yaw_tolerance: DEFAULT_YAW_TOLERANCE,
            restrictions: DEFAULT_RESTRICTIONS.to_string(),
            defaulted: NodeDefaults::default(),
            properties: Mapping::new(),
            extras: Mapping::new(),
            entry_extras: Mapping::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoEdge {
    pub edge_id: String,
    pub from: String,
    pub to: String,
    pub action: String,
    pub restrictions: String,
    pub restrictions_defaulted: bool,
    pub extras: Mapping,
}

impl TopoEdge {
    pub fn new(from: impl Into<String>, to: impl Into<String>, action: impl Into<String>) -> Self {
        let from = from.into();
        let to = to.into();
        TopoEdge {
            edge_id: format!("{from}_{to}"),
            from,
            to,
            action: action.into(),
            restrictions: DEFAULT_RESTRICTIONS.to_string(),
            restrictions_defaulted: false,
            extras: Mapping::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TopologicalMap {
    pub name: String,
    pub datum: Option<Datum>,
    pub nodes: Vec<TopoNode>,
    pub edges: Vec<TopoEdge>,
    pub extras: Mapping,
}

impl TopologicalMap {
    pub fn new(name: impl Into<String>) -> Self {
        TopologicalMap { name: name.into(), ..Default::default() }
    }

    pub fn node(&self, name: &str) -> Option<&TopoNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }

    /// Number of distinct neighbours of each node, ignoring direction.
    pub fn undirected_degree(&self, name: &str) -> usize {
        let mut seen = HashSet::new();
        for e in &self.edges {
            if e.from == name {
                seen.insert(e.to.as_str());
            } else if e.to == name {
                seen.insert(e.from.as_str());
            }
        }
        seen.len()
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        let mut names = HashSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let at = format!("nodes[{i}]");
            if n.name.is_empty() {
                return Err(FormatError::malformed(at, "node name is empty"));
            }
            if !names.insert(n.name.as_str()) {
                return Err(FormatError::DuplicateNode { name: n.name.clone(), at });
            }
            if !(n.xy_tolerance >= 0.0 && n.yaw_tolerance >= 0.0) {
                return Err(FormatError::malformed(at, "tolerances must be non-negative"));
            }
            if !n.pose.position.is_finite() {
                return Err(FormatError::malformed(at, "node position is not finite"));
            }
        }
        let mut ids = HashSet::new();
        let mut triples = HashSet::new();
        for (i, e) in self.edges.iter().enumerate() {
            let at = format!("edges[{i}]");
            if !names.contains(e.from.as_str()) || !names.contains(e.to.as_str()) {
                return Err(FormatError::DanglingEdge { from: e.from.clone(), to: e.to.clone(), at });
            }
            if e.from == e.to {
                return Err(FormatError::malformed(at, format!("edge {} loops on itself", e.edge_id)));
            }
            if !ids.insert(e.edge_id.as_str()) {
                return Err(FormatError::malformed(at, format!("duplicate edge id {}", e.edge_id)));
            }
            if !triples.insert((e.from.as_str(), e.to.as_str(), e.action.as_str())) {
                return Err(FormatError::malformed(
                    at,
                    format!("duplicate edge {} -> {} ({})", e.from, e.to, e.action),
                ));
            }
        }
        Ok(())
    }
}

fn point(at: &At<'_>) -> Result<LocalPoint, FormatError> {
    let x = at.req("x")?.f64()?;
    let y = at.req("y")?.f64()?;
    let z = match at.get_present("z")? {
        Some(z) => z.f64()?,
        None => 0.0,
    };
    Ok(LocalPoint { x, y, z })
}

fn parse_node(entry: &At<'_>, edges: &mut Vec<TopoEdge>) -> Result<TopoNode, FormatError> {
    let n = entry.req("node")?;
    let name = n.req("name")?.text()?;
    let pose_at = n.req("pose")?;
    let position = point(&pose_at.req("position")?)?;
    let orientation = match pose_at.get_present("orientation")? {
        Some(o) => Orientation {
            w: o.req("w")?.f64()?,
            x: o.req("x")?.f64()?,
            y: o.req("y")?.f64()?,
            z: o.req("z")?.f64()?,
        },
        None => Orientation::default(),
    };
    let mut boundary = Vec::new();
    if let Some(v) = n.get_present("verts")? {
        for p in v.seq()? {
            boundary.push(point(&p)?);
        }
    }
    let mut defaulted = NodeDefaults::default();
    let mut xy_tolerance = DEFAULT_XY_TOLERANCE;
    let mut yaw_tolerance = DEFAULT_YAW_TOLERANCE;
    let mut properties = Mapping::new();
    match n.get_present("properties")? {
        Some(p) => {
            match p.get_present("xy_goal_tolerance")? {
                Some(t) => xy_tolerance = t.f64()?,
                None => defaulted.xy_tolerance = true,
            }
            match p.get_present("yaw_goal_tolerance")? {
                Some(t) => yaw_tolerance = t.f64()?,
                None => defaulted.yaw_tolerance = true,
            }
            properties = p.extras(&["xy_goal_tolerance", "yaw_goal_tolerance"])?;
        }
        None => {
            defaulted.xy_tolerance = true;
            defaulted.yaw_tolerance = true;
        }
    }
    let restrictions = match n.get_present("restrictions")? {
        Some(r) => r.text()?,
        None => {
            defaulted.restrictions = true;
            DEFAULT_RESTRICTIONS.to_string()
        }
    };
    if let Some(list) = n.get_present("edges")? {
        for e in list.seq()? {
            let to = e.req("node")?.text()?;
            let edge_id = match e.get_present("edge_id")? {
                Some(id) => id.text()?,
                None => format!("{name}_{to}"),
            };
            let action = e.req("action")?.text()?;
            let (restrictions, restrictions_defaulted) = match e.get_present("restrictions")? {
                Some(r) => (r.text()?, false),
                None => (DEFAULT_RESTRICTIONS.to_string(), true),
            };
            edges.push(TopoEdge {
                edge_id,
                from: name.clone(),
                to,
                action,
                restrictions,
                restrictions_defaulted,
                extras: e.extras(&["edge_id", "node", "action", "restrictions"])?,
            });
        }
    }
    Ok(TopoNode {
        name,
        pose: Pose { position, orientation },
        boundary,
        xy_tolerance,
        yaw_tolerance,
        restrictions,
        defaulted,
        properties,
        extras: n.extras(&["name", "pose", "verts", "properties", "restrictions", "edges"])?,
        entry_extras: entry.extras(&["node"])?,
    })
}

pub fn parse_topomap(text: &str) -> Result<TopologicalMap, FormatError> {
    let root = yaml::load(text)?;
    let doc = At::root(&root);
    doc.mapping()?;
    let name = doc.req("name")?.text()?;
    let datum = match doc.get_present("datum")? {
        Some(d) => Some(parse_datum_value(&d)?),
        None => None,
    };
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut edge_paths = Vec::new();
    if let Some(list) = doc.get_present("nodes")? {
        for entry in list.seq()? {
            let before = edges.len();
            let node = parse_node(&entry, &mut edges)?;
            for k in 0..edges.len() - before {
                edge_paths.push(format!("{}.node.edges[{k}]", entry.path()));
            }
            nodes.push(node);
        }
    } else {
        return Err(FormatError::missing(doc.path(), "nodes"));
    }
    let map = TopologicalMap { name, datum, nodes, edges, extras: doc.extras(&["name", "datum", "nodes"])? };
    // Re-run validation to map edge indices back to document paths.
    map.validate().map_err(|e| match e {
        FormatError::DanglingEdge { from, to, at } => FormatError::DanglingEdge {
            from,
            to,
            at: reposition(&at, "edges", &edge_paths),
        },
        FormatError::MalformedDocument { reason, at } => FormatError::MalformedDocument {
            reason,
            at: reposition(&at, "edges", &edge_paths),
        },
        other => other,
    })?;
    Ok(map)
}

fn reposition(at: &str, prefix: &str, paths: &[String]) -> String {
    at.strip_prefix(prefix)
        .and_then(|s| s.strip_prefix('['))
        .and_then(|s| s.strip_suffix(']'))
        .and_then(|i| i.parse::<usize>().ok())
        .and_then(|i| paths.get(i).cloned())
        .unwrap_or_else(|| at.to_string())
}

fn point_value(p: &LocalPoint, with_z: bool) -> Value {
    let mut m = Mapping::new();
    m.insert(yaml::key("x"), yaml::num(p.x));
    m.insert(yaml::key("y"), yaml::num(p.y));
    if with_z {
        m.insert(yaml::key("z"), yaml::num(p.z));
    }
    Value::Mapping(m)
}

fn node_value(n: &TopoNode, edges: &[&TopoEdge]) -> Value {
    let mut m = Mapping::new();
    m.insert(yaml::key("name"), yaml::string(&n.name));
    let o = n.pose.orientation;
    let pose = yaml::mapping(
        [
            ("position", point_value(&n.pose.position, true)),
            (
                "orientation",
                yaml::mapping(
                    [("w", yaml::num(o.w)), ("x", yaml::num(o.x)), ("y", yaml::num(o.y)), ("z", yaml::num(o.z))],
                    &Mapping::new(),
                ),
            ),
        ],
        &Mapping::new(),
    );
    m.insert(yaml::key("pose"), pose);
    if !n.boundary.is_empty() {
        let verts = n
            .boundary
            .iter()
            .map(|p| point_value(p, p.z != 0.0))
            .collect();
        m.insert(yaml::key("verts"), Value::Sequence(verts));
    }
    let mut props = Mapping::new();
    if !n.defaulted.xy_tolerance {
        props.insert(yaml::key("xy_goal_tolerance"), yaml::num(n.xy_tolerance));
    }
    if !n.defaulted.yaw_tolerance {
        props.insert(yaml::key("yaw_goal_tolerance"), yaml::num(n.yaw_tolerance));
    }
    for (k, v) in &n.properties {
        props.insert(k.clone(), v.clone());
    }
    // An empty `properties` mapping would read back as "tolerances absent" too.
    if !props.is_empty() {
        m.insert(yaml::key("properties"), Value::Mapping(props));
    }
    if !n.defaulted.restrictions {
        m.insert(yaml::key("restrictions"), yaml::string(&n.restrictions));
    }
    let edge_list = edges
        .iter()
        .map(|e| {
            let mut em = Mapping::new();
            em.insert(yaml::key("edge_id"), yaml::string(&e.edge_id));
            em.insert(yaml::key("node"), yaml::string(&e.to));
            em.insert(yaml::key("action"), yaml::string(&e.action));
            if !e.restrictions_defaulted {
                em.insert(yaml::key("restrictions"), yaml::string(&e.restrictions));
            }
            for (k, v) in &e.extras {
                em.insert(k.clone(), v.clone());
            }
            Value::Mapping(em)
        })
        .collect();
    m.insert(yaml::key("edges"), Value::Sequence(edge_list));
    for (k, v) in &n.extras {
        m.insert(k.clone(), v.clone());
    }
    let mut entry = Mapping::new();
    entry.insert(yaml::key("node"), Value::Mapping(m));
    for (k, v) in &n.entry_extras {
        entry.insert(k.clone(), v.clone());
    }
    Value::Mapping(entry)
}

pub fn emit_topomap(map: &TopologicalMap) -> String {
    let mut m = Mapping::new();
    m.insert(yaml::key("name"), yaml::string(&map.name));
    for (k, v) in &map.extras {
        m.insert(k.clone(), v.clone());
    }
    if let Some(d) = &map.datum {
        m.insert(yaml::key("datum"), datum_value(d));
    }
    let nodes = map
        .nodes
        .iter()
        .map(|n| {
            let out: Vec<&TopoEdge> = map.edges.iter().filter(|e| e.from == n.name).collect();
            node_value(n, &out)
        })
        .collect();
    m.insert(yaml::key("nodes"), Value::Sequence(nodes));
    yaml::dump(&Value::Mapping(m), "topological map")
}
