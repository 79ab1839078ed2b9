use std::collections::{BTreeMap, HashSet};

use serde_yaml::Value;

use super::{ConvertError, EdgeTemplate};
use crate::formats::navgraph::sorted_pair;
use crate::formats::{
    Geometry, GroundOverlay, KmlDoc, KmlFeature, NavGraph, NavNode, OccupancyGrid, OsmGraph, OsmWay, Placemark,
    RmfBuilding, Style, TopoEdge, TopoNode, TopologicalMap, DEFAULT_ACTION, DEFAULT_RESTRICTIONS,
};
use crate::geo::{geo_to_local, local_to_geo, Datum, GeoPoint, LocalPoint};
use crate::Warning;

pub const NODE_STYLE: &str = "topo_node";
pub const EDGE_STYLE: &str = "topo_edge";
pub const FENCE_STYLE: &str = "fence";

/// Which OSM ways count as paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TagFilter {
    Any,
    Key(String),
    KeyValue(String, String),
}

impl Default for TagFilter {
    fn default() -> Self {
        TagFilter::Key("highway".to_string())
    }
}

impl TagFilter {
    /// `*` keeps every way, `key` requires the tag, `key=value` requires the value.
    pub fn parse(text: &str) -> Result<Self, ConvertError> {
        let text = text.trim();
        let bad = || ConvertError::InvalidParam { key: "filter".into(), reason: format!("cannot read `{text}`") };
        if text == "*" {
            return Ok(TagFilter::Any);
        }
        match text.split_once('=') {
            Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok(TagFilter::KeyValue(k.to_string(), v.to_string())),
            Some(_) => Err(bad()),
            None if !text.is_empty() => Ok(TagFilter::Key(text.to_string())),
            None => Err(bad()),
        }
    }

    pub fn matches(&self, way: &OsmWay) -> bool {
        match self {
            TagFilter::Any => true,
            TagFilter::Key(k) => way.tag(k).is_some(),
            TagFilter::KeyValue(k, v) => way.tag(k) == Some(v.as_str()),
        }
    }
}

fn template_node(name: String, position: LocalPoint, t: &EdgeTemplate) -> TopoNode {
    let mut n = TopoNode::new(name, position);
    n.xy_tolerance = t.xy_tolerance;
    n.yaw_tolerance = t.yaw_tolerance;
    n
}

fn template_edge(from: &str, to: &str, t: &EdgeTemplate) -> TopoEdge {
    let mut e = TopoEdge::new(from, to, t.action.clone());
    e.restrictions = t.restrictions.clone();
    e
}

/// Adds `from -> to` unless that pair is already linked.
fn push_edge(map: &mut TopologicalMap, seen: &mut HashSet<(String, String)>, from: &str, to: &str, t: &EdgeTemplate) {
    if from != to && seen.insert((from.to_string(), to.to_string())) {
        map.edges.push(template_edge(from, to, t));
    }
}

/// Builds a topological map from the OSM ways accepted by `filter`: one node
/// per referenced OSM node, an edge each way per consecutive pair of refs
/// (forward only on `oneway=yes`).
pub fn osm_to_topomap(
    g: &OsmGraph,
    datum: &Datum,
    filter: &dyn Fn(&OsmWay) -> bool,
    t: &EdgeTemplate,
) -> Result<(TopologicalMap, Vec<Warning>), ConvertError> {
    datum.validate()?;
    t.validate()?;
    let mut map = TopologicalMap::new("osm");
    map.datum = Some(datum.clone());
    let mut warnings = Vec::new();
    let mut placed: HashSet<&str> = HashSet::new();
    let mut seen = HashSet::new();
    let mut kept = 0;
    for (id, way) in &g.ways {
        if !filter(way) {
            continue;
        }
        kept += 1;
        for r in &way.refs {
            if placed.insert(r.as_str()) {
                let node = g.nodes.get(r).ok_or_else(|| crate::formats::FormatError::DanglingNodeRef {
                    way: id.clone(),
                    node_ref: r.clone(),
                    at: format!("ways.{id}"),
                })?;
                let p = geo_to_local(datum, &node.position)?;
                map.nodes.push(template_node(format!("n{r}"), p, t));
            }
        }
        let oneway = way.tag("oneway") == Some("yes");
        for pair in way.refs.windows(2) {
            let (a, b) = (format!("n{}", pair[0]), format!("n{}", pair[1]));
            push_edge(&mut map, &mut seen, &a, &b, t);
            if !oneway {
                push_edge(&mut map, &mut seen, &b, &a, t);
            }
        }
    }
    if kept == 0 {
        warnings.push(Warning::new("ways", "no way passed the filter; map is empty"));
    }
    Ok((map, warnings))
}

/// Datum at the mean node position, fenced by the nodes' bounding box.
pub fn datum_from_osm(g: &OsmGraph) -> Result<Datum, ConvertError> {
    if g.nodes.is_empty() {
        return Err(ConvertError::EmptyGraph);
    }
    let n = g.nodes.len() as f64;
    let (mut lat, mut lon) = (0.0, 0.0);
    let (mut south, mut north, mut west, mut east) = (90.0_f64, -90.0_f64, 180.0_f64, -180.0_f64);
    for node in g.nodes.values() {
        let p = node.position;
        lat += p.latitude;
        lon += p.longitude;
        south = south.min(p.latitude);
        north = north.max(p.latitude);
        west = west.min(p.longitude);
        east = east.max(p.longitude);
    }
    let mut d = Datum::new(GeoPoint::new(lat / n, lon / n)?);
    if south < north && west < east {
        d.fence = vec![
            GeoPoint::new(south, west)?,
            GeoPoint::new(south, east)?,
            GeoPoint::new(north, east)?,
            GeoPoint::new(north, west)?,
        ];
    }
    Ok(d)
}

/// Each connection becomes a pair of directed edges filled from `t`; the
/// graph's target tolerance becomes every node's xy tolerance.
pub fn navgraph_to_topomap(n: &NavGraph, t: &EdgeTemplate) -> Result<TopologicalMap, ConvertError> {
    n.validate()?;
    t.validate()?;
    let mut map = TopologicalMap::new("navgraph");
    for node in &n.nodes {
        let mut tn = template_node(node.name.clone(), LocalPoint::xy(node.x, node.y), t);
        tn.xy_tolerance = n.target_tolerance;
        for (k, v) in &node.properties {
            tn.properties.insert(Value::String(k.clone()), Value::String(v.clone()));
        }
        map.nodes.push(tn);
    }
    let mut seen = HashSet::new();
    for (a, b) in &n.connections {
        push_edge(&mut map, &mut seen, a, b, t);
        push_edge(&mut map, &mut seen, b, a, t);
    }
    Ok(map)
}

/// Collapses edge pairs into undirected connections. Direction, actions and
/// restrictions cannot be expressed in a NavGraph, so their loss is reported.
pub fn topomap_to_navgraph(m: &TopologicalMap, travel_tolerance: f64) -> Result<(NavGraph, Vec<Warning>), ConvertError> {
    m.validate()?;
    let target = m
        .nodes
        .iter()
        .map(|n| n.xy_tolerance)
        .filter(|t| *t > 0.0)
        .reduce(f64::min)
        .unwrap_or(crate::formats::DEFAULT_XY_TOLERANCE);
    let mut g = NavGraph::new(travel_tolerance, target);
    let mut warnings = Vec::new();
    if m.nodes.iter().any(|n| n.xy_tolerance > 0.0 && n.xy_tolerance != target) {
        warnings.push(Warning::new("nodes", format!("per-node xy tolerances merged into target_tolerance {target}")));
    }
    for n in &m.nodes {
        let mut node = NavNode::new(n.name.clone(), n.pose.position.x, n.pose.position.y);
        for (k, v) in &n.properties {
            if let (Some(k), Some(v)) = (crate::formats::yaml::scalar_text(k), crate::formats::yaml::scalar_text(v)) {
                node.properties.insert(k, v);
            }
        }
        g.nodes.push(node);
    }
    let mut linked = HashSet::new();
    let mut dropped = 0;
    for e in &m.edges {
        if e.action != DEFAULT_ACTION || e.restrictions != DEFAULT_RESTRICTIONS {
            dropped += 1;
        }
        let pair = sorted_pair(&e.from, &e.to);
        if !linked.insert(pair) {
            continue;
        }
        if !m.has_edge(&e.to, &e.from) {
            warnings.push(Warning::new(
                format!("edges.{}", e.edge_id),
                format!("one-way edge {} -> {} becomes a two-way connection", e.from, e.to),
            ));
        }
        g.connections.push((e.from.clone(), e.to.clone()));
    }
    if dropped > 0 {
        warnings.push(Warning::new(
            "edges",
            format!("{dropped} edge(s) carry actions or restrictions that a navgraph cannot store; dropped"),
        ));
    }
    Ok((g, warnings))
}

fn kml_styles() -> BTreeMap<String, Style> {
    let mut styles = BTreeMap::new();
    styles.insert(
        NODE_STYLE.to_string(),
        Style { icon_href: Some("http://maps.google.com/mapfiles/kml/shapes/placemark_circle.png".into()), ..Default::default() },
    );
    styles.insert(
        EDGE_STYLE.to_string(),
        Style { line_color: Some("ff00ffff".into()), line_width: Some(2.0), ..Default::default() },
    );
    styles
}

/// Edge polyline kept by the skeleton tracer, when present.
fn edge_path(e: &TopoEdge) -> Option<Vec<LocalPoint>> {
    let Value::Sequence(items) = e.extras.get("path")? else { return None };
    items
        .iter()
        .map(|p| {
            let xy = p.as_sequence()?;
            Some(LocalPoint::xy(xy.first()?.as_f64()?, xy.get(1)?.as_f64()?))
        })
        .collect::<Option<Vec<_>>>()
        .filter(|v| v.len() >= 2)
}

/// Point per node and line per edge, both in name order.
pub fn topomap_to_kml(m: &TopologicalMap, d: &Datum) -> Result<KmlDoc, ConvertError> {
    d.validate()?;
    let mut doc = KmlDoc::new(if m.name.is_empty() { "topological map" } else { m.name.as_str() });
    doc.styles = kml_styles();
    let mut nodes: Vec<&TopoNode> = m.nodes.iter().collect();
    nodes.sort_by(|a, b| a.name.cmp(&b.name));
    for n in nodes {
        doc.features.push(KmlFeature::Placemark(Placemark {
            name: n.name.clone(),
            style: Some(NODE_STYLE.to_string()),
            geometry: Geometry::Point(local_to_geo(d, &n.pose.position)?),
        }));
    }
    let mut edges: Vec<&TopoEdge> = m.edges.iter().collect();
    edges.sort_by(|a, b| a.edge_id.cmp(&b.edge_id));
    for e in edges {
        let ends = || -> Option<Vec<LocalPoint>> {
            Some(vec![m.node(&e.from)?.pose.position, m.node(&e.to)?.pose.position])
        };
        let Some(local) = edge_path(e).or_else(ends) else { continue };
        let line = local.iter().map(|p| local_to_geo(d, p)).collect::<Result<Vec<_>, _>>()?;
        doc.features.push(KmlFeature::Placemark(Placemark {
            name: e.edge_id.clone(),
            style: Some(EDGE_STYLE.to_string()),
            geometry: Geometry::LineString(line),
        }));
    }
    Ok(doc)
}

pub fn datum_to_kml(d: &Datum) -> Result<KmlDoc, ConvertError> {
    d.validate()?;
    if !d.has_fence() {
        return Err(ConvertError::NoFence);
    }
    let mut doc = KmlDoc::new("datum");
    doc.styles.insert(
        FENCE_STYLE.to_string(),
        Style { line_color: Some("ff0000ff".into()), line_width: Some(2.0), poly_color: Some("400000ff".into()), icon_href: None },
    );
    doc.features.push(KmlFeature::Placemark(Placemark {
        name: "fence".to_string(),
        style: Some(FENCE_STYLE.to_string()),
        geometry: Geometry::Polygon(d.fence.clone()),
    }));
    Ok(doc)
}

/// Drapes the grid image over its footprint. The box is the unrotated
/// footprint about the grid centre; KML applies `rotation` about that centre.
pub fn occgrid_to_kml(g: &OccupancyGrid, d: &Datum, image_href: &str) -> Result<KmlDoc, ConvertError> {
    g.validate()?;
    d.validate()?;
    let half_w = g.width as f64 * g.resolution / 2.0;
    let half_h = g.height as f64 * g.resolution / 2.0;
    let (s, c) = g.origin.yaw.sin_cos();
    let o = g.origin.position;
    let cx = o.x + c * half_w - s * half_h;
    let cy = o.y + s * half_w + c * half_h;
    let sw = local_to_geo(d, &LocalPoint::new(cx - half_w, cy - half_h, o.z))?;
    let ne = local_to_geo(d, &LocalPoint::new(cx + half_w, cy + half_h, o.z))?;
    let mut doc = KmlDoc::new("occupancy grid");
    doc.features.push(KmlFeature::GroundOverlay(GroundOverlay {
        name: g.image_name.clone(),
        href: image_href.to_string(),
        north: ne.latitude,
        south: sw.latitude,
        east: ne.longitude,
        west: sw.longitude,
        rotation: g.origin.yaw.to_degrees(),
    }));
    Ok(doc)
}

/// One node per vertex of `level`, an edge per lane direction.
pub fn openrmf_to_topomap(b: &RmfBuilding, level: &str, t: &EdgeTemplate) -> Result<TopologicalMap, ConvertError> {
    t.validate()?;
    let lvl = b.levels.get(level).ok_or_else(|| ConvertError::UnknownLevel {
        name: level.to_string(),
        known: b.levels.keys().cloned().collect::<Vec<_>>().join(", "),
    })?;
    let mut map = TopologicalMap::new(level);
    let mut names = Vec::with_capacity(lvl.vertices.len());
    for (i, v) in lvl.vertices.iter().enumerate() {
        let name = if v.name.is_empty() { format!("v{i}") } else { v.name.clone() };
        map.nodes.push(template_node(name.clone(), LocalPoint::new(v.x, v.y, v.z), t));
        names.push(name);
    }
    let mut seen = HashSet::new();
    for lane in &lvl.lanes {
        let (a, b) = (&names[lane.start], &names[lane.end]);
        push_edge(&mut map, &mut seen, a, b, t);
        if lane.is_bidirectional() {
            push_edge(&mut map, &mut seen, b, a, t);
        }
    }
    map.validate()?;
    Ok(map)
}
