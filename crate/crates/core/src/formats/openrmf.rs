//! OpenRMF building YAML. Only vertices and lanes are interpreted; walls,
//! doors, floors and crowd-sim sections ride along as opaque extras.

use indexmap::IndexMap;
use serde_yaml::{Mapping, Value};

use super::yaml::{self, At};
use super::FormatError;

#[derive(Debug, Clone, PartialEq)]
pub struct RmfVertex {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub name: String,
    /// Trailing list items after the name (vertex parameter maps).
    pub extra: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmfLane {
    pub start: usize,
    pub end: usize,
    pub properties: Value,
}

impl RmfLane {
    /// Lanes are bidirectional unless their properties say otherwise.
    pub fn is_bidirectional(&self) -> bool {
        let Some(v) = self.properties.get("bidirectional") else {
            return true;
        };
        // RMF parameters are `[type, value]` pairs
        let v = match v {
            Value::Sequence(s) if s.len() == 2 => &s[1],
            other => other,
        };
        v.as_bool().unwrap_or(true)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RmfLevel {
    pub vertices: Vec<RmfVertex>,
    pub lanes: Vec<RmfLane>,
    pub extras: Mapping,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RmfBuilding {
    pub levels: IndexMap<String, RmfLevel>,
    pub extras: Mapping,
}

fn parse_level(at: &At<'_>) -> Result<RmfLevel, FormatError> {
    at.mapping()?;
    let mut level = RmfLevel { extras: at.extras(&["vertices", "lanes"])?, ..Default::default() };
    if let Some(vs) = at.get_present("vertices")? {
        for v in vs.seq()? {
            let items = v.seq()?;
            if items.len() < 2 {
                return Err(FormatError::malformed(v.path(), "vertex must be [x, y, z, name]"));
            }
            let z = match items.get(2) {
                Some(z) if !z.value.is_null() => z.f64()?,
                _ => 0.0,
            };
            let name = match items.get(3) {
                Some(n) => n.text()?,
                None => String::new(),
            };
            let extra = items.iter().skip(4).map(|i| i.value.clone()).collect();
            level.vertices.push(RmfVertex { x: items[0].f64()?, y: items[1].f64()?, z, name, extra });
        }
    }
    if let Some(ls) = at.get_present("lanes")? {
        for l in ls.seq()? {
            let items = l.seq()?;
            if items.len() < 2 || items.len() > 3 {
                return Err(FormatError::malformed(l.path(), "lane must be [start, end, properties]"));
            }
            let start = items[0].usize()?;
            let end = items[1].usize()?;
            for index in [start, end] {
                if index >= level.vertices.len() {
                    return Err(FormatError::LaneIndexOutOfRange {
                        index,
                        len: level.vertices.len(),
                        at: l.path().to_string(),
                    });
                }
            }
            let properties = items.get(2).map(|p| p.value.clone()).unwrap_or(Value::Mapping(Mapping::new()));
            level.lanes.push(RmfLane { start, end, properties });
        }
    }
    Ok(level)
}

pub fn parse_openrmf(text: &str) -> Result<RmfBuilding, FormatError> {
    let root = yaml::load(text)?;
    let doc = At::root(&root);
    doc.mapping()?;
    let levels_at = doc.req("levels")?;
    let mut levels = IndexMap::new();
    for (k, v) in levels_at.mapping()? {
        let name = yaml::scalar_text(k).ok_or_else(|| FormatError::malformed(levels_at.path(), "non-scalar level name"))?;
        let at = At { value: v, path: format!("{}.{}", levels_at.path(), name) };
        levels.insert(name, parse_level(&at)?);
    }
    Ok(RmfBuilding { levels, extras: doc.extras(&["levels"])? })
}

pub fn emit_openrmf(b: &RmfBuilding) -> String {
    let mut levels = Mapping::new();
    for (name, level) in &b.levels {
        let mut m = Mapping::new();
        for (k, v) in &level.extras {
            m.insert(k.clone(), v.clone());
        }
        let verts = level
            .vertices
            .iter()
            .map(|v| {
                let mut items = vec![yaml::num(v.x), yaml::num(v.y), yaml::num(v.z), yaml::string(&v.name)];
                items.extend(v.extra.iter().cloned());
                Value::Sequence(items)
            })
            .collect();
        m.insert(yaml::key("vertices"), Value::Sequence(verts));
        let lanes = level
            .lanes
            .iter()
            .map(|l| {
                Value::Sequence(vec![
                    Value::Number((l.start as u64).into()),
                    Value::Number((l.end as u64).into()),
                    l.properties.clone(),
                ])
            })
            .collect();
        m.insert(yaml::key("lanes"), Value::Sequence(lanes));
        levels.insert(yaml::key(name), Value::Mapping(m));
    }
    let mut root = Mapping::new();
    for (k, v) in &b.extras {
        root.insert(k.clone(), v.clone());
    }
    root.insert(yaml::key("levels"), Value::Mapping(levels));
    yaml::dump(&Value::Mapping(root), "openrmf building")
}
