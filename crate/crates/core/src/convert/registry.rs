use std::collections::BTreeMap;

use super::conversions::{
    datum_from_osm, datum_to_kml, navgraph_to_topomap, occgrid_to_kml, openrmf_to_topomap, osm_to_topomap,
    topomap_to_kml, topomap_to_navgraph, TagFilter,
};
use super::{ConvertError, EdgeTemplate};
use crate::detect::FormatId;
use crate::formats::{KmlDoc, NavGraph, OccupancyGrid, OsmGraph, RmfBuilding, TopologicalMap};
use crate::geo::Datum;
use crate::procgen::{tilegrid_to_occgrid, TileGrid};
use crate::skeleton::{grid_to_topomap, SkeletonOpts, TreatUnknown};
use crate::Warning;

/// A parsed file of any supported format.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Datum(Datum),
    OccGrid(OccupancyGrid),
    TopoMap(TopologicalMap),
    NavGraph(NavGraph),
    Osm(OsmGraph),
    OpenRmf(RmfBuilding),
    Kml(KmlDoc),
    TileGrid(TileGrid),
}

impl Artifact {
    pub fn format(&self) -> FormatId {
        match self {
            Artifact::Datum(_) => FormatId::Datum,
            Artifact::OccGrid(_) => FormatId::OccGrid,
            Artifact::TopoMap(_) => FormatId::TopoMap,
            Artifact::NavGraph(_) => FormatId::NavGraph,
            Artifact::Osm(_) => FormatId::Osm,
            Artifact::OpenRmf(_) => FormatId::OpenRmf,
            Artifact::Kml(_) => FormatId::Kml,
            Artifact::TileGrid(_) => FormatId::TileGrid,
        }
    }
}

pub type Inputs = BTreeMap<FormatId, Artifact>;

/// Flat `key=value` conversion parameters.
pub type Params = BTreeMap<String, String>;

type Runner = fn(&Conversion, &Inputs, &Params) -> Result<(Artifact, Vec<Warning>), ConvertError>;

#[derive(Clone, Copy)]
pub struct Conversion {
    pub id: &'static str,
    pub inputs: &'static [FormatId],
    pub output: FormatId,
    /// Accepted parameters and their defaults.
    pub params: &'static [(&'static str, &'static str)],
    /// Whether the planner may use this conversion. Conversions that keep
    /// only a by-product of their input are reachable by explicit request only.
    pub planned: bool,
    run: Runner,
}

impl std::fmt::Debug for Conversion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Conversion")
            .field("id", &self.id)
            .field("inputs", &self.inputs)
            .field("output", &self.output)
            .finish()
    }
}

impl Conversion {
    pub fn run(&self, inputs: &Inputs, params: &Params) -> Result<(Artifact, Vec<Warning>), ConvertError> {
        for key in params.keys() {
            if !self.accepts(key) {
                return Err(ConvertError::InvalidParam {
                    key: key.clone(),
                    reason: format!("not a parameter of {}", self.id),
                });
            }
        }
        (self.run)(self, inputs, params)
    }

    pub fn accepts(&self, key: &str) -> bool {
        self.params.iter().any(|(k, _)| *k == key)
    }

    fn param<'a>(&self, params: &'a Params, key: &str) -> &'a str
    where
        Self: 'a,
    {
        match params.get(key) {
            Some(v) => v,
            None => self.params.iter().find(|(k, _)| *k == key).map(|(_, d)| *d).unwrap_or(""),
        }
    }

    fn number(&self, params: &Params, key: &str) -> Result<f64, ConvertError> {
        let raw = self.param(params, key);
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ConvertError::InvalidParam { key: key.into(), reason: format!("`{raw}` is not a number") })
    }

    fn flag(&self, params: &Params, key: &str) -> Result<bool, ConvertError> {
        match self.param(params, key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(ConvertError::InvalidParam { key: key.into(), reason: format!("`{other}` is not a boolean") }),
        }
    }

    fn template(&self, params: &Params) -> Result<EdgeTemplate, ConvertError> {
        let t = EdgeTemplate {
            action: self.param(params, "action").to_string(),
            restrictions: self.param(params, "restrictions").to_string(),
            xy_tolerance: self.number(params, "xy_tolerance")?,
            yaw_tolerance: self.number(params, "yaw_tolerance")?,
        };
        t.validate()?;
        Ok(t)
    }
}

const TEMPLATE: [(&str, &str); 4] =
    [("action", "move_base"), ("restrictions", "True"), ("xy_tolerance", "0.3"), ("yaw_tolerance", "0.1")];

macro_rules! with_template {
    ($($extra:expr),* $(,)?) => {
        &[TEMPLATE[0], TEMPLATE[1], TEMPLATE[2], TEMPLATE[3], $($extra),*]
    };
}

macro_rules! input {
    ($inputs:expr, $c:expr, $variant:ident, $fmt:expr) => {
        match $inputs.get(&$fmt) {
            Some(Artifact::$variant(v)) => v,
            _ => return Err(ConvertError::MissingInput { step: $c.id.to_string(), format: $fmt }),
        }
    };
}

fn run_datum_from_osm(c: &Conversion, i: &Inputs, _: &Params) -> Result<(Artifact, Vec<Warning>), ConvertError> {
    let g = input!(i, c, Osm, FormatId::Osm);
    Ok((Artifact::Datum(datum_from_osm(g)?), Vec::new()))
}

fn run_datum_to_kml(c: &Conversion, i: &Inputs, _: &Params) -> Result<(Artifact, Vec<Warning>), ConvertError> {
    let d = input!(i, c, Datum, FormatId::Datum);
    Ok((Artifact::Kml(datum_to_kml(d)?), Vec::new()))
}

fn run_grid_to_topomap(c: &Conversion, i: &Inputs, p: &Params) -> Result<(Artifact, Vec<Warning>), ConvertError> {
    let g = input!(i, c, OccGrid, FormatId::OccGrid);
    let treat_unknown = match c.param(p, "unknown") {
        "occupied" => TreatUnknown::Occupied,
        "free" => TreatUnknown::Free,
        other => {
            return Err(ConvertError::InvalidParam {
                key: "unknown".into(),
                reason: format!("`{other}` is neither `occupied` nor `free`"),
            })
        }
    };
    let simplify = c.number(p, "simplify")?;
    let opts = SkeletonOpts {
        merge_radius: c.number(p, "merge_radius")?,
        treat_unknown,
        simplify_tolerance: (simplify > 0.0).then_some(simplify),
        retain_paths: c.flag(p, "retain_paths")?,
        template: c.template(p)?,
        name: c.param(p, "name").to_string(),
    };
    let out = grid_to_topomap(g, &opts)?;
    Ok((Artifact::TopoMap(out.map), out.warnings))
}

fn run_navgraph_to_topomap(c: &Conversion, i: &Inputs, p: &Params) -> Result<(Artifact, Vec<Warning>), ConvertError> {
    let n = input!(i, c, NavGraph, FormatId::NavGraph);
    Ok((Artifact::TopoMap(navgraph_to_topomap(n, &c.template(p)?)?), Vec::new()))
}

fn run_occgrid_to_kml(c: &Conversion, i: &Inputs, p: &Params) -> Result<(Artifact, Vec<Warning>), ConvertError> {
    let g = input!(i, c, OccGrid, FormatId::OccGrid);
    let d = input!(i, c, Datum, FormatId::Datum);
    let href = match c.param(p, "image_href") {
        "" => crate::formats::occgrid::pgm_image_name(&g.image_name),
        h => h.to_string(),
    };
    Ok((Artifact::Kml(occgrid_to_kml(g, d, &href)?), Vec::new()))
}

fn run_openrmf_to_topomap(c: &Conversion, i: &Inputs, p: &Params) -> Result<(Artifact, Vec<Warning>), ConvertError> {
    let b = input!(i, c, OpenRmf, FormatId::OpenRmf);
    let mut warnings = Vec::new();
    let level = match c.param(p, "level") {
        "" => {
            let first = b.levels.keys().next().ok_or_else(|| ConvertError::UnknownLevel {
                name: String::new(),
                known: String::new(),
            })?;
            if b.levels.len() > 1 {
                warnings.push(Warning::new("levels", format!("several levels; using `{first}` (set level=...)")));
            }
            first.as_str()
        }
        l => l,
    };
    Ok((Artifact::TopoMap(openrmf_to_topomap(b, level, &c.template(p)?)?), warnings))
}

fn run_osm_to_topomap(c: &Conversion, i: &Inputs, p: &Params) -> Result<(Artifact, Vec<Warning>), ConvertError> {
    let g = input!(i, c, Osm, FormatId::Osm);
    let d = input!(i, c, Datum, FormatId::Datum);
    let filter = TagFilter::parse(c.param(p, "filter"))?;
    let (map, warnings) = osm_to_topomap(g, d, &|w| filter.matches(w), &c.template(p)?)?;
    Ok((Artifact::TopoMap(map), warnings))
}

fn run_tilegrid_to_occgrid(c: &Conversion, i: &Inputs, p: &Params) -> Result<(Artifact, Vec<Warning>), ConvertError> {
    let t = input!(i, c, TileGrid, FormatId::TileGrid);
    Ok((Artifact::OccGrid(tilegrid_to_occgrid(t, c.number(p, "resolution")?)?), Vec::new()))
}

fn run_topomap_to_kml(c: &Conversion, i: &Inputs, _: &Params) -> Result<(Artifact, Vec<Warning>), ConvertError> {
    let m = input!(i, c, TopoMap, FormatId::TopoMap);
    let d = input!(i, c, Datum, FormatId::Datum);
    Ok((Artifact::Kml(topomap_to_kml(m, d)?), Vec::new()))
}

fn run_topomap_to_navgraph(c: &Conversion, i: &Inputs, p: &Params) -> Result<(Artifact, Vec<Warning>), ConvertError> {
    let m = input!(i, c, TopoMap, FormatId::TopoMap);
    let (g, warnings) = topomap_to_navgraph(m, c.number(p, "travel_tolerance")?)?;
    Ok((Artifact::NavGraph(g), warnings))
}

use FormatId as F;

static REGISTRY: [Conversion; 10] = [
    Conversion { id: "datum_from_osm", inputs: &[F::Osm], output: F::Datum, params: &[], planned: true, run: run_datum_from_osm },
    Conversion { id: "datum_to_kml", inputs: &[F::Datum], output: F::Kml, params: &[], planned: false, run: run_datum_to_kml },
    Conversion {
        id: "grid_to_topomap",
        inputs: &[F::OccGrid],
        output: F::TopoMap,
        params: with_template!(
            ("merge_radius", "3"),
            ("unknown", "occupied"),
            ("simplify", "0"),
            ("retain_paths", "false"),
            ("name", "grid"),
        ),
        planned: true,
        run: run_grid_to_topomap,
    },
    Conversion {
        id: "navgraph_to_topomap",
        inputs: &[F::NavGraph],
        output: F::TopoMap,
        params: with_template!(),
        planned: true,
        run: run_navgraph_to_topomap,
    },
    Conversion {
        id: "occgrid_to_kml",
        inputs: &[F::OccGrid, F::Datum],
        output: F::Kml,
        params: &[("image_href", "")],
        planned: true,
        run: run_occgrid_to_kml,
    },
    Conversion {
        id: "openrmf_to_topomap",
        inputs: &[F::OpenRmf],
        output: F::TopoMap,
        params: with_template!(("level", "")),
        planned: true,
        run: run_openrmf_to_topomap,
    },
    Conversion {
        id: "osm_to_topomap",
        inputs: &[F::Osm, F::Datum],
        output: F::TopoMap,
        params: with_template!(("filter", "highway")),
        planned: true,
        run: run_osm_to_topomap,
    },
    Conversion {
        id: "tilegrid_to_occgrid",
        inputs: &[F::TileGrid],
        output: F::OccGrid,
        params: &[("resolution", "0.5")],
        planned: true,
        run: run_tilegrid_to_occgrid,
    },
    Conversion {
        id: "topomap_to_kml",
        inputs: &[F::TopoMap, F::Datum],
        output: F::Kml,
        params: &[],
        planned: true,
        run: run_topomap_to_kml,
    },
    Conversion {
        id: "topomap_to_navgraph",
        inputs: &[F::TopoMap],
        output: F::NavGraph,
        params: &[("travel_tolerance", "0.5")],
        planned: true,
        run: run_topomap_to_navgraph,
    },
];

/// Every conversion, sorted by id.
pub fn registry() -> &'static [Conversion] {
    &REGISTRY
}

/// The conversions the planner chains.
pub fn planning_registry() -> Vec<Conversion> {
    REGISTRY.iter().filter(|c| c.planned).copied().collect()
}

pub fn find_conversion(id: &str) -> Result<&'static Conversion, ConvertError> {
    REGISTRY.iter().find(|c| c.id == id).ok_or_else(|| ConvertError::UnknownConversion(id.to_string()))
}
