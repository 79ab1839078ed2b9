//! Conversions between formats, the registry that names them, and a planner
//! that chains them when no single conversion reaches the goal.

mod conversions;
pub mod io;
mod planner;
mod registry;

pub use conversions::{
    datum_from_osm, datum_to_kml, navgraph_to_topomap, occgrid_to_kml, openrmf_to_topomap, osm_to_topomap,
    topomap_to_kml, topomap_to_navgraph, TagFilter, EDGE_STYLE, FENCE_STYLE, NODE_STYLE,
};
pub use planner::{plan_pipeline, run_pipeline, ConversionPlan, PipelineOutput};
pub use registry::{find_conversion, planning_registry, registry, Artifact, Conversion, Inputs, Params};

use thiserror::Error;

use crate::detect::FormatId;
use crate::formats::{FormatError, DEFAULT_ACTION, DEFAULT_RESTRICTIONS, DEFAULT_XY_TOLERANCE, DEFAULT_YAW_TOLERANCE};
use crate::geo::GeoError;
use crate::procgen::ProcgenError;

/// Fills the navigation fields a source format has no notion of.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTemplate {
    pub action: String,
    pub restrictions: String,
    pub xy_tolerance: f64,
    pub yaw_tolerance: f64,
}

impl Default for EdgeTemplate {
    fn default() -> Self {
        EdgeTemplate {
            action: DEFAULT_ACTION.to_string(),
            restrictions: DEFAULT_RESTRICTIONS.to_string(),
            xy_tolerance: DEFAULT_XY_TOLERANCE,
            yaw_tolerance: DEFAULT_YAW_TOLERANCE,
        }
    }
}

impl EdgeTemplate {
    pub fn validate(&self) -> Result<(), ConvertError> {
        if self.action.trim().is_empty() {
            return Err(ConvertError::InvalidParam { key: "action".into(), reason: "action is empty".into() });
        }
        for (key, v) in [("xy_tolerance", self.xy_tolerance), ("yaw_tolerance", self.yaw_tolerance)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConvertError::InvalidParam { key: key.into(), reason: format!("{v} is not a tolerance") });
            }
        }
        Ok(())
    }
}

fn format_sets(sets: &[Vec<FormatId>]) -> String {
    sets.iter()
        .map(|s| format!("{{{}}}", s.iter().map(|f| f.name()).collect::<Vec<_>>().join(", ")))
        .collect::<Vec<_>>()
        .join(" or ")
}

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Procgen(#[from] ProcgenError),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("datum has no fence")]
    NoFence,
    #[error("unknown level `{name}` (levels: {known})")]
    UnknownLevel { name: String, known: String },
    #[error("parameter `{key}`: {reason}")]
    InvalidParam { key: String, reason: String },
    #[error("no conversion plan reaches {goal}; also needs {}", if missing.is_empty() { "an input no registered conversion accepts".to_string() } else { format_sets(missing) })]
    NoPlan { goal: FormatId, missing: Vec<Vec<FormatId>> },
    #[error("step {step}: missing input {format}")]
    MissingInput { step: String, format: FormatId },
    #[error("step {step}: {source}")]
    Step { step: String, source: Box<ConvertError> },
    #[error("unknown conversion `{0}`")]
    UnknownConversion(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}
