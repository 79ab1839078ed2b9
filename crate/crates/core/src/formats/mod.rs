//! Parsers and emitters for the supported map file formats.
//!
//! Every parser reports failures with the position of the offending element:
//! a `line:column` for syntax errors, and a document path such as
//! `nodes[2].node.pose` for structural ones. Keys a parser does not interpret
//! are kept as opaque extras and written back out by the matching emitter.

pub mod datum;
pub mod kml;
pub mod navgraph;
pub mod occgrid;
pub mod openrmf;
pub mod osm;
pub mod pgm;
pub mod topomap;
pub(crate) mod yaml;

pub use datum::{emit_datum, parse_datum};
pub use kml::{emit_kml, parse_kml, Geometry, GroundOverlay, KmlDoc, KmlFeature, Placemark, Style};
pub use navgraph::{emit_navgraph, parse_navgraph, NavGraph, NavNode};
pub use occgrid::{
    classify_cell, emit_occgrid, parse_occgrid, CellClass, OccupancyGrid, Pose2D,
    DEFAULT_FREE_THRESH, DEFAULT_OCCUPIED_THRESH,
};
pub use openrmf::{emit_openrmf, parse_openrmf, RmfBuilding, RmfLane, RmfLevel, RmfVertex};
pub use osm::{emit_osm, parse_osm, OsmGraph, OsmMember, OsmMode, OsmNode, OsmRelation, OsmWay, Tag};
pub use topomap::{
    emit_topomap, parse_topomap, Orientation, Pose, TopoEdge, TopoNode, TopologicalMap,
    DEFAULT_ACTION, DEFAULT_RESTRICTIONS, DEFAULT_XY_TOLERANCE, DEFAULT_YAW_TOLERANCE,
};

use thiserror::Error;

use crate::geo::GeoError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("{at}: missing field `{key}`")]
    MissingField { key: String, at: String },
    #[error("{at}: invalid coordinate: {reason}")]
    InvalidCoordinate { reason: String, at: String },
    #[error("{at}: malformed document: {reason}")]
    MalformedDocument { reason: String, at: String },
    #[error("image/meta mismatch: {0}")]
    ImageMetaMismatch(String),
    #[error("unsupported image encoding: {0}")]
    UnsupportedImageEncoding(String),
    #[error("{at}: duplicate node `{name}`")]
    DuplicateNode { name: String, at: String },
    #[error("{at}: edge {from} -> {to} references a missing node")]
    DanglingEdge { from: String, to: String, at: String },
    #[error("{at}: connection references unknown node `{name}`")]
    UnknownNodeInConnection { name: String, at: String },
    #[error("{at}: connection joins `{name}` to itself")]
    SelfConnection { name: String, at: String },
    #[error("{at}: way {way} references unknown node {node_ref}")]
    DanglingNodeRef { way: String, node_ref: String, at: String },
    #[error("{at}: lane index {index} out of range for {len} vertices")]
    LaneIndexOutOfRange { index: usize, len: usize, at: String },
    #[error("{at}: style `{style}` is not defined")]
    UnstyledReference { style: String, at: String },
}

impl FormatError {
    pub(crate) fn malformed(at: impl Into<String>, reason: impl Into<String>) -> Self {
        FormatError::MalformedDocument { reason: reason.into(), at: at.into() }
    }

    pub(crate) fn missing(at: impl Into<String>, key: impl Into<String>) -> Self {
        FormatError::MissingField { key: key.into(), at: at.into() }
    }

    pub(crate) fn coordinate(at: impl Into<String>, err: GeoError) -> Self {
        FormatError::InvalidCoordinate { reason: err.to_string(), at: at.into() }
    }
}

/// Formats a float so it reads back to the identical value.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Line number (1-based) of a byte offset.
pub(crate) fn line_of(text: &str, offset: usize) -> usize {
    let end = offset.min(text.len());
    text.as_bytes()[..end].iter().filter(|b| **b == b'\n').count() + 1
}
