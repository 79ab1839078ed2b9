//! Conversion and generation tools for robot environment maps.
//!
//! Geographic data lives in latitude-first [`geo::GeoPoint`]s; everything
//! metric lives in a local east-north-up frame anchored at a [`geo::Datum`].

use std::fmt;

pub mod convert;
pub mod detect;
pub mod envpkg;
pub mod formats;
pub mod geo;
pub mod procgen;
pub mod skeleton;

pub use detect::{detect_format, DetectError, FormatId};

/// A non-fatal diagnostic tied to a location in an input or pipeline step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub at: String,
    pub message: String,
}

impl Warning {
    pub fn new(at: impl Into<String>, message: impl Into<String>) -> Self {
        Warning { at: at.into(), message: message.into() }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.at, self.message)
    }
}
