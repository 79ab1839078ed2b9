//! Occupancy grids: a ROS map-server style YAML properties file plus a raster.
//!
//! In memory the raster is map-oriented: row 0 holds the cells with the
//! smallest `y`. Image files store the top (largest `y`) row first, so the
//! rows are flipped exactly once, here, when decoding and encoding images.

use serde_yaml::{Mapping, Value};

use super::pgm::{self, GrayImage};
use super::yaml::{self, At};
use super::FormatError;
use crate::geo::LocalPoint;

pub const DEFAULT_OCCUPIED_THRESH: f64 = 0.65;
pub const DEFAULT_FREE_THRESH: f64 = 0.196;

const KNOWN: &[&str] = &["image", "resolution", "origin", "negate", "occupied_thresh", "free_thresh"];

/// Planar pose: position plus heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    pub position: LocalPoint,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Occupied,
    Free,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub width: usize,
    pub height: usize,
    /// Meters per cell.
    pub resolution: f64,
    /// Pose of the outer corner of cell (0, 0).
    pub origin: Pose2D,
    /// Row-major, row 0 = minimum y.
    pub cells: Vec<u8>,
    pub occupied_thresh: f64,
    pub free_thresh: f64,
    pub negate: bool,
    pub image_name: String,
    /// Header comment of the source image, re-emitted verbatim.
    pub image_comment: Option<String>,
    pub extras: Mapping,
}

impl OccupancyGrid {
    /// A grid with the usual map-server thresholds and an origin at (0, 0, 0).
    pub fn new(width: usize, height: usize, resolution: f64, cells: Vec<u8>) -> Self {
        OccupancyGrid {
            width,
            height,
            resolution,
            origin: Pose2D::default(),
            cells,
            occupied_thresh: DEFAULT_OCCUPIED_THRESH,
            free_thresh: DEFAULT_FREE_THRESH,
            negate: false,
            image_name: "map.pgm".to_string(),
            image_comment: None,
            extras: Mapping::new(),
        }
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        if self.cells.len() != self.width * self.height {
            return Err(FormatError::ImageMetaMismatch(format!(
                "{}x{} grid holds {} cells",
                self.width,
                self.height,
                self.cells.len()
            )));
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(FormatError::malformed("resolution", "resolution must be positive"));
        }
        if !(0.0 <= self.free_thresh
            && self.free_thresh < self.occupied_thresh
            && self.occupied_thresh <= 1.0)
        {
            return Err(FormatError::malformed(
                "occupied_thresh",
                format!(
                    "thresholds must satisfy 0 <= free ({}) < occupied ({}) <= 1",
                    self.free_thresh, self.occupied_thresh
                ),
            ));
        }
        if !self.origin.position.is_finite() || !self.origin.yaw.is_finite() {
            return Err(FormatError::malformed("origin", "origin must be finite"));
        }
        Ok(())
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn classify(&self, index: usize) -> Option<CellClass> {
        classify_cell(self, index)
    }

    /// Local-frame position of the centre of cell (`col`, `row`).
    pub fn cell_center(&self, col: f64, row: f64) -> LocalPoint {
        let u = (col + 0.5) * self.resolution;
        let v = (row + 0.5) * self.resolution;
        let (s, c) = self.origin.yaw.sin_cos();
        LocalPoint {
            x: self.origin.position.x + c * u - s * v,
            y: self.origin.position.y + s * u + c * v,
            z: self.origin.position.z,
        }
    }
}

/// Occupancy probability of a pixel value under the map-server convention.
pub fn occupancy_probability(value: u8, negate: bool) -> f64 {
    if negate {
        value as f64 / 255.0
    } else {
        (255 - value) as f64 / 255.0
    }
}

/// Classifies a cell; `None` when the index is outside the grid.
pub fn classify_cell(grid: &OccupancyGrid, index: usize) -> Option<CellClass> {
    let v = *grid.cells.get(index)?;
    let p = occupancy_probability(v, grid.negate);
    Some(if p > grid.occupied_thresh {
        CellClass::Occupied
    } else if p < grid.free_thresh {
        CellClass::Free
    } else {
        CellClass::Unknown
    })
}

pub(crate) fn flip_rows(pixels: &[u8], width: usize, height: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(pixels.len());
    for row in (0..height).rev() {
        out.extend_from_slice(&pixels[row * width..(row + 1) * width]);
    }
    out
}

pub fn parse_occgrid(meta_text: &str, image_bytes: &[u8]) -> Result<OccupancyGrid, FormatError> {
    let root = yaml::load(meta_text)?;
    let doc = At::root(&root);
    doc.mapping()?;
    let image_name = doc.req("image")?.text()?;
    let resolution = doc.req("resolution")?.f64()?;
    let origin_at = doc.req("origin")?;
    let o = origin_at.seq()?;
    if o.len() != 3 {
        return Err(FormatError::malformed(origin_at.path(), "origin must be [x, y, yaw]"));
    }
    let origin = Pose2D { position: LocalPoint::xy(o[0].f64()?, o[1].f64()?), yaw: o[2].f64()? };
    let negate = match doc.get_present("negate")? {
        Some(n) => n.flag()?,
        None => false,
    };
    let occupied_thresh = match doc.get_present("occupied_thresh")? {
        Some(v) => v.f64()?,
        None => DEFAULT_OCCUPIED_THRESH,
    };
    let free_thresh = match doc.get_present("free_thresh")? {
        Some(v) => v.f64()?,
        None => DEFAULT_FREE_THRESH,
    };

    let img = pgm::decode_image(image_bytes)?;
    let grid = OccupancyGrid {
        width: img.width,
        height: img.height,
        resolution,
        origin,
        cells: flip_rows(&img.pixels, img.width, img.height),
        occupied_thresh,
        free_thresh,
        negate,
        image_name,
        image_comment: img.comment,
        extras: doc.extras(KNOWN)?,
    };
    grid.validate()?;
    Ok(grid)
}

/// Name the raster is written under: the declared name with a `.pgm` extension.
pub fn pgm_image_name(name: &str) -> String {
    match name.rsplit_once('.') {
        Some((stem, ext)) if !ext.eq_ignore_ascii_case("pgm") && !stem.is_empty() => format!("{stem}.pgm"),
        Some(_) => name.to_string(),
        None => format!("{name}.pgm"),
    }
}

/// Returns the properties text and the P5 image bytes. PNG sources are
/// re-encoded as PGM and the image name's extension updated to match.
pub fn emit_occgrid(grid: &OccupancyGrid) -> (String, Vec<u8>) {
    let mut m = Mapping::new();
    m.insert(yaml::key("image"), yaml::string(&pgm_image_name(&grid.image_name)));
    m.insert(yaml::key("resolution"), yaml::num(grid.resolution));
    m.insert(
        yaml::key("origin"),
        Value::Sequence(vec![
            yaml::num(grid.origin.position.x),
            yaml::num(grid.origin.position.y),
            yaml::num(grid.origin.yaw),
        ]),
    );
    m.insert(yaml::key("negate"), Value::Number(u8::from(grid.negate).into()));
    m.insert(yaml::key("occupied_thresh"), yaml::num(grid.occupied_thresh));
    m.insert(yaml::key("free_thresh"), yaml::num(grid.free_thresh));
    for (k, v) in &grid.extras {
        m.insert(k.clone(), v.clone());
    }
    let meta = yaml::dump(&Value::Mapping(m), "occupancy grid properties");
    let image = pgm::encode_pgm(&GrayImage {
        width: grid.width,
        height: grid.height,
        pixels: flip_rows(&grid.cells, grid.width, grid.height),
        comment: grid.image_comment.clone(),
    });
    (meta, image)
}
