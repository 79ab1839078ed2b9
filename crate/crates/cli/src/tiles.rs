//! Web-mercator tile ranges for a datum fence, plus a small fetch-and-stitch
//! client.

use std::f64::consts::PI;
use std::io::Read;

use image::{GenericImage, RgbaImage};
use mapforge::geo::Datum;
use thiserror::Error;

pub const MAX_ZOOM: u32 = 22;
/// Largest mosaic fetched in one call.
pub const MAX_TILES: usize = 256;
const MAX_LAT: f64 = 85.051_128_779_806_59;

#[derive(Debug, Error)]
pub enum TileError {
    #[error("datum has no fence")]
    NoFence,
    #[error("zoom {0} is outside 0-{MAX_ZOOM}")]
    ZoomOutOfRange(u32),
    #[error("provider template must contain {{z}}, {{x}} and {{y}}: {0}")]
    BadTemplate(String),
    #[error("fence covers {0} tiles, more than the {MAX_TILES} allowed; lower the zoom")]
    TooManyTiles(usize),
    #[error("networking is disabled (MAPFORGE_NO_NET=1)")]
    NetworkDisabled,
    #[error("{url}: {status}")]
    Network { url: String, status: String },
    #[error("{url}: cannot decode tile: {reason}")]
    Decode { url: String, reason: String },
    #[error("{url}: tile is {got:?}, expected {want:?}")]
    TileSize { url: String, got: (u32, u32), want: (u32, u32) },
}

/// Tile column holding `lon` at zoom `z`.
pub fn tile_x(lon: f64, z: u32) -> u32 {
    let n = (1u64 << z) as f64;
    (((lon + 180.0) / 360.0 * n).floor() as i64).clamp(0, n as i64 - 1) as u32
}

/// Tile row holding `lat` at zoom `z`; row 0 is the northern edge.
pub fn tile_y(lat: f64, z: u32) -> u32 {
    let n = (1u64 << z) as f64;
    let phi = lat.clamp(-MAX_LAT, MAX_LAT).to_radians();
    let y = (1.0 - (phi.tan() + 1.0 / phi.cos()).ln() / PI) / 2.0 * n;
    (y.floor() as i64).clamp(0, n as i64 - 1) as u32
}

fn tile_lon(x: u32, z: u32) -> f64 {
    x as f64 / (1u64 << z) as f64 * 360.0 - 180.0
}

fn tile_lat(y: u32, z: u32) -> f64 {
    let n = PI * (1.0 - 2.0 * y as f64 / (1u64 << z) as f64);
    n.sinh().atan().to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub north: f64,
    pub south: f64,
    pub east: f64,
    pub west: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileRange {
    pub zoom: u32,
    pub x: (u32, u32),
    pub y: (u32, u32),
}

impl TileRange {
    pub fn columns(&self) -> u32 {
        self.x.1 - self.x.0 + 1
    }

    pub fn rows(&self) -> u32 {
        self.y.1 - self.y.0 + 1
    }

    pub fn count(&self) -> usize {
        self.columns() as usize * self.rows() as usize
    }

    /// (x, y) pairs, row by row from the north.
    pub fn tiles(&self) -> Vec<(u32, u32)> {
        (self.y.0..=self.y.1).flat_map(|y| (self.x.0..=self.x.1).map(move |x| (x, y))).collect()
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            north: tile_lat(self.y.0, self.zoom),
            south: tile_lat(self.y.1 + 1, self.zoom),
            west: tile_lon(self.x.0, self.zoom),
            east: tile_lon(self.x.1 + 1, self.zoom),
        }
    }
}

/// Tiles covering the fence's bounding box.
pub fn tile_range(d: &Datum, zoom: u32) -> Result<TileRange, TileError> {
    if zoom > MAX_ZOOM {
        return Err(TileError::ZoomOutOfRange(zoom));
    }
    if d.fence.is_empty() {
        return Err(TileError::NoFence);
    }
    let lats = d.fence.iter().map(|p| p.latitude);
    let lons = d.fence.iter().map(|p| p.longitude);
    let (south, north) = lats.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (west, east) = lons.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    Ok(TileRange { zoom, x: (tile_x(west, zoom), tile_x(east, zoom)), y: (tile_y(north, zoom), tile_y(south, zoom)) })
}

pub fn tile_url(template: &str, z: u32, x: u32, y: u32) -> Result<String, TileError> {
    if !["{z}", "{x}", "{y}"].iter().all(|p| template.contains(p)) {
        return Err(TileError::BadTemplate(template.to_string()));
    }
    Ok(template.replace("{z}", &z.to_string()).replace("{x}", &x.to_string()).replace("{y}", &y.to_string()))
}

fn get_once(agent: &ureq::Agent, url: &str) -> Result<Vec<u8>, TileError> {
    let network = |status: String| TileError::Network { url: url.to_string(), status };
    match agent.get(url).call() {
        Ok(resp) => {
            let mut body = Vec::new();
            resp.into_reader().read_to_end(&mut body).map_err(|e| network(e.to_string()))?;
            Ok(body)
        }
        Err(ureq::Error::Status(code, resp)) => Err(network(format!("HTTP {code} {}", resp.status_text()))),
        Err(e) => Err(network(e.to_string())),
    }
}

/// GET with one retry.
fn fetch(agent: &ureq::Agent, url: &str) -> Result<Vec<u8>, TileError> {
    get_once(agent, url).or_else(|_| get_once(agent, url))
}

pub struct Mosaic {
    pub image: RgbaImage,
    pub bounds: Bounds,
    pub fetched: usize,
}

/// Downloads every tile of `range` and stitches them row by row.
pub fn fetch_mosaic(range: &TileRange, template: &str) -> Result<Mosaic, TileError> {
    if std::env::var("MAPFORGE_NO_NET").is_ok_and(|v| v == "1") {
        return Err(TileError::NetworkDisabled);
    }
    if range.count() > MAX_TILES {
        return Err(TileError::TooManyTiles(range.count()));
    }
    let agent = ureq::AgentBuilder::new().timeout(std::time::Duration::from_secs(30)).build();
    let mut canvas: Option<RgbaImage> = None;
    let mut size = (0, 0);
    for (x, y) in range.tiles() {
        let url = tile_url(template, range.zoom, x, y)?;
        let bytes = fetch(&agent, &url)?;
        let tile = image::load_from_memory(&bytes)
            .map_err(|e| TileError::Decode { url: url.clone(), reason: e.to_string() })?
            .to_rgba8();
        let canvas = canvas.get_or_insert_with(|| {
            size = tile.dimensions();
            RgbaImage::new(size.0 * range.columns(), size.1 * range.rows())
        });
        if tile.dimensions() != size {
            return Err(TileError::TileSize { url, got: tile.dimensions(), want: size });
        }
        let (cx, cy) = ((x - range.x.0) * size.0, (y - range.y.0) * size.1);
        canvas.copy_from(&tile, cx, cy).expect("tile fits the canvas");
    }
    Ok(Mosaic { image: canvas.expect("range is non-empty"), bounds: range.bounds(), fetched: range.count() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mapforge::geo::GeoPoint;

    #[test]
    fn known_tiles() {
        assert_eq!((tile_x(0.0, 0), tile_y(0.0, 0)), (0, 0));
        assert_eq!((tile_x(-0.0001, 1), tile_x(0.0001, 1)), (0, 1));
        assert_eq!(tile_y(85.0, 1), 0);
        assert_eq!(tile_y(-85.0, 1), 1);
        assert_eq!(tile_x(180.0, 3), 7);
    }

    #[test]
    fn bounds_contain_fence() {
        let fence = vec![GeoPoint::new(53.268, -0.5255).unwrap(), GeoPoint::new(53.2693, -0.5235).unwrap()];
        let d = Datum::new(fence[0]).with_fence(fence);
        let r = tile_range(&d, 17).unwrap();
        let b = r.bounds();
        assert!(b.south <= 53.268 && b.north >= 53.2693 && b.west <= -0.5255 && b.east >= -0.5235);
    }

    #[test]
    fn template_needs_all_placeholders() {
        assert!(matches!(tile_url("http://h/{z}/{x}.png", 1, 2, 3), Err(TileError::BadTemplate(_))));
        assert_eq!(tile_url("http://h/{z}/{x}/{y}.png", 1, 2, 3).unwrap(), "http://h/1/2/3.png");
    }
}
