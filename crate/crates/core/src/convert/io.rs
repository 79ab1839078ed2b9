//! Reading and writing artifacts on disk.

use std::fs;
use std::path::{Path, PathBuf};

use super::{Artifact, ConvertError};
use crate::detect::FormatId;
use crate::formats::{
    self, emit_datum, emit_kml, emit_navgraph, emit_occgrid, emit_openrmf, emit_osm, emit_topomap, parse_datum,
    parse_kml, parse_navgraph, parse_occgrid, parse_openrmf, parse_osm, parse_topomap, pgm, OsmMode,
};
use crate::procgen::TileGrid;
use crate::Warning;

fn io_err(path: &Path, e: impl std::fmt::Display) -> ConvertError {
    ConvertError::Io { path: path.display().to_string(), reason: e.to_string() }
}

fn read_text(path: &Path) -> Result<String, ConvertError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Wraps a parse error with the file it came from.
fn in_file<T>(path: &Path, r: Result<T, formats::FormatError>) -> Result<T, ConvertError> {
    r.map_err(|e| io_err(path, e))
}

/// Loads `path` as `format`. Occupancy grids are read from their properties
/// file; the image is resolved relative to it.
pub fn read_artifact(format: FormatId, path: &Path) -> Result<(Artifact, Vec<Warning>), ConvertError> {
    let mut warnings = Vec::new();
    let artifact = match format {
        FormatId::Datum => Artifact::Datum(in_file(path, parse_datum(&read_text(path)?))?),
        FormatId::TopoMap => Artifact::TopoMap(in_file(path, parse_topomap(&read_text(path)?))?),
        FormatId::NavGraph => {
            let (g, w) = in_file(path, parse_navgraph(&read_text(path)?))?;
            warnings = w;
            Artifact::NavGraph(g)
        }
        FormatId::Osm => {
            let (g, w) = in_file(path, parse_osm(&read_text(path)?, OsmMode::Strict))?;
            warnings = w;
            Artifact::Osm(g)
        }
        FormatId::OpenRmf => Artifact::OpenRmf(in_file(path, parse_openrmf(&read_text(path)?))?),
        FormatId::Kml => Artifact::Kml(in_file(path, parse_kml(&read_text(path)?))?),
        FormatId::OccGrid => {
            let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
            if pgm::is_pgm(&bytes) || pgm::is_png(&bytes) {
                return Err(io_err(path, "an occupancy image needs its properties YAML; pass that file instead"));
            }
            let meta = String::from_utf8(bytes).map_err(|e| io_err(path, e))?;
            let image = occgrid_image_path(path, &meta)?;
            let image_bytes = fs::read(&image).map_err(|e| io_err(&image, e))?;
            Artifact::OccGrid(in_file(path, parse_occgrid(&meta, &image_bytes))?)
        }
        FormatId::TileGrid => {
            let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
            Artifact::TileGrid(TileGrid::from_image(&bytes).map_err(|e| io_err(path, e))?)
        }
    };
    Ok((artifact, warnings))
}

/// Image path named by an occupancy properties file.
pub fn occgrid_image_path(meta_path: &Path, meta_text: &str) -> Result<PathBuf, ConvertError> {
    let doc: serde_yaml::Value = serde_yaml::from_str(meta_text).map_err(|e| io_err(meta_path, e))?;
    let name = doc
        .get("image")
        .and_then(formats::yaml::scalar_text)
        .ok_or_else(|| io_err(meta_path, "missing `image`"))?;
    let dir = meta_path.parent().unwrap_or(Path::new(""));
    Ok(dir.join(name))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), ConvertError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Writes `artifact` to `path`, returning every file written. An occupancy
/// grid's image goes beside its properties file as `<stem>.pgm`.
pub fn write_artifact(artifact: &Artifact, path: &Path) -> Result<Vec<PathBuf>, ConvertError> {
    let text = match artifact {
        Artifact::Datum(d) => emit_datum(d),
        Artifact::TopoMap(m) => emit_topomap(m),
        Artifact::NavGraph(g) => emit_navgraph(g),
        Artifact::Osm(g) => emit_osm(g),
        Artifact::OpenRmf(b) => emit_openrmf(b),
        Artifact::Kml(k) => emit_kml(k)?,
        Artifact::OccGrid(g) => {
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            if ext.eq_ignore_ascii_case("pgm") || ext.eq_ignore_ascii_case("png") {
                return Err(io_err(path, "name the properties file (.yaml); the image is written beside it"));
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("map");
            let mut g = g.clone();
            g.image_name = format!("{stem}.pgm");
            let (meta, image) = emit_occgrid(&g);
            let image_path = path.with_file_name(&g.image_name);
            write(path, meta)?;
            write(&image_path, image)?;
            return Ok(vec![path.to_path_buf(), image_path]);
        }
        Artifact::TileGrid(t) => {
            write(path, t.to_pgm())?;
            return Ok(vec![path.to_path_buf()]);
        }
    };
    write(path, text)?;
    Ok(vec![path.to_path_buf()])
}

/// Default file name for an artifact written into a directory.
pub fn default_file_name(format: FormatId) -> String {
    format!("{}.{}", format.name(), format.extension())
}
