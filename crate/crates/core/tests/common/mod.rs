#![allow(dead_code)]

use std::path::PathBuf;

use mapforge::convert::io::read_artifact;
use mapforge::convert::Artifact;
use mapforge::FormatId;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn fixture_text(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap()
}

/// Every fixture file of a format; occupancy grids are listed by their
/// properties file.
pub fn fixtures_of(format: FormatId) -> Vec<PathBuf> {
    let dir = fixture(format.name());
    let mut out: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| format != FormatId::OccGrid || p.extension().is_some_and(|e| e == "yaml"))
        .collect();
    out.sort();
    out
}

/// One schema-valid artifact per format.
pub fn sample(format: FormatId) -> Artifact {
    let rel = match format {
        FormatId::Datum => "datum/riseholme.yaml",
        FormatId::OccGrid => "occgrid/plus.yaml",
        FormatId::TopoMap => "topomap/riseholme.yaml",
        FormatId::NavGraph => "navgraph/warehouse.yaml",
        FormatId::Osm => "osm/five_way.osm",
        FormatId::OpenRmf => "openrmf/office.building.yaml",
        FormatId::Kml => "kml/styled.kml",
        FormatId::TileGrid => "tilegrid/warehouse.pgm",
    };
    read_artifact(format, &fixture(rel)).unwrap().0
}
