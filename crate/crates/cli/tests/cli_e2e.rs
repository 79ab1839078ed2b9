use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde_json::Value;
use tempfile::TempDir;

fn fixture(rel: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(rel);
    p.canonicalize().unwrap_or(p).display().to_string()
}

fn mapforge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mapforge"))
        .args(args)
        .current_dir(dir)
        .env_remove("MAPFORGE_NO_NET")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json_of(o: &Output) -> Value {
    let text = stdout(o);
    assert_eq!(text.lines().count(), 1, "one JSON document expected, got {text}");
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("bad JSON {text}: {e}"))
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let o = mapforge(dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));

    let o = mapforge(dir.path(), &["convert", "--to", "bogus", "--in", "x", "--out", "y"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));

    let o = mapforge(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    let dir = TempDir::new().unwrap();
    let o = mapforge(dir.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("fetch-tile"));
}

#[test]
fn convert_plans_from_detected_inputs() {
    let dir = TempDir::new().unwrap();
    let topo = fixture("topomap/riseholme.yaml");
    let datum = fixture("datum/riseholme.yaml");
    let o = mapforge(dir.path(), &["--json", "convert", "--to", "kml", "--in", &topo, "--datum", &datum, "--out", "route.kml"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json_of(&o);
    assert_eq!(v["steps"], serde_json::json!(["topomap_to_kml"]));
    assert!(stderr(&o).contains("topomap"), "detection is logged");
    let kml = std::fs::read_to_string(dir.path().join("route.kml")).unwrap();
    assert!(kml.contains("<kml"));
}

#[test]
fn convert_without_plan_names_missing_formats() {
    let dir = TempDir::new().unwrap();
    let topo = fixture("topomap/riseholme.yaml");
    let o = mapforge(dir.path(), &["--json", "convert", "--to", "kml", "--in", &topo, "--out", "route.kml"]);
    assert_eq!(o.status.code(), Some(1));
    let v = json_of(&o);
    let msg = v["error"].as_str().unwrap();
    assert!(msg.contains("datum") && msg.contains("osm"), "{msg}");
    assert!(!dir.path().join("route.kml").exists());
}

#[test]
fn convert_with_from_runs_one_direct_conversion() {
    let dir = TempDir::new().unwrap();
    let datum = fixture("datum/riseholme.yaml");
    // datum_to_kml is never planned but can be asked for directly
    let o = mapforge(dir.path(), &["convert", "--from", "datum", "--to", "kml", "--in", &datum, "--out", "fence.kml"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("datum_to_kml"));
    assert!(dir.path().join("fence.kml").is_file());

    let topo = fixture("topomap/riseholme.yaml");
    let o = mapforge(dir.path(), &["convert", "--from", "topomap", "--to", "kml", "--in", &topo, "--out", "x.kml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing inputs"), "{}", stderr(&o));

    let o = mapforge(dir.path(), &["convert", "--from", "kml", "--to", "osm", "--in", &topo, "--out", "x.osm"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn convert_reports_missing_file() {
    let dir = TempDir::new().unwrap();
    let o = mapforge(dir.path(), &["convert", "--to", "kml", "--in", "nope.yaml", "--out", "x.kml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.yaml"));
}

#[test]
fn pipeline_dry_run_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let osm = fixture("osm/five_way.osm");
    let o = mapforge(dir.path(), &["--json", "pipeline", "--goal", "navgraph", "--in", &osm, "--out-dir", "out", "--dry-run"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json_of(&o);
    assert_eq!(v["steps"], serde_json::json!(["datum_from_osm", "osm_to_topomap", "topomap_to_navgraph"]));
    assert_eq!(v["required_external_inputs"], serde_json::json!(["osm"]));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn pipeline_writes_every_produced_artifact() {
    let dir = TempDir::new().unwrap();
    let osm = fixture("osm/five_way.osm");
    let o = mapforge(dir.path(), &["pipeline", "--goal", "navgraph", "--in", &osm, "--out-dir", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["datum.yaml", "topomap.yaml", "navgraph.yaml"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
    // the written navgraph is readable again
    let nav = dir.path().join("out/navgraph.yaml").display().to_string();
    let o = mapforge(dir.path(), &["--json", "info", &nav]);
    let v = json_of(&o);
    assert_eq!(v["format"], "navgraph");
    assert_eq!(v["nodes"], 9);
}

#[test]
fn pipeline_requires_out_dir_unless_dry_run() {
    let dir = TempDir::new().unwrap();
    let osm = fixture("osm/five_way.osm");
    let o = mapforge(dir.path(), &["pipeline", "--goal", "navgraph", "--in", &osm]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generate_wfc_is_seed_deterministic() {
    let dir = TempDir::new().unwrap();
    let sample = fixture("tilegrid/warehouse.pgm");
    let gen = |prefix: &str, seed: &str| {
        let o = mapforge(
            dir.path(),
            &["generate", "wfc", "--sample", &sample, "--width", "24", "--height", "16", "--seed", seed, "--out", prefix],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(dir.path().join(format!("{prefix}.pgm"))).unwrap()
    };
    let a = gen("a", "7");
    let b = gen("b", "7");
    let c = gen("c", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);

    let meta = dir.path().join("a.yaml").display().to_string();
    let v = json_of(&mapforge(dir.path(), &["--json", "info", &meta]));
    assert_eq!(v["format"], "occgrid");
    assert_eq!((v["width"].as_u64(), v["height"].as_u64()), (Some(24), Some(16)));
    assert_eq!(v["image"], "a.pgm");
}

#[test]
fn generate_wfc_rejects_small_sample() {
    let dir = TempDir::new().unwrap();
    let sample = fixture("tilegrid/warehouse.pgm");
    let o = mapforge(dir.path(), &["generate", "wfc", "--sample", &sample, "--width", "8", "--height", "8", "--n", "40", "--out", "g"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("g.pgm").exists());
}

#[test]
fn grid2topo_extracts_plus() {
    let dir = TempDir::new().unwrap();
    let grid = fixture("occgrid/plus.yaml");
    let o = mapforge(dir.path(), &["--json", "grid2topo", "--in", &grid, "--out", "plus_topo.yaml", "--retain-paths"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json_of(&o);
    assert_eq!(v["nodes"], 5);
    let text = std::fs::read_to_string(dir.path().join("plus_topo.yaml")).unwrap();
    assert!(text.contains("path"));

    let o = mapforge(dir.path(), &["grid2topo", "--in", &grid, "--out", "x.yaml", "--merge-radius=-1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn scaffold_then_validate() {
    let dir = TempDir::new().unwrap();
    let o = mapforge(dir.path(), &["scaffold", "yard", "--path", "pkg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = mapforge(dir.path(), &["--json", "validate", "pkg"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_of(&o)["valid"], true);

    std::fs::write(dir.path().join("pkg/media/notes.txt"), "x").unwrap();
    let o = mapforge(dir.path(), &["--json", "validate", "pkg"]);
    assert_eq!(o.status.code(), Some(1));
    let v = json_of(&o);
    assert_eq!(v["valid"], false);
    assert_eq!(v["details"][0]["severity"], "error");

    let o = mapforge(dir.path(), &["validate", "pkg"]);
    assert!(stdout(&o).contains("issue[0]: error"));

    let o = mapforge(dir.path(), &["scaffold", "yard", "--path", "pkg"]);
    assert_eq!(o.status.code(), Some(1), "scaffold refuses a non-empty root");
}

#[test]
fn info_identifies_every_fixture_format() {
    let dir = TempDir::new().unwrap();
    for (rel, format) in [
        ("datum/riseholme.yaml", "datum"),
        ("occgrid/room.yaml", "occgrid"),
        ("topomap/pair.yaml", "topomap"),
        ("navgraph/warehouse.yaml", "navgraph"),
        ("osm/three.osm", "osm"),
        ("openrmf/office.building.yaml", "openrmf"),
        ("kml/point.kml", "kml"),
        ("tilegrid/checker.pgm", "occgrid"),
    ] {
        let p = fixture(rel);
        let o = mapforge(dir.path(), &["--json", "info", &p]);
        assert_eq!(o.status.code(), Some(0), "{rel}: {}", stderr(&o));
        assert_eq!(json_of(&o)["format"], format, "{rel}");
    }
    let o = mapforge(dir.path(), &["info", &fixture("datum/riseholme.yaml")]);
    assert!(stdout(&o).contains("origin: 53.268642, -0.524509"));

    std::fs::write(dir.path().join("mystery.bin"), [0u8, 1, 2, 3]).unwrap();
    let o = mapforge(dir.path(), &["info", "mystery.bin"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fetch_tile_offline_only_plans() {
    let dir = TempDir::new().unwrap();
    let datum = fixture("datum/riseholme.yaml");
    let o = mapforge(
        dir.path(),
        &["--json", "fetch-tile", "--datum", &datum, "--provider", "http://127.0.0.1:9/{z}/{x}/{y}.png", "--zoom", "17"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json_of(&o);
    assert_eq!(v["tiles"], 4);
    assert_eq!(v["fetched"], 0);
    assert_eq!(v["urls"][0], "http://127.0.0.1:9/17/65344/42533.png");

    let o = mapforge(dir.path(), &["fetch-tile", "--datum", &datum, "--provider", "http://h/{z}/{x}.png", "--zoom", "17"]);
    assert_eq!(o.status.code(), Some(1));
}

/// Serves a solid 8x8 PNG per tile; paths under /missing/ get a 404.
fn tile_server() -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            counter.fetch_add(1, Ordering::SeqCst);
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request = String::new();
            reader.read_line(&mut request).unwrap();
            let mut line = String::new();
            while reader.read_line(&mut line).is_ok_and(|n| n > 2) {
                line.clear();
            }
            let path = request.split_whitespace().nth(1).unwrap_or("/").to_string();
            if path.starts_with("/missing/") {
                let _ = stream.write_all(b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
                continue;
            }
            let x: u8 = path.rsplit('/').nth(1).and_then(|s| s.parse::<u32>().ok()).map_or(0, |v| (v % 256) as u8);
            let img = image::RgbaImage::from_pixel(8, 8, image::Rgba([x, 100, 200, 255]));
            let mut png = Vec::new();
            img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png).unwrap();
            let head = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: image/png\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                png.len()
            );
            let _ = stream.write_all(head.as_bytes());
            let _ = stream.write_all(&png);
        }
    });
    (base, hits)
}

#[test]
fn fetch_tile_online_stitches_mosaic() {
    let dir = TempDir::new().unwrap();
    let (base, hits) = tile_server();
    let datum = fixture("datum/riseholme.yaml");
    let provider = format!("{base}/{{z}}/{{x}}/{{y}}.png");
    let o = mapforge(
        dir.path(),
        &["--json", "fetch-tile", "--datum", &datum, "--provider", &provider, "--zoom", "17", "--online", "--out", "sat/mosaic.png"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json_of(&o);
    assert_eq!(v["fetched"], 4);
    assert_eq!(hits.load(Ordering::SeqCst), 4);
    let b = v["bounds"].as_array().unwrap();
    let (north, south) = (b[0].as_f64().unwrap(), b[1].as_f64().unwrap());
    assert!(north > 53.2693 && south < 53.268);

    let mosaic = image::open(dir.path().join("sat/mosaic.png")).unwrap().to_rgba8();
    assert_eq!(mosaic.dimensions(), (16, 16));
    // columns 65344 and 65345 land left and right
    assert_eq!(mosaic.get_pixel(0, 0)[0], (65344 % 256) as u8);
    assert_eq!(mosaic.get_pixel(15, 15)[0], (65345 % 256) as u8);
}

#[test]
fn fetch_tile_reports_http_errors() {
    let dir = TempDir::new().unwrap();
    let (base, _) = tile_server();
    let datum = fixture("datum/riseholme.yaml");
    let provider = format!("{base}/missing/{{z}}/{{x}}/{{y}}.png");
    let o = mapforge(dir.path(), &["fetch-tile", "--datum", &datum, "--provider", &provider, "--zoom", "17", "--online", "--out", "m.png"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("404"), "{}", stderr(&o));
    assert!(!dir.path().join("m.png").exists());
}

#[test]
fn no_net_blocks_online_fetch() {
    let dir = TempDir::new().unwrap();
    let datum = fixture("datum/riseholme.yaml");
    let o = Command::new(env!("CARGO_BIN_EXE_mapforge"))
        .args(["--json", "fetch-tile", "--datum", &datum, "--provider", "http://127.0.0.1:9/{z}/{x}/{y}.png", "--zoom", "17", "--online"])
        .current_dir(dir.path())
        .env("MAPFORGE_NO_NET", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(json_of(&o)["error"].as_str().unwrap().contains("MAPFORGE_NO_NET"));
}

#[test]
fn run_is_callable_in_process() {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let p: PathBuf = fixture("kml/styled.kml").into();
    let code = mapforge_cli::run(["mapforge", "info", p.to_str().unwrap()], &mut out, &mut err);
    assert_eq!(code, 0);
    assert!(String::from_utf8(out).unwrap().contains("format: kml"));
}
