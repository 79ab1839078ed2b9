//! The `mapforge` command line.
//!
//! Exit codes: 0 success, 1 validation or conversion failure, 2 usage error.
//! Results go to stdout as `key: value` lines, or as one JSON document with
//! `--json`; diagnostics go to stderr.

pub mod tiles;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mapforge::convert::io::{default_file_name, read_artifact, write_artifact};
use mapforge::convert::{
    plan_pipeline, planning_registry, registry, run_pipeline, Artifact, ConversionPlan, Inputs, Params,
};
use mapforge::envpkg::{scaffold, validate, Severity};
use mapforge::formats::pgm;
use mapforge::procgen::{extract_patterns, tilegrid_to_occgrid, wfc_generate, PatternOpts, TileGrid};
use mapforge::{detect_format, FormatId, Warning};

#[derive(Parser, Debug)]
#[command(name = "mapforge", version, about = "Convert, generate and package robot environment maps")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Print results as a single JSON document.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

fn format_arg(s: &str) -> Result<FormatId, String> {
    s.parse().map_err(|e: mapforge::DetectError| e.to_string())
}

fn param_arg(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(format!("`{s}` is not key=value")),
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert inputs to one format, directly or through a planned pipeline.
    Convert(ConvertArgs),
    /// Plan (and run) the conversions that produce a goal format.
    Pipeline(PipelineArgs),
    /// Generate maps procedurally.
    #[command(subcommand)]
    Generate(Generate),
    /// Extract a topological map from an occupancy grid.
    Grid2topo(Grid2TopoArgs),
    /// Create an environment package.
    Scaffold {
        name: String,
        #[arg(long)]
        path: PathBuf,
    },
    /// Check an environment package.
    Validate { dir: PathBuf },
    /// Identify a file and summarise its contents.
    Info { path: PathBuf },
    /// Plan or fetch the satellite tiles covering a datum fence.
    FetchTile(FetchArgs),
}

#[derive(Args, Debug)]
struct ConvertArgs {
    /// Source format; skips detection and planning.
    #[arg(long, value_parser = format_arg)]
    from: Option<FormatId>,
    #[arg(long, value_parser = format_arg)]
    to: FormatId,
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    datum: Option<PathBuf>,
    #[arg(long = "param", value_parser = param_arg)]
    params: Vec<(String, String)>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[arg(long, value_parser = format_arg)]
    goal: FormatId,
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    dry_run: bool,
    #[arg(long = "param", value_parser = param_arg)]
    params: Vec<(String, String)>,
}

#[derive(Subcommand, Debug)]
enum Generate {
    /// Wave function collapse from a sample image.
    Wfc(WfcArgs),
}

#[derive(Args, Debug)]
struct WfcArgs {
    #[arg(long)]
    sample: PathBuf,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Meters per cell of the written grid.
    #[arg(long, default_value_t = 0.5)]
    resolution: f64,
    /// Writes `<out>.yaml` and `<out>.pgm`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Unknown {
    Occupied,
    Free,
}

#[derive(Args, Debug)]
struct Grid2TopoArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    merge_radius: f64,
    #[arg(long, value_enum, default_value = "occupied")]
    unknown: Unknown,
    /// Keep each edge's traced polyline.
    #[arg(long)]
    retain_paths: bool,
    /// Simplification tolerance in meters for kept polylines.
    #[arg(long)]
    simplify: Option<f64>,
}

#[derive(Args, Debug)]
struct FetchArgs {
    #[arg(long)]
    datum: PathBuf,
    /// URL template with {z}, {x} and {y}.
    #[arg(long)]
    provider: String,
    #[arg(long)]
    zoom: u32,
    /// Allow network access; without it only the tile plan is printed.
    #[arg(long)]
    online: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::new(e.to_string())
    }
}

/// Ordered result fields, printed as text lines or one JSON object.
#[derive(Default)]
struct Report {
    fields: Vec<(String, Value)>,
    json_only: Vec<(String, Value)>,
    text_only: Vec<(String, Value)>,
    warnings: Vec<String>,
}

impl Report {
    fn put(&mut self, key: &str, value: impl Into<Value>) {
        self.fields.push((key.to_string(), value.into()));
    }

    fn put_json(&mut self, key: &str, value: impl Into<Value>) {
        self.json_only.push((key.to_string(), value.into()));
    }

    fn put_text(&mut self, key: &str, value: impl Into<Value>) {
        self.text_only.push((key.to_string(), value.into()));
    }

    fn warn(&mut self, w: impl std::fmt::Display) {
        self.warnings.push(w.to_string());
    }

    fn warn_all(&mut self, ws: &[Warning]) {
        for w in ws {
            self.warn(w);
        }
    }
}

fn text_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(text_value).collect::<Vec<_>>().join(", "),
        other => other.to_string(),
    }
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    let json = cli.json;
    let mut report = Report::default();
    let result = dispatch(cli.command, &mut report, err);
    for w in &report.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    match result {
        Ok(code) => {
            if json {
                let mut obj = serde_json::Map::new();
                for (k, v) in report.fields.iter().chain(&report.json_only) {
                    obj.insert(k.clone(), v.clone());
                }
                obj.insert("warnings".into(), json!(report.warnings));
                let _ = writeln!(out, "{}", Value::Object(obj));
            } else {
                for (k, v) in report.fields.iter().chain(&report.text_only) {
                    let _ = writeln!(out, "{k}: {}", text_value(v));
                }
            }
            code
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            if json {
                let _ = writeln!(out, "{}", json!({ "error": f.message, "exit_code": f.code }));
            }
            f.code
        }
    }
}

fn dispatch(command: Command, report: &mut Report, err: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Convert(a) => convert(a, report, err),
        Command::Pipeline(a) => pipeline(a, report, err),
        Command::Generate(Generate::Wfc(a)) => generate_wfc(a, report),
        Command::Grid2topo(a) => grid2topo(a, report),
        Command::Scaffold { name, path } => {
            let pkg = scaffold(&name, &path)?;
            report.put("root", pkg.root.display().to_string());
            report.put("exports", pkg.exports.len());
            Ok(0)
        }
        Command::Validate { dir } => validate_cmd(&dir, report),
        Command::Info { path } => info(&path, report),
        Command::FetchTile(a) => fetch_tile(a, report),
    }
}

fn require_files(paths: &[&Path]) -> Result<(), Failure> {
    for p in paths {
        if !p.is_file() {
            return Err(Failure::new(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}

/// Detects and loads each input; formats must not repeat.
fn load_detected(paths: &[PathBuf], report: &mut Report, err: &mut dyn Write) -> Result<Inputs, Failure> {
    let mut inputs = Inputs::new();
    for p in paths {
        let bytes = fs::read(p).map_err(|e| Failure::new(format!("{}: {e}", p.display())))?;
        let name = p.file_name().and_then(|n| n.to_str());
        let format = detect_format(&bytes, name).map_err(|e| Failure::new(format!("{}: {e}", p.display())))?;
        let _ = writeln!(err, "detected {}: {format}", p.display());
        let (artifact, warnings) = read_artifact(format, p)?;
        report.warn_all(&warnings);
        if inputs.insert(format, artifact).is_some() {
            return Err(Failure::new(format!("more than one {format} input")));
        }
    }
    Ok(inputs)
}

fn params_of(pairs: Vec<(String, String)>) -> Params {
    pairs.into_iter().collect()
}

fn plan_json(plan: &ConversionPlan) -> Vec<(&'static str, Value)> {
    let names = |s: &BTreeSet<FormatId>| s.iter().map(|f| f.name()).collect::<Vec<_>>();
    vec![
        ("steps", json!(plan.steps)),
        ("required_external_inputs", json!(names(&plan.required_external_inputs))),
        ("produced", json!(names(&plan.produced))),
    ]
}

fn convert(a: ConvertArgs, report: &mut Report, err: &mut dyn Write) -> Result<i32, Failure> {
    let mut paths: Vec<&Path> = a.inputs.iter().map(PathBuf::as_path).collect();
    paths.extend(a.datum.as_deref());
    require_files(&paths)?;
    let params = params_of(a.params);

    let (artifact, steps) = match a.from {
        Some(from) => {
            let mut inputs = Inputs::new();
            let (first, w) = read_artifact(from, &a.inputs[0])?;
            report.warn_all(&w);
            inputs.insert(from, first);
            if a.inputs.len() > 1 {
                let rest = load_detected(&a.inputs[1..], report, err)?;
                inputs.extend(rest);
            }
            if let Some(d) = &a.datum {
                let (datum, _) = read_artifact(FormatId::Datum, d)?;
                inputs.insert(FormatId::Datum, datum);
            }
            let conversion = registry()
                .iter()
                .find(|c| c.output == a.to && c.inputs.contains(&from) && c.inputs.iter().all(|f| inputs.contains_key(f)))
                .ok_or_else(|| {
                    let needs: Vec<String> = registry()
                        .iter()
                        .filter(|c| c.output == a.to && c.inputs.contains(&from))
                        .map(|c| format!("{} (needs {})", c.id, c.inputs.iter().map(|f| f.name()).collect::<Vec<_>>().join(" + ")))
                        .collect();
                    if needs.is_empty() {
                        Failure::new(format!("no direct conversion from {from} to {}; omit --from to plan one", a.to))
                    } else {
                        Failure::new(format!("missing inputs for {}", needs.join(", ")))
                    }
                })?;
            let (artifact, w) = conversion.run(&inputs, &params)?;
            report.warn_all(&w);
            (artifact, vec![conversion.id.to_string()])
        }
        None => {
            let mut inputs = load_detected(&a.inputs, report, err)?;
            if let Some(d) = &a.datum {
                let (datum, _) = read_artifact(FormatId::Datum, d)?;
                inputs.insert(FormatId::Datum, datum);
            }
            let have: BTreeSet<FormatId> = inputs.keys().copied().collect();
            let plan = plan_pipeline(&have, a.to, &planning_registry())?;
            let _ = writeln!(err, "plan: {}", if plan.is_empty() { "(none)".into() } else { plan.steps.join(" -> ") });
            let mut out = run_pipeline(&plan, inputs, &params)?;
            report.warn_all(&out.warnings);
            (out.artifacts.remove(&a.to).expect("plan produces its goal"), plan.steps)
        }
    };
    let written = write_artifact(&artifact, &a.out)?;
    report.put("format", a.to.name());
    report.put("steps", steps);
    report.put("written", written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>());
    Ok(0)
}

fn pipeline(a: PipelineArgs, report: &mut Report, err: &mut dyn Write) -> Result<i32, Failure> {
    let paths: Vec<&Path> = a.inputs.iter().map(PathBuf::as_path).collect();
    require_files(&paths)?;
    if !a.dry_run && a.out_dir.is_none() {
        return Err(Failure { code: 2, message: "--out-dir is required unless --dry-run is given".into() });
    }
    let inputs = load_detected(&a.inputs, report, err)?;
    let have: BTreeSet<FormatId> = inputs.keys().copied().collect();
    let plan = plan_pipeline(&have, a.goal, &planning_registry())?;
    report.put("goal", a.goal.name());
    for (k, v) in plan_json(&plan) {
        report.put(k, v);
    }
    if a.dry_run {
        return Ok(0);
    }
    let out_dir = a.out_dir.expect("checked above");
    let out = run_pipeline(&plan, inputs, &params_of(a.params))?;
    report.warn_all(&out.warnings);
    let mut written = Vec::new();
    for f in &plan.produced {
        let path = out_dir.join(default_file_name(*f));
        written.extend(write_artifact(&out.artifacts[f], &path)?);
    }
    report.put("written", written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>());
    Ok(0)
}

fn generate_wfc(a: WfcArgs, report: &mut Report) -> Result<i32, Failure> {
    require_files(&[&a.sample])?;
    let bytes = fs::read(&a.sample)?;
    let sample = TileGrid::from_image(&bytes).map_err(|e| Failure::new(format!("{}: {e}", a.sample.display())))?;
    let ps = extract_patterns(&sample, a.n, PatternOpts::default())?;
    let out = wfc_generate(&ps, a.width, a.height, a.seed, a.restarts)?;
    let mut grid = tilegrid_to_occgrid(&out.grid, a.resolution)?;
    let meta = a.out.with_extension("yaml");
    grid.image_name = format!("{}.pgm", meta.file_stem().and_then(|s| s.to_str()).unwrap_or("map"));
    let written = write_artifact(&Artifact::OccGrid(grid), &meta)?;
    report.put("patterns", ps.len());
    report.put("restarts", out.restarts);
    report.put("seed", a.seed);
    report.put("written", written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>());
    Ok(0)
}

fn grid2topo(a: Grid2TopoArgs, report: &mut Report) -> Result<i32, Failure> {
    require_files(&[&a.input])?;
    let (grid, _) = read_artifact(FormatId::OccGrid, &a.input)?;
    let mut params = Params::new();
    params.insert("merge_radius".into(), a.merge_radius.to_string());
    let unknown = match a.unknown {
        Unknown::Occupied => "occupied",
        Unknown::Free => "free",
    };
    params.insert("unknown".into(), unknown.into());
    params.insert("retain_paths".into(), a.retain_paths.to_string());
    if let Some(s) = a.simplify {
        params.insert("simplify".into(), s.to_string());
    }
    let conversion = registry().iter().find(|c| c.id == "grid_to_topomap").expect("registered");
    let (artifact, warnings) = conversion.run(&Inputs::from([(FormatId::OccGrid, grid)]), &params)?;
    report.warn_all(&warnings);
    if let Artifact::TopoMap(m) = &artifact {
        report.put("nodes", m.nodes.len());
        report.put("edges", m.edges.len());
    }
    let written = write_artifact(&artifact, &a.out)?;
    report.put("written", written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>());
    Ok(0)
}

fn validate_cmd(dir: &Path, report: &mut Report) -> Result<i32, Failure> {
    let r = validate(dir)?;
    let mut errors = 0;
    let issues: Vec<Value> = r
        .issues
        .iter()
        .map(|i| {
            let severity = match i.severity() {
                Severity::Error => {
                    errors += 1;
                    "error"
                }
                Severity::Advisory => "advisory",
            };
            json!({ "severity": severity, "message": i.to_string() })
        })
        .collect();
    report.put("valid", errors == 0);
    report.put("issues", issues.len());
    for (n, i) in r.issues.iter().enumerate() {
        let sev = if i.severity() == Severity::Error { "error" } else { "advisory" };
        report.put_text(&format!("issue[{n}]"), format!("{sev}: {i}"));
    }
    report.put_json("details", Value::Array(issues));
    Ok(if errors == 0 { 0 } else { 1 })
}

fn info(path: &Path, report: &mut Report) -> Result<i32, Failure> {
    require_files(&[path])?;
    let bytes = fs::read(path)?;
    let name = path.file_name().and_then(|n| n.to_str());
    let format = detect_format(&bytes, name).map_err(|e| Failure::new(format!("{}: {e}", path.display())))?;
    report.put("path", path.display().to_string());
    report.put("format", format.name());
    if pgm::is_pgm(&bytes) || pgm::is_png(&bytes) {
        let img = pgm::decode_image(&bytes)?;
        report.put("kind", "image");
        report.put("width", img.width);
        report.put("height", img.height);
        return Ok(0);
    }
    let (artifact, warnings) = read_artifact(format, path)?;
    report.warn_all(&warnings);
    match artifact {
        Artifact::Datum(d) => {
            report.put("origin", json!([d.origin.latitude, d.origin.longitude, d.origin.elevation]));
            report.put("fence_vertices", d.fence.len());
        }
        Artifact::OccGrid(g) => {
            report.put("width", g.width);
            report.put("height", g.height);
            report.put("resolution", g.resolution);
            report.put("origin", json!([g.origin.position.x, g.origin.position.y, g.origin.yaw]));
            report.put("image", g.image_name);
        }
        Artifact::TopoMap(m) => {
            report.put("name", m.name.clone());
            report.put("nodes", m.nodes.len());
            report.put("edges", m.edges.len());
        }
        Artifact::NavGraph(g) => {
            report.put("nodes", g.nodes.len());
            report.put("connections", g.connections.len());
        }
        Artifact::Osm(g) => {
            report.put("nodes", g.nodes.len());
            report.put("ways", g.ways.len());
            report.put("relations", g.relations.len());
        }
        Artifact::OpenRmf(b) => {
            report.put("levels", b.levels.keys().cloned().collect::<Vec<_>>());
            report.put("vertices", b.levels.values().map(|l| l.vertices.len()).sum::<usize>());
            report.put("lanes", b.levels.values().map(|l| l.lanes.len()).sum::<usize>());
        }
        Artifact::Kml(k) => {
            report.put("name", k.name.clone());
            report.put("placemarks", k.placemarks().count());
            report.put("points", k.point_count());
        }
        Artifact::TileGrid(t) => {
            report.put("width", t.width);
            report.put("height", t.height);
        }
    }
    Ok(0)
}

fn fetch_tile(a: FetchArgs, report: &mut Report) -> Result<i32, Failure> {
    require_files(&[&a.datum])?;
    let datum = match read_artifact(FormatId::Datum, &a.datum)?.0 {
        Artifact::Datum(d) => d,
        _ => unreachable!("read as datum"),
    };
    let range = tiles::tile_range(&datum, a.zoom)?;
    let urls = range
        .tiles()
        .into_iter()
        .map(|(x, y)| tiles::tile_url(&a.provider, a.zoom, x, y))
        .collect::<Result<Vec<_>, _>>()?;
    report.put("zoom", a.zoom);
    report.put("tiles", range.count());
    report.put("columns", range.columns());
    report.put("rows", range.rows());
    if !a.online {
        let b = range.bounds();
        report.put("bounds", json!([b.north, b.south, b.east, b.west]));
        report.put("urls", urls);
        report.put("fetched", 0);
        return Ok(0);
    }
    let mosaic = tiles::fetch_mosaic(&range, &a.provider)?;
    let b = mosaic.bounds;
    report.put("bounds", json!([b.north, b.south, b.east, b.west]));
    report.put("fetched", mosaic.fetched);
    report.put("width", mosaic.image.width());
    report.put("height", mosaic.image.height());
    if let Some(out) = &a.out {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        mosaic.image.save_with_format(out, image::ImageFormat::Png)?;
        report.put("written", vec![out.display().to_string()]);
    }
    Ok(0)
}
