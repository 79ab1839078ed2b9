//! Environment packages: a directory per data category plus an
//! `environment.sh` exporting one variable per file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::detect::{detect_format, FormatId};
use crate::formats::{emit_datum, pgm};
use crate::geo::Datum;

pub const CATEGORIES: [&str; 6] = ["location", "objects", "occupancy", "topology", "simulation", "media"];
pub const SOURCE_FILE: &str = "environment.sh";
pub const MANIFEST_FILE: &str = "package.xml";
pub const USER_BEGIN: &str = "# --- user ---";
pub const USER_END: &str = "# --- end user ---";
const ROOT_VAR: &str = "ENV_ROOT";
const STUB_DATUM: &str = "location/datum.yaml";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("{0} exists and is not empty")]
    RootNotEmpty(String),
    #[error("{0} is not an environment package (no {SOURCE_FILE} or {MANIFEST_FILE})")]
    NotAPackage(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("invalid file name `{0}`")]
    InvalidFileName(String),
}

fn io_err(path: &Path, e: impl fmt::Display) -> EnvError {
    EnvError::Io { path: path.display().to_string(), reason: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvironmentPackage {
    pub root: PathBuf,
    /// Category → files relative to the root, sorted.
    pub files: BTreeMap<String, Vec<String>>,
    /// Variable → path relative to the root, as exported by `environment.sh`.
    pub exports: BTreeMap<String, String>,
}

impl EnvironmentPackage {
    pub fn load(root: &Path) -> Result<Self, EnvError> {
        ensure_package(root)?;
        let exports = match fs::read_to_string(root.join(SOURCE_FILE)) {
            Ok(text) => parse_exports(&text).into_iter().collect(),
            Err(_) => BTreeMap::new(),
        };
        Ok(EnvironmentPackage { root: root.to_path_buf(), files: scan(root)?, exports })
    }
}

fn ensure_package(root: &Path) -> Result<(), EnvError> {
    if root.join(SOURCE_FILE).is_file() || root.join(MANIFEST_FILE).is_file() {
        Ok(())
    } else {
        Err(EnvError::NotAPackage(root.display().to_string()))
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn manifest(name: &str) -> String {
    let name = xml_escape(name);
    format!(
        "<?xml version=\"1.0\"?>\n<package format=\"3\">\n  <name>{name}</name>\n  <version>0.0.0</version>\n  \
         <description>Environment package {name}</description>\n  <maintainer email=\"nobody@example.com\">nobody</maintainer>\n  \
         <license>TODO</license>\n  <export>\n    <build_type>ament_cmake</build_type>\n  </export>\n</package>\n"
    )
}

/// Creates the category directories, a stub datum, the manifest and the
/// source file. `root` must be absent or empty.
pub fn scaffold(name: &str, root: &Path) -> Result<EnvironmentPackage, EnvError> {
    if root.exists() {
        let mut entries = fs::read_dir(root).map_err(|e| io_err(root, e))?;
        if entries.next().is_some() {
            return Err(EnvError::RootNotEmpty(root.display().to_string()));
        }
    }
    for cat in CATEGORIES {
        let dir = root.join(cat);
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    }
    let stub = root.join(STUB_DATUM);
    fs::write(&stub, emit_datum(&Datum::default())).map_err(|e| io_err(&stub, e))?;
    let m = root.join(MANIFEST_FILE);
    fs::write(&m, manifest(name)).map_err(|e| io_err(&m, e))?;
    regenerate_exports(root)?;
    EnvironmentPackage::load(root)
}

fn walk(dir: &Path, base: &Path, out: &mut Vec<String>) -> Result<(), EnvError> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .collect::<Result<_, _>>()
        .map_err(|e| io_err(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        if e.file_name().to_string_lossy().starts_with('.') {
            continue;
        }
        let path = e.path();
        if path.is_dir() {
            walk(&path, base, out)?;
        } else if path.is_file() {
            let rel = path.strip_prefix(base).expect("walked path is under base");
            let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            out.push(parts.join("/"));
        }
    }
    Ok(())
}

/// Files under each category directory, skipping dotfiles.
fn scan(root: &Path) -> Result<BTreeMap<String, Vec<String>>, EnvError> {
    let mut files = BTreeMap::new();
    for cat in CATEGORIES {
        let dir = root.join(cat);
        let mut found = Vec::new();
        if dir.is_dir() {
            walk(&dir, root, &mut found)?;
        }
        found.sort();
        files.insert(cat.to_string(), found);
    }
    Ok(files)
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' }).collect()
}

/// `ENV_<CATEGORY>_<STEM>`, where the stem is the path inside the category
/// without its extension. Clashes get the extension appended, then a number.
fn export_names(files: &BTreeMap<String, Vec<String>>) -> Vec<(String, String)> {
    let mut taken = BTreeSet::new();
    let mut out = Vec::new();
    for (cat, paths) in files {
        for rel in paths {
            let inner = rel.strip_prefix(&format!("{cat}/")).unwrap_or(rel);
            let (stem, ext) = match inner.rsplit_once('.') {
                Some((s, e)) if !s.is_empty() && !s.ends_with('/') => (s, Some(e)),
                _ => (inner, None),
            };
            let base = format!("ENV_{}_{}", sanitize(cat), sanitize(stem));
            let mut name = base.clone();
            if taken.contains(&name) {
                if let Some(e) = ext {
                    name = format!("{base}_{}", sanitize(e));
                }
            }
            let mut k = 2;
            let with_ext = name.clone();
            while taken.contains(&name) {
                name = format!("{with_ext}_{k}");
                k += 1;
            }
            taken.insert(name.clone());
            out.push((name, rel.clone()));
        }
    }
    out
}

/// Package exports from `environment.sh`, in file order. Lines inside the
/// user region and the root line are not package exports.
pub fn parse_exports(text: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut in_user = false;
    for line in text.lines() {
        let t = line.trim();
        if t == USER_BEGIN {
            in_user = true;
        } else if t == USER_END {
            in_user = false;
        }
        if in_user {
            continue;
        }
        let Some(rest) = t.strip_prefix("export ") else { continue };
        let Some((var, value)) = rest.split_once('=') else { continue };
        if var == ROOT_VAR {
            continue;
        }
        let value = value.trim_matches('"');
        let rel = value.strip_prefix(&format!("${{{ROOT_VAR}}}/")).unwrap_or(value);
        out.push((var.to_string(), rel.to_string()));
    }
    out
}

fn user_region(text: &str) -> Option<String> {
    let start = text.find(USER_BEGIN)? + USER_BEGIN.len();
    let end = start + text[start..].find(USER_END)?;
    Some(text[start..end].trim_start_matches('\n').to_string())
}

fn shell_quote(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('$', "\\$").replace('`', "\\`")
}

/// Rewrites `environment.sh` from the files on disk and returns its text.
/// The user region is carried over unchanged.
pub fn regenerate_exports(root: &Path) -> Result<String, EnvError> {
    ensure_package(root)?;
    let path = root.join(SOURCE_FILE);
    let user = fs::read_to_string(&path).ok().and_then(|t| user_region(&t)).unwrap_or_default();
    let abs = fs::canonicalize(root).map_err(|e| io_err(root, e))?;
    let mut text = String::from("#!/bin/sh\n# Generated by mapforge. Edit only between the user markers.\n");
    text += &format!("export {ROOT_VAR}=\"${{{ROOT_VAR}:-{}}}\"\n", shell_quote(&abs.to_string_lossy()));
    for (var, rel) in export_names(&scan(root)?) {
        text += &format!("export {var}=\"${{{ROOT_VAR}}}/{}\"\n", shell_quote(&rel));
    }
    text += &format!("{USER_BEGIN}\n{user}{USER_END}\n");
    fs::write(&path, &text).map_err(|e| io_err(&path, e))?;
    Ok(text)
}

/// Copies `bytes` into `category` as `name` and returns the relative path.
/// Exports are not regenerated.
pub fn add_file(root: &Path, category: &str, name: &str, bytes: &[u8]) -> Result<String, EnvError> {
    if !CATEGORIES.contains(&category) {
        return Err(EnvError::UnknownCategory(category.to_string()));
    }
    if name.is_empty() || name.starts_with('.') || name.contains(['/', '\\']) {
        return Err(EnvError::InvalidFileName(name.to_string()));
    }
    let rel = format!("{category}/{name}");
    let path = root.join(&rel);
    fs::create_dir_all(root.join(category)).map_err(|e| io_err(root, e))?;
    fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
    Ok(rel)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Advisory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Issue {
    MissingSourceFile,
    ExportTargetMissing { var: String, path: String },
    UnexportedFile { path: String },
    DuplicateExport { var: String },
    InvalidExportName { var: String },
    MiscategorizedFile { path: String, detected: FormatId, category: String },
}

impl Issue {
    pub fn severity(&self) -> Severity {
        match self {
            Issue::MiscategorizedFile { .. } => Severity::Advisory,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::MissingSourceFile => write!(f, "{SOURCE_FILE} is missing"),
            Issue::ExportTargetMissing { var, path } => write!(f, "{var} points at missing file {path}"),
            Issue::UnexportedFile { path } => write!(f, "{path} has no export"),
            Issue::DuplicateExport { var } => write!(f, "{var} is exported more than once"),
            Issue::InvalidExportName { var } => write!(f, "{var} is not an ENV_ upper-case name"),
            Issue::MiscategorizedFile { path, detected, category } => {
                write!(f, "{path} looks like {detected}, which does not belong in {category}/")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity() == Severity::Error)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }
}

fn valid_export_name(var: &str) -> bool {
    var.len() > 4
        && var.starts_with("ENV_")
        && var.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

fn fits_category(format: FormatId, is_image: bool, category: &str) -> bool {
    let allowed: &[&str] = match format {
        FormatId::Datum => &["location"],
        FormatId::OccGrid if is_image => &["occupancy", "media", "simulation"],
        FormatId::OccGrid | FormatId::TileGrid => &["occupancy"],
        FormatId::TopoMap | FormatId::NavGraph => &["topology"],
        FormatId::Osm => &["location", "topology"],
        FormatId::OpenRmf => &["topology", "simulation"],
        FormatId::Kml => &["location", "media"],
    };
    allowed.contains(&category)
}

/// Checks that sourcing `environment.sh` reaches every file exactly once.
/// Category mismatches found by content sniffing are advisory; directory
/// placement is what counts.
pub fn validate(root: &Path) -> Result<ValidationReport, EnvError> {
    if !root.is_dir() {
        return Err(io_err(root, "not a directory"));
    }
    let mut issues = Vec::new();
    let files = scan(root)?;
    let exports = match fs::read_to_string(root.join(SOURCE_FILE)) {
        Ok(text) => parse_exports(&text),
        Err(_) => {
            issues.push(Issue::MissingSourceFile);
            Vec::new()
        }
    };
    let mut seen = BTreeSet::new();
    let mut targets = BTreeSet::new();
    for (var, rel) in &exports {
        if !seen.insert(var.clone()) {
            issues.push(Issue::DuplicateExport { var: var.clone() });
        }
        if !valid_export_name(var) {
            issues.push(Issue::InvalidExportName { var: var.clone() });
        }
        if !root.join(rel).is_file() {
            issues.push(Issue::ExportTargetMissing { var: var.clone(), path: rel.clone() });
        }
        targets.insert(rel.as_str());
    }
    for (cat, paths) in &files {
        for rel in paths {
            if !targets.contains(rel.as_str()) {
                issues.push(Issue::UnexportedFile { path: rel.clone() });
            }
            let Ok(bytes) = fs::read(root.join(rel)) else { continue };
            if let Ok(format) = detect_format(&bytes, Some(rel)) {
                let is_image = pgm::is_pgm(&bytes) || pgm::is_png(&bytes);
                if !fits_category(format, is_image, cat) {
                    issues.push(Issue::MiscategorizedFile { path: rel.clone(), detected: format, category: cat.clone() });
                }
            }
        }
    }
    Ok(ValidationReport { issues })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_collisions() {
        let files = BTreeMap::from([(
            "occupancy".to_string(),
            vec!["occupancy/map.pgm".to_string(), "occupancy/map.yaml".to_string(), "occupancy/map-1.yaml".to_string()],
        )]);
        let names: Vec<String> = export_names(&files).into_iter().map(|(v, _)| v).collect();
        assert_eq!(names, ["ENV_OCCUPANCY_MAP", "ENV_OCCUPANCY_MAP_YAML", "ENV_OCCUPANCY_MAP_1"]);
    }

    #[test]
    fn third_clash_gets_a_number() {
        let files = BTreeMap::from([(
            "media".to_string(),
            vec!["media/a.b.png".to_string(), "media/a.png".to_string(), "media/a_png".to_string()],
        )]);
        let names: Vec<String> = export_names(&files).into_iter().map(|(v, _)| v).collect();
        assert_eq!(names, ["ENV_MEDIA_A_B", "ENV_MEDIA_A", "ENV_MEDIA_A_PNG"]);
        let files = BTreeMap::from([(
            "media".to_string(),
            vec!["media/a.png".to_string(), "media/a_png".to_string(), "media/a.png2/x".to_string()],
        )]);
        let names: Vec<String> = export_names(&files).into_iter().map(|(v, _)| v).collect();
        assert_eq!(names.len(), 3);
        assert_eq!(names.iter().collect::<BTreeSet<_>>().len(), 3);
    }

    #[test]
    fn export_lines_parse() {
        let text = "export ENV_ROOT=\"${ENV_ROOT:-/x}\"\nexport ENV_A_B=\"${ENV_ROOT}/a/b.yaml\"\n# --- user ---\nexport MINE=1\n# --- end user ---\n";
        assert_eq!(parse_exports(text), [("ENV_A_B".to_string(), "a/b.yaml".to_string())]);
        assert_eq!(user_region(text).unwrap(), "export MINE=1\n");
    }

    #[test]
    fn export_name_rules() {
        assert!(valid_export_name("ENV_A_1"));
        assert!(!valid_export_name("ENV_"));
        assert!(!valid_export_name("env_a"));
        assert!(!valid_export_name("MAP"));
    }
}
