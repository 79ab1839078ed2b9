mod common;

use std::fs;

use mapforge::envpkg::{
    add_file, regenerate_exports, scaffold, validate, EnvError, Issue, Severity, CATEGORIES, SOURCE_FILE, USER_BEGIN,
    USER_END,
};
use mapforge::FormatId;
use proptest::prelude::*;

fn fresh() -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("pkg");
    scaffold("riseholme", &root).unwrap();
    (dir, root)
}

#[test]
fn scaffold_layout() {
    let (_d, root) = fresh();
    for c in CATEGORIES {
        assert!(root.join(c).is_dir(), "{c}");
    }
    assert!(root.join("package.xml").is_file());
    let text = fs::read_to_string(root.join(SOURCE_FILE)).unwrap();
    let exports: Vec<&str> = text.lines().filter(|l| l.starts_with("export ")).collect();
    assert!(exports[0].starts_with("export ENV_ROOT=\"${ENV_ROOT:-/"));
    assert_eq!(exports[1], "export ENV_LOCATION_DATUM=\"${ENV_ROOT}/location/datum.yaml\"");
    assert!(validate(&root).unwrap().is_empty());
}

#[test]
fn non_empty_root_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x"), "").unwrap();
    assert!(matches!(scaffold("a", dir.path()), Err(EnvError::RootNotEmpty(_))));
}

#[test]
fn regenerate_outside_a_package() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(regenerate_exports(dir.path()), Err(EnvError::NotAPackage(_))));
}

#[test]
fn deleted_target_reported_once() {
    let (_d, root) = fresh();
    fs::remove_file(root.join("location/datum.yaml")).unwrap();
    let report = validate(&root).unwrap();
    assert_eq!(
        report.issues,
        [Issue::ExportTargetMissing { var: "ENV_LOCATION_DATUM".into(), path: "location/datum.yaml".into() }]
    );
}

#[test]
fn missing_source_and_unexported_file() {
    let (_d, root) = fresh();
    add_file(&root, "objects", "crate.obj", b"o crate\n").unwrap();
    let report = validate(&root).unwrap();
    assert_eq!(report.issues, [Issue::UnexportedFile { path: "objects/crate.obj".into() }]);
    fs::remove_file(root.join(SOURCE_FILE)).unwrap();
    let report = validate(&root).unwrap();
    assert_eq!(report.issues[0], Issue::MissingSourceFile);
    assert!(report.has_errors());
}

#[test]
fn occgrid_meta_in_topology_is_advisory() {
    let (_d, root) = fresh();
    add_file(&root, "topology", "map.yaml", common::fixture_text("occgrid/plus.yaml").as_bytes()).unwrap();
    regenerate_exports(&root).unwrap();
    let report = validate(&root).unwrap();
    assert_eq!(report.issues.len(), 1);
    match &report.issues[0] {
        Issue::MiscategorizedFile { path, detected, category } => {
            assert_eq!((path.as_str(), *detected, category.as_str()), ("topology/map.yaml", FormatId::OccGrid, "topology"));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(report.issues[0].severity(), Severity::Advisory);
    assert!(!report.has_errors());
}

#[test]
fn duplicate_and_badly_named_exports() {
    let (_d, root) = fresh();
    let path = root.join(SOURCE_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let line = "export ENV_LOCATION_DATUM=\"${ENV_ROOT}/location/datum.yaml\"\n";
    let text = text.replacen(line, &format!("{line}{line}export env_x=\"${{ENV_ROOT}}/location/datum.yaml\"\n"), 1);
    fs::write(&path, text).unwrap();
    let issues = validate(&root).unwrap().issues;
    assert!(issues.contains(&Issue::DuplicateExport { var: "ENV_LOCATION_DATUM".into() }));
    assert!(issues.contains(&Issue::InvalidExportName { var: "env_x".into() }));
}

#[test]
fn user_region_survives_and_output_is_stable() {
    let (_d, root) = fresh();
    let path = root.join(SOURCE_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let mine = "export ROBOT_NAME=\"thorvald\"\n# keep me\n";
    fs::write(&path, text.replace(&format!("{USER_BEGIN}\n"), &format!("{USER_BEGIN}\n{mine}"))).unwrap();
    add_file(&root, "media", "icon.png", b"not really").unwrap();
    let a = regenerate_exports(&root).unwrap();
    let b = regenerate_exports(&root).unwrap();
    assert_eq!(a, b);
    let start = a.find(USER_BEGIN).unwrap() + USER_BEGIN.len() + 1;
    let end = a.find(USER_END).unwrap();
    assert_eq!(&a[start..end], mine);
    assert!(a.contains("ENV_MEDIA_ICON="));
    let media = a.find("ENV_MEDIA_ICON").unwrap();
    let location = a.find("ENV_LOCATION_DATUM").unwrap();
    assert!(location < media, "sorted by category");
}

#[test]
fn sourced_exports_resolve() {
    let (_d, root) = fresh();
    add_file(&root, "occupancy", "my map.yaml", common::fixture_text("occgrid/plus.yaml").as_bytes()).unwrap();
    regenerate_exports(&root).unwrap();
    let out = std::process::Command::new("sh")
        .arg("-c")
        .arg(". ./environment.sh && test -f \"$ENV_OCCUPANCY_MY_MAP\" && test -f \"$ENV_LOCATION_DATUM\" && echo ok")
        .current_dir(&root)
        .env_remove("ENV_ROOT")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn any_name_scaffolds_valid(name in "[ -~]{1,30}") {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("p");
        scaffold(&name, &root).unwrap();
        prop_assert!(validate(&root).unwrap().is_empty());
    }

    #[test]
    fn additions_stay_valid(files in proptest::collection::vec((0usize..6, "[a-zA-Z0-9 _.-]{1,12}"), 1..12)) {
        let (_d, root) = fresh();
        for (cat, name) in files {
            if name.starts_with('.') {
                continue;
            }
            add_file(&root, CATEGORIES[cat], &name, b"payload\n").unwrap();
            regenerate_exports(&root).unwrap();
            let report = validate(&root).unwrap();
            prop_assert!(report.is_empty(), "{:?}", report.issues);
        }
    }
}
