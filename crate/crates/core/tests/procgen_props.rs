mod common;

use std::collections::HashSet;

use mapforge::procgen::{extract_patterns, tilegrid_to_occgrid, wfc_generate, PatternOpts, ProcgenError, TileGrid};
use proptest::prelude::*;

fn windows(t: &TileGrid, n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for y in 0..=t.height - n {
        for x in 0..=t.width - n {
            out.push((0..n * n).map(|i| t.get(x + i % n, y + i / n)).collect());
        }
    }
    out
}

fn sample() -> impl Strategy<Value = TileGrid> {
    (3usize..7, 3usize..7).prop_flat_map(|(w, h)| {
        proptest::collection::vec(prop::bool::weighted(0.3), w * h).prop_map(move |cells| {
            let rows: Vec<String> = cells
                .chunks(w)
                .map(|r| r.iter().map(|&o| if o { '#' } else { '.' }).collect())
                .collect();
            TileGrid::from_rows(&rows.iter().map(String::as_str).collect::<Vec<_>>())
        })
    })
}

#[test]
fn warehouse_sample_loads_from_pgm() {
    let bytes = std::fs::read(common::fixture("tilegrid/warehouse.pgm")).unwrap();
    let t = TileGrid::from_image(&bytes).unwrap();
    // map row 0 is the bottom image row
    assert_eq!(t.to_rows()[0], "..........");
    assert_eq!(t.to_rows()[3], ".##.##.##.");
    assert_eq!(t.tiles.iter().filter(|&&x| x == 1).count(), 24);
}

#[test]
fn uniform_weights_count_windows() {
    let t = TileGrid::from_rows(&["....", "....", "....", "...."]);
    let ps = extract_patterns(&t, 3, PatternOpts::default()).unwrap();
    // 16 wrapped windows, one distinct variant each
    assert_eq!(ps.weights, [16]);
}

#[test]
fn checkerboard_any_seed() {
    let bytes = std::fs::read(common::fixture("tilegrid/checker.pgm")).unwrap();
    let ps = extract_patterns(&TileGrid::from_image(&bytes).unwrap(), 2, PatternOpts::default()).unwrap();
    assert_eq!(ps.len(), 2);
    for seed in [0, 1, 99, u64::MAX] {
        let g = wfc_generate(&ps, 12, 12, seed, 0).unwrap().grid;
        for y in 0..12 {
            for x in 0..12 {
                assert_ne!(g.get(x, y), g.get((x + 1) % 12, y));
            }
        }
    }
}

#[test]
fn periodic_stripes_and_small_output() {
    // stripes that only fit with period 3 horizontally
    let t = TileGrid::from_rows(&["#..#..", "#..#..", "#..#..", "#..#.."]);
    let ps = extract_patterns(&t, 3, PatternOpts { rotate: false, reflect: false, periodic: true }).unwrap();
    // every output satisfies the period, so generation must succeed
    let out = wfc_generate(&ps, 10, 4, 5, 3).unwrap();
    for w in windows(&out.grid, 3) {
        assert!(ps.index_of(&w).is_some());
    }
    let err = wfc_generate(&ps, 2, 2, 0, 0).unwrap_err();
    assert!(matches!(err, ProcgenError::OutputTooSmall { .. }));
}

#[test]
fn untileable_sample_reports_contradiction() {
    // the single pattern cannot sit beside itself
    let t = TileGrid::from_rows(&[".#", "##"]);
    let ps = extract_patterns(&t, 2, PatternOpts { rotate: false, reflect: false, periodic: false }).unwrap();
    assert_eq!(ps.len(), 1);
    assert_eq!(
        wfc_generate(&ps, 3, 2, 0, 2).unwrap_err(),
        ProcgenError::Contradiction { attempts: 3, cell: (0, 0) }
    );
}

#[test]
fn occgrid_matches_palette() {
    let t = TileGrid::from_rows(&["#.#", "..#"]);
    let g = tilegrid_to_occgrid(&t, 0.5).unwrap();
    for (i, &tile) in t.tiles.iter().enumerate() {
        assert_eq!(g.cells[i], if tile == 0 { 255 } else { 0 });
    }
    assert_eq!(g.resolution, 0.5);
    assert!(!g.negate);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn outputs_only_hold_sample_windows(t in sample(), seed in any::<u64>()) {
        let ps = extract_patterns(&t, 2, PatternOpts::default()).unwrap();
        let known: HashSet<Vec<u8>> = ps.patterns.iter().cloned().collect();
        prop_assert!(ps.weights.iter().all(|&w| w >= 1));
        match wfc_generate(&ps, 9, 8, seed, 4) {
            Ok(out) => {
                for w in windows(&out.grid, 2) {
                    prop_assert!(known.contains(&w));
                }
                prop_assert!(out.collapses <= 8 * 7);
                prop_assert_eq!(wfc_generate(&ps, 9, 8, seed, 4).unwrap(), out);
            }
            Err(ProcgenError::Contradiction { attempts, .. }) => prop_assert_eq!(attempts, 5),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn adjacency_symmetric(t in sample()) {
        let ps = extract_patterns(&t, 2, PatternOpts::default()).unwrap();
        for d in 0..4 {
            for (p, list) in ps.adjacency[d].iter().enumerate() {
                for &q in list {
                    prop_assert!(ps.adjacency[(d + 2) % 4][q].contains(&p));
                }
            }
        }
    }
}
