mod common;

use mapforge::convert::io::read_artifact;
use mapforge::convert::Artifact;
use mapforge::formats::{OccupancyGrid, Pose2D};
use mapforge::skeleton::{binarize, extract_topology, grid_to_topomap, thin, BitGrid, NodeKind, SkeletonOpts, TreatUnknown};
use mapforge::FormatId;
use proptest::prelude::*;

fn grid(rel: &str) -> OccupancyGrid {
    match read_artifact(FormatId::OccGrid, &common::fixture(rel)).unwrap().0 {
        Artifact::OccGrid(g) => g,
        _ => unreachable!(),
    }
}

fn bits() -> impl Strategy<Value = BitGrid> {
    (3usize..20, 3usize..20).prop_flat_map(|(w, h)| {
        proptest::collection::vec(prop::bool::weighted(0.6), w * h)
            .prop_map(move |bits| BitGrid { width: w, height: h, bits })
    })
}

fn as_grid(b: &BitGrid) -> OccupancyGrid {
    OccupancyGrid::new(b.width, b.height, 0.1, b.bits.iter().map(|&f| if f { 254 } else { 0 }).collect())
}

#[test]
fn plus_corridor_names_and_poses() {
    let g = grid("occgrid/plus.yaml");
    let out = grid_to_topomap(&g, &SkeletonOpts::default()).unwrap();
    let names: Vec<&str> = out.map.nodes.iter().map(|n| n.name.as_str()).collect();
    assert_eq!(names, ["n000", "n001", "n002", "n003", "n004"]);
    // row-major: the bottom tip first, the top tip last
    assert_eq!(out.nodes[0].kind, NodeKind::Endpoint);
    assert_eq!(out.nodes[2].kind, NodeKind::Junction);
    let centre = &out.map.nodes[2].pose.position;
    assert!((centre.x - 10.5 * 0.05).abs() < 1e-9 && (centre.y - 10.5 * 0.05).abs() < 1e-9);
    for e in &out.map.edges {
        assert!(e.from == "n002" || e.to == "n002");
    }
}

#[test]
fn origin_and_yaw_move_poses() {
    let mut g = grid("occgrid/straight.yaml");
    let a = grid_to_topomap(&g, &SkeletonOpts::default()).unwrap();
    g.origin = Pose2D { position: mapforge::geo::LocalPoint::xy(5.0, 5.0), yaw: std::f64::consts::FRAC_PI_2 };
    let b = grid_to_topomap(&g, &SkeletonOpts::default()).unwrap();
    for (p, q) in a.map.nodes.iter().zip(&b.map.nodes) {
        let (p, q) = (&p.pose.position, &q.pose.position);
        let (u, v) = (p.x + 1.0, p.y + 0.45);
        assert!((q.x - (5.0 - v)).abs() < 1e-9 && (q.y - (5.0 + u)).abs() < 1e-9);
    }
}

#[test]
fn unknown_cells_follow_the_option() {
    let g = grid("occgrid/room.yaml");
    let closed = binarize(&g, TreatUnknown::Occupied);
    let open = binarize(&g, TreatUnknown::Free);
    assert!(closed.is_subset_of(&open));
    assert!(open.count() > closed.count());
}

#[test]
fn merge_radius_zero_keeps_every_candidate() {
    let b = BitGrid::from_rows(&["#####", "..#..", "..#..", "#####"]);
    let skel = thin(&b);
    let tight = SkeletonOpts { merge_radius: 0.0, ..Default::default() };
    let loose = SkeletonOpts { merge_radius: 10.0, ..Default::default() };
    let t = extract_topology(&skel, 1.0, Pose2D::default(), &tight);
    let l = extract_topology(&skel, 1.0, Pose2D::default(), &loose);
    assert!(t.map.nodes.len() >= l.map.nodes.len());
    t.map.validate().unwrap();
    l.map.validate().unwrap();
}

proptest! {
    #[test]
    fn thinning_only_deletes_and_settles(b in bits()) {
        let t = thin(&b);
        prop_assert!(t.is_subset_of(&b));
        prop_assert_eq!(thin(&t), t);
    }

    #[test]
    fn chains_and_nodes_lie_in_free_space(b in bits()) {
        let g = as_grid(&b);
        let out = grid_to_topomap(&g, &SkeletonOpts::default()).unwrap();
        for ch in &out.chains {
            for &(c, r) in &ch.pixels {
                prop_assert!(b.get(c as isize, r as isize));
            }
        }
        for n in &out.map.nodes {
            let p = &n.pose.position;
            let (c, r) = ((p.x / 0.1).floor() as isize, (p.y / 0.1).floor() as isize);
            prop_assert!(b.get(c, r));
        }
        out.map.validate().unwrap();
        prop_assert_eq!(out.map.edges.len(), 2 * out.chains.len());
        for n in &out.nodes {
            prop_assert_eq!(n.degree, out.map.undirected_degree(&n.name));
        }
    }

    #[test]
    fn extraction_is_deterministic(b in bits()) {
        let skel = thin(&b);
        let opts = SkeletonOpts { retain_paths: true, ..Default::default() };
        prop_assert_eq!(
            extract_topology(&skel, 0.5, Pose2D::default(), &opts),
            extract_topology(&skel, 0.5, Pose2D::default(), &opts)
        );
    }
}
