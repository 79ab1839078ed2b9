//! Topology from occupancy: binarize, thin to a one-pixel skeleton, then
//! trace the skeleton into nodes and edges.
//!
//! Rasters are map-oriented: row 0 is the row with the smallest y.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde_yaml::Value;

use crate::convert::{ConvertError, EdgeTemplate};
use crate::formats::{classify_cell, CellClass, OccupancyGrid, Pose2D, TopoEdge, TopoNode, TopologicalMap};
use crate::geo::LocalPoint;
use crate::Warning;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitGrid {
    pub width: usize,
    pub height: usize,
    /// Row-major; `true` = traversable.
    pub bits: Vec<bool>,
}

impl BitGrid {
    pub fn new(width: usize, height: usize) -> Self {
        BitGrid { width, height, bits: vec![false; width * height] }
    }

    /// Builds a grid from text rows, row 0 first. `.`, `0` and spaces are
    /// false, anything else true.
    pub fn from_rows(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
        let mut g = BitGrid::new(width, height);
        for (r, line) in rows.iter().enumerate() {
            for (c, ch) in line.chars().enumerate() {
                g.bits[r * width + c] = !matches!(ch, '.' | '0' | ' ');
            }
        }
        g
    }

    /// Out-of-range coordinates read as false.
    pub fn get(&self, col: isize, row: isize) -> bool {
        if col < 0 || row < 0 || col as usize >= self.width || row as usize >= self.height {
            return false;
        }
        self.bits[row as usize * self.width + col as usize]
    }

    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_subset_of(&self, other: &BitGrid) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TreatUnknown {
    #[default]
    Occupied,
    Free,
}

pub fn binarize(g: &OccupancyGrid, treat_unknown: TreatUnknown) -> BitGrid {
    let bits = (0..g.cells.len())
        .map(|i| match classify_cell(g, i) {
            Some(CellClass::Free) => true,
            Some(CellClass::Unknown) => treat_unknown == TreatUnknown::Free,
            _ => false,
        })
        .collect();
    BitGrid { width: g.width, height: g.height, bits }
}

/// Neighbours P2..P9, clockwise from the one at row - 1.
fn ring(b: &BitGrid, c: isize, r: isize) -> [bool; 8] {
    [
        b.get(c, r - 1),
        b.get(c + 1, r - 1),
        b.get(c + 1, r),
        b.get(c + 1, r + 1),
        b.get(c, r + 1),
        b.get(c - 1, r + 1),
        b.get(c - 1, r),
        b.get(c - 1, r - 1),
    ]
}

/// (A, B): 0→1 transitions around the ring, and set neighbours.
fn transitions(p: &[bool; 8]) -> (usize, usize) {
    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
    let b = p.iter().filter(|v| **v).count();
    (a, b)
}

fn deletable(p: &[bool; 8]) -> bool {
    let (a, b) = transitions(p);
    (2..=6).contains(&b) && a == 1
}

/// Zhang–Suen thinning to a fixed point.
///
/// Candidates for each sub-iteration are chosen on a snapshot as usual, but
/// are removed one at a time and only if still removable at that moment.
/// Plain parallel removal erases 2×2 blocks outright; the re-check keeps every
/// 8-connected component alive.
pub fn thin(b: &BitGrid) -> BitGrid {
    let mut g = b.clone();
    loop {
        let mut changed = false;
        for step in 0..2 {
            let snap = g.clone();
            let mut marked = Vec::new();
            for r in 0..g.height as isize {
                for c in 0..g.width as isize {
                    if !snap.get(c, r) {
                        continue;
                    }
                    let p = ring(&snap, c, r);
                    let [p2, _, p4, _, p6, _, p8, _] = p;
                    let side = if step == 0 {
                        !(p2 && p4 && p6) && !(p4 && p6 && p8)
                    } else {
                        !(p2 && p4 && p8) && !(p2 && p6 && p8)
                    };
                    if side && deletable(&p) {
                        marked.push((c, r));
                    }
                }
            }
            for (c, r) in marked {
                if deletable(&ring(&g, c, r)) {
                    g.set(c as usize, r as usize, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return g;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonOpts {
    /// Candidate pixels closer than this (in cells) become one node.
    pub merge_radius: f64,
    pub treat_unknown: TreatUnknown,
    /// Douglas–Peucker tolerance in meters for retained paths.
    pub simplify_tolerance: Option<f64>,
    /// Keep each edge's traced polyline in its `path` extra.
    pub retain_paths: bool,
    pub template: EdgeTemplate,
    pub name: String,
}

impl Default for SkeletonOpts {
    fn default() -> Self {
        SkeletonOpts {
            merge_radius: 3.0,
            treat_unknown: TreatUnknown::Occupied,
            simplify_tolerance: None,
            retain_paths: false,
            template: EdgeTemplate::default(),
            name: "grid".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Endpoint,
    Junction,
    /// A skeleton pixel with no neighbours.
    Isolated,
    /// Inserted to break up loops and parallel chains.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeReport {
    pub name: String,
    pub kind: NodeKind,
    /// Neighbour count in the finished map.
    pub degree: usize,
}

/// An undirected chain of skeleton pixels between two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedChain {
    pub from: String,
    pub to: String,
    /// (col, row) pixels, `from` end first.
    pub pixels: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyOutput {
    pub map: TopologicalMap,
    pub warnings: Vec<Warning>,
    pub nodes: Vec<NodeReport>,
    pub chains: Vec<TracedChain>,
}

/// Skeleton neighbours of pixel `i`. A diagonal neighbour is left out when a
/// shared 4-neighbour already links the two, so staircase corners read as
/// plain path pixels rather than junctions.
fn neighbours(b: &BitGrid, i: usize) -> Vec<usize> {
    let (c, r) = b.coords(i);
    let (c, r) = (c as isize, r as isize);
    let mut out = Vec::with_capacity(4);
    for (dc, dr) in [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)] {
        let (nc, nr) = (c + dc, r + dr);
        if !b.get(nc, nr) {
            continue;
        }
        if dc != 0 && dr != 0 && (b.get(c + dc, r) || b.get(c, r + dr)) {
            continue;
        }
        out.push(nr as usize * b.width + nc as usize);
    }
    out
}

fn pixel_center(resolution: f64, origin: Pose2D, col: usize, row: usize) -> LocalPoint {
    let u = (col as f64 + 0.5) * resolution;
    let v = (row as f64 + 0.5) * resolution;
    let (s, c) = origin.yaw.sin_cos();
    LocalPoint {
        x: origin.position.x + c * u - s * v,
        y: origin.position.y + s * u + c * v,
        z: origin.position.z,
    }
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut root = i;
    while parent[root] != root {
        root = parent[root];
    }
    let mut i = i;
    while parent[i] != root {
        let next = parent[i];
        parent[i] = root;
        i = next;
    }
    root
}

fn douglas_peucker(points: &[LocalPoint], tolerance: f64) -> Vec<LocalPoint> {
    if points.len() < 3 {
        return points.to_vec();
    }
    let (a, b) = (points[0], points[points.len() - 1]);
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = dx.hypot(dy);
    let dist = |p: &LocalPoint| {
        if len == 0.0 {
            (p.x - a.x).hypot(p.y - a.y)
        } else {
            ((p.x - a.x) * dy - (p.y - a.y) * dx).abs() / len
        }
    };
    let (far, d) = points[1..points.len() - 1]
        .iter()
        .enumerate()
        .map(|(i, p)| (i + 1, dist(p)))
        .fold((0, -1.0), |best, x| if x.1 > best.1 { x } else { best });
    if d <= tolerance {
        return vec![a, b];
    }
    let mut left = douglas_peucker(&points[..=far], tolerance);
    left.pop();
    left.extend(douglas_peucker(&points[far..], tolerance));
    left
}

struct Chain {
    a: usize,
    b: usize,
    pixels: Vec<usize>,
}

/// Turns a thinned skeleton into a topological map.
///
/// Pixels whose neighbour count is not 2 are node candidates (1 = endpoint,
/// 3+ = junction); candidates within `merge_radius` cells of each other are
/// merged. Chains of 2-neighbour pixels between nodes become a pair of
/// directed edges. A chain that returns to its own node gets two extra nodes
/// and a second chain between the same two nodes gets one, since a map holds
/// at most one edge per direction between two nodes. Loops with no candidate
/// on them are anchored at their first pixel in row-major order.
pub fn extract_topology(skel: &BitGrid, resolution: f64, origin: Pose2D, opts: &SkeletonOpts) -> TopologyOutput {
    let mut warnings = Vec::new();
    let pixels: Vec<usize> = (0..skel.bits.len()).filter(|&i| skel.bits[i]).collect();
    let mut map = TopologicalMap::new(opts.name.clone());
    if pixels.is_empty() {
        warnings.push(Warning::new("skeleton", "skeleton is empty; map has no nodes"));
        return TopologyOutput { map, warnings, nodes: Vec::new(), chains: Vec::new() };
    }
    let adj: HashMap<usize, Vec<usize>> = pixels.iter().map(|&i| (i, neighbours(skel, i))).collect();
    let candidates: Vec<usize> = pixels.iter().copied().filter(|i| adj[i].len() != 2).collect();

    // single-linkage clustering of candidates
    let mut parent: Vec<usize> = (0..candidates.len()).collect();
    let r2 = opts.merge_radius * opts.merge_radius;
    for i in 0..candidates.len() {
        let (ci, ri) = skel.coords(candidates[i]);
        for j in i + 1..candidates.len() {
            let (cj, rj) = skel.coords(candidates[j]);
            let (dc, dr) = (ci as f64 - cj as f64, ri as f64 - rj as f64);
            if dc * dc + dr * dr <= r2 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..candidates.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(candidates[i]);
    }

    // nodes: (pixel, kind); cluster_of maps candidate pixel -> node index
    let mut nodes: Vec<(usize, NodeKind)> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut cluster_of: HashMap<usize, usize> = HashMap::new();
    for group in groups.values() {
        let n = group.len() as f64;
        let (sc, sr) = group.iter().fold((0.0, 0.0), |(sc, sr), &p| {
            let (c, r) = skel.coords(p);
            (sc + c as f64, sr + r as f64)
        });
        let (mc, mr) = (sc / n, sr / n);
        let pixel = *group
            .iter()
            .min_by(|&&a, &&b| {
                let d = |p: usize| {
                    let (c, r) = skel.coords(p);
                    (c as f64 - mc).powi(2) + (r as f64 - mr).powi(2)
                };
                d(a).total_cmp(&d(b)).then(a.cmp(&b))
            })
            .expect("cluster is non-empty");
        let max_deg = group.iter().map(|p| adj[p].len()).max().unwrap_or(0);
        let kind = match max_deg {
            0 => NodeKind::Isolated,
            1 if group.len() == 1 => NodeKind::Endpoint,
            1 | 2 => NodeKind::Endpoint,
            _ => NodeKind::Junction,
        };
        for &p in group {
            cluster_of.insert(p, nodes.len());
        }
        members.push(group.clone());
        nodes.push((pixel, kind));
    }

    // trace chains from every candidate
    let mut used: HashSet<(usize, usize)> = HashSet::new();
    let mut visited: HashSet<usize> = candidates.iter().copied().collect();
    let mut raw: Vec<Chain> = Vec::new();
    for &m in &candidates {
        for &q in &adj[&m] {
            if used.contains(&(m, q)) || cluster_of.get(&q) == Some(&cluster_of[&m]) {
                continue;
            }
            used.insert((m, q));
            let mut path = vec![m, q];
            let (mut prev, mut cur) = (m, q);
            while !cluster_of.contains_key(&cur) {
                visited.insert(cur);
                let next = adj[&cur].iter().copied().find(|&n| n != prev).unwrap_or(prev);
                path.push(next);
                prev = cur;
                cur = next;
            }
            used.insert((cur, prev));
            raw.push(Chain { a: cluster_of[&m], b: cluster_of[&cur], pixels: path });
        }
    }

    // loops without any candidate
    for &p in &pixels {
        if visited.contains(&p) {
            continue;
        }
        let anchor = p;
        visited.insert(anchor);
        let idx = nodes.len();
        nodes.push((anchor, NodeKind::Synthetic));
        members.push(vec![anchor]);
        cluster_of.insert(anchor, idx);
        let mut path = vec![anchor];
        let (mut prev, mut cur) = (anchor, adj[&anchor][0]);
        while cur != anchor {
            visited.insert(cur);
            path.push(cur);
            let next = adj[&cur].iter().copied().find(|&n| n != prev).unwrap_or(prev);
            prev = cur;
            cur = next;
        }
        path.push(anchor);
        raw.push(Chain { a: idx, b: idx, pixels: path });
    }

    // split self-loops and repeated pairs so that every pair appears once
    let near_cluster = |cluster: &[usize], p: usize| {
        let (c, r) = skel.coords(p);
        cluster.iter().any(|&m| {
            let (mc, mr) = skel.coords(m);
            let (dc, dr) = (mc as f64 - c as f64, mr as f64 - r as f64);
            dc * dc + dr * dr <= r2
        })
    };
    let mut chains: Vec<Chain> = Vec::new();
    let mut pairs: HashSet<(usize, usize)> = HashSet::new();
    for ch in raw {
        let interior = &ch.pixels[1..ch.pixels.len() - 1];
        if ch.a == ch.b {
            if nodes[ch.a].1 != NodeKind::Synthetic && interior.iter().all(|&p| near_cluster(&members[ch.a], p)) {
                continue;
            }
            if interior.len() < 2 {
                warnings.push(Warning::new("skeleton", "loop too short to split; dropped"));
                continue;
            }
            let cuts = [ch.pixels.len() / 3, 2 * ch.pixels.len() / 3];
            let ids: Vec<usize> = cuts
                .iter()
                .map(|&k| {
                    nodes.push((ch.pixels[k], NodeKind::Synthetic));
                    nodes.len() - 1
                })
                .collect();
            let ends = [ch.a, ids[0], ids[1], ch.a];
            let bounds = [0, cuts[0], cuts[1], ch.pixels.len() - 1];
            for s in 0..3 {
                pairs.insert((ends[s].min(ends[s + 1]), ends[s].max(ends[s + 1])));
                chains.push(Chain { a: ends[s], b: ends[s + 1], pixels: ch.pixels[bounds[s]..=bounds[s + 1]].to_vec() });
            }
            continue;
        }
        let key = (ch.a.min(ch.b), ch.a.max(ch.b));
        if pairs.insert(key) {
            chains.push(ch);
            continue;
        }
        if interior.is_empty() {
            warnings.push(Warning::new("skeleton", "duplicate direct link between nodes; dropped"));
            continue;
        }
        let k = ch.pixels.len() / 2;
        nodes.push((ch.pixels[k], NodeKind::Synthetic));
        let mid = nodes.len() - 1;
        chains.push(Chain { a: ch.a, b: mid, pixels: ch.pixels[..=k].to_vec() });
        chains.push(Chain { a: mid, b: ch.b, pixels: ch.pixels[k..].to_vec() });
    }

    // names follow the row-major order of node pixels
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by_key(|&i| {
        let (c, r) = skel.coords(nodes[i].0);
        (r, c)
    });
    let width = order.len().saturating_sub(1).to_string().len().max(3);
    let mut names = vec![String::new(); nodes.len()];
    for (rank, &i) in order.iter().enumerate() {
        names[i] = format!("n{rank:0width$}");
    }
    for &i in &order {
        let (c, r) = skel.coords(nodes[i].0);
        let mut n = TopoNode::new(names[i].clone(), pixel_center(resolution, origin, c, r));
        n.xy_tolerance = opts.template.xy_tolerance;
        n.yaw_tolerance = opts.template.yaw_tolerance;
        map.nodes.push(n);
    }

    let mut traced = Vec::new();
    for ch in &chains {
        let coords: Vec<(usize, usize)> = ch.pixels.iter().map(|&p| skel.coords(p)).collect();
        for (from, to, seq) in [
            (ch.a, ch.b, coords.clone()),
            (ch.b, ch.a, coords.iter().rev().copied().collect::<Vec<_>>()),
        ] {
            let mut e = TopoEdge::new(names[from].clone(), names[to].clone(), opts.template.action.clone());
            e.restrictions = opts.template.restrictions.clone();
            if opts.retain_paths {
                let mut pts: Vec<LocalPoint> =
                    seq.iter().map(|&(c, r)| pixel_center(resolution, origin, c, r)).collect();
                if let Some(tol) = opts.simplify_tolerance {
                    pts = douglas_peucker(&pts, tol);
                }
                let path = pts.iter().map(|p| Value::Sequence(vec![p.x.into(), p.y.into()])).collect();
                e.extras.insert(Value::String("path".into()), Value::Sequence(path));
            }
            map.edges.push(e);
        }
        traced.push(TracedChain { from: names[ch.a].clone(), to: names[ch.b].clone(), pixels: coords });
    }
    map.edges.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));

    let reports = order
        .iter()
        .map(|&i| NodeReport { name: names[i].clone(), kind: nodes[i].1, degree: map.undirected_degree(&names[i]) })
        .collect();
    TopologyOutput { map, warnings, nodes: reports, chains: traced }
}

/// binarize → thin → extract_topology, in the grid's own frame.
pub fn grid_to_topomap(g: &OccupancyGrid, opts: &SkeletonOpts) -> Result<TopologyOutput, ConvertError> {
    g.validate()?;
    if !(opts.merge_radius >= 0.0) {
        return Err(ConvertError::InvalidParam { key: "merge_radius".into(), reason: "must be non-negative".into() });
    }
    opts.template.validate()?;
    let skel = thin(&binarize(g, opts.treat_unknown));
    Ok(extract_topology(&skel, g.resolution, g.origin, opts))
}
