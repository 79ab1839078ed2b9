//! Overlapping-model wave function collapse over tile grids.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formats::occgrid::flip_rows;
use crate::formats::pgm::{self, GrayImage};
use crate::formats::{CellClass, FormatError, OccupancyGrid};

pub const FREE_TILE: u8 = 0;
pub const OCCUPIED_TILE: u8 = 1;
pub const DEFAULT_N: usize = 3;
pub const DEFAULT_MAX_RESTARTS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum ProcgenError {
    #[error("sample is {width}x{height}, smaller than the {n}x{n} pattern size")]
    SampleTooSmall { n: usize, width: usize, height: usize },
    #[error("pattern size must be at least 1")]
    ZeroPatternSize,
    #[error("pattern set is empty")]
    EmptyPatternSet,
    #[error("output {width}x{height} is smaller than the {n}x{n} pattern size")]
    OutputTooSmall { n: usize, width: usize, height: usize },
    #[error("contradiction at cell ({}, {}) after {attempts} attempts", cell.0, cell.1)]
    Contradiction { attempts: usize, cell: (usize, usize) },
    #[error("resolution {0} must be positive")]
    InvalidResolution(f64),
    #[error("tile {tile} at index {index} is not in the palette")]
    UnknownTile { tile: u8, index: usize },
    #[error("tile grid holds {got} tiles, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    pub width: usize,
    pub height: usize,
    /// Row-major, row 0 = minimum y.
    pub tiles: Vec<u8>,
    pub palette: BTreeMap<u8, CellClass>,
}

fn default_palette() -> BTreeMap<u8, CellClass> {
    BTreeMap::from([(FREE_TILE, CellClass::Free), (OCCUPIED_TILE, CellClass::Occupied)])
}

impl TileGrid {
    /// `.` is free, anything else occupied; the first row is row 0.
    pub fn from_rows(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let tiles = rows
            .iter()
            .flat_map(|r| r.chars().map(|c| if c == '.' { FREE_TILE } else { OCCUPIED_TILE }))
            .collect();
        TileGrid { width, height, tiles, palette: default_palette() }
    }

    /// Free cells become the free tile; occupied and unknown cells the
    /// occupied one.
    pub fn from_occupancy(g: &OccupancyGrid) -> Self {
        let tiles = (0..g.cells.len())
            .map(|i| if g.classify(i) == Some(CellClass::Free) { FREE_TILE } else { OCCUPIED_TILE })
            .collect();
        TileGrid { width: g.width, height: g.height, tiles, palette: default_palette() }
    }

    /// Reads a PGM or PNG sample with the default occupancy thresholds.
    pub fn from_image(bytes: &[u8]) -> Result<Self, FormatError> {
        let img = pgm::decode_image(bytes)?;
        let cells = flip_rows(&img.pixels, img.width, img.height);
        Ok(Self::from_occupancy(&OccupancyGrid::new(img.width, img.height, 1.0, cells)))
    }

    pub fn validate(&self) -> Result<(), ProcgenError> {
        let expected = self.width * self.height;
        if self.tiles.len() != expected {
            return Err(ProcgenError::SizeMismatch { expected, got: self.tiles.len() });
        }
        match self.tiles.iter().position(|t| !self.palette.contains_key(t)) {
            Some(index) => Err(ProcgenError::UnknownTile { tile: self.tiles[index], index }),
            None => Ok(()),
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.tiles[y * self.width + x]
    }

    /// The grid as a P5 image, top row first.
    pub fn to_pgm(&self) -> Vec<u8> {
        let cells: Vec<u8> = self.tiles.iter().map(|t| class_value(self.palette.get(t).copied())).collect();
        pgm::encode_pgm(&GrayImage {
            width: self.width,
            height: self.height,
            pixels: flip_rows(&cells, self.width, self.height),
            comment: None,
        })
    }

    pub fn to_rows(&self) -> Vec<String> {
        (0..self.height)
            .map(|y| {
                (0..self.width)
                    .map(|x| match self.palette.get(&self.get(x, y)) {
                        Some(CellClass::Free) => '.',
                        _ => '#',
                    })
                    .collect()
            })
            .collect()
    }
}

fn class_value(class: Option<CellClass>) -> u8 {
    match class {
        Some(CellClass::Free) => 255,
        Some(CellClass::Occupied) => 0,
        _ => 205,
    }
}

pub fn tilegrid_to_occgrid(t: &TileGrid, resolution: f64) -> Result<OccupancyGrid, ProcgenError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(ProcgenError::InvalidResolution(resolution));
    }
    t.validate()?;
    let cells = t.tiles.iter().map(|tile| class_value(t.palette.get(tile).copied())).collect();
    Ok(OccupancyGrid::new(t.width, t.height, resolution, cells))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternOpts {
    pub rotate: bool,
    pub reflect: bool,
    /// Windows wrap around the sample edges.
    pub periodic: bool,
}

impl Default for PatternOpts {
    fn default() -> Self {
        PatternOpts { rotate: true, reflect: true, periodic: true }
    }
}

/// Neighbour offsets, indexed by direction: left, down, right, up.
pub const DIRECTIONS: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

fn opposite(d: usize) -> usize {
    (d + 2) % 4
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    pub n: usize,
    /// Each pattern is n×n tiles, row-major.
    pub patterns: Vec<Vec<u8>>,
    pub weights: Vec<u32>,
    /// `adjacency[d][p]`: patterns that may sit at offset `DIRECTIONS[d]` from `p`.
    pub adjacency: [Vec<Vec<usize>>; 4],
    pub palette: BTreeMap<u8, CellClass>,
}

impl PatternSet {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn index_of(&self, pattern: &[u8]) -> Option<usize> {
        self.patterns.iter().position(|p| p == pattern)
    }
}

fn rotate(p: &[u8], n: usize) -> Vec<u8> {
    (0..n * n).map(|i| p[(n - 1 - i % n) * n + i / n]).collect()
}

fn reflect(p: &[u8], n: usize) -> Vec<u8> {
    (0..n * n).map(|i| p[(i / n) * n + n - 1 - i % n]).collect()
}

fn variants(p: Vec<u8>, n: usize, opts: PatternOpts) -> Vec<Vec<u8>> {
    let mut out = vec![p];
    if opts.rotate {
        for k in 0..3 {
            out.push(rotate(&out[k], n));
        }
    }
    if opts.reflect {
        let mirrored: Vec<Vec<u8>> = out.iter().map(|v| reflect(v, n)).collect();
        out.extend(mirrored);
    }
    let mut distinct: Vec<Vec<u8>> = Vec::new();
    for v in out {
        if !distinct.contains(&v) {
            distinct.push(v);
        }
    }
    distinct
}

/// Whether `q` placed at offset (dx, dy) from `p` agrees on the overlap.
fn agrees(p: &[u8], q: &[u8], n: usize, dx: isize, dy: isize) -> bool {
    let n = n as isize;
    let (xmin, xmax) = if dx < 0 { (0, n + dx) } else { (dx, n) };
    let (ymin, ymax) = if dy < 0 { (0, n + dy) } else { (dy, n) };
    for y in ymin..ymax {
        for x in xmin..xmax {
            if p[(y * n + x) as usize] != q[((y - dy) * n + x - dx) as usize] {
                return false;
            }
        }
    }
    true
}

/// Collects every n×n window of the sample, plus its symmetry variants, in
/// order of first appearance. A window adds one to the weight of each of its
/// distinct variants.
pub fn extract_patterns(sample: &TileGrid, n: usize, opts: PatternOpts) -> Result<PatternSet, ProcgenError> {
    sample.validate()?;
    if n == 0 {
        return Err(ProcgenError::ZeroPatternSize);
    }
    if sample.width < n || sample.height < n {
        return Err(ProcgenError::SampleTooSmall { n, width: sample.width, height: sample.height });
    }
    let (xs, ys) = if opts.periodic {
        (sample.width, sample.height)
    } else {
        (sample.width - n + 1, sample.height - n + 1)
    };
    let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut patterns = Vec::new();
    let mut weights: Vec<u32> = Vec::new();
    for y in 0..ys {
        for x in 0..xs {
            let window: Vec<u8> = (0..n * n)
                .map(|i| sample.get((x + i % n) % sample.width, (y + i / n) % sample.height))
                .collect();
            for v in variants(window, n, opts) {
                match index.get(&v) {
                    Some(&k) => weights[k] += 1,
                    None => {
                        index.insert(v.clone(), patterns.len());
                        patterns.push(v);
                        weights.push(1);
                    }
                }
            }
        }
    }
    let adjacency = std::array::from_fn(|d| {
        let (dx, dy) = DIRECTIONS[d];
        patterns
            .iter()
            .map(|p| (0..patterns.len()).filter(|&q| agrees(p, &patterns[q], n, dx, dy)).collect())
            .collect()
    });
    Ok(PatternSet { n, patterns, weights, adjacency, palette: sample.palette.clone() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WfcOutput {
    pub grid: TileGrid,
    /// Failed attempts before the successful one.
    pub restarts: usize,
    /// Collapses made by the successful attempt.
    pub collapses: usize,
}

struct Wave<'a> {
    ps: &'a PatternSet,
    w: usize,
    h: usize,
    allowed: Vec<bool>,
    /// compatible[(cell * T + t) * 4 + d]: patterns in the neighbour opposite
    /// `d` that still support `t` here.
    compatible: Vec<u32>,
    ones: Vec<usize>,
    sum_w: Vec<f64>,
    sum_wlogw: Vec<f64>,
    stack: Vec<(usize, usize)>,
    contradiction: Option<usize>,
}

impl<'a> Wave<'a> {
    fn new(ps: &'a PatternSet, w: usize, h: usize) -> Self {
        let t = ps.len();
        let cells = w * h;
        let total_w: f64 = ps.weights.iter().map(|&x| x as f64).sum();
        let total_wlogw: f64 = ps.weights.iter().map(|&x| x as f64 * (x as f64).ln()).sum();
        let mut compatible = Vec::with_capacity(cells * t * 4);
        for _ in 0..cells {
            for p in 0..t {
                for d in 0..4 {
                    compatible.push(ps.adjacency[opposite(d)][p].len() as u32);
                }
            }
        }
        Wave {
            ps,
            w,
            h,
            allowed: vec![true; cells * t],
            compatible,
            ones: vec![t; cells],
            sum_w: vec![total_w; cells],
            sum_wlogw: vec![total_wlogw; cells],
            stack: Vec::new(),
            contradiction: None,
        }
    }

    fn entropy(&self, i: usize) -> f64 {
        self.sum_w[i].ln() - self.sum_wlogw[i] / self.sum_w[i]
    }

    fn ban(&mut self, i: usize, p: usize) {
        let t = self.ps.len();
        self.allowed[i * t + p] = false;
        for d in 0..4 {
            self.compatible[(i * t + p) * 4 + d] = 0;
        }
        self.stack.push((i, p));
        let w = self.ps.weights[p] as f64;
        self.ones[i] -= 1;
        self.sum_w[i] -= w;
        self.sum_wlogw[i] -= w * w.ln();
        if self.ones[i] == 0 && self.contradiction.is_none() {
            self.contradiction = Some(i);
        }
    }

    fn propagate(&mut self) {
        let t = self.ps.len();
        while let Some((i1, p1)) = self.stack.pop() {
            let (x1, y1) = ((i1 % self.w) as isize, (i1 / self.w) as isize);
            for d in 0..4 {
                let (x2, y2) = (x1 + DIRECTIONS[d].0, y1 + DIRECTIONS[d].1);
                if x2 < 0 || y2 < 0 || x2 as usize >= self.w || y2 as usize >= self.h {
                    continue;
                }
                let i2 = y2 as usize * self.w + x2 as usize;
                for &p2 in &self.ps.adjacency[d][p1] {
                    let k = (i2 * t + p2) * 4 + d;
                    if self.compatible[k] == 0 {
                        continue;
                    }
                    self.compatible[k] -= 1;
                    if self.compatible[k] == 0 {
                        self.ban(i2, p2);
                    }
                }
            }
            if self.contradiction.is_some() {
                self.stack.clear();
                return;
            }
        }
    }

    /// Bans patterns that no pattern can support from some in-grid
    /// neighbour. Without this a set with a single pattern would never
    /// propagate at all.
    fn prune(&mut self) {
        let t = self.ps.len();
        for i in 0..self.w * self.h {
            let (x, y) = ((i % self.w) as isize, (i / self.w) as isize);
            for (d, (dx, dy)) in DIRECTIONS.iter().enumerate() {
                let (nx, ny) = (x - dx, y - dy);
                if nx < 0 || ny < 0 || nx as usize >= self.w || ny as usize >= self.h {
                    continue;
                }
                for p in 0..t {
                    if self.allowed[i * t + p] && self.compatible[(i * t + p) * 4 + d] == 0 {
                        self.ban(i, p);
                    }
                }
            }
        }
        self.propagate();
    }

    /// Ok(collapses) once every cell is decided, Err(cell) on contradiction.
    fn run(&mut self, rng: &mut ChaCha8Rng) -> Result<usize, usize> {
        let t = self.ps.len();
        let mut collapses = 0;
        self.prune();
        if let Some(c) = self.contradiction {
            return Err(c);
        }
        loop {
            let mut best: Option<(f64, usize)> = None;
            for i in 0..self.w * self.h {
                let noise: f64 = rng.random::<f64>() * 1e-6;
                match self.ones[i] {
                    0 => return Err(i),
                    1 => continue,
                    _ => {
                        let e = self.entropy(i) + noise;
                        if best.is_none_or(|(b, _)| e < b) {
                            best = Some((e, i));
                        }
                    }
                }
            }
            let Some((_, i)) = best else { return Ok(collapses) };
            let total = self.sum_w[i];
            let mut r = rng.random::<f64>() * total;
            let mut chosen = None;
            for p in 0..t {
                if self.allowed[i * t + p] {
                    chosen = Some(p);
                    r -= self.ps.weights[p] as f64;
                    if r < 0.0 {
                        break;
                    }
                }
            }
            let chosen = chosen.expect("cell has allowed patterns");
            for p in 0..t {
                if p != chosen && self.allowed[i * t + p] {
                    self.ban(i, p);
                }
            }
            collapses += 1;
            self.propagate();
            if let Some(c) = self.contradiction {
                return Err(c);
            }
        }
    }
}

/// Generates a `width`×`height` grid in which every n×n window is one of
/// the patterns. The wave covers each window position (the output is not
/// toroidal), so cells near the right and top edges take their tiles from
/// the last pattern that covers them. Attempt `a` uses seed `seed + a`.
pub fn wfc_generate(
    ps: &PatternSet,
    width: usize,
    height: usize,
    seed: u64,
    max_restarts: usize,
) -> Result<WfcOutput, ProcgenError> {
    if ps.is_empty() {
        return Err(ProcgenError::EmptyPatternSet);
    }
    let n = ps.n;
    if width < n || height < n {
        return Err(ProcgenError::OutputTooSmall { n, width, height });
    }
    let (ww, wh) = (width - n + 1, height - n + 1);
    let t = ps.len();
    let mut last = (0, 0);
    for attempt in 0..=max_restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let mut wave = Wave::new(ps, ww, wh);
        match wave.run(&mut rng) {
            Ok(collapses) => {
                let mut tiles = vec![0; width * height];
                for y in 0..height {
                    for x in 0..width {
                        let (cx, cy) = (x.min(ww - 1), y.min(wh - 1));
                        let cell = cy * ww + cx;
                        let p = (0..t).find(|&p| wave.allowed[cell * t + p]).expect("collapsed cell");
                        tiles[y * width + x] = ps.patterns[p][(y - cy) * n + (x - cx)];
                    }
                }
                let grid = TileGrid { width, height, tiles, palette: ps.palette.clone() };
                return Ok(WfcOutput { grid, restarts: attempt, collapses });
            }
            Err(cell) => last = (cell % ww, cell / ww),
        }
    }
    Err(ProcgenError::Contradiction { attempts: max_restarts + 1, cell: last })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(w: usize, h: usize) -> TileGrid {
        let rows: Vec<String> =
            (0..h).map(|y| (0..w).map(|x| if (x + y) % 2 == 0 { '.' } else { '#' }).collect()).collect();
        TileGrid::from_rows(&rows.iter().map(String::as_str).collect::<Vec<_>>())
    }

    #[test]
    fn uniform_sample_has_one_pattern() {
        let s = TileGrid::from_rows(&["....", "....", "....", "...."]);
        let ps = extract_patterns(&s, 3, PatternOpts { periodic: false, ..Default::default() }).unwrap();
        assert_eq!(ps.len(), 1);
        // 4 windows, each with a single distinct variant
        assert_eq!(ps.weights, [4]);
        let out = wfc_generate(&ps, 6, 5, 0, 0).unwrap();
        assert_eq!(out.restarts, 0);
        assert!(out.grid.tiles.iter().all(|&t| t == FREE_TILE));
    }

    #[test]
    fn checkerboard_has_two_patterns() {
        let ps = extract_patterns(&checkerboard(2, 2), 2, PatternOpts::default()).unwrap();
        assert_eq!(ps.len(), 2);
    }

    #[test]
    fn checkerboard_output_alternates() {
        let ps = extract_patterns(&checkerboard(4, 4), 2, PatternOpts::default()).unwrap();
        for seed in 0..5 {
            let g = wfc_generate(&ps, 9, 7, seed, 0).unwrap().grid;
            let phase = g.get(0, 0);
            for y in 0..7 {
                for x in 0..9 {
                    assert_eq!(g.get(x, y), phase ^ ((x + y) % 2) as u8);
                }
            }
        }
    }

    #[test]
    fn too_small_sample() {
        let s = TileGrid::from_rows(&["..", ".."]);
        assert_eq!(
            extract_patterns(&s, 3, PatternOpts::default()),
            Err(ProcgenError::SampleTooSmall { n: 3, width: 2, height: 2 })
        );
    }

    #[test]
    fn rotation_and_reflection() {
        let p = vec![1, 2, 3, 4];
        assert_eq!(rotate(&p, 2), [3, 1, 4, 2]);
        assert_eq!(reflect(&p, 2), [2, 1, 4, 3]);
        let r = (0..4).fold(p.clone(), |acc, _| rotate(&acc, 2));
        assert_eq!(r, p);
    }

    #[test]
    fn adjacency_is_symmetric() {
        let s = TileGrid::from_rows(&["..#.", ".##.", "....", "#..#"]);
        let ps = extract_patterns(&s, 2, PatternOpts::default()).unwrap();
        for d in 0..4 {
            for p in 0..ps.len() {
                for &q in &ps.adjacency[d][p] {
                    assert!(ps.adjacency[opposite(d)][q].contains(&p));
                }
            }
        }
    }

    #[test]
    fn tilegrid_to_occgrid_values() {
        let t = TileGrid::from_rows(&[".#", "#."]);
        let g = tilegrid_to_occgrid(&t, 0.5).unwrap();
        assert_eq!(g.cells, [255, 0, 0, 255]);
        assert_eq!(g.free_thresh, 0.196);
        assert!(matches!(tilegrid_to_occgrid(&t, 0.0), Err(ProcgenError::InvalidResolution(_))));
    }

    #[test]
    fn image_round_trip() {
        let t = TileGrid::from_rows(&["..#", "##."]);
        assert_eq!(TileGrid::from_image(&t.to_pgm()).unwrap(), t);
    }
}
