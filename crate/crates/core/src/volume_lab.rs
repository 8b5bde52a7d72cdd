//! Box-subdivision covers of invariant sets, trapped-set volume series and
//! Monte Carlo escape fractions.
//!
//! Covers are sampled outer approximations: each kept box is tested on a
//! lattice of points whose spacing adapts to the local tangent, and every
//! lattice cell marks all finer boxes meeting the bounding box of its corner
//! images.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{contract, LabError, Result};
use crate::geometric_lorenz::PhaseFlow;
use crate::model::ModelHandle;
use crate::seeding;

/// Uniform-depth dyadic boxes inside a root box, stored as packed multi-index
/// keys (`depth` bits per axis, axis 0 in the low bits).
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCollection {
    dim: usize,
    depth: u32,
    root: Vec<(f64, f64)>,
    keys: Vec<u64>,
}

impl BoxCollection {
    /// The root box alone.
    pub fn root(root: Vec<(f64, f64)>) -> Self {
        BoxCollection {
            dim: root.len(),
            depth: 0,
            root,
            keys: vec![0],
        }
    }

    /// Collection from arbitrary keys; sorts and removes duplicates.
    pub fn from_keys(root: Vec<(f64, f64)>, depth: u32, mut keys: Vec<u64>) -> Result<Self> {
        let dim = root.len();
        if dim == 0 || dim as u32 * depth > 64 {
            return Err(contract(format!("depth {depth} in dimension {dim} exceeds 64 key bits")));
        }
        let limit = 1u128 << (dim as u32 * depth);
        if keys.iter().any(|&k| (k as u128) >= limit) {
            return Err(contract("box key outside the root"));
        }
        keys.par_sort_unstable();
        keys.dedup();
        Ok(BoxCollection { dim, depth, root, keys })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn root_box(&self) -> &[(f64, f64)] {
        &self.root
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn root_volume(&self) -> f64 {
        self.root.iter().map(|(lo, hi)| hi - lo).product()
    }

    /// Volume of one box; exact for dyadic root sides.
    pub fn box_volume(&self) -> f64 {
        self.root_volume() * 2f64.powi(-((self.depth * self.dim as u32) as i32))
    }

    /// Count times box volume.
    pub fn measure(&self) -> f64 {
        self.len() as f64 * self.box_volume()
    }

    pub fn side(&self, axis: usize) -> f64 {
        (self.root[axis].1 - self.root[axis].0) * 2f64.powi(-(self.depth as i32))
    }

    pub fn index(&self, key: u64) -> Vec<u64> {
        unpack(key, self.dim, self.depth)
    }

    pub fn key_of(&self, index: &[u64]) -> u64 {
        pack(index, self.depth)
    }

    pub fn bounds(&self, key: u64) -> Vec<(f64, f64)> {
        self.index(key)
            .iter()
            .enumerate()
            .map(|(a, &i)| {
                let w = self.side(a);
                let lo = self.root[a].0 + i as f64 * w;
                (lo, lo + w)
            })
            .collect()
    }

    /// Key of the box containing `x`, if `x` lies in the root.
    pub fn locate(&self, x: &[f64]) -> Option<u64> {
        let n = 1u64 << self.depth;
        let mut key = 0u64;
        for (a, &v) in x.iter().enumerate() {
            let (lo, hi) = self.root[a];
            if !(v >= lo && v <= hi) {
                return None;
            }
            let i = (((v - lo) / self.side(a)).floor() as u64).min(n - 1);
            key |= i << (a as u32 * self.depth);
        }
        Some(key)
    }

    pub fn contains_key(&self, key: u64) -> bool {
        self.keys.binary_search(&key).is_ok()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.locate(x).is_some_and(|k| self.contains_key(k))
    }

    /// Length of the union of the shadows of the boxes on one axis.
    pub fn projection_length(&self, axis: usize) -> f64 {
        let mask = if self.depth == 0 { 0 } else { (1u64 << self.depth) - 1 };
        let shift = axis as u32 * self.depth;
        let mut idx: Vec<u64> = self.keys.iter().map(|k| (k >> shift) & mask).collect();
        idx.par_sort_unstable();
        idx.dedup();
        idx.len() as f64 * self.side(axis)
    }

    /// Key of the parent box one level up.
    pub fn parent_key(&self, key: u64) -> u64 {
        let idx: Vec<u64> = self.index(key).iter().map(|i| i >> 1).collect();
        pack(&idx, self.depth - 1)
    }

    /// Whether every box lies inside a box of `coarser`.
    pub fn nested_in(&self, coarser: &BoxCollection) -> bool {
        if coarser.depth > self.depth || coarser.dim != self.dim {
            return false;
        }
        let shift = self.depth - coarser.depth;
        self.keys.par_iter().all(|&k| {
            let idx: Vec<u64> = self.index(k).iter().map(|i| i >> shift).collect();
            coarser.contains_key(pack(&idx, coarser.depth))
        })
    }
}

fn pack(index: &[u64], depth: u32) -> u64 {
    index
        .iter()
        .enumerate()
        .fold(0u64, |k, (a, &i)| k | (i << (a as u32 * depth)))
}

fn unpack(key: u64, dim: usize, depth: u32) -> Vec<u64> {
    let mask = if depth == 0 { 0 } else { (1u64 << depth) - 1 };
    (0..dim).map(|a| (key >> (a as u32 * depth)) & mask).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubdivisionConfig {
    /// Minimum lattice points per axis in each box.
    pub stencil: usize,
    /// Seeded random test points per box.
    pub random_points: usize,
    /// Refine the lattice per axis from the tangent at the box center.
    pub adaptive: bool,
    pub max_lattice: usize,
    /// Extra lattice nodes `w 2^{-j/2}` accumulating at a singular line
    /// `x_0 = 0` crossing or bounding the box.
    pub singular_nodes: usize,
    pub max_depth: u32,
    /// Largest number of candidate child boxes processed at any depth.
    pub cap: usize,
    pub seed: u64,
    /// Images outside this box are discarded; defaults to the root.
    pub region: Option<Vec<(f64, f64)>>,
    /// Also require a kept box to map into the kept cover.
    pub backward_pass: bool,
    /// Largest tolerated share of unusable lattice nodes.
    pub saturation_limit: f64,
}

/// Default cap on candidate boxes per depth.
pub const DEFAULT_BOX_CAP: usize = 1 << 26;

impl SubdivisionConfig {
    pub fn new(max_depth: u32, seed: u64) -> Self {
        SubdivisionConfig {
            stencil: 3,
            random_points: 8,
            adaptive: true,
            max_lattice: 33,
            singular_nodes: 120,
            max_depth,
            cap: DEFAULT_BOX_CAP,
            seed,
            region: None,
            backward_pass: false,
            saturation_limit: 0.5,
        }
    }

    fn validate(&self, boxes: &BoxCollection) -> Result<()> {
        if self.stencil < 2 || self.max_lattice < self.stencil {
            return Err(contract("stencil needs at least 2 points per axis and max_lattice >= stencil"));
        }
        if let Some(r) = &self.region {
            if r.len() != boxes.dim || r.iter().any(|(lo, hi)| lo > hi) {
                return Err(contract("region must be a box of the chart dimension"));
            }
        }
        if self.cap < boxes.len() {
            return Err(LabError::Resource {
                what: "boxes",
                requested: boxes.len() as u128,
                cap: self.cap as u128,
            });
        }
        Ok(())
    }
}

/// Test lattice of one box with the images of its nodes.
struct Probe {
    nodes: Vec<Vec<f64>>,
    images: Vec<f64>,
    ok: Vec<bool>,
    randoms: Vec<(Vec<f64>, Option<Vec<f64>>)>,
}

impl Probe {
    fn node_count(&self) -> usize {
        self.nodes.iter().map(|n| n.len()).product()
    }
}

/// Child box key ranges (inclusive) per axis meeting `[lo, hi]`, after
/// clipping to the region; `None` when the clipped box is empty.
struct Grid<'a> {
    root: &'a [(f64, f64)],
    region: &'a [(f64, f64)],
    depth: u32,
    side: Vec<f64>,
}

impl Grid<'_> {
    fn point_key(&self, x: &[f64]) -> Option<u64> {
        let n = 1u64 << self.depth;
        let mut key = 0u64;
        for a in 0..x.len() {
            let v = x[a];
            if !(v >= self.region[a].0 && v <= self.region[a].1 && v >= self.root[a].0 && v <= self.root[a].1) {
                return None;
            }
            let i = (((v - self.root[a].0) / self.side[a]).floor() as u64).min(n - 1);
            key |= i << (a as u32 * self.depth);
        }
        Some(key)
    }

    fn range(&self, lo: &[f64], hi: &[f64]) -> Option<Vec<(u64, u64)>> {
        let n = 1u64 << self.depth;
        let mut out = Vec::with_capacity(lo.len());
        for a in 0..lo.len() {
            let l = lo[a].max(self.region[a].0).max(self.root[a].0);
            let h = hi[a].min(self.region[a].1).min(self.root[a].1);
            if !(l <= h) {
                return None;
            }
            let i0 = (((l - self.root[a].0) / self.side[a]).floor() as u64).min(n - 1);
            let i1 = ((((h - self.root[a].0) / self.side[a]).ceil() as u64).saturating_sub(1)).clamp(i0, n - 1);
            out.push((i0, i1));
        }
        Some(out)
    }

    fn keys_in(&self, ranges: &[(u64, u64)], out: &mut Vec<u64>) {
        let dim = ranges.len();
        let mut idx: Vec<u64> = ranges.iter().map(|r| r.0).collect();
        loop {
            out.push(pack(&idx, self.depth));
            let mut a = 0;
            loop {
                if a == dim {
                    return;
                }
                if idx[a] < ranges[a].1 {
                    idx[a] += 1;
                    break;
                }
                idx[a] = ranges[a].0;
                a += 1;
            }
        }
    }
}

fn build_probe(model: &ModelHandle, bounds: &[(f64, f64)], cfg: &SubdivisionConfig, depth: u32, key: u64) -> Probe {
    let m = model.model();
    let dim = bounds.len();
    let widths: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let mut counts = vec![cfg.stencil; dim];
    if cfg.adaptive {
        let center: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        match m.tangent(&center) {
            Ok(t) => {
                for (i, c) in counts.iter_mut().enumerate() {
                    let spread: f64 = (0..dim).map(|j| t[(j, i)].abs() * widths[i] / widths[j]).sum();
                    let want = (2.0 * spread).ceil() + 1.0;
                    *c = if want.is_finite() {
                        (want as usize).clamp(cfg.stencil, cfg.max_lattice)
                    } else {
                        cfg.max_lattice
                    };
                }
            }
            Err(_) => counts.iter_mut().for_each(|c| *c = cfg.max_lattice),
        }
    }
    let singular = m.singular_distance(&vec![0.0; dim]).is_some();
    let nodes: Vec<Vec<f64>> = (0..dim)
        .map(|a| {
            let (lo, hi) = bounds[a];
            let n = counts[a];
            let mut v: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
            v[n - 1] = hi;
            if a == 0 && singular && lo <= 0.0 && hi >= 0.0 {
                let w = hi - lo;
                for j in 1..=cfg.singular_nodes {
                    let d = w * 2f64.powf(-(j as f64) / 2.0);
                    for p in [d, -d] {
                        if p > lo && p < hi {
                            v.push(p);
                        }
                    }
                }
                v.sort_by(f64::total_cmp);
                v.dedup();
            }
            v
        })
        .collect();

    let total: usize = nodes.iter().map(|n| n.len()).product();
    let mut images = vec![0.0; total * dim];
    let mut ok = vec![false; total];
    let mut point = vec![0.0; dim];
    let mut idx = vec![0usize; dim];
    for flat in 0..total {
        for a in 0..dim {
            point[a] = nodes[a][idx[a]];
        }
        ok[flat] = m.step_into(&point, &mut images[flat * dim..(flat + 1) * dim]).is_ok();
        for a in 0..dim {
            idx[a] += 1;
            if idx[a] < nodes[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }

    let mut rng = seeding::rng_for(cfg.seed, depth as u64, key);
    let randoms = (0..cfg.random_points)
        .map(|_| {
            let p: Vec<f64> = bounds.iter().map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>()).collect();
            let img = m.step(&p).ok();
            (p, img)
        })
        .collect();
    Probe {
        nodes,
        images,
        ok,
        randoms,
    }
}

/// Calls `visit(cell_lo, cell_hi, marks)` for each lattice cell and each
/// random point of a probe, with the keys it marks at the grid depth.
fn for_each_mark(probe: &Probe, grid: &Grid, dim: usize, mut visit: impl FnMut(&[f64], &[f64], &[u64])) {
    let lens: Vec<usize> = probe.nodes.iter().map(|n| n.len()).collect();
    let strides: Vec<usize> = (0..dim).map(|a| lens[..a].iter().product()).collect();
    let cells: Vec<usize> = lens.iter().map(|l| l - 1).collect();
    let cell_total: usize = cells.iter().product();
    let corners = 1usize << dim;
    let root_widths: Vec<f64> = grid.root.iter().map(|(lo, hi)| hi - lo).collect();
    let mut cidx = vec![0usize; dim];
    let mut lo = vec![0.0; dim];
    let mut hi = vec![0.0; dim];
    let mut cell_lo = vec![0.0; dim];
    let mut cell_hi = vec![0.0; dim];
    let mut marks = Vec::new();
    for _ in 0..cell_total {
        for a in 0..dim {
            cell_lo[a] = probe.nodes[a][cidx[a]];
            cell_hi[a] = probe.nodes[a][cidx[a] + 1];
        }
        lo.iter_mut().for_each(|v| *v = f64::INFINITY);
        hi.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
        let mut usable = 0;
        for c in 0..corners {
            let flat: usize = (0..dim).map(|a| (cidx[a] + ((c >> a) & 1)) * strides[a]).sum();
            if !probe.ok[flat] {
                continue;
            }
            usable += 1;
            for a in 0..dim {
                let v = probe.images[flat * dim + a];
                lo[a] = lo[a].min(v);
                hi[a] = hi[a].max(v);
            }
        }
        marks.clear();
        let wide = (0..dim).any(|a| hi[a] - lo[a] > 0.25 * root_widths[a]);
        if usable == corners && !wide {
            if let Some(r) = grid.range(&lo, &hi) {
                grid.keys_in(&r, &mut marks);
            }
        } else {
            // singular corner or a jump inside the cell: corners only
            for c in 0..corners {
                let flat: usize = (0..dim).map(|a| (cidx[a] + ((c >> a) & 1)) * strides[a]).sum();
                if probe.ok[flat] {
                    if let Some(k) = grid.point_key(&probe.images[flat * dim..(flat + 1) * dim]) {
                        marks.push(k);
                    }
                }
            }
        }
        visit(&cell_lo, &cell_hi, &marks);
        for a in 0..dim {
            cidx[a] += 1;
            if cidx[a] < cells[a] {
                break;
            }
            cidx[a] = 0;
        }
    }
    for (p, img) in &probe.randoms {
        marks.clear();
        if let Some(k) = img.as_ref().and_then(|q| grid.point_key(q)) {
            marks.push(k);
        }
        visit(p, p, &marks);
    }
}

fn unusable_share(probe: &Probe) -> (usize, usize) {
    let bad = probe.ok.iter().filter(|o| !**o).count() + probe.randoms.iter().filter(|r| r.1.is_none()).count();
    (bad, probe.node_count() + probe.randoms.len())
}

/// One bisect-and-select step: every box is split along all axes, and a child
/// is kept iff some test image of the current cover meets it (and, with the
/// backward pass, one of its own test cells maps into the kept children).
pub fn subdivide_select(model: &ModelHandle, boxes: &BoxCollection, cfg: &SubdivisionConfig) -> Result<BoxCollection> {
    cfg.validate(boxes)?;
    if model.dim() != boxes.dim {
        return Err(contract("model and cover dimensions differ"));
    }
    let dim = boxes.dim;
    let depth = boxes.depth + 1;
    if dim as u32 * depth > 64 {
        return Err(contract("cover depth exceeds 64 key bits"));
    }
    let candidates = (boxes.len() as u128) << dim;
    if candidates > cfg.cap as u128 {
        return Err(LabError::Resource {
            what: "boxes",
            requested: candidates,
            cap: cfg.cap as u128,
        });
    }
    let region = cfg.region.clone().unwrap_or_else(|| boxes.root.clone());
    let side: Vec<f64> = (0..dim).map(|a| boxes.side(a) / 2.0).collect();
    let grid = Grid {
        root: &boxes.root,
        region: &region,
        depth,
        side,
    };

    let per_box: Vec<(Vec<u64>, usize, usize)> = boxes
        .keys
        .par_iter()
        .map(|&key| {
            let probe = build_probe(model, &boxes.bounds(key), cfg, boxes.depth, key);
            let (bad, total) = unusable_share(&probe);
            let mut hits = Vec::new();
            for_each_mark(&probe, &grid, dim, |_, _, marks| hits.extend_from_slice(marks));
            hits.sort_unstable();
            hits.dedup();
            (hits, bad, total)
        })
        .collect();
    let (bad, total) = per_box.iter().fold((0, 0), |acc, r| (acc.0 + r.1, acc.1 + r.2));
    if total > 0 && bad as f64 > cfg.saturation_limit * total as f64 {
        return Err(LabError::Saturation { unusable: bad, total });
    }
    let mut hits: Vec<u64> = per_box.into_iter().flat_map(|r| r.0).collect();
    hits.par_sort_unstable();
    hits.dedup();
    // keep children of current boxes only
    let child = BoxCollection {
        dim,
        depth,
        root: boxes.root.clone(),
        keys: Vec::new(),
    };
    let kept: Vec<u64> = hits
        .into_par_iter()
        .filter(|&k| boxes.contains_key(child.parent_key(k)))
        .collect();
    let forward = BoxCollection { keys: kept, ..child };
    if !cfg.backward_pass {
        return Ok(forward);
    }

    let survivors: Vec<u64> = boxes
        .keys
        .par_iter()
        .flat_map_iter(|&key| {
            let bounds = boxes.bounds(key);
            let kids: Vec<u64> = children(&forward, key, boxes.depth)
                .into_iter()
                .filter(|k| forward.contains_key(*k))
                .collect();
            let mut keep = vec![false; kids.len()];
            if !kids.is_empty() {
                let kid_bounds: Vec<Vec<(f64, f64)>> = kids.iter().map(|k| forward.bounds(*k)).collect();
                let probe = build_probe(model, &bounds, cfg, boxes.depth, key);
                for_each_mark(&probe, &grid, dim, |lo, hi, marks| {
                    if !marks.iter().any(|m| forward.contains_key(*m)) {
                        return;
                    }
                    for (i, kb) in kid_bounds.iter().enumerate() {
                        if !keep[i] && overlaps(lo, hi, kb) {
                            keep[i] = true;
                        }
                    }
                });
            }
            kids.into_iter().zip(keep).filter(|(_, k)| *k).map(|(c, _)| c).collect::<Vec<_>>()
        })
        .collect();
    BoxCollection::from_keys(forward.root, depth, survivors)
}

fn children(level: &BoxCollection, parent: u64, parent_depth: u32) -> Vec<u64> {
    let dim = level.dim;
    let pidx = unpack(parent, dim, parent_depth);
    (0..1u64 << dim)
        .map(|bits| {
            let idx: Vec<u64> = (0..dim).map(|a| 2 * pidx[a] + ((bits >> a) & 1)).collect();
            pack(&idx, level.depth)
        })
        .collect()
}

/// Whether the cell `[lo, hi]` meets the box in its half-open interior sense.
fn overlaps(lo: &[f64], hi: &[f64], b: &[(f64, f64)]) -> bool {
    lo.iter().zip(hi).zip(b).all(|((l, h), (bl, bh))| {
        if l == h {
            *l >= *bl && *l <= *bh
        } else {
            *l < *bh && *h > *bl
        }
    })
}

/// Covers at depths `0..=depth` starting from the root box.
pub fn relative_attractor(
    model: &ModelHandle,
    root: &[(f64, f64)],
    depth: u32,
    cfg: &SubdivisionConfig,
) -> Result<Vec<BoxCollection>> {
    if depth > cfg.max_depth {
        return Err(LabError::Resource {
            what: "subdivision depth",
            requested: depth as u128,
            cap: cfg.max_depth as u128,
        });
    }
    let mut covers = vec![BoxCollection::root(root.to_vec())];
    for _ in 0..depth {
        let next = subdivide_select(model, covers.last().expect("non-empty"), cfg)?;
        covers.push(next);
    }
    Ok(covers)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesParameter {
    Depth,
    Time,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeSeries {
    pub parameter: SeriesParameter,
    pub points: Vec<(f64, f64)>,
    pub boxes: Vec<u64>,
}

impl VolumeSeries {
    pub fn new(parameter: SeriesParameter, points: Vec<(f64, f64)>, boxes: Vec<u64>) -> Result<Self> {
        if points.iter().any(|p| !(p.1 >= 0.0)) {
            return Err(contract("measures must be non-negative"));
        }
        Ok(VolumeSeries { parameter, points, boxes })
    }

    pub fn is_non_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeClass {
    DecayToZero,
    Plateau,
}

impl VolumeClass {
    pub fn label(self) -> &'static str {
        match self {
            VolumeClass::DecayToZero => "decay-to-zero",
            VolumeClass::Plateau => "plateau",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: VolumeClass,
    /// Least-squares slope of `ln m` over the window; `None` when zeros in the
    /// window decided the class.
    pub slope: Option<f64>,
    pub window: usize,
    pub threshold: f64,
}

pub const DEFAULT_PLATEAU_THRESHOLD: f64 = 0.01;

pub fn fit_classify(series: &VolumeSeries, window: usize, plateau_threshold: f64) -> Result<Classification> {
    if window < 3 {
        return Err(contract("window must hold at least 3 points"));
    }
    if window > series.points.len() {
        return Err(LabError::InsufficientData(format!(
            "window {window} exceeds series length {}",
            series.points.len()
        )));
    }
    let tail = &series.points[series.points.len() - window..];
    if tail.iter().any(|p| p.1 <= 0.0) {
        return Ok(Classification {
            class: VolumeClass::DecayToZero,
            slope: None,
            window,
            threshold: plateau_threshold,
        });
    }
    let n = window as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let my = tail.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    if sxx == 0.0 {
        return Err(contract("window parameters must not all coincide"));
    }
    let slope = sxy / sxx;
    Ok(Classification {
        class: if slope.abs() < plateau_threshold {
            VolumeClass::Plateau
        } else {
            VolumeClass::DecayToZero
        },
        slope: Some(slope),
        window,
        threshold: plateau_threshold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EscapeEstimate {
    pub samples: usize,
    pub survivors: usize,
    pub fraction: f64,
    pub standard_error: f64,
}

/// Fraction of uniform samples of `region` whose first `steps` iterates stay
/// in `region`.
pub fn escape_fraction(
    model: &ModelHandle,
    region: &[(f64, f64)],
    samples: usize,
    steps: usize,
    seed: u64,
) -> Result<EscapeEstimate> {
    if samples == 0 {
        return Err(contract("at least one sample"));
    }
    if region.len() != model.dim() {
        return Err(contract("region dimension differs from the model"));
    }
    let m = model.model();
    let inside = |x: &[f64]| x.iter().zip(region).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi);
    let survivors = (0..samples)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = seeding::rng_for(seed, 0x6573_6361, i as u64);
            let mut x: Vec<f64> = region.iter().map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>()).collect();
            let mut y = vec![0.0; x.len()];
            for _ in 0..steps {
                if m.step_into(&x, &mut y).is_err() || !inside(&y) {
                    return false;
                }
                std::mem::swap(&mut x, &mut y);
            }
            true
        })
        .count();
    let p = survivors as f64 / samples as f64;
    Ok(EscapeEstimate {
        samples,
        survivors,
        fraction: p,
        standard_error: (p * (1.0 - p) / samples as f64).sqrt(),
    })
}

/// Agreement between a grid volume fraction and a Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub grid_fraction: f64,
    pub mc_fraction: f64,
    pub combined_se: f64,
    pub z: f64,
    pub pass: bool,
}

/// Compares a grid fraction (over `grid_cells` cells) with a Monte Carlo
/// estimate within `k` combined standard errors. The Monte Carlo error uses
/// `max(p, 1/N)` in place of `p`, so an all-escape sample keeps a nonzero bar.
pub fn cross_check(grid_fraction: f64, grid_cells: u64, mc: &EscapeEstimate, k: f64) -> CrossCheck {
    let n = mc.samples as f64;
    let p = mc.fraction;
    let se_mc = (p.max(1.0 / n) * (1.0 - p).max(1.0 / n) / n).sqrt();
    let g = grid_fraction;
    let se_grid = (g * (1.0 - g) / grid_cells.max(1) as f64).sqrt();
    let combined_se = (se_mc * se_mc + se_grid * se_grid).sqrt();
    let z = (p - g).abs() / combined_se;
    CrossCheck {
        grid_fraction: g,
        mc_fraction: p,
        combined_se,
        z,
        pass: z <= k,
    }
}

/// Section-level box `x_range x y_range`; the phase set is this box times
/// `[0, 1)` in the roof fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrappingRegion {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Default for TrappingRegion {
    fn default() -> Self {
        TrappingRegion {
            x: (-0.75, 0.75),
            y: (-0.75, 0.75),
        }
    }
}

impl TrappingRegion {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x.0 && p[0] <= self.x.1 && p[1] >= self.y.0 && p[1] <= self.y.1
    }

    pub fn area(&self) -> f64 {
        (self.x.1 - self.x.0) * (self.y.1 - self.y.0)
    }

    /// Phase-space box `region x [0, 1)`.
    pub fn phase_box(&self) -> Vec<(f64, f64)> {
        vec![self.x, self.y, (0.0, 1.0 - f64::EPSILON)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrappedSeries {
    pub series: VolumeSeries,
    pub grid_depth: u32,
    pub region: TrappingRegion,
}

/// Returns used when checking that the region traps the flow.
const TRAP_CHECK_RETURNS: usize = 4;

/// Checks on seeded samples that forward returns stay in the region.
pub fn check_trapping(flow: &PhaseFlow, region: &TrappingRegion, samples: usize, seed: u64) -> Result<()> {
    let witness = (0..samples).into_par_iter().find_map_first(|i| {
        let mut rng = seeding::rng_for(seed, 0x7472_6170, i as u64);
        let mut p = [
            region.x.0 + (region.x.1 - region.x.0) * rng.gen::<f64>(),
            region.y.0 + (region.y.1 - region.y.0) * rng.gen::<f64>(),
        ];
        let start = p;
        for r in 1..=TRAP_CHECK_RETURNS {
            match flow.map.image(p) {
                Ok(q) if region.contains(q) => p = q,
                Ok(q) => return Some(format!("orbit of {start:?} leaves at return {r}: {q:?}")),
                Err(_) => return None,
            }
        }
        None
    });
    match witness {
        Some(w) => Err(LabError::NonTrapping(w)),
        None => Ok(()),
    }
}

/// Measure of the phase-space grid boxes whose centers have a backward orbit
/// inside `region x [0,1)` for all times in `[0, T]`, for each `T` in `times`.
pub fn trapped_volume_series(
    flow: &PhaseFlow,
    region: &TrappingRegion,
    times: &[f64],
    grid_depth: u32,
    seed: u64,
) -> Result<TrappedSeries> {
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return Err(contract("times must be a non-empty increasing non-negative grid"));
    }
    if grid_depth == 0 || grid_depth > 12 {
        return Err(contract(format!("grid depth {grid_depth} must lie in 1..=12")));
    }
    if !(region.x.0 >= -0.75 && region.x.1 <= 0.75 && region.y.0 >= -0.75 && region.y.1 <= 0.75)
        || region.x.0 >= region.x.1
        || region.y.0 >= region.y.1
    {
        return Err(contract("trapping region must be a non-degenerate box inside the section"));
    }
    check_trapping(flow, region, 4096, seed)?;
    let n = 1usize << grid_depth;
    let t_max = *times.last().expect("non-empty");
    let hx = (region.x.1 - region.x.0) / n as f64;
    let hy = (region.y.1 - region.y.0) / n as f64;
    // histogram over how many grid times each box survives
    let counts: Vec<u64> = (0..n * n)
        .into_par_iter()
        .fold(
            || vec![0u64; times.len() + 1],
            |mut hist, col| {
                let x = region.x.0 + (col % n) as f64 * hx + 0.5 * hx;
                let y = region.y.0 + (col / n) as f64 * hy + 0.5 * hy;
                let roof = flow.roof(x);
                let before = backward_time_in(flow, region, [x, y], t_max);
                for i in 0..n {
                    let phi = (i as f64 + 0.5) / n as f64;
                    let survival = phi * roof + before;
                    let passed = times.partition_point(|&t| t <= survival);
                    hist[passed] += 1;
                }
                hist
            },
        )
        .reduce(
            || vec![0u64; times.len() + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let total = (n * n * n) as f64;
    let volume = region.area();
    let mut points = Vec::with_capacity(times.len());
    let mut boxes = Vec::with_capacity(times.len());
    for (j, &t) in times.iter().enumerate() {
        // boxes surviving at least j+1 grid times
        let alive: u64 = counts[j + 1..].iter().sum();
        points.push((t, volume * alive as f64 / total));
        boxes.push(alive);
    }
    Ok(TrappedSeries {
        series: VolumeSeries::new(SeriesParameter::Time, points, boxes)?,
        grid_depth,
        region: *region,
    })
}

/// Backward time available from the section point `p` before a preimage
/// leaves the region, capped beyond `t_max`.
fn backward_time_in(flow: &PhaseFlow, region: &TrappingRegion, p: [f64; 2], t_max: f64) -> f64 {
    let mut q = p;
    let mut time = 0.0;
    while time < t_max {
        match flow.map.preimage(q) {
            Ok(prev) if region.contains(prev) => {
                q = prev;
                time += flow.roof(q[0]);
            }
            _ => return time,
        }
    }
    time
}
