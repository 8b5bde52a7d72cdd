//! Solenoids `F(z, w) = (A z mod 1, lambda_c w + theta(z))` over an expanding
//! integer endomorphism of the torus `T^k`, with planar unit-disk fibers.
//!
//! The attractor meets each fiber in a Cantor set: at level `n` it is covered
//! by `|det A|^n` disks of radius `lambda_c^n`, one per backward itinerary.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{contract, LabError, Result};
use crate::model::Check;
use crate::seeding;

/// One harmonic `weight (cos 2 pi m.z, sin 2 pi m.z)` of the separation map.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTerm {
    pub weight: f64,
    pub freq: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolenoidSpec {
    pub matrix: DMatrix<i64>,
    pub contraction: f64,
    pub theta: Vec<ThetaTerm>,
}

/// Default cap on the number of disks in a slice cover.
pub const DEFAULT_DISK_CAP: usize = 1 << 22;

/// Sample count used by the separation check in [`SolenoidSpec::checks`].
const VALIDATION_SAMPLES: usize = 512;

impl Default for SolenoidSpec {
    fn default() -> Self {
        SolenoidSpec {
            matrix: DMatrix::from_row_slice(2, 2, &[2, 0, 0, 2]),
            contraction: 1.0 / 32.0,
            theta: vec![
                ThetaTerm {
                    weight: 0.25,
                    freq: vec![1, 0],
                },
                ThetaTerm {
                    weight: 1.0 / 16.0,
                    freq: vec![0, 1],
                },
            ],
        }
    }
}

impl SolenoidSpec {
    /// Doubling map on the circle with `theta(z) = (cos 2 pi z, sin 2 pi z) / 2`.
    pub fn classical(contraction: f64) -> Self {
        SolenoidSpec {
            matrix: DMatrix::from_element(1, 1, 2),
            contraction,
            theta: vec![ThetaTerm {
                weight: 0.5,
                freq: vec![1],
            }],
        }
    }

    pub fn k(&self) -> usize {
        self.matrix.nrows()
    }

    fn matrix_f64(&self) -> DMatrix<f64> {
        self.matrix.map(|v| v as f64)
    }

    /// `|det A|`, the number of preimages of each base point.
    pub fn branch_count(&self) -> u64 {
        if !self.matrix.is_square() || self.k() == 0 {
            return 0;
        }
        self.matrix_f64().determinant().abs().round() as u64
    }

    pub fn theta(&self, z: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for t in &self.theta {
            let phase = TAU * t.freq.iter().zip(z).map(|(m, v)| *m as f64 * v).sum::<f64>();
            out[0] += t.weight * phase.cos();
            out[1] += t.weight * phase.sin();
        }
        out
    }

    /// `2 x k` Jacobian of theta.
    pub fn theta_jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(2, self.k());
        for t in &self.theta {
            let phase = TAU * t.freq.iter().zip(z).map(|(m, v)| *m as f64 * v).sum::<f64>();
            for (c, m) in t.freq.iter().enumerate() {
                let f = t.weight * TAU * *m as f64;
                j[(0, c)] -= f * phase.sin();
                j[(1, c)] += f * phase.cos();
            }
        }
        j
    }

    /// `(z, w)` packed as `k` base coordinates followed by two fiber ones.
    pub fn step_into(&self, x: &[f64], out: &mut [f64]) {
        let k = self.k();
        for i in 0..k {
            let mut acc = 0.0;
            for j in 0..k {
                acc += self.matrix[(i, j)] as f64 * x[j];
            }
            let r = acc.rem_euclid(1.0);
            out[i] = if r >= 1.0 { 0.0 } else { r };
        }
        let th = self.theta(&x[..k]);
        out[k] = self.contraction * x[k] + th[0];
        out[k + 1] = self.contraction * x[k + 1] + th[1];
    }

    pub fn step(&self, z: &[f64], w: [f64; 2]) -> (Vec<f64>, [f64; 2]) {
        let k = self.k();
        let mut x = z.to_vec();
        x.extend_from_slice(&w);
        let mut out = vec![0.0; k + 2];
        self.step_into(&x, &mut out);
        (out[..k].to_vec(), [out[k], out[k + 1]])
    }

    pub fn tangent(&self, x: &[f64]) -> DMatrix<f64> {
        let k = self.k();
        let mut t = DMatrix::zeros(k + 2, k + 2);
        t.view_mut((0, 0), (k, k)).copy_from(&self.matrix_f64());
        t.view_mut((k, 0), (2, k)).copy_from(&self.theta_jacobian(&x[..k]));
        t[(k, k)] = self.contraction;
        t[(k + 1, k + 1)] = self.contraction;
        t
    }

    /// Representatives `r` of `Z^k / A Z^k`; the preimages of `z` are
    /// `A^{-1}(z + r) mod 1`.
    pub fn coset_representatives(&self) -> Result<Vec<Vec<i64>>> {
        let k = self.k();
        let count = self.branch_count();
        let inv = self
            .matrix_f64()
            .try_inverse()
            .ok_or_else(|| contract("matrix is singular"))?;
        let bound = count as i64;
        let mut reps: Vec<Vec<i64>> = Vec::new();
        let mut seen: Vec<Vec<i64>> = Vec::new();
        let total = (bound as u64).checked_pow(k as u32).ok_or_else(|| contract("too many candidates"))?;
        for idx in 0..total {
            let mut r = vec![0i64; k];
            let mut rest = idx;
            for c in r.iter_mut() {
                *c = (rest % bound as u64) as i64;
                rest /= bound as u64;
            }
            let v = &inv * nalgebra::DVector::from_iterator(k, r.iter().map(|&c| c as f64));
            // A^{-1} r has denominators dividing det A, so det * frac is integral
            let key: Vec<i64> = v
                .iter()
                .map(|c| ((c.rem_euclid(1.0) * count as f64).round() as i64).rem_euclid(bound))
                .collect();
            if !seen.contains(&key) {
                seen.push(key);
                reps.push(r);
                if reps.len() as u64 == count {
                    break;
                }
            }
        }
        Ok(reps)
    }

    /// Preimages of `z` in coset order.
    pub fn preimages(&self, z: &[f64], reps: &[Vec<i64>], inv: &DMatrix<f64>) -> Vec<Vec<f64>> {
        let k = self.k();
        reps.iter()
            .map(|r| {
                let shifted = nalgebra::DVector::from_iterator(k, z.iter().zip(r).map(|(a, b)| a + *b as f64));
                (inv * shifted)
                    .iter()
                    .map(|v| {
                        let m = v.rem_euclid(1.0);
                        if m >= 1.0 {
                            0.0
                        } else {
                            m
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn checks(&self) -> Vec<Check> {
        let k = self.k();
        let mut checks = vec![Check::new(
            "torus dimension",
            k >= 1 && self.matrix.is_square(),
            format!("A is {}x{}, k >= 1", self.matrix.nrows(), self.matrix.ncols()),
        )];
        if !checks[0].passed {
            return checks;
        }
        let count = self.branch_count();
        checks.push(Check::new("branch count", count >= 2, format!("|det A| = {count} >= 2")));
        let min_modulus = self
            .matrix_f64()
            .complex_eigenvalues()
            .iter()
            .map(|c| c.norm())
            .fold(f64::INFINITY, f64::min);
        checks.push(Check::new(
            "expanding base",
            min_modulus > 1.0,
            format!("min |eigenvalue| = {min_modulus:.6} > 1"),
        ));
        let lc = self.contraction;
        checks.push(Check::new("fiber contraction", lc > 0.0 && lc < 1.0, format!("0 < lambda_c = {lc} < 1")));
        let decay = count as f64 * lc * lc;
        checks.push(Check::new(
            "slice area decay",
            decay < 1.0,
            format!("|det A| lambda_c^2 = {decay} < 1"),
        ));
        let freq_ok = self.theta.iter().all(|t| t.freq.len() == k && t.weight.is_finite());
        let sup_theta: f64 = self.theta.iter().map(|t| t.weight.abs()).sum();
        checks.push(Check::new(
            "fiber image in disk",
            freq_ok && sup_theta + lc <= 1.0,
            format!("sum |weights| + lambda_c = {} <= 1", sup_theta + lc),
        ));
        if count >= 2 && freq_ok && min_modulus > 1.0 {
            match verify_injectivity(self, VALIDATION_SAMPLES, 0) {
                Ok(r) => checks.push(Check::new(
                    "disjoint fiber images",
                    r.pass,
                    format!("min |theta(z_i) - theta(z_j)| - 2 lambda_c = {:.6} > 0", r.min_margin),
                )),
                Err(e) => checks.push(Check::new("disjoint fiber images", false, e.to_string())),
            }
        }
        checks
    }
}

pub fn solenoid_step(spec: &SolenoidSpec, z: &[f64], w: [f64; 2]) -> (Vec<f64>, [f64; 2]) {
    spec.step(z, w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    pub samples: usize,
    pub min_margin: f64,
    pub witness: Vec<f64>,
    /// Coset indices of the closest pair at the witness.
    pub witness_pair: (usize, usize),
    pub pass: bool,
}

/// Minimum over sampled base points and preimage pairs of
/// `|theta(z_i) - theta(z_j)| - 2 lambda_c`.
pub fn verify_injectivity(spec: &SolenoidSpec, samples: usize, seed: u64) -> Result<SeparationReport> {
    if samples == 0 {
        return Err(contract("at least one sample"));
    }
    let k = spec.k();
    let reps = spec.coset_representatives()?;
    let inv = spec.matrix_f64().try_inverse().ok_or_else(|| contract("matrix is singular"))?;
    let best = (0..samples)
        .into_par_iter()
        .map(|i| {
            let z: Vec<f64> = if i == 0 {
                vec![0.0; k]
            } else {
                let mut rng = seeding::rng_for(seed, 0x736f_6c65, i as u64);
                (0..k).map(|_| rng.gen::<f64>()).collect()
            };
            let images: Vec<[f64; 2]> = spec.preimages(&z, &reps, &inv).iter().map(|p| spec.theta(p)).collect();
            let mut local = (f64::INFINITY, i, (0, 0), z);
            for a in 0..images.len() {
                for b in a + 1..images.len() {
                    let d = (images[a][0] - images[b][0]).hypot(images[a][1] - images[b][1]);
                    let margin = d - 2.0 * spec.contraction;
                    if margin < local.0 {
                        local.0 = margin;
                        local.2 = (a, b);
                    }
                }
            }
            local
        })
        .reduce(
            || (f64::INFINITY, usize::MAX, (0, 0), Vec::new()),
            |a, b| if a.0 < b.0 || (a.0 == b.0 && a.1 <= b.1) { a } else { b },
        );
    Ok(SeparationReport {
        samples,
        min_margin: best.0,
        witness: best.3,
        witness_pair: best.2,
        pass: best.0 > 0.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceCover {
    pub z: Vec<f64>,
    pub level: u32,
    pub centers: Vec<[f64; 2]>,
    pub radius: f64,
    pub area: f64,
    /// Radius of the largest disk inside the union of the cover.
    pub inscribed_radius: f64,
    /// Smallest distance between two centers; `None` for a single disk.
    pub min_center_gap: Option<f64>,
}

impl SliceCover {
    pub fn disjoint(&self) -> bool {
        self.min_center_gap.is_some_and(|g| g > 2.0 * self.radius)
    }
}

pub fn slice_cover(spec: &SolenoidSpec, z: &[f64], n: u32) -> Result<SliceCover> {
    slice_cover_capped(spec, z, n, DEFAULT_DISK_CAP)
}

pub fn slice_cover_capped(spec: &SolenoidSpec, z: &[f64], n: u32, cap: usize) -> Result<SliceCover> {
    if z.len() != spec.k() {
        return Err(contract(format!("basepoint has {} coordinates, torus has {}", z.len(), spec.k())));
    }
    let count = spec.branch_count() as u128;
    let requested = count.checked_pow(n).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(LabError::Resource {
            what: "slice disks",
            requested,
            cap: cap as u128,
        });
    }
    let reps = spec.coset_representatives()?;
    let inv = spec.matrix_f64().try_inverse().ok_or_else(|| contract("matrix is singular"))?;
    let z0: Vec<f64> = z.iter().map(|v| v.rem_euclid(1.0)).collect();
    let centers = if n == 0 {
        vec![[0.0, 0.0]]
    } else {
        // first branch in parallel, the rest sequentially, in itinerary order
        spec.preimages(&z0, &reps, &inv)
            .par_iter()
            .map(|zp| {
                let th = spec.theta(zp);
                centers_at(spec, zp, n - 1, &reps, &inv)
                    .into_iter()
                    .map(|c| [spec.contraction * c[0] + th[0], spec.contraction * c[1] + th[1]])
                    .collect::<Vec<_>>()
            })
            .flatten()
            .collect()
    };
    let radius = spec.contraction.powi(n as i32);
    let area = PI * (spec.branch_count() as f64 * spec.contraction * spec.contraction).powi(n as i32);
    let min_center_gap = min_gap(&centers);
    let inscribed_radius = if n == 0 || min_center_gap.is_some_and(|g| g > 2.0 * radius) {
        radius
    } else {
        cluster_radius(&centers, radius)
    };
    Ok(SliceCover {
        z: z0,
        level: n,
        centers,
        radius,
        area,
        inscribed_radius,
        min_center_gap,
    })
}

fn centers_at(spec: &SolenoidSpec, z: &[f64], n: u32, reps: &[Vec<i64>], inv: &DMatrix<f64>) -> Vec<[f64; 2]> {
    if n == 0 {
        return vec![[0.0, 0.0]];
    }
    let mut out = Vec::new();
    for zp in spec.preimages(z, reps, inv) {
        let th = spec.theta(&zp);
        for c in centers_at(spec, &zp, n - 1, reps, inv) {
            out.push([spec.contraction * c[0] + th[0], spec.contraction * c[1] + th[1]]);
        }
    }
    out
}

/// Smallest pairwise distance, by a sweep over x-sorted centers.
fn min_gap(centers: &[[f64; 2]]) -> Option<f64> {
    if centers.len() < 2 {
        return None;
    }
    let mut sorted = centers.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut best = f64::INFINITY;
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            if sorted[j][0] - sorted[i][0] >= best {
                break;
            }
            best = best.min((sorted[j][0] - sorted[i][0]).hypot(sorted[j][1] - sorted[i][1]));
        }
    }
    Some(best)
}

/// Upper bound on the inscribed radius of a union of overlapping disks: half
/// the largest extent of a connected cluster.
fn cluster_radius(centers: &[[f64; 2]], r: f64) -> f64 {
    let cell = 2.0 * r;
    let key = |c: &[f64; 2]| ((c[0] / cell).floor() as i64, (c[1] / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, c) in centers.iter().enumerate() {
        grid.entry(key(c)).or_default().push(i);
    }
    let mut parent: Vec<usize> = (0..centers.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for (i, c) in centers.iter().enumerate() {
        let (gx, gy) = key(c);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = grid.get(&(gx + dx, gy + dy)) {
                    for &j in list {
                        if j > i && (c[0] - centers[j][0]).hypot(c[1] - centers[j][1]) <= cell {
                            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    let mut extent: HashMap<usize, [f64; 4]> = HashMap::new();
    for (i, c) in centers.iter().enumerate() {
        let root = find(&mut parent, i);
        let e = extent.entry(root).or_insert([c[0], c[0], c[1], c[1]]);
        e[0] = e[0].min(c[0]);
        e[1] = e[1].max(c[0]);
        e[2] = e[2].min(c[1]);
        e[3] = e[3].max(c[1]);
    }
    extent
        .values()
        .map(|e| r + 0.5 * (e[1] - e[0]).hypot(e[3] - e[2]))
        .fold(r, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarVerdict {
    pub z: Vec<f64>,
    pub level: u32,
    pub radius: f64,
    /// No disk of radius `threshold` lies in the attractor slice: either the
    /// cover is too thin for one, or (n >= 1) the cover is a disjoint union
    /// of disks nesting into disjoint sub-disks, so the slice is a Cantor set.
    pub no_disk: bool,
    /// Distinct cover disks are pairwise separated.
    pub totally_disconnected: bool,
    pub min_center_gap: Option<f64>,
}

pub fn star_condition(spec: &SolenoidSpec, fibers: &[Vec<f64>], n: u32, threshold: f64) -> Result<Vec<StarVerdict>> {
    if !(threshold > 0.0) {
        return Err(contract("disk threshold must be positive"));
    }
    let nesting = n >= 1 && verify_injectivity(spec, VALIDATION_SAMPLES, 0)?.pass;
    fibers
        .iter()
        .map(|z| {
            let cover = slice_cover(spec, z, n)?;
            Ok(StarVerdict {
                z: cover.z.clone(),
                level: n,
                radius: cover.radius,
                no_disk: cover.inscribed_radius < threshold || (nesting && cover.disjoint()),
                totally_disconnected: cover.disjoint(),
                min_center_gap: cover.min_center_gap,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_first_step() {
        let s = SolenoidSpec::default();
        let (z, w) = s.step(&[0.0, 0.0], [0.0, 0.0]);
        assert_eq!(z, vec![0.0, 0.0]);
        assert_eq!(w, [0.25 + 1.0 / 16.0, 0.0]);
    }

    #[test]
    fn two_steps_unrolled() {
        let s = SolenoidSpec::default();
        let z = [0.3, 0.7];
        let (z1, w1) = s.step(&z, [0.0, 0.0]);
        let (_, w2) = s.step(&z1, w1);
        let t0 = s.theta(&z);
        let t1 = s.theta(&z1);
        assert!((w2[0] - (s.contraction * t0[0] + t1[0])).abs() < 1e-15);
        assert!((w2[1] - (s.contraction * t0[1] + t1[1])).abs() < 1e-15);
    }

    #[test]
    fn base_is_independent_of_fiber() {
        let s = SolenoidSpec::default();
        let (a, _) = s.step(&[0.3, 0.9], [0.5, -0.2]);
        let (b, _) = s.step(&[0.3, 0.9], [-0.1, 0.7]);
        assert_eq!(a, b);
    }

    #[test]
    fn coset_count() {
        assert_eq!(SolenoidSpec::default().coset_representatives().unwrap().len(), 4);
        assert_eq!(SolenoidSpec::classical(0.1).coset_representatives().unwrap().len(), 2);
    }

    #[test]
    fn separation_verdicts() {
        let d = verify_injectivity(&SolenoidSpec::default(), 1000, 7).unwrap();
        assert!(d.pass);
        assert!(d.min_margin >= 1.0 / 16.0 - 1e-12);
        assert!(d.min_margin <= 1.0 / 16.0 + 1e-9);
        let tight = SolenoidSpec {
            contraction: 1.0 / 8.0,
            ..SolenoidSpec::default()
        };
        assert!(!verify_injectivity(&tight, 1000, 7).unwrap().pass);
        assert!(verify_injectivity(&SolenoidSpec::classical(0.1), 1000, 7).unwrap().pass);
    }

    #[test]
    fn level_zero_slice() {
        let c = slice_cover(&SolenoidSpec::default(), &[0.1, 0.2], 0).unwrap();
        assert_eq!(c.centers.len(), 1);
        assert_eq!(c.area, PI);
        assert_eq!(c.inscribed_radius, 1.0);
        let v = star_condition(&SolenoidSpec::default(), &[vec![0.1, 0.2]], 0, 0.5).unwrap();
        assert!(!v[0].no_disk);
    }

    #[test]
    fn level_three_slice() {
        let c = slice_cover(&SolenoidSpec::default(), &[0.1, 0.2], 3).unwrap();
        assert_eq!(c.centers.len(), 64);
        assert_eq!(c.radius, 32f64.powi(-3));
        assert_eq!(c.area, PI * 2f64.powi(-24));
        assert!(c.disjoint());
    }
}
