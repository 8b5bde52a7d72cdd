//! Finite-orbit diagnostics: dominated splitting estimates, cone-field
//! invariance and contraction of pre-balls under inverse branches.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{contract, LabError, Result};
use crate::lorenz_map::{Branch, LorenzMapSpec};
use crate::model::{ModelHandle, SINGULAR_FLOOR};
use crate::seeding;

/// Slack factor on the `lambda^{k/2}` pre-ball bound.
pub const PREBALL_SLACK: f64 = 1.1;

/// How the `E | F` frame is chosen at each tested point.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameField {
    /// The same orthonormal basis everywhere; the first `d_E` columns span E.
    Constant(DMatrix<f64>),
    /// F is spanned by the push-forward of the leading `d_F` axes along
    /// `warmup` steps of the orbit of each seed, E is its orthogonal
    /// complement; the cone is tested at the `warmup`-th iterate.
    OrbitAdapted { warmup: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpec {
    pub frame: FrameField,
    pub d_e: usize,
    /// Width `a` in `(0, 1]`.
    pub width: f64,
}

impl ConeSpec {
    pub fn new(frame: FrameField, d_e: usize, width: f64) -> Result<Self> {
        if !(width > 0.0 && width <= 1.0) {
            return Err(contract(format!("cone width {width} must lie in (0, 1]")));
        }
        if let FrameField::Constant(q) = &frame {
            let n = q.nrows();
            if !q.is_square() || d_e == 0 || d_e >= n {
                return Err(contract("frame must be square with 1 <= d_E < dimension"));
            }
            let err = (q.transpose() * q - DMatrix::identity(n, n)).amax();
            if err > 1e-10 {
                return Err(contract(format!("frame is not orthonormal (error {err:.2e})")));
            }
        } else if d_e == 0 {
            return Err(contract("d_E must be at least 1"));
        }
        Ok(ConeSpec { frame, d_e, width })
    }
}

/// Orthonormal basis of the orthogonal complement of the columns of `q`
/// (which must be orthonormal), via QR of `[q | I]`.
fn complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let k = q.ncols();
    let mut aug = DMatrix::zeros(n, k + n);
    aug.columns_mut(0, k).copy_from(q);
    aug.columns_mut(k, n).copy_from(&DMatrix::<f64>::identity(n, n));
    let mut basis: Vec<DVector<f64>> = (0..k).map(|j| q.column(j).into_owned()).collect();
    for j in k..k + n {
        let mut v = aug.column(j).into_owned();
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
        if basis.len() == n {
            break;
        }
    }
    DMatrix::from_columns(&basis[k..])
}

/// Orthonormal basis of the column span of `m`, plus the triangular factor.
fn orthonormalize(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.clone().qr();
    (qr.q(), qr.r())
}

fn max_singular(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

fn min_singular(m: &DMatrix<f64>) -> f64 {
    m.singular_values().min()
}

/// Triangular factors pushed along an orbit, with the running product kept
/// as `exp(log_scale) * product`.
struct Cocycle {
    product: DMatrix<f64>,
    log_scale: f64,
}

impl Cocycle {
    fn new(d: usize) -> Self {
        Cocycle {
            product: DMatrix::identity(d, d),
            log_scale: 0.0,
        }
    }

    fn push(&mut self, r: &DMatrix<f64>) {
        self.product = r * &self.product;
        let s = self.product.amax();
        if s > 0.0 && s.is_finite() {
            self.product /= s;
            self.log_scale += s.ln();
        }
    }

    fn ln_norm(&self) -> f64 {
        max_singular(&self.product).ln() + self.log_scale
    }

    fn ln_conorm(&self) -> f64 {
        min_singular(&self.product).ln() + self.log_scale
    }

    fn ln_det(&self) -> f64 {
        self.product.determinant().abs().ln() + self.product.nrows() as f64 * self.log_scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentMargins {
    pub seed: usize,
    /// `|Df^n|E| * |Df^-n|F(f^n x)| / lambda^n` for `n = 1..=n_max`.
    pub domination: Vec<f64>,
    /// `|Df^n|E| / lambda_E^n`.
    pub contraction: Vec<f64>,
    /// `|det Df^n|F| / exp(expansion_rate * n)`.
    pub expansion: Vec<f64>,
    /// Raw domination products before division by `lambda^n`.
    pub products: Vec<f64>,
    /// Columns span the estimated E and F at the seed.
    pub e_hat: Vec<Vec<f64>>,
    pub f_hat: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplittingReport {
    /// Largest `n_max`-th root of the domination product over segments.
    pub lambda: f64,
    pub lambda_e: f64,
    /// Smallest `C >= 1` bounding every domination and contraction margin.
    pub prefactor: f64,
    pub expansion_rate: f64,
    pub n_max: usize,
    pub d_e: usize,
    pub seeds_used: usize,
    pub seeds_skipped: usize,
    pub segments: Vec<SegmentMargins>,
    pub pass: bool,
}

impl SplittingReport {
    /// Largest relative increase of the domination product per step beyond
    /// `lambda`, over all segments.
    pub fn worst_step_ratio(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.products.windows(2).map(|w| w[1] / (self.lambda * w[0])))
            .fold(0.0, f64::max)
    }
}

struct SegmentRaw {
    seed: usize,
    ln_dom: Vec<f64>,
    ln_e: Vec<f64>,
    ln_det_f: Vec<f64>,
    e_hat: DMatrix<f64>,
    f_hat: DMatrix<f64>,
}

fn orbit_tangents(model: &ModelHandle, seed: &[f64], n: usize) -> Result<(Vec<Vec<f64>>, Vec<DMatrix<f64>>)> {
    let m = model.model();
    if !m.in_chart(seed) {
        return Err(LabError::Domain {
            chart: "seed",
            point: seed.to_vec(),
        });
    }
    let mut points = vec![seed.to_vec()];
    let mut tangents = Vec::with_capacity(n);
    let mut next = vec![0.0; seed.len()];
    for step in 0..n {
        let x = points.last().expect("non-empty");
        if let Some(d) = m.singular_distance(x) {
            if d < SINGULAR_FLOOR {
                return Err(LabError::DerivativeOverflow { step, distance: d });
            }
        }
        let t = m.tangent(x)?;
        if !t.iter().all(|v| v.is_finite()) {
            return Err(LabError::Numeric { step });
        }
        m.step_into(x, &mut next)?;
        tangents.push(t);
        points.push(next.clone());
    }
    Ok((points, tangents))
}

/// Extra orbit steps past `n_max` used to seed the backward pull of E.
const E_PAD: usize = 20;

fn segment(model: &ModelHandle, seed_index: usize, seed: &[f64], n_max: usize, d_e: usize) -> Result<SegmentRaw> {
    let (_, tangents) = orbit_tangents(model, seed, n_max + E_PAD)?;
    let dim = seed.len();
    // E at the far end: images of the most contracted directions of the last step
    let last = tangents.last().expect("n_max > 0");
    let svd = last.clone().svd(true, false);
    let u = svd.u.as_ref().ok_or(LabError::Numeric { step: n_max })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mut e = DMatrix::from_columns(&order[..d_e].iter().map(|&j| u.column(j).into_owned()).collect::<Vec<_>>());
    // pull E back with inverse tangents; es[k] spans E at the k-th iterate
    let mut es = vec![e.clone(); n_max + 1];
    for (step, t) in tangents.iter().enumerate().rev() {
        let inv = t.clone().try_inverse().ok_or(LabError::Numeric { step })?;
        e = orthonormalize(&(inv * &e)).0;
        if !e.iter().all(|v| v.is_finite()) {
            return Err(LabError::Numeric { step });
        }
        if step <= n_max {
            es[step] = e.clone();
        }
    }
    let e_hat = es[0].clone();
    let f_hat = complement(&e_hat);
    let mut ce = Cocycle::new(d_e);
    let mut cf = Cocycle::new(dim - d_e);
    let mut f = f_hat.clone();
    let mut ln_dom = Vec::with_capacity(n_max);
    let mut ln_e = Vec::with_capacity(n_max);
    let mut ln_det_f = Vec::with_capacity(n_max);
    for (k, t) in tangents[..n_max].iter().enumerate() {
        let re = es[k + 1].transpose() * t * &es[k];
        let (qf, rf) = orthonormalize(&(t * &f));
        f = qf;
        ce.push(&re);
        cf.push(&rf);
        let le = ce.ln_norm();
        ln_e.push(le);
        ln_dom.push(le - cf.ln_conorm());
        ln_det_f.push(cf.ln_det());
    }
    Ok(SegmentRaw {
        seed: seed_index,
        ln_dom,
        ln_e,
        ln_det_f,
        e_hat,
        f_hat,
    })
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

/// Estimates a dominated splitting `E | F` with `dim E = d_e` along the
/// orbits of `seeds`; `expansion_rate` is the declared rate for the
/// determinant of `Df^n` on F.
pub fn splitting_estimate(
    model: &ModelHandle,
    seeds: &[Vec<f64>],
    n_max: usize,
    d_e: usize,
    expansion_rate: f64,
) -> Result<SplittingReport> {
    let dim = model.dim();
    if d_e == 0 || d_e >= dim {
        return Err(contract(format!("d_E = {d_e} must lie in 1..{dim}")));
    }
    if n_max == 0 {
        return Err(contract("n_max must be positive"));
    }
    if seeds.iter().any(|s| s.len() != dim) {
        return Err(contract("seed dimension differs from the model"));
    }
    let raw: Vec<Option<SegmentRaw>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, s)| segment(model, i, s, n_max, d_e).ok())
        .collect();
    let skipped = raw.iter().filter(|r| r.is_none()).count();
    let raw: Vec<SegmentRaw> = raw.into_iter().flatten().collect();
    if raw.is_empty() {
        return Err(LabError::InsufficientData(format!("all {} segments hit the singular set", seeds.len())));
    }
    let nf = n_max as f64;
    let ln_lambda = raw.iter().map(|r| r.ln_dom[n_max - 1] / nf).fold(f64::NEG_INFINITY, f64::max);
    let ln_lambda_e = raw.iter().map(|r| r.ln_e[n_max - 1] / nf).fold(f64::NEG_INFINITY, f64::max);
    let segments: Vec<SegmentMargins> = raw
        .iter()
        .map(|r| {
            let steps = 1..=n_max;
            SegmentMargins {
                seed: r.seed,
                domination: steps.clone().zip(&r.ln_dom).map(|(n, l)| (l - n as f64 * ln_lambda).exp()).collect(),
                contraction: steps.clone().zip(&r.ln_e).map(|(n, l)| (l - n as f64 * ln_lambda_e).exp()).collect(),
                expansion: steps.zip(&r.ln_det_f).map(|(n, l)| (l - n as f64 * expansion_rate).exp()).collect(),
                products: r.ln_dom.iter().map(|l| l.exp()).collect(),
                e_hat: columns(&r.e_hat),
                f_hat: columns(&r.f_hat),
            }
        })
        .collect();
    let prefactor = segments
        .iter()
        .flat_map(|s| s.domination.iter().chain(&s.contraction))
        .fold(1.0f64, |a, &b| a.max(b));
    let finite = segments
        .iter()
        .all(|s| s.domination.iter().chain(&s.contraction).chain(&s.expansion).all(|v| v.is_finite()));
    let expands = segments.iter().all(|s| s.expansion.iter().all(|&v| v >= 1.0));
    let lambda = ln_lambda.exp();
    let lambda_e = ln_lambda_e.exp();
    Ok(SplittingReport {
        lambda,
        lambda_e,
        prefactor,
        expansion_rate,
        n_max,
        d_e,
        seeds_used: segments.len(),
        seeds_skipped: skipped,
        pass: finite && lambda < 1.0 && lambda_e < 1.0 && expands,
        segments,
    })
}

/// Ratio `|E-part| / |F-part|` of `v` in an orthonormal frame.
pub fn cone_coordinate(frame: &DMatrix<f64>, d_e: usize, v: &DVector<f64>) -> f64 {
    let c = frame.transpose() * v;
    let e = c.rows(0, d_e).norm();
    let f = c.rows(d_e, c.len() - d_e).norm();
    e / f
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeReport {
    pub samples: usize,
    pub points_skipped: usize,
    /// Largest `width(Df v) / a` over sampled F-cone boundary vectors.
    pub forward_ratio: f64,
    /// Largest `width(Df^-1 w) / a` over sampled E-cone boundary vectors.
    pub backward_ratio: f64,
    pub width: f64,
    pub pass: bool,
}

/// Frame at a point and at its image, plus the tangent between them.
fn frames_at(
    model: &ModelHandle,
    cone: &ConeSpec,
    seed: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let dim = seed.len();
    match &cone.frame {
        FrameField::Constant(q) => {
            let (_, t) = orbit_tangents(model, seed, 1)?;
            Ok((q.clone(), q.clone(), t.into_iter().next().expect("one tangent")))
        }
        FrameField::OrbitAdapted { warmup } => {
            let (_, mut t) = orbit_tangents(model, seed, warmup + 1)?;
            let d_f = dim - cone.d_e;
            let mut f = DMatrix::identity(dim, dim).columns(0, d_f).into_owned();
            for m in &t[..*warmup] {
                f = orthonormalize(&(m * &f)).0;
            }
            let step = t.pop().expect("warmup + 1 tangents");
            let f_next = orthonormalize(&(&step * &f)).0;
            let frame = |f: &DMatrix<f64>| {
                let e = complement(f);
                let mut q = DMatrix::zeros(dim, dim);
                q.columns_mut(0, cone.d_e).copy_from(&e);
                q.columns_mut(cone.d_e, d_f).copy_from(f);
                q
            };
            Ok((frame(&f), frame(&f_next), step))
        }
    }
}

fn unit_in(basis: &DMatrix<f64>, rng: &mut impl Rng) -> DVector<f64> {
    let k = basis.ncols();
    loop {
        let c = DVector::from_fn(k, |_, _| 2.0 * rng.gen::<f64>() - 1.0);
        let n = c.norm();
        if n > 1e-3 && n <= 1.0 {
            return basis * (c / n);
        }
    }
}

/// Samples `per_seed` boundary vectors of the F-cone (and of the E-cone) at
/// each tested point.
pub fn cone_invariance(
    model: &ModelHandle,
    cone: &ConeSpec,
    seeds: &[Vec<f64>],
    per_seed: usize,
    seed: u64,
) -> Result<ConeReport> {
    let dim = model.dim();
    if cone.d_e >= dim {
        return Err(contract("d_E must be smaller than the dimension"));
    }
    if let FrameField::Constant(q) = &cone.frame {
        if q.nrows() != dim {
            return Err(contract("frame dimension differs from the model"));
        }
    }
    if per_seed == 0 {
        return Err(contract("at least one boundary vector per seed"));
    }
    let a = cone.width;
    let d_e = cone.d_e;
    let results: Vec<Option<(f64, f64)>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let (here, there, t) = frames_at(model, cone, s).ok()?;
            let inv = t.clone().try_inverse()?;
            let e_here = here.columns(0, d_e).into_owned();
            let f_here = here.columns(d_e, dim - d_e).into_owned();
            let e_there = there.columns(0, d_e).into_owned();
            let f_there = there.columns(d_e, dim - d_e).into_owned();
            let mut rng = seeding::rng_for(seed, 0x636f_6e65, i as u64);
            let mut fwd = 0.0f64;
            let mut bwd = 0.0f64;
            for _ in 0..per_seed {
                let v = unit_in(&f_here, &mut rng) + unit_in(&e_here, &mut rng) * a;
                fwd = fwd.max(cone_coordinate(&there, d_e, &(&t * v)) / a);
                let w = unit_in(&e_there, &mut rng) + unit_in(&f_there, &mut rng) * a;
                let back = &inv * w;
                let c = here.transpose() * back;
                let ratio = c.rows(d_e, dim - d_e).norm() / c.rows(0, d_e).norm();
                bwd = bwd.max(ratio / a);
            }
            Some((fwd, bwd))
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let ok: Vec<(f64, f64)> = results.into_iter().flatten().collect();
    if ok.is_empty() {
        return Err(LabError::InsufficientData("no admissible cone seeds".into()));
    }
    let forward_ratio = ok.iter().map(|r| r.0).fold(0.0, f64::max);
    let backward_ratio = ok.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(ConeReport {
        samples: ok.len() * per_seed,
        points_skipped: skipped,
        forward_ratio,
        backward_ratio,
        width: a,
        pass: forward_ratio < 1.0 && backward_ratio < 1.0,
    })
}

/// Dynamics whose iterates should contract a small disk.
#[derive(Debug, Clone)]
pub enum PreballDynamics {
    /// Iterate the model forward (for an inverse map, this is the backward
    /// dynamics of the original).
    Forward(ModelHandle),
    /// Inverse branches of a Lorenz-like map; step `k` applies the branch
    /// `itinerary[k - 1]`.
    InverseBranch { spec: LorenzMapSpec, itinerary: Vec<Branch> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreballRow {
    pub k: usize,
    pub max_ratio: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreballTable {
    pub lambda: f64,
    pub slack: f64,
    pub pairs: usize,
    pub rows: Vec<PreballRow>,
    pub pass: bool,
}

/// Disk `center + radius * span(directions)` in the slice spanned by the
/// orthonormal columns of `directions`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceDisk {
    pub center: Vec<f64>,
    pub directions: DMatrix<f64>,
    pub radius: f64,
}

fn apply(dynamics: &PreballDynamics, x: &[f64], step: usize) -> Result<Vec<f64>> {
    match dynamics {
        PreballDynamics::Forward(m) => m.model().step(x),
        PreballDynamics::InverseBranch { spec, itinerary } => spec
            .branch_inverse(itinerary[step], x[0])
            .map(|v| vec![v])
            .ok_or_else(|| LabError::NoSuchBranch {
                step,
                reason: format!("{} outside the {} branch range", x[0], itinerary[step].symbol()),
            }),
    }
}

/// For `k = 1..=n`, the largest ratio `dist(g^k y, g^k z) / dist(y, z)` over
/// `pairs` sampled pairs of the disk, against `slack * lambda^{k/2}`.
pub fn preball_contraction(
    dynamics: &PreballDynamics,
    disk: &SliceDisk,
    n: usize,
    lambda: f64,
    pairs: usize,
    seed: u64,
) -> Result<PreballTable> {
    if !(disk.radius > 0.0) || disk.directions.nrows() != disk.center.len() || disk.directions.ncols() == 0 {
        return Err(contract("disk needs a positive radius and directions matching the center"));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(contract(format!("rate {lambda} must lie in (0, 1)")));
    }
    if let PreballDynamics::InverseBranch { itinerary, .. } = dynamics {
        if itinerary.len() < n {
            return Err(contract("itinerary shorter than the number of steps"));
        }
    }
    if n == 0 {
        return Ok(PreballTable {
            lambda,
            slack: PREBALL_SLACK,
            pairs,
            rows: Vec::new(),
            pass: true,
        });
    }
    let sample = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        let k = disk.directions.ncols();
        loop {
            let c = DVector::from_fn(k, |_, _| 2.0 * rng.gen::<f64>() - 1.0);
            if c.norm() <= 1.0 {
                let off = &disk.directions * c * disk.radius;
                return disk.center.iter().zip(off.iter()).map(|(a, b)| a + b).collect();
            }
        }
    };
    let per_pair: Vec<Vec<f64>> = (0..pairs)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut rng = seeding::rng_for(seed, 0x7072_6562, i as u64);
            let (mut y, mut z) = (sample(&mut rng), sample(&mut rng));
            let d0 = dist(&y, &z);
            if d0 == 0.0 {
                return Ok(vec![0.0; n]);
            }
            let mut out = Vec::with_capacity(n);
            for step in 0..n {
                y = apply(dynamics, &y, step)?;
                z = apply(dynamics, &z, step)?;
                out.push(dist(&y, &z) / d0);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<PreballRow> = (0..n)
        .map(|j| PreballRow {
            k: j + 1,
            max_ratio: per_pair.iter().map(|r| r[j]).fold(0.0, f64::max),
            bound: PREBALL_SLACK * lambda.powf((j + 1) as f64 / 2.0),
        })
        .collect();
    Ok(PreballTable {
        lambda,
        slack: PREBALL_SLACK,
        pairs,
        pass: rows.iter().all(|r| r.max_ratio <= r.bound),
        rows,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    fn linear(m: DMatrix<f64>) -> ModelHandle {
        ModelHandle::new(Model::Linear { matrix: m, domain: None }).unwrap()
    }

    fn diag() -> ModelHandle {
        linear(DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 3.0]))
    }

    fn seeds() -> Vec<Vec<f64>> {
        vec![vec![0.3, -0.2], vec![1.0, 1.0], vec![-0.5, 0.25]]
    }

    #[test]
    fn diagonal_splitting_is_exact() {
        let r = splitting_estimate(&diag(), &seeds(), 20, 1, 0.0).unwrap();
        assert!((r.lambda - 1.0 / 6.0).abs() < 1e-12);
        assert!((r.prefactor - 1.0).abs() < 1e-9);
        assert!(r.pass);
        for s in &r.segments {
            assert!(s.domination.iter().all(|m| (m - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn identity_fails() {
        let r = splitting_estimate(&linear(DMatrix::identity(2, 2)), &seeds(), 10, 1, 0.0).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn diagonal_cone_ratio() {
        let cone = ConeSpec::new(FrameField::Constant(DMatrix::identity(2, 2)), 1, 1.0).unwrap();
        let r = cone_invariance(&diag(), &cone, &seeds(), 50, 7).unwrap();
        assert!((r.forward_ratio - 1.0 / 6.0).abs() < 1e-12);
        assert!((r.backward_ratio - 1.0 / 6.0).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn rotation_leaves_cone() {
        let rot = linear(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        for a in [0.25, 0.5, 1.0] {
            let cone = ConeSpec::new(FrameField::Constant(DMatrix::identity(2, 2)), 1, a).unwrap();
            assert!(!cone_invariance(&rot, &cone, &seeds(), 10, 1).unwrap().pass);
        }
    }

    #[test]
    fn diagonal_e_segment_contracts() {
        let disk = SliceDisk {
            center: vec![0.0, 0.0],
            directions: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            radius: 0.1,
        };
        let t = preball_contraction(&PreballDynamics::Forward(diag()), &disk, 5, 0.25, 20, 2).unwrap();
        assert!((t.rows[1].max_ratio - 0.25).abs() < 1e-12);
        let empty = preball_contraction(&PreballDynamics::Forward(diag()), &disk, 0, 0.25, 20, 2).unwrap();
        assert!(empty.rows.is_empty());
    }
}
