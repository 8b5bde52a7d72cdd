//! One-dimensional Lorenz-like maps on `[-3/4, 3/4] \ {0}`.
//!
//! Two variants are provided. The power-law family
//! `f(x) = beta x^rho - 3/4` (x > 0), `f(x) = 3/4 - beta |x|^rho` (x < 0)
//! is C^{1+} away from the singular point. The Cantor extension wraps a
//! [`CantorMapSpec`] (which lives on `[-1/2, 1/2]`): inner pieces on the
//! central gap `(a, 0) u (0, b)` run from the bridge endpoints to `+-3/4` with
//! a square-root type singularity, and outer collars on `|x| > 1/2` are
//! Möbius pieces keeping the map C^1 and inside the domain.

use num::BigInt;
use rand::Rng;
use rayon::prelude::*;

use crate::cantor::{self, CantorMapSpec, GapSchedule, IntervalCover, Rational};
use crate::error::{contract, LabError, Result};
use crate::model::{Check, SINGULAR_FLOOR};
use crate::seeding;

/// Half-width of the domain.
pub const EDGE: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Minus,
    Plus,
}

impl Branch {
    pub fn of(x: f64) -> Branch {
        if x < 0.0 {
            Branch::Minus
        } else {
            Branch::Plus
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Branch::Minus => -1.0,
            Branch::Plus => 1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Branch::Minus => '-',
            Branch::Plus => '+',
        }
    }
}

/// Parameters of the pieces that extend the Cantor map to `[-3/4, 3/4]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionParams {
    /// Exponent `r` of the singular term `A u^r` on the inner pieces.
    pub inner_exponent: f64,
    /// Share `delta` of the inner rise carried by the singular term.
    pub inner_share: f64,
    /// Construction depth resolved by the underlying Cantor map.
    pub max_depth: usize,
}

impl Default for ExtensionParams {
    fn default() -> Self {
        ExtensionParams {
            inner_exponent: 0.5,
            inner_share: 0.2,
            max_depth: cantor::DEFAULT_MAX_DEPTH,
        }
    }
}

/// Cantor map plus its inner and collar pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct CantorExtension {
    map: CantorMapSpec,
    params: ExtensionParams,
    /// `|a| = b`, half the level-0 gap.
    half_gap: f64,
    slope: f64,
    // inner profile g(u) = coef_a u^r + coef_p u + coef_q u^2 on (0, half_gap]
    coef_a: f64,
    coef_p: f64,
    coef_q: f64,
    collar_kappa: f64,
}

impl CantorExtension {
    pub fn new(schedule: GapSchedule, params: ExtensionParams) -> Result<Self> {
        let map = CantorMapSpec::new(schedule, params.max_depth)?;
        let r = params.inner_exponent;
        let delta = params.inner_share;
        if !(r > 0.0 && r < 1.0) {
            return Err(contract(format!("inner exponent {r} must lie in (0,1)")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(contract(format!("inner share {delta} must lie in (0,1)")));
        }
        let half_gap = cantor::to_f64(&map.b());
        let slope = map.resolved_slope_f64();
        let coef_a = delta * 0.25 / half_gap.powf(r);
        let rest = slope - coef_a * r * half_gap.powf(r - 1.0);
        let coef_q = (rest * half_gap - (1.0 - delta) * 0.25) / (half_gap * half_gap);
        let coef_p = rest - 2.0 * coef_q * half_gap;
        Ok(CantorExtension {
            map,
            params,
            half_gap,
            slope,
            coef_a,
            coef_p,
            coef_q,
            collar_kappa: 4.0 * slope,
        })
    }

    pub fn map(&self) -> &CantorMapSpec {
        &self.map
    }

    pub fn params(&self) -> ExtensionParams {
        self.params
    }

    /// Inner profile and its derivative, `u in (0, half_gap]`.
    fn inner(&self, u: f64) -> (f64, f64) {
        let r = self.params.inner_exponent;
        let ur = u.powf(r);
        let value = self.coef_a * ur + self.coef_p * u + self.coef_q * u * u;
        let deriv = self.coef_a * r * ur / u + self.coef_p + 2.0 * self.coef_q * u;
        (value, deriv)
    }

    fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let s = self.slope;
        let k = self.collar_kappa;
        if x < -0.5 {
            let v = x + 0.5;
            let den = 1.0 - k * v;
            return Ok((-0.5 + s * v / den, s / (den * den)));
        }
        if x > 0.5 {
            let v = x - 0.5;
            let den = 1.0 + k * v;
            return Ok((0.5 + s * v / den, s / (den * den)));
        }
        if x.abs() < self.half_gap {
            let (g, dg) = self.inner(x.abs());
            return Ok(if x < 0.0 { (EDGE - g, dg) } else { (g - EDGE, dg) });
        }
        let v = self.map.eval(x)?;
        Ok((v.value, v.derivative))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LorenzVariant {
    PowerLaw { rho: f64, beta: f64 },
    CantorExtension(Box<CantorExtension>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorenzMapSpec {
    pub variant: LorenzVariant,
}

impl Default for LorenzMapSpec {
    fn default() -> Self {
        LorenzMapSpec::power_law(0.75, 1.8)
    }
}

impl LorenzMapSpec {
    pub fn power_law(rho: f64, beta: f64) -> Self {
        LorenzMapSpec {
            variant: LorenzVariant::PowerLaw { rho, beta },
        }
    }

    pub fn cantor_extension(schedule: GapSchedule, params: ExtensionParams) -> Result<Self> {
        Ok(LorenzMapSpec {
            variant: LorenzVariant::CantorExtension(Box::new(CantorExtension::new(schedule, params)?)),
        })
    }

    pub fn is_power_law(&self) -> bool {
        matches!(self.variant, LorenzVariant::PowerLaw { .. })
    }

    /// Target interval whose forward-invariant subset the covers approximate.
    pub fn target(&self) -> (f64, f64) {
        match self.variant {
            LorenzVariant::PowerLaw { .. } => (-EDGE, EDGE),
            LorenzVariant::CantorExtension(_) => (-0.5, 0.5),
        }
    }

    /// Value and derivative at `x`.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        if !(x.abs() <= EDGE) {
            return Err(LabError::Domain {
                chart: "lorenz interval",
                point: vec![x],
            });
        }
        if x.abs() < SINGULAR_FLOOR {
            return Err(LabError::DerivativeOverflow {
                step: 0,
                distance: x.abs(),
            });
        }
        match &self.variant {
            LorenzVariant::PowerLaw { rho, beta } => {
                let u = x.abs();
                let p = u.powf(*rho);
                let d = beta * rho * p / u;
                Ok(if x > 0.0 { (beta * p - EDGE, d) } else { (EDGE - beta * p, d) })
            }
            LorenzVariant::CantorExtension(ext) => ext.eval(x),
        }
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.eval(x).map(|v| v.0)
    }

    /// Closure of the image of a branch.
    pub fn branch_range(&self, branch: Branch) -> (f64, f64) {
        match branch {
            Branch::Plus => (-EDGE, self.value(EDGE).unwrap_or(EDGE)),
            Branch::Minus => (self.value(-EDGE).unwrap_or(-EDGE), EDGE),
        }
    }

    /// Inverse of a single branch at `y`, `None` outside the branch range.
    /// The range endpoint `-+3/4` pulls back to the singular point 0.
    pub fn branch_inverse(&self, branch: Branch, y: f64) -> Option<f64> {
        let (lo, hi) = self.branch_range(branch);
        if !(y >= lo && y <= hi) {
            return None;
        }
        match &self.variant {
            LorenzVariant::PowerLaw { rho, beta } => Some(match branch {
                Branch::Plus => ((y + EDGE) / beta).max(0.0).powf(1.0 / rho),
                Branch::Minus => -((EDGE - y) / beta).max(0.0).powf(1.0 / rho),
            }),
            LorenzVariant::CantorExtension(_) => {
                let (a, b) = match branch {
                    Branch::Plus => (0.0, EDGE),
                    Branch::Minus => (-EDGE, 0.0),
                };
                Some(self.bisect(a, b, y))
            }
        }
    }

    /// Solves `f(x) = y` on the increasing branch over `[a, b]`.
    fn bisect(&self, mut a: f64, mut b: f64, y: f64) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = if m == 0.0 {
                // only reached with one endpoint at the singular point
                if a == 0.0 {
                    -EDGE
                } else {
                    EDGE
                }
            } else {
                match self.value(m) {
                    Ok(v) => v,
                    Err(_) => break,
                }
            };
            if fm < y {
                a = m;
            } else {
                b = m;
            }
        }
        if a == 0.0 || b == 0.0 {
            if a == 0.0 {
                return b;
            }
            return a;
        }
        0.5 * (a + b)
    }

    /// Checks of the four structural properties plus the expansion floor for
    /// the power-law variant, with witnessing values.
    pub fn validate_properties(&self) -> Vec<Check> {
        let mut checks = Vec::new();
        let mut param_ok = true;
        match &self.variant {
            LorenzVariant::PowerLaw { rho, beta } => {
                param_ok = *rho > 0.0 && *rho < 1.0 && *beta > 0.0;
                checks.push(Check::new(
                    "parameters",
                    param_ok,
                    format!("0 < rho = {rho} < 1, beta = {beta} > 0"),
                ));
            }
            LorenzVariant::CantorExtension(ext) => {
                checks.extend(ext.map.checks());
            }
        }
        if !param_ok {
            return checks;
        }

        // (1) increasing branches: positive derivative on a dense sample
        let samples = 20_000;
        let mut min_deriv = f64::INFINITY;
        let mut witness = 0.0;
        for i in 0..=samples {
            let t = i as f64 / samples as f64;
            for x in [-EDGE + t * (EDGE - 1e-9), 1e-9 + t * (EDGE - 1e-9)] {
                if let Ok((_, d)) = self.eval(x) {
                    if d < min_deriv {
                        min_deriv = d;
                        witness = x;
                    }
                }
            }
        }
        checks.push(Check::new(
            "increasing branches",
            min_deriv > 0.0,
            format!("min f' = {min_deriv:.6} at x = {witness:.6} (> 0)"),
        ));

        // (2) boundary
        let left = self.value(-EDGE).unwrap_or(f64::NAN);
        let right = self.value(EDGE).unwrap_or(f64::NAN);
        checks.push(Check::new(
            "boundary maps inward",
            left > -EDGE && right < EDGE,
            format!("f(-3/4) = {left:.6} > -0.75, f(3/4) = {right:.6} < 0.75"),
        ));

        // (3) one-sided limits at 0
        let near = 1e-12;
        let lim_left = self.value(-near).unwrap_or(f64::NAN);
        let lim_right = self.value(near).unwrap_or(f64::NAN);
        checks.push(Check::new(
            "one-sided limits at 0",
            (lim_left - EDGE).abs() < 1e-4 && (lim_right + EDGE).abs() < 1e-4,
            format!("f(-1e-12) = {lim_left:.8}, f(1e-12) = {lim_right:.8}"),
        ));

        // (4) derivative blow-up at 0
        let probes: Vec<(f64, f64)> = [1e-3, 1e-6, 1e-9]
            .iter()
            .map(|&u| {
                let dl = self.eval(-u).map(|v| v.1).unwrap_or(f64::NAN);
                let dr = self.eval(u).map(|v| v.1).unwrap_or(f64::NAN);
                (dl, dr)
            })
            .collect();
        let grows = probes.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1)
            && probes[2].0 > 10.0 * probes[0].0
            && probes[2].1 > 10.0 * probes[0].1;
        checks.push(Check::new(
            "derivative blows up at 0",
            grows,
            format!(
                "f'(+-1e-3) = {:.3e}/{:.3e}, f'(+-1e-6) = {:.3e}/{:.3e}, f'(+-1e-9) = {:.3e}/{:.3e}",
                probes[0].0, probes[0].1, probes[1].0, probes[1].1, probes[2].0, probes[2].1
            ),
        ));

        if let LorenzVariant::PowerLaw { rho, beta } = self.variant {
            let floor = beta * rho * EDGE.powf(rho - 1.0);
            checks.push(Check::new(
                "expansion floor",
                floor > std::f64::consts::SQRT_2,
                format!("inf f' = beta rho (3/4)^(rho-1) = {floor:.6} > sqrt 2"),
            ));
        }
        checks
    }

    /// Infimum of the branch derivatives.
    pub fn min_derivative(&self) -> f64 {
        match &self.variant {
            LorenzVariant::PowerLaw { rho, beta } => beta * rho * EDGE.powf(rho - 1.0),
            LorenzVariant::CantorExtension(_) => {
                let n = 20_000;
                (0..=n)
                    .flat_map(|i| {
                        let t = i as f64 / n as f64;
                        [-EDGE + t * (EDGE - 1e-9), 1e-9 + t * (EDGE - 1e-9)]
                    })
                    .filter_map(|x| self.eval(x).ok().map(|v| v.1))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

pub fn validate_properties(spec: &LorenzMapSpec) -> Vec<Check> {
    spec.validate_properties()
}

/// Nested cover of the points whose first `depth` iterates stay in the target.
#[derive(Debug, Clone, PartialEq)]
pub struct LorenzCover {
    pub depth: usize,
    pub intervals: Vec<(f64, f64)>,
    /// Branch word of each interval, step 0 in the most significant of the
    /// `depth` low bits (bit set = `Plus`).
    pub itineraries: Vec<u64>,
    /// Exact cover, available for the Cantor extension.
    pub exact: Option<IntervalCover>,
}

impl LorenzCover {
    pub fn measure(&self) -> f64 {
        match &self.exact {
            Some(c) => cantor::to_f64(&c.measure()),
            None => self.intervals.iter().map(|(l, r)| r - l).sum(),
        }
    }

    pub fn exact_measure(&self) -> Option<Rational> {
        self.exact.as_ref().map(|c| c.measure())
    }

    pub fn itinerary(&self, i: usize) -> Vec<Branch> {
        decode_itinerary(self.itineraries[i], self.depth)
    }
}

pub fn decode_itinerary(word: u64, len: usize) -> Vec<Branch> {
    (0..len)
        .map(|k| {
            if (word >> (len - 1 - k)) & 1 == 1 {
                Branch::Plus
            } else {
                Branch::Minus
            }
        })
        .collect()
}

pub fn encode_itinerary(itinerary: &[Branch]) -> u64 {
    itinerary
        .iter()
        .fold(0u64, |w, b| (w << 1) | u64::from(*b == Branch::Plus))
}

pub fn invariant_cover(spec: &LorenzMapSpec, depth: usize) -> Result<LorenzCover> {
    invariant_cover_capped(spec, depth, cantor::DEFAULT_INTERVAL_CAP)
}

pub fn invariant_cover_capped(spec: &LorenzMapSpec, depth: usize, cap: usize) -> Result<LorenzCover> {
    let requested = 1u128.checked_shl(depth as u32).unwrap_or(u128::MAX);
    if depth > 62 || requested > cap as u128 {
        return Err(LabError::Resource {
            what: "interval cover",
            requested,
            cap: cap as u128,
        });
    }
    match &spec.variant {
        LorenzVariant::CantorExtension(ext) => {
            if depth == 0 {
                let exact = IntervalCover::single(&cantor::ratio(-3, 4), &cantor::ratio(3, 2));
                return Ok(LorenzCover {
                    depth,
                    intervals: vec![(-EDGE, EDGE)],
                    itineraries: vec![0],
                    exact: Some(exact),
                });
            }
            // the first iterate lands in [-1/2, 1/2] exactly on the level-1
            // bridges, after which the map acts as the shift on bridge words
            let exact = cantor::build_cover_capped(ext.map.schedule(), depth, cap)?;
            let intervals = (0..exact.len()).map(|i| exact.interval_f64(i)).collect();
            let itineraries = (0..exact.len() as u64).collect();
            Ok(LorenzCover {
                depth,
                intervals,
                itineraries,
                exact: Some(exact),
            })
        }
        LorenzVariant::PowerLaw { .. } => {
            let target = spec.target();
            let mut intervals = vec![(-EDGE, EDGE)];
            let mut words = vec![0u64];
            for level in 0..depth {
                let mut next = Vec::with_capacity(intervals.len() * 2);
                let mut next_words = Vec::with_capacity(intervals.len() * 2);
                for branch in [Branch::Minus, Branch::Plus] {
                    let (lo, hi) = spec.branch_range(branch);
                    for (&(l, r), &w) in intervals.iter().zip(&words) {
                        let l = l.max(lo).max(target.0);
                        let r = r.min(hi).min(target.1);
                        if l > r {
                            continue;
                        }
                        let (Some(pl), Some(pr)) = (spec.branch_inverse(branch, l), spec.branch_inverse(branch, r)) else {
                            continue;
                        };
                        next.push((pl, pr));
                        let bit = u64::from(branch == Branch::Plus);
                        next_words.push((bit << level) | w);
                    }
                }
                intervals = next;
                words = next_words;
            }
            Ok(LorenzCover {
                depth,
                intervals,
                itineraries: words,
                exact: None,
            })
        }
    }
}

/// Pulls `target` back along `itinerary` (step 0 applied first).
pub fn inverse_branch(spec: &LorenzMapSpec, itinerary: &[Branch], target: (f64, f64)) -> Result<(f64, f64)> {
    let (mut l, mut r) = target;
    if !(l <= r && l >= -EDGE && r <= EDGE) {
        return Err(contract(format!("target [{l}, {r}] must lie in [-3/4, 3/4]")));
    }
    for (step, &branch) in itinerary.iter().enumerate().rev() {
        let (lo, hi) = spec.branch_range(branch);
        if l < lo || r > hi {
            return Err(LabError::NoSuchBranch {
                step,
                reason: format!(
                    "[{l}, {r}] is not inside the {} branch range [{lo}, {hi}]",
                    branch.symbol()
                ),
            });
        }
        let pl = spec.branch_inverse(branch, l);
        let pr = spec.branch_inverse(branch, r);
        match (pl, pr) {
            (Some(a), Some(b)) => {
                l = a;
                r = b;
            }
            _ => {
                return Err(LabError::NoSuchBranch {
                    step,
                    reason: "inverse undefined".to_string(),
                })
            }
        }
    }
    Ok((l, r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionOptions {
    pub centers: Vec<f64>,
    /// Points sampled per pre-ball, endpoints included.
    pub samples: usize,
    /// Largest `n` enumerated exhaustively.
    pub exhaustive_limit: usize,
    /// Itineraries drawn per center beyond the exhaustive limit.
    pub sampled_itineraries: usize,
    pub seed: u64,
}

impl Default for DistortionOptions {
    fn default() -> Self {
        DistortionOptions {
            centers: (0..7).map(|i| -0.6 + 0.2 * i as f64).collect(),
            samples: 17,
            exhaustive_limit: 15,
            sampled_itineraries: 1 << 15,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionReport {
    pub n: usize,
    pub radius: f64,
    pub distortion: f64,
    pub itinerary: Vec<Branch>,
    pub center: f64,
    pub admissible: usize,
    pub exhaustive: bool,
}

pub fn distortion(spec: &LorenzMapSpec, n: usize, radius: f64) -> Result<DistortionReport> {
    distortion_with(spec, n, radius, &DistortionOptions::default())
}

pub fn distortion_with(
    spec: &LorenzMapSpec,
    n: usize,
    radius: f64,
    opts: &DistortionOptions,
) -> Result<DistortionReport> {
    if n == 0 || n > 63 {
        return Err(contract(format!("iterate count {n} must lie in 1..=63")));
    }
    if !(radius > 0.0 && radius < 0.375) {
        return Err(contract(format!("radius {radius} must lie in (0, 3/8)")));
    }
    if opts.samples < 2 {
        return Err(contract("at least two samples per pre-ball"));
    }
    let exhaustive = n <= opts.exhaustive_limit;
    let words: Vec<u64> = if exhaustive {
        (0..(1u64 << n)).collect()
    } else {
        let mut rng = seeding::rng_for(opts.seed, 0x6469_7374, n as u64);
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        (0..opts.sampled_itineraries).map(|_| rng.gen::<u64>() & mask).collect()
    };

    // (distortion, center index, word); ties resolve to the smallest index pair
    type Best = (f64, usize, u64, usize);
    let best: Best = opts
        .centers
        .par_iter()
        .enumerate()
        .flat_map_iter(|(ci, &c)| words.iter().map(move |&w| (ci, c, w)))
        .map(|(ci, c, w)| {
            let itin = decode_itinerary(w, n);
            let ball = ((c - radius).max(-EDGE), (c + radius).min(EDGE));
            match ball_distortion(spec, &itin, ball, opts.samples) {
                Some(d) => (d, ci, w, 1usize),
                None => (f64::NEG_INFINITY, ci, w, 0usize),
            }
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, u64::MAX, 0),
            |a, b| {
                let count = a.3 + b.3;
                let pick = if a.0 > b.0 || (a.0 == b.0 && (a.1, a.2) <= (b.1, b.2)) { a } else { b };
                (pick.0, pick.1, pick.2, count)
            },
        );
    if best.3 == 0 {
        return Err(LabError::InsufficientData(format!(
            "no admissible pre-ball for n = {n}, radius = {radius}"
        )));
    }
    Ok(DistortionReport {
        n,
        radius,
        distortion: best.0,
        itinerary: decode_itinerary(best.2, n),
        center: opts.centers[best.1],
        admissible: best.3,
        exhaustive,
    })
}

/// `sup |(f^n)'| / inf |(f^n)'|` over the pre-ball of `ball` along `itin`.
fn ball_distortion(spec: &LorenzMapSpec, itin: &[Branch], ball: (f64, f64), samples: usize) -> Option<f64> {
    let (l, r) = inverse_branch(spec, itin, ball).ok()?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..samples {
        let mut x = l + (r - l) * i as f64 / (samples - 1) as f64;
        let mut log_d = 0.0;
        for _ in 0..itin.len() {
            let (fx, d) = spec.eval(x).ok()?;
            log_d += d.ln();
            x = fx;
        }
        lo = lo.min(log_d);
        hi = hi.max(log_d);
    }
    Some((hi - lo).exp())
}

/// Exact endpoints `[-3/4, 3/4]` as rationals, used by exports.
pub fn domain_exact() -> (Rational, Rational) {
    (
        Rational::new(BigInt::from(-3), BigInt::from(4)),
        Rational::new(BigInt::from(3), BigInt::from(4)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_defaults_pass() {
        let spec = LorenzMapSpec::default();
        let checks = spec.validate_properties();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
        let f34 = 1.8 * 0.75f64.powf(0.75) - 0.75;
        assert!((spec.value(0.75).unwrap() - f34).abs() < 1e-15);
        assert!((f34 - 0.7007).abs() < 1e-4);
        assert!((spec.min_derivative() - 1.4507).abs() < 1e-4);
    }

    #[test]
    fn weak_scale_fails_expansion_floor_only() {
        let checks = LorenzMapSpec::power_law(0.75, 1.0).validate_properties();
        for c in &checks {
            assert_eq!(c.passed, c.name != "expansion floor", "{c:?}");
        }
    }

    #[test]
    fn large_scale_fails_boundary() {
        let checks = LorenzMapSpec::power_law(0.75, 3.0).validate_properties();
        let b = checks.iter().find(|c| c.name == "boundary maps inward").unwrap();
        assert!(!b.passed);
    }

    #[test]
    fn inverse_square_extension_passes() {
        let spec = LorenzMapSpec::cantor_extension(GapSchedule::InverseSquare, ExtensionParams::default()).unwrap();
        let checks = spec.validate_properties();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn extension_is_continuous_at_joins() {
        let spec = LorenzMapSpec::cantor_extension(GapSchedule::InverseSquare, ExtensionParams::default()).unwrap();
        let LorenzVariant::CantorExtension(ext) = &spec.variant else { unreachable!() };
        let b = ext.half_gap;
        for x in [b, -b, 0.5, -0.5] {
            let (v0, d0) = spec.eval(x - 1e-12).unwrap();
            let (v1, d1) = spec.eval(x + 1e-12).unwrap();
            assert!((v0 - v1).abs() < 1e-9, "value jump at {x}");
            assert!((d0 - d1).abs() < 1e-6 * d0.max(1.0), "slope jump at {x}: {d0} vs {d1}");
        }
    }

    #[test]
    fn depth_zero_cover() {
        for spec in [
            LorenzMapSpec::default(),
            LorenzMapSpec::cantor_extension(GapSchedule::InverseSquare, ExtensionParams::default()).unwrap(),
        ] {
            let c = invariant_cover(&spec, 0).unwrap();
            assert_eq!(c.intervals, vec![(-EDGE, EDGE)]);
            assert!((c.measure() - 1.5).abs() < 1e-15);
        }
    }

    #[test]
    fn power_law_single_inverse() {
        let spec = LorenzMapSpec::default();
        let (l, r) = inverse_branch(&spec, &[Branch::Plus], (0.1, 0.2)).unwrap();
        assert!((l - ((0.1 + 0.75) / 1.8f64).powf(1.0 / 0.75)).abs() < 1e-15);
        assert!((r - ((0.2 + 0.75) / 1.8f64).powf(1.0 / 0.75)).abs() < 1e-15);
        assert_eq!(inverse_branch(&spec, &[], (0.1, 0.2)).unwrap(), (0.1, 0.2));
    }

    #[test]
    fn inconsistent_itinerary_reports_step() {
        let spec = LorenzMapSpec::default();
        // 0.72 lies above f(3/4) so no Plus preimage exists
        let err = inverse_branch(&spec, &[Branch::Minus, Branch::Plus], (0.71, 0.72)).unwrap_err();
        assert!(matches!(err, LabError::NoSuchBranch { step: 1, .. }), "{err:?}");
    }

    #[test]
    fn itinerary_round_trip() {
        let it = vec![Branch::Plus, Branch::Minus, Branch::Minus, Branch::Plus];
        assert_eq!(decode_itinerary(encode_itinerary(&it), 4), it);
    }
}
