//! Dynamically defined Cantor sets.
//!
//! A [`GapSchedule`] prescribes, for every construction level `n`, the fraction
//! `c_n` of each level-`n` interval removed from its middle. The nested family
//! of surviving intervals is an [`IntervalCover`]; all endpoints and measures
//! are exact rationals. [`CantorMapSpec`] is the expanding 2-to-1 map whose
//! maximal invariant set is the limit Cantor set: it maps every depth-`(n+1)`
//! interval onto a depth-`n` interval and fills each gap with a monotone cubic.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{contract, LabError, Result};
use crate::model::Check;

pub type Rational = BigRational;

/// Default cap on the number of intervals a cover may hold.
pub const DEFAULT_INTERVAL_CAP: usize = 1 << 26;

/// Default depth at which [`CantorMapSpec`] stops resolving the construction.
pub const DEFAULT_MAX_DEPTH: usize = 30;

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `1 / (2 (n+1)^2)`.
fn inverse_square_gap(n: usize) -> Rational {
    let m = BigInt::from(n as u64 + 1);
    Rational::new(BigInt::one(), BigInt::from(2) * &m * &m)
}

/// How an explicit schedule continues past its listed entries.
#[derive(Debug, Clone, PartialEq)]
pub enum TailRule {
    RepeatLast,
    /// Continue with `1 / (2 (n+1)^2)` at the absolute level index.
    InverseSquare,
    Constant(Rational),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GapSchedule {
    Constant(Rational),
    /// `c_n = 1 / (2 (n+1)^2)`.
    InverseSquare,
    Explicit {
        entries: Vec<Rational>,
        tail: Option<TailRule>,
    },
}

impl GapSchedule {
    /// Middle-gap fraction at level `n`.
    pub fn gap(&self, n: usize) -> Result<Rational> {
        match self {
            GapSchedule::Constant(c) => Ok(c.clone()),
            GapSchedule::InverseSquare => Ok(inverse_square_gap(n)),
            GapSchedule::Explicit { entries, tail } => {
                if let Some(c) = entries.get(n) {
                    return Ok(c.clone());
                }
                match tail {
                    None => Err(contract(format!(
                        "explicit schedule has {} entries and no tail rule, level {n} requested",
                        entries.len()
                    ))),
                    Some(TailRule::RepeatLast) => entries
                        .last()
                        .cloned()
                        .ok_or_else(|| contract("explicit schedule with no entries cannot repeat")),
                    Some(TailRule::InverseSquare) => Ok(inverse_square_gap(n)),
                    Some(TailRule::Constant(c)) => Ok(c.clone()),
                }
            }
        }
    }

    pub fn gap_f64(&self, n: usize) -> Result<f64> {
        self.gap(n).map(|c| to_f64(&c))
    }

    /// Checks that every gap fraction lies in (0,1) and that explicit schedules
    /// declare how they continue.
    pub fn checks(&self) -> Vec<Check> {
        let zero = Rational::zero();
        let one = Rational::one();
        let in_unit = |c: &Rational| c > &zero && c < &one;
        let mut checks = Vec::new();
        match self {
            GapSchedule::Constant(c) => checks.push(Check::new(
                "gap fraction in (0,1)",
                in_unit(c),
                format!("0 < c = {c} < 1"),
            )),
            GapSchedule::InverseSquare => checks.push(Check::new(
                "gap fraction in (0,1)",
                true,
                "c_n = 1/(2(n+1)^2) <= 1/2",
            )),
            GapSchedule::Explicit { entries, tail } => {
                let bad = entries.iter().position(|c| !in_unit(c));
                checks.push(Check::new(
                    "gap fraction in (0,1)",
                    bad.is_none() && !entries.is_empty(),
                    match bad {
                        Some(i) => format!("0 < c_{i} = {} < 1 violated", entries[i]),
                        None if entries.is_empty() => "no entries".to_string(),
                        None => format!("{} entries in (0,1)", entries.len()),
                    },
                ));
                let tail_ok = match tail {
                    None => false,
                    Some(TailRule::Constant(c)) => in_unit(c),
                    Some(_) => true,
                };
                checks.push(Check::new(
                    "tail rule declared and admissible",
                    tail_ok,
                    match tail {
                        None => "no tail rule".to_string(),
                        Some(TailRule::Constant(c)) => format!("tail constant 0 < {c} < 1"),
                        Some(t) => format!("{t:?}"),
                    },
                ));
            }
        }
        checks
    }

    pub fn validate(&self) -> Result<()> {
        match self.checks().into_iter().find(|c| !c.passed) {
            Some(c) => Err(contract(format!("{}: {}", c.name, c.detail))),
            None => Ok(()),
        }
    }
}

/// Nested interval family at one construction depth.
///
/// All intervals at a given depth share the same length, so the cover stores
/// left endpoints as numerators over one common denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalCover {
    depth: usize,
    denominator: BigInt,
    lefts: Vec<BigInt>,
    length: BigInt,
}

impl IntervalCover {
    /// The single interval `[left, left + length]`.
    pub fn single(left: &Rational, length: &Rational) -> Self {
        let den = left.denom() * length.denom();
        IntervalCover {
            depth: 0,
            lefts: vec![left.numer() * length.denom()],
            length: length.numer() * left.denom(),
            denominator: den,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.lefts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lefts.is_empty()
    }

    /// Common length of the intervals.
    pub fn interval_length(&self) -> Rational {
        Rational::new(self.length.clone(), self.denominator.clone())
    }

    /// Exact total length.
    pub fn measure(&self) -> Rational {
        Rational::new(
            &self.length * BigInt::from(self.lefts.len()),
            self.denominator.clone(),
        )
    }

    pub fn interval(&self, i: usize) -> (Rational, Rational) {
        let l = &self.lefts[i];
        (
            Rational::new(l.clone(), self.denominator.clone()),
            Rational::new(l + &self.length, self.denominator.clone()),
        )
    }

    pub fn interval_f64(&self, i: usize) -> (f64, f64) {
        let (l, r) = self.interval(i);
        (to_f64(&l), to_f64(&r))
    }

    pub fn intervals(&self) -> impl Iterator<Item = (Rational, Rational)> + '_ {
        (0..self.len()).map(move |i| self.interval(i))
    }

    /// Index of the interval containing `x`, if any.
    pub fn locate(&self, x: &Rational) -> Option<usize> {
        // x * den compared against integer numerators
        let scaled = x * Rational::from_integer(self.denominator.clone());
        let idx = self
            .lefts
            .partition_point(|l| Rational::from_integer(l.clone()) <= scaled);
        if idx == 0 {
            return None;
        }
        let i = idx - 1;
        let right = Rational::from_integer(&self.lefts[i] + &self.length);
        (scaled <= right).then_some(i)
    }

    /// Splits every interval by removing the middle fraction `gap`.
    fn refine(&self, gap: &Rational) -> IntervalCover {
        let p = gap.numer().clone();
        let q = gap.denom().clone();
        let two_q = BigInt::from(2) * &q;
        let offset = &self.length * (&q + &p);
        let children: Vec<BigInt> = self
            .lefts
            .par_iter()
            .with_min_len(4096)
            .flat_map_iter(|l| {
                let base = l * &two_q;
                let right = &base + &offset;
                [base, right]
            })
            .collect();
        IntervalCover {
            depth: self.depth + 1,
            denominator: &self.denominator * &two_q,
            lefts: children,
            length: &self.length * (&q - &p),
        }
    }
}

/// Builds the depth-`depth` cover of the Cantor set defined by `schedule`.
pub fn build_cover(schedule: &GapSchedule, depth: usize) -> Result<IntervalCover> {
    build_cover_capped(schedule, depth, DEFAULT_INTERVAL_CAP)
}

pub fn build_cover_capped(schedule: &GapSchedule, depth: usize, cap: usize) -> Result<IntervalCover> {
    let requested = 1u128.checked_shl(depth as u32).unwrap_or(u128::MAX);
    if depth >= 127 || requested > cap as u128 {
        return Err(LabError::Resource {
            what: "interval cover",
            requested,
            cap: cap as u128,
        });
    }
    schedule.validate()?;
    let mut cover = IntervalCover::single(&ratio(-1, 2), &Rational::one());
    for n in 0..depth {
        cover = cover.refine(&schedule.gap(n)?);
    }
    Ok(cover)
}

/// Certified two-sided enclosure of the infinite product `prod (1 - c_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureBracket {
    pub lower: f64,
    pub upper: f64,
    /// Number of factors multiplied explicitly.
    pub terms: usize,
}

impl MeasureBracket {
    pub fn estimate(&self) -> f64 {
        if self.upper == 0.0 {
            0.0
        } else {
            (self.lower * self.upper).sqrt()
        }
    }
}

/// Lebesgue measure of the limit Cantor set, `prod_{n>=0} (1 - c_n)`, with
/// relative error at most `tol`.
pub fn limit_measure(schedule: &GapSchedule, tol: f64) -> Result<f64> {
    limit_measure_bracket(schedule, tol).map(|b| b.estimate())
}

pub fn limit_measure_bracket(schedule: &GapSchedule, tol: f64) -> Result<MeasureBracket> {
    if !(tol > 0.0) {
        return Err(contract("tolerance must be positive"));
    }
    schedule.validate()?;
    // schedules whose tail is a fixed positive fraction shrink to measure zero
    let zero = MeasureBracket {
        lower: 0.0,
        upper: 0.0,
        terms: 0,
    };
    let head_len = match schedule {
        GapSchedule::Constant(_) => return Ok(zero),
        GapSchedule::Explicit {
            tail: Some(TailRule::RepeatLast | TailRule::Constant(_)),
            ..
        } => return Ok(zero),
        GapSchedule::Explicit { entries, .. } => entries.len(),
        GapSchedule::InverseSquare => 0,
    };

    // Tail beyond N follows c_n = 1/(2(n+1)^2). With M = N+1,
    // 1/M <= sum_{m>=M} 1/m^2 <= 1/(M-1), and ln(1-c) >= -c - c^2 for c <= 1/2.
    let mut n_terms = head_len.max(64);
    let mut partial = 1.0f64;
    let mut done = 0usize;
    loop {
        while done < n_terms {
            partial *= 1.0 - schedule.gap_f64(done)?;
            done += 1;
        }
        let m = (n_terms + 1) as f64;
        let tail_lo = 0.5 / m;
        let tail_hi = 0.5 / (m - 1.0);
        // sum c_n^2 over the tail is at most 1/(4 * 3 (M-1)^3)
        let tail_sq = 1.0 / (12.0 * (m - 1.0).powi(3));
        let upper = partial * (-tail_lo).exp();
        let lower = partial * (-tail_hi - tail_sq).exp();
        if (upper - lower) <= tol * lower {
            return Ok(MeasureBracket {
                lower,
                upper,
                terms: n_terms,
            });
        }
        n_terms *= 2;
    }
}

/// Which piece of the map a point was evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    /// Affine piece on a bridge of the given depth.
    Bridge { depth: usize },
    /// Cubic interpolation on the gap opened at the given level.
    Gap { level: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapValue {
    pub value: f64,
    pub derivative: f64,
    pub piece: Piece,
    /// False when the point fell on a bridge of the deepest resolved level, so
    /// the affine piece stands in for unresolved finer structure.
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactMapValue {
    pub value: Rational,
    pub derivative: Rational,
    pub piece: Piece,
    pub resolved: bool,
}

/// Expanding 2-to-1 map `[-1/2, a] u [b, 1/2] -> [-1/2, 1/2]` whose maximal
/// invariant set is the Cantor set of its schedule.
///
/// The map is resolved down to `max_depth`: depth-`max_depth` bridges are
/// mapped affinely onto their images; each gap opened at a shallower level is
/// mapped onto the corresponding image gap by the cubic Hermite interpolant
/// whose endpoint slopes equal the resolved bridge slope. The result is C^1
/// and increasing on both branches.
#[derive(Debug, Clone, PartialEq)]
pub struct CantorMapSpec {
    schedule: GapSchedule,
    max_depth: usize,
    lengths: Vec<Rational>,
    lengths_f64: Vec<f64>,
    slope: Rational,
    slope_f64: f64,
    /// Correctly rounded inner ends of the two branch domains.
    ends_f64: (f64, f64),
}

impl CantorMapSpec {
    pub fn new(schedule: GapSchedule, max_depth: usize) -> Result<Self> {
        if max_depth == 0 {
            return Err(contract("max depth must be at least 1"));
        }
        schedule.validate()?;
        let mut lengths = vec![Rational::one()];
        for n in 0..max_depth {
            let c = schedule.gap(n)?;
            let next = &lengths[n] * (Rational::one() - c) / Rational::from_integer(BigInt::from(2));
            lengths.push(next);
        }
        let slope = &lengths[max_depth - 1] / &lengths[max_depth];
        let ends_f64 = (to_f64(&(ratio(-1, 2) + &lengths[1])), to_f64(&(ratio(1, 2) - &lengths[1])));
        let spec = CantorMapSpec {
            ends_f64,
            lengths_f64: lengths.iter().map(to_f64).collect(),
            slope_f64: to_f64(&slope),
            schedule,
            max_depth,
            lengths,
            slope,
        };
        if let Some(c) = spec.checks().into_iter().find(|c| !c.passed) {
            return Err(contract(format!("{}: {}", c.name, c.detail)));
        }
        Ok(spec)
    }

    pub fn with_default_depth(schedule: GapSchedule) -> Result<Self> {
        Self::new(schedule, DEFAULT_MAX_DEPTH)
    }

    pub fn schedule(&self) -> &GapSchedule {
        &self.schedule
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Slope on the deepest resolved bridges, also the derivative at every
    /// point of the Cantor set.
    pub fn resolved_slope(&self) -> &Rational {
        &self.slope
    }

    pub fn resolved_slope_f64(&self) -> f64 {
        self.slope_f64
    }

    /// Exact common length of the depth-`n` intervals.
    pub fn level_length(&self, n: usize) -> &Rational {
        &self.lengths[n]
    }

    /// Right end of the left branch domain.
    pub fn a(&self) -> Rational {
        ratio(-1, 2) + &self.lengths[1]
    }

    /// Left end of the right branch domain.
    pub fn b(&self) -> Rational {
        ratio(1, 2) - &self.lengths[1]
    }

    /// Secant slope of the cubic on a level-`m` gap (`1 <= m < max_depth`).
    pub fn gap_secant(&self, m: usize) -> Rational {
        let image = &self.lengths[m - 1] - &self.lengths[m] * Rational::from_integer(BigInt::from(2));
        let gap = &self.lengths[m] - &self.lengths[m + 1] * Rational::from_integer(BigInt::from(2));
        image / gap
    }

    /// Constraints the map must satisfy, including positivity of the cubic
    /// derivative on every gap (`s < 3 * secant`).
    pub fn checks(&self) -> Vec<Check> {
        let mut checks = self.schedule.checks();
        let three = Rational::from_integer(BigInt::from(3));
        let bad = (1..self.max_depth).find(|&m| self.slope >= &three * self.gap_secant(m));
        checks.push(Check::new(
            "monotone gap interpolation",
            bad.is_none(),
            match bad {
                Some(m) => format!(
                    "slope {} < 3 * secant {} violated on level {m}",
                    to_f64(&self.slope),
                    to_f64(&self.gap_secant(m))
                ),
                None => format!("slope {:.6} below 3x every gap secant", self.slope_f64),
            },
        ));
        let two = Rational::from_integer(BigInt::from(2));
        checks.push(Check::new(
            "expanding bridges",
            self.slope > Rational::one() && (1..=self.max_depth).all(|n| &self.lengths[n - 1] / &self.lengths[n] > two.clone() - ratio(1, 1_000_000)),
            "bridge slopes 2/(1-c_n) exceed 2 - eps",
        ));
        checks
    }

    /// Value and derivative of the map.
    pub fn eval(&self, x: f64) -> Result<MapValue> {
        let domain_err = || LabError::Domain {
            chart: "cantor branch domain",
            point: vec![x],
        };
        if !(-0.5..=0.5).contains(&x) {
            return Err(domain_err());
        }
        let len = &self.lengths_f64;
        let s = self.slope_f64;
        let mut left = -0.5;
        if x <= self.ends_f64.0 {
        } else if x >= self.ends_f64.1 {
            left = self.ends_f64.1;
        } else {
            return Err(domain_err());
        }
        let mut image_left = -0.5;
        let mut k = 1;
        loop {
            if k == self.max_depth {
                return Ok(MapValue {
                    value: image_left + s * (x - left),
                    derivative: s,
                    piece: Piece::Bridge { depth: k },
                    resolved: false,
                });
            }
            let left_end = left + len[k + 1];
            let right_start = left + len[k] - len[k + 1];
            if x <= left_end {
            } else if x >= right_start {
                left = right_start;
                image_left += len[k - 1] - len[k];
            } else {
                let h0 = image_left + len[k];
                let h1 = image_left + len[k - 1] - len[k];
                let (value, derivative) = hermite(x, left_end, right_start, h0, h1, s);
                return Ok(MapValue {
                    value,
                    derivative,
                    piece: Piece::Gap { level: k },
                    resolved: true,
                });
            }
            k += 1;
        }
    }

    /// Exact evaluation in rational arithmetic.
    pub fn eval_exact(&self, x: &Rational) -> Result<ExactMapValue> {
        let half = ratio(1, 2);
        let domain_err = || LabError::Domain {
            chart: "cantor branch domain",
            point: vec![to_f64(x)],
        };
        if x < &-half.clone() || x > &half {
            return Err(domain_err());
        }
        let len = &self.lengths;
        let mut left = -half.clone();
        if x <= &(&left + &len[1]) {
        } else if x >= &(&left + &len[0] - &len[1]) {
            left = &left + &len[0] - &len[1];
        } else {
            return Err(domain_err());
        }
        let mut image_left = -half;
        let mut k = 1;
        loop {
            if k == self.max_depth {
                return Ok(ExactMapValue {
                    value: &image_left + &self.slope * (x - &left),
                    derivative: self.slope.clone(),
                    piece: Piece::Bridge { depth: k },
                    resolved: false,
                });
            }
            let left_end = &left + &len[k + 1];
            let right_start = &left + &len[k] - &len[k + 1];
            if x <= &left_end {
            } else if x >= &right_start {
                left = right_start;
                image_left = &image_left + &len[k - 1] - &len[k];
            } else {
                let h0 = &image_left + &len[k];
                let h1 = &image_left + &len[k - 1] - &len[k];
                let (value, derivative) = hermite_exact(x, &left_end, &right_start, &h0, &h1, &self.slope);
                return Ok(ExactMapValue {
                    value,
                    derivative,
                    piece: Piece::Gap { level: k },
                    resolved: true,
                });
            }
            k += 1;
        }
    }
}

/// Cubic Hermite interpolant on `[g0, g1]` from `h0` to `h1` with slope `s`
/// at both ends. Returns (value, derivative).
fn hermite(x: f64, g0: f64, g1: f64, h0: f64, h1: f64, s: f64) -> (f64, f64) {
    let h = g1 - g0;
    let rise = h1 - h0;
    let t = (x - g0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let value = h0 + rise * (3.0 * t2 - 2.0 * t3) + s * h * (t - 2.0 * t2 + t3) + s * h * (t3 - t2);
    let secant = rise / h;
    let derivative = s + 6.0 * (secant - s) * t * (1.0 - t);
    (value, derivative)
}

fn hermite_exact(
    x: &Rational,
    g0: &Rational,
    g1: &Rational,
    h0: &Rational,
    h1: &Rational,
    s: &Rational,
) -> (Rational, Rational) {
    let int = |v: i64| Rational::from_integer(BigInt::from(v));
    let h = g1 - g0;
    let rise = h1 - h0;
    let t = (x - g0) / &h;
    let t2 = &t * &t;
    let t3 = &t2 * &t;
    let value = h0
        + &rise * (int(3) * &t2 - int(2) * &t3)
        + s * &h * (&t - int(2) * &t2 + &t3)
        + s * &h * (&t3 - &t2);
    let secant = &rise / &h;
    let derivative = s + int(6) * (secant - s) * &t * (int(1) - &t);
    (value, derivative)
}

/// Value and derivative of the Cantor map at `x`.
pub fn eval_map(spec: &CantorMapSpec, x: f64) -> Result<MapValue> {
    spec.eval(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoelderLevel {
    pub level: usize,
    /// Difference of the mean slopes of the two bridges flanking a level gap,
    /// over the gap length to the power alpha.
    pub bridge_term: f64,
    /// Sup over the gap of |phi'(t) - phi'(gap endpoint)| / |t - endpoint|^alpha.
    pub interpolation_term: f64,
    pub modulus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoelderReport {
    pub alpha: f64,
    pub levels: Vec<HoelderLevel>,
    pub running_max: Vec<f64>,
}

/// Per-level alpha-Hölder modulus of the derivative of the map.
pub fn hoelder_modulus(spec: &CantorMapSpec, alpha: f64, depth: usize) -> Result<HoelderReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(contract(format!("alpha = {alpha} must lie in (0,1]")));
    }
    if depth >= spec.max_depth {
        return Err(contract(format!(
            "depth {depth} must be below the map's max depth {}",
            spec.max_depth
        )));
    }
    // max_{t in (0,1)} t^(1-alpha) (1-t)
    let t_star = (1.0 - alpha) / (2.0 - alpha);
    let shape = t_star.powf(1.0 - alpha) * (1.0 - t_star);
    let two = Rational::from_integer(BigInt::from(2));
    let mut levels = Vec::with_capacity(depth);
    let mut running_max = Vec::with_capacity(depth);
    let mut best = 0.0f64;
    for n in 1..=depth {
        let parent = &spec.lengths[n];
        let child = &spec.lengths[n + 1];
        let gap = parent - child * &two;
        let gap_f = to_f64(&gap);
        // both children of a depth-n interval map onto depth-(n-1)'s children
        let image_child = &spec.lengths[n];
        let left_slope = image_child / child;
        let right_slope = image_child / child;
        let bridge_term = to_f64(&(left_slope - right_slope).abs()) / gap_f.powf(alpha);
        let deviation = to_f64(&(spec.gap_secant(n) - &spec.slope).abs());
        let interpolation_term = 6.0 * deviation * shape * gap_f.powf(1.0 - alpha) / gap_f;
        let modulus = bridge_term.max(interpolation_term);
        best = best.max(modulus);
        levels.push(HoelderLevel {
            level: n,
            bridge_term,
            interpolation_term,
            modulus,
        });
        running_max.push(best);
    }
    Ok(HoelderReport {
        alpha,
        levels,
        running_max,
    })
}
