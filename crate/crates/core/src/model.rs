//! Uniform handle over every model in the crate: point evaluation, one-step
//! tangents and orbit generation.

use nalgebra::DMatrix;
use num::{BigInt, BigRational, Integer, One, Zero};

use crate::cantor::{CantorMapSpec, Rational};
use crate::error::{contract, LabError, Result};
use crate::geometric_lorenz::{PhaseFlow, ReturnMapSpec, TimeDirection};
use crate::lorenz_map::LorenzMapSpec;
use crate::solenoid::SolenoidSpec;

/// Points closer than this to a singular set count as hitting it.
pub const SINGULAR_FLOOR: f64 = 1e-300;

/// One parameter constraint and its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The inequality checked, with the values that decided it.
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn usable(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Interval,
    Square,
    SuspensionSolid,
    TorusDisk,
    /// Box in `R^n` for plain linear test maps.
    Euclidean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelPoint {
    pub coords: Vec<f64>,
    pub chart: Chart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentMatrix {
    pub entries: DMatrix<f64>,
    pub basepoint: ModelPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Rational arithmetic; available for the piecewise-affine and Cantor maps.
    Exact,
    Floating,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// `x -> slope x + offset` on a closed interval.
    Affine1d { slope: f64, offset: f64, domain: (f64, f64) },
    /// `x -> 2x mod 1` on `[0, 1)`.
    CircleDoubling,
    /// `x -> M x`, optionally restricted to a box.
    Linear {
        matrix: DMatrix<f64>,
        domain: Option<Vec<(f64, f64)>>,
    },
    Lorenz(LorenzMapSpec),
    Cantor(CantorMapSpec),
    ReturnMap(ReturnMapSpec),
    /// Inverse of the return map on its image.
    ReturnMapInverse(ReturnMapSpec),
    /// Suspension flow in phase coordinates, advanced by `dt` per step.
    PhaseFlow {
        flow: PhaseFlow,
        direction: TimeDirection,
        dt: f64,
    },
    Solenoid(SolenoidSpec),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Affine1d { .. } | Model::CircleDoubling | Model::Lorenz(_) | Model::Cantor(_) => 1,
            Model::Linear { matrix, .. } => matrix.nrows(),
            Model::ReturnMap(_) | Model::ReturnMapInverse(_) => 2,
            Model::PhaseFlow { .. } => 3,
            Model::Solenoid(s) => s.k() + 2,
        }
    }

    pub fn chart(&self) -> Chart {
        match self {
            Model::Affine1d { .. } | Model::CircleDoubling | Model::Lorenz(_) | Model::Cantor(_) => Chart::Interval,
            Model::Linear { .. } => Chart::Euclidean,
            Model::ReturnMap(_) | Model::ReturnMapInverse(_) => Chart::Square,
            Model::PhaseFlow { .. } => Chart::SuspensionSolid,
            Model::Solenoid(_) => Chart::TorusDisk,
        }
    }

    /// Whether `x` lies in the chart domain.
    pub fn in_chart(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Model::Affine1d { domain, .. } => x[0] >= domain.0 && x[0] <= domain.1,
            Model::CircleDoubling => (0.0..1.0).contains(&x[0]),
            Model::Linear { domain, .. } => domain
                .as_ref()
                .is_none_or(|d| d.iter().zip(x).all(|((lo, hi), v)| v >= lo && v <= hi)),
            Model::Lorenz(_) => x[0].abs() <= 0.75,
            Model::Cantor(_) => x[0].abs() <= 0.5,
            Model::ReturnMap(_) | Model::ReturnMapInverse(_) => x[0].abs() <= 0.75 && x[1].abs() <= 0.75,
            Model::PhaseFlow { .. } => x[0].abs() <= 0.75 && x[1].abs() <= 0.75 && (0.0..1.0).contains(&x[2]),
            Model::Solenoid(s) => {
                let k = s.k();
                x[..k].iter().all(|v| (0.0..1.0).contains(v)) && x[k].hypot(x[k + 1]) <= 1.0
            }
        }
    }

    /// Distance to the singular set, for models that have one.
    pub fn singular_distance(&self, x: &[f64]) -> Option<f64> {
        match self {
            Model::Lorenz(_) | Model::ReturnMap(_) | Model::PhaseFlow { .. } => Some(x[0].abs()),
            _ => None,
        }
    }

    pub fn checks(&self) -> Vec<Check> {
        match self {
            Model::Affine1d { slope, offset, domain } => vec![
                Check::new("finite coefficients", slope.is_finite() && offset.is_finite(), format!("slope = {slope}, offset = {offset}")),
                Check::new("domain", domain.0 < domain.1, format!("{} < {}", domain.0, domain.1)),
            ],
            Model::CircleDoubling => vec![],
            Model::Linear { matrix, domain } => {
                let mut c = vec![
                    Check::new("square matrix", matrix.is_square() && matrix.nrows() > 0, format!("{}x{}", matrix.nrows(), matrix.ncols())),
                    Check::new("finite entries", matrix.iter().all(|v| v.is_finite()), "all entries finite"),
                ];
                if let Some(d) = domain {
                    c.push(Check::new(
                        "domain box",
                        d.len() == matrix.nrows() && d.iter().all(|(lo, hi)| lo < hi),
                        format!("{} nondegenerate sides", d.len()),
                    ));
                }
                c
            }
            Model::Lorenz(spec) => spec.validate_properties(),
            Model::Cantor(spec) => spec.checks(),
            Model::ReturnMap(spec) | Model::ReturnMapInverse(spec) => spec.checks(),
            Model::PhaseFlow { flow, dt, .. } => {
                let mut c = flow.checks();
                c.push(Check::new("time step", *dt > 0.0, format!("dt = {dt} > 0")));
                c
            }
            Model::Solenoid(spec) => spec.checks(),
        }
    }

    fn domain_error(&self, x: &[f64]) -> LabError {
        LabError::Domain {
            chart: match self.chart() {
                Chart::Interval => "interval",
                Chart::Square => "section",
                Chart::SuspensionSolid => "suspension phase space",
                Chart::TorusDisk => "torus x disk",
                Chart::Euclidean => "euclidean box",
            },
            point: x.to_vec(),
        }
    }

    /// One step of the dynamics, written into `out` without allocating.
    pub fn step_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if !self.in_chart(x) {
            return Err(self.domain_error(x));
        }
        if let Some(d) = self.singular_distance(x) {
            if d < SINGULAR_FLOOR {
                return Err(LabError::DerivativeOverflow { step: 0, distance: d });
            }
        }
        match self {
            Model::Affine1d { slope, offset, .. } => out[0] = slope * x[0] + offset,
            Model::CircleDoubling => {
                let v = 2.0 * x[0];
                out[0] = if v >= 1.0 { v - 1.0 } else { v };
            }
            Model::Linear { matrix, .. } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..x.len()).map(|j| matrix[(i, j)] * x[j]).sum();
                }
            }
            Model::Lorenz(spec) => out[0] = spec.value(x[0])?,
            Model::Cantor(spec) => out[0] = spec.eval(x[0])?.value,
            Model::ReturnMap(spec) => {
                let q = spec.image([x[0], x[1]])?;
                out[..2].copy_from_slice(&q);
            }
            Model::ReturnMapInverse(spec) => {
                let q = spec.preimage([x[0], x[1]])?;
                out[..2].copy_from_slice(&q);
            }
            Model::PhaseFlow { flow, direction, dt } => {
                let q = flow.flow([x[0], x[1], x[2]], *dt, *direction)?;
                out[..3].copy_from_slice(&q);
            }
            Model::Solenoid(spec) => spec.step_into(x, out),
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Numeric { step: 0 });
        }
        Ok(())
    }

    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.step_into(x, &mut out)?;
        Ok(out)
    }

    /// One-step tangent at `x`.
    pub fn tangent(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if !self.in_chart(x) {
            return Err(self.domain_error(x));
        }
        if let Some(d) = self.singular_distance(x) {
            if d < SINGULAR_FLOOR {
                return Err(LabError::DerivativeOverflow { step: 0, distance: d });
            }
        }
        let m = match self {
            Model::Affine1d { slope, .. } => DMatrix::from_element(1, 1, *slope),
            Model::CircleDoubling => DMatrix::from_element(1, 1, 2.0),
            Model::Linear { matrix, .. } => matrix.clone(),
            Model::Lorenz(spec) => DMatrix::from_element(1, 1, spec.eval(x[0])?.1),
            Model::Cantor(spec) => DMatrix::from_element(1, 1, spec.eval(x[0])?.derivative),
            Model::ReturnMap(spec) => {
                let (_, t) = spec.step([x[0], x[1]])?;
                DMatrix::from_iterator(2, 2, t.iter().copied())
            }
            Model::ReturnMapInverse(spec) => {
                let q = spec.preimage([x[0], x[1]])?;
                let t = spec.inverse_tangent_at_preimage(q)?;
                DMatrix::from_iterator(2, 2, t.iter().copied())
            }
            Model::PhaseFlow { .. } => return Err(LabError::Unsupported("tangent of the phase-coordinate flow")),
            Model::Solenoid(spec) => spec.tangent(x),
        };
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Numeric { step: 0 });
        }
        Ok(m)
    }

    /// Whether rational evaluation is available.
    pub fn supports_exact(&self) -> bool {
        matches!(self, Model::Affine1d { .. } | Model::CircleDoubling | Model::Cantor(_))
    }

    pub fn step_exact(&self, x: &[Rational]) -> Result<Vec<Rational>> {
        let point = || x.iter().map(crate::cantor::to_f64).collect::<Vec<_>>();
        match self {
            Model::Affine1d { slope, offset, domain } => {
                let lo = exact(domain.0)?;
                let hi = exact(domain.1)?;
                if x[0] < lo || x[0] > hi {
                    return Err(self.domain_error(&point()));
                }
                Ok(vec![exact(*slope)? * &x[0] + exact(*offset)?])
            }
            Model::CircleDoubling => {
                if x[0] < Rational::zero() || x[0] >= Rational::one() {
                    return Err(self.domain_error(&point()));
                }
                let v = &x[0] * Rational::from_integer(BigInt::from(2));
                Ok(vec![if v >= Rational::one() { v - Rational::one() } else { v }])
            }
            Model::Cantor(spec) => Ok(vec![spec.eval_exact(&x[0])?.value]),
            _ => Err(LabError::Unsupported("exact evaluation for this model")),
        }
    }
}

fn exact(v: f64) -> Result<Rational> {
    BigRational::from_float(v).ok_or_else(|| contract(format!("{v} has no exact rational value")))
}

/// Validated, immutable model with an evaluation mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelHandle {
    model: Model,
    mode: EvalMode,
}

impl ModelHandle {
    /// Floating-mode handle; fails with the first violated constraint.
    pub fn new(model: Model) -> Result<Self> {
        Self::with_mode(model, EvalMode::Floating)
    }

    pub fn with_mode(model: Model, mode: EvalMode) -> Result<Self> {
        if let Some(c) = model.checks().into_iter().find(|c| !c.passed) {
            return Err(contract(format!("{}: {}", c.name, c.detail)));
        }
        if mode == EvalMode::Exact && !model.supports_exact() {
            return Err(LabError::Unsupported("exact evaluation for this model"));
        }
        Ok(ModelHandle { model, mode })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn point(&self, coords: Vec<f64>) -> ModelPoint {
        ModelPoint {
            coords,
            chart: self.model.chart(),
        }
    }
}

pub fn validate_model(model: &Model) -> ValidationReport {
    ValidationReport { checks: model.checks() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub points: Vec<ModelPoint>,
    /// Index of the point found on the singular set, where the orbit stopped.
    pub singular_hit: Option<usize>,
}

fn check_start(model: &ModelHandle, start: &ModelPoint) -> Result<()> {
    if start.chart != model.model.chart() || !model.model.in_chart(&start.coords) {
        return Err(model.model.domain_error(&start.coords));
    }
    Ok(())
}

fn with_step(e: LabError, step: usize) -> LabError {
    match e {
        LabError::Numeric { .. } => LabError::Numeric { step },
        LabError::DerivativeOverflow { distance, .. } => LabError::DerivativeOverflow { step, distance },
        LabError::NoSuchBranch { reason, .. } => LabError::NoSuchBranch { step, reason },
        other => other,
    }
}

/// Orbit of `start` of length at most `n + 1`, stopping at a singular hit.
pub fn orbit(model: &ModelHandle, start: &ModelPoint, n: usize) -> Result<Orbit> {
    check_start(model, start)?;
    let m = &model.model;
    let mut points = Vec::with_capacity(n + 1);
    let mut current = start.coords.clone();
    let mut next = vec![0.0; m.dim()];
    for i in 0..=n {
        let hit = m.singular_distance(&current).is_some_and(|d| d < SINGULAR_FLOOR);
        points.push(model.point(current.clone()));
        if hit {
            return Ok(Orbit {
                points,
                singular_hit: Some(i),
            });
        }
        if i == n {
            break;
        }
        m.step_into(&current, &mut next).map_err(|e| with_step(e, i))?;
        std::mem::swap(&mut current, &mut next);
    }
    Ok(Orbit {
        points,
        singular_hit: None,
    })
}

/// The `n` one-step tangents along the orbit of `start`.
pub fn tangent_along(model: &ModelHandle, start: &ModelPoint, n: usize) -> Result<Vec<TangentMatrix>> {
    check_start(model, start)?;
    let m = &model.model;
    let mut out = Vec::with_capacity(n);
    let mut current = start.coords.clone();
    let mut next = vec![0.0; m.dim()];
    for i in 0..n {
        if let Some(d) = m.singular_distance(&current) {
            if d < SINGULAR_FLOOR {
                return Err(LabError::DerivativeOverflow { step: i, distance: d });
            }
        }
        let t = m.tangent(&current).map_err(|e| with_step(e, i))?;
        out.push(TangentMatrix {
            entries: t,
            basepoint: model.point(current.clone()),
        });
        if i + 1 < n {
            m.step_into(&current, &mut next).map_err(|e| with_step(e, i))?;
            std::mem::swap(&mut current, &mut next);
        }
    }
    Ok(out)
}

/// Orbit in rational arithmetic; requires an exact-mode handle.
pub fn orbit_exact(model: &ModelHandle, start: &[Rational], n: usize) -> Result<Vec<Vec<Rational>>> {
    if model.mode != EvalMode::Exact {
        return Err(contract("exact orbit requires an exact-mode handle"));
    }
    let mut points = Vec::with_capacity(n + 1);
    let mut current = start.to_vec();
    for i in 0..=n {
        points.push(current.clone());
        if i == n {
            break;
        }
        current = model.model.step_exact(&current).map_err(|e| with_step(e, i))?;
    }
    Ok(points)
}

/// Reduces a rational to lowest terms with a positive denominator, as `p/q`.
pub fn rational_string(r: &Rational) -> String {
    let g = r.numer().gcd(r.denom());
    let (mut p, mut q) = (r.numer() / &g, r.denom() / &g);
    if q < BigInt::zero() {
        p = -p;
        q = -q;
    }
    if q.is_one() {
        p.to_string()
    } else {
        format!("{p}/{q}")
    }
}
