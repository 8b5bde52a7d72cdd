//! Geometric Lorenz model: a linear saddle chart glued to itself by two tubes,
//! its return map to the section `z = 1`, and the suspension of that return
//! map in phase coordinates.
//!
//! Inside the chart `|x| <= 1, |y| <= 1, 0 < z <= 1` the flow is
//! `(x e^{l1 t}, y e^{l2 t}, z e^{l3 t})`. A point of the section
//! `(x, y, 1)` leaves through `|x| = 1` after `tau(x) = -ln|x| / l1` at
//! `(sign x, y |x|^s, |x|^rho)` and, after a fixed transit time, re-enters the
//! section at `(f(x), g(x, y), 1)` with
//! `g(x, y) = sign(x) B |x|^s + kappa y |x|^s`.

use nalgebra::Matrix2;

use crate::error::{contract, LabError, Result};
use crate::lorenz_map::{Branch, LorenzMapSpec, LorenzVariant, EDGE};
use crate::model::{Check, SINGULAR_FLOOR};
use crate::volume_lab::{self, BoxCollection, SubdivisionConfig};

/// Parameters of the tube that carries the exit face back to the section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gluing {
    /// Scale of the base branches, `f(x) = beta |x|^rho - 3/4` on `x > 0`.
    pub beta: f64,
    /// Fiber offset `B`.
    pub offset: f64,
    /// Fiber contraction scale `kappa`.
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuspensionSpec {
    /// Unstable eigenvalue.
    pub lambda1: f64,
    /// Strong stable eigenvalue.
    pub lambda2: f64,
    /// Weak stable eigenvalue.
    pub lambda3: f64,
    pub gluing: Gluing,
    /// Time spent in each tube.
    pub transit_time: f64,
}

impl Default for SuspensionSpec {
    fn default() -> Self {
        SuspensionSpec {
            lambda1: 1.0,
            lambda2: -1.2,
            lambda3: -0.75,
            gluing: Gluing {
                beta: 1.8,
                offset: 0.4,
                kappa: 0.25,
            },
            transit_time: 1.0,
        }
    }
}

impl SuspensionSpec {
    pub fn rho(&self) -> f64 {
        -self.lambda3 / self.lambda1
    }

    pub fn s(&self) -> f64 {
        -self.lambda2 / self.lambda1
    }

    /// Time for the section point with abscissa `x` to leave the chart.
    pub fn exit_time(&self, x: f64) -> f64 {
        -x.abs().ln() / self.lambda1
    }

    pub fn checks(&self) -> Vec<Check> {
        let (l1, l2, l3) = (self.lambda1, self.lambda2, self.lambda3);
        vec![
            Check::new("unstable eigenvalue", l1 > 0.0, format!("lambda1 = {l1} > 0")),
            Check::new(
                "stable ordering",
                l2 < l3 && l3 < 0.0,
                format!("lambda2 = {l2} < lambda3 = {l3} < 0"),
            ),
            Check::new(
                "volume expansion",
                l1 + l3 > 0.0,
                format!("lambda1 + lambda3 = {} > 0", l1 + l3),
            ),
            Check::new(
                "transit time",
                self.transit_time > 0.0,
                format!("tau_g = {} > 0", self.transit_time),
            ),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        first_failure(&self.checks())
    }
}

fn first_failure(checks: &[Check]) -> Result<()> {
    match checks.iter().find(|c| !c.passed) {
        Some(c) => Err(contract(format!("{}: {}", c.name, c.detail))),
        None => Ok(()),
    }
}

/// Planar return map `P(x, y) = (f(x), g(x, y))` on `[-3/4, 3/4]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMapSpec {
    pub base: LorenzMapSpec,
    pub offset: f64,
    pub kappa: f64,
    pub s: f64,
}

impl ReturnMapSpec {
    pub fn new(base: LorenzMapSpec, offset: f64, kappa: f64, s: f64) -> Result<Self> {
        let spec = ReturnMapSpec {
            base,
            offset,
            kappa,
            s,
        };
        first_failure(&spec.checks())?;
        Ok(spec)
    }

    /// Power-law base with the default suspension's fiber data.
    pub fn default_power_law() -> Self {
        derive_return_map(&SuspensionSpec::default()).expect("default suspension is valid")
    }

    /// Same fiber data over a different base map.
    pub fn with_base(base: LorenzMapSpec) -> Result<Self> {
        let d = SuspensionSpec::default();
        ReturnMapSpec::new(base, d.gluing.offset, d.gluing.kappa, d.s())
    }

    /// `kappa (3/4)^s`, the largest fiber contraction factor.
    pub fn fiber_contraction(&self) -> f64 {
        self.kappa * EDGE.powf(self.s)
    }

    /// `sup |dg/dy| / inf f'`.
    pub fn domination_bound(&self) -> f64 {
        self.fiber_contraction() / self.base.min_derivative()
    }

    pub fn checks(&self) -> Vec<Check> {
        let mut checks = self.base.validate_properties();
        let sup_g = EDGE.powf(self.s) * (self.offset + self.kappa * EDGE);
        checks.push(Check::new(
            "fiber exponent",
            self.s > 1.0,
            format!("s = {} > 1", self.s),
        ));
        checks.push(Check::new(
            "image inside section",
            sup_g < EDGE,
            format!("sup |g| = (3/4)^s (B + 3 kappa/4) = {sup_g:.6} < 0.75"),
        ));
        let contraction = self.fiber_contraction();
        checks.push(Check::new(
            "fiber contraction",
            self.kappa > 0.0 && contraction < 1.0,
            format!("sup |dg/dy| = kappa (3/4)^s = {contraction:.6} < 1"),
        ));
        let dom = self.domination_bound();
        checks.push(Check::new(
            "domination",
            dom < 1.0,
            format!("sup |dg/dy| / inf f' = {dom:.6} < 1"),
        ));
        checks.push(Check::new(
            "disjoint branch images",
            self.offset > self.kappa * EDGE,
            format!("B = {} > 3 kappa/4 = {}", self.offset, self.kappa * EDGE),
        ));
        checks
    }

    /// `(g, dg/dx, dg/dy)`.
    pub fn fiber(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let u = x.abs();
        let us = u.powf(self.s);
        let sign = x.signum();
        let g = sign * self.offset * us + self.kappa * y * us;
        let dgdx = self.s * us / u * (self.offset + sign * self.kappa * y);
        (g, dgdx, self.kappa * us)
    }

    pub fn in_section(p: [f64; 2]) -> bool {
        p[0].abs() <= EDGE && p[1].abs() <= EDGE
    }

    /// Image and lower-triangular tangent.
    pub fn step(&self, p: [f64; 2]) -> Result<([f64; 2], Matrix2<f64>)> {
        if !Self::in_section(p) {
            return Err(LabError::Domain {
                chart: "section",
                point: p.to_vec(),
            });
        }
        let (fx, dfx) = self.base.eval(p[0])?;
        let (g, dgdx, dgdy) = self.fiber(p[0], p[1]);
        Ok(([fx, g], Matrix2::new(dfx, 0.0, dgdx, dgdy)))
    }

    pub fn image(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        if !Self::in_section(p) {
            return Err(LabError::Domain {
                chart: "section",
                point: p.to_vec(),
            });
        }
        let fx = self.base.value(p[0])?;
        let (g, _, _) = self.fiber(p[0], p[1]);
        Ok([fx, g])
    }

    /// Preimage in the section, if any. The branch is read off the sign of
    /// `y` since the two branch images are separated by `y = 0`.
    pub fn preimage(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let branch = if p[1] > 0.0 {
            Branch::Plus
        } else if p[1] < 0.0 {
            Branch::Minus
        } else {
            return Err(LabError::NoSuchBranch {
                step: 0,
                reason: "y = 0 separates the branch images".to_string(),
            });
        };
        let x0 = self.base.branch_inverse(branch, p[0]).ok_or_else(|| LabError::NoSuchBranch {
            step: 0,
            reason: format!("x = {} outside the {} branch range", p[0], branch.symbol()),
        })?;
        let u = x0.abs();
        if u < SINGULAR_FLOOR {
            return Err(LabError::NoSuchBranch {
                step: 0,
                reason: "preimage at the singular line".to_string(),
            });
        }
        let y0 = (p[1] / u.powf(self.s) - branch.sign() * self.offset) / self.kappa;
        if !(y0.abs() <= EDGE) {
            return Err(LabError::NoSuchBranch {
                step: 0,
                reason: format!("fiber preimage {y0} outside the section"),
            });
        }
        Ok([x0, y0])
    }

    /// Inverse tangent `DP^{-1}` at the preimage `q` of the current point.
    pub fn inverse_tangent_at_preimage(&self, q: [f64; 2]) -> Result<Matrix2<f64>> {
        let (_, t) = self.step(q)?;
        t.try_inverse().ok_or(LabError::Numeric { step: 0 })
    }
}

pub fn derive_return_map(susp: &SuspensionSpec) -> Result<ReturnMapSpec> {
    susp.validate()?;
    let base = LorenzMapSpec::power_law(susp.rho(), susp.gluing.beta);
    ReturnMapSpec::new(base, susp.gluing.offset, susp.gluing.kappa, susp.s())
}

pub fn return_step(spec: &ReturnMapSpec, p: [f64; 2]) -> Result<([f64; 2], Matrix2<f64>)> {
    if p[0].abs() < SINGULAR_FLOOR {
        return Err(LabError::DerivativeOverflow {
            step: 0,
            distance: p[0].abs(),
        });
    }
    spec.step(p)
}

/// State of the piecewise-exact flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowPoint {
    /// Inside the linear chart.
    Chart([f64; 3]),
    /// Inside a gluing tube: exit coordinates `(u, w) = (y, z)` on the face
    /// `x = +-1`, and time spent in the tube so far.
    Tube {
        side: Branch,
        u: f64,
        w: f64,
        elapsed: f64,
    },
}

impl FlowPoint {
    pub fn on_section(x: f64, y: f64) -> FlowPoint {
        FlowPoint::Chart([x, y, 1.0])
    }
}

/// Relative tolerance used to snap tube arrivals onto the section.
const ARRIVAL_SNAP: f64 = 1e-12;

/// Flows `p` forward for time `t >= 0`.
pub fn flow_integrate(susp: &SuspensionSpec, p: FlowPoint, t: f64) -> Result<FlowPoint> {
    susp.validate()?;
    if !(t >= 0.0) {
        return Err(contract(format!("flow time {t} must be non-negative")));
    }
    let (rho, s) = (susp.rho(), susp.s());
    let g = susp.gluing;
    let mut state = p;
    let mut remaining = t;
    let mut elapsed_total = 0.0;
    loop {
        match state {
            FlowPoint::Chart([x, y, z]) => {
                if !(x.abs() <= 1.0 && y.abs() <= 1.0 && z > 0.0 && z <= 1.0) {
                    return Err(LabError::OutOfChart { time: elapsed_total });
                }
                let exit = if x == 0.0 { f64::INFINITY } else { susp.exit_time(x) };
                if remaining < exit {
                    let out = [
                        x * (susp.lambda1 * remaining).exp(),
                        y * (susp.lambda2 * remaining).exp(),
                        z * (susp.lambda3 * remaining).exp(),
                    ];
                    return Ok(FlowPoint::Chart(out));
                }
                let ax = x.abs();
                state = FlowPoint::Tube {
                    side: Branch::of(x),
                    u: y * ax.powf(s),
                    w: z * ax.powf(rho),
                    elapsed: 0.0,
                };
                remaining -= exit;
                elapsed_total += exit;
            }
            FlowPoint::Tube { side, u, w, elapsed } => {
                let left = susp.transit_time - elapsed;
                if remaining < left * (1.0 - ARRIVAL_SNAP) - ARRIVAL_SNAP {
                    return Ok(FlowPoint::Tube {
                        side,
                        u,
                        w,
                        elapsed: elapsed + remaining,
                    });
                }
                let lift = g.offset * w.powf(s / rho);
                let (x_new, y_new) = match side {
                    Branch::Plus => (g.beta * w - EDGE, lift + g.kappa * u),
                    Branch::Minus => (EDGE - g.beta * w, -lift + g.kappa * u),
                };
                state = FlowPoint::Chart([x_new, y_new, 1.0]);
                remaining -= left;
                // rounding residue of `t - exit - transit`
                if remaining <= ARRIVAL_SNAP * (1.0 + t) {
                    remaining = 0.0;
                }
                elapsed_total += left;
                if !(x_new.abs() <= EDGE && y_new.abs() <= EDGE) {
                    return Err(LabError::OutOfChart { time: elapsed_total });
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDirection {
    Forward,
    Backward,
}

/// Suspension of the return map with roof `R(x) = tau(x) + tau_g`, in phase
/// coordinates `(x, y, phi)` where `phi in [0, 1)` is the fraction of the
/// roof elapsed since the last visit to the section.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFlow {
    pub map: ReturnMapSpec,
    pub lambda1: f64,
    pub transit_time: f64,
}

impl PhaseFlow {
    pub fn from_suspension(susp: &SuspensionSpec) -> Result<Self> {
        Ok(PhaseFlow {
            map: derive_return_map(susp)?,
            lambda1: susp.lambda1,
            transit_time: susp.transit_time,
        })
    }

    pub fn roof(&self, x: f64) -> f64 {
        -x.abs().ln() / self.lambda1 + self.transit_time
    }

    pub fn checks(&self) -> Vec<Check> {
        let mut c = self.map.checks();
        c.push(Check::new(
            "roof data",
            self.lambda1 > 0.0 && self.transit_time > 0.0,
            format!("lambda1 = {} > 0, tau_g = {} > 0", self.lambda1, self.transit_time),
        ));
        c
    }

    fn check_point(p: [f64; 3]) -> Result<()> {
        if ReturnMapSpec::in_section([p[0], p[1]]) && (0.0..1.0).contains(&p[2]) {
            Ok(())
        } else {
            Err(LabError::Domain {
                chart: "suspension phase space",
                point: p.to_vec(),
            })
        }
    }

    /// Flows `p` for time `t >= 0` in the given direction.
    pub fn flow(&self, p: [f64; 3], t: f64, dir: TimeDirection) -> Result<[f64; 3]> {
        Self::check_point(p)?;
        if !(t >= 0.0) {
            return Err(contract(format!("flow time {t} must be non-negative")));
        }
        if p[0].abs() < SINGULAR_FLOOR {
            return Err(LabError::DerivativeOverflow {
                step: 0,
                distance: p[0].abs(),
            });
        }
        let mut q = [p[0], p[1]];
        let mut roof = self.roof(q[0]);
        let mut clock = p[2] * roof;
        let mut steps = 0;
        match dir {
            TimeDirection::Forward => {
                clock += t;
                while clock >= roof {
                    clock -= roof;
                    q = self.map.image(q).map_err(|e| at_step(e, steps))?;
                    if q[0].abs() < SINGULAR_FLOOR {
                        return Err(LabError::DerivativeOverflow {
                            step: steps,
                            distance: q[0].abs(),
                        });
                    }
                    roof = self.roof(q[0]);
                    steps += 1;
                }
            }
            TimeDirection::Backward => {
                clock -= t;
                while clock < 0.0 {
                    q = self.map.preimage(q).map_err(|e| at_step(e, steps))?;
                    roof = self.roof(q[0]);
                    clock += roof;
                    steps += 1;
                }
            }
        }
        Ok([q[0], q[1], (clock / roof).min(1.0 - f64::EPSILON)])
    }

    /// Backward time the orbit of `p` stays in the phase space, capped at
    /// `t_max`. The orbit leaves exactly when a preimage in the section fails
    /// to exist.
    pub fn backward_survival(&self, p: [f64; 3], t_max: f64) -> f64 {
        let mut q = [p[0], p[1]];
        let mut time = p[2] * self.roof(q[0]);
        while time < t_max {
            match self.map.preimage(q) {
                Ok(prev) => {
                    q = prev;
                    time += self.roof(q[0]);
                }
                Err(_) => return time,
            }
        }
        t_max
    }
}

fn at_step(e: LabError, step: usize) -> LabError {
    match e {
        LabError::NoSuchBranch { reason, .. } => LabError::NoSuchBranch { step, reason },
        LabError::DerivativeOverflow { distance, .. } => LabError::DerivativeOverflow { step, distance },
        other => other,
    }
}

/// Per-depth summary of a section cover.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthStat {
    pub depth: u32,
    pub boxes: usize,
    pub area: f64,
    pub projection: f64,
}

#[derive(Debug, Clone)]
pub struct CrossSectionStats {
    pub covers: Vec<BoxCollection>,
    pub series: Vec<DepthStat>,
}

impl CrossSectionStats {
    pub fn last(&self) -> &DepthStat {
        self.series.last().expect("series holds depth 0")
    }
}

/// Section `[-3/4, 3/4]^2` as a root box.
pub fn section_root() -> Vec<(f64, f64)> {
    vec![(-EDGE, EDGE), (-EDGE, EDGE)]
}

/// Default subdivision settings for the section: the Cantor-extension base
/// selects the maximal invariant set over its target strip, which needs the
/// backward-compatibility pass; the power-law base uses forward images only.
pub fn section_config(spec: &ReturnMapSpec, max_depth: u32, seed: u64) -> SubdivisionConfig {
    let mut cfg = SubdivisionConfig::new(max_depth, seed);
    if let LorenzVariant::CantorExtension(_) = spec.base.variant {
        let t = spec.base.target();
        cfg.region = Some(vec![t, (-EDGE, EDGE)]);
        cfg.backward_pass = true;
    }
    cfg
}

/// Box covers of the relative attractor of the return map in the section for
/// depths `0..=depth`, with area and x-projection length per depth.
pub fn cross_section_stats(spec: &ReturnMapSpec, depth: u32, cfg: &SubdivisionConfig) -> Result<CrossSectionStats> {
    let model = crate::model::ModelHandle::new(crate::model::Model::ReturnMap(spec.clone()))?;
    let covers = volume_lab::relative_attractor(&model, &section_root(), depth, cfg)?;
    let series = covers
        .iter()
        .map(|c| DepthStat {
            depth: c.depth(),
            boxes: c.len(),
            area: c.measure(),
            projection: c.projection_length(0),
        })
        .collect();
    Ok(CrossSectionStats { covers, series })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowBoxEstimate {
    pub epsilon: f64,
    pub area: f64,
    pub speed: f64,
    pub volume: f64,
}

/// Largest flow-box half-width accepted.
pub const FLOW_BOX_EPSILON_CAP: f64 = 0.05;

/// Volume of the flow box `X_{[-eps, eps]}` over a section cover: twice the
/// half-width times the transverse speed `|lambda3|` at height 1 times area.
pub fn flow_box_volume(susp: &SuspensionSpec, cover: &BoxCollection, epsilon: f64) -> Result<FlowBoxEstimate> {
    susp.validate()?;
    if !(0.0..=FLOW_BOX_EPSILON_CAP).contains(&epsilon) {
        return Err(contract(format!(
            "epsilon {epsilon} must lie in [0, {FLOW_BOX_EPSILON_CAP}]"
        )));
    }
    // transverse flow component at z = 1 is lambda3; a flow time of 0.05
    // moves z by less than 4%, keeping the box inside the chart
    let speed = susp.lambda3.abs();
    let area = cover.measure();
    Ok(FlowBoxEstimate {
        epsilon,
        area,
        speed,
        volume: 2.0 * epsilon * speed * area,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_exponents() {
        let r = derive_return_map(&SuspensionSpec::default()).unwrap();
        assert_eq!(r.s, 1.2);
        let LorenzVariant::PowerLaw { rho, beta } = r.base.variant else { unreachable!() };
        assert_eq!((rho, beta), (0.75, 1.8));
    }

    #[test]
    fn volume_contracting_saddle_rejected() {
        let susp = SuspensionSpec {
            lambda3: -1.5,
            lambda2: -2.0,
            ..SuspensionSpec::default()
        };
        let err = derive_return_map(&susp).unwrap_err();
        assert!(matches!(err, LabError::Contract(m) if m.contains("volume expansion")));
    }

    #[test]
    fn exit_time_closed_form() {
        let susp = SuspensionSpec::default();
        assert_eq!(susp.exit_time((-2.0f64).exp()), 2.0);
    }

    #[test]
    fn default_step() {
        let r = ReturnMapSpec::default_power_law();
        let (q, t) = return_step(&r, [0.5, 0.0]).unwrap();
        assert_eq!(q[0], 1.8 * 0.5f64.powf(0.75) - 0.75);
        assert_eq!(q[1], 0.4 * 0.5f64.powf(1.2));
        assert_eq!(t[(1, 1)], 0.25 * 0.5f64.powf(1.2));
        assert_eq!(t[(0, 1)], 0.0);
    }

    #[test]
    fn domination_bound_value() {
        let r = ReturnMapSpec::default_power_law();
        assert!((r.domination_bound() - 0.122).abs() < 1e-3);
        assert!(r.checks().iter().all(|c| c.passed));
    }

    #[test]
    fn preimage_inverts_step() {
        let r = ReturnMapSpec::default_power_law();
        for p in [[0.3, 0.2], [-0.6, -0.7], [0.01, 0.5], [-0.2, 0.1]] {
            let q = r.image(p).unwrap();
            let back = r.preimage(q).unwrap();
            assert!((back[0] - p[0]).abs() < 1e-12 && (back[1] - p[1]).abs() < 1e-10, "{p:?} -> {back:?}");
        }
    }

    #[test]
    fn flow_zero_time_is_identity() {
        let susp = SuspensionSpec::default();
        let p = FlowPoint::on_section(0.3, -0.2);
        assert_eq!(flow_integrate(&susp, p, 0.0).unwrap(), p);
    }

    #[test]
    fn flow_to_exit_face() {
        let susp = SuspensionSpec::default();
        let x: f64 = 0.4;
        let t = susp.exit_time(x);
        let FlowPoint::Tube { side, u, w, elapsed } = flow_integrate(&susp, FlowPoint::on_section(x, 0.5), t).unwrap() else {
            panic!("expected exit face")
        };
        assert_eq!(side, Branch::Plus);
        assert_eq!(elapsed, 0.0);
        assert!((u - 0.5 * x.powf(1.2)).abs() < 1e-15);
        assert!((w - x.powf(0.75)).abs() < 1e-15);
    }

    #[test]
    fn phase_flow_round_trip() {
        let flow = PhaseFlow::from_suspension(&SuspensionSpec::default()).unwrap();
        let p = [0.3, 0.1, 0.4];
        let q = flow.flow(p, 7.5, TimeDirection::Forward).unwrap();
        let back = flow.flow(q, 7.5, TimeDirection::Backward).unwrap();
        for i in 0..3 {
            assert!((back[i] - p[i]).abs() < 1e-8, "{back:?}");
        }
    }

    #[test]
    fn flow_box_product() {
        let susp = SuspensionSpec::default();
        let cover = BoxCollection::root(section_root());
        let est = flow_box_volume(&susp, &cover, 0.01).unwrap();
        assert_eq!(est.volume, 0.015 * 2.25);
        assert_eq!(flow_box_volume(&susp, &cover, 0.0).unwrap().volume, 0.0);
        assert!(flow_box_volume(&susp, &cover, 0.1).is_err());
    }
}
