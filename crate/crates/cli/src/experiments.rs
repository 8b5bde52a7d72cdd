use std::path::Path;

use attractor_lab::cantor::{self, CantorMapSpec};
use attractor_lab::geometric_lorenz::{self, PhaseFlow, ReturnMapSpec, TimeDirection};
use attractor_lab::hyperbolicity::{self, ConeSpec, FrameField};
use attractor_lab::lorenz_map::{self, DistortionOptions, LorenzMapSpec};
use attractor_lab::model::{rational_string, Model, ModelHandle};
use attractor_lab::seeding;
use attractor_lab::solenoid::{self, SolenoidSpec};
use attractor_lab::volume_lab::{self, SeriesParameter, TrappingRegion, VolumeSeries};
use nalgebra::DMatrix;
use rand::Rng;
use serde_json::json;

use crate::config::{ExperimentConfig, FrameName, Kind};
use crate::output::{num, Outputs};
use crate::plot::{self, Style};
use crate::CliError;

/// Seed stream for section seeds of the splitting and cone experiments.
const SECTION_SEED_STREAM: u64 = 0x5345_4544;

pub fn run(cfg: &ExperimentConfig, config_bytes: &[u8], dir: &Path, style: Option<Style>) -> Result<(), CliError> {
    let mut out = Outputs::new(dir, &cfg.outputs.prefix);
    let seed = cfg.seed.unwrap_or(0);
    let main = match cfg.kind {
        Kind::CantorMeasure => cantor_measure(cfg, &mut out)?,
        Kind::Hoelder => hoelder(cfg, &mut out)?,
        Kind::Lorenz1dInvariant => lorenz1d(cfg, &mut out)?,
        Kind::Distortion => distortion(cfg, seed, &mut out)?,
        Kind::ReturnMapCover => section(cfg, seed, &mut out, false)?,
        Kind::FlowBox => section(cfg, seed, &mut out, true)?,
        Kind::Splitting => splitting(cfg, seed, &mut out)?,
        Kind::Cones => cones(cfg, seed, &mut out)?,
        Kind::SolenoidSlice => solenoid_slice(cfg, seed, &mut out)?,
        Kind::TrappedVolume => trapped(cfg, seed, &mut out)?,
    };
    if let Some(style) = style {
        let (file, y, log) = match (style, &main) {
            (Style::Boxes, _) if matches!(cfg.kind, Kind::ReturnMapCover | Kind::FlowBox) => ("cover.csv", None, false),
            (Style::Boxes, _) => return Err(CliError::Config(format!("{} has no box cover to plot", cfg.kind.label()))),
            (_, Some(m)) => (m.file, Some(m.column), m.log),
            (_, None) => return Err(CliError::Config(format!("{} has no series to plot", cfg.kind.label()))),
        };
        let svg = plot::render_file(&out.path(file), style, log, None, y)?;
        out.text(&file.replace(".csv", ".svg"), &svg)?;
    }
    out.finish(cfg.kind.label(), cfg.seed, config_bytes)
}

/// The series rendered by `--plot`.
struct MainSeries {
    file: &'static str,
    column: &'static str,
    log: bool,
}

fn series(file: &'static str, column: &'static str, log: bool) -> Option<MainSeries> {
    Some(MainSeries { file, column, log })
}

fn checks_json(checks: &[attractor_lab::model::Check]) -> serde_json::Value {
    checks
        .iter()
        .map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail}))
        .collect()
}

fn cantor_measure(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Option<MainSeries>, CliError> {
    let schedule = cfg.schedule.build()?;
    let depth = cfg.cantor.depth;
    let rows = out.timed("build_cover", || {
        (1..=depth)
            .map(|k| {
                let cover = cantor::build_cover_capped(&schedule, k, cfg.caps.max_intervals)?;
                let m = cover.measure();
                Ok(vec![
                    k.to_string(),
                    cover.len().to_string(),
                    rational_string(&m),
                    num(cantor::to_f64(&m)),
                ])
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    out.csv("cantor_measure.csv", &["depth", "intervals", "measure", "measure_f64"], &rows)?;
    let bracket = out.timed("limit_measure", || Ok(cantor::limit_measure_bracket(&schedule, cfg.cantor.tolerance)?))?;
    out.json(
        "limit_measure.json",
        &json!({
            "tolerance": cfg.cantor.tolerance,
            "lower": bracket.lower,
            "upper": bracket.upper,
            "estimate": bracket.estimate(),
            "terms": bracket.terms,
        }),
    )?;
    Ok(series("cantor_measure.csv", "measure_f64", true))
}

fn hoelder(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Option<MainSeries>, CliError> {
    let spec = CantorMapSpec::new(cfg.schedule.build()?, cfg.cantor.map_depth)?;
    let report = out.timed("hoelder_modulus", || Ok(cantor::hoelder_modulus(&spec, cfg.cantor.alpha, cfg.cantor.depth)?))?;
    let rows: Vec<Vec<String>> = report
        .levels
        .iter()
        .zip(&report.running_max)
        .map(|(l, r)| {
            vec![
                l.level.to_string(),
                num(l.bridge_term),
                num(l.interpolation_term),
                num(l.modulus),
                num(*r),
            ]
        })
        .collect();
    out.csv(
        "hoelder.csv",
        &["level", "bridge_term", "interpolation_term", "modulus", "running_max"],
        &rows,
    )?;
    Ok(series("hoelder.csv", "running_max", false))
}

fn lorenz1d(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Option<MainSeries>, CliError> {
    let spec = cfg.lorenz.build(&cfg.schedule)?;
    let (edge, _) = spec.eval(lorenz_map::EDGE)?;
    out.json(
        "properties.json",
        &json!({
            "checks": checks_json(&spec.validate_properties()),
            "f_at_edge": edge,
            "min_derivative": spec.min_derivative(),
        }),
    )?;
    let rows = out.timed("invariant_cover", || {
        (0..=cfg.lorenz.depth)
            .map(|k| {
                let c = lorenz_map::invariant_cover_capped(&spec, k, cfg.caps.max_intervals)?;
                Ok(vec![
                    k.to_string(),
                    c.intervals.len().to_string(),
                    num(c.measure()),
                    c.exact_measure().map(|m| rational_string(&m)).unwrap_or_default(),
                ])
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    out.csv("lorenz_cover.csv", &["depth", "intervals", "measure", "exact_measure"], &rows)?;
    Ok(series("lorenz_cover.csv", "measure", true))
}

fn distortion(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<Option<MainSeries>, CliError> {
    let spec = cfg.lorenz.build(&cfg.schedule)?;
    let opts = DistortionOptions {
        seed,
        ..DistortionOptions::default()
    };
    let rows = out.timed("distortion", || {
        (1..=cfg.distortion.max_n)
            .map(|n| {
                let r = lorenz_map::distortion_with(&spec, n, cfg.distortion.radius, &opts)?;
                Ok(vec![
                    n.to_string(),
                    num(r.distortion),
                    r.admissible.to_string(),
                    r.exhaustive.to_string(),
                    num(r.center),
                    r.itinerary.iter().map(|b| b.symbol()).collect(),
                ])
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    out.csv(
        "distortion.csv",
        &["n", "distortion", "admissible", "exhaustive", "center", "itinerary"],
        &rows,
    )?;
    Ok(series("distortion.csv", "distortion", false))
}

fn return_map(cfg: &ExperimentConfig) -> Result<ReturnMapSpec, CliError> {
    let base: LorenzMapSpec = cfg.lorenz.build(&cfg.schedule)?;
    let susp = cfg.suspension.build()?;
    Ok(ReturnMapSpec::new(base, susp.gluing.offset, susp.gluing.kappa, susp.s())?)
}

fn classification_json(series: &VolumeSeries, window: usize, threshold: f64) -> Result<serde_json::Value, CliError> {
    let c = volume_lab::fit_classify(series, window, threshold)?;
    Ok(json!({
        "class": c.class.label(),
        "slope": c.slope,
        "window": c.window,
        "threshold": c.threshold,
    }))
}

fn section(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs, flow_box: bool) -> Result<Option<MainSeries>, CliError> {
    let spec = return_map(cfg)?;
    let mut sub = geometric_lorenz::section_config(&spec, cfg.caps.max_depth, seed);
    sub.cap = cfg.caps.max_boxes;
    let stats = out.timed("cross_section_stats", || Ok(geometric_lorenz::cross_section_stats(&spec, cfg.section.depth, &sub)?))?;
    let rows: Vec<Vec<String>> = stats
        .series
        .iter()
        .map(|d| vec![d.depth.to_string(), d.boxes.to_string(), num(d.area), num(d.projection)])
        .collect();
    out.csv("section_series.csv", &["depth", "boxes", "area", "projection"], &rows)?;
    let window = cfg.section.window;
    if stats.series.len() >= window.max(3) {
        let area = VolumeSeries::new(
            SeriesParameter::Depth,
            stats.series.iter().map(|d| (d.depth as f64, d.area)).collect(),
            stats.series.iter().map(|d| d.boxes as u64).collect(),
        )?;
        let projection = VolumeSeries::new(
            SeriesParameter::Depth,
            stats.series.iter().map(|d| (d.depth as f64, d.projection)).collect(),
            stats.series.iter().map(|d| d.boxes as u64).collect(),
        )?;
        out.json(
            "classification.json",
            &json!({
                "area": classification_json(&area, window, cfg.section.plateau_threshold)?,
                "projection": classification_json(&projection, window, cfg.section.plateau_threshold)?,
            }),
        )?;
    }
    let last = stats.covers.last().expect("depth 0 cover");
    if cfg.section.write_cover {
        let rows: Vec<Vec<String>> = last
            .keys()
            .iter()
            .map(|&k| {
                let b = last.bounds(k);
                vec![num(b[0].0), num(b[0].1), num(b[1].0), num(b[1].1)]
            })
            .collect();
        out.csv("cover.csv", &["x_lo", "x_hi", "y_lo", "y_hi"], &rows)?;
    }
    if flow_box {
        let susp = cfg.suspension.build()?;
        let est = geometric_lorenz::flow_box_volume(&susp, last, cfg.section.epsilon)?;
        out.json(
            "flow_box.json",
            &json!({
                "epsilon": est.epsilon,
                "area": est.area,
                "speed": est.speed,
                "volume": est.volume,
                "depth": last.depth(),
            }),
        )?;
    }
    Ok(series("section_series.csv", "area", true))
}

/// Seeded section points pushed `burn_in` returns toward the attractor.
fn section_seeds(spec: &ReturnMapSpec, count: usize, burn_in: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .filter_map(|i| {
            let mut rng = seeding::rng_for(seed, SECTION_SEED_STREAM, i as u64);
            let mut p = [rng.gen::<f64>() * 1.5 - 0.75, rng.gen::<f64>() * 1.5 - 0.75];
            for _ in 0..burn_in {
                p = spec.image(p).ok()?;
            }
            Some(p.to_vec())
        })
        .collect()
}

fn splitting(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<Option<MainSeries>, CliError> {
    let spec = return_map(cfg)?;
    let s = &cfg.splitting;
    let seeds = section_seeds(&spec, s.seeds, s.burn_in, seed);
    let model = ModelHandle::new(Model::ReturnMap(spec.clone()))?;
    let r = out.timed("splitting_estimate", || Ok(hyperbolicity::splitting_estimate(&model, &seeds, s.n_max, 1, s.expansion_rate)?))?;
    out.json(
        "splitting.json",
        &json!({
            "lambda": r.lambda,
            "lambda_e": r.lambda_e,
            "prefactor": r.prefactor,
            "expansion_rate": r.expansion_rate,
            "n_max": r.n_max,
            "d_e": r.d_e,
            "seeds_used": r.seeds_used,
            "seeds_skipped": r.seeds_skipped,
            "domination_bound": spec.domination_bound(),
            "pass": r.pass,
        }),
    )?;
    let rows: Vec<Vec<String>> = r
        .segments
        .iter()
        .flat_map(|seg| {
            (0..seg.domination.len()).map(move |j| {
                vec![
                    seg.seed.to_string(),
                    (j + 1).to_string(),
                    num(seg.domination[j]),
                    num(seg.contraction[j]),
                    num(seg.expansion[j]),
                ]
            })
        })
        .collect();
    out.csv("margins.csv", &["seed", "n", "domination", "contraction", "expansion"], &rows)?;
    Ok(None)
}

fn cones(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<Option<MainSeries>, CliError> {
    let spec = return_map(cfg)?;
    let c = &cfg.cones;
    let frame = match c.frame {
        // E vertical, F horizontal
        FrameName::Constant => FrameField::Constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])),
        FrameName::OrbitAdapted => FrameField::OrbitAdapted { warmup: c.warmup },
    };
    let cone = ConeSpec::new(frame, 1, c.width)?;
    let seeds = section_seeds(&spec, c.seeds, cfg.splitting.burn_in, seed);
    let model = ModelHandle::new(Model::ReturnMap(spec))?;
    let r = out.timed("cone_invariance", || Ok(hyperbolicity::cone_invariance(&model, &cone, &seeds, c.per_seed, seed)?))?;
    out.json("cones.json", &r)?;
    Ok(None)
}

fn solenoid_slice(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<Option<MainSeries>, CliError> {
    let s = &cfg.solenoid;
    let spec = SolenoidSpec {
        contraction: s.contraction,
        ..SolenoidSpec::default()
    };
    if let Some(c) = spec.checks().into_iter().find(|c| !c.passed) {
        return Err(CliError::Config(format!("solenoid: {} ({})", c.name, c.detail)));
    }
    let rows = out.timed("slice_cover", || {
        (0..=s.max_level)
            .map(|n| {
                let c = solenoid::slice_cover_capped(&spec, &s.z, n, cfg.caps.max_boxes)?;
                Ok(vec![
                    n.to_string(),
                    c.centers.len().to_string(),
                    num(c.radius),
                    num(c.area),
                    num(c.inscribed_radius),
                    c.min_center_gap.map(num).unwrap_or_default(),
                ])
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    out.csv(
        "slice.csv",
        &["level", "disks", "radius", "area", "inscribed_radius", "min_center_gap"],
        &rows,
    )?;
    let verdicts = (1..=s.max_level)
        .map(|n| solenoid::star_condition(&spec, std::slice::from_ref(&s.z), n, s.threshold))
        .collect::<Result<Vec<_>, _>>()?;
    let star: Vec<serde_json::Value> = verdicts
        .into_iter()
        .flatten()
        .map(|v| {
            json!({
                "level": v.level,
                "z": v.z,
                "radius": v.radius,
                "no_disk": v.no_disk,
                "totally_disconnected": v.totally_disconnected,
                "min_center_gap": v.min_center_gap,
            })
        })
        .collect();
    let inj = out.timed("verify_injectivity", || Ok(solenoid::verify_injectivity(&spec, s.injectivity_samples, seed)?))?;
    out.json(
        "star.json",
        &json!({
            "threshold": s.threshold,
            "verdicts": star,
            "injectivity": {
                "samples": inj.samples,
                "min_margin": inj.min_margin,
                "witness": inj.witness,
                "pass": inj.pass,
            },
        }),
    )?;
    Ok(series("slice.csv", "area", true))
}

fn trapped(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<Option<MainSeries>, CliError> {
    let t = &cfg.trapped;
    if !(t.t_step > 0.0 && t.t_max >= t.t_step) {
        return Err(CliError::Config("trapped: need 0 < t_step <= t_max".into()));
    }
    let flow = PhaseFlow::from_suspension(&cfg.suspension.build()?)?;
    let region = TrappingRegion {
        x: (t.x[0], t.x[1]),
        y: (t.y[0], t.y[1]),
    };
    let steps = (t.t_max / t.t_step).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * t.t_step).collect();
    let ts = out.timed("trapped_volume_series", || {
        Ok(volume_lab::trapped_volume_series(&flow, &region, &times, t.grid_depth, seed)?)
    })?;
    let rows: Vec<Vec<String>> = ts
        .series
        .points
        .iter()
        .zip(&ts.series.boxes)
        .map(|(p, b)| vec![num(p.0), num(p.1), b.to_string()])
        .collect();
    out.csv("trapped.csv", &["t", "measure", "boxes"], &rows)?;
    out.json(
        "classification.json",
        &classification_json(&ts.series, t.window, t.plateau_threshold)?,
    )?;
    let backward = ModelHandle::new(Model::PhaseFlow {
        flow,
        direction: TimeDirection::Backward,
        dt: t.t_step,
    })?;
    let cells = 1u64 << (3 * t.grid_depth);
    let rows = out.timed("escape_fraction", || {
        t.check_times
            .iter()
            .map(|&time| {
                let k = (time / t.t_step).round() as usize;
                let point = ts
                    .series
                    .points
                    .get(k)
                    .ok_or_else(|| CliError::Config(format!("trapped: check time {time} beyond t_max")))?;
                let mc = volume_lab::escape_fraction(&backward, &region.phase_box(), t.mc_samples, k, seed)?;
                let c = volume_lab::cross_check(point.1 / region.area(), cells, &mc, 3.0);
                Ok(vec![
                    num(point.0),
                    num(c.grid_fraction),
                    num(c.mc_fraction),
                    num(c.combined_se),
                    num(c.z),
                    c.pass.to_string(),
                ])
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    out.csv(
        "crosscheck.csv",
        &["t", "grid_fraction", "mc_fraction", "combined_se", "z", "pass"],
        &rows,
    )?;
    Ok(series("trapped.csv", "measure", true))
}
