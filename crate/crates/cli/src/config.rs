use std::path::Path;
use std::str::FromStr;

use attractor_lab::cantor::{GapSchedule, Rational, TailRule};
use attractor_lab::geometric_lorenz::{Gluing, SuspensionSpec};
use attractor_lab::lorenz_map::{ExtensionParams, LorenzMapSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    CantorMeasure,
    Hoelder,
    Lorenz1dInvariant,
    Distortion,
    ReturnMapCover,
    FlowBox,
    Splitting,
    Cones,
    SolenoidSlice,
    TrappedVolume,
}

impl Kind {
    pub fn label(self) -> &'static str {
        match self {
            Kind::CantorMeasure => "cantor-measure",
            Kind::Hoelder => "hoelder",
            Kind::Lorenz1dInvariant => "lorenz1d-invariant",
            Kind::Distortion => "distortion",
            Kind::ReturnMapCover => "return-map-cover",
            Kind::FlowBox => "flow-box",
            Kind::Splitting => "splitting",
            Kind::Cones => "cones",
            Kind::SolenoidSlice => "solenoid-slice",
            Kind::TrappedVolume => "trapped-volume",
        }
    }

    fn sampled(self) -> bool {
        !matches!(self, Kind::CantorMeasure | Kind::Hoelder | Kind::Lorenz1dInvariant)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: Option<u64>,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub cantor: CantorConfig,
    #[serde(default)]
    pub lorenz: LorenzConfig,
    #[serde(default)]
    pub distortion: DistortionConfig,
    #[serde(default)]
    pub section: SectionConfig,
    #[serde(default)]
    pub suspension: SuspensionConfig,
    #[serde(default)]
    pub splitting: SplittingConfig,
    #[serde(default)]
    pub cones: ConesConfig,
    #[serde(default)]
    pub solenoid: SolenoidConfig,
    #[serde(default)]
    pub trapped: TrappedConfig,
    #[serde(default)]
    pub caps: CapsConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "type")]
pub enum ScheduleConfig {
    Constant { gap: String },
    InverseSquare,
    Explicit {
        entries: Vec<String>,
        /// `"inverse-square"` or `"constant:p/q"`.
        tail: Option<String>,
    },
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig::InverseSquare
    }
}

fn rational(field: &str, s: &str) -> Result<Rational, CliError> {
    Rational::from_str(s.trim()).map_err(|_| CliError::Config(format!("{field}: {s:?} is not a rational p/q")))
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<GapSchedule, CliError> {
        let schedule = match self {
            ScheduleConfig::Constant { gap } => GapSchedule::Constant(rational("schedule.gap", gap)?),
            ScheduleConfig::InverseSquare => GapSchedule::InverseSquare,
            ScheduleConfig::Explicit { entries, tail } => {
                let entries = entries
                    .iter()
                    .map(|e| rational("schedule.entries", e))
                    .collect::<Result<Vec<_>, _>>()?;
                let tail = match tail.as_deref() {
                    None => None,
                    Some("inverse-square") => Some(TailRule::InverseSquare),
                    Some(t) => match t.strip_prefix("constant:") {
                        Some(c) => Some(TailRule::Constant(rational("schedule.tail", c)?)),
                        None => return Err(CliError::Config(format!("schedule.tail: unknown rule {t:?}"))),
                    },
                };
                GapSchedule::Explicit { entries, tail }
            }
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CantorConfig {
    pub depth: usize,
    pub tolerance: f64,
    pub alpha: f64,
    pub map_depth: usize,
}

impl Default for CantorConfig {
    fn default() -> Self {
        CantorConfig {
            depth: 10,
            tolerance: 1e-6,
            alpha: 0.5,
            map_depth: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LorenzVariantName {
    PowerLaw,
    CantorExtension,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct LorenzConfig {
    pub variant: LorenzVariantName,
    pub rho: f64,
    pub beta: f64,
    pub inner_exponent: f64,
    pub inner_share: f64,
    pub map_depth: usize,
    pub depth: usize,
}

impl Default for LorenzConfig {
    fn default() -> Self {
        let p = ExtensionParams::default();
        LorenzConfig {
            variant: LorenzVariantName::PowerLaw,
            rho: 0.75,
            beta: 1.8,
            inner_exponent: p.inner_exponent,
            inner_share: p.inner_share,
            map_depth: p.max_depth,
            depth: 12,
        }
    }
}

impl LorenzConfig {
    pub fn build(&self, schedule: &ScheduleConfig) -> Result<LorenzMapSpec, CliError> {
        let spec = match self.variant {
            LorenzVariantName::PowerLaw => LorenzMapSpec::power_law(self.rho, self.beta),
            LorenzVariantName::CantorExtension => LorenzMapSpec::cantor_extension(
                schedule.build()?,
                ExtensionParams {
                    inner_exponent: self.inner_exponent,
                    inner_share: self.inner_share,
                    max_depth: self.map_depth,
                },
            )?,
        };
        if let Some(c) = spec.validate_properties().into_iter().find(|c| !c.passed) {
            return Err(CliError::Config(format!("lorenz: {} ({})", c.name, c.detail)));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistortionConfig {
    pub max_n: usize,
    pub radius: f64,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        DistortionConfig { max_n: 12, radius: 0.05 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectionConfig {
    pub depth: u32,
    pub window: usize,
    pub plateau_threshold: f64,
    pub epsilon: f64,
    /// Write the boxes of the deepest cover.
    pub write_cover: bool,
}

impl Default for SectionConfig {
    fn default() -> Self {
        SectionConfig {
            depth: 10,
            window: 5,
            plateau_threshold: 0.01,
            epsilon: 0.01,
            write_cover: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuspensionConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub beta: f64,
    pub offset: f64,
    pub kappa: f64,
    pub transit_time: f64,
}

impl Default for SuspensionConfig {
    fn default() -> Self {
        let s = SuspensionSpec::default();
        SuspensionConfig {
            lambda1: s.lambda1,
            lambda2: s.lambda2,
            lambda3: s.lambda3,
            beta: s.gluing.beta,
            offset: s.gluing.offset,
            kappa: s.gluing.kappa,
            transit_time: s.transit_time,
        }
    }
}

impl SuspensionConfig {
    pub fn build(&self) -> Result<SuspensionSpec, CliError> {
        let s = SuspensionSpec {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            gluing: Gluing {
                beta: self.beta,
                offset: self.offset,
                kappa: self.kappa,
            },
            transit_time: self.transit_time,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplittingConfig {
    pub seeds: usize,
    pub n_max: usize,
    pub burn_in: usize,
    pub expansion_rate: f64,
}

impl Default for SplittingConfig {
    fn default() -> Self {
        SplittingConfig {
            seeds: 1000,
            n_max: 50,
            burn_in: 20,
            expansion_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameName {
    Constant,
    OrbitAdapted,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConesConfig {
    pub width: f64,
    pub frame: FrameName,
    pub warmup: usize,
    pub seeds: usize,
    pub per_seed: usize,
}

impl Default for ConesConfig {
    fn default() -> Self {
        ConesConfig {
            width: 0.5,
            frame: FrameName::OrbitAdapted,
            warmup: 20,
            seeds: 1000,
            per_seed: 10,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolenoidConfig {
    pub contraction: f64,
    pub max_level: u32,
    pub z: Vec<f64>,
    pub threshold: f64,
    pub injectivity_samples: usize,
}

impl Default for SolenoidConfig {
    fn default() -> Self {
        SolenoidConfig {
            contraction: 1.0 / 32.0,
            max_level: 3,
            z: vec![0.3, 0.7],
            threshold: 1e-3,
            injectivity_samples: 4096,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrappedConfig {
    pub grid_depth: u32,
    pub t_max: f64,
    pub t_step: f64,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub window: usize,
    pub plateau_threshold: f64,
    pub mc_samples: usize,
    /// Times at which the grid series is compared with Monte Carlo.
    pub check_times: Vec<f64>,
}

impl Default for TrappedConfig {
    fn default() -> Self {
        TrappedConfig {
            grid_depth: 8,
            t_max: 30.0,
            t_step: 1.0,
            x: [-0.75, 0.75],
            y: [-0.75, 0.75],
            window: 5,
            plateau_threshold: 0.01,
            mc_samples: 100_000,
            check_times: vec![1.0, 3.0, 5.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapsConfig {
    pub max_boxes: usize,
    pub max_intervals: usize,
    pub max_depth: u32,
}

impl Default for CapsConfig {
    fn default() -> Self {
        CapsConfig {
            max_boxes: attractor_lab::volume_lab::DEFAULT_BOX_CAP,
            max_intervals: attractor_lab::cantor::DEFAULT_INTERVAL_CAP,
            max_depth: 20,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Prefix for output file names.
    pub prefix: String,
}

/// Environment variable overriding `caps.max_boxes`.
pub const MAX_BOXES_ENV: &str = "ATTRACTOR_LAB_MAX_BOXES";

pub fn load(path: &Path, seed_override: Option<u64>) -> Result<(ExperimentConfig, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Config("config is not UTF-8".into()))?;
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(s) = seed_override {
        cfg.seed = Some(s);
    }
    if let Ok(v) = std::env::var(MAX_BOXES_ENV) {
        cfg.caps.max_boxes = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{MAX_BOXES_ENV}={v:?} is not a count")))?;
    }
    if cfg.kind.sampled() && cfg.seed.is_none() {
        return Err(CliError::Config(format!("experiment {} samples and needs a seed", cfg.kind.label())));
    }
    if cfg.outputs.prefix.contains(['/', '\\']) {
        return Err(CliError::Config("outputs.prefix must be a plain file-name prefix".into()));
    }
    Ok((cfg, bytes))
}
