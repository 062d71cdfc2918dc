//! Experiment configuration: one system, one experiment, a seed.
//!
//! Every object rejects unknown keys. `validate` runs the semantic checks
//! (ranges, system/experiment compatibility) before any computation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zmix_billiards::geometry::{
    perturbed_reference_spec, reference_half_plane_spec, reference_half_strip_spec, reference_spec,
    single_disk_spec, sparse_half_plane_spec, sparse_spec,
};
use zmix_billiards::{FieldConfig, ScattererSpec};
use zmix_core::error::{Error, Result};
use zmix_core::estimators::MlltWindow;
use zmix_pingpong::{LimitConvention, ProfileSpec};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Also the name of the output subdirectory.
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Output root; the run writes to `<output>/<name>`.
    #[serde(default)]
    pub output: Option<String>,
    pub system: SystemConfig,
    pub experiment: ExperimentSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    RandomWalk {
        steps: StepsConfig,
    },
    Lorentz {
        scatterers: ScatterersConfig,
        #[serde(default)]
        field: Option<FieldConfig>,
    },
    LorentzFlow {
        scatterers: ScatterersConfig,
        dt: f64,
    },
    Galton {
        g: f64,
        h: f64,
        /// Half-plane disks; the reference ones when absent.
        #[serde(default)]
        scatterers: Option<ScatterersConfig>,
    },
    Pingpong {
        #[serde(default)]
        profile: Option<ProfileSpec>,
    },
    PingpongLimit {
        delta: f64,
        #[serde(default)]
        convention: LimitConvention,
    },
    BounceFlow {
        #[serde(default)]
        profile: Option<ProfileSpec>,
        g: f64,
        dt: f64,
    },
}

impl SystemConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            SystemConfig::RandomWalk { .. } => "random_walk",
            SystemConfig::Lorentz { .. } => "lorentz",
            SystemConfig::LorentzFlow { .. } => "lorentz_flow",
            SystemConfig::Galton { .. } => "galton",
            SystemConfig::Pingpong { .. } => "pingpong",
            SystemConfig::PingpongLimit { .. } => "pingpong_limit",
            SystemConfig::BounceFlow { .. } => "bounce_flow",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepsConfig {
    #[serde(rename = "lazy_1d")]
    Lazy1d,
    #[serde(rename = "simple_1d")]
    Simple1d,
    #[serde(rename = "simple_2d")]
    Simple2d,
    /// Explicit atoms `(step, probability)`.
    Atoms { atoms: Vec<(Vec<i64>, f64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScatterersConfig {
    Reference,
    ReferenceHalfStrip,
    ReferenceHalfPlane,
    /// Sparser finite-horizon disks, for faster spreading.
    Sparse,
    SparseHalfPlane,
    /// Reference disks with the cell-0 corner disk removed.
    PerturbedReference,
    SingleDisk {
        radius: f64,
    },
    Custom {
        spec: ScattererSpec,
    },
}

impl ScatterersConfig {
    pub fn spec(&self) -> ScattererSpec {
        match self {
            ScatterersConfig::Reference => reference_spec(),
            ScatterersConfig::ReferenceHalfStrip => reference_half_strip_spec(),
            ScatterersConfig::ReferenceHalfPlane => reference_half_plane_spec(),
            ScatterersConfig::Sparse => sparse_spec(),
            ScatterersConfig::SparseHalfPlane => sparse_half_plane_spec(),
            ScatterersConfig::PerturbedReference => perturbed_reference_spec(),
            ScatterersConfig::SingleDisk { radius } => single_disk_spec(*radius),
            ScatterersConfig::Custom { spec } => spec.clone(),
        }
    }
}

/// Global observables by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum GlobalChoice {
    /// `prod cos(2 pi alpha z_i)`, average 0.
    GoldenCosine,
    Constant {
        value: f64,
    },
    /// `cos(phi)` of a collision point; average `pi/4`.
    CosPhi,
    /// `1 + sin(phi)` of a collision point; average 1.
    OnePlusSinPhi,
    /// Tent around integer velocities of the bouncing ball; average
    /// `height * width`.
    VelocityTent {
        width: f64,
        height: f64,
    },
}

/// Which check an exact oracle performs on a random-walk MLLT.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactCheck {
    /// Cells with exact mass below this fraction of the maximum are skipped.
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default = "default_se_factor")]
    pub se_factor: f64,
}

fn default_resolution() -> f64 {
    0.01
}
fn default_se_factor() -> f64 {
    4.0
}
fn default_r() -> f64 {
    2.0
}
fn default_weight() -> f64 {
    1.0
}
fn default_t_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GlobalVerdict {
    /// `|estimate - Phi1_bar Phi2_bar| <= tol + 4 SE` at the largest
    /// time and cube, for every centre.
    Mixing { tol: f64 },
    /// The correlation stays below `max_correlation` (plus 4 SE) on every
    /// cube while `Phi1_bar Phi2_bar` measured on the same cubes exceeds
    /// `min_product`; for flows `dist(g T, Z) > min_lattice_gap`.
    NonMixing {
        max_correlation: f64,
        min_product: f64,
        #[serde(default)]
        min_lattice_gap: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaBarConfig {
    pub k_start: f64,
    pub m: u64,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeRun {
    pub samples: u64,
    pub steps: u64,
    pub floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonExpectation {
    /// The declared bound holds on every ray.
    Bounded,
    /// Some ray escapes; an explicit example is reported.
    Corridor,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    Mllt {
        n: u64,
        samples: u64,
        #[serde(default)]
        window: MlltWindow,
        #[serde(default)]
        psi1: Option<String>,
        #[serde(default)]
        psi2: Option<String>,
        #[serde(default)]
        exact_check: Option<ExactCheck>,
    },
    Covariance {
        n: u64,
        samples: u64,
    },
    LocalGlobal {
        /// Support cell of `phi`.
        cell: Vec<i64>,
        /// `phi` is this multiple of the cell indicator.
        #[serde(default = "default_weight")]
        weight: f64,
        observable: GlobalChoice,
        n_list: Vec<u64>,
        samples: u64,
        #[serde(default)]
        tol: f64,
        #[serde(default = "default_r")]
        r: f64,
    },
    GlobalGlobal {
        phi1: GlobalChoice,
        phi2: GlobalChoice,
        #[serde(default)]
        steps: Vec<u64>,
        #[serde(default)]
        flow_times: Vec<f64>,
        sizes: Vec<u64>,
        centers: Vec<Vec<i64>>,
        samples: u64,
        verdict: GlobalVerdict,
    },
    Perturbation {
        phi1: GlobalChoice,
        phi2: GlobalChoice,
        n: u64,
        sizes: Vec<u64>,
        center: Vec<i64>,
        samples: u64,
        tol: f64,
    },
    Escape {
        cell: Vec<i64>,
        radius: f64,
        n_list: Vec<u64>,
        samples: u64,
        max_final: f64,
    },
    Horizon {
        rays: u64,
        expect: HorizonExpectation,
    },
    Invariance {
        samples: u64,
        bins: usize,
        /// Chi-square passes when `p > alpha`.
        alpha: f64,
        /// Collisions checked for reflection and energy identities.
        collisions: u64,
        /// Extra fields whose energy conservation is checked.
        #[serde(default)]
        energy_fields: Vec<FieldConfig>,
    },
    GaltonEnergy {
        n: u64,
        samples: u64,
        #[serde(default = "default_t_grid")]
        t_grid: Vec<f64>,
        sigma: SigmaBarConfig,
        sde: SdeRun,
        ks_max: f64,
        cross_ks_max: f64,
    },
    PingpongApprox {
        levels: Vec<f64>,
        samples: u64,
        ky_fan_max: f64,
        agreement_max: f64,
    },
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::Mllt { .. } => "mllt",
            ExperimentSpec::Covariance { .. } => "covariance",
            ExperimentSpec::LocalGlobal { .. } => "local_global",
            ExperimentSpec::GlobalGlobal { .. } => "global_global",
            ExperimentSpec::Perturbation { .. } => "perturbation",
            ExperimentSpec::Escape { .. } => "escape",
            ExperimentSpec::Horizon { .. } => "horizon",
            ExperimentSpec::Invariance { .. } => "invariance",
            ExperimentSpec::GaltonEnergy { .. } => "galton_energy",
            ExperimentSpec::PingpongApprox { .. } => "pingpong_approx",
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!(
            "{name} must be positive and finite, got {x}"
        )))
    }
}

fn increasing(name: &str, xs: &[u64]) -> Result<()> {
    if xs.is_empty() || xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err(format!(
            "{name} must be a nonempty increasing list"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON (sorted keys, no whitespace) of the
    /// fields that determine results; `workers` and `output` are left out
    /// so the hash, like the reports, does not depend on them.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = None;
        c.output = None;
        let v = serde_json::to_value(&c).expect("config serializes");
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(config_err(format!(
                "name {:?} must be nonempty [A-Za-z0-9_-]",
                self.name
            )));
        }
        if self.workers == Some(0) {
            return Err(config_err("workers must be at least 1"));
        }
        self.validate_system()?;
        self.validate_experiment()
    }

    fn validate_system(&self) -> Result<()> {
        match &self.system {
            SystemConfig::RandomWalk {
                steps: StepsConfig::Atoms { atoms },
            } => {
                if atoms.is_empty() {
                    return Err(config_err("random walk needs at least one atom"));
                }
            }
            SystemConfig::RandomWalk { .. } => {}
            SystemConfig::Lorentz { scatterers, .. } => {
                if let ScatterersConfig::SingleDisk { radius } = scatterers {
                    positive("radius", *radius)?;
                }
            }
            SystemConfig::LorentzFlow { dt, .. } => positive("dt", *dt)?,
            SystemConfig::Galton { g, h, scatterers } => {
                positive("g", *g)?;
                positive("h", *h)?;
                if let Some(c) = scatterers {
                    if c.spec().geometry != zmix_billiards::Geometry::HalfPlane {
                        return Err(Error::Config(
                            "galton scatterers must live in the half plane".into(),
                        ));
                    }
                }
            }
            SystemConfig::Pingpong { .. } => {}
            SystemConfig::PingpongLimit { delta, .. } => {
                if !delta.is_finite() {
                    return Err(config_err("delta must be finite"));
                }
            }
            SystemConfig::BounceFlow { g, dt, .. } => {
                positive("g", *g)?;
                positive("dt", *dt)?;
            }
        }
        Ok(())
    }

    fn validate_experiment(&self) -> Result<()> {
        let sys = self.system.kind();
        let needs = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(config_err(format!(
                    "experiment {} needs {what}, got system {sys}",
                    self.experiment.kind()
                )))
            }
        };
        let lorentz = matches!(self.system, SystemConfig::Lorentz { .. });
        let cocycle = !matches!(self.system, SystemConfig::Pingpong { .. });
        match &self.experiment {
            ExperimentSpec::Mllt {
                n,
                samples,
                exact_check,
                ..
            } => {
                needs(cocycle, "a cocycle system")?;
                if *n < 1 || *samples < 10_000 {
                    return Err(config_err("mllt needs n >= 1 and samples >= 10^4"));
                }
                if exact_check.is_some() {
                    needs(
                        matches!(self.system, SystemConfig::RandomWalk { .. }),
                        "a random walk for the exact check",
                    )?;
                }
            }
            ExperimentSpec::Covariance { n, samples } => {
                needs(cocycle, "a cocycle system")?;
                if *n < 1 || *samples < 100 {
                    return Err(config_err("covariance needs n >= 1 and samples >= 100"));
                }
            }
            ExperimentSpec::LocalGlobal {
                n_list, samples, r, ..
            } => {
                needs(cocycle, "a cocycle system")?;
                increasing("n_list", n_list)?;
                positive("r", *r)?;
                if *samples < 2 {
                    return Err(config_err("local_global needs samples >= 2"));
                }
            }
            ExperimentSpec::GlobalGlobal {
                steps,
                flow_times,
                sizes,
                centers,
                samples,
                ..
            } => {
                needs(cocycle, "a cocycle system")?;
                if steps.is_empty() == flow_times.is_empty() {
                    return Err(config_err(
                        "global_global needs exactly one of steps and flow_times",
                    ));
                }
                if !steps.is_empty() {
                    increasing("steps", steps)?;
                }
                if flow_times.windows(2).any(|w| w[0] >= w[1])
                    || flow_times.iter().any(|t| !(*t > 0.0))
                {
                    return Err(config_err("flow_times must be positive and increasing"));
                }
                increasing("sizes", sizes)?;
                if centers.is_empty() || *samples < 2 {
                    return Err(config_err("global_global needs a centre and samples >= 2"));
                }
            }
            ExperimentSpec::Perturbation {
                sizes,
                samples,
                tol,
                ..
            } => {
                needs(lorentz, "a lorentz system with local modifications")?;
                if let SystemConfig::Lorentz { scatterers, .. } = &self.system {
                    if scatterers.spec().local_mods.is_empty() {
                        return Err(config_err(
                            "perturbation needs a configuration with local_mods",
                        ));
                    }
                }
                increasing("sizes", sizes)?;
                if *samples < 2 || !(*tol >= 0.0) {
                    return Err(config_err("perturbation needs samples >= 2 and tol >= 0"));
                }
            }
            ExperimentSpec::Escape {
                n_list,
                samples,
                radius,
                ..
            } => {
                needs(cocycle, "a cocycle system")?;
                increasing("n_list", n_list)?;
                positive("radius", *radius)?;
                if *samples < 2 {
                    return Err(config_err("escape needs samples >= 2"));
                }
            }
            ExperimentSpec::Horizon { rays, .. } => {
                needs(lorentz, "a lorentz system")?;
                if *rays < 1 {
                    return Err(config_err("horizon needs rays >= 1"));
                }
            }
            ExperimentSpec::Invariance {
                samples,
                bins,
                alpha,
                ..
            } => {
                needs(lorentz, "a lorentz system")?;
                if *samples < 1 || *bins < 2 || !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(config_err(
                        "invariance needs samples >= 1, bins >= 2, 0 < alpha < 1",
                    ));
                }
            }
            ExperimentSpec::GaltonEnergy {
                n,
                samples,
                t_grid,
                sde,
                ..
            } => {
                needs(
                    matches!(self.system, SystemConfig::Galton { .. }),
                    "a galton board",
                )?;
                if *n < 1 || *samples < 2 || sde.samples < 2 || sde.steps < 1000 {
                    return Err(config_err(
                        "galton_energy needs n >= 1, samples >= 2, sde steps >= 1000",
                    ));
                }
                if t_grid.last() != Some(&1.0) {
                    return Err(config_err("galton_energy t_grid must end at 1"));
                }
            }
            ExperimentSpec::PingpongApprox {
                levels, samples, ..
            } => {
                needs(
                    matches!(self.system, SystemConfig::Pingpong { .. }),
                    "a pingpong system",
                )?;
                if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) || *samples < 1 {
                    return Err(config_err(
                        "pingpong_approx needs increasing levels and samples >= 1",
                    ));
                }
            }
        }
        Ok(())
    }
}
