//! Systems built from their descriptors, and the observables each system
//! understands by name.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use zmix_billiards::{
    Billiard, BilliardFlow, BoundaryPoint, FieldConfig, FieldSpec, GaltonBoard, LorentzSystem,
    ScattererConfig,
};
use zmix_core::error::{Error, Result};
use zmix_core::observables::{BaseFn, GlobalObservable};
use zmix_core::oracles::{srw_system, SrwSystem, StepDistribution};
use zmix_core::rng::derive_seed;
use zmix_core::{CocycleSystem, LatticeVector};
use zmix_pingpong::{
    velocity_tent, BallPoint, BounceFlow, Pingpong, PingpongLimitSystem, WallMotion,
};

use crate::config::{GlobalChoice, StepsConfig, SystemConfig};

/// Tag separating the walk's symbol stream from ensemble streams.
const WALK_STREAM: u64 = 0x5157;

pub enum Built {
    Walk(SrwSystem),
    Lorentz(LorentzSystem),
    Flow(BilliardFlow),
    Galton(GaltonBoard),
    Pingpong(Pingpong),
    Limit(PingpongLimitSystem),
    Bounce(BounceFlow),
}

pub fn steps_of(c: &StepsConfig) -> Result<StepDistribution> {
    Ok(match c {
        StepsConfig::Lazy1d => StepDistribution::lazy_1d(),
        StepsConfig::Simple1d => StepDistribution::simple_1d(),
        StepsConfig::Simple2d => StepDistribution::simple_2d(),
        StepsConfig::Atoms { atoms } => StepDistribution::new(
            atoms
                .iter()
                .map(|(z, p)| (LatticeVector::new(z), *p))
                .collect(),
        )?,
    })
}

fn wall_of(profile: &Option<zmix_pingpong::ProfileSpec>) -> Result<WallMotion> {
    match profile {
        Some(p) => WallMotion::new(p.clone()),
        None => WallMotion::corner(6.0),
    }
}

pub fn lorentz(
    spec: zmix_billiards::ScattererSpec,
    field: Option<&FieldConfig>,
) -> Result<LorentzSystem> {
    let config = ScattererConfig::new(spec)?;
    let field = field.map_or(FieldSpec::None, FieldConfig::build);
    Ok(LorentzSystem::new(Billiard::new(config, field)?))
}

pub fn build(system: &SystemConfig, seed: u64) -> Result<Built> {
    Ok(match system {
        SystemConfig::RandomWalk { steps } => {
            Built::Walk(srw_system(steps_of(steps)?, derive_seed(seed, WALK_STREAM)))
        }
        SystemConfig::Lorentz { scatterers, field } => {
            Built::Lorentz(lorentz(scatterers.spec(), field.as_ref())?)
        }
        SystemConfig::LorentzFlow { scatterers, dt } => Built::Flow(BilliardFlow::new(
            Billiard::free(ScattererConfig::new(scatterers.spec())?),
            *dt,
        )?),
        SystemConfig::Galton { g, h, scatterers } => Built::Galton(match scatterers {
            Some(c) => GaltonBoard::new(c.spec(), *g, *h)?,
            None => GaltonBoard::reference(*g, *h)?,
        }),
        SystemConfig::Pingpong { profile } => Built::Pingpong(Pingpong::new(wall_of(profile)?)?),
        SystemConfig::PingpongLimit { delta, convention } => {
            Built::Limit(PingpongLimitSystem::new(*delta, *convention)?)
        }
        SystemConfig::BounceFlow { profile, g, dt } => {
            Built::Bounce(BounceFlow::new(wall_of(profile)?, *g, *dt)?)
        }
    })
}

fn unavailable(what: &str, name: &str) -> Error {
    Error::Config(format!("{what} {name:?} is not defined on this system"))
}

/// Named observables of a system.
pub trait Registry: CocycleSystem
where
    Self::Base: 'static,
{
    fn global(&self, c: &GlobalChoice) -> Result<GlobalObservable<Self::Base>> {
        common_global(c)
    }

    /// Base functions for the MLLT weights.
    fn psi(&self, name: &str) -> Result<BaseFn<Self::Base>> {
        Err(unavailable("base function", name))
    }
}

fn common_global<B: 'static>(c: &GlobalChoice) -> Result<GlobalObservable<B>> {
    match c {
        GlobalChoice::GoldenCosine => Ok(GlobalObservable::golden_cosine()),
        GlobalChoice::Constant { value } => Ok(GlobalObservable::constant(*value)),
        other => Err(unavailable("observable", &format!("{other:?}"))),
    }
}

impl Registry for SrwSystem {}
impl Registry for PingpongLimitSystem {}
impl Registry for BilliardFlow {}

impl Registry for LorentzSystem {
    fn global(&self, c: &GlobalChoice) -> Result<GlobalObservable<BoundaryPoint>> {
        // the angle law cos(phi)/2 holds with or without a field
        match c {
            GlobalChoice::CosPhi => {
                Ok(
                    GlobalObservable::base_only("cos_phi", 1.0, |y: &BoundaryPoint| y.phi.cos())
                        .with_mean(FRAC_PI_4)
                        .with_modulus(|d| d),
                )
            }
            GlobalChoice::OnePlusSinPhi => Ok(GlobalObservable::base_only(
                "one_plus_sin_phi",
                2.0,
                |y: &BoundaryPoint| 1.0 + y.phi.sin(),
            )
            .with_mean(1.0)
            .with_modulus(|d| d)),
            other => common_global(other),
        }
    }

    fn psi(&self, name: &str) -> Result<BaseFn<BoundaryPoint>> {
        match name {
            "cos_phi" => Ok(Arc::new(|y: &BoundaryPoint| y.phi.cos())),
            "one_plus_sin_phi" => Ok(Arc::new(|y: &BoundaryPoint| 1.0 + y.phi.sin())),
            _ => Err(unavailable("base function", name)),
        }
    }
}

impl Registry for BounceFlow {
    fn global(&self, c: &GlobalChoice) -> Result<GlobalObservable<BallPoint>> {
        match *c {
            GlobalChoice::VelocityTent { width, height } => {
                if !(width > 0.0 && width <= 0.5 && height.is_finite()) {
                    return Err(Error::Config(format!(
                        "tent width {width} must lie in (0, 1/2]"
                    )));
                }
                Ok(GlobalObservable::base_only(
                    "velocity_tent",
                    height.abs(),
                    move |p: &BallPoint| velocity_tent(p.v, width, height),
                )
                .with_mean(height * width)
                .with_modulus(move |d| height.abs() * d / width))
            }
            ref other => common_global(other),
        }
    }
}
