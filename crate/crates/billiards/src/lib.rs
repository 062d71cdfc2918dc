//! Lorentz gases and Galton boards: periodic and locally perturbed disk
//! configurations in the plane, a tube, a half strip or a half plane, with
//! free motion or motion in an external field.

pub mod billiard;
pub mod dump;
pub mod field;
pub mod flight;
pub mod galton;
pub mod geometry;
pub mod measure;
pub mod systems;

pub use billiard::{billiard_flow, collision_map, next_collision_field, Billiard, FlowOutcome};
pub use field::{FieldConfig, FieldSpec, GaussianBump, Potential};
pub use flight::{next_collision_free, reflect, BoundaryCoord, BoundaryPoint, CollisionEvent};
pub use galton::{estimate_sigma_bar, GaltonBoard, GaltonState, SigmaBarEstimate};
pub use geometry::{Disk, Geometry, LocalMod, ScattererConfig, ScattererRef, ScattererSpec};
pub use measure::{sample_nu, verify_finite_horizon, HorizonReport};
pub use systems::{BilliardFlow, FlowPoint, LorentzSystem};
