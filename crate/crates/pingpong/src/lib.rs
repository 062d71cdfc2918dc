//! One-dimensional mechanical models with a moving wall: the Fermi-Ulam
//! pingpong (particle between a fixed and a periodically moving wall) and
//! the bouncing ball in a gravity field. Exact event-driven dynamics,
//! the explicit high-energy limit maps and their torus factors.

pub mod ball;
pub mod fermi;
mod roots;
pub mod wall;

pub use ball::{
    bouncing_event, bouncing_limit_map, bouncing_map, check_jing_condition, factor_map, quotient,
    velocity_tent, BallPoint, BallState, BounceEvent, BounceFlow, JingClause, JingVerdict,
};
pub use fermi::{
    approximation_ladder, compute_delta, hyperbolicity_check, limit_map, limit_map_with,
    pingpong_event, ApproxReport, ApproxRow, DeltaEstimate, Hyperbolicity, LimitConvention,
    LimitPoint, Pingpong, PingpongEvent, PingpongLimitSystem, PingpongState, TorusPoint, WallId,
};
pub use wall::{ProfileSpec, WallMotion};
