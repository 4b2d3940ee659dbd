//! Hybrid feedback that steers a single integrator in Rⁿ to the origin while
//! avoiding one spherical obstacle.

pub mod config;
pub mod controller;
pub mod geometry;
pub mod output;
pub mod params;
pub mod sim;
pub mod verify;

pub use controller::{ControlError, ControlLaw, JumpTarget, Mode};
pub use geometry::{GeometryError, Region, VecN};
pub use params::{validate, Gains, ObstacleSpec, ParamError, RawParams, ValidatedParams};
pub use sim::{batch_simulate, simulate, HybridTrajectory, SimConfig, SimError};
