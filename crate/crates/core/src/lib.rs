//! Discrete pedestrian dynamics with social groups.
//!
//! Agents walk on a lattice of 0.4 m cells. Each step every agent scores
//! the free cells of its Moore neighbourhood with a weighted sum of floor
//! field terms (goal, obstacles, proxemics, inertia) plus, for group
//! members, a cohesion term whose weight adapts to how dispersed the group
//! is. Moves are drawn from a softmax over the utilities and applied in
//! parallel with random conflict resolution.

pub mod agent;
pub mod calibration;
pub mod config;
pub mod engine;
pub mod error;
pub mod field;
pub mod grid;
pub mod metrics;
pub mod output;
pub mod record;
pub mod scenarios;
pub mod weights;

pub use agent::{predict_position, Agent, AgentClass, AgentId, Group, GroupId};
pub use engine::{
    group_dispersion, resolve_conflicts, softmax, Components, ExitPolicy, Goal, ModelParams,
    SimState, StepEvents,
};
pub use error::{Error, Result};
pub use field::{build_distance_field, build_obstacle_field, ScalarField};
pub use grid::{Cell, CellKind, Environment};
pub use weights::{balance_weights, Weights};

/// Cell side used by every shipped scenario (meters).
pub const CELL_SIZE: f64 = 0.4;
/// Step duration used by every shipped scenario (seconds).
pub const TIME_STEP: f64 = 0.25;
/// Desired walking speed of all simulated pedestrians (m/s).
pub const DESIRED_SPEED: f64 = 1.6;
