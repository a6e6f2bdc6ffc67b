//! Wardrop lane-choice model for a traffic diverge with a middle bifurcating lane.
//!
//! The crate evaluates the model's costs and equilibrium conditions, computes
//! the equilibrium by best-response iteration (with a brute-force grid oracle
//! for cross-checking), calibrates cost coefficients from steady-state flow
//! data by minimising the number of violated equilibrium conditions, and
//! generates synthetic data with a stochastic driver simulator.

pub mod calibration;
pub mod cli;
pub mod datagen;
pub mod equilibrium;
pub mod error;
pub mod io;

pub mod model;

pub use error::{Error, Result};
pub use model::{
    bifurcating_cost, check_uniqueness_condition, feed_through_cost, is_wardrop_equilibrium, lane_costs,
    wardrop_residuals,
    CostCoefficients, DemandConfig, DivergeInstance, FlowDistribution, LaneClass, Link, UniquenessCheck,
    WardropResiduals,
};
