//! Simulation and boundary control of axon growth: a moving-boundary
//! advection-diffusion-degradation PDE for the tubulin concentration, coupled
//! to the growth-cone/length ODEs, with a backstepping flux observer and an
//! output-feedback control law.
//!
//! The numerics are generic over the scalar type ([`scalar::Scalar`], i.e.
//! `f32` or `f64`); the type aliases at the crate root fix `f64`, which is
//! what the CLI and the stock scenarios use.

pub mod analysis;
pub mod config;
pub mod controller;
pub mod equilibrium;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod observer;
pub mod params;
pub mod phi;
pub mod scalar;
pub mod scenario;
pub mod simulator;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Concrete `f64` aliases for the main domain types.
pub type BiophysicalParams = params::BiophysicalParams<f64>;
pub type EquilibriumProfile = equilibrium::EquilibriumProfile<f64>;
pub type LinearModel = model::LinearModel<f64>;
pub type GainConfig = model::GainConfig<f64>;
pub type GainReport = model::GainReport<f64>;
pub type KernelTable = kernel::KernelTable<f64>;
pub type PhiGain = phi::PhiGain<f64>;
pub type PlantState = simulator::PlantState<f64>;
pub type Measurements = simulator::Measurements<f64>;
pub type ObserverState = observer::ObserverState<f64>;
pub type ControlValue = controller::ControlValue<f64>;
pub type DecayReport = analysis::DecayReport<f64>;
pub type ScenarioConfig = config::ScenarioConfig;
