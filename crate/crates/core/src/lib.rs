//! Two-albedo-line energy balance model with a Northern Hemisphere
//! mass-balance switch, and the numerics for its Filippov glacial cycle.

pub mod cycle;
pub mod equilibria;
pub mod error;
pub mod geometry;
pub mod legendre;
pub mod model;
pub mod ode;
pub mod params;

pub use error::{Error, Result};
pub use legendre::{insolation_coeffs, legendre_antiderivative, legendre_eval, InsolationModel};
pub use params::{Branch, ClimateState3, ClimateState4, Model, ModelParams};
