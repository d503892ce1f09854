//! Diagnostics for chaotic and fractal policy-optimization landscapes.
//!
//! The crate evaluates small deterministic control problems (`envs`) under
//! parametric policies (`policies`), estimates maximal Lyapunov exponents of
//! the closed-loop dynamics (`lyapunov`), and quantifies the local roughness
//! of the discounted objective by variance-scaling regression of the Hölder
//! exponent (`holder`). Monte Carlo policy gradients (`policygrad`) supply
//! scan directions for the landscape experiments (`landscape`), and `repro`
//! wires the pinned end-to-end pipelines behind the `fractalscape` CLI.

pub mod envs;
pub mod error;
pub mod holder;
pub mod landscape;
pub mod lyapunov;
pub mod policies;
pub mod policygrad;
pub mod repro;
pub mod rng;
pub mod rollout;
pub mod theta_io;

pub use error::{Error, Result};
