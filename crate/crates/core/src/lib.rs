//! Shrinkage-based model selection for a periodic signal observed in
//! continuous time under Lévy noise.
//!
//! The observation model is `dy_t = S(t) dt + dξ_t` on `[0, n]` with
//! `ξ = σ₁ w + σ₂ z`, where `w` is a Brownian motion and `z` a sum of
//! compensated compound-Poisson impulse sources. The crate provides
//!
//! - [`signal`]: periodic signals, the trigonometric basis and quadrature,
//! - [`levy`]: path simulation and discretized stochastic integrals,
//! - [`estimate`]: Fourier estimates, weighted LSE and James–Stein shrinkage,
//! - [`selection`]: the variance estimate, penalized cost and Pinsker grid,
//! - [`risk`]: the Monte Carlo risk harness and property checks,
//! - [`cli`]: configuration, CSV artifacts and the `levysel` subcommands.

pub mod cli;
pub mod error;
pub mod estimate;
pub mod levy;
pub mod risk;
pub mod selection;
pub mod signal;

pub use error::{Error, Result};
