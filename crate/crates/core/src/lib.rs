//! Harmonic analysis on the Olshanski spherical pair `(SL(∞), SU(∞))` at
//! finite rank.
//!
//! The crate evaluates the class-𝔅 building blocks
//! `Π(α, λ) = ∏_j (cosh λ − i α_j sinh λ)⁻¹`, the spherical functions
//! `φ_α(g) = ∏_j Π(α, λ_j(g))` built from them, and certifies positive-type,
//! negative-type and Schoenberg properties on finite Gram matrices.
//! Positive- and negative-type biinvariant functions are synthesized from
//! discrete measures on the parameter space and fitted back by nonnegative
//! least squares.
//!
//! Modules:
//! - [`params`]: the stratified parameter space, power sums, Newton identities.
//! - [`classb`]: evaluation and inversion of `Π(α, ·)`.
//! - [`measures`]: the densities whose Fourier transforms are `Π(α, ·)`.
//! - [`group`]: finite-rank group elements, Haar sampling, Cartan profiles.
//! - [`kernels`]: Gram-matrix certificates.
//! - [`bochner`]: synthesis, boundedness checks and measure fitting.
//! - [`cli`]: the command-line front end.

pub mod bochner;
pub mod classb;
pub mod cli;
mod error;
pub mod group;
pub mod kernels;
pub mod measures;
pub mod params;
pub(crate) mod seeds;

pub use error::{Error, Result};
pub use num_complex::Complex64;
