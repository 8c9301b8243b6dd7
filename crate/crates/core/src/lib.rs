//! Heralded non-Gaussian mechanical states in cavity optomechanics.
//!
//! The crate covers two state-preparation protocols built on the
//! optomechanical two-mode-squeezing interaction:
//!
//! * a blue-detuned **pulsed** drive, treated both exactly in a truncated Fock
//!   basis ([`fockrep`]) and as a Gaussian Bogoliubov input-output map that
//!   includes mechanical damping into a thermal bath ([`pulsed`]);
//! * a **continuous** drive whose output light is cut into a bosonic temporal
//!   mode by a spectral filter ([`steady`]).
//!
//! In both cases a Geiger-mode click on the optical mode heralds a conditional
//! mechanical state whose Wigner negativity is integrated by [`negativity`].
//!
//! All physics operates on [`params::DimensionlessParams`]: frequencies in
//! units of the mechanical frequency Ω, times in units of 1/Ω.
//! Quadratures use the convention `x = (a + a†)/√2`, so the vacuum variance is
//! 1/2 and covariance matrices are ordered `(q, p, X, Y)` (mechanics first).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod fockrep;
pub mod gaussian;
pub mod io;
pub mod negativity;
pub mod numerics;
pub mod params;
pub mod pulsed;
pub mod semiclassical;
pub mod steady;

pub use error::{Error, Result};
pub use fockrep::{FockBipartiteState, RadialFockMixture};
pub use gaussian::{ConditionalWigner, CovarianceState};
pub use negativity::NegativityResult;
pub use params::{DetectorModel, DimensionlessParams, PhysicalSetup, RegimeReport};
pub use pulsed::{BogoliubovEnvelopes, BogoliubovMap, PulseMap};
pub use steady::{DriftDiffusion, FilterShape, FilterSpec};
