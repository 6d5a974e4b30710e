//! L²-invariants of matrices over group rings, computed through finite
//! approximations.
//!
//! The crate works with square matrices `Δ = A*A` over a group ring `ℂπ`
//! and estimates their spectral density function, L²-Betti number
//! `F_Δ(0)` and Fuglede–Kadison log-determinant from finite data:
//!
//! * quotient towers `π → π_i` onto finite groups ([`schemes::run_tower`]),
//! * Følner boxes in `ℤⁿ` with compressed operators ([`schemes::run_folner`]),
//! * torus-symbol quadrature and exact integer oracles ([`oracles`]).
//!
//! Ring arithmetic is exact (Gaussian rationals); floating point appears only
//! once a finite-level operator is handed to the spectral code. The numeric
//! side is generic over [`Real`] and the exact side over [`Coefficient`]; the
//! aliases below pin the types used by the pipelines.

pub mod cw;
pub mod error;
pub mod groups;
pub mod io;
pub mod matrices;
pub mod oracles;
pub mod report;
pub mod ring;
pub mod scalar;
pub mod schemes;
pub mod spectral;

pub use error::{Error, Result};
pub use groups::{GroupDescriptor, GroupElement, Homomorphism};
pub use scalar::{Coefficient, Real};
pub use spectral::{EigenResult, SpectralDensity};

use num_complex::Complex;
use num_rational::BigRational;

/// Exact rational number.
pub type Rational = BigRational;
/// Exact Gaussian rational `re + i·im`, the coefficient type of `ℂπ` used throughout.
pub type GaussianRational = Complex<BigRational>;
/// Finitely supported element of `ℂπ` with exact coefficients.
pub type RingElement = ring::GroupRingElement<GaussianRational>;
/// Matrix over `ℂπ` with exact coefficients.
pub type RingMatrix = matrices::GroupRingMatrix<GaussianRational>;
/// Dense Hermitian matrix in double precision.
pub type Hermitian = spectral::HermitianMatrix<f64>;
