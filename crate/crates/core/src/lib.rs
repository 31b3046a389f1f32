//! Arithmetic dynamics on the projective line over the rationals.
//!
//! The crate computes certified canonical heights of rational points under
//! degree-`d` self-maps of P^1, evaluates parametric (bifurcation) potentials
//! for one-parameter marked families, turns grid-sampled potentials into
//! discrete bifurcation measures, enumerates preperiodic parameters as root
//! sets of exact polynomials, and measures how those root sets equidistribute
//! toward the bifurcation measure.
//!
//! Exact arithmetic (big rationals, exact resultants and gcds) backs every
//! certificate; floating point only enters through escape-rate sums whose
//! geometric tails are bounded by constants derived from exact Bezout
//! cofactor data.

pub mod bifurcation;
pub mod cpoly;
pub mod dynamics;
pub mod equilab;
pub mod error;
pub mod family;
pub mod poly;
pub mod preper;
pub mod primes;
pub mod roots;
pub mod scale;

pub use error::{Error, Result};
pub use poly::{BigRat, PolyQ};

pub use num_bigint::BigInt;
pub use num_complex::Complex64;
