//! Special functions and Wick renormalization.

mod bessel;
mod gamma;
pub mod identities;
mod polynomials;
mod wick;

pub use bessel::{bessel_i, bessel_k, ln_bessel_i, scaled_bessel_k, ASYMPTOTIC_SWITCH};
pub use gamma::{gamma, ln_gamma};
pub use identities::{
    identity_hermite_exp, identity_hermite_laguerre, identity_laguerre_bessel, run_identity_grid, IdentityKind,
    IdentityReport,
};
pub use polynomials::{hermite, hermite_coefficients, laguerre, laguerre_coefficients, MAX_DEGREE};
pub use wick::{estimate_wick_covariance, wick_gff, wick_local, wick_mixed, wick_norm, WickCovariance};
