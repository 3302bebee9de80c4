//! Flat-topped probability densities.
//!
//! Univariate and elliptical multivariate families with nearly constant
//! density around the mode, flatness diagnostics, coordinate-wise maximum
//! likelihood, and a generalized EM mixture pipeline scored by AIC/BIC.

pub mod data;
pub mod divergence;
pub mod error;
pub mod flatness;
pub mod mixture;
pub mod mle;
pub mod multivariate;
pub mod specfun;
pub mod univariate;

pub use error::{Error, Result};
pub use univariate::{FamilyTag, UnivariateFamily, UnivariateSpec};
