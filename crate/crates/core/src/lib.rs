//! AMITE polynomial expansions of neural-network activations.
//!
//! The crate is organised bottom-up:
//!
//! - [`mpcore`]: arbitrary-precision scalars, special functions and
//!   tanh-sinh quadrature.
//! - [`expansion`]: coefficients of the tanh and ReLU expansions together with
//!   their exact and approximate error formulas.
//! - [`polyexpand`]: multivariate polynomials and single-hidden-layer expansion.
//! - [`intervals_tm`]: outward-rounded intervals and Taylor models.
//! - [`ffnn`]: feed-forward networks, stimulation and perturbation.
//! - [`equivtest`]: black-box equivalence testing in coefficient space.
//! - [`rangebound`]: rigorous output range bounds for deep networks.

pub mod equivtest;
pub mod error;
pub mod expansion;
pub mod ffnn;
pub mod intervals_tm;
pub mod mpcore;
pub mod polyexpand;
pub mod rangebound;

pub use error::{Error, Result};
