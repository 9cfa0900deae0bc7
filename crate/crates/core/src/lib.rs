//! Semiparametric Bayesian sparse linear regression.
//!
//! The model is `y_i = x_i^T theta + eps_i` where the error density is an
//! unknown symmetric location-scale mixture of normals, given a symmetrized
//! Dirichlet-process prior, and `theta` carries a spike-and-slab prior with
//! Laplace slabs. The crate provides:
//!
//! * [`model`]: mixtures, scores, likelihoods and quadrature-based divergences,
//! * [`priors`]: the dimension prior, Laplace slab and stick-breaking draws,
//! * [`sampler`]: a Metropolis-within-Gibbs posterior sampler,
//! * [`diagnostics`]: design certificates (compatibility number, restricted
//!   eigenvalue) and asymptotic quantities (efficient score, model-weight
//!   approximation, normal-mixture approximant, LAN remainder),
//! * [`lab`]: simulated scenarios and experiment drivers that emit reports.

pub mod diagnostics;
pub mod error;
pub mod lab;
pub mod model;
pub mod priors;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
