//! Domain types and pure numeric functionals of the regression model.

mod dataset;
mod divergence;
mod mixture;
mod quadrature;
mod sparse;

pub use dataset::{log_likelihood, Dataset, Truth};
pub use divergence::{
    hellinger, hellinger_sq, kl, mean_hellinger, score_centering, v_eta, v_eta_curvature,
};
pub use mixture::{Atom, SymmetricNormalMixture, LN_SQRT_2PI};
pub use quadrature::{gauss_legendre, QuadratureGrid, DEFAULT_NODES_PER_UNIT, TAIL_TOLERANCE};
pub use sparse::SparseVector;
