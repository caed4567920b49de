//! Markov tree distributions built from bivariate specifications: exact
//! finite-support laws, copula-based sampling, and dependence-order checks.

pub mod copulas;
pub mod counterexamples;
pub mod discrete;
pub mod error;
pub mod hmm;
pub mod lp;
pub mod marginals;
pub mod normal;
pub mod ordering;
pub mod random_laws;
pub mod sampler;
pub mod tree;

pub use copulas::Copula;
pub use error::{Error, Result};
pub use marginals::Marginal;
pub use tree::{DirectedTree, LabeledTree, TheoremQuery};
