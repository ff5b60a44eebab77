//! Probabilistic bisimilarity and bisimilarity distances on labelled Markov
//! chains and labelled MDPs.

pub mod bisim;
pub mod distances;
pub mod error;
pub mod general_lt1;
pub mod linalg;
pub mod lp;
pub mod memoryless_min;
pub mod models;
pub mod numeric;
pub mod reductions;
pub mod strategies;
pub mod transport;

pub use error::{Error, Result};
pub use models::{Distribution, Lmc, Mdp, ProbAutomaton, StateIx};
pub use numeric::Rational;
