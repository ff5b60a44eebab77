//! Model compilers for the hardness constructions: polynomial normal forms
//! and their MDP gadget, and probabilistic automata as MDPs.

pub mod pa;
pub mod poly;

pub use pa::{
    always_x, emptiness_search, flip_gain, pa_theta, pa_to_mdp, series_tail, series_value, strategy_series,
    PaGadget, PrefixStrategy,
};
pub use poly::{
    etr2_transform, etr3_normalize, etr3_rewrite, poly_to_mdp, NormalFormPoly, NormalTerm, PolyGadget, Polynomial,
};
