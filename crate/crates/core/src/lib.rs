//! Collapsed inference for latent Dirichlet allocation.
//!
//! The crate implements collapsed Gibbs sampling and the collapsed
//! variational family (CVB, CVB0, CVB1s, CVB1d and type-based TCVB0) over a
//! shared table of expected counts, plus an alpha-divergence toolkit whose
//! exact-enumeration oracle checks that the CVB0 update is the composition of
//! two `alpha = 1` projections and one `alpha = -1` projection.
//!
//! A narrative guide lives in the `book/` directory of the repository; its
//! code listings are compiled and run as doc-tests of this crate.

pub mod corpus;
pub mod divergence;
pub mod evaluation;
pub mod inference;
mod matrix;
pub mod rng;
pub mod stats;

pub use matrix::Matrix;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpora.md")]
    mod corpora {}
    #[doc = include_str!("../../../book/src/divergences.md")]
    mod divergences {}
    #[doc = include_str!("../../../book/src/projections.md")]
    mod projections {}
    #[doc = include_str!("../../../book/src/algorithms.md")]
    mod algorithms {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
