//! Discrepancy divergence between empirical distributions under linear
//! hypothesis classes with squared loss, plus the two training algorithms
//! built on it:
//!
//! - a toy-scale discrepancy-GAN trainer ([`dgan`]) that alternates ascent on
//!   an embedding network with descent on a generator network, where the loss
//!   is the spectral norm of the difference of uncentered second-moment
//!   matrices of the embedded batches, and
//! - a convex ensemble-weight optimizer ([`edgan`]) that mixes pre-trained
//!   generators by projected subgradient descent on the probability simplex.
//!
//! The crate is `no_std` (with `alloc`): everything here is a pure function
//! of its inputs, with RNG state passed explicitly as a [`rng::RngStream`].
//! File formats and the command-line front end live in the companion `dgan-cli`
//! crate.
//!
//! Numeric conventions used throughout:
//!
//! - samples are rows of a [`matrix::SampleMatrix`], expected (but not forced)
//!   to lie in the unit ball;
//! - the discrepancy between sample sets equals `2 * |dominant eigenvalue|` of
//!   the covariance difference, while the internal training objective `F` is
//!   the bare spectral norm — see [`discrepancy`] and [`dgan`] for the factor;
//! - all floating point is `f64`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod datagen;
pub mod dgan;
pub mod discrepancy;
pub mod edgan;
pub mod evaluation;
pub mod linalg;
pub mod matrix;
pub mod neuralnet;
pub mod rng;

/// Errors shared across the numeric modules.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("row {row} has norm {norm} outside the unit ball")]
    OutsideUnitBall { row: usize, norm: f64 },
    #[error("matrix is asymmetric at ({0},{1})")]
    Asymmetric(usize, usize),
    #[error("oracle size limit: dim {0} > {1}")]
    OracleSizeLimit(usize, usize),
    #[error("exhaustive size limit: {0} points per side > {1}")]
    ExhaustiveSizeLimit(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParam(&'static str),
    #[error("non-finite loss at step {0}")]
    NonFiniteLoss(usize),
    #[error("layer dimensions do not chain at layer {0}")]
    LayerChain(usize),
    #[error("tape does not match network or gradient shape")]
    TapeMismatch,
}

pub type Result<T> = core::result::Result<T, Error>;
