//! Pathwise functional expansions at desk scale: truncated path signatures,
//! Dupire functional derivatives, functional Taylor and intrinsic value
//! expansions, the Wiener-chaos bridge for path-independent payoffs, and a
//! Monte Carlo pricing/hedging harness for path-dependent claims.
//!
//! Paths live on explicit grids with piecewise-linear interpolation and
//! cadlag jumps encoded by duplicated time stamps. Every identity the
//! library relies on (Chen, shuffle duality, Hermite partition, kernel
//! reconstruction, basis reduction) is checkable at runtime through the
//! [`verify`] module.

pub mod error;
pub mod expansion;
pub mod funcderiv;
pub mod functional;
pub mod path;
pub mod signature;
pub mod util;
pub mod words;

pub use error::{Error, Result};
pub use expansion::{ExpansionReport, IveReport, RemainderBound};
pub use funcderiv::{ArcFunctional, DerivTable, DiffConfig, Functional, Letter};
pub use path::{lambda_distance, d1_distance, quadratic_variation, Path, PartitionScheme, PartitionSeq};
pub use signature::{
    chen_concat, hermite_combination, ito_iterated, iterated_strat_with_kernel, running_coordinate,
    seg_signature, signature, signature_batch, signature_strat, IveKernel, Signature,
    DEFAULT_DEPTH, MAX_DEPTH,
};
pub use words::{basis_reduce, enumerate_words, shuffle, words_with_weight, Word, WordPoly};
