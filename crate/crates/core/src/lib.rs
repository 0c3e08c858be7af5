//! Exact-arithmetic toolkit for computable probability.
//!
//! Everything here is built on staged evaluation: a single natural-number
//! stage is the fuel for every semicomputation, and every operation is a
//! pure function of its inputs and the stage. Lower bounds only improve as
//! the stage grows, enclosures only shrink, and membership verdicts never
//! flip once they resolve. All arithmetic is exact rational; there is no
//! floating point anywhere in the computation path.
//!
//! Module map:
//!
//! - [`numeric`] — rationals, rational intervals, stage-indexed monotone
//!   bounds (the computational form of lower/upper semicomputable reals).
//! - [`cms`] — computable metric spaces: ideal points, fast Cauchy point
//!   descriptors, ideal balls, and recursively enumerable open sets.
//! - [`lsc`] — lower semicontinuous functions as enumerated suprema of step
//!   and hat functions, with staged evaluation and superlevel sets.
//! - [`measures`] — ideal measures and measure descriptors; exact Prokhorov
//!   and Wasserstein distances; staged valuation and integration.
//! - [`binaryrep`] — binary representations: almost-decidable balls, cells,
//!   the encode/decode pair, and cell-measure enclosures.
//! - [`randomness`] — integral and Martin-Löf randomness tests, converters
//!   between the two, the finite universal combinator, and test transport.
//! - [`doc`] — the JSON document formats used by the CLI.

pub mod binaryrep;
pub mod cms;
pub mod doc;
pub mod lsc;
pub mod measures;
pub mod numeric;
pub mod randomness;
pub mod testkit;

pub use numeric::{Rational, RatInterval, Stage};
