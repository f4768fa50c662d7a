//! Compact formula extraction for parfactor models.
//!
//! A parfactor model stores each local distribution as a full potential
//! table. This crate shrinks the number of distinct potentials in each table
//! under a Hellinger-distance budget, turns the reduced tables into weighted
//! Boolean formulas, and minimizes those formulas with Quine-McCluskey. The
//! result is a Markov logic network that encodes the reduced model.
//!
//! The pipeline stages live in their own modules:
//!
//! - [`model`]: parfactors, grounding, the brute-force joint distribution and
//!   the text model format.
//! - [`metrics`]: Hellinger distance and distinct-value counting.
//! - [`reduction`]: quantile and DBSCAN reduction plus the strategy selector.
//! - [`logic`]: canonical extraction, weight buckets and minimization.
//! - [`mln`]: MLN values, their semantics, the `.mln` format and the
//!   end-to-end [`mln::cofe`] driver.
//! - [`inference`]: exact query answering by variable elimination.
//! - [`eval`]: datasets, noise injection and the experiment harness.
//! - [`cli`]: the `cofe` command-line front-end.

pub mod cli;
pub mod error;
pub mod eval;
pub mod inference;
pub mod logic;
pub mod metrics;
pub mod mln;
pub mod model;
pub mod reduction;

pub use error::{Error, Result};
