//! Exponentiated Lindley geometric (ELG) lifetime distribution.
//!
//! The ELG law is the minimum of a geometric number of systems, each failing
//! when the last of `alpha` parallel Lindley components fails. This crate
//! evaluates it (pdf, cdf, hazard, quantile), samples it, computes its
//! moments, and fits it by maximum likelihood (Newton-Raphson and EM), with
//! the comparator models and model-selection tooling needed to judge a fit.
//!
//! Module map:
//!
//! - [`special`]: Lambert W (lower branch), gamma-function helpers, semi-infinite
//!   quadrature, series summation.
//! - [`distributions`]: parameter types, densities, quantiles, sampling.
//! - [`moments`]: the mixture series for raw moments and the MGF.
//! - [`estimation`]: log-likelihood, score, observed information, fitting.
//! - [`inference`]: comparator fits, information criteria, likelihood-ratio tests.
//! - [`cli`]: data ingestion and the command implementations behind the `elg` binary.

// `!(x > 0.0)` is the NaN-rejecting guard used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod distributions;
pub mod error;
pub mod estimation;
pub mod inference;
pub mod moments;
pub mod special;

pub use distributions::{ElgParams, GammaParams, LgParams, LindleyParams, Seed, WeibullParams};
pub use error::{Error, Result};
pub use estimation::{Dataset, FitMethod, FitOptions, FitResult};
