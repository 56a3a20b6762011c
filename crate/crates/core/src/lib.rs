//! Continuous Shariah Compliance Index (CSCI) toolkit.
//!
//! The crate is organised bottom-up along the data flow:
//!
//! - [`panel`]: CSV ingestion, eligibility filters, CRSP/Compustat style linking
//!   and the six-month accounting availability convention.
//! - [`ratios`]: leverage, cash, receivables and impure-income ratios with
//!   capping and cross-sectional winsorization.
//! - [`scoring`]: piecewise ratio scores, the sectoral factor, the weighted
//!   geometric financial score and the firm-month CSCI.
//! - [`standards`]: emulation of six binary screening standards and recovery
//!   of the CSCI cut that best replicates each of them.
//! - [`portfolio`]: monthly rebalanced value-weighted, threshold and tilt
//!   portfolios with turnover and transaction costs.
//! - [`analytics`]: performance statistics, HAC factor regressions,
//!   Fama-MacBeth cross-sections, decile and frontier tables.
//! - [`synthgen`]: deterministic synthetic inputs and planted scenarios.
//! - [`pipeline`]: glue that turns loaded inputs into a scored panel.

// Negated float comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod error;
pub mod io;
pub mod month;
pub mod panel;
pub mod pipeline;
pub mod portfolio;
pub mod ratios;
pub mod scoring;
pub mod sector;
pub mod standards;
pub mod stats;
pub mod synthgen;

pub use error::{Error, Result};
pub use month::Month;
pub use panel::FirmId;
pub use pipeline::{ScoredPanel, ScoredRow};
pub use scoring::{CsciRecord, ScoreConfig};
