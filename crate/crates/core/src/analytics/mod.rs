//! Performance statistics, factor regressions, Fama-MacBeth cross-sections
//! and characteristic tables.

mod deciles;
mod fama_macbeth;
mod frontier;
mod ols;
mod performance;
mod regression;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use deciles::{assign_deciles, decile_table, write_deciles_csv, DecileReport, DecileRow};
pub use fama_macbeth::{
    build_cross_sections, fama_macbeth, write_fm_csv, FmControl, FmCrossSection, FmReport,
    MAX_SKIPPED_SHARE, T_STAT_CAP,
};
pub use frontier::{frontier_table, write_frontier_csv, FrontierRow};
pub use ols::{ols, OlsFit};
pub use performance::{
    max_drawdown, performance_summary, write_performance_csv, PerformanceSummary,
    MIN_PERFORMANCE_MONTHS,
};
pub use regression::{
    factor_regression, hac_covariance, regress_on_factors, white_covariance, RegressionReport,
    DEFAULT_HAC_LAGS, MIN_REGRESSION_OBS,
};

use crate::error::{Error, Result};
use crate::month::Month;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorRow {
    pub month: Month,
    pub mkt_rf: f64,
    pub smb: f64,
    pub hml: f64,
    pub rmw: f64,
    pub cma: f64,
    pub mom: f64,
    pub rf: f64,
}

impl FactorRow {
    pub fn factor(&self, name: &str) -> Option<f64> {
        Some(match name {
            "mkt_rf" => self.mkt_rf,
            "smb" => self.smb,
            "hml" => self.hml,
            "rmw" => self.rmw,
            "cma" => self.cma,
            "mom" => self.mom,
            _ => return None,
        })
    }
}

/// Monthly factor returns keyed by month.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FactorSeries {
    rows: BTreeMap<Month, FactorRow>,
}

impl FactorSeries {
    pub fn new(rows: Vec<FactorRow>) -> Self {
        FactorSeries {
            rows: rows.into_iter().map(|r| (r.month, r)).collect(),
        }
    }

    pub fn get(&self, month: Month) -> Option<&FactorRow> {
        self.rows.get(&month)
    }

    pub fn require(&self, month: Month) -> Result<&FactorRow> {
        self.get(month).ok_or(Error::MissingFactors(month))
    }

    pub fn rows(&self) -> impl Iterator<Item = &FactorRow> {
        self.rows.values()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorSubset {
    Capm,
    Ff3,
    #[default]
    Ff6,
}

impl FactorSubset {
    pub fn names(self) -> &'static [&'static str] {
        match self {
            FactorSubset::Capm => &["mkt_rf"],
            FactorSubset::Ff3 => &["mkt_rf", "smb", "hml"],
            FactorSubset::Ff6 => &["mkt_rf", "smb", "hml", "rmw", "cma", "mom"],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FactorSubset::Capm => "capm",
            FactorSubset::Ff3 => "ff3",
            FactorSubset::Ff6 => "ff6",
        }
    }
}

impl fmt::Display for FactorSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FactorSubset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "capm" => Ok(FactorSubset::Capm),
            "ff3" => Ok(FactorSubset::Ff3),
            "ff6" => Ok(FactorSubset::Ff6),
            other => Err(format!("unknown factor subset `{other}`")),
        }
    }
}
