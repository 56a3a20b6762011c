//! Piecewise ratio scores, the sectoral factor and the CSCI.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_opt, CsvOut};
use crate::month::Month;
use crate::panel::FirmId;
use crate::ratios::RatioVector;
use crate::sector::SectorExposure;

pub const DIMENSIONS: [&str; 4] = ["debt", "cash", "rec", "impure"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionConfig {
    pub comfort: f64,
    pub outer: f64,
    #[serde(default = "default_curvature")]
    pub gamma: f64,
    #[serde(default = "equal_weight")]
    pub weight: f64,
}

fn default_curvature() -> f64 {
    2.0
}

fn equal_weight() -> f64 {
    0.25
}

impl DimensionConfig {
    pub fn new(comfort: f64, outer: f64) -> Self {
        DimensionConfig {
            comfort,
            outer,
            gamma: 2.0,
            weight: 0.25,
        }
    }

    pub fn score(&self, r: Option<f64>) -> Option<f64> {
        r.map(|r| ratio_score(r, self.comfort, self.outer, self.gamma))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorConfig {
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "default_curvature")]
    pub delta: f64,
}

impl Default for SectorConfig {
    fn default() -> Self {
        SectorConfig {
            lower: 0.05,
            upper: 0.20,
            delta: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub debt: DimensionConfig,
    pub cash: DimensionConfig,
    pub rec: DimensionConfig,
    pub impure: DimensionConfig,
    pub sector: SectorConfig,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            debt: DimensionConfig::new(0.30, 1.0 / 3.0),
            cash: DimensionConfig::new(0.30, 1.0 / 3.0),
            rec: DimensionConfig::new(0.33, 0.50),
            impure: DimensionConfig::new(0.025, 0.05),
            sector: SectorConfig::default(),
        }
    }
}

impl ScoreConfig {
    pub fn dimensions(&self) -> [(&'static str, &DimensionConfig); 4] {
        [
            ("debt", &self.debt),
            ("cash", &self.cash),
            ("rec", &self.rec),
            ("impure", &self.impure),
        ]
    }

    pub fn weights(&self) -> [f64; 4] {
        [
            self.debt.weight,
            self.cash.weight,
            self.rec.weight,
            self.impure.weight,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, d) in self.dimensions() {
            if !(d.comfort >= 0.0 && d.comfort < d.outer && d.outer.is_finite()) {
                return Err(Error::config(
                    format!("{name}.comfort"),
                    format!("need 0 <= comfort < outer, got {} and {}", d.comfort, d.outer),
                ));
            }
            if !(d.gamma >= 1.0 && d.gamma.is_finite()) {
                return Err(Error::config(format!("{name}.gamma"), "must be >= 1"));
            }
            if !(d.weight >= 0.0 && d.weight.is_finite()) {
                return Err(Error::config(format!("{name}.weight"), "must be non-negative"));
            }
        }
        let total: f64 = self.weights().iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config("weight", format!("weights sum to {total}, expected 1")));
        }
        let s = &self.sector;
        if !(s.lower >= 0.0 && s.lower < s.upper && s.upper <= 1.0) {
            return Err(Error::config(
                "sector.lower",
                format!("need 0 <= lower < upper <= 1, got {} and {}", s.lower, s.upper),
            ));
        }
        if !(s.delta >= 1.0 && s.delta.is_finite()) {
            return Err(Error::config("sector.delta", "must be >= 1"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScoreConfig =
            toml::from_str(text).map_err(|e| Error::config("score", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }
}

/// `1` at or below `comfort`, `0` at or above `outer`, a power ramp between.
pub fn ratio_score(r: f64, comfort: f64, outer: f64, gamma: f64) -> f64 {
    if r <= comfort {
        1.0
    } else if r >= outer {
        0.0
    } else {
        ((outer - r) / (outer - comfort)).powf(gamma)
    }
}

pub fn sector_factor(q: f64, lower: f64, upper: f64, delta: f64, hard_prohibited: bool) -> f64 {
    if hard_prohibited {
        return 0.0;
    }
    ratio_score(q, lower, upper, delta)
}

/// Weighted geometric mean over the non-missing scores, weights renormalized.
pub fn financial_score(scores: &[Option<f64>], weights: &[f64]) -> Option<f64> {
    debug_assert_eq!(scores.len(), weights.len());
    let present: Vec<(f64, f64)> = scores
        .iter()
        .zip(weights)
        .filter_map(|(s, &w)| s.map(|s| (s, w)))
        .collect();
    if present.is_empty() {
        return None;
    }
    let (lo, hi) = present
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(s, _)| {
            (lo.min(s), hi.max(s))
        });
    if lo == 0.0 {
        return Some(0.0);
    }
    let total: f64 = present.iter().map(|&(_, w)| w).sum();
    if total <= 0.0 {
        return None;
    }
    let log_mean: f64 = present.iter().map(|&(s, w)| w / total * s.ln()).sum();
    Some(log_mean.exp().clamp(lo, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsciRecord {
    pub firm_id: FirmId,
    pub month: Month,
    pub c_debt: Option<f64>,
    pub c_cash: Option<f64>,
    pub c_rec: Option<f64>,
    pub c_impure: Option<f64>,
    pub b_sector: f64,
    pub f_financial: Option<f64>,
    pub csci: Option<f64>,
}

impl CsciRecord {
    pub fn scores(&self) -> [Option<f64>; 4] {
        [self.c_debt, self.c_cash, self.c_rec, self.c_impure]
    }
}

/// Score one firm-month from its ratio vector (if any) and sector exposure.
pub fn compute_csci(
    firm_id: &FirmId,
    month: Month,
    ratios: Option<&RatioVector>,
    exposure: &SectorExposure,
    cfg: &ScoreConfig,
) -> CsciRecord {
    let s = &cfg.sector;
    let b = sector_factor(exposure.q, s.lower, s.upper, s.delta, exposure.hard_prohibited);
    let valid = ratios.filter(|v| v.valid);
    let c_debt = cfg.debt.score(valid.and_then(|v| v.lev));
    let c_cash = cfg.cash.score(valid.and_then(|v| v.cashr));
    let c_rec = cfg.rec.score(valid.and_then(|v| v.rec));
    let c_impure = cfg.impure.score(valid.and_then(|v| v.impure));
    let f = financial_score(&[c_debt, c_cash, c_rec, c_impure], &cfg.weights());
    let csci = if b == 0.0 { Some(0.0) } else { f.map(|f| b * f) };
    CsciRecord {
        firm_id: firm_id.clone(),
        month,
        c_debt,
        c_cash,
        c_rec,
        c_impure,
        b_sector: b,
        f_financial: f,
        csci,
    }
}

pub fn write_csci_csv(records: &[CsciRecord], path: &Path, comment: Option<&str>) -> Result<()> {
    let mut w = CsvOut::create(path, comment)?;
    w.row([
        "firm_id", "month", "c_debt", "c_cash", "c_rec", "c_impure", "b_sector", "f_financial",
        "csci",
    ])?;
    for r in records {
        w.row([
            r.firm_id.to_string(),
            r.month.to_string(),
            fmt_opt(r.c_debt),
            fmt_opt(r.c_cash),
            fmt_opt(r.c_rec),
            fmt_opt(r.c_impure),
            fmt_opt(Some(r.b_sector)),
            fmt_opt(r.f_financial),
            fmt_opt(r.csci),
        ])?;
    }
    w.finish()
}
