//! Firm-year screening ratios.
//!
//! | ratio  | numerator               | denominator        |
//! |--------|-------------------------|--------------------|
//! | lev    | DLTT + DLC              | ME at FYE or AT    |
//! | cashr  | CHE + IVAO + IVST       | ME at FYE or AT    |
//! | rec    | RECT                    | ME at FYE or AT    |
//! | impure | impure income           | SALE               |
//!
//! Ratios are clipped to `[0, cap]` and then winsorized within each fiscal
//! year at the 1st and 99th percentiles.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{fmt_opt, CsvOut};
use crate::month::Month;
use crate::panel::{AccountingRecord, FirmId};
use crate::stats::percentile_sorted;

pub const DEFAULT_CAP: f64 = 2.0;

/// How far back the fiscal-year-end market equity may be taken from.
pub const ME_LOOKBACK_MONTHS: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorStyle {
    #[default]
    MarketCap,
    TotalAssets,
}

impl DenominatorStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            DenominatorStyle::MarketCap => "market_cap",
            DenominatorStyle::TotalAssets => "total_assets",
        }
    }
}

impl fmt::Display for DenominatorStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DenominatorStyle {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "market_cap" => Ok(DenominatorStyle::MarketCap),
            "total_assets" => Ok(DenominatorStyle::TotalAssets),
            other => Err(format!("unknown denominator style `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RatioConfig {
    pub style: DenominatorStyle,
    pub cap: f64,
    pub winsor_lower: f64,
    pub winsor_upper: f64,
}

impl Default for RatioConfig {
    fn default() -> Self {
        RatioConfig {
            style: DenominatorStyle::MarketCap,
            cap: DEFAULT_CAP,
            winsor_lower: 0.01,
            winsor_upper: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioVector {
    pub firm_id: FirmId,
    pub fiscal_year_end: NaiveDate,
    pub lev: Option<f64>,
    pub cashr: Option<f64>,
    pub rec: Option<f64>,
    pub impure: Option<f64>,
    pub style: DenominatorStyle,
    pub me_at_fye: Option<f64>,
    pub valid: bool,
    pub reason: Option<String>,
}

impl RatioVector {
    fn values_mut(&mut self) -> [&mut Option<f64>; 4] {
        [
            &mut self.lev,
            &mut self.cashr,
            &mut self.rec,
            &mut self.impure,
        ]
    }
}

/// Impure-income share of sales. Non-positive sales map to the cap when
/// impure income is positive, to zero otherwise.
pub fn impure_ratio(impure_income: Option<f64>, sale: Option<f64>, cap: f64) -> Option<f64> {
    let (imp, sale) = (impure_income?, sale?);
    Some(if sale > 0.0 {
        (imp.max(0.0) / sale).min(cap)
    } else if imp > 0.0 {
        cap
    } else {
        0.0
    })
}

fn sum(parts: &[Option<f64>]) -> Option<f64> {
    parts.iter().copied().sum::<Option<f64>>()
}

/// Raw (uncapped) balance-sheet ratios; impure income is capped by
/// [`impure_ratio`] itself.
pub fn compute_ratios(
    record: &AccountingRecord,
    me_at_fye: Option<f64>,
    style: DenominatorStyle,
    cap: f64,
) -> RatioVector {
    let mut v = RatioVector {
        firm_id: record.firm_id.clone(),
        fiscal_year_end: record.fiscal_year_end,
        lev: None,
        cashr: None,
        rec: None,
        impure: None,
        style,
        me_at_fye,
        valid: true,
        reason: None,
    };
    let denom = match style {
        DenominatorStyle::MarketCap => match me_at_fye {
            None => Err("missing market equity at fiscal year end"),
            Some(me) if me > 0.0 => Ok(me),
            Some(_) => Err("non-positive market equity at fiscal year end"),
        },
        DenominatorStyle::TotalAssets => match record.total_assets {
            None => Err("missing total assets"),
            Some(at) if at > 0.0 => Ok(at),
            Some(_) => Err("non-positive total assets"),
        },
    };
    let denom = match denom {
        Ok(d) => d,
        Err(reason) => {
            v.valid = false;
            v.reason = Some(reason.to_string());
            return v;
        }
    };
    let ratio = |num: Option<f64>| num.map(|n| n.max(0.0) / denom);
    v.lev = ratio(sum(&[record.long_term_debt, record.current_debt]));
    v.cashr = ratio(sum(&[
        record.cash_equivalents,
        record.other_investments,
        record.short_term_investments,
    ]));
    v.rec = ratio(record.receivables);
    v.impure = impure_ratio(record.impure_income, record.sales, cap);
    v
}

/// Market equity of the month containing `fye`, else the nearest prior month
/// within [`ME_LOOKBACK_MONTHS`]. `series` must be sorted by month.
pub fn me_at_fye(series: &[(Month, f64)], fye: NaiveDate) -> Option<f64> {
    let target = Month::of_date(fye);
    let idx = series.partition_point(|(m, _)| *m <= target);
    let (m, me) = *series[..idx].last()?;
    (target.since(m) <= ME_LOOKBACK_MONTHS).then_some(me)
}

fn winsorize_in_place(values: &mut [&mut f64], lower: f64, upper: f64) {
    if values.len() < 2 {
        return;
    }
    let mut sorted: Vec<f64> = values.iter().map(|v| **v).collect();
    sorted.sort_by(f64::total_cmp);
    let lo = percentile_sorted(&sorted, lower).expect("non-empty");
    let hi = percentile_sorted(&sorted, upper).expect("non-empty");
    for v in values.iter_mut() {
        **v = v.clamp(lo, hi);
    }
}

/// Clip every ratio to `[0, cap]`, then winsorize each ratio within its
/// fiscal-year cross-section.
pub fn cap_and_winsorize(vectors: &mut [RatioVector], cfg: &RatioConfig) {
    for v in vectors.iter_mut() {
        for r in v.values_mut().into_iter().flatten() {
            *r = r.clamp(0.0, cfg.cap);
        }
    }
    let mut groups: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, v) in vectors.iter().enumerate() {
        groups.entry(v.fiscal_year_end.year()).or_default().push(i);
    }
    for idx in groups.values() {
        for dim in 0..4 {
            let mut vals: Vec<&mut f64> = Vec::with_capacity(idx.len());
            // Disjoint mutable borrows of one field per selected vector.
            let mut rest: &mut [RatioVector] = vectors;
            let mut offset = 0;
            for &i in idx {
                let (_, tail) = rest.split_at_mut(i - offset);
                let (head, tail) = tail.split_first_mut().expect("index in range");
                if let Some(x) = head.values_mut()[dim].as_mut() {
                    vals.push(x);
                }
                rest = tail;
                offset = i + 1;
            }
            winsorize_in_place(&mut vals, cfg.winsor_lower, cfg.winsor_upper);
        }
    }
}

pub fn write_ratios_csv(vectors: &[RatioVector], path: &Path, comment: Option<&str>) -> Result<()> {
    let mut w = CsvOut::create(path, comment)?;
    w.row([
        "firm_id", "fye", "lev", "cashr", "rec", "impure", "style", "valid_flag", "reason",
    ])?;
    for v in vectors {
        w.row([
            v.firm_id.to_string(),
            v.fiscal_year_end.to_string(),
            fmt_opt(v.lev),
            fmt_opt(v.cashr),
            fmt_opt(v.rec),
            fmt_opt(v.impure),
            v.style.to_string(),
            u8::from(v.valid).to_string(),
            v.reason.clone().unwrap_or_default(),
        ])?;
    }
    w.finish()
}
