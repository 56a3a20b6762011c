//! Firm-month panel construction.
//!
//! Accounting records are linked to market identifiers through dated link
//! records, and each fiscal year becomes investable from the first month
//! strictly after `fiscal_year_end + 6 calendar months` until the month before
//! the next fiscal year's window opens (or the firm's last observation).

mod load;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use load::{
    load_accounting, load_controls, load_factors, load_inputs, load_links, load_market,
    load_sectors, ControlTable, Diagnostic, InputPaths, RawInputs,
};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvOut};
use crate::month::{add_calendar_months, Month};

/// Reporting lag between fiscal year-end and public availability.
pub const AVAILABILITY_LAG_MONTHS: u32 = 6;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FirmId(pub String);

impl FirmId {
    pub fn new(s: impl Into<String>) -> Self {
        FirmId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FirmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One firm-year of fundamentals. `None` marks a missing (not zero-coded) item.
#[derive(Debug, Clone, PartialEq)]
pub struct AccountingRecord {
    pub firm_id: FirmId,
    pub fiscal_year_end: NaiveDate,
    pub long_term_debt: Option<f64>,
    pub current_debt: Option<f64>,
    pub cash_equivalents: Option<f64>,
    pub other_investments: Option<f64>,
    pub short_term_investments: Option<f64>,
    pub receivables: Option<f64>,
    pub impure_income: Option<f64>,
    pub sales: Option<f64>,
    pub total_assets: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketObservation {
    pub firm_id: FirmId,
    pub month: Month,
    pub price: Option<f64>,
    pub total_return: Option<f64>,
    pub delisting_return: Option<f64>,
    pub shares_outstanding: f64,
    /// `|price| * shares_outstanding`, zero when the price is missing.
    pub market_equity: f64,
    pub sector_code: String,
    pub q_nonpermissible: f64,
    pub share_code: i32,
    pub exchange_code: i32,
}

impl MarketObservation {
    pub fn market_equity_of(price: Option<f64>, shares: f64) -> f64 {
        price.map(|p| p.abs() * shares).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkRecord {
    pub accounting_firm_id: FirmId,
    pub market_firm_id: FirmId,
    pub link_start: NaiveDate,
    pub link_end: Option<NaiveDate>,
    pub link_type: String,
    pub link_primacy: String,
}

impl LinkRecord {
    pub fn covers(&self, date: NaiveDate) -> bool {
        self.link_start <= date && self.link_end.is_none_or(|end| date <= end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    pub link_types: Vec<String>,
    pub link_primacy: Vec<String>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            link_types: ["LU", "LC", "LS", "LD", "LN", "LX"]
                .map(String::from)
                .to_vec(),
            link_primacy: ["P", "C"].map(String::from).to_vec(),
        }
    }
}

impl LinkConfig {
    fn accepts(&self, link: &LinkRecord) -> bool {
        self.link_types.iter().any(|t| t == &link.link_type)
            && self.link_primacy.iter().any(|p| p == &link.link_primacy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EligibilityConfig {
    pub share_codes: Vec<i32>,
    pub exchange_codes: Vec<i32>,
    /// Optional liquidity filter on `|price|`; off by default.
    pub min_price: Option<f64>,
}

impl Default for EligibilityConfig {
    fn default() -> Self {
        EligibilityConfig {
            share_codes: vec![10, 11],
            exchange_codes: vec![1, 2, 3],
            min_price: None,
        }
    }
}

/// Retained and dropped counts of one filter step, by reason.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub input: usize,
    pub retained: usize,
    pub dropped: BTreeMap<&'static str, usize>,
}

impl FilterReport {
    fn drop(&mut self, reason: &'static str) {
        *self.dropped.entry(reason).or_default() += 1;
    }

    pub fn dropped_total(&self) -> usize {
        self.dropped.values().sum()
    }
}

/// Keep common shares on the major exchanges with a positive price, positive
/// market equity and at least one of the regular or delisting returns.
pub fn apply_eligibility(
    rows: Vec<MarketObservation>,
    cfg: &EligibilityConfig,
) -> (Vec<MarketObservation>, FilterReport) {
    let mut report = FilterReport {
        input: rows.len(),
        ..Default::default()
    };
    let kept: Vec<_> = rows
        .into_iter()
        .filter(|r| {
            let reason = if !cfg.share_codes.contains(&r.share_code) {
                Some("share_code")
            } else if !cfg.exchange_codes.contains(&r.exchange_code) {
                Some("exchange_code")
            } else if !r.price.is_some_and(|p| p.abs() > 0.0 && p.is_finite()) {
                Some("price")
            } else if !(r.market_equity > 0.0 && r.market_equity.is_finite()) {
                Some("market_equity")
            } else if r.total_return.is_none() && r.delisting_return.is_none() {
                Some("return")
            } else if cfg
                .min_price
                .is_some_and(|min| r.price.is_some_and(|p| p.abs() < min))
            {
                Some("min_price")
            } else {
                None
            };
            match reason {
                Some(reason) => {
                    report.drop(reason);
                    false
                }
                None => true,
            }
        })
        .collect();
    report.retained = kept.len();
    (kept, report)
}

/// `fiscal_year_end` plus six calendar months.
pub fn availability_date(fiscal_year_end: NaiveDate) -> NaiveDate {
    add_calendar_months(fiscal_year_end, AVAILABILITY_LAG_MONTHS)
}

/// Inclusive month interval during which one fiscal year is investable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AvailabilityWindow {
    pub start: Month,
    pub end: Option<Month>,
}

impl AvailabilityWindow {
    pub fn contains(&self, month: Month) -> bool {
        self.start <= month && self.end.is_none_or(|e| month <= e)
    }
}

fn window_start(fiscal_year_end: NaiveDate) -> Month {
    Month::of_date(availability_date(fiscal_year_end)).succ()
}

pub fn availability_window(
    record: &AccountingRecord,
    next_fiscal_year_end: Option<NaiveDate>,
) -> Result<AvailabilityWindow> {
    let start = window_start(record.fiscal_year_end);
    let end = match next_fiscal_year_end {
        None => None,
        Some(next) => {
            let next_start = window_start(next);
            if next_start <= start {
                return Err(Error::OverlappingWindows {
                    firm: record.firm_id.to_string(),
                    fye: next,
                    start: next_start,
                    prev_start: start,
                });
            }
            Some(next_start.pred())
        }
    };
    Ok(AvailabilityWindow { start, end })
}

/// Delisting-month total return: `(1 + ret)(1 + dlret) - 1` when both are
/// present, otherwise whichever is present.
pub fn combine_delisting(ret: Option<f64>, dlret: Option<f64>) -> Option<f64> {
    match (ret, dlret) {
        (Some(r), Some(d)) => Some((1.0 + r) * (1.0 + d) - 1.0),
        (Some(r), None) => Some(r),
        (None, Some(d)) => Some(d),
        (None, None) => None,
    }
}

/// An accounting record attached to a market identifier with its window.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkedAccounting {
    pub record: AccountingRecord,
    pub market_firm_id: FirmId,
    pub window: AvailabilityWindow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub firm_id: FirmId,
    pub month: Month,
    /// Index into [`FirmMonthPanel::accounting`]; `None` flags "no accounting".
    pub accounting: Option<usize>,
    pub market: MarketObservation,
    /// Total return including any delisting return.
    pub total_return: f64,
    pub delisted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignReport {
    pub accounting_input: usize,
    pub accounting_linked: usize,
    pub accounting_unlinked: usize,
    pub market_input: usize,
    pub market_retained: usize,
    pub market_dropped_no_return: usize,
    pub rows_without_accounting: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FirmMonthPanel {
    pub accounting: Vec<LinkedAccounting>,
    /// Sorted by `(firm_id, month)`.
    pub rows: Vec<PanelRow>,
    pub report: AlignReport,
}

impl FirmMonthPanel {
    /// Rows whose attached accounting was not yet public at the month start.
    pub fn lookahead_violations(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| {
                r.accounting.is_some_and(|i| {
                    availability_date(self.accounting[i].record.fiscal_year_end)
                        >= r.month.first_day()
                })
            })
            .count()
    }

    pub fn write_csv(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        let mut w = CsvOut::create(path, comment)?;
        w.row([
            "firm_id",
            "month",
            "fye",
            "window_start",
            "window_end",
            "total_return",
            "me",
            "sector_code",
            "q",
            "delisted",
        ])?;
        for r in &self.rows {
            let acc = r.accounting.map(|i| &self.accounting[i]);
            w.row([
                r.firm_id.to_string(),
                r.month.to_string(),
                acc.map(|a| a.record.fiscal_year_end.to_string())
                    .unwrap_or_default(),
                acc.map(|a| a.window.start.to_string()).unwrap_or_default(),
                acc.and_then(|a| a.window.end.map(|e| e.to_string()))
                    .unwrap_or_default(),
                fmt_f64(r.total_return),
                fmt_f64(r.market.market_equity),
                r.market.sector_code.clone(),
                fmt_f64(r.market.q_nonpermissible),
                u8::from(r.delisted).to_string(),
            ])?;
        }
        w.finish()
    }
}

fn validate_links<'a>(links: &'a [LinkRecord], cfg: &LinkConfig) -> Result<Vec<&'a LinkRecord>> {
    for l in links {
        if let Some(end) = l.link_end {
            if end < l.link_start {
                return Err(Error::LinkInterval {
                    firm: l.market_firm_id.to_string(),
                    message: format!("link ends {end} before it starts {}", l.link_start),
                });
            }
        }
    }
    let accepted: Vec<&LinkRecord> = links.iter().filter(|l| cfg.accepts(l)).collect();

    let mut by_market: BTreeMap<&FirmId, Vec<&LinkRecord>> = BTreeMap::new();
    for l in &accepted {
        by_market.entry(&l.market_firm_id).or_default().push(l);
    }
    for (firm, mut ls) in by_market {
        ls.sort_by_key(|l| l.link_start);
        for pair in ls.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.link_end.is_none_or(|end| b.link_start <= end) {
                return Err(Error::LinkInterval {
                    firm: firm.to_string(),
                    message: format!(
                        "overlapping links starting {} and {}",
                        a.link_start, b.link_start
                    ),
                });
            }
        }
    }
    Ok(accepted)
}

/// Link accounting to market identifiers and attach to each eligible
/// firm-month the fiscal year whose availability window covers it.
pub fn link_and_align(
    accounting: Vec<AccountingRecord>,
    market: Vec<MarketObservation>,
    links: &[LinkRecord],
    cfg: &LinkConfig,
) -> Result<FirmMonthPanel> {
    let mut report = AlignReport {
        accounting_input: accounting.len(),
        market_input: market.len(),
        ..Default::default()
    };

    let accepted = validate_links(links, cfg)?;
    let mut by_accounting: HashMap<&FirmId, Vec<&LinkRecord>> = HashMap::new();
    for l in accepted {
        by_accounting.entry(&l.accounting_firm_id).or_default().push(l);
    }

    let mut per_firm: BTreeMap<FirmId, Vec<AccountingRecord>> = BTreeMap::new();
    for rec in accounting {
        let mut targets: Vec<&FirmId> = by_accounting
            .get(&rec.firm_id)
            .map(|ls| {
                ls.iter()
                    .filter(|l| l.covers(rec.fiscal_year_end))
                    .map(|l| &l.market_firm_id)
                    .collect()
            })
            .unwrap_or_default();
        targets.sort();
        targets.dedup();
        match targets.as_slice() {
            [] => report.accounting_unlinked += 1,
            [target] => {
                report.accounting_linked += 1;
                per_firm.entry((*target).clone()).or_default().push(rec);
            }
            many => {
                return Err(Error::DuplicateMatch {
                    firm: rec.firm_id.to_string(),
                    message: format!(
                        "fiscal year ending {} links to {} market identifiers",
                        rec.fiscal_year_end,
                        many.len()
                    ),
                })
            }
        }
    }

    let mut linked: Vec<LinkedAccounting> = Vec::with_capacity(report.accounting_linked);
    let mut firm_ranges: HashMap<FirmId, (usize, usize)> = HashMap::new();
    for (market_id, mut recs) in per_firm {
        recs.sort_by_key(|r| r.fiscal_year_end);
        for pair in recs.windows(2) {
            if pair[0].fiscal_year_end == pair[1].fiscal_year_end {
                return Err(Error::DuplicateMatch {
                    firm: market_id.to_string(),
                    message: format!(
                        "two accounting records with fiscal year ending {}",
                        pair[0].fiscal_year_end
                    ),
                });
            }
        }
        let begin = linked.len();
        for (i, rec) in recs.iter().enumerate() {
            let next = recs.get(i + 1).map(|n| n.fiscal_year_end);
            let window = availability_window(rec, next)?;
            linked.push(LinkedAccounting {
                record: rec.clone(),
                market_firm_id: market_id.clone(),
                window,
            });
        }
        firm_ranges.insert(market_id, (begin, linked.len()));
    }

    let mut market = market;
    market.sort_by(|a, b| a.firm_id.cmp(&b.firm_id).then(a.month.cmp(&b.month)));

    let mut rows = Vec::with_capacity(market.len());
    for obs in market {
        let Some(total_return) = combine_delisting(obs.total_return, obs.delisting_return) else {
            report.market_dropped_no_return += 1;
            continue;
        };
        let accounting = firm_ranges
            .get(&obs.firm_id)
            .and_then(|&(b, e)| (b..e).find(|&i| linked[i].window.contains(obs.month)));
        if accounting.is_none() {
            report.rows_without_accounting += 1;
        }
        rows.push(PanelRow {
            firm_id: obs.firm_id.clone(),
            month: obs.month,
            accounting,
            delisted: obs.delisting_return.is_some(),
            total_return,
            market: obs,
        });
    }
    report.market_retained = rows.len();

    Ok(FirmMonthPanel {
        accounting: linked,
        rows,
        report,
    })
}
