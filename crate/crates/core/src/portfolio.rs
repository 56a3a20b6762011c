//! Monthly rebalanced long-only portfolios.
//!
//! Weights are formed from the end-of-month `t-1` cross-section and held
//! through month `t`. Turnover is measured against the drifted weights of the
//! previous holding period, and costs are linear in one-way turnover.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvOut};
use crate::month::Month;
use crate::panel::FirmId;
use crate::pipeline::ScoredPanel;

pub const DEFAULT_COST_RATE: f64 = 0.0025;

pub type Weights = BTreeMap<FirmId, f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PortfolioKind {
    Market,
    BinaryIslamic,
    Threshold(f64),
    Tilt(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSpec {
    pub kind: PortfolioKind,
    pub cost_rate: f64,
}

impl PortfolioSpec {
    pub fn new(kind: PortfolioKind) -> Self {
        PortfolioSpec {
            kind,
            cost_rate: DEFAULT_COST_RATE,
        }
    }

    pub fn with_cost(mut self, cost_rate: f64) -> Self {
        self.cost_rate = cost_rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PortfolioKind::Threshold(t) if !(t > 0.0 && t <= 1.0) => {
                return Err(Error::config("portfolio.threshold", format!("tau {t} outside (0, 1]")))
            }
            PortfolioKind::Tilt(k) if !(k >= 0.0 && k.is_finite()) => {
                return Err(Error::config("portfolio.tilt", format!("exponent {k} must be >= 0")))
            }
            _ => {}
        }
        if !(self.cost_rate >= 0.0 && self.cost_rate.is_finite()) {
            return Err(Error::config("portfolio.cost_rate", "must be >= 0"));
        }
        Ok(())
    }

    /// File-name friendly label, e.g. `threshold_0.7`.
    pub fn label(&self) -> String {
        match self.kind {
            PortfolioKind::Market => "market".into(),
            PortfolioKind::BinaryIslamic => "binary_islamic".into(),
            PortfolioKind::Threshold(t) => format!("threshold_{}", fmt_f64(t)),
            PortfolioKind::Tilt(k) => format!("tilt_{}", fmt_f64(k)),
        }
    }
}

impl fmt::Display for PortfolioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Parses `market`, `binary_islamic`, `threshold:<tau>` and `tilt:<exponent>`.
impl FromStr for PortfolioSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.and_then(|a| a.trim().parse().ok())
                .ok_or_else(|| Error::config("portfolio", format!("`{s}` needs a numeric argument")))
        };
        let kind = match head {
            "market" => PortfolioKind::Market,
            "binary" | "binary_islamic" => PortfolioKind::BinaryIslamic,
            "threshold" => PortfolioKind::Threshold(num(arg)?),
            "tilt" => PortfolioKind::Tilt(num(arg)?),
            _ => return Err(Error::config("portfolio", format!("unknown portfolio spec `{s}`"))),
        };
        let spec = PortfolioSpec::new(kind);
        spec.validate()?;
        Ok(spec)
    }
}

/// Row indices of the formation-month cross-section admitted by `spec`.
///
/// `binary` is the benchmark pass indicator aligned with `panel.rows`; it is
/// required only for [`PortfolioKind::BinaryIslamic`].
pub fn build_universe(
    spec: &PortfolioSpec,
    panel: &ScoredPanel,
    binary: Option<&[bool]>,
    formation: Month,
) -> Result<Vec<usize>> {
    let members: Vec<usize> = panel
        .month_rows(formation)
        .iter()
        .copied()
        .filter(|&i| {
            let r = &panel.rows[i];
            let Some(c) = r.csci() else { return false };
            if r.delisted || r.market_equity <= 0.0 {
                return false;
            }
            match spec.kind {
                PortfolioKind::Market => true,
                PortfolioKind::BinaryIslamic => binary.is_some_and(|b| b[i]),
                PortfolioKind::Threshold(tau) => c >= tau,
                PortfolioKind::Tilt(_) => c > 0.0,
            }
        })
        .collect();
    if members.is_empty() {
        return Err(Error::EmptyUniverse {
            spec: spec.label(),
            month: formation,
        });
    }
    Ok(members)
}

pub fn target_weights(
    spec: &PortfolioSpec,
    panel: &ScoredPanel,
    members: &[usize],
    formation: Month,
) -> Result<Weights> {
    let raw: Vec<(FirmId, f64)> = members
        .iter()
        .map(|&i| {
            let r = &panel.rows[i];
            let w = match spec.kind {
                PortfolioKind::Tilt(k) => r.csci().unwrap_or(0.0).powf(k) * r.market_equity,
                _ => r.market_equity,
            };
            (r.firm_id.clone(), w)
        })
        .collect();
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::ZeroTiltWeights {
            spec: spec.label(),
            month: formation,
        });
    }
    Ok(raw.into_iter().map(|(f, w)| (f, w / total)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub gross: f64,
    pub net: f64,
    pub turnover: f64,
    pub drifted: Weights,
}

/// Rebalance from `drifted_prev` to `target`, then hold through one month.
pub fn step_month(
    drifted_prev: &Weights,
    target: &Weights,
    returns: &BTreeMap<FirmId, f64>,
    cost_rate: f64,
) -> StepOutcome {
    let mut diff = 0.0;
    for (f, w) in target {
        diff += (w - drifted_prev.get(f).copied().unwrap_or(0.0)).abs();
    }
    for (f, w) in drifted_prev {
        if !target.contains_key(f) {
            diff += w.abs();
        }
    }
    let turnover = 0.5 * diff;

    let mut gross = 0.0;
    let mut grown = Vec::with_capacity(target.len());
    for (f, w) in target {
        let r = returns.get(f).copied().unwrap_or(0.0);
        gross += w * r;
        grown.push((f.clone(), w * (1.0 + r)));
    }
    let total: f64 = grown.iter().map(|(_, g)| g).sum();
    let drifted = if total > 0.0 {
        grown.into_iter().map(|(f, g)| (f, g / total)).collect()
    } else {
        Weights::new()
    };
    StepOutcome {
        gross,
        net: gross - cost_rate * turnover,
        turnover,
        drifted,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Characteristics {
    pub n_stocks: usize,
    pub effective_n: f64,
    pub w_debt: Option<f64>,
    pub w_cash: Option<f64>,
    pub w_rec: Option<f64>,
    pub w_csci: Option<f64>,
}

/// Inverse Herfindahl index of a weight vector.
pub fn effective_n(weights: impl IntoIterator<Item = f64>) -> f64 {
    let hhi: f64 = weights.into_iter().map(|w| w * w).sum();
    1.0 / hhi
}

fn weighted_mean(pairs: impl Iterator<Item = (f64, Option<f64>)>) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (w, x) in pairs {
        if let Some(x) = x {
            num += w * x;
            den += w;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Portfolio-weighted characteristics of the formation-month cross-section.
/// Averages skip members with a missing value and renormalize.
pub fn characteristics(weights: &Weights, panel: &ScoredPanel, formation: Month) -> Characteristics {
    let rows: Vec<(f64, &crate::pipeline::ScoredRow)> = weights
        .iter()
        .filter_map(|(f, &w)| panel.find(f, formation).map(|r| (w, r)))
        .collect();
    let ratio = |pick: fn(&crate::ratios::RatioVector) -> Option<f64>| {
        weighted_mean(
            rows.iter()
                .map(|&(w, r)| (w, panel.ratios_of(r).filter(|v| v.valid).and_then(pick))),
        )
    };
    Characteristics {
        n_stocks: weights.len(),
        effective_n: effective_n(weights.values().copied()),
        w_debt: ratio(|v| v.lev),
        w_cash: ratio(|v| v.cashr),
        w_rec: ratio(|v| v.rec),
        w_csci: weighted_mean(rows.iter().map(|&(w, r)| (w, r.csci()))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub label: String,
    pub cost_rate: f64,
    /// Holding months.
    pub months: Vec<Month>,
    pub gross: Vec<f64>,
    pub net: Vec<f64>,
    pub turnover: Vec<f64>,
    /// Target weights chosen at the end of the previous month.
    pub weights: Vec<Weights>,
    pub characteristics: Vec<Characteristics>,
    /// Held firm-months without a return row, booked at zero return.
    pub missing_returns: usize,
}

impl BacktestResult {
    /// Time-series mean of the weighted average csci.
    pub fn avg_csci(&self) -> Option<f64> {
        let v: Vec<f64> = self.characteristics.iter().filter_map(|c| c.w_csci).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn write_csv(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        let mut w = CsvOut::create(path, comment)?;
        w.row([
            "month",
            "gross",
            "net",
            "turnover",
            "n_stocks",
            "effective_n",
            "w_debt",
            "w_cash",
            "w_rec",
            "w_csci",
        ])?;
        for (i, m) in self.months.iter().enumerate() {
            let c = &self.characteristics[i];
            let opt = crate::io::fmt_opt;
            w.row([
                m.to_string(),
                fmt_f64(self.gross[i]),
                fmt_f64(self.net[i]),
                fmt_f64(self.turnover[i]),
                c.n_stocks.to_string(),
                fmt_f64(c.effective_n),
                opt(c.w_debt),
                opt(c.w_cash),
                opt(c.w_rec),
                opt(c.w_csci),
            ])?;
        }
        w.finish()
    }

    pub fn write_weights_csv(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        let mut w = CsvOut::create(path, comment)?;
        w.row(["month", "firm_id", "weight"])?;
        for (m, ws) in self.months.iter().zip(&self.weights) {
            for (f, x) in ws {
                w.row([m.to_string(), f.to_string(), fmt_f64(*x)])?;
            }
        }
        w.finish()
    }
}

/// First holding month whose formation month has any firm with a financial score.
pub fn default_start(panel: &ScoredPanel) -> Option<Month> {
    panel
        .months()
        .find(|&m| {
            panel
                .month_rows(m)
                .iter()
                .any(|&i| panel.rows[i].record.f_financial.is_some())
        })
        .map(Month::succ)
}

/// Backtest over the inclusive holding-month range `[start, end]`.
pub fn run_backtest(
    spec: &PortfolioSpec,
    panel: &ScoredPanel,
    binary: Option<&[bool]>,
    start: Month,
    end: Month,
) -> Result<BacktestResult> {
    spec.validate()?;
    if end < start {
        return Err(Error::DateRange(format!("end {end} precedes start {start}")));
    }
    if matches!(spec.kind, PortfolioKind::BinaryIslamic) && binary.is_none() {
        return Err(Error::config("portfolio", "binary benchmark indicator not supplied"));
    }
    let n = (end.since(start) + 1) as usize;
    let mut out = BacktestResult {
        label: spec.label(),
        cost_rate: spec.cost_rate,
        months: Vec::with_capacity(n),
        gross: Vec::with_capacity(n),
        net: Vec::with_capacity(n),
        turnover: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        characteristics: Vec::with_capacity(n),
        missing_returns: 0,
    };
    let mut drifted = Weights::new();
    for month in start.through(end) {
        let formation = month.pred();
        let members = build_universe(spec, panel, binary, formation)?;
        let target = target_weights(spec, panel, &members, formation)?;
        let mut returns = BTreeMap::new();
        for f in target.keys() {
            match panel.find(f, month) {
                Some(r) if !r.total_return.is_finite() => {
                    return Err(Error::NonFiniteReturn {
                        firm: f.to_string(),
                        month,
                    })
                }
                Some(r) => {
                    returns.insert(f.clone(), r.total_return);
                }
                None => out.missing_returns += 1,
            }
        }
        let step = step_month(&drifted, &target, &returns, spec.cost_rate);
        out.characteristics.push(characteristics(&target, panel, formation));
        out.months.push(month);
        out.gross.push(step.gross);
        out.net.push(step.net);
        out.turnover.push(step.turnover);
        out.weights.push(target);
        drifted = step.drifted;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(pairs: &[(&str, f64)]) -> Weights {
        pairs.iter().map(|&(f, x)| (FirmId::new(f), x)).collect()
    }

    #[test]
    fn identical_targets_cost_nothing() {
        let target = w(&[("a", 0.5), ("b", 0.5)]);
        let r = w(&[("a", 0.02), ("b", 0.04)]);
        let s = step_month(&target, &target, &r, 0.0025);
        assert_eq!(s.turnover, 0.0);
        assert_eq!(s.net, s.gross);
        assert!((s.gross - 0.03).abs() < 1e-15);
    }

    #[test]
    fn full_replacement_is_unit_turnover() {
        let s = step_month(&w(&[("a", 0.6), ("b", 0.4)]), &w(&[("c", 1.0)]), &Weights::new(), 0.0);
        assert!((s.turnover - 1.0).abs() < 1e-15);
    }

    #[test]
    fn offsetting_returns_drift_weights() {
        let target = w(&[("a", 0.5), ("b", 0.5)]);
        let s = step_month(&target, &target, &w(&[("a", 0.10), ("b", -0.10)]), 0.0);
        assert!(s.gross.abs() < 1e-15);
        assert!((s.drifted[&FirmId::new("a")] - 0.55).abs() < 1e-15);
        assert!((s.drifted[&FirmId::new("b")] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn first_month_starts_from_cash() {
        let s = step_month(&Weights::new(), &w(&[("a", 1.0)]), &Weights::new(), 0.01);
        assert_eq!(s.turnover, 0.5);
        assert_eq!(s.net, -0.005);
    }

    #[test]
    fn effective_n_examples() {
        assert!((effective_n([0.25; 4]) - 4.0).abs() < 1e-12);
        assert!((effective_n([0.5, 0.25, 0.25]) - 1.0 / 0.375).abs() < 1e-12);
        assert_eq!(effective_n([1.0]), 1.0);
    }

    #[test]
    fn spec_parsing_and_labels() {
        let s: PortfolioSpec = "threshold:0.7".parse().unwrap();
        assert_eq!(s.kind, PortfolioKind::Threshold(0.7));
        assert_eq!(s.label(), "threshold_0.7");
        assert_eq!("tilt:2".parse::<PortfolioSpec>().unwrap().label(), "tilt_2");
        assert!("threshold:0".parse::<PortfolioSpec>().is_err());
        assert!("threshold:1.2".parse::<PortfolioSpec>().is_err());
        assert!("tilt:-1".parse::<PortfolioSpec>().is_err());
        assert!("momentum".parse::<PortfolioSpec>().is_err());
    }
}
