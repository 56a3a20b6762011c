use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{fmt_opt, CsvOut};
use crate::stats::{mean, sample_sd};

pub const MIN_PERFORMANCE_MONTHS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceSummary {
    pub n_months: usize,
    pub mean_excess_annualized: f64,
    pub volatility_annualized: f64,
    /// `None` when the excess-return volatility is zero.
    pub sharpe: Option<f64>,
    /// `None` when no month has a negative excess return.
    pub sortino: Option<f64>,
    pub max_drawdown: f64,
}

/// Largest peak-to-trough loss of the compounded index, in `[-1, 0]`.
pub fn max_drawdown(returns: &[f64]) -> f64 {
    let mut level = 1.0_f64;
    let mut peak = 1.0_f64;
    let mut worst = 0.0_f64;
    for r in returns {
        level *= 1.0 + r;
        peak = peak.max(level);
        worst = worst.min(level / peak - 1.0);
    }
    worst.max(-1.0)
}

pub fn performance_summary(returns: &[f64], rf: &[f64]) -> Result<PerformanceSummary> {
    if returns.len() != rf.len() {
        return Err(Error::InsufficientData {
            need: returns.len(),
            got: rf.len(),
            context: "risk-free series must align with returns".into(),
        });
    }
    let n = returns.len();
    if n < MIN_PERFORMANCE_MONTHS {
        return Err(Error::InsufficientData {
            need: MIN_PERFORMANCE_MONTHS,
            got: n,
            context: "performance summary".into(),
        });
    }
    let excess: Vec<f64> = returns.iter().zip(rf).map(|(r, f)| r - f).collect();
    let m = mean(&excess).expect("non-empty");
    // Exactly constant series have zero dispersion regardless of rounding.
    let sd = if excess.iter().all(|e| *e == excess[0]) {
        0.0
    } else {
        sample_sd(&excess).expect("n >= 2")
    };
    let downside = (excess.iter().map(|e| e.min(0.0).powi(2)).sum::<f64>() / n as f64).sqrt();
    let ann = 12f64.sqrt();
    Ok(PerformanceSummary {
        n_months: n,
        mean_excess_annualized: 12.0 * m,
        volatility_annualized: sd * ann,
        sharpe: (sd > 0.0).then(|| 12.0 * m / (sd * ann)),
        sortino: (downside > 0.0).then(|| 12.0 * m / (downside * ann)),
        max_drawdown: max_drawdown(returns),
    })
}

pub fn write_performance_csv(
    rows: &[(String, PerformanceSummary)],
    path: &Path,
    comment: Option<&str>,
) -> Result<()> {
    let mut w = CsvOut::create(path, comment)?;
    w.row([
        "portfolio",
        "n_months",
        "mean_excess_ann",
        "vol_ann",
        "sharpe",
        "sortino",
        "max_drawdown",
    ])?;
    for (label, s) in rows {
        w.row([
            label.clone(),
            s.n_months.to_string(),
            fmt_opt(Some(s.mean_excess_annualized)),
            fmt_opt(Some(s.volatility_annualized)),
            fmt_opt(s.sharpe),
            fmt_opt(s.sortino),
            fmt_opt(Some(s.max_drawdown)),
        ])?;
    }
    w.finish()
}
