use std::path::Path;

use crate::error::Result;
use crate::io::{fmt_opt, CsvOut};

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierRow {
    pub label: String,
    pub avg_csci: Option<f64>,
    pub sharpe: Option<f64>,
    pub alpha_annualized: Option<f64>,
    pub max_drawdown: f64,
}

/// Rows ordered by average csci, ascending; rows without one come first.
pub fn frontier_table(mut rows: Vec<FrontierRow>) -> Vec<FrontierRow> {
    rows.sort_by(|a, b| match (a.avg_csci, b.avg_csci) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (None, Some(_)) => std::cmp::Ordering::Less,
        (Some(_), None) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    rows
}

pub fn write_frontier_csv(rows: &[FrontierRow], path: &Path, comment: Option<&str>) -> Result<()> {
    let mut w = CsvOut::create(path, comment)?;
    w.row(["portfolio", "avg_csci", "sharpe", "alpha_ann", "max_drawdown"])?;
    for r in rows {
        w.row([
            r.label.clone(),
            fmt_opt(r.avg_csci),
            fmt_opt(r.sharpe),
            fmt_opt(r.alpha_annualized),
            fmt_opt(Some(r.max_drawdown)),
        ])?;
    }
    w.finish()
}
