use std::path::Path;

use crate::error::Result;
use crate::io::{fmt_opt, CsvOut};
use crate::month::Month;
use crate::pipeline::ScoredPanel;

pub const N_DECILES: usize = 10;

/// Decile (1-10) of each value: rank `k` of `n` maps to `floor(10k/n) + 1`,
/// and tied values share the decile of their lowest rank.
pub fn assign_deciles(values: &[f64]) -> Vec<u8> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0u8; n];
    let mut k = 0;
    while k < n {
        let mut end = k + 1;
        while end < n && values[order[end]] == values[order[k]] {
            end += 1;
        }
        let d = (k * N_DECILES / n) as u8 + 1;
        for &i in &order[k..end] {
            out[i] = d;
        }
        k = end;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecileRow {
    pub decile: u8,
    pub avg_n_firms: f64,
    pub csci: Option<f64>,
    pub log_me: Option<f64>,
    pub lev: Option<f64>,
    pub cashr: Option<f64>,
    pub rec: Option<f64>,
    pub impure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecileReport {
    pub rows: Vec<DecileRow>,
    pub months_used: usize,
    pub diagnostics: Vec<String>,
}

#[derive(Default, Clone)]
struct Acc {
    sum: f64,
    n: usize,
}

impl Acc {
    fn push(&mut self, v: Option<f64>) {
        if let Some(v) = v {
            self.sum += v;
            self.n += 1;
        }
    }

    fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

const N_CHARS: usize = 6;

/// Time-series averages of monthly within-decile means of csci, log size and
/// the four ratios.
pub fn decile_table(panel: &ScoredPanel) -> DecileReport {
    let mut report = DecileReport::default();
    let mut ts: Vec<[Acc; N_CHARS]> = vec![Default::default(); N_DECILES];
    let mut sizes = [0usize; N_DECILES];
    let months: Vec<Month> = panel.months().collect();
    for month in months {
        let rows: Vec<usize> = panel
            .month_rows(month)
            .iter()
            .copied()
            .filter(|&i| panel.rows[i].csci().is_some())
            .collect();
        if rows.len() < N_DECILES {
            report
                .diagnostics
                .push(format!("{month}: {} scored firms, skipped", rows.len()));
            continue;
        }
        let values: Vec<f64> = rows.iter().map(|&i| panel.rows[i].csci().unwrap()).collect();
        let deciles = assign_deciles(&values);
        let mut cross: Vec<[Acc; N_CHARS]> = vec![Default::default(); N_DECILES];
        for (&i, &d) in rows.iter().zip(&deciles) {
            let r = &panel.rows[i];
            let v = panel.ratios_of(r).filter(|v| v.valid);
            let cells = &mut cross[d as usize - 1];
            cells[0].push(r.csci());
            cells[1].push((r.market_equity > 0.0).then(|| r.market_equity.ln()));
            cells[2].push(v.and_then(|v| v.lev));
            cells[3].push(v.and_then(|v| v.cashr));
            cells[4].push(v.and_then(|v| v.rec));
            cells[5].push(v.and_then(|v| v.impure));
            sizes[d as usize - 1] += 1;
        }
        let empty: Vec<String> = (0..N_DECILES)
            .filter(|&d| cross[d][0].n == 0)
            .map(|d| (d + 1).to_string())
            .collect();
        if !empty.is_empty() {
            report
                .diagnostics
                .push(format!("{month}: ties leave deciles {} empty", empty.join(",")));
        }
        for d in 0..N_DECILES {
            for c in 0..N_CHARS {
                ts[d][c].push(cross[d][c].mean());
            }
        }
        report.months_used += 1;
    }
    report.rows = (0..N_DECILES)
        .map(|d| DecileRow {
            decile: d as u8 + 1,
            avg_n_firms: if report.months_used > 0 {
                sizes[d] as f64 / report.months_used as f64
            } else {
                0.0
            },
            csci: ts[d][0].mean(),
            log_me: ts[d][1].mean(),
            lev: ts[d][2].mean(),
            cashr: ts[d][3].mean(),
            rec: ts[d][4].mean(),
            impure: ts[d][5].mean(),
        })
        .collect();
    report
}

pub fn write_deciles_csv(report: &DecileReport, path: &Path, comment: Option<&str>) -> Result<()> {
    let mut w = CsvOut::create(path, comment)?;
    w.row([
        "decile", "avg_n_firms", "csci", "log_me", "lev", "cashr", "rec", "impure",
    ])?;
    for r in &report.rows {
        w.row([
            r.decile.to_string(),
            fmt_opt(Some(r.avg_n_firms)),
            fmt_opt(r.csci),
            fmt_opt(r.log_me),
            fmt_opt(r.lev),
            fmt_opt(r.cashr),
            fmt_opt(r.rec),
            fmt_opt(r.impure),
        ])?;
    }
    w.finish()
}
