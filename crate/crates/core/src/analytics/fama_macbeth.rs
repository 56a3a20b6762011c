use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::ols::ols;
use super::FactorSeries;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvOut};
use crate::month::Month;
use crate::panel::ControlTable;
use crate::pipeline::{ScoredPanel, ScoredRow};

/// Largest tolerated share of skipped cross-sections.
pub const MAX_SKIPPED_SHARE: f64 = 0.20;
/// Reported bound on |t| when slope estimates have (numerically) no dispersion.
pub const T_STAT_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FmControl {
    LogSize,
    PastReturn,
    Leverage,
    /// Column of the external controls table.
    External(String),
}

impl FmControl {
    pub fn name(&self) -> &str {
        match self {
            FmControl::LogSize => "log_size",
            FmControl::PastReturn => "past_return",
            FmControl::Leverage => "leverage",
            FmControl::External(n) => n,
        }
    }

    fn value(&self, panel: &ScoredPanel, row: &ScoredRow, table: Option<&ControlTable>) -> Option<f64> {
        match self {
            FmControl::LogSize => (row.market_equity > 0.0).then(|| row.market_equity.ln()),
            FmControl::PastReturn => Some(row.total_return),
            FmControl::Leverage => panel.ratios_of(row).filter(|v| v.valid).and_then(|v| v.lev),
            FmControl::External(n) => table?.get(&row.firm_id, row.month, n),
        }
    }
}

impl fmt::Display for FmControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FmControl {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim() {
            "log_size" | "size" => FmControl::LogSize,
            "past_return" => FmControl::PastReturn,
            "leverage" => FmControl::Leverage,
            other => FmControl::External(other.to_string()),
        })
    }
}

/// One month's regression: `y` holds next-month excess returns, `x` the
/// regressors measured at `month` (no intercept column).
#[derive(Debug, Clone, PartialEq)]
pub struct FmCrossSection {
    pub month: Month,
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
}

/// Cross-sections of `r_{i,t+1} - rf_{t+1}` on `csci_{i,t}` and controls.
/// Firm-months missing any regressor or the next-month return are dropped, as
/// are months before any firm has a financial score.
pub fn build_cross_sections(
    panel: &ScoredPanel,
    factors: &FactorSeries,
    controls: &[FmControl],
    table: Option<&ControlTable>,
) -> Result<(Vec<String>, Vec<FmCrossSection>)> {
    let mut names = vec!["csci".to_string()];
    names.extend(controls.iter().map(|c| c.name().to_string()));
    let mut sections = Vec::new();
    for month in panel.months() {
        let rows = panel.month_rows(month);
        if !rows.iter().any(|&i| panel.rows[i].record.f_financial.is_some()) {
            continue;
        }
        let next = month.succ();
        let mut y = Vec::new();
        let mut x = Vec::new();
        for &i in rows {
            let row = &panel.rows[i];
            let Some(c) = row.csci() else { continue };
            let Some(ahead) = panel.find(&row.firm_id, next) else { continue };
            let Some(ctrl) = controls
                .iter()
                .map(|k| k.value(panel, row, table))
                .collect::<Option<Vec<f64>>>()
            else {
                continue;
            };
            let mut regs = Vec::with_capacity(names.len());
            regs.push(c);
            regs.extend(ctrl);
            y.push(ahead.total_return);
            x.push(regs);
        }
        if y.is_empty() {
            continue;
        }
        let rf = factors.require(next)?.rf;
        for v in &mut y {
            *v -= rf;
        }
        sections.push(FmCrossSection { month, y, x });
    }
    Ok((names, sections))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmReport {
    /// `intercept` followed by the regressor names.
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub t_stat: Vec<f64>,
    pub n_months: usize,
    pub avg_n_obs: f64,
    pub skipped: Vec<(Month, String)>,
    /// Per-month coefficient vectors, intercept first.
    pub slopes: Vec<(Month, Vec<f64>)>,
}

impl FmReport {
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.mean[i], self.t_stat[i]))
    }
}

fn capped_t(mean: f64, se: f64) -> f64 {
    if se > 0.0 {
        (mean / se).clamp(-T_STAT_CAP, T_STAT_CAP)
    } else if mean == 0.0 {
        0.0
    } else {
        T_STAT_CAP.copysign(mean)
    }
}

/// Average monthly OLS coefficients; t-statistics use the time-series
/// standard error `sd / sqrt(n_months)`.
pub fn fama_macbeth(names: &[String], sections: &[FmCrossSection]) -> Result<FmReport> {
    let k = names.len() + 1;
    let mut slopes = Vec::with_capacity(sections.len());
    let mut skipped = Vec::new();
    let mut total_obs = 0usize;
    for s in sections {
        let n = s.y.len();
        if n <= k {
            skipped.push((s.month, format!("{n} firms for {k} coefficients")));
            continue;
        }
        let mut x = DMatrix::from_element(n, k, 1.0);
        for (i, row) in s.x.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                x[(i, j + 1)] = *v;
            }
        }
        match ols(&x, &DVector::from_column_slice(&s.y)) {
            Ok(fit) => {
                total_obs += n;
                slopes.push((s.month, fit.coef.iter().copied().collect::<Vec<f64>>()));
            }
            Err(Error::RankDeficient(msg)) => skipped.push((s.month, format!("rank deficient: {msg}"))),
            Err(e) => return Err(e),
        }
    }
    let total = sections.len();
    if total > 0 && skipped.len() as f64 > MAX_SKIPPED_SHARE * total as f64 {
        return Err(Error::TooManySkippedMonths {
            skipped: skipped.len(),
            total,
        });
    }
    let t = slopes.len();
    if t < 2 {
        return Err(Error::InsufficientData {
            need: 2,
            got: t,
            context: "Fama-MacBeth months".into(),
        });
    }
    let mut mean = vec![0.0; k];
    for (_, b) in &slopes {
        for j in 0..k {
            mean[j] += b[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= t as f64);
    let mut var = vec![0.0; k];
    for (_, b) in &slopes {
        for j in 0..k {
            var[j] += (b[j] - mean[j]).powi(2);
        }
    }
    let std_error: Vec<f64> = var
        .iter()
        .map(|v| (v / (t - 1) as f64).sqrt() / (t as f64).sqrt())
        .collect();
    let t_stat = mean
        .iter()
        .zip(&std_error)
        .map(|(m, se)| capped_t(*m, *se))
        .collect();
    let mut all_names = vec!["intercept".to_string()];
    all_names.extend(names.iter().cloned());
    Ok(FmReport {
        names: all_names,
        mean,
        std_error,
        t_stat,
        n_months: t,
        avg_n_obs: total_obs as f64 / t as f64,
        skipped,
        slopes,
    })
}

pub fn write_fm_csv(reports: &[(String, FmReport)], path: &Path, comment: Option<&str>) -> Result<()> {
    let mut w = CsvOut::create(path, comment)?;
    w.row([
        "specification",
        "regressor",
        "mean_coef",
        "std_error",
        "t_stat",
        "n_months",
        "avg_n_obs",
        "skipped_months",
    ])?;
    for (label, r) in reports {
        for i in 0..r.names.len() {
            w.row([
                label.clone(),
                r.names[i].clone(),
                fmt_f64(r.mean[i]),
                fmt_f64(r.std_error[i]),
                fmt_f64(r.t_stat[i]),
                r.n_months.to_string(),
                fmt_f64(r.avg_n_obs),
                r.skipped.len().to_string(),
            ])?;
        }
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section(m: i32, xs: &[f64], f: impl Fn(f64) -> f64) -> FmCrossSection {
        FmCrossSection {
            month: Month::from_index(24000 + m),
            y: xs.iter().map(|&x| f(x)).collect(),
            x: xs.iter().map(|&x| vec![x]).collect(),
        }
    }

    #[test]
    fn common_shock_loads_on_intercept() {
        let xs = [0.1, 0.3, 0.5, 0.7, 0.9];
        let sections: Vec<_> = (0..12)
            .map(|m| {
                let shock = (m as f64 * 1.3).sin() * 0.05;
                section(m, &xs, move |x| shock + 0.01 * x)
            })
            .collect();
        let rep = fama_macbeth(&["csci".into()], &sections).unwrap();
        let (slope, t) = rep.coefficient("csci").unwrap();
        assert!((slope - 0.01).abs() < 1e-12);
        assert!(t.abs() > 1e3);
        assert!(t.abs() <= T_STAT_CAP);
        for (_, b) in &rep.slopes {
            assert!((b[1] - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_months_are_skipped_then_fail() {
        let good = section(0, &[0.1, 0.2, 0.3, 0.4], |x| x);
        let flat = section(1, &[0.5, 0.5, 0.5, 0.5], |x| x);
        let sections = vec![good.clone(), good.clone(), good.clone(), good.clone(), good, flat.clone()];
        let rep = fama_macbeth(&["csci".into()], &sections).unwrap();
        assert_eq!(rep.skipped.len(), 1);
        assert_eq!(rep.n_months, 5);
        let sections = vec![section(0, &[0.1, 0.2, 0.3], |x| x), flat.clone(), flat];
        assert!(matches!(
            fama_macbeth(&["csci".into()], &sections),
            Err(Error::TooManySkippedMonths { .. })
        ));
    }

    #[test]
    fn t_cap_rules() {
        assert_eq!(capped_t(0.0, 0.0), 0.0);
        assert_eq!(capped_t(-1.0, 0.0), -T_STAT_CAP);
        assert_eq!(capped_t(1.0, 0.5), 2.0);
    }
}
