use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::ols::ols;
use super::{FactorSeries, FactorSubset};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::month::Month;

pub const DEFAULT_HAC_LAGS: usize = 6;
pub const MIN_REGRESSION_OBS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionReport {
    /// Factor names, in column order after the intercept.
    pub factors: Vec<String>,
    pub alpha_monthly: f64,
    pub alpha_annualized: f64,
    pub betas: Vec<f64>,
    /// HAC standard errors, intercept first.
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub r_squared: f64,
    pub n_obs: usize,
    pub hac_lags: usize,
}

impl RegressionReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_obs = {}", self.n_obs);
        let _ = writeln!(s, "hac_lags = {}", self.hac_lags);
        let _ = writeln!(s, "r_squared = {}", fmt_f64(self.r_squared));
        let _ = writeln!(s, "alpha_monthly = {}", fmt_f64(self.alpha_monthly));
        let _ = writeln!(s, "alpha_annualized = {}", fmt_f64(self.alpha_annualized));
        let _ = writeln!(s, "alpha_se = {}", fmt_f64(self.std_errors[0]));
        let _ = writeln!(s, "alpha_t = {}", fmt_f64(self.t_stats[0]));
        for (i, f) in self.factors.iter().enumerate() {
            let _ = writeln!(s, "beta_{f} = {}", fmt_f64(self.betas[i]));
            let _ = writeln!(s, "beta_{f}_se = {}", fmt_f64(self.std_errors[i + 1]));
            let _ = writeln!(s, "beta_{f}_t = {}", fmt_f64(self.t_stats[i + 1]));
        }
        s
    }
}

/// Newey-West covariance with Bartlett weights `1 - l / (lags + 1)`.
pub fn hac_covariance(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    xtx_inv: &DMatrix<f64>,
    lags: usize,
) -> DMatrix<f64> {
    let (n, k) = x.shape();
    let scores: Vec<DVector<f64>> = (0..n)
        .map(|t| x.row(t).transpose() * residuals[t])
        .collect();
    let mut s = DMatrix::zeros(k, k);
    for g in &scores {
        s += g * g.transpose();
    }
    for l in 1..=lags.min(n.saturating_sub(1)) {
        let w = 1.0 - l as f64 / (lags as f64 + 1.0);
        let mut gamma = DMatrix::zeros(k, k);
        for t in l..n {
            gamma += &scores[t] * scores[t - l].transpose();
        }
        s += (&gamma + gamma.transpose()) * w;
    }
    xtx_inv * s * xtx_inv
}

/// Heteroskedasticity-consistent (HC0) covariance `(X'X)^-1 X' diag(u^2) X (X'X)^-1`.
pub fn white_covariance(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    xtx_inv: &DMatrix<f64>,
) -> DMatrix<f64> {
    let u2 = DMatrix::from_diagonal(&residuals.map(|u| u * u));
    let meat = x.transpose() * u2 * x;
    xtx_inv * meat * xtx_inv
}

/// Time-series regression of `y` on an intercept and the named columns.
pub fn factor_regression(
    y: &[f64],
    factors: &[(String, Vec<f64>)],
    hac_lags: usize,
) -> Result<RegressionReport> {
    let n = y.len();
    if n < MIN_REGRESSION_OBS {
        return Err(Error::InsufficientData {
            need: MIN_REGRESSION_OBS,
            got: n,
            context: "factor regression".into(),
        });
    }
    let k = factors.len() + 1;
    let mut x = DMatrix::from_element(n, k, 1.0);
    for (j, (name, col)) in factors.iter().enumerate() {
        if col.len() != n {
            return Err(Error::InsufficientData {
                need: n,
                got: col.len(),
                context: format!("factor {name}"),
            });
        }
        for (t, v) in col.iter().enumerate() {
            x[(t, j + 1)] = *v;
        }
    }
    let yv = DVector::from_column_slice(y);
    let fit = ols(&x, &yv)?;
    let cov = hac_covariance(&x, &fit.residuals, &fit.xtx_inv, hac_lags);
    let std_errors: Vec<f64> = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let t_stats = (0..k).map(|i| fit.coef[i] / std_errors[i]).collect();
    Ok(RegressionReport {
        factors: factors.iter().map(|(n, _)| n.clone()).collect(),
        alpha_monthly: fit.coef[0],
        alpha_annualized: 12.0 * fit.coef[0],
        betas: fit.coef.iter().skip(1).copied().collect(),
        std_errors,
        t_stats,
        r_squared: fit.r_squared,
        n_obs: n,
        hac_lags,
    })
}

/// Regress `returns - rf` on a factor subset over the given months.
pub fn regress_on_factors(
    months: &[Month],
    returns: &[f64],
    series: &FactorSeries,
    subset: FactorSubset,
    hac_lags: usize,
) -> Result<RegressionReport> {
    let names = subset.names();
    let mut y = Vec::with_capacity(months.len());
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(months.len()); names.len()];
    for (m, r) in months.iter().zip(returns) {
        let f = series.require(*m)?;
        y.push(r - f.rf);
        for (j, name) in names.iter().enumerate() {
            cols[j].push(f.factor(name).expect("known factor"));
        }
    }
    let factors: Vec<(String, Vec<f64>)> = names
        .iter()
        .map(|n| n.to_string())
        .zip(cols)
        .collect();
    factor_regression(&y, &factors, hac_lags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(n: usize, a: f64, b: f64) -> Vec<f64> {
        (0..n).map(|t| (a * t as f64 + b).sin() * 0.04).collect()
    }

    #[test]
    fn exact_fit_recovers_beta() {
        let mkt = wave(60, 0.7, 0.1);
        let y: Vec<f64> = mkt.iter().map(|m| 0.5 * m).collect();
        let rep = factor_regression(&y, &[("mkt_rf".into(), mkt)], 6).unwrap();
        assert!((rep.betas[0] - 0.5).abs() < 1e-12);
        assert!(rep.alpha_monthly.abs() < 1e-12);
        assert!((rep.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_lags_match_white() {
        let n = 40;
        let mut x = DMatrix::from_element(n, 2, 1.0);
        for (t, v) in wave(n, 0.3, 0.2).into_iter().enumerate() {
            x[(t, 1)] = v;
        }
        let y = DVector::from_iterator(n, wave(n, 1.1, 0.5));
        let fit = ols(&x, &y).unwrap();
        let hac = hac_covariance(&x, &fit.residuals, &fit.xtx_inv, 0);
        let white = white_covariance(&x, &fit.residuals, &fit.xtx_inv);
        assert!((hac - white).amax() < 1e-14);
    }

    #[test]
    fn alpha_is_annualized_by_twelve() {
        let y: Vec<f64> = wave(30, 0.9, 0.0).iter().map(|v| v + 0.004).collect();
        let rep = factor_regression(&y, &[], 3).unwrap();
        assert_eq!(rep.alpha_annualized, 12.0 * rep.alpha_monthly);
        assert!(rep.to_text().contains("alpha_annualized"));
    }

    #[test]
    fn short_samples_are_rejected() {
        let err = factor_regression(&[0.0; 10], &[], 0).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { .. }));
    }
}
