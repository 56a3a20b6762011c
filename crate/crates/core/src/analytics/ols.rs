use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on the diagonal of `R` below which a column counts as
/// linearly dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `(X'X)^{-1}`.
    pub xtx_inv: DMatrix<f64>,
    /// Centered R-squared; zero when the response has no variation.
    pub r_squared: f64,
}

impl OlsFit {
    pub fn n_obs(&self) -> usize {
        self.residuals.len()
    }
}

/// Least squares through a Householder QR factorization.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InsufficientData {
            need: n,
            got: y.len(),
            context: "response length must match regressor rows".into(),
        });
    }
    if n <= k {
        return Err(Error::InsufficientData {
            need: k + 1,
            got: n,
            context: format!("{k} regressors"),
        });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || (0..k).any(|i| r[(i, i)].abs() <= RANK_TOL * scale) {
        return Err(Error::RankDeficient(format!("{n}x{k} design")));
    }
    let qty = qr.q().transpose() * y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient("singular R".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient("singular R".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let residuals = y - x * &coef;

    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ssr = residuals.norm_squared();
    let r_squared = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(OlsFit {
        coef,
        residuals,
        xtx_inv,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_normal_equations() {
        let x = DMatrix::from_row_slice(5, 2, &[1., 0., 1., 1., 1., 2., 1., 3., 1., 4.]);
        let y = DVector::from_vec(vec![1.1, 2.9, 5.2, 6.8, 9.1]);
        let fit = ols(&x, &y).unwrap();
        let xtx = x.transpose() * &x;
        let oracle = xtx.clone().try_inverse().unwrap() * x.transpose() * &y;
        assert!((fit.coef.clone() - oracle).amax() < 1e-12);
        let ortho = x.transpose() * &fit.residuals;
        assert!(ortho.amax() < 1e-10);
        assert!(((fit.xtx_inv.clone() * xtx) - DMatrix::<f64>::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn intercept_only_gives_mean() {
        let x = DMatrix::from_element(4, 1, 1.0);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 6.0]);
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coef[0] - 3.0).abs() < 1e-14);
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn collinear_columns_are_rejected() {
        let x = DMatrix::from_row_slice(4, 2, &[1., 2., 1., 2., 1., 2., 1., 2.]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(ols(&x, &y), Err(Error::RankDeficient(_))));
        let x = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(
            ols(&x, &DVector::from_vec(vec![1.0, 2.0])),
            Err(Error::InsufficientData { .. })
        ));
    }
}
