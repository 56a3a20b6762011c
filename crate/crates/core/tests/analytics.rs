use csci_core::analytics::{
    assign_deciles, factor_regression, fama_macbeth, hac_covariance, max_drawdown, ols,
    performance_summary, white_covariance, FmCrossSection,
};
use csci_core::month::Month;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gauss-Jordan solve of the normal equations on plain vectors.
fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = x[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (row, yi) in x.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
            a[i][k] += row[i] * yi;
        }
    }
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..k {
            if r != c {
                let f = a[r][c];
                let pivot = a[c].clone();
                for (v, pv) in a[r].iter_mut().zip(pivot) {
                    *v -= f * pv;
                }
            }
        }
    }
    a.iter().map(|r| r[k]).collect()
}

fn z(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn design(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut r = vec![1.0];
            r.extend((1..k).map(|_| z(rng)));
            r
        })
        .collect()
}

fn to_matrix(x: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x[0].len(), |i, j| x[i][j])
}

#[test]
fn ols_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let x = design(&mut rng, 80, 4);
        let y: Vec<f64> = (0..80).map(|_| z(&mut rng)).collect();
        let fit = ols(&to_matrix(&x), &DVector::from_column_slice(&y)).unwrap();
        let oracle = normal_equations(&x, &y);
        for (a, b) in fit.coef.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn collinear_design_is_rank_deficient() {
    let x = DMatrix::from_fn(30, 3, |i, j| if j == 2 { 2.0 * i as f64 } else if j == 1 { i as f64 } else { 1.0 });
    let y = DVector::from_fn(30, |i, _| i as f64);
    assert!(matches!(ols(&x, &y), Err(csci_core::Error::RankDeficient(_))));
}

/// Newey-West meat matrix with explicit loops.
fn hac_oracle(x: &[Vec<f64>], u: &[f64], inv: &DMatrix<f64>, lags: usize) -> DMatrix<f64> {
    let n = x.len();
    let k = x[0].len();
    let mut s = DMatrix::zeros(k, k);
    for l in 0..=lags {
        let w = if l == 0 { 1.0 } else { 1.0 - l as f64 / (lags as f64 + 1.0) };
        for t in l..n {
            for i in 0..k {
                for j in 0..k {
                    let g = x[t][i] * u[t] * x[t - l][j] * u[t - l];
                    s[(i, j)] += w * g;
                    if l > 0 {
                        s[(j, i)] += w * g;
                    }
                }
            }
        }
    }
    inv * s * inv
}

#[test]
fn hac_matches_loop_oracle_and_reduces_to_white() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = design(&mut rng, 60, 3);
    let mut u = vec![0.0; 60];
    for t in 1..60 {
        u[t] = 0.5 * u[t - 1] + z(&mut rng);
    }
    let xm = to_matrix(&x);
    let inv = (xm.transpose() * &xm).try_inverse().unwrap();
    let uv = DVector::from_column_slice(&u);
    for lags in [0, 1, 6] {
        let got = hac_covariance(&xm, &uv, &inv, lags);
        let want = hac_oracle(&x, &u, &inv, lags);
        assert!((got - want).abs().max() < 1e-10);
    }
    let white = white_covariance(&xm, &uv, &inv);
    assert!((hac_covariance(&xm, &uv, &inv, 0) - white).abs().max() < 1e-12);
}

#[test]
fn regression_recovers_planted_alpha_and_betas() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let reps = 200;
    let n = 240;
    let alpha = 0.004;
    let betas = [1.1, 0.3, -0.2];
    let mut alphas = Vec::with_capacity(reps);
    let mut covered = 0;
    for _ in 0..reps {
        let f: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| 0.04 * z(&mut rng)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|t| {
                let e: f64 = z(&mut rng);
                alpha + (0..3).map(|j| betas[j] * f[j][t]).sum::<f64>() + 0.02 * e
            })
            .collect();
        let cols: Vec<(String, Vec<f64>)> = ["mkt_rf", "smb", "hml"]
            .iter()
            .map(|s| s.to_string())
            .zip(f)
            .collect();
        let rep = factor_regression(&y, &cols, 6).unwrap();
        assert!((rep.alpha_annualized - 12.0 * rep.alpha_monthly).abs() < 1e-15);
        for (b, want) in rep.betas.iter().zip(betas) {
            assert!((b - want).abs() < 0.2);
        }
        if (rep.alpha_monthly - alpha).abs() <= 1.96 * rep.std_errors[0] {
            covered += 1;
        }
        alphas.push(rep.alpha_monthly);
    }
    let mean = alphas.iter().sum::<f64>() / reps as f64;
    assert!((mean - alpha).abs() < 2e-4, "mean alpha {mean}");
    let rate = covered as f64 / reps as f64;
    assert!((0.88..=0.99).contains(&rate), "coverage {rate}");
}

#[test]
fn short_regressions_are_refused() {
    let y = vec![0.01; 23];
    let cols = vec![("mkt_rf".to_string(), (0..23).map(|i| i as f64).collect())];
    assert!(matches!(
        factor_regression(&y, &cols, 6),
        Err(csci_core::Error::InsufficientData { .. })
    ));
}

fn drawdown_oracle(r: &[f64]) -> f64 {
    let mut levels = vec![1.0];
    for x in r {
        levels.push(levels.last().unwrap() * (1.0 + x));
    }
    let mut worst: f64 = 0.0;
    for j in 0..levels.len() {
        for i in 0..=j {
            worst = worst.min(levels[j] / levels[i] - 1.0);
        }
    }
    worst
}

#[test]
fn drawdown_examples() {
    assert_eq!(max_drawdown(&[0.1, 0.2, 0.0]), 0.0);
    assert!((max_drawdown(&[0.0, -0.5, 1.0, -0.5]) + 0.5).abs() < 1e-15);
    assert!((max_drawdown(&[0.25, -0.2, -0.25]) + 0.4).abs() < 1e-15);
    assert_eq!(max_drawdown(&[-1.0, 0.5]), -1.0);
}

#[test]
fn constant_returns_have_no_sharpe() {
    let r = vec![0.01; 36];
    let rf = vec![0.002; 36];
    let s = performance_summary(&r, &rf).unwrap();
    assert!(s.sharpe.is_none());
    assert!(s.sortino.is_none());
    assert!((s.mean_excess_annualized - 0.096).abs() < 1e-12);
}

#[test]
fn fama_macbeth_recovers_exact_affine_slopes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start: Month = "2001-01".parse().unwrap();
    let sections: Vec<FmCrossSection> = (0..36)
        .map(|t| {
            let x: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
            let y = x.iter().map(|v| 0.01 + 0.05 * v[0] - 0.02 * v[1]).collect();
            FmCrossSection { month: start.add(t), y, x }
        })
        .collect();
    let names = vec!["csci".to_string(), "log_size".to_string()];
    let rep = fama_macbeth(&names, &sections).unwrap();
    let (b, t) = rep.coefficient("csci").unwrap();
    assert!((b - 0.05).abs() < 1e-12);
    assert!(t.abs() > 1e4);
    assert!((rep.coefficient("intercept").unwrap().0 - 0.01).abs() < 1e-12);
    assert!((rep.coefficient("log_size").unwrap().0 + 0.02).abs() < 1e-12);
    assert_eq!(rep.n_months, 36);
    assert_eq!(rep.avg_n_obs, 40.0);
}

#[test]
fn fama_macbeth_t_is_mean_over_time_series_se() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let start: Month = "2001-01".parse().unwrap();
    let sections: Vec<FmCrossSection> = (0..30)
        .map(|t| {
            let x: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.random::<f64>()]).collect();
            let y = x
                .iter()
                .map(|v| 0.02 * v[0] + 0.05 * z(&mut rng))
                .collect();
            FmCrossSection { month: start.add(t), y, x }
        })
        .collect();
    let rep = fama_macbeth(&["csci".to_string()], &sections).unwrap();
    let b: Vec<f64> = rep.slopes.iter().map(|(_, s)| s[1]).collect();
    let n = b.len() as f64;
    let m = b.iter().sum::<f64>() / n;
    let sd = (b.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let (mean, t) = rep.coefficient("csci").unwrap();
    assert!((mean - m).abs() < 1e-14);
    assert!((t - m / (sd / n.sqrt())).abs() < 1e-9);
}

proptest! {
    #[test]
    fn drawdown_matches_oracle(r in prop::collection::vec(-0.9f64..0.9, 1..60)) {
        let got = max_drawdown(&r);
        prop_assert!((-1.0..=0.0).contains(&got));
        prop_assert!((got - drawdown_oracle(&r)).abs() < 1e-12);
    }

    #[test]
    fn sharpe_ignores_scaling_of_excess_returns(
        e in prop::collection::vec(-0.1f64..0.1, 12..60),
        c in 0.1f64..10.0,
    ) {
        let rf = vec![0.0; e.len()];
        let scaled: Vec<f64> = e.iter().map(|x| c * x).collect();
        let a = performance_summary(&e, &rf).unwrap();
        let b = performance_summary(&scaled, &rf).unwrap();
        if let (Some(x), Some(y)) = (a.sharpe, b.sharpe) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn deciles_are_ordered_and_balanced(v in prop::collection::vec(-1e3f64..1e3, 10..200)) {
        let d = assign_deciles(&v);
        prop_assert!(d.iter().all(|&k| (1..=10).contains(&k)));
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] < v[j] {
                    prop_assert!(d[i] <= d[j]);
                }
            }
        }
        let n = v.len();
        let mut distinct = v.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() == n {
            for k in 1..=10u8 {
                let count = d.iter().filter(|&&x| x == k).count() as f64;
                prop_assert!((count - n as f64 / 10.0).abs() <= 1.0);
            }
        }
    }
}
