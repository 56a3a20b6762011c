//! Acceptance criteria, one line per criterion. Exits non-zero if any fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::Datelike;
use csci_core::analytics::{
    build_cross_sections, factor_regression, fama_macbeth, hac_covariance, ols, white_covariance,
    FmControl,
};
use csci_core::panel::FirmId;
use csci_core::pipeline::{score_panel, PipelineConfig};
use csci_core::portfolio::{
    build_universe, characteristics, default_start, run_backtest, target_weights, PortfolioKind,
    PortfolioSpec,
};
use csci_core::ratios::{DenominatorStyle, RatioVector};
use csci_core::scoring::{compute_csci, financial_score, ratio_score, sector_factor, ScoreConfig};
use csci_core::sector::{SectorClass, SectorExposure};
use csci_core::standards::{default_rules, evaluate_standard, fit_tau, DEFAULT_GRID_STEP};
use csci_core::synthgen::{generate, planted_scenario, Scenario, SynthConfig, SynthData};
use csci_core::{Month, ScoredPanel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(elapsed: Duration, limit_secs: f64, what: &str) -> Result<(), String> {
    let s = elapsed.as_secs_f64();
    if s < limit_secs {
        Ok(())
    } else {
        Err(format!("{what} took {s:.2}s, limit {limit_secs}s"))
    }
}

fn score(data: &SynthData) -> ScoredPanel {
    score_panel(
        data.accounting.clone(),
        data.market.clone(),
        &data.links,
        &data.sectors,
        &PipelineConfig::default(),
    )
    .expect("synthetic panel scores")
}

fn large_config() -> SynthConfig {
    SynthConfig {
        n_firms: 500,
        n_months: 300,
        seed: 42,
        ..SynthConfig::default()
    }
}

fn scoring_exactness() -> Check {
    let t = Instant::now();
    let cfg = ScoreConfig::default();
    let d = &cfg.debt;
    let mid = 0.5 * (d.comfort + d.outer);
    let got = [
        ratio_score(d.comfort, d.comfort, d.outer, 2.0),
        ratio_score(mid, d.comfort, d.outer, 2.0),
        ratio_score(d.outer, d.comfort, d.outer, 2.0),
    ];
    for (g, want) in got.iter().zip([1.0, 0.25, 0.0]) {
        ensure!((g - want).abs() <= 1e-12, "ratio_score {got:?}");
    }
    let s = &cfg.sector;
    let got = [0.03, 0.125, 0.25].map(|q| sector_factor(q, s.lower, s.upper, 2.0, false));
    for (g, want) in got.iter().zip([1.0, 0.25, 0.0]) {
        ensure!((g - want).abs() <= 1e-12, "sector_factor {got:?}");
    }
    within(t.elapsed(), 1.0, "scoring exactness")?;
    Ok(format!("ratio (1, 0.25, 0) and sector (1, 0.25, 0) exact; {:.3}s", t.elapsed().as_secs_f64()))
}

fn zero_propagation() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = ScoreConfig::default();
    let weights = cfg.weights();
    let n = 100_000;
    for i in 0..n {
        let c: Vec<Option<f64>> = (0..4)
            .map(|_| match rng.random_range(0..10) {
                0 | 1 => None,
                2 => Some(0.0),
                3 => Some(1.0),
                _ => Some(rng.random::<f64>()),
            })
            .collect();
        let present: Vec<f64> = c.iter().flatten().copied().collect();
        let f = financial_score(&c, &weights);
        match f {
            None => ensure!(present.is_empty(), "vector {i}: missing f with scores {c:?}"),
            Some(f) => {
                let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                ensure!(lo <= f && f <= hi, "vector {i}: f={f} outside [{lo}, {hi}]");
                ensure!((f == 0.0) == (lo == 0.0), "vector {i}: f={f} with min {lo}");
            }
        }
    }
    let firm = FirmId::new("X");
    let month: Month = "2000-01".parse().unwrap();
    for i in 0..n {
        let mut r = || (rng.random::<f64>() < 0.9).then(|| rng.random::<f64>() * 0.6);
        let v = RatioVector {
            firm_id: firm.clone(),
            fiscal_year_end: chrono::NaiveDate::from_ymd_opt(1999, 12, 31).unwrap(),
            lev: r(),
            cashr: r(),
            rec: r(),
            impure: r().map(|x| x / 6.0),
            style: DenominatorStyle::MarketCap,
            me_at_fye: Some(1.0),
            valid: true,
            reason: None,
        };
        let hard = rng.random::<f64>() < 0.1;
        let q = rng.random::<f64>() * 0.3;
        let e = SectorExposure {
            class: if hard { SectorClass::Prohibited } else { SectorClass::Mixed },
            hard_prohibited: hard,
            q: if hard { 1.0 } else { q },
            prohibited_share: 0.0,
        };
        let rec = compute_csci(&firm, month, Some(&v), &e, &cfg);
        let b = rec.b_sector;
        match (rec.f_financial, rec.csci) {
            _ if b == 0.0 => ensure!(rec.csci == Some(0.0), "row {i}: b=0 but csci {:?}", rec.csci),
            (Some(f), Some(c)) => ensure!((c - b * f).abs() <= 1e-12, "row {i}: csci {c} vs b*f {}", b * f),
            (None, None) => {}
            other => return Err(format!("row {i}: inconsistent (f, csci) {other:?}")),
        }
    }
    within(t.elapsed(), 5.0, "zero propagation")?;
    Ok(format!("{n} score vectors and {n} firm-months; {:.2}s", t.elapsed().as_secs_f64()))
}

fn lookahead(panel: &ScoredPanel, elapsed: Duration) -> Check {
    let violations = panel.panel.lookahead_violations();
    ensure!(violations == 0, "{violations} firm-months use unpublished accounting");
    let mut checked = 0;
    for a in &panel.panel.accounting {
        let fye = a.record.fiscal_year_end;
        if fye.month() != 12 {
            continue;
        }
        let w = a.window;
        ensure!(
            w.start.year() == fye.year() + 1 && w.start.month() == 7,
            "FYE {fye} window starts {}",
            w.start
        );
        if let Some(end) = w.end {
            ensure!(
                end.year() == fye.year() + 2 && end.month() == 6,
                "FYE {fye} window ends {end}"
            );
        }
        checked += 1;
    }
    for r in &panel.panel.rows {
        if let Some(i) = r.accounting {
            ensure!(panel.panel.accounting[i].window.contains(r.month), "row outside its window");
        }
    }
    within(elapsed, 30.0, "500x300 generate+score")?;
    Ok(format!(
        "{} firm-months, 0 violations, {checked} December windows July-June; {:.2}s",
        panel.panel.rows.len(),
        elapsed.as_secs_f64()
    ))
}

fn tau_recovery() -> Check {
    let t = Instant::now();
    let data = planted_scenario(Scenario::ExactCut(0.7), &SynthConfig::default()).map_err(|e| e.to_string())?;
    let panel = score(&data);
    let djim = default_rules().into_iter().find(|r| r.name == "DJIM").unwrap();
    let pass = evaluate_standard(&djim, &panel, &data.sectors, &ScoreConfig::default().sector)
        .map_err(|e| e.to_string())?;
    let csci: Vec<Option<f64>> = panel.rows.iter().map(|r| r.csci()).collect();
    let m = fit_tau("DJIM", &pass, &csci, DEFAULT_GRID_STEP).map_err(|e| e.to_string())?;
    ensure!((m.tau - 0.7).abs() <= DEFAULT_GRID_STEP / 2.0, "tau {}", m.tau);
    ensure!(m.fn_rate == 0.0 && m.fp_rate == 0.0, "fn {} fp {}", m.fn_rate, m.fp_rate);

    let pairs: Vec<(bool, f64)> = pass.iter().zip(&csci).filter_map(|(&p, c)| c.map(|c| (p, c))).collect();
    let loss = |tau: f64| {
        pairs.iter().filter(|(p, c)| (*p && *c < tau) || (!*p && *c >= tau)).count() as f64 / pairs.len() as f64
    };
    ensure!((loss(m.tau) - m.loss).abs() < 1e-15, "loss at tau {} vs reported {}", loss(m.tau), m.loss);
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..100 {
        let tau = rng.random_range(0..=1000) as f64 / 1000.0;
        ensure!(loss(tau) >= m.loss, "loss({tau}) = {} below optimum {}", loss(tau), m.loss);
    }
    within(t.elapsed(), 10.0, "tau recovery")?;
    Ok(format!("tau = {:.3}, fn = fp = 0, 100 rescans; {:.2}s", m.tau, t.elapsed().as_secs_f64()))
}

fn djim_msci(large: &SynthData, large_panel: &ScoredPanel) -> Check {
    let rules = default_rules();
    let djim = rules.iter().find(|r| r.name == "DJIM").unwrap();
    let msci = rules.iter().find(|r| r.name == "MSCI").unwrap();
    let sector = ScoreConfig::default().sector;
    let mut panels = vec![("500x300".to_string(), large.sectors.clone(), large_panel.clone())];
    for seed in [1u64, 2, 3, 42] {
        let d = generate(&SynthConfig { seed, ..SynthConfig::default() }).map_err(|e| e.to_string())?;
        panels.push((format!("seed {seed}"), d.sectors.clone(), score(&d)));
    }
    for s in [Scenario::ExactCut(0.7), Scenario::AllPass, Scenario::MonotoneRatioGrid] {
        let d = planted_scenario(s, &SynthConfig::default()).map_err(|e| e.to_string())?;
        panels.push((s.to_string(), d.sectors.clone(), score(&d)));
    }
    let mut rows = 0;
    for (name, sectors, p) in &panels {
        let a = evaluate_standard(djim, p, sectors, &sector).map_err(|e| e.to_string())?;
        let b = evaluate_standard(msci, p, sectors, &sector).map_err(|e| e.to_string())?;
        let diff = a.iter().zip(&b).filter(|(x, y)| x != y).count();
        ensure!(diff == 0, "{name}: symmetric difference {diff}");
        rows += a.len();
    }
    Ok(format!("{} panels, {rows} firm-months, symmetric difference 0", panels.len()))
}

fn threshold_monotonicity(panel: &ScoredPanel) -> Check {
    let taus = [0.5, 0.7, 0.8, 0.9];
    let start = default_start(panel).ok_or("no scored month")?;
    let end = panel.last_month().unwrap();
    let mut months = 0;
    let mut avg = vec![(0.0, 0.0); taus.len()];
    for m in start.through(end) {
        let f = m.pred();
        let mut prev: Option<(usize, f64)> = None;
        for (k, &tau) in taus.iter().enumerate() {
            let spec = PortfolioSpec::new(PortfolioKind::Threshold(tau));
            let members = build_universe(&spec, panel, None, f).map_err(|e| e.to_string())?;
            let w = target_weights(&spec, panel, &members, f).map_err(|e| e.to_string())?;
            let c = characteristics(&w, panel, f);
            let wc = c.w_csci.ok_or("missing weighted csci")?;
            ensure!(wc >= tau, "{f}: tau {tau} weighted csci {wc}");
            if let Some((n, prev_c)) = prev {
                ensure!(c.n_stocks <= n, "{f}: n_stocks rises at tau {tau}");
                ensure!(wc >= prev_c - 1e-12, "{f}: weighted csci falls at tau {tau}");
            }
            prev = Some((c.n_stocks, wc));
            avg[k].0 += c.n_stocks as f64;
            avg[k].1 += wc;
        }
        months += 1;
    }
    let summary: Vec<String> = taus
        .iter()
        .zip(&avg)
        .map(|(t, (n, c))| format!("{t}: {:.0}/{:.3}", n / months as f64, c / months as f64))
        .collect();
    Ok(format!("{months} months; avg stocks/csci {}", summary.join(", ")))
}

fn backtest_accounting(panel: &ScoredPanel) -> Check {
    let start = default_start(panel).ok_or("no scored month")?;
    let end = panel.last_month().unwrap();
    let mut months = 0;
    for kind in [PortfolioKind::Market, PortfolioKind::Threshold(0.7), PortfolioKind::Tilt(2.0)] {
        let spec = PortfolioSpec::new(kind);
        let r = run_backtest(&spec, panel, None, start, end).map_err(|e| e.to_string())?;
        for i in 0..r.months.len() {
            let gap = (r.net[i] + spec.cost_rate * r.turnover[i] - r.gross[i]).abs();
            ensure!(gap <= 1e-12, "{} {}: cost identity off by {gap}", r.label, r.months[i]);
            let total: f64 = r.weights[i].values().sum();
            ensure!((total - 1.0).abs() <= 1e-10, "{} {}: weights sum {total}", r.label, r.months[i]);
        }
        months += r.months.len();
    }

    let base: Month = "2000-12".parse().unwrap();
    let firm = FirmId::new("ONE");
    let rows: Vec<csci_core::ScoredRow> = (0..13)
        .map(|k| single_asset_row(&firm, base.add(k)))
        .collect();
    let single = ScoredPanel::from_parts(Default::default(), vec![unit_ratios(&firm)], rows, Default::default());
    let spec = PortfolioSpec::new(PortfolioKind::Market).with_cost(0.0);
    let r = run_backtest(&spec, &single, None, base.succ(), base.add(12)).map_err(|e| e.to_string())?;
    let wealth = r.net.iter().map(|x| 1.0 + x).product::<f64>() - 1.0;
    let want = 1.01f64.powi(12) - 1.0;
    ensure!((wealth - want).abs() <= 1e-9, "compounded {wealth} vs {want}");
    Ok(format!("{months} spec-months balanced; 12 x 1% compounds to {wealth:.6}"))
}

fn unit_ratios(firm: &FirmId) -> RatioVector {
    RatioVector {
        firm_id: firm.clone(),
        fiscal_year_end: chrono::NaiveDate::from_ymd_opt(1999, 12, 31).unwrap(),
        lev: Some(0.1),
        cashr: Some(0.1),
        rec: Some(0.1),
        impure: Some(0.0),
        style: DenominatorStyle::MarketCap,
        me_at_fye: Some(1.0),
        valid: true,
        reason: None,
    }
}

fn single_asset_row(firm: &FirmId, month: Month) -> csci_core::ScoredRow {
    let exposure = SectorExposure {
        class: SectorClass::Permissible,
        hard_prohibited: false,
        q: 0.0,
        prohibited_share: 0.0,
    };
    let record = compute_csci(firm, month, Some(&unit_ratios(firm)), &exposure, &ScoreConfig::default());
    csci_core::ScoredRow {
        firm_id: firm.clone(),
        month,
        market_equity: 1.0,
        total_return: 0.01,
        delisted: false,
        sector_code: "3571".into(),
        q: 0.0,
        exposure,
        ratios: Some(0),
        record,
    }
}

fn regression_recovery() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 600;
    let mkt_dist = Normal::new(0.006, 0.045).unwrap();
    let eps = Normal::new(0.0, 0.01).unwrap();
    let mkt: Vec<f64> = (0..n).map(|_| mkt_dist.sample(&mut rng)).collect();
    let y: Vec<f64> = mkt.iter().map(|m| 0.003 + m + eps.sample(&mut rng)).collect();
    let cols = vec![("mkt_rf".to_string(), mkt.clone())];
    let rep = factor_regression(&y, &cols, 6).map_err(|e| e.to_string())?;
    let za = (rep.alpha_monthly - 0.003).abs() / rep.std_errors[0];
    let zb = (rep.betas[0] - 1.0).abs() / rep.std_errors[1];
    ensure!(za <= 3.0, "alpha {} is {za:.2} HAC se from truth", rep.alpha_monthly);
    ensure!(zb <= 3.0, "beta {} is {zb:.2} HAC se from truth", rep.betas[0]);

    let exact: Vec<f64> = mkt.to_vec();
    let fit = factor_regression(&exact, &cols, 6).map_err(|e| e.to_string())?;
    ensure!((fit.r_squared - 1.0).abs() <= 1e-10, "exact fit R2 {}", fit.r_squared);
    ensure!(fit.alpha_monthly.abs() <= 1e-10, "exact fit alpha {}", fit.alpha_monthly);

    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { mkt[i] });
    let f = ols(&x, &DVector::from_column_slice(&y)).map_err(|e| e.to_string())?;
    let hac0 = hac_covariance(&x, &f.residuals, &f.xtx_inv, 0);
    let white = white_covariance(&x, &f.residuals, &f.xtx_inv);
    let gap = (hac0 - white).abs().max();
    ensure!(gap <= 1e-10, "lag-0 HAC differs from White by {gap}");
    Ok(format!("alpha z = {za:.2}, beta z = {zb:.2}; exact fit clean; HAC(0) = White"))
}

fn fm_run(data: &SynthData, controls: &[FmControl]) -> Result<csci_core::analytics::FmReport, String> {
    let panel = score(data);
    let (names, sections) =
        build_cross_sections(&panel, &data.factors, controls, None).map_err(|e| e.to_string())?;
    fama_macbeth(&names, &sections).map_err(|e| e.to_string())
}

fn fm_oracle() -> Check {
    let base = SynthConfig::default();
    let linked = planted_scenario(Scenario::CsciReturnLink(0.01), &base).map_err(|e| e.to_string())?;
    let rep = fm_run(&linked, &[])?;
    let (slope, _) = rep.coefficient("csci").unwrap();
    ensure!((slope - 0.01).abs() <= 1e-10, "planted slope recovered as {slope}");
    let indep = planted_scenario(Scenario::Independent, &base).map_err(|e| e.to_string())?;
    let rep = fm_run(&indep, &[FmControl::LogSize])?;
    let (_, t) = rep.coefficient("csci").unwrap();
    ensure!(t.abs() < 3.0, "independent returns give t = {t}");
    Ok(format!("slope {slope:.10}; independent t = {t:.2}"))
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let key = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_csci"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "csci {} exited {:?}: {}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn determinism() -> Check {
    let t = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let root = tmp.path().join(run);
        let data = root.join("data");
        let out = root.join("out");
        let run_toml = data.join("run.toml");
        let (d, o, c) = (data.to_str().unwrap(), out.to_str().unwrap(), run_toml.to_str().unwrap());
        cli(&["synth", "--out", d, "--seed", "42"])?;
        for cmd in ["score", "map", "backtest", "fm"] {
            cli(&[cmd, "--config", c, "--output", o])?;
        }
        trees.push(tree(&root));
    }
    let (a, b) = (&trees[0], &trees[1]);
    ensure!(a.len() > 20, "only {} files produced", a.len());
    ensure!(a.keys().eq(b.keys()), "file sets differ");
    for (k, v) in a {
        ensure!(b[k] == *v, "{k} differs between runs");
    }
    within(t.elapsed(), 120.0, "end-to-end pipeline twice")?;
    Ok(format!("{} files byte-identical across two runs; {:.2}s", a.len(), t.elapsed().as_secs_f64()))
}

fn main() {
    let mut results: Vec<(&str, Check)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Check| {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match &r {
            Ok(m) => println!("PASS  {name}: {m}"),
            Err(m) => println!("FAIL  {name}: {m}"),
        }
        results.push((name, r));
    };

    run("scoring exactness", &mut scoring_exactness);
    run("zero propagation and bounds", &mut zero_propagation);

    let t = Instant::now();
    let large_data = generate(&large_config()).expect("large synthetic panel");
    let large = score(&large_data);
    let built = t.elapsed();

    run("look-ahead freedom", &mut || lookahead(&large, built));
    run("tau recovery", &mut tau_recovery);
    run("DJIM-MSCI equivalence", &mut || djim_msci(&large_data, &large));
    run("threshold monotonicity", &mut || threshold_monotonicity(&large));
    run("backtest accounting", &mut || backtest_accounting(&large));
    run("regression recovery", &mut regression_recovery);
    run("Fama-MacBeth oracle", &mut fm_oracle);
    run("determinism", &mut determinism);

    let failed = results.iter().filter(|(_, r)| r.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
