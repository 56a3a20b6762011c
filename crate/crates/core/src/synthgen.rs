//! Deterministic synthetic input panels.
//!
//! All randomness comes from one `ChaCha8Rng` stream seeded with
//! [`SynthConfig::seed`] and consumed in a fixed order: factors, sector
//! assignment, firm parameters, then firm by firm the monthly market path and
//! the December fundamentals. Every fiscal year ends in December.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analytics::{FactorRow, FactorSeries};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, fmt_opt, CsvOut};
use crate::month::Month;
use crate::panel::{AccountingRecord, FirmId, LinkRecord, MarketObservation};
use crate::pipeline::{score_panel, PipelineConfig};
use crate::sector::{SectorClass, SectorPolicies, SectorPolicy, DEFAULT_POLICY};

pub const PROHIBITED_CODE: &str = "6021";
pub const MIXED_CODE: &str = "7011";
pub const ADJACENT_CODE: &str = "5813";
pub const CLEAN_CODES: [&str; 4] = ["3571", "2834", "3674", "4911"];

/// Margin between planted passers and failers around an exact cut.
pub const CUT_MARGIN: f64 = 0.0005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorMix {
    pub prohibited: f64,
    pub mixed: f64,
    pub clean: f64,
}

impl Default for SectorMix {
    fn default() -> Self {
        SectorMix {
            prohibited: 0.10,
            mixed: 0.20,
            clean: 0.70,
        }
    }
}

/// Lognormal `median * exp(sigma * z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormal {
    pub median: f64,
    pub sigma: f64,
}

impl LogNormal {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.median * (self.sigma * normal(rng)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioParams {
    pub debt: LogNormal,
    pub cash: LogNormal,
    pub rec: LogNormal,
    pub impure: LogNormal,
    /// Log-scale dispersion of year-to-year changes around each firm's base.
    pub yearly_sigma: f64,
}

impl Default for RatioParams {
    fn default() -> Self {
        RatioParams {
            debt: LogNormal { median: 0.15, sigma: 0.9 },
            cash: LogNormal { median: 0.12, sigma: 0.9 },
            rec: LogNormal { median: 0.10, sigma: 0.8 },
            impure: LogNormal { median: 0.01, sigma: 1.0 },
            yearly_sigma: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.mean + self.sd * normal(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorParams {
    pub mkt_rf: MeanSd,
    pub smb: MeanSd,
    pub hml: MeanSd,
    pub rmw: MeanSd,
    pub cma: MeanSd,
    pub mom: MeanSd,
    pub rf: f64,
}

impl Default for FactorParams {
    fn default() -> Self {
        let ms = |mean, sd| MeanSd { mean, sd };
        FactorParams {
            mkt_rf: ms(0.006, 0.045),
            smb: ms(0.002, 0.03),
            hml: ms(0.002, 0.03),
            rmw: ms(0.003, 0.02),
            cma: ms(0.002, 0.02),
            mom: ms(0.005, 0.04),
            rf: 0.002,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_firms: usize,
    pub n_months: usize,
    pub seed: u64,
    pub start: Month,
    pub sector_mix: SectorMix,
    /// Upper bound of the uniform non-permissible share of mixed firms.
    pub mixed_q_max: f64,
    /// Upper bound of the uniform non-permissible share of clean firms.
    pub clean_q_max: f64,
    pub ratios: RatioParams,
    pub beta_min: f64,
    pub beta_max: f64,
    pub idio_vol: f64,
    pub factors: FactorParams,
    /// Monthly delisting probability.
    pub delisting_hazard: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_firms: 100,
            n_months: 120,
            seed: 42,
            start: Month::new(2000, 1).expect("valid month"),
            sector_mix: SectorMix::default(),
            mixed_q_max: 0.30,
            clean_q_max: 0.04,
            ratios: RatioParams::default(),
            beta_min: 0.6,
            beta_max: 1.4,
            idio_vol: 0.08,
            factors: FactorParams::default(),
            delisting_hazard: 0.002,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let m = &self.sector_mix;
        let parts = [m.prohibited, m.mixed, m.clean];
        if parts.iter().any(|p| !(*p >= 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "sector_mix",
                format!("proportions must be non-negative and sum to 1, got {parts:?}"),
            ));
        }
        if self.n_firms < 10 {
            return Err(Error::config("n_firms", "need at least 10 firms"));
        }
        if self.n_months == 0 {
            return Err(Error::config("n_months", "must be positive"));
        }
        if !(self.beta_min <= self.beta_max) {
            return Err(Error::config("beta_min", "must not exceed beta_max"));
        }
        if !(self.idio_vol >= 0.0) {
            return Err(Error::config("idio_vol", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.delisting_hazard) {
            return Err(Error::config("delisting_hazard", "must lie in [0, 1)"));
        }
        for (key, q) in [("mixed_q_max", self.mixed_q_max), ("clean_q_max", self.clean_q_max)] {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::config(key, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SynthConfig =
            toml::from_str(text).map_err(|e| Error::config("synth", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A generated input set, in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub accounting: Vec<AccountingRecord>,
    pub market: Vec<MarketObservation>,
    pub links: Vec<LinkRecord>,
    pub sectors: SectorPolicies,
    pub factors: FactorSeries,
    pub classes: BTreeMap<FirmId, SectorClass>,
}

impl SynthData {
    pub fn count_class(&self, class: SectorClass) -> usize {
        self.classes.values().filter(|c| **c == class).count()
    }

    /// Writes `accounting.csv`, `market.csv`, `links.csv`, `sectors.csv` and
    /// `factors.csv` into `dir`.
    pub fn write_inputs(&self, dir: &Path, comment: Option<&str>) -> Result<()> {
        let mut w = CsvOut::create(&dir.join("accounting.csv"), comment)?;
        w.row([
            "firm_id", "fye", "dltt", "dlc", "che", "ivao", "ivst", "rect", "impure_income",
            "sale", "at",
        ])?;
        for a in &self.accounting {
            w.row([
                a.firm_id.to_string(),
                a.fiscal_year_end.to_string(),
                fmt_opt(a.long_term_debt),
                fmt_opt(a.current_debt),
                fmt_opt(a.cash_equivalents),
                fmt_opt(a.other_investments),
                fmt_opt(a.short_term_investments),
                fmt_opt(a.receivables),
                fmt_opt(a.impure_income),
                fmt_opt(a.sales),
                fmt_opt(a.total_assets),
            ])?;
        }
        w.finish()?;

        let mut w = CsvOut::create(&dir.join("market.csv"), comment)?;
        w.row([
            "firm_id", "month", "prc", "ret", "dlret", "shrout", "sector_code", "q", "shrcd",
            "exchcd",
        ])?;
        for m in &self.market {
            w.row([
                m.firm_id.to_string(),
                m.month.to_string(),
                fmt_opt(m.price),
                fmt_opt(m.total_return),
                fmt_opt(m.delisting_return),
                fmt_f64(m.shares_outstanding),
                m.sector_code.clone(),
                fmt_f64(m.q_nonpermissible),
                m.share_code.to_string(),
                m.exchange_code.to_string(),
            ])?;
        }
        w.finish()?;

        let mut w = CsvOut::create(&dir.join("links.csv"), comment)?;
        w.row([
            "accounting_firm_id",
            "market_firm_id",
            "link_start",
            "link_end",
            "link_type",
            "link_primacy",
        ])?;
        for l in &self.links {
            w.row([
                l.accounting_firm_id.to_string(),
                l.market_firm_id.to_string(),
                l.link_start.to_string(),
                l.link_end.map(|d| d.to_string()).unwrap_or_default(),
                l.link_type.clone(),
                l.link_primacy.clone(),
            ])?;
        }
        w.finish()?;

        let mut w = CsvOut::create(&dir.join("sectors.csv"), comment)?;
        w.row(["policy", "sector_code", "class"])?;
        for (name, policy) in self.sectors.iter() {
            for (code, class) in policy.iter() {
                w.row([name, code, class.as_str()])?;
            }
        }
        w.finish()?;

        let mut w = CsvOut::create(&dir.join("factors.csv"), comment)?;
        w.row(["month", "mkt_rf", "smb", "hml", "rmw", "cma", "mom", "rf"])?;
        for f in self.factors.rows() {
            w.row([
                f.month.to_string(),
                fmt_f64(f.mkt_rf),
                fmt_f64(f.smb),
                fmt_f64(f.hml),
                fmt_f64(f.rmw),
                fmt_f64(f.cma),
                fmt_f64(f.mom),
                fmt_f64(f.rf),
            ])?;
        }
        w.finish()
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Integer counts proportional to `shares` summing to `n` (largest remainder,
/// ties to the earlier entry).
pub fn largest_remainder(shares: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = shares.iter().map(|s| s * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = n.saturating_sub(counts.iter().sum());
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

pub fn default_sector_policies() -> SectorPolicies {
    let mut p = SectorPolicy::new();
    p.insert(PROHIBITED_CODE, SectorClass::Prohibited);
    p.insert(MIXED_CODE, SectorClass::Mixed);
    p.insert(ADJACENT_CODE, SectorClass::Adjacent);
    for c in CLEAN_CODES {
        p.insert(c, SectorClass::Permissible);
    }
    let mut ps = SectorPolicies::new();
    ps.insert(DEFAULT_POLICY, p);
    ps
}

/// Balance-sheet ratio targets of one firm-year, relative to December ME.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Targets {
    lev: f64,
    cash: f64,
    rec: f64,
    impure: f64,
}

struct FirmPlan {
    id: FirmId,
    class: SectorClass,
    code: String,
    q: f64,
    beta: f64,
    shares: f64,
    price0: f64,
    share_code: i32,
    exchange_code: i32,
    base: Targets,
}

fn plan_firms(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<FirmPlan> {
    let m = &cfg.sector_mix;
    let counts = largest_remainder(&[m.prohibited, m.mixed, m.clean], cfg.n_firms);
    let mut classes = Vec::with_capacity(cfg.n_firms);
    classes.extend(std::iter::repeat_n(SectorClass::Prohibited, counts[0]));
    for i in 0..counts[1] {
        classes.push(if i % 2 == 0 {
            SectorClass::Mixed
        } else {
            SectorClass::Adjacent
        });
    }
    classes.extend(std::iter::repeat_n(SectorClass::Permissible, counts[2]));
    classes.shuffle(rng);

    let width = cfg.n_firms.to_string().len().max(4);
    classes
        .into_iter()
        .enumerate()
        .map(|(i, class)| {
            let (code, q) = match class {
                SectorClass::Prohibited => (PROHIBITED_CODE.to_string(), rng.random::<f64>()),
                SectorClass::Mixed => (MIXED_CODE.to_string(), cfg.mixed_q_max * rng.random::<f64>()),
                SectorClass::Adjacent => {
                    (ADJACENT_CODE.to_string(), cfg.mixed_q_max * rng.random::<f64>())
                }
                SectorClass::Permissible => (
                    CLEAN_CODES[rng.random_range(0..CLEAN_CODES.len())].to_string(),
                    cfg.clean_q_max * rng.random::<f64>(),
                ),
            };
            let beta = cfg.beta_min + (cfg.beta_max - cfg.beta_min) * rng.random::<f64>();
            let shares = f64::from(rng.random_range(1_000u32..50_000));
            let price0 = 20.0 * (0.5 * normal(rng)).exp();
            let share_code = if rng.random::<bool>() { 10 } else { 11 };
            let exchange_code = rng.random_range(1..=3);
            let r = &cfg.ratios;
            let base = Targets {
                lev: r.debt.draw(rng),
                cash: r.cash.draw(rng),
                rec: r.rec.draw(rng),
                impure: r.impure.draw(rng),
            };
            FirmPlan {
                id: FirmId(format!("F{i:0width$}")),
                class,
                code,
                q,
                beta,
                shares,
                price0,
                share_code,
                exchange_code,
                base,
            }
        })
        .collect()
}

fn gen_factors(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<FactorRow> {
    let f = &cfg.factors;
    (0..cfg.n_months)
        .map(|t| FactorRow {
            month: cfg.start.add(t as i32),
            mkt_rf: f.mkt_rf.draw(rng),
            smb: f.smb.draw(rng),
            hml: f.hml.draw(rng),
            rmw: f.rmw.draw(rng),
            cma: f.cma.draw(rng),
            mom: f.mom.draw(rng),
            rf: f.rf,
        })
        .collect()
}

fn accounting_from_targets(firm: &FirmId, fye: NaiveDate, me: f64, t: Targets, sale_mult: f64, at_mult: f64) -> AccountingRecord {
    let debt = t.lev * me;
    let cash = t.cash * me;
    let sale = sale_mult * me;
    AccountingRecord {
        firm_id: firm.clone(),
        fiscal_year_end: fye,
        long_term_debt: Some(0.7 * debt),
        current_debt: Some(0.3 * debt),
        cash_equivalents: Some(0.6 * cash),
        other_investments: Some(0.1 * cash),
        short_term_investments: Some(0.3 * cash),
        receivables: Some(t.rec * me),
        impure_income: Some(t.impure * sale),
        sales: Some(sale),
        total_assets: Some(at_mult * me),
    }
}

type TargetFn<'a> = dyn FnMut(&mut ChaCha8Rng, usize, usize, &Targets) -> Targets + 'a;

fn generate_with(cfg: &SynthConfig, rng: &mut ChaCha8Rng, targets: &mut TargetFn<'_>) -> Result<SynthData> {
    cfg.validate()?;
    let factors = gen_factors(cfg, rng);
    let plans = plan_firms(cfg, rng);
    let mut market = Vec::with_capacity(cfg.n_firms * cfg.n_months);
    let mut accounting = Vec::new();
    let yearly = cfg.ratios.yearly_sigma;

    for (fi, p) in plans.iter().enumerate() {
        let mut price = p.price0;
        let mut year_idx = 0;
        for (t, f) in factors.iter().enumerate() {
            let z = normal(rng);
            let ret = if t == 0 {
                0.0
            } else {
                (f.rf + p.beta * f.mkt_rf + cfg.idio_vol * z).max(-0.9)
            };
            price *= 1.0 + ret;
            let delist = t > 0 && rng.random::<f64>() < cfg.delisting_hazard;
            let dlret = delist.then(|| (-0.3 + 0.1 * normal(rng)).clamp(-1.0, 0.5));
            market.push(MarketObservation {
                firm_id: p.id.clone(),
                month: f.month,
                price: Some(price),
                total_return: Some(ret),
                delisting_return: dlret,
                shares_outstanding: p.shares,
                market_equity: MarketObservation::market_equity_of(Some(price), p.shares),
                sector_code: p.code.clone(),
                q_nonpermissible: p.q,
                share_code: p.share_code,
                exchange_code: p.exchange_code,
            });
            if f.month.month() == 12 {
                let drift = |x: f64, rng: &mut ChaCha8Rng| x * (yearly * normal(rng)).exp();
                let jittered = Targets {
                    lev: drift(p.base.lev, rng),
                    cash: drift(p.base.cash, rng),
                    rec: drift(p.base.rec, rng),
                    impure: drift(p.base.impure, rng),
                };
                let t = targets(rng, fi, year_idx, &jittered);
                let sale_mult = 0.5 + 1.5 * rng.random::<f64>();
                let at_mult = 0.8 + 2.2 * rng.random::<f64>();
                let me = MarketObservation::market_equity_of(Some(price), p.shares);
                accounting.push(accounting_from_targets(
                    &p.id,
                    f.month.last_day(),
                    me,
                    t,
                    sale_mult,
                    at_mult,
                ));
                year_idx += 1;
            }
            if delist {
                break;
            }
        }
    }

    let links = plans
        .iter()
        .map(|p| LinkRecord {
            accounting_firm_id: p.id.clone(),
            market_firm_id: p.id.clone(),
            link_start: NaiveDate::from_ymd_opt(1900, 1, 1).expect("valid date"),
            link_end: None,
            link_type: "LC".into(),
            link_primacy: "P".into(),
        })
        .collect();
    Ok(SynthData {
        accounting,
        market,
        links,
        sectors: default_sector_policies(),
        factors: FactorSeries::new(factors),
        classes: plans.iter().map(|p| (p.id.clone(), p.class)).collect(),
    })
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    generate_with(cfg, &mut rng, &mut |_, _, _, t| *t)
}

/// Planted scenarios with analytically known outcomes under the default
/// score configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    /// Firms pass the one-third standards iff their csci is at least `tau`;
    /// csci stays at least [`CUT_MARGIN`] away from `tau`.
    ExactCut(f64),
    /// Next-month returns equal `rf + common shock + slope * csci`.
    CsciReturnLink(f64),
    /// Mutually independent returns and scores.
    Independent,
    AllPass,
    AllFail,
    /// Clean firms whose leverage rises along the firm index, so csci falls
    /// monotonically from 1 to 0 and stays constant over time.
    MonotoneRatioGrid,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::ExactCut(t) => write!(f, "exact_cut:{}", fmt_f64(*t)),
            Scenario::CsciReturnLink(s) => write!(f, "csci_return_link:{}", fmt_f64(*s)),
            Scenario::Independent => f.write_str("independent"),
            Scenario::AllPass => f.write_str("all_pass"),
            Scenario::AllFail => f.write_str("all_fail"),
            Scenario::MonotoneRatioGrid => f.write_str("monotone_ratio_grid"),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.trim().split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s.trim(), None),
        };
        let num = || -> Result<f64> {
            arg.and_then(|a| a.trim().parse().ok())
                .ok_or_else(|| Error::UnknownScenario(format!("{s} (numeric argument required)")))
        };
        Ok(match head {
            "exact_cut" => Scenario::ExactCut(num()?),
            "csci_return_link" => Scenario::CsciReturnLink(num()?),
            "independent" => Scenario::Independent,
            "all_pass" => Scenario::AllPass,
            "all_fail" => Scenario::AllFail,
            "monotone_ratio_grid" => Scenario::MonotoneRatioGrid,
            _ => return Err(Error::UnknownScenario(s.to_string())),
        })
    }
}

fn only(class: &str) -> SectorMix {
    match class {
        "prohibited" => SectorMix { prohibited: 1.0, mixed: 0.0, clean: 0.0 },
        _ => SectorMix { prohibited: 0.0, mixed: 0.0, clean: 1.0 },
    }
}

pub fn planted_scenario(kind: Scenario, base: &SynthConfig) -> Result<SynthData> {
    let mut cfg = base.clone();
    cfg.delisting_hazard = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let third = 1.0 / 3.0;
    match kind {
        Scenario::ExactCut(tau) => {
            if !(tau > 0.05 && tau <= 0.95) {
                return Err(Error::config("exact_cut", format!("tau {tau} outside (0.05, 0.95]")));
            }
            cfg.sector_mix = only("clean");
            cfg.clean_q_max = 0.0;
            let mut data = generate_with(&cfg, &mut rng, &mut |rng, firm, _, _| {
                let lev = 0.30 * rng.random::<f64>();
                let cash = 0.30 * rng.random::<f64>();
                // Firm 0 and 1 sit on the margins; the rest split at random.
                let pass = match firm {
                    0 => false,
                    1 => true,
                    _ => rng.random::<bool>(),
                };
                let u = match firm {
                    0 => tau - CUT_MARGIN,
                    1 => tau + CUT_MARGIN,
                    _ if pass => tau + CUT_MARGIN + (1.0 - tau - CUT_MARGIN) * rng.random::<f64>(),
                    _ => 0.01 + (tau - CUT_MARGIN - 0.01) * rng.random::<f64>(),
                };
                // Equal weights and unit sector factor: csci = u.
                if pass {
                    Targets { lev, cash, rec: 0.33 * rng.random::<f64>(), impure: 0.05 - 0.025 * u * u }
                } else {
                    Targets { lev, cash, rec: 0.5 - 0.17 * u * u, impure: 0.0 }
                }
            })?;
            flatten_q(&mut data);
            Ok(data)
        }
        Scenario::CsciReturnLink(slope) => csci_return_link(&cfg, &mut rng, Some(slope)),
        Scenario::Independent => csci_return_link(&cfg, &mut rng, None),
        Scenario::AllPass => {
            cfg.sector_mix = only("clean");
            cfg.clean_q_max = 0.0;
            generate_with(&cfg, &mut rng, &mut |rng, _, _, _| Targets {
                lev: 0.2 * rng.random::<f64>(),
                cash: 0.2 * rng.random::<f64>(),
                rec: 0.2 * rng.random::<f64>(),
                impure: 0.02 * rng.random::<f64>(),
            })
        }
        Scenario::AllFail => {
            cfg.sector_mix = only("prohibited");
            generate_with(&cfg, &mut rng, &mut |_, _, _, t| *t)
        }
        Scenario::MonotoneRatioGrid => {
            cfg.sector_mix = only("clean");
            cfg.clean_q_max = 0.0;
            let n = cfg.n_firms;
            generate_with(&cfg, &mut rng, &mut |_, firm, _, _| {
                let s = firm as f64 / (n - 1) as f64;
                Targets { lev: 0.30 + s * (third - 0.30), cash: 0.1, rec: 0.1, impure: 0.01 }
            })
        }
    }
}

fn flatten_q(data: &mut SynthData) {
    for m in &mut data.market {
        m.q_nonpermissible = 0.0;
    }
}

/// Constant prices, so scores do not depend on returns; then
/// `r_{t+1} = rf + e_{t+1} + slope * csci_t` with a common shock `e`, or
/// independent idiosyncratic noise when `slope` is `None`.
fn csci_return_link(cfg: &SynthConfig, rng: &mut ChaCha8Rng, slope: Option<f64>) -> Result<SynthData> {
    let mut data = generate_with(cfg, rng, &mut |_, _, _, t| *t)?;
    let mut first_price: BTreeMap<FirmId, f64> = BTreeMap::new();
    for m in &mut data.market {
        let p = *first_price.entry(m.firm_id.clone()).or_insert(m.price.unwrap_or(1.0));
        m.price = Some(p);
        m.market_equity = MarketObservation::market_equity_of(Some(p), m.shares_outstanding);
        m.total_return = Some(0.0);
    }
    let scored = score_panel(
        data.accounting.clone(),
        data.market.clone(),
        &data.links,
        &data.sectors,
        &PipelineConfig::default(),
    )?;
    let shocks: BTreeMap<Month, f64> = data
        .factors
        .rows()
        .map(|f| (f.month, 0.04 * normal(rng)))
        .collect();
    for m in &mut data.market {
        let rf = data.factors.get(m.month).map(|f| f.rf).unwrap_or(0.0);
        let r = match slope {
            Some(slope) => {
                let prev = scored
                    .find(&m.firm_id, m.month.pred())
                    .and_then(|r| r.csci())
                    .unwrap_or(0.0);
                rf + shocks[&m.month] + slope * prev
            }
            None => rf + cfg.idio_vol * normal(rng),
        };
        m.total_return = Some(r);
    }
    Ok(data)
}
