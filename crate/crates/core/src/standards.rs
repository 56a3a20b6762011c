//! Binary screening standards and their CSCI threshold equivalents.
//!
//! All standards are evaluated on one harmonized ratio panel; a rule's
//! `denominator_style` documents its native definition only.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvOut};
use crate::pipeline::ScoredPanel;
use crate::ratios::{DenominatorStyle, RatioVector};
use crate::scoring::{sector_factor, SectorConfig};
use crate::sector::{SectorExposure, SectorPolicies, DEFAULT_POLICY};

const THIRD: f64 = 1.0 / 3.0;

pub const DEFAULT_GRID_STEP: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardRule {
    pub name: String,
    pub debt_max: Option<f64>,
    pub cash_max: Option<f64>,
    pub rec_max: Option<f64>,
    pub impure_max: f64,
    /// Cap on the total non-permissible revenue share `q`.
    #[serde(default)]
    pub mixed_activity_max: Option<f64>,
    /// Cap on the revenue share from clearly prohibited activities.
    #[serde(default)]
    pub prohibited_activity_max: Option<f64>,
    #[serde(default)]
    pub denominator_style: DenominatorStyle,
    #[serde(default = "default_policy")]
    pub sector_policy: String,
}

fn default_policy() -> String {
    DEFAULT_POLICY.to_string()
}

impl StandardRule {
    fn simple(name: &str, debt: f64, cash: f64, rec: Option<f64>, style: DenominatorStyle) -> Self {
        StandardRule {
            name: name.to_string(),
            debt_max: Some(debt),
            cash_max: Some(cash),
            rec_max: rec,
            impure_max: 0.05,
            mixed_activity_max: None,
            prohibited_activity_max: None,
            denominator_style: style,
            sector_policy: default_policy(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let caps = [
            ("debt_max", self.debt_max),
            ("cash_max", self.cash_max),
            ("rec_max", self.rec_max),
            ("impure_max", Some(self.impure_max)),
            ("mixed_activity_max", self.mixed_activity_max),
            ("prohibited_activity_max", self.prohibited_activity_max),
        ];
        for (key, v) in caps {
            if let Some(v) = v {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::config(
                        format!("{}.{key}", self.name),
                        format!("threshold {v} outside (0, 1)"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Ratio and activity tests for one firm-month.
    pub fn passes(
        &self,
        ratios: Option<&RatioVector>,
        exposure: &SectorExposure,
        sector: &SectorConfig,
    ) -> bool {
        if !sector_gate(exposure, sector) {
            return false;
        }
        if self.mixed_activity_max.is_some_and(|m| exposure.q > m) {
            return false;
        }
        if self
            .prohibited_activity_max
            .is_some_and(|m| exposure.prohibited_share > m)
        {
            return false;
        }
        let Some(v) = ratios.filter(|v| v.valid) else {
            return false;
        };
        let within = |value: Option<f64>, cap: Option<f64>| match cap {
            None => true,
            Some(cap) => value.is_some_and(|x| x <= cap),
        };
        within(v.lev, self.debt_max)
            && within(v.cashr, self.cash_max)
            && within(v.rec, self.rec_max)
            && within(v.impure, Some(self.impure_max))
    }
}

/// Sector screen shared by all standards: not a core prohibited sector and
/// non-permissible revenue below the upper tolerance.
pub fn sector_gate(exposure: &SectorExposure, sector: &SectorConfig) -> bool {
    sector_factor(
        exposure.q,
        sector.lower,
        sector.upper,
        sector.delta,
        exposure.hard_prohibited,
    ) > 0.0
}

/// The six standards with every 33% cap read as one third.
pub fn default_rules() -> Vec<StandardRule> {
    use DenominatorStyle::*;
    let mut sc = StandardRule::simple("SCMalaysia", THIRD, THIRD, None, TotalAssets);
    sc.mixed_activity_max = Some(0.20);
    sc.prohibited_activity_max = Some(0.05);
    vec![
        StandardRule::simple("AAOIFI", 0.30, 0.30, None, MarketCap),
        StandardRule::simple("DJIM", THIRD, THIRD, Some(THIRD), MarketCap),
        StandardRule::simple("FTSE", THIRD, THIRD, Some(0.50), TotalAssets),
        StandardRule::simple("MSCI", THIRD, THIRD, Some(THIRD), TotalAssets),
        StandardRule::simple("SP", THIRD, THIRD, Some(0.49), MarketCap),
        sc,
    ]
}

/// Representative binary benchmark: one-third caps and 5% impure income.
pub fn binary_islamic_rule() -> StandardRule {
    StandardRule::simple("IslamicBinary", THIRD, THIRD, Some(THIRD), DenominatorStyle::MarketCap)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesFile {
    standard: Vec<StandardRule>,
}

pub fn rules_from_toml_str(text: &str) -> Result<Vec<StandardRule>> {
    let file: RulesFile =
        toml::from_str(text).map_err(|e| Error::config("standards", e.to_string()))?;
    for r in &file.standard {
        r.validate()?;
    }
    Ok(file.standard)
}

pub fn load_rules(path: &Path) -> Result<Vec<StandardRule>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    rules_from_toml_str(&text)
}

pub fn rules_to_toml(rules: &[StandardRule]) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        standard: &'a [StandardRule],
    }
    toml::to_string(&Out { standard: rules }).expect("rules serialize")
}

/// Pass indicator for every row of the panel, in row order.
pub fn evaluate_standard(
    rule: &StandardRule,
    panel: &ScoredPanel,
    policies: &SectorPolicies,
    sector: &SectorConfig,
) -> Result<Vec<bool>> {
    let policy = policies.get(&rule.sector_policy)?;
    Ok(panel
        .rows
        .iter()
        .map(|r| {
            let e = policy.exposure(&r.sector_code, r.q);
            rule.passes(panel.ratios_of(r), &e, sector)
        })
        .collect())
}

pub fn binary_islamic_benchmark_indicator(
    panel: &ScoredPanel,
    policies: &SectorPolicies,
    sector: &SectorConfig,
) -> Result<Vec<bool>> {
    evaluate_standard(&binary_islamic_rule(), panel, policies, sector)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingResult {
    pub standard: String,
    pub tau: f64,
    /// Share of passing observations with csci below `tau`.
    pub fn_rate: f64,
    /// Share of failing observations with csci at or above `tau`.
    pub fp_rate: f64,
    pub compliant_fraction: f64,
    pub avg_csci_compliant: f64,
    /// Joint misclassification probability at `tau`.
    pub loss: f64,
    pub n_obs: usize,
    pub n_excluded: usize,
}

/// Grid search for the cut `tau` minimizing
/// `P(pass, csci < tau) + P(fail, csci >= tau)`; ties go to the smallest `tau`.
pub fn fit_tau(
    standard: &str,
    pass: &[bool],
    csci: &[Option<f64>],
    grid_step: f64,
) -> Result<MappingResult> {
    assert_eq!(pass.len(), csci.len(), "pass and csci must align");
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::config("grid_step", format!("{grid_step} outside (0, 1]")));
    }
    let n_grid = (1.0 / grid_step).round() as usize;

    let mut passers = Vec::new();
    let mut failers = Vec::new();
    let mut n_excluded = 0;
    for (&p, c) in pass.iter().zip(csci) {
        match c {
            Some(c) if p => passers.push(*c),
            Some(c) => failers.push(*c),
            None => n_excluded += 1,
        }
    }
    if failers.is_empty() {
        return Err(Error::DegenerateStandard {
            standard: standard.to_string(),
            side: "passes",
        });
    }
    if passers.is_empty() {
        return Err(Error::DegenerateStandard {
            standard: standard.to_string(),
            side: "fails",
        });
    }
    passers.sort_by(f64::total_cmp);
    failers.sort_by(f64::total_cmp);

    let errors_at = |tau: f64| {
        let false_neg = passers.partition_point(|&c| c < tau);
        let false_pos = failers.len() - failers.partition_point(|&c| c < tau);
        (false_neg, false_pos)
    };
    let mut best = (usize::MAX, 0usize, (0usize, 0usize));
    for i in 0..=n_grid {
        let tau = i as f64 / n_grid as f64;
        let (fneg, fpos) = errors_at(tau);
        if fneg + fpos < best.0 {
            best = (fneg + fpos, i, (fneg, fpos));
        }
    }
    let (errors, i, (fneg, fpos)) = best;
    let n_obs = passers.len() + failers.len();
    Ok(MappingResult {
        standard: standard.to_string(),
        tau: i as f64 / n_grid as f64,
        fn_rate: fneg as f64 / passers.len() as f64,
        fp_rate: fpos as f64 / failers.len() as f64,
        compliant_fraction: passers.len() as f64 / n_obs as f64,
        avg_csci_compliant: passers.iter().sum::<f64>() / passers.len() as f64,
        loss: errors as f64 / n_obs as f64,
        n_obs,
        n_excluded,
    })
}

pub fn write_mapping_csv(results: &[MappingResult], path: &Path, comment: Option<&str>) -> Result<()> {
    let mut w = CsvOut::create(path, comment)?;
    w.row([
        "standard",
        "tau",
        "fn_rate",
        "fp_rate",
        "compliant_fraction",
        "avg_csci_compliant",
        "loss",
        "n_obs",
        "n_excluded",
    ])?;
    for m in results {
        w.row([
            m.standard.clone(),
            fmt_f64(m.tau),
            fmt_f64(m.fn_rate),
            fmt_f64(m.fp_rate),
            fmt_f64(m.compliant_fraction),
            fmt_f64(m.avg_csci_compliant),
            fmt_f64(m.loss),
            m.n_obs.to_string(),
            m.n_excluded.to_string(),
        ])?;
    }
    w.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassRate {
    pub standard: String,
    /// Pooled share of firm-months passing.
    pub fraction: f64,
    /// Time-series mean of the annual cross-sectional pass rates.
    pub mean_annual: f64,
    pub annual: BTreeMap<i32, f64>,
    pub n_obs: usize,
}

/// Pass rates over the rows with a non-missing csci.
pub fn pass_rate_table(
    rules: &[StandardRule],
    panel: &ScoredPanel,
    policies: &SectorPolicies,
    sector: &SectorConfig,
) -> Result<Vec<PassRate>> {
    let scored: Vec<usize> = (0..panel.rows.len())
        .filter(|&i| panel.rows[i].csci().is_some())
        .collect();
    if scored.is_empty() {
        return Err(Error::EmptyPanel("no scored firm-months for pass rates".into()));
    }
    let mut out = Vec::with_capacity(rules.len());
    for rule in rules {
        let pass = evaluate_standard(rule, panel, policies, sector)?;
        let mut by_year: BTreeMap<i32, (usize, usize)> = BTreeMap::new();
        let mut passed = 0;
        for &i in &scored {
            let e = by_year.entry(panel.rows[i].month.year()).or_default();
            e.1 += 1;
            if pass[i] {
                e.0 += 1;
                passed += 1;
            }
        }
        let annual: BTreeMap<i32, f64> = by_year
            .into_iter()
            .map(|(y, (p, n))| (y, p as f64 / n as f64))
            .collect();
        out.push(PassRate {
            standard: rule.name.clone(),
            fraction: passed as f64 / scored.len() as f64,
            mean_annual: annual.values().sum::<f64>() / annual.len() as f64,
            annual,
            n_obs: scored.len(),
        });
    }
    Ok(out)
}

pub fn write_pass_rates_csv(rates: &[PassRate], path: &Path, comment: Option<&str>) -> Result<()> {
    let mut w = CsvOut::create(path, comment)?;
    w.row(["standard", "pass_fraction", "mean_annual_pass_rate", "n_obs"])?;
    for r in rates {
        w.row([
            r.standard.clone(),
            fmt_f64(r.fraction),
            fmt_f64(r.mean_annual),
            r.n_obs.to_string(),
        ])?;
    }
    w.finish()
}

pub fn write_annual_pass_rates_csv(
    rates: &[PassRate],
    path: &Path,
    comment: Option<&str>,
) -> Result<()> {
    let mut w = CsvOut::create(path, comment)?;
    w.row(["standard", "year", "pass_rate"])?;
    for r in rates {
        for (y, v) in &r.annual {
            w.row([r.standard.clone(), y.to_string(), fmt_f64(*v)])?;
        }
    }
    w.finish()
}
