//! Loaded inputs to a scored firm-month panel.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::Month;
use crate::panel::{
    apply_eligibility, link_and_align, AccountingRecord, EligibilityConfig, FilterReport, FirmId,
    FirmMonthPanel, LinkConfig, LinkRecord, MarketObservation,
};
use crate::ratios::{cap_and_winsorize, compute_ratios, me_at_fye, RatioConfig, RatioVector};
use crate::scoring::{compute_csci, CsciRecord, ScoreConfig};
use crate::sector::{SectorExposure, SectorPolicies, SectorPolicy, DEFAULT_POLICY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub eligibility: EligibilityConfig,
    pub links: LinkConfig,
    pub ratios: RatioConfig,
    pub score: ScoreConfig,
    /// Sector policy used for the sectoral factor.
    pub sector_policy: String,
    pub start: Option<Month>,
    pub end: Option<Month>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            eligibility: EligibilityConfig::default(),
            links: LinkConfig::default(),
            ratios: RatioConfig::default(),
            score: ScoreConfig::default(),
            sector_policy: DEFAULT_POLICY.to_string(),
            start: None,
            end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRow {
    pub firm_id: FirmId,
    pub month: Month,
    pub market_equity: f64,
    pub total_return: f64,
    pub delisted: bool,
    pub sector_code: String,
    pub q: f64,
    pub exposure: SectorExposure,
    /// Index into [`ScoredPanel::ratios`].
    pub ratios: Option<usize>,
    pub record: CsciRecord,
}

impl ScoredRow {
    pub fn csci(&self) -> Option<f64> {
        self.record.csci
    }
}

#[derive(Debug, Clone)]
pub struct ScoredPanel {
    pub panel: FirmMonthPanel,
    /// Processed ratio vectors, parallel to `panel.accounting`.
    pub ratios: Vec<RatioVector>,
    /// Sorted by `(firm_id, month)`.
    pub rows: Vec<ScoredRow>,
    pub eligibility: FilterReport,
    by_month: BTreeMap<Month, Vec<usize>>,
    by_key: HashMap<(FirmId, Month), usize>,
}

impl ScoredPanel {
    pub fn from_parts(
        panel: FirmMonthPanel,
        ratios: Vec<RatioVector>,
        rows: Vec<ScoredRow>,
        eligibility: FilterReport,
    ) -> Self {
        let mut by_month: BTreeMap<Month, Vec<usize>> = BTreeMap::new();
        let mut by_key = HashMap::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            by_month.entry(r.month).or_default().push(i);
            by_key.insert((r.firm_id.clone(), r.month), i);
        }
        ScoredPanel {
            panel,
            ratios,
            rows,
            eligibility,
            by_month,
            by_key,
        }
    }

    pub fn ratios_of(&self, row: &ScoredRow) -> Option<&RatioVector> {
        row.ratios.map(|i| &self.ratios[i])
    }

    pub fn months(&self) -> impl Iterator<Item = Month> + '_ {
        self.by_month.keys().copied()
    }

    pub fn first_month(&self) -> Option<Month> {
        self.by_month.keys().next().copied()
    }

    pub fn last_month(&self) -> Option<Month> {
        self.by_month.keys().next_back().copied()
    }

    /// Row indices of one cross-section, in firm order.
    pub fn month_rows(&self, month: Month) -> &[usize] {
        self.by_month.get(&month).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn find(&self, firm: &FirmId, month: Month) -> Option<&ScoredRow> {
        self.by_key.get(&(firm.clone(), month)).map(|&i| &self.rows[i])
    }

    pub fn csci_records(&self) -> Vec<CsciRecord> {
        self.rows.iter().map(|r| r.record.clone()).collect()
    }
}

/// Eligibility, linking, ratios and scores in one pass.
pub fn score_panel(
    accounting: Vec<AccountingRecord>,
    market: Vec<MarketObservation>,
    links: &[LinkRecord],
    sectors: &SectorPolicies,
    cfg: &PipelineConfig,
) -> Result<ScoredPanel> {
    cfg.score.validate()?;
    if let (Some(s), Some(e)) = (cfg.start, cfg.end) {
        if e < s {
            return Err(Error::DateRange(format!("end {e} precedes start {s}")));
        }
    }
    let policy = sectors.get(&cfg.sector_policy)?;
    let (market, eligibility) = apply_eligibility(market, &cfg.eligibility);
    let panel = link_and_align(accounting, market, links, &cfg.links)?;
    let ratios = panel_ratios(&panel, &cfg.ratios);

    let rows: Vec<ScoredRow> = panel
        .rows
        .iter()
        .filter(|r| cfg.start.is_none_or(|s| r.month >= s) && cfg.end.is_none_or(|e| r.month <= e))
        .map(|r| {
            let exposure = policy.exposure(&r.market.sector_code, r.market.q_nonpermissible);
            let vector = r.accounting.map(|i| &ratios[i]);
            let record = compute_csci(&r.firm_id, r.month, vector, &exposure, &cfg.score);
            ScoredRow {
                firm_id: r.firm_id.clone(),
                month: r.month,
                market_equity: r.market.market_equity,
                total_return: r.total_return,
                delisted: r.delisted,
                sector_code: r.market.sector_code.clone(),
                q: r.market.q_nonpermissible,
                exposure,
                ratios: r.accounting,
                record,
            }
        })
        .collect();
    if rows.is_empty() {
        return Err(match (cfg.start, cfg.end) {
            (None, None) => Error::EmptyPanel("no eligible firm-months".into()),
            (s, e) => Error::DateRange(format!(
                "no firm-months between {} and {}",
                s.map(|m| m.to_string()).unwrap_or_else(|| "..".into()),
                e.map(|m| m.to_string()).unwrap_or_else(|| "..".into())
            )),
        });
    }
    Ok(ScoredPanel::from_parts(panel, ratios, rows, eligibility))
}

/// Processed ratio vectors for every linked fiscal year of the panel.
pub fn panel_ratios(panel: &FirmMonthPanel, cfg: &RatioConfig) -> Vec<RatioVector> {
    let mut me_series: HashMap<&FirmId, Vec<(Month, f64)>> = HashMap::new();
    for r in &panel.rows {
        me_series
            .entry(&r.firm_id)
            .or_default()
            .push((r.month, r.market.market_equity));
    }
    let mut ratios: Vec<RatioVector> = panel
        .accounting
        .iter()
        .map(|a| {
            let me = me_series
                .get(&a.market_firm_id)
                .and_then(|s| me_at_fye(s, a.record.fiscal_year_end));
            let mut v = compute_ratios(&a.record, me, cfg.style, cfg.cap);
            v.firm_id = a.market_firm_id.clone();
            v
        })
        .collect();
    cap_and_winsorize(&mut ratios, cfg);
    ratios
}

/// Sector exposures of every row under a named policy.
pub fn exposures_under(panel: &ScoredPanel, policy: &SectorPolicy) -> Vec<SectorExposure> {
    panel
        .rows
        .iter()
        .map(|r| policy.exposure(&r.sector_code, r.q))
        .collect()
}
