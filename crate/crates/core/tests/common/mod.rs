#![allow(dead_code)]

use chrono::NaiveDate;
use csci_core::month::Month;
use csci_core::panel::{FilterReport, FirmId, FirmMonthPanel};
use csci_core::pipeline::{score_panel, PipelineConfig, ScoredPanel, ScoredRow};
use csci_core::ratios::{DenominatorStyle, RatioVector};
use csci_core::scoring::CsciRecord;
use csci_core::sector::{SectorClass, SectorExposure};
use csci_core::synthgen::SynthData;

pub fn month(s: &str) -> Month {
    s.parse().unwrap()
}

pub fn score(data: &SynthData) -> ScoredPanel {
    score_panel(
        data.accounting.clone(),
        data.market.clone(),
        &data.links,
        &data.sectors,
        &PipelineConfig::default(),
    )
    .unwrap()
}

/// Hand-made firm-month for portfolio tests.
pub struct Cell {
    pub firm: &'static str,
    pub month: &'static str,
    pub csci: Option<f64>,
    pub me: f64,
    pub ret: f64,
}

pub fn cell(firm: &'static str, month: &'static str, csci: Option<f64>, me: f64, ret: f64) -> Cell {
    Cell { firm, month, csci, me, ret }
}

pub fn panel_of(cells: &[Cell]) -> ScoredPanel {
    let mut ratios = Vec::new();
    let mut rows: Vec<ScoredRow> = cells
        .iter()
        .map(|c| {
            let firm = FirmId::new(c.firm);
            let m = month(c.month);
            ratios.push(RatioVector {
                firm_id: firm.clone(),
                fiscal_year_end: NaiveDate::from_ymd_opt(1999, 12, 31).unwrap(),
                lev: Some(0.1),
                cashr: Some(0.2),
                rec: Some(0.3),
                impure: Some(0.01),
                style: DenominatorStyle::MarketCap,
                me_at_fye: Some(c.me),
                valid: true,
                reason: None,
            });
            ScoredRow {
                firm_id: firm.clone(),
                month: m,
                market_equity: c.me,
                total_return: c.ret,
                delisted: false,
                sector_code: "3571".into(),
                q: 0.0,
                exposure: SectorExposure {
                    class: SectorClass::Permissible,
                    hard_prohibited: false,
                    q: 0.0,
                    prohibited_share: 0.0,
                },
                ratios: Some(ratios.len() - 1),
                record: CsciRecord {
                    firm_id: firm,
                    month: m,
                    c_debt: None,
                    c_cash: None,
                    c_rec: None,
                    c_impure: None,
                    b_sector: 1.0,
                    f_financial: c.csci,
                    csci: c.csci,
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| a.firm_id.cmp(&b.firm_id).then(a.month.cmp(&b.month)));
    ScoredPanel::from_parts(FirmMonthPanel::default(), ratios, rows, FilterReport::default())
}
