//! CSV loaders for the panel inputs.
//!
//! Headers are matched by name. Rows that fail type checks are rejected with
//! a [`Diagnostic`]; duplicate primary keys abort the load.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use super::{AccountingRecord, FirmId, LinkRecord, MarketObservation};
use crate::analytics::{FactorRow, FactorSeries};
use crate::error::{Error, Result};
use crate::io::open_reader;
use crate::month::Month;
use crate::sector::{SectorClass, SectorPolicies};

/// Row-level parse problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub file: String,
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.file, self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputPaths {
    pub accounting: PathBuf,
    pub market: PathBuf,
    pub links: PathBuf,
    pub sectors: PathBuf,
    pub factors: PathBuf,
    pub controls: Option<PathBuf>,
}

impl InputPaths {
    /// Conventional file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        InputPaths {
            accounting: dir.join("accounting.csv"),
            market: dir.join("market.csv"),
            links: dir.join("links.csv"),
            sectors: dir.join("sectors.csv"),
            factors: dir.join("factors.csv"),
            controls: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RawInputs {
    pub accounting: Vec<AccountingRecord>,
    pub market: Vec<MarketObservation>,
    pub links: Vec<LinkRecord>,
    pub sectors: SectorPolicies,
    pub factors: FactorSeries,
    pub controls: Option<ControlTable>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Extra firm-month characteristics keyed by column name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlTable {
    pub names: Vec<String>,
    pub values: HashMap<(FirmId, Month), Vec<Option<f64>>>,
}

impl ControlTable {
    pub fn get(&self, firm: &FirmId, month: Month, name: &str) -> Option<f64> {
        let col = self.names.iter().position(|n| n == name)?;
        self.values.get(&(firm.clone(), month))?.get(col).copied()?
    }
}

pub fn load_inputs(paths: &InputPaths) -> Result<RawInputs> {
    let mut diagnostics = Vec::new();
    let accounting = load_accounting(&paths.accounting, &mut diagnostics)?;
    let market = load_market(&paths.market, &mut diagnostics)?;
    let links = load_links(&paths.links, &mut diagnostics)?;
    let sectors = load_sectors(&paths.sectors, &mut diagnostics)?;
    let factors = load_factors(&paths.factors, &mut diagnostics)?;
    let controls = match &paths.controls {
        Some(p) => Some(load_controls(p, &mut diagnostics)?),
        None => None,
    };
    Ok(RawInputs {
        accounting,
        market,
        links,
        sectors,
        factors,
        controls,
        diagnostics,
    })
}

struct Table {
    path: PathBuf,
    columns: HashMap<String, usize>,
    headers: Vec<String>,
    reader: csv::Reader<std::fs::File>,
}

impl Table {
    fn open(path: &Path, required: &[&str]) -> Result<Self> {
        let mut reader = open_reader(path)?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| Error::MalformedHeader {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
            .iter()
            .map(|h| h.trim().to_ascii_lowercase())
            .collect();
        let mut columns = HashMap::new();
        for (i, h) in headers.iter().enumerate() {
            if columns.insert(h.clone(), i).is_some() {
                return Err(Error::MalformedHeader {
                    path: path.to_path_buf(),
                    message: format!("repeated column `{h}`"),
                });
            }
        }
        let missing: Vec<&str> = required
            .iter()
            .copied()
            .filter(|c| !columns.contains_key(*c))
            .collect();
        if !missing.is_empty() {
            return Err(Error::MalformedHeader {
                path: path.to_path_buf(),
                message: format!("missing columns: {}", missing.join(", ")),
            });
        }
        Ok(Table {
            path: path.to_path_buf(),
            columns,
            headers,
            reader,
        })
    }

    fn file_name(&self) -> String {
        self.path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    /// Iterate records as `(line, row)`; CSV-level errors become diagnostics.
    fn for_each(
        &mut self,
        diagnostics: &mut Vec<Diagnostic>,
        mut f: impl FnMut(u64, Row<'_>) -> std::result::Result<(), String>,
    ) {
        let file = self.file_name();
        let columns = &self.columns;
        for rec in self.reader.records() {
            match rec {
                Ok(rec) => {
                    let line = rec.position().map(|p| p.line()).unwrap_or(0);
                    if let Err(message) = f(line, Row { rec: &rec, columns }) {
                        diagnostics.push(Diagnostic {
                            file: file.clone(),
                            line,
                            message,
                        });
                    }
                }
                Err(e) => diagnostics.push(Diagnostic {
                    file: file.clone(),
                    line: e.position().map(|p| p.line()).unwrap_or(0),
                    message: e.to_string(),
                }),
            }
        }
    }
}

struct Row<'a> {
    rec: &'a csv::StringRecord,
    columns: &'a HashMap<String, usize>,
}

fn is_missing(s: &str) -> bool {
    matches!(s, "" | "NA" | "na" | "NaN" | "nan" | ".")
}

impl Row<'_> {
    fn raw(&self, col: &str) -> &str {
        self.columns
            .get(col)
            .and_then(|&i| self.rec.get(i))
            .unwrap_or("")
            .trim()
    }

    fn text(&self, col: &str) -> std::result::Result<String, String> {
        let s = self.raw(col);
        if s.is_empty() {
            Err(format!("empty `{col}`"))
        } else {
            Ok(s.to_string())
        }
    }

    fn opt_f64(&self, col: &str) -> std::result::Result<Option<f64>, String> {
        let s = self.raw(col);
        if is_missing(s) {
            return Ok(None);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => Err(format!("non-numeric `{col}` value `{s}`")),
        }
    }

    fn f64(&self, col: &str) -> std::result::Result<f64, String> {
        self.opt_f64(col)?
            .ok_or_else(|| format!("missing `{col}`"))
    }

    fn i32(&self, col: &str) -> std::result::Result<i32, String> {
        let s = self.raw(col);
        s.parse::<i32>()
            .or_else(|_| match s.parse::<f64>() {
                Ok(v) if v.fract() == 0.0 => Ok(v as i32),
                _ => Err(()),
            })
            .map_err(|_| format!("non-integer `{col}` value `{s}`"))
    }

    fn date(&self, col: &str) -> std::result::Result<NaiveDate, String> {
        let s = self.raw(col);
        NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| format!("invalid date `{col}` `{s}`"))
    }

    fn opt_date(&self, col: &str) -> std::result::Result<Option<NaiveDate>, String> {
        if is_missing(self.raw(col)) {
            Ok(None)
        } else {
            self.date(col).map(Some)
        }
    }

    fn month(&self, col: &str) -> std::result::Result<Month, String> {
        self.raw(col).parse::<Month>().map_err(|e| e.to_string())
    }
}

pub fn load_accounting(
    path: &Path,
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<Vec<AccountingRecord>> {
    let mut t = Table::open(
        path,
        &[
            "firm_id",
            "fye",
            "dltt",
            "dlc",
            "che",
            "ivao",
            "ivst",
            "rect",
            "impure_income",
            "sale",
            "at",
        ],
    )?;
    let mut out = Vec::new();
    t.for_each(diagnostics, |_, r| {
        let rec = AccountingRecord {
            firm_id: FirmId(r.text("firm_id")?),
            fiscal_year_end: r.date("fye")?,
            long_term_debt: r.opt_f64("dltt")?,
            current_debt: r.opt_f64("dlc")?,
            cash_equivalents: r.opt_f64("che")?,
            other_investments: r.opt_f64("ivao")?,
            short_term_investments: r.opt_f64("ivst")?,
            receivables: r.opt_f64("rect")?,
            impure_income: r.opt_f64("impure_income")?,
            sales: r.opt_f64("sale")?,
            total_assets: r.opt_f64("at")?,
        };
        if rec.total_assets.is_some_and(|a| a < 0.0) {
            return Err("negative total assets".into());
        }
        out.push(rec);
        Ok(())
    });
    let mut seen = BTreeSet::new();
    for r in &out {
        if !seen.insert((&r.firm_id, r.fiscal_year_end)) {
            return Err(Error::DuplicateKey {
                table: "accounting",
                key: format!("({}, {})", r.firm_id, r.fiscal_year_end),
            });
        }
    }
    Ok(out)
}

pub fn load_market(
    path: &Path,
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<Vec<MarketObservation>> {
    let mut t = Table::open(
        path,
        &[
            "firm_id",
            "month",
            "prc",
            "ret",
            "dlret",
            "shrout",
            "sector_code",
            "q",
            "shrcd",
            "exchcd",
        ],
    )?;
    let mut out = Vec::new();
    t.for_each(diagnostics, |_, r| {
        let price = r.opt_f64("prc")?;
        let shares = r.f64("shrout")?;
        if shares < 0.0 {
            return Err("negative shares outstanding".into());
        }
        let q = r.f64("q")?;
        if !(0.0..=1.0).contains(&q) {
            return Err(format!("q = {q} outside [0, 1]"));
        }
        out.push(MarketObservation {
            firm_id: FirmId(r.text("firm_id")?),
            month: r.month("month")?,
            price,
            total_return: r.opt_f64("ret")?,
            delisting_return: r.opt_f64("dlret")?,
            shares_outstanding: shares,
            market_equity: MarketObservation::market_equity_of(price, shares),
            sector_code: r.text("sector_code")?,
            q_nonpermissible: q,
            share_code: r.i32("shrcd")?,
            exchange_code: r.i32("exchcd")?,
        });
        Ok(())
    });
    let mut seen = BTreeSet::new();
    for r in &out {
        if !seen.insert((&r.firm_id, r.month)) {
            return Err(Error::DuplicateKey {
                table: "market",
                key: format!("({}, {})", r.firm_id, r.month),
            });
        }
    }
    Ok(out)
}

pub fn load_links(path: &Path, diagnostics: &mut Vec<Diagnostic>) -> Result<Vec<LinkRecord>> {
    let mut t = Table::open(
        path,
        &[
            "accounting_firm_id",
            "market_firm_id",
            "link_start",
            "link_end",
            "link_type",
            "link_primacy",
        ],
    )?;
    let mut out = Vec::new();
    t.for_each(diagnostics, |_, r| {
        out.push(LinkRecord {
            accounting_firm_id: FirmId(r.text("accounting_firm_id")?),
            market_firm_id: FirmId(r.text("market_firm_id")?),
            link_start: r.date("link_start")?,
            link_end: r.opt_date("link_end")?,
            link_type: r.text("link_type")?.to_ascii_uppercase(),
            link_primacy: r.text("link_primacy")?.to_ascii_uppercase(),
        });
        Ok(())
    });
    Ok(out)
}

/// `sectors.csv`: `policy, sector_code, class`.
pub fn load_sectors(path: &Path, diagnostics: &mut Vec<Diagnostic>) -> Result<SectorPolicies> {
    let mut t = Table::open(path, &["policy", "sector_code", "class"])?;
    let mut policies = SectorPolicies::new();
    let mut seen = BTreeSet::new();
    let mut dup = None;
    t.for_each(diagnostics, |_, r| {
        let policy = r.text("policy")?;
        let code = r.text("sector_code")?;
        let class: SectorClass = r.raw("class").parse()?;
        if !seen.insert((policy.clone(), code.clone())) && dup.is_none() {
            dup = Some(format!("({policy}, {code})"));
        }
        policies.entry(&policy).insert(code, class);
        Ok(())
    });
    if let Some(key) = dup {
        return Err(Error::DuplicateKey {
            table: "sectors",
            key,
        });
    }
    Ok(policies)
}

pub fn load_factors(path: &Path, diagnostics: &mut Vec<Diagnostic>) -> Result<FactorSeries> {
    let mut t = Table::open(
        path,
        &["month", "mkt_rf", "smb", "hml", "rmw", "cma", "mom", "rf"],
    )?;
    let mut rows: BTreeMap<Month, FactorRow> = BTreeMap::new();
    let mut dup = None;
    t.for_each(diagnostics, |_, r| {
        let month = r.month("month")?;
        let row = FactorRow {
            month,
            mkt_rf: r.f64("mkt_rf")?,
            smb: r.f64("smb")?,
            hml: r.f64("hml")?,
            rmw: r.f64("rmw")?,
            cma: r.f64("cma")?,
            mom: r.f64("mom")?,
            rf: r.f64("rf")?,
        };
        if rows.insert(month, row).is_some() && dup.is_none() {
            dup = Some(month);
        }
        Ok(())
    });
    if let Some(m) = dup {
        return Err(Error::DuplicateKey {
            table: "factors",
            key: m.to_string(),
        });
    }
    Ok(FactorSeries::new(rows.into_values().collect()))
}

/// `controls.csv`: `firm_id, month` followed by any numeric columns.
pub fn load_controls(path: &Path, diagnostics: &mut Vec<Diagnostic>) -> Result<ControlTable> {
    let mut t = Table::open(path, &["firm_id", "month"])?;
    let names: Vec<String> = t
        .headers
        .iter()
        .filter(|h| *h != "firm_id" && *h != "month")
        .cloned()
        .collect();
    let mut values = HashMap::new();
    let mut dup = None;
    t.for_each(diagnostics, |_, r| {
        let key = (FirmId(r.text("firm_id")?), r.month("month")?);
        let row = names
            .iter()
            .map(|n| r.opt_f64(n))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if values.contains_key(&key) && dup.is_none() {
            dup = Some(format!("({}, {})", key.0, key.1));
        }
        values.insert(key, row);
        Ok(())
    });
    if let Some(key) = dup {
        return Err(Error::DuplicateKey {
            table: "controls",
            key,
        });
    }
    Ok(ControlTable { names, values })
}
