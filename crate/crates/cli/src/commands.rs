//! Subcommand implementations. Each writes its files under the configured
//! output directory and returns what it computed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use csci_core::analytics::{
    build_cross_sections, decile_table, fama_macbeth, frontier_table, performance_summary,
    regress_on_factors, write_deciles_csv, write_fm_csv, write_frontier_csv, write_performance_csv,
    DecileReport, FactorSeries, FmControl, FmReport, FrontierRow, PerformanceSummary, RegressionReport,
    MIN_REGRESSION_OBS,
};
use csci_core::io::{fmt_f64, fmt_opt, CsvOut};
use csci_core::panel::{load_inputs, ControlTable, Diagnostic, FilterReport};
use csci_core::pipeline::score_panel;
use csci_core::portfolio::{default_start, run_backtest, BacktestResult, PortfolioKind};
use csci_core::ratios::write_ratios_csv;
use csci_core::scoring::write_csci_csv;
use csci_core::sector::SectorPolicies;
use csci_core::standards::{
    binary_islamic_benchmark_indicator, default_rules, fit_tau, load_rules, pass_rate_table,
    write_annual_pass_rates_csv, write_mapping_csv, write_pass_rates_csv, MappingResult, PassRate,
    StandardRule, evaluate_standard,
};
use csci_core::synthgen::{generate, planted_scenario, Scenario, SynthConfig};
use csci_core::{Error, Month, ScoredPanel};

use crate::config::{hash_text, header_line, RunConfig};
use crate::error::{CliError, CliResult};
use crate::summary::{distribution, Distribution};

/// Loaded and scored inputs shared by the analysis subcommands.
pub struct Prepared {
    pub header: String,
    pub panel: ScoredPanel,
    pub sectors: SectorPolicies,
    pub factors: FactorSeries,
    pub controls: Option<ControlTable>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn prepare(cfg: &RunConfig) -> CliResult<Prepared> {
    cfg.validate()?;
    let raw = load_inputs(&cfg.input_paths())?;
    let first = raw.market.iter().map(|m| m.month).min();
    let last = raw.market.iter().map(|m| m.month).max();
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::EmptyPanel("market file has no rows".into()).into());
    };
    check_coverage(cfg.start, cfg.end, first, last)?;
    let panel = score_panel(raw.accounting, raw.market, &raw.links, &raw.sectors, &cfg.pipeline())?;
    Ok(Prepared {
        header: cfg.header(),
        panel,
        sectors: raw.sectors,
        factors: raw.factors,
        controls: raw.controls,
        diagnostics: raw.diagnostics,
    })
}

fn check_coverage(start: Option<Month>, end: Option<Month>, first: Month, last: Month) -> CliResult<()> {
    let outside = |m: Month| m < first || m > last;
    for (key, m) in [("start", start), ("end", end)] {
        if let Some(m) = m.filter(|&m| outside(m)) {
            return Err(Error::DateRange(format!("{key} {m} outside input coverage {first}..{last}")).into());
        }
    }
    Ok(())
}

fn header(p: &Prepared) -> Option<&str> {
    Some(p.header.as_str())
}

#[derive(Debug, Clone)]
pub struct ScoreOutcome {
    pub n_rows: usize,
    pub n_scored: usize,
    pub n_firms: usize,
    pub eligibility: FilterReport,
    pub distribution: Option<Distribution>,
    pub files: Vec<PathBuf>,
}

impl ScoreOutcome {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "scored {} of {} firm-months ({} firms); {} market rows dropped by eligibility filters",
            self.n_scored,
            self.n_rows,
            self.n_firms,
            self.eligibility.dropped_total()
        );
        if let Some(d) = &self.distribution {
            s.push_str("csci distribution\n");
            s.push_str(&d.to_text());
        }
        s
    }
}

pub fn cmd_score(cfg: &RunConfig) -> CliResult<ScoreOutcome> {
    let p = prepare(cfg)?;
    write_score(cfg, &p)
}

pub fn write_score(cfg: &RunConfig, p: &Prepared) -> CliResult<ScoreOutcome> {
    let h = header(p);
    let mut files = Vec::new();
    let mut out = |name: &str| {
        let path = cfg.output_path(name);
        files.push(path.clone());
        path
    };
    p.panel.panel.write_csv(&out("panel.csv"), h)?;
    write_ratios_csv(&p.panel.ratios, &out("ratios.csv"), h)?;
    write_csci_csv(&p.panel.csci_records(), &out("csci.csv"), h)?;
    let values: Vec<f64> = p.panel.rows.iter().filter_map(|r| r.csci()).collect();
    let dist = distribution(&values);
    if let Some(d) = &dist {
        d.write_csv(&out("csci_distribution.csv"), h)?;
        d.write_histogram_csv(&out("csci_histogram.csv"), h)?;
    }
    let mut firms: Vec<_> = p.panel.rows.iter().map(|r| &r.firm_id).collect();
    firms.dedup();
    Ok(ScoreOutcome {
        n_rows: p.panel.rows.len(),
        n_scored: values.len(),
        n_firms: firms.len(),
        eligibility: p.panel.eligibility.clone(),
        distribution: dist,
        files,
    })
}

#[derive(Debug, Clone)]
pub struct MapOutcome {
    pub rates: Vec<PassRate>,
    pub mappings: Vec<MappingResult>,
    /// Standards whose pass set is degenerate, with the reason.
    pub degenerate: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
}

impl MapOutcome {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<12} {:>9} {:>8} {:>8} {:>8} {:>8}", "standard", "pass_rate", "tau", "fn", "fp", "loss");
        for r in &self.rates {
            let _ = write!(s, "{:<12} {:>9.4}", r.standard, r.fraction);
            match self.mappings.iter().find(|m| m.standard == r.standard) {
                Some(m) => {
                    let _ = writeln!(s, " {:>8.3} {:>8.4} {:>8.4} {:>8.4}", m.tau, m.fn_rate, m.fp_rate, m.loss);
                }
                None => s.push_str("  degenerate\n"),
            }
        }
        for (name, why) in &self.degenerate {
            let _ = writeln!(s, "warning: {name}: {why}");
        }
        s
    }

    /// Error to surface when any standard could not be mapped.
    pub fn degeneracy_error(&self) -> Option<CliError> {
        (!self.degenerate.is_empty()).then(|| CliError::Degenerate {
            count: self.degenerate.len(),
            names: self
                .degenerate
                .iter()
                .map(|(n, w)| format!("{n} ({w})"))
                .collect::<Vec<_>>()
                .join(", "),
        })
    }
}

pub fn load_standard_rules(cfg: &RunConfig) -> CliResult<Vec<StandardRule>> {
    match &cfg.standards.rules {
        Some(p) => Ok(load_rules(&cfg.resolve(p))?),
        None => Ok(default_rules()),
    }
}

pub fn cmd_map(cfg: &RunConfig) -> CliResult<MapOutcome> {
    let p = prepare(cfg)?;
    write_map(cfg, &p)
}

pub fn write_map(cfg: &RunConfig, p: &Prepared) -> CliResult<MapOutcome> {
    let rules = load_standard_rules(cfg)?;
    let h = header(p);
    let rates = pass_rate_table(&rules, &p.panel, &p.sectors, &cfg.score.sector)?;
    let csci: Vec<Option<f64>> = p.panel.rows.iter().map(|r| r.csci()).collect();
    let mut mappings = Vec::new();
    let mut degenerate = Vec::new();
    for rule in &rules {
        let pass = evaluate_standard(rule, &p.panel, &p.sectors, &cfg.score.sector)?;
        match fit_tau(&rule.name, &pass, &csci, cfg.standards.grid_step) {
            Ok(m) => mappings.push(m),
            Err(e @ Error::DegenerateStandard { .. }) => degenerate.push((rule.name.clone(), e.to_string())),
            Err(e) => return Err(e.into()),
        }
    }
    let files = vec![
        cfg.output_path("pass_rates.csv"),
        cfg.output_path("pass_rates_annual.csv"),
        cfg.output_path("tau_mapping.csv"),
    ];
    write_pass_rates_csv(&rates, &files[0], h)?;
    write_annual_pass_rates_csv(&rates, &files[1], h)?;
    write_mapping_csv(&mappings, &files[2], h)?;
    Ok(MapOutcome {
        rates,
        mappings,
        degenerate,
        files,
    })
}

#[derive(Debug, Clone)]
pub struct SpecOutcome {
    pub result: BacktestResult,
    pub performance: Option<PerformanceSummary>,
    pub regression: Option<RegressionReport>,
    pub notes: Vec<String>,
}

impl SpecOutcome {
    fn mean_of(&self, f: impl Fn(&csci_core::portfolio::Characteristics) -> Option<f64>) -> Option<f64> {
        let v: Vec<f64> = self.result.characteristics.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn avg_n_stocks(&self) -> f64 {
        self.mean_of(|c| Some(c.n_stocks as f64)).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct BacktestOutcome {
    pub specs: Vec<SpecOutcome>,
    /// Specs aborted by an empty universe or all-zero tilt weights.
    pub failures: Vec<(String, String)>,
    pub frontier: Vec<FrontierRow>,
    pub files: Vec<PathBuf>,
}

impl BacktestOutcome {
    pub fn spec(&self, label: &str) -> Option<&SpecOutcome> {
        self.specs.iter().find(|s| s.result.label == label)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<16} {:>7} {:>8} {:>8} {:>8} {:>9} {:>8}",
            "portfolio", "stocks", "csci", "sharpe", "alpha", "turnover", "max_dd"
        );
        for o in &self.specs {
            let r = &o.result;
            let turnover = r.turnover.iter().sum::<f64>() / r.turnover.len() as f64;
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<16} {:>7.1} {:>8} {:>8} {:>8} {:>9.4} {:>8}",
                r.label,
                o.avg_n_stocks(),
                opt(r.avg_csci()),
                opt(o.performance.as_ref().and_then(|p| p.sharpe)),
                opt(o.regression.as_ref().map(|g| g.alpha_annualized)),
                turnover,
                opt(o.performance.as_ref().map(|p| p.max_drawdown)),
            );
            for n in &o.notes {
                let _ = writeln!(s, "  note: {n}");
            }
        }
        for (label, why) in &self.failures {
            let _ = writeln!(s, "warning: {label} aborted: {why}");
        }
        s
    }
}

pub fn cmd_backtest(cfg: &RunConfig) -> CliResult<BacktestOutcome> {
    let p = prepare(cfg)?;
    write_backtest(cfg, &p)
}

pub fn write_backtest(cfg: &RunConfig, p: &Prepared) -> CliResult<BacktestOutcome> {
    let specs = cfg.portfolio_specs()?;
    let h = header(p);
    let panel = &p.panel;
    let start = default_start(panel)
        .ok_or_else(|| Error::EmptyPanel("no firm-month has a financial score".into()))?;
    let end = panel.last_month().expect("non-empty panel");
    if end < start {
        return Err(Error::DateRange(format!("no holding months after the first scored month {}", start.pred())).into());
    }
    let binary = if specs.iter().any(|s| matches!(s.kind, PortfolioKind::BinaryIslamic)) {
        Some(binary_islamic_benchmark_indicator(panel, &p.sectors, &cfg.score.sector)?)
    } else {
        None
    };

    let mut out = BacktestOutcome {
        specs: Vec::new(),
        failures: Vec::new(),
        frontier: Vec::new(),
        files: Vec::new(),
    };
    let mut first_failure = None;
    for spec in &specs {
        let result = match run_backtest(spec, panel, binary.as_deref(), start, end) {
            Ok(r) => r,
            Err(e @ (Error::EmptyUniverse { .. } | Error::ZeroTiltWeights { .. })) => {
                out.failures.push((spec.label(), e.to_string()));
                first_failure.get_or_insert(e);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let mut notes = Vec::new();
        let rf: Vec<f64> = result
            .months
            .iter()
            .map(|m| p.factors.require(*m).map(|f| f.rf))
            .collect::<csci_core::Result<_>>()?;
        let performance = match performance_summary(&result.net, &rf) {
            Ok(s) => Some(s),
            Err(e @ Error::InsufficientData { .. }) => {
                notes.push(format!("performance skipped: {e}"));
                None
            }
            Err(e) => return Err(e.into()),
        };
        let regression = if result.months.len() < MIN_REGRESSION_OBS {
            notes.push(format!(
                "factor regression skipped: {} months, need {MIN_REGRESSION_OBS}",
                result.months.len()
            ));
            None
        } else {
            match regress_on_factors(&result.months, &result.net, &p.factors, cfg.analytics.factors, cfg.analytics.hac_lags) {
                Ok(r) => Some(r),
                Err(e @ Error::RankDeficient(_)) => {
                    notes.push(format!("factor regression skipped: {e}"));
                    None
                }
                Err(e) => return Err(e.into()),
            }
        };
        if result.missing_returns > 0 {
            notes.push(format!("{} held firm-months lacked a return and were booked at zero", result.missing_returns));
        }
        let path = cfg.output_path(&format!("backtest_{}.csv", result.label));
        result.write_csv(&path, h)?;
        out.files.push(path);
        if let Some(reg) = &regression {
            let path = cfg.output_path(&format!("regression_{}.txt", result.label));
            let mut text = String::new();
            if let Some(h) = h {
                let _ = writeln!(text, "# {h}");
            }
            let _ = writeln!(text, "portfolio = {}", result.label);
            let _ = writeln!(text, "factors = {}", cfg.analytics.factors);
            text.push_str(&reg.to_text());
            write_text(&path, &text)?;
            out.files.push(path);
        }
        out.specs.push(SpecOutcome {
            result,
            performance,
            regression,
            notes,
        });
    }
    if out.specs.is_empty() {
        return Err(first_failure.expect("at least one spec").into());
    }

    let perf: Vec<(String, PerformanceSummary)> = out
        .specs
        .iter()
        .filter_map(|o| o.performance.clone().map(|s| (o.result.label.clone(), s)))
        .collect();
    let path = cfg.output_path("performance.csv");
    write_performance_csv(&perf, &path, h)?;
    out.files.push(path);

    let path = cfg.output_path("characteristics.csv");
    write_characteristics(&out.specs, &path, h)?;
    out.files.push(path);

    out.frontier = frontier_table(
        out.specs
            .iter()
            .map(|o| FrontierRow {
                label: o.result.label.clone(),
                avg_csci: o.result.avg_csci(),
                sharpe: o.performance.as_ref().and_then(|s| s.sharpe),
                alpha_annualized: o.regression.as_ref().map(|r| r.alpha_annualized),
                max_drawdown: o
                    .performance
                    .as_ref()
                    .map(|s| s.max_drawdown)
                    .unwrap_or_else(|| csci_core::analytics::max_drawdown(&o.result.net)),
            })
            .collect(),
    );
    let path = cfg.output_path("frontier.csv");
    write_frontier_csv(&out.frontier, &path, h)?;
    out.files.push(path);
    Ok(out)
}

fn write_characteristics(specs: &[SpecOutcome], path: &Path, comment: Option<&str>) -> CliResult<()> {
    let mut w = CsvOut::create(path, comment)?;
    w.row([
        "portfolio",
        "months",
        "avg_n_stocks",
        "avg_effective_n",
        "avg_w_debt",
        "avg_w_cash",
        "avg_w_rec",
        "avg_csci",
        "avg_turnover",
        "cost_rate",
        "missing_returns",
    ])?;
    for o in specs {
        let r = &o.result;
        w.row([
            r.label.clone(),
            r.months.len().to_string(),
            fmt_f64(o.avg_n_stocks()),
            fmt_opt(o.mean_of(|c| Some(c.effective_n))),
            fmt_opt(o.mean_of(|c| c.w_debt)),
            fmt_opt(o.mean_of(|c| c.w_cash)),
            fmt_opt(o.mean_of(|c| c.w_rec)),
            fmt_opt(r.avg_csci()),
            fmt_f64(r.turnover.iter().sum::<f64>() / r.turnover.len() as f64),
            fmt_f64(r.cost_rate),
            r.missing_returns.to_string(),
        ])?;
    }
    Ok(w.finish()?)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FmOutcome {
    pub reports: Vec<(String, FmReport)>,
    pub files: Vec<PathBuf>,
}

impl FmOutcome {
    pub fn report(&self, name: &str) -> Option<&FmReport> {
        self.reports.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, r) in &self.reports {
            let _ = writeln!(s, "({name}) months={} avg_n={:.1}", r.n_months, r.avg_n_obs);
            for (i, n) in r.names.iter().enumerate() {
                let _ = writeln!(s, "  {n:<14} {:>12.6} (t = {:.2})", r.mean[i], r.t_stat[i]);
            }
            if !r.skipped.is_empty() {
                let _ = writeln!(s, "  skipped months: {}", r.skipped.len());
            }
        }
        s
    }
}

/// Regressor sets: csci alone, csci with log size, and with the extra controls.
pub fn fm_specifications(extra: &[FmControl]) -> Vec<(String, Vec<FmControl>)> {
    let mut specs = vec![
        ("csci".to_string(), vec![]),
        ("csci+log_size".to_string(), vec![FmControl::LogSize]),
    ];
    if !extra.is_empty() {
        let mut controls = vec![FmControl::LogSize];
        controls.extend(extra.iter().filter(|c| **c != FmControl::LogSize).cloned());
        let name = controls.iter().map(|c| c.name().to_string()).collect::<Vec<_>>().join("+");
        specs.push((format!("csci+{name}"), controls));
    }
    specs
}

pub fn cmd_fm(cfg: &RunConfig) -> CliResult<FmOutcome> {
    let p = prepare(cfg)?;
    write_fm(cfg, &p)
}

pub fn write_fm(cfg: &RunConfig, p: &Prepared) -> CliResult<FmOutcome> {
    let extra = cfg.fm_controls();
    if extra.iter().any(|c| matches!(c, FmControl::External(_))) && p.controls.is_none() {
        return Err(CliError::config("analytics.fm_controls", "external controls need inputs.controls"));
    }
    let mut reports = Vec::new();
    for (name, controls) in fm_specifications(&extra) {
        let (names, sections) = build_cross_sections(&p.panel, &p.factors, &controls, p.controls.as_ref())?;
        reports.push((name, fama_macbeth(&names, &sections)?));
    }
    let path = cfg.output_path("fm.csv");
    write_fm_csv(&reports, &path, header(p))?;
    Ok(FmOutcome {
        reports,
        files: vec![path],
    })
}

#[derive(Debug, Clone)]
pub struct ReportOutcome {
    pub score: ScoreOutcome,
    pub map: MapOutcome,
    pub backtest: BacktestOutcome,
    pub fm: FmOutcome,
    pub deciles: DecileReport,
}

impl ReportOutcome {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.score.to_text());
        s.push('\n');
        s.push_str(&self.map.to_text());
        s.push('\n');
        s.push_str(&self.backtest.to_text());
        s.push('\n');
        s.push_str(&self.fm.to_text());
        s
    }
}

/// Score, map, backtest, Fama-MacBeth and decile tables from one load.
pub fn cmd_report(cfg: &RunConfig) -> CliResult<ReportOutcome> {
    let p = prepare(cfg)?;
    let score = write_score(cfg, &p)?;
    let map = write_map(cfg, &p)?;
    let backtest = write_backtest(cfg, &p)?;
    let fm = write_fm(cfg, &p)?;
    let deciles = decile_table(&p.panel);
    write_deciles_csv(&deciles, &cfg.output_path("deciles.csv"), header(&p))?;
    Ok(ReportOutcome {
        score,
        map,
        backtest,
        fm,
        deciles,
    })
}

#[derive(Debug, Clone)]
pub struct SynthOutcome {
    pub dir: PathBuf,
    pub n_firms: usize,
    pub n_months: usize,
    pub n_market_rows: usize,
    pub scenario: Option<Scenario>,
}

impl SynthOutcome {
    pub fn to_text(&self) -> String {
        format!(
            "wrote {} firms x {} months ({} market rows){} to {}\n",
            self.n_firms,
            self.n_months,
            self.n_market_rows,
            self.scenario.as_ref().map(|s| format!(", scenario {s}")).unwrap_or_default(),
            self.dir.display()
        )
    }
}

/// Writes synthetic inputs, the generator settings and a run config into `dir`.
pub fn cmd_synth(cfg: &SynthConfig, scenario: Option<Scenario>, dir: &Path) -> CliResult<SynthOutcome> {
    cfg.validate()?;
    let data = match scenario {
        Some(s) => planted_scenario(s, cfg)?,
        None => generate(cfg)?,
    };
    let mut settings = toml::to_string(cfg).expect("synth config serializes");
    if let Some(s) = scenario {
        settings = format!("# scenario = {s}\n{settings}");
    }
    let h = header_line(&hash_text(&settings));
    data.write_inputs(dir, Some(&h))?;
    write_text(&dir.join("synth.toml"), &settings)?;
    let run = RunConfig {
        output_dir: PathBuf::from("out"),
        ..RunConfig::default()
    };
    write_text(&dir.join("run.toml"), &run.to_toml())?;
    Ok(SynthOutcome {
        dir: dir.to_path_buf(),
        n_firms: cfg.n_firms,
        n_months: cfg.n_months,
        n_market_rows: data.market.len(),
        scenario,
    })
}
