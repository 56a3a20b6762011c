use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use csci_cli::error::{CliResult, EXIT_OK};
use csci_cli::{commands, RunConfig};
use csci_core::analytics::FactorSubset;
use csci_core::synthgen::{Scenario, SynthConfig};
use csci_core::Month;

/// Continuous Shariah compliance scoring, standard mapping and portfolio analytics.
///
/// Exit codes: 0 success, 1 i/o failure, 2 usage error, 3 invalid configuration,
/// 4 data error, 5 numerical failure.
#[derive(Parser)]
#[command(name = "csci", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every firm-month and write panel, ratio, csci and distribution files.
    Score(RunArgs),
    /// Pass rates of each binary standard and its best-fitting csci cut.
    Map {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        map: MapArgs,
    },
    /// Backtest portfolio specs; writes one file per spec plus performance and frontier tables.
    Backtest {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        portfolio: PortfolioArgs,
    },
    /// Fama-MacBeth regressions of next-month excess returns on csci.
    Fm {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        fm: FmArgs,
    },
    /// Everything above plus decile characteristics, from a single load.
    Report {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        portfolio: PortfolioArgs,
        #[command(flatten)]
        fm: FmArgs,
    },
    /// Generate a synthetic input directory with a ready-to-use run.toml.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML). Flags override its keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Directory holding accounting.csv, market.csv, links.csv, sectors.csv, factors.csv.
    #[arg(long)]
    input_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// First month (YYYY-MM) of the analysis window.
    #[arg(long)]
    start: Option<Month>,
    /// Last month (YYYY-MM) of the analysis window.
    #[arg(long)]
    end: Option<Month>,
}

#[derive(Args)]
struct MapArgs {
    /// Standards file with [[standard]] tables.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Spacing of the threshold grid.
    #[arg(long)]
    grid_step: Option<f64>,
}

#[derive(Args)]
struct PortfolioArgs {
    /// Portfolio spec: market, binary_islamic, threshold:<tau> or tilt:<k>. Repeatable.
    #[arg(short, long = "portfolio")]
    portfolios: Vec<String>,
    /// Proportional cost per unit of one-way turnover.
    #[arg(long)]
    cost_rate: Option<f64>,
    /// Newey-West lags.
    #[arg(long)]
    hac_lags: Option<usize>,
    /// Factor set: capm, ff3 or ff6.
    #[arg(long)]
    factors: Option<FactorSubset>,
}

#[derive(Args)]
struct FmArgs {
    /// Extra control beyond log size: past_return, leverage or a controls-file column. Repeatable.
    #[arg(long = "control")]
    controls: Vec<String>,
}

#[derive(Args)]
struct SynthArgs {
    /// Destination directory.
    #[arg(short, long)]
    out: PathBuf,
    /// Generator settings (TOML).
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    firms: Option<usize>,
    #[arg(long)]
    months: Option<usize>,
    /// Planted scenario, e.g. exact_cut:0.7, csci_return_link:0.01, independent, all_pass.
    #[arg(long)]
    scenario: Option<Scenario>,
}

impl RunArgs {
    fn load(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.input_dir {
            cfg.inputs.dir = absolute(d);
        }
        if let Some(o) = &self.output {
            cfg.output_dir = absolute(o);
        }
        cfg.start = self.start.or(cfg.start);
        cfg.end = self.end.or(cfg.end);
        Ok(cfg)
    }
}

/// Command-line paths are relative to the working directory, not the config file.
fn absolute(p: &std::path::Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

impl MapArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(r) = &self.rules {
            cfg.standards.rules = Some(absolute(r));
        }
        if let Some(g) = self.grid_step {
            cfg.standards.grid_step = g;
        }
    }
}

impl PortfolioArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if !self.portfolios.is_empty() {
            cfg.portfolios.specs = self.portfolios.clone();
        }
        if let Some(c) = self.cost_rate {
            cfg.portfolios.cost_rate = c;
        }
        if let Some(l) = self.hac_lags {
            cfg.analytics.hac_lags = l;
        }
        if let Some(f) = self.factors {
            cfg.analytics.factors = f;
        }
    }
}

impl FmArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if !self.controls.is_empty() {
            cfg.analytics.fm_controls = self.controls.clone();
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Score(run) => {
            let out = commands::cmd_score(&run.load()?)?;
            print!("{}", out.to_text());
        }
        Command::Map { run, map } => {
            let mut cfg = run.load()?;
            map.apply(&mut cfg);
            let out = commands::cmd_map(&cfg)?;
            print!("{}", out.to_text());
            if let Some(e) = out.degeneracy_error() {
                return Err(e);
            }
        }
        Command::Backtest { run, portfolio } => {
            let mut cfg = run.load()?;
            portfolio.apply(&mut cfg);
            let out = commands::cmd_backtest(&cfg)?;
            print!("{}", out.to_text());
        }
        Command::Fm { run, fm } => {
            let mut cfg = run.load()?;
            fm.apply(&mut cfg);
            let out = commands::cmd_fm(&cfg)?;
            print!("{}", out.to_text());
        }
        Command::Report { run, map, portfolio, fm } => {
            let mut cfg = run.load()?;
            map.apply(&mut cfg);
            portfolio.apply(&mut cfg);
            fm.apply(&mut cfg);
            let out = commands::cmd_report(&cfg)?;
            print!("{}", out.to_text());
        }
        Command::Synth(args) => {
            let mut cfg = match &args.config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|source| csci_core::Error::Io {
                        path: p.clone(),
                        source,
                    })?;
                    SynthConfig::from_toml_str(&text)?
                }
                None => SynthConfig::default(),
            };
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            if let Some(n) = args.firms {
                cfg.n_firms = n;
            }
            if let Some(n) = args.months {
                cfg.n_months = n;
            }
            let out = commands::cmd_synth(&cfg, args.scenario, &args.out)?;
            print!("{}", out.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
