//! Run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use csci_core::analytics::{FactorSubset, FmControl, DEFAULT_HAC_LAGS};
use csci_core::panel::{EligibilityConfig, InputPaths, LinkConfig};
use csci_core::pipeline::PipelineConfig;
use csci_core::portfolio::{PortfolioSpec, DEFAULT_COST_RATE};
use csci_core::ratios::RatioConfig;
use csci_core::sector::DEFAULT_POLICY;
use csci_core::standards::DEFAULT_GRID_STEP;
use csci_core::{Month, ScoreConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Input file locations. Unset files default to conventional names in `dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub dir: PathBuf,
    pub accounting: Option<PathBuf>,
    pub market: Option<PathBuf>,
    pub links: Option<PathBuf>,
    pub sectors: Option<PathBuf>,
    pub factors: Option<PathBuf>,
    pub controls: Option<PathBuf>,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            dir: PathBuf::from("."),
            accounting: None,
            market: None,
            links: None,
            sectors: None,
            factors: None,
            controls: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StandardsConfig {
    /// TOML file with `[[standard]]` tables; the built-in six when unset.
    pub rules: Option<PathBuf>,
    pub grid_step: f64,
}

impl Default for StandardsConfig {
    fn default() -> Self {
        StandardsConfig {
            rules: None,
            grid_step: DEFAULT_GRID_STEP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortfolioConfig {
    pub specs: Vec<String>,
    pub cost_rate: f64,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        PortfolioConfig {
            specs: [
                "market",
                "binary_islamic",
                "threshold:0.5",
                "threshold:0.7",
                "threshold:0.8",
                "threshold:0.9",
                "tilt:1",
                "tilt:2",
            ]
            .map(String::from)
            .to_vec(),
            cost_rate: DEFAULT_COST_RATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    pub hac_lags: usize,
    pub factors: FactorSubset,
    /// Extra Fama-MacBeth controls beyond log size.
    pub fm_controls: Vec<String>,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            hac_lags: DEFAULT_HAC_LAGS,
            factors: FactorSubset::default(),
            fm_controls: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub output_dir: PathBuf,
    pub start: Option<Month>,
    pub end: Option<Month>,
    pub sector_policy: String,
    pub inputs: InputConfig,
    pub eligibility: EligibilityConfig,
    pub links: LinkConfig,
    pub ratios: RatioConfig,
    pub score: ScoreConfig,
    pub standards: StandardsConfig,
    pub portfolios: PortfolioConfig,
    pub analytics: AnalyticsConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            output_dir: PathBuf::from("out"),
            start: None,
            end: None,
            sector_policy: DEFAULT_POLICY.to_string(),
            inputs: InputConfig::default(),
            eligibility: EligibilityConfig::default(),
            links: LinkConfig::default(),
            ratios: RatioConfig::default(),
            score: ScoreConfig::default(),
            standards: StandardsConfig::default(),
            portfolios: PortfolioConfig::default(),
            analytics: AnalyticsConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            CliError::config("run config", e.to_string().trim_end().replace('\n', " "))
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| csci_core::Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        Self::from_toml_str(&text, &base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn input_paths(&self) -> InputPaths {
        let dir = self.resolve(&self.inputs.dir);
        let mut paths = InputPaths::in_dir(&dir);
        let pick = |o: &Option<PathBuf>, d: PathBuf| o.as_ref().map(|p| self.resolve(p)).unwrap_or(d);
        paths.accounting = pick(&self.inputs.accounting, paths.accounting);
        paths.market = pick(&self.inputs.market, paths.market);
        paths.links = pick(&self.inputs.links, paths.links);
        paths.sectors = pick(&self.inputs.sectors, paths.sectors);
        paths.factors = pick(&self.inputs.factors, paths.factors);
        paths.controls = self.inputs.controls.as_ref().map(|p| self.resolve(p));
        paths
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.resolve(&self.output_dir).join(name)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            eligibility: self.eligibility.clone(),
            links: self.links.clone(),
            ratios: self.ratios,
            score: self.score,
            sector_policy: self.sector_policy.clone(),
            start: self.start,
            end: self.end,
        }
    }

    /// Portfolio specs with the configured cost rate applied.
    pub fn portfolio_specs(&self) -> CliResult<Vec<PortfolioSpec>> {
        if self.portfolios.specs.is_empty() {
            return Err(CliError::config("portfolios.specs", "no portfolio specs"));
        }
        self.portfolios
            .specs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let spec: PortfolioSpec = s
                    .parse()
                    .map_err(|e: csci_core::Error| CliError::config(format!("portfolios.specs[{i}]"), e.to_string()))?;
                let spec = spec.with_cost(self.portfolios.cost_rate);
                spec.validate()
                    .map_err(|e| CliError::config("portfolios.cost_rate", e.to_string()))?;
                Ok(spec)
            })
            .collect()
    }

    pub fn fm_controls(&self) -> Vec<FmControl> {
        self.analytics
            .fm_controls
            .iter()
            .map(|s| s.parse().expect("infallible"))
            .collect()
    }

    /// Checks schema, numeric settings and that referenced input files exist.
    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if e < s {
                return Err(CliError::config("end", format!("{e} precedes start {s}")));
            }
        }
        self.score
            .validate()
            .map_err(|e| CliError::config("score", e.to_string()))?;
        let g = self.standards.grid_step;
        if !(g > 0.0 && g <= 1.0) {
            return Err(CliError::config("standards.grid_step", format!("{g} outside (0, 1]")));
        }
        let r = &self.ratios;
        if !(r.cap > 0.0 && 0.0 <= r.winsor_lower && r.winsor_lower < r.winsor_upper && r.winsor_upper <= 1.0) {
            return Err(CliError::config("ratios", "need cap > 0 and 0 <= winsor_lower < winsor_upper <= 1"));
        }
        self.portfolio_specs()?;
        let paths = self.input_paths();
        let required = [
            ("inputs.accounting", &paths.accounting),
            ("inputs.market", &paths.market),
            ("inputs.links", &paths.links),
            ("inputs.sectors", &paths.sectors),
            ("inputs.factors", &paths.factors),
        ];
        for (key, p) in required {
            if !p.is_file() {
                return Err(CliError::config(key, format!("file {} does not exist", p.display())));
            }
        }
        if let Some(p) = &paths.controls {
            if !p.is_file() {
                return Err(CliError::config("inputs.controls", format!("file {} does not exist", p.display())));
            }
        }
        if let Some(p) = &self.standards.rules {
            let p = self.resolve(p);
            if !p.is_file() {
                return Err(CliError::config("standards.rules", format!("file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// SHA-256 of the effective configuration, excluding the output location.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn header(&self) -> String {
        header_line(&self.config_hash())
    }
}

pub fn header_line(hash: &str) -> String {
    format!("csci schema_version={SCHEMA_VERSION} config_hash={hash}")
}

pub fn hash_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_str(&cfg.to_toml(), Path::new(".")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let cfg = RunConfig::from_toml_str(
            "output_dir = \"res\"\n[inputs]\ndir = \"data\"\nmarket = \"/abs/m.csv\"\n",
            Path::new("/runs/a"),
        )
        .unwrap();
        let p = cfg.input_paths();
        assert_eq!(p.accounting, Path::new("/runs/a/data/accounting.csv"));
        assert_eq!(p.market, Path::new("/abs/m.csv"));
        assert_eq!(cfg.output_path("csci.csv"), Path::new("/runs/a/res/csci.csv"));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = RunConfig::from_toml_str("[score.debt]\ncomfrot = 0.3\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("comfrot"), "{err}");
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.config_hash(), b.config_hash());
        b.portfolios.cost_rate = 0.001;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn bad_specs_name_their_index() {
        let mut cfg = RunConfig::default();
        cfg.portfolios.specs = vec!["market".into(), "threshold:1.5".into()];
        let err = cfg.portfolio_specs().unwrap_err();
        assert!(err.to_string().contains("portfolios.specs[1]"), "{err}");
    }
}
