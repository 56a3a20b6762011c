//! Sector classification policies.
//!
//! A policy maps industry codes to a [`SectorClass`]. Codes not listed are
//! treated as permissible, with the observed non-permissible revenue share
//! `q` still applied by the sectoral factor.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_POLICY: &str = "default";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorClass {
    /// Core prohibited business (conventional finance, alcohol, gambling, ...).
    Prohibited,
    /// Mixed sector whose non-permissible revenue is itself prohibited activity.
    Adjacent,
    /// Mixed sector whose non-permissible revenue is a broader mixed activity.
    Mixed,
    Permissible,
}

impl SectorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SectorClass::Prohibited => "prohibited",
            SectorClass::Adjacent => "adjacent",
            SectorClass::Mixed => "mixed",
            SectorClass::Permissible => "permissible",
        }
    }
}

impl fmt::Display for SectorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SectorClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "prohibited" => Ok(SectorClass::Prohibited),
            "adjacent" => Ok(SectorClass::Adjacent),
            "mixed" => Ok(SectorClass::Mixed),
            "permissible" | "clean" => Ok(SectorClass::Permissible),
            other => Err(format!("unknown sector class `{other}`")),
        }
    }
}

/// Sector-derived inputs for one firm-month.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorExposure {
    pub class: SectorClass,
    pub hard_prohibited: bool,
    /// Non-permissible revenue share, forced to 1 for hard-prohibited codes.
    pub q: f64,
    /// Share of revenue from clearly prohibited activities (SC Malaysia 5% tier).
    pub prohibited_share: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SectorPolicy {
    classes: BTreeMap<String, SectorClass>,
}

impl SectorPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, code: impl Into<String>, class: SectorClass) {
        self.classes.insert(code.into(), class);
    }

    pub fn class_of(&self, code: &str) -> SectorClass {
        self.classes
            .get(code)
            .copied()
            .unwrap_or(SectorClass::Permissible)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, SectorClass)> {
        self.classes.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn exposure(&self, code: &str, q: f64) -> SectorExposure {
        let class = self.class_of(code);
        match class {
            SectorClass::Prohibited => SectorExposure {
                class,
                hard_prohibited: true,
                q: 1.0,
                prohibited_share: 1.0,
            },
            SectorClass::Adjacent => SectorExposure {
                class,
                hard_prohibited: false,
                q,
                prohibited_share: q,
            },
            SectorClass::Mixed | SectorClass::Permissible => SectorExposure {
                class,
                hard_prohibited: false,
                q,
                prohibited_share: 0.0,
            },
        }
    }
}

/// Named sector policies, as referenced by standard rules.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SectorPolicies {
    policies: BTreeMap<String, SectorPolicy>,
}

impl SectorPolicies {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, policy: SectorPolicy) {
        self.policies.insert(name.into(), policy);
    }

    pub fn entry(&mut self, name: &str) -> &mut SectorPolicy {
        self.policies.entry(name.to_string()).or_default()
    }

    pub fn get(&self, name: &str) -> Result<&SectorPolicy> {
        self.policies
            .get(name)
            .ok_or_else(|| Error::UnknownSectorPolicy(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SectorPolicy)> {
        self.policies.iter().map(|(k, v)| (k.as_str(), v))
    }
}
