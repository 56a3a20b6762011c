use std::path::Path;

use csci_core::io::{fmt_f64, CsvOut};
use csci_core::stats::{mean, percentile_sorted, sample_sd, sorted_copy};

/// Values at or above this count as fully compliant.
pub const HIGH_MASS_CUTOFF: f64 = 0.99;
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
    pub mass_zero: f64,
    pub mass_high: f64,
    /// Counts over `HISTOGRAM_BINS` equal bins of `[0, 1]`; 1.0 falls in the last bin.
    pub histogram: Vec<usize>,
}

pub fn distribution(values: &[f64]) -> Option<Distribution> {
    if values.is_empty() {
        return None;
    }
    let s = sorted_copy(values);
    let n = s.len();
    let q = |p| percentile_sorted(&s, p).expect("non-empty");
    let mut histogram = vec![0; HISTOGRAM_BINS];
    for v in &s {
        let b = ((v * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        histogram[b] += 1;
    }
    Some(Distribution {
        n,
        mean: mean(&s).expect("non-empty"),
        sd: sample_sd(&s).unwrap_or(0.0),
        min: s[0],
        p25: q(0.25),
        median: q(0.5),
        p75: q(0.75),
        max: s[n - 1],
        mass_zero: s.iter().filter(|&&v| v == 0.0).count() as f64 / n as f64,
        mass_high: s.iter().filter(|&&v| v >= HIGH_MASS_CUTOFF).count() as f64 / n as f64,
        histogram,
    })
}

impl Distribution {
    pub fn stats(&self) -> [(&'static str, f64); 10] {
        [
            ("n", self.n as f64),
            ("mean", self.mean),
            ("sd", self.sd),
            ("min", self.min),
            ("p25", self.p25),
            ("median", self.median),
            ("p75", self.p75),
            ("max", self.max),
            ("mass_at_0", self.mass_zero),
            ("mass_ge_0.99", self.mass_high),
        ]
    }

    pub fn to_text(&self) -> String {
        self.stats()
            .iter()
            .map(|(k, v)| format!("{k:>14}  {}\n", if *k == "n" { self.n.to_string() } else { format!("{v:.4}") }))
            .collect()
    }

    pub fn write_csv(&self, path: &Path, comment: Option<&str>) -> csci_core::Result<()> {
        let mut w = CsvOut::create(path, comment)?;
        w.row(["statistic", "value"])?;
        for (k, v) in self.stats() {
            w.row([k.to_string(), fmt_f64(v)])?;
        }
        w.finish()
    }

    pub fn write_histogram_csv(&self, path: &Path, comment: Option<&str>) -> csci_core::Result<()> {
        let mut w = CsvOut::create(path, comment)?;
        w.row(["bin_lower", "bin_upper", "count", "share"])?;
        let width = 1.0 / HISTOGRAM_BINS as f64;
        for (i, c) in self.histogram.iter().enumerate() {
            w.row([
                fmt_f64(i as f64 * width),
                fmt_f64((i + 1) as f64 * width),
                c.to_string(),
                fmt_f64(*c as f64 / self.n as f64),
            ])?;
        }
        w.finish()
    }
}
