//! Run reports: JSON for machines, an aligned text table for people. Both
//! carry the config hash and the content hash.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bounds::{Relation, Verdict};
use crate::error::{Error, Result};

use super::checks::CheckResult;
use super::config::ExperimentConfig;

/// Per-variant estimator table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub label: String,
    pub n_reps: usize,
    pub n_truncated: usize,
    pub truncation_fraction: f64,
    pub mean_stop_time: f64,
    pub choice_frequencies: Vec<f64>,
    pub choice_entropy: f64,
    /// Per-arm mean count at the stopping time.
    pub mean_counts: Vec<f64>,
    /// Per-arm `1 / Ê[1/N]` at the stopping time, absent if some count is zero.
    pub n_eff: Vec<Option<f64>>,
    /// Simulation failure, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub name: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub variants: Vec<VariantSummary>,
    pub checks: Vec<CheckResult>,
    pub wall_time_secs: f64,
    /// Hash of every field except the wall time and this one.
    pub content_hash: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    sha256_hex(&serde_json::to_vec(config).expect("config serializes"))
}

impl RunReport {
    pub(crate) fn seal(mut self) -> Self {
        let wall = self.wall_time_secs;
        self.wall_time_secs = 0.0;
        self.content_hash = String::new();
        self.content_hash = sha256_hex(&serde_json::to_vec(&self).expect("report serializes"));
        self.wall_time_secs = wall;
        self
    }

    /// Violated if any check is violated; otherwise holds.
    pub fn verdict(&self) -> Verdict {
        if self.reports().any(|r| r.verdict == Verdict::Violated) {
            Verdict::Violated
        } else {
            Verdict::Holds
        }
    }

    pub fn reports(&self) -> impl Iterator<Item = &crate::bounds::BoundReport> {
        self.checks.iter().flat_map(|c| c.reports.iter())
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "run: {}  (banditbias {})", self.name, self.version);
        let _ = writeln!(out, "config hash:  {}", self.config_hash);
        let _ = writeln!(out, "content hash: {}", self.content_hash);
        let _ = writeln!(out, "wall time: {:.2}s", self.wall_time_secs);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<16} {:>8} {:>10} {:>12}  mean counts", "variant", "reps", "truncated", "mean stop");
        for v in &self.variants {
            let counts: Vec<String> = v.mean_counts.iter().map(|c| format!("{c:.3}")).collect();
            let _ = writeln!(
                out,
                "{:<16} {:>8} {:>9.3}% {:>12.2}  [{}]{}",
                v.label,
                v.n_reps,
                100.0 * v.truncation_fraction,
                v.mean_stop_time,
                counts.join(", "),
                v.error.as_ref().map_or(String::new(), |e| format!("  ERROR: {e}"))
            );
        }
        let _ = writeln!(out);
        let width = self.reports().map(|r| r.name.len()).max().unwrap_or(4).max(5);
        let _ = writeln!(out, "{:<width$} {:>12} {:>10}  {:<9} {:>12} {:>9}  verdict", "check", "lhs", "stderr", "relation", "rhs", "margin");
        for r in self.reports() {
            let rel = match r.relation {
                Relation::AtMost => "<=".to_string(),
                Relation::AtLeast => ">=".to_string(),
                Relation::Equal => "==".to_string(),
                Relation::Within { rel } => format!("~{:.0}%", rel * 100.0),
                Relation::Below => "< (exact)".to_string(),
                Relation::SignificantlyAbove => "> (3se)".to_string(),
                Relation::Shape => "shape".to_string(),
            };
            let margin = r.margin_sigmas.map_or("-".to_string(), |m| format!("{m:.2}"));
            let verdict = match r.verdict {
                Verdict::Holds => "holds",
                Verdict::Violated => "VIOLATED",
                Verdict::Inconclusive => "inconclusive",
            };
            let _ = writeln!(
                out,
                "{:<width$} {:>12.6} {:>10.6}  {:<9} {:>12.6} {:>9}  {}",
                r.name, r.lhs.value, r.lhs.stderr, rel, r.rhs, margin, verdict
            );
            for n in &r.notes {
                let _ = writeln!(out, "{:<width$}   note: {n}", "");
            }
        }
        out
    }

    /// Write `<name>.json` and `<name>.txt` into `dir`.
    pub fn persist(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let stem = if self.name.is_empty() { "run" } else { &self.name };
        let json = dir.join(format!("{stem}.json"));
        let txt = dir.join(format!("{stem}.txt"));
        std::fs::write(&json, self.to_json()).map_err(|e| Error::Io(format!("{}: {e}", json.display())))?;
        std::fs::write(&txt, self.render()).map_err(|e| Error::Io(format!("{}: {e}", txt.display())))?;
        Ok(vec![json, txt])
    }
}
