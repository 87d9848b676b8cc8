//! Run reports, output artifacts and the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `value <= target + tolerance`
    AtMost,
    /// `value >= target - tolerance`
    AtLeast,
    /// `|value - target| <= tolerance`
    Within,
    /// `|value - target| <= tolerance |target|`
    RelativeWithin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, target: f64, tolerance: f64, comparison: Comparison) -> Self {
        let pass = match comparison {
            Comparison::AtMost => value <= target + tolerance,
            Comparison::AtLeast => value >= target - tolerance,
            Comparison::Within => (value - target).abs() <= tolerance,
            Comparison::RelativeWithin => (value - target).abs() <= tolerance * target.abs(),
        };
        Check {
            name: name.into(),
            value,
            target,
            tolerance,
            comparison,
            pass,
        }
    }

    /// `value <= bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(name, value, bound, 0.0, Comparison::AtMost)
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(name, value, bound, 0.0, Comparison::AtLeast)
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check::new(name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0, Comparison::AtLeast)
    }
}

/// One output file, held in memory until the run finishes.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn text(name: impl Into<String>, text: String) -> Self {
        Artifact {
            name: name.into(),
            bytes: text.into_bytes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub rng: String,
    pub threads: usize,
    pub crate_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub checks: Vec<Check>,
    /// Set when a fidelity guard rejected the simulation.
    pub invalid_run: Option<String>,
    pub warnings: Vec<String>,
    /// Informational measurements that do not affect the exit code.
    pub notes: Vec<String>,
    pub config: Value,
    pub provenance: Provenance,
    /// Excluded from the reproducibility guarantee.
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub artifacts: Vec<Artifact>,
}

/// Process exit status of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    CheckFailed,
    InvalidRun,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::CheckFailed => 1,
            Outcome::InvalidRun => 3,
        }
    }
}

impl RunReport {
    pub fn outcome(&self) -> Outcome {
        if self.invalid_run.is_some() {
            Outcome::InvalidRun
        } else if self.checks.iter().all(|c| c.pass) {
            Outcome::Pass
        } else {
            Outcome::CheckFailed
        }
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// One line per check, for terminals.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "[{}] {}: {:.6e} ({:?} {:.6e}, tol {:.1e})\n",
                if c.pass { "pass" } else { "FAIL" },
                c.name,
                c.value,
                c.comparison,
                c.target,
                c.tolerance
            ));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        if let Some(r) = &self.invalid_run {
            s.push_str(&format!("invalid run: {r}\n"));
        }
        s
    }

    /// Writes every artifact, `report.json` and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Manifest> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for a in &self.artifacts {
            let path = dir.join(&a.name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, &a.bytes)?;
            files.push(ManifestEntry {
                name: a.name.clone(),
                bytes: a.bytes.len() as u64,
            });
        }
        let report = serde_json::to_string_pretty(self)?;
        fs::write(dir.join("report.json"), &report)?;
        files.push(ManifestEntry {
            name: "report.json".into(),
            bytes: report.len() as u64,
        });
        let manifest = Manifest {
            experiment: self.experiment.clone(),
            seed: self.provenance.seed,
            rng: self.provenance.rng.clone(),
            threads: self.provenance.threads,
            wall_clock_seconds: self.wall_clock_seconds,
            exit_code: self.outcome().exit_code(),
            files,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub rng: String,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub exit_code: i32,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?)
    }

    pub fn paths(&self, dir: &Path) -> Vec<PathBuf> {
        self.files.iter().map(|f| dir.join(&f.name)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons() {
        assert!(Check::new("a", 1.04, 1.0, 0.05, Comparison::Within).pass);
        assert!(!Check::new("a", 1.06, 1.0, 0.05, Comparison::Within).pass);
        assert!(Check::new("a", 2.1, 2.0, 0.1, Comparison::RelativeWithin).pass);
        assert!(!Check::new("a", 2.3, 2.0, 0.1, Comparison::RelativeWithin).pass);
        assert!(Check::at_most("a", 1e-9, 1e-8).pass);
        assert!(!Check::at_most("a", f64::NAN, 1e-8).pass);
        assert!(Check::at_least("a", 2.0, 1.8).pass);
        assert!(!Check::flag("a", false).pass);
    }
}
