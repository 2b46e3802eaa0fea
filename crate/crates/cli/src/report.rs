use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use blockprec::amg::HierarchySummary;
use blockprec::krylov::GmresConfig;
use blockprec::precond::PrecondSpec;
use blockprec::problems::ProblemSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl TimeStats {
    pub fn of(samples: &[f64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        };
        Self {
            min: s[0],
            median,
            max: s[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timings {
    pub repeat: usize,
    pub setup_seconds: TimeStats,
    pub solve_seconds: TimeStats,
}

/// Everything one `solve` invocation produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    pub field_sizes: Vec<usize>,
    pub nnz: usize,
    pub preconditioner: PrecondSpec,
    pub gmres: GmresConfig,
    pub converged: bool,
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub residual_history: Vec<f64>,
    pub timings: Timings,
    pub hierarchies: Vec<HierarchySummary>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing report {}", path.display()))
    }

    /// Writes `iteration,relres` rows.
    pub fn write_history_csv(&self, path: &Path) -> Result<()> {
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(["iteration", "relres"])?;
        for (k, r) in self.residual_history.iter().enumerate() {
            w.serialize((k, r))?;
        }
        w.flush()?;
        Ok(())
    }
}
