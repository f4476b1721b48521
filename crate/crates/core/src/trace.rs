//! Per-iteration instrumentation shared by all solvers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const CSV_HEADER: &str = "outer,inner,epoch,objective,grad_evals,sub_iters,wall_ns";

/// One record. `grad_evals` and `sub_iters` are running totals since the start of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub outer: usize,
    pub inner: usize,
    pub epoch: f64,
    pub objective: f64,
    pub grad_evals: u64,
    pub sub_iters: u64,
    pub wall_ns: u64,
}

/// How progress along the x-axis is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EpochMeasure {
    /// `grad_evals / n`: passes over the data.
    #[default]
    DataPasses,
    /// Data passes plus subproblem work, each subproblem iteration costing
    /// `sub_cost` component-gradient equivalents.
    Work,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverTrace {
    pub rows: Vec<TraceRow>,
    /// Number of samples, the unit of one epoch.
    pub n: usize,
    /// Component-gradient equivalents charged per subproblem iteration (the sketch rank).
    pub sub_cost: usize,
    pub warnings: Vec<String>,
}

impl SolverTrace {
    pub fn new(n: usize, sub_cost: usize) -> Self {
        Self {
            rows: Vec::new(),
            n,
            sub_cost,
            warnings: Vec::new(),
        }
    }

    /// Work-based epoch count for the given running totals.
    pub fn epoch_equiv(&self, grad_evals: u64, sub_iters: u64) -> f64 {
        (grad_evals as f64 + sub_iters as f64 * self.sub_cost as f64) / self.n as f64
    }

    pub fn data_passes(&self, row: &TraceRow) -> f64 {
        row.grad_evals as f64 / self.n as f64
    }

    pub fn measure(&self, row: &TraceRow, measure: EpochMeasure) -> f64 {
        match measure {
            EpochMeasure::DataPasses => self.data_passes(row),
            EpochMeasure::Work => row.epoch,
        }
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn best_objective(&self) -> f64 {
        self.rows.iter().map(|r| r.objective).fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:.16e},{:.16e},{},{},{}",
                r.outer, r.inner, r.epoch, r.objective, r.grad_evals, r.sub_iters, r.wall_ns
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Zeroes the wall-clock column, leaving a byte-reproducible trace.
    pub fn strip_wall_clock(&mut self) {
        self.rows.iter_mut().for_each(|r| r.wall_ns = 0);
    }
}
