//! Run artifacts: the JSON report and CSV field exports.
//!
//! Field CSVs carry the header `t,x,value`, rows ordered by time level then
//! node index, with values printed at 17 significant digits so a write/read
//! round trip is bitwise lossless. The report JSON is deterministic for a
//! fixed scenario and seed except for the wall-time entry.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leader::SweepRow;
use crate::mesh::{SpaceGrid, SpaceTimeField, TimeGrid};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SolverMetadata {
    pub dual_iterations: usize,
    pub dual_restarts: usize,
    pub dual_step_size: f64,
    pub follower_cg_iterations: usize,
    pub upwind_switches: usize,
    pub h_family: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub j1: Option<f64>,
    pub j2: Option<f64>,
    pub alpha: Option<f64>,
    pub terminal_distance: Option<f64>,
    pub vi_residual: Option<f64>,
    pub kkt_residual: Option<f64>,
    /// (max |b_h . grad y0|, max |b_h . grad p0|), reported, never enforced.
    pub orthogonality_residuals: Option<(f64, f64)>,
    pub converged: Option<bool>,
    pub checks: Vec<CheckResult>,
    pub metadata: SolverMetadata,
    /// Excluded from byte-identity comparisons.
    pub wall_time_seconds: f64,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            j1: None,
            j2: None,
            alpha: None,
            terminal_distance: None,
            vi_residual: None,
            kkt_residual: None,
            orthogonality_residuals: None,
            converged: None,
            checks: Vec::new(),
            metadata: SolverMetadata::default(),
            wall_time_seconds: 0.0,
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Scenario(format!("report serialization: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Scenario(format!("report parse: {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Write a space-time field as `t,x,value` rows at full double precision.
pub fn export_field(
    path: &Path,
    grid: &SpaceGrid,
    tg: &TimeGrid,
    field: &SpaceTimeField,
) -> Result<()> {
    if field.values.dim() != (tg.n_levels(), grid.n_nodes()) {
        return Err(Error::ShapeMismatch("field shape vs grids".into()));
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "t,x,value")?;
    for k in 0..tg.n_levels() {
        let t = tg.level(k);
        for i in 0..grid.n_nodes() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                t,
                grid.node_1d(i),
                field.values[[k, i]]
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Read a field written by `export_field`; the grids fix the expected shape.
pub fn import_field(path: &Path, grid: &SpaceGrid, tg: &TimeGrid) -> Result<SpaceTimeField> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("t,x,value") => {}
        other => {
            return Err(Error::Scenario(format!(
                "field CSV header {:?}, expected 't,x,value'",
                other
            )))
        }
    }
    let (m, n) = (tg.n_levels(), grid.n_nodes());
    let mut field = SpaceTimeField::zeros(grid, tg);
    let mut count = 0usize;
    for (row, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| Error::Scenario(format!("field CSV row {row}: missing column")))?
                .parse()
                .map_err(|e| Error::Scenario(format!("field CSV row {row}: {e}")))
        };
        let _t = parse(cols.next())?;
        let _x = parse(cols.next())?;
        let v = parse(cols.next())?;
        if count >= m * n {
            return Err(Error::Scenario(format!(
                "field CSV has more than {} data rows",
                m * n
            )));
        }
        field.values[[count / n, count % n]] = v;
        count += 1;
    }
    if count != m * n {
        return Err(Error::Scenario(format!(
            "field CSV has {count} data rows, expected {}",
            m * n
        )));
    }
    Ok(field)
}

/// sweep.csv with the columns alpha,terminal_distance,J1,J2,iterations,converged.
pub fn export_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "alpha,terminal_distance,J1,J2,iterations,converged")?;
    for r in rows {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.alpha, r.terminal_distance, r.j1, r.j2, r.iterations, r.converged
        )?;
    }
    out.flush()?;
    Ok(())
}
