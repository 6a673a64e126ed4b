//! Batch solving and table rendering for the `table` subcommand.

use anyhow::{bail, Result};
use rayon::prelude::*;

use nperiodic::solver::SolveStatus;

use crate::config::RunConfig;
use crate::pipeline::{execute, resolve, Overrides, RunOutcome};

pub struct TableRow {
    pub label: String,
    pub given_cells: Vec<String>,
    pub solved_cells: Vec<String>,
    pub status: SolveStatus,
    pub h_norm: f64,
    pub degenerate: bool,
    pub oracle_pass: Option<bool>,
    pub error: Option<String>,
}

pub struct RenderedTable {
    pub header: Vec<String>,
    pub rows: Vec<TableRow>,
}

/// Four-decimal rendering used for solved values; normalizes the
/// negative-zero artifact of rounding.
pub fn fmt4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

fn status_label(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIter => "max-iter",
        SolveStatus::Diverged => "diverged",
        SolveStatus::SingularTau => "singular-tau",
    }
}

pub fn header_for(n: usize) -> Vec<String> {
    let mut h = vec!["row".to_string()];
    for j in 1..=n {
        h.push(format!("k{j}"));
    }
    for j in 1..=n {
        h.push(format!("tau{j}{j}"));
    }
    h.push("c1_0".into());
    h.push("c2_0".into());
    h.push("v0".into());
    for j in 1..=n {
        h.push(format!("omega{j}"));
    }
    for j in 1..=n {
        h.push(format!("l{j}"));
    }
    for p in 1..=n {
        for q in (p + 1)..=n {
            h.push(format!("tau{p}{q}"));
        }
    }
    h.push("c1".into());
    h.push("c2".into());
    h.push("|H|".into());
    h.push("status".into());
    h.push("flags".into());
    h
}

/// Solves every row of a batch config. Rows run in parallel; results are
/// collected in row order so output is deterministic. Per-row failures
/// are recorded, not fatal.
pub fn run_batch(base: &RunConfig, overrides: &Overrides) -> Result<RenderedTable> {
    let n = base.given.n;
    let header = header_for(n);
    let rows: Vec<TableRow> = base
        .rows
        .par_iter()
        .enumerate()
        .map(|(index, row_spec)| {
            let label = row_spec
                .label
                .clone()
                .unwrap_or_else(|| format!("{}", index + 1));
            let config = base.with_row(row_spec);
            if config.given.n != n {
                return TableRow::failed(label, "phase count differs from the base config");
            }
            match resolve(config, overrides).and_then(|run| {
                let outcome = execute(&run)?;
                Ok((run, outcome))
            }) {
                Ok((run, outcome)) => build_row(label, &run.config, &outcome),
                Err(err) => TableRow::failed(label, &format!("{err:#}")),
            }
        })
        .collect();
    for row in &rows {
        if row.error.is_none() && row.solved_cells.len() + row.given_cells.len() + 4 != header.len()
        {
            bail!("internal: row width mismatch");
        }
    }
    Ok(RenderedTable { header, rows })
}

impl TableRow {
    fn failed(label: String, message: &str) -> Self {
        TableRow {
            label,
            given_cells: Vec::new(),
            solved_cells: Vec::new(),
            status: SolveStatus::Diverged,
            h_norm: f64::NAN,
            degenerate: false,
            oracle_pass: None,
            error: Some(message.to_string()),
        }
    }
}

fn build_row(label: String, config: &RunConfig, outcome: &RunOutcome) -> TableRow {
    let mut given_cells = Vec::new();
    for v in &config.given.k {
        given_cells.push(v.display());
    }
    for v in &config.given.tau_diag {
        given_cells.push(v.display());
    }
    given_cells.push(fmt4(config.seed.c1));
    given_cells.push(fmt4(config.seed.c2));
    given_cells.push(fmt4(config.equation.v0));

    let x = &outcome.report.x_final;
    let mut solved_cells = Vec::new();
    for &v in x.omega.iter().chain(&x.l).chain(&x.tau_off) {
        solved_cells.push(fmt4(v));
    }
    solved_cells.push(fmt4(x.c1));
    solved_cells.push(fmt4(x.c2));

    TableRow {
        label,
        given_cells,
        solved_cells,
        status: outcome.report.status,
        h_norm: outcome.report.h_norm,
        degenerate: outcome.report.degenerate_l_zero,
        oracle_pass: outcome.oracle.as_ref().map(|o| o.pass),
        error: None,
    }
}

fn row_cells(row: &TableRow) -> Vec<String> {
    if let Some(err) = &row.error {
        return vec![row.label.clone(), format!("FAILED: {err}")];
    }
    let mut cells = vec![row.label.clone()];
    cells.extend(row.given_cells.iter().cloned());
    cells.extend(row.solved_cells.iter().cloned());
    cells.push(format!("{:.1e}", row.h_norm));
    cells.push(status_label(row.status).to_string());
    let mut flags = Vec::new();
    if row.degenerate {
        flags.push("l=0");
    }
    if row.oracle_pass == Some(false) {
        flags.push("oracle-fail");
    }
    cells.push(flags.join(","));
    cells
}

/// Space-aligned text rendering.
pub fn render_text(table: &RenderedTable) -> String {
    let mut all_rows: Vec<Vec<String>> = vec![table.header.clone()];
    all_rows.extend(table.rows.iter().map(row_cells));
    let columns = table.header.len();
    let mut widths = vec![0usize; columns];
    for row in &all_rows {
        for (i, cell) in row.iter().enumerate().take(columns) {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &all_rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                if i < columns {
                    format!("{cell:>width$}", width = widths[i])
                } else {
                    cell.clone()
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Comma-separated rendering with the same cells.
pub fn render_csv(table: &RenderedTable) -> String {
    let mut out = table.header.join(",");
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row_cells(row).join(","));
        out.push('\n');
    }
    out
}
