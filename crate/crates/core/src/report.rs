//! Per-(target, device, objective) recommendation tables.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::planner::{enumerate_configs, select_best, EvaluatedConfig, Objective};
use crate::profile::ProfileStore;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Winner(EvaluatedConfig),
    /// The objective has no scorable candidate, with the reason.
    Infeasible(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub target_id: String,
    pub device_id: String,
    pub objective: Objective,
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

pub const TSV_COLUMNS: [&str; 9] = [
    "target",
    "device",
    "objective",
    "model_id",
    "quant_id",
    "k",
    "goodput_tok_s",
    "cost_eff_ktok_per_dollar",
    "energy_j_per_tok",
];

/// One row per (target, device, objective), in the order given.
pub fn build_report(
    store: &ProfileStore,
    targets: &[String],
    devices: &[String],
    k_lo: u32,
    k_hi: u32,
) -> Result<Report> {
    if targets.is_empty() || devices.is_empty() {
        return Err(Error::Domain("report needs at least one target and one device".into()));
    }
    let mut rows = Vec::with_capacity(targets.len() * devices.len() * 3);
    for target in targets {
        for device in devices {
            let configs = enumerate_configs(store, target, device, k_lo, k_hi)?;
            for objective in Objective::ALL {
                let cell = match select_best(&configs, objective) {
                    Ok(rec) => Cell::Winner(rec.winner),
                    Err(Error::Infeasible(reason)) => Cell::Infeasible(reason),
                    Err(e) => return Err(e),
                };
                rows.push(ReportRow {
                    target_id: target.clone(),
                    device_id: device.clone(),
                    objective,
                    cell,
                });
            }
        }
    }
    Ok(Report { rows })
}

impl Report {
    pub fn infeasible_count(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(r.cell, Cell::Infeasible(_)))
            .count()
    }

    /// Tab-separated, one header row; absent values are empty fields.
    pub fn to_tsv(&self) -> String {
        let mut out = TSV_COLUMNS.join("\t");
        out.push('\n');
        for r in &self.rows {
            let fields: Vec<String> = match &r.cell {
                Cell::Winner(c) => vec![
                    c.config.model_id.clone(),
                    c.config.quant_id.clone(),
                    c.config.k.to_string(),
                    format!("{:.4}", c.metrics.goodput_tok_s),
                    opt(c.metrics.cost_eff_tok_per_dollar.map(|x| x / 1e3), 3),
                    opt(c.metrics.energy_j_per_tok, 4),
                ],
                Cell::Infeasible(_) => vec![String::new(); 6],
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                r.target_id,
                r.device_id,
                r.objective.token(),
                fields.join("\t")
            );
        }
        out
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let header = ["Target", "Device", "Objective", "Configuration", "K", "G", "eta_cost", "E"];
        let mut cells: Vec<[String; 8]> = vec![header.map(String::from)];
        for r in &self.rows {
            let lead = [r.target_id.clone(), r.device_id.clone(), r.objective.label().to_owned()];
            let rest = match &r.cell {
                Cell::Winner(c) => [
                    format!("{} {}", c.config.model_id, c.config.quant_id),
                    c.config.k.to_string(),
                    format!("{:.2}", c.metrics.goodput_tok_s),
                    c.metrics
                        .cost_eff_tok_per_dollar
                        .map_or("---".into(), |x| format!("{:.0}K", x / 1e3)),
                    c.metrics
                        .energy_j_per_tok
                        .map_or("---".into(), |x| format!("{x:.2}")),
                ],
                Cell::Infeasible(reason) => [
                    reason.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ],
            };
            let [a, b, c] = lead;
            let [d, e, f, g, h] = rest;
            cells.push([a, b, c, d, e, f, g, h]);
        }
        render_aligned(&cells, &[4, 5, 6, 7])
    }
}

fn opt(x: Option<f64>, places: usize) -> String {
    x.map(|v| format!("{v:.places$}")).unwrap_or_default()
}

/// Pads columns to equal width; columns listed in `right` are right-aligned.
pub fn render_aligned<const N: usize>(rows: &[[String; N]], right: &[usize]) -> String {
    let mut widths = [0usize; N];
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (i, c) in row.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if right.contains(&i) {
                let _ = write!(line, "{c:>w$}", w = widths[i]);
            } else {
                let _ = write!(line, "{c:<w$}", w = widths[i]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
