//! Success tables in the layout of a per-exemplar evaluation table, as CSV
//! and as aligned Markdown.

use std::fmt::Write as _;

use chicgrasp_core::sim::FailureStage;
use serde::Serialize;

/// Outcome of one evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub index: usize,
    pub exemplar: u8,
    pub seed: u64,
    pub success: bool,
    pub failure_stage: FailureStage,
    pub cycle_seconds: f64,
}

/// One table row. `exemplar` is `None` for a method's totals row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub method: String,
    pub exemplar: Option<u8>,
    pub successes: usize,
    pub failures: usize,
    pub total: usize,
    /// Mean over successful trials only.
    pub mean_cycle_seconds: Option<f64>,
}

impl TrialRow {
    /// Percentage rounded to two decimals.
    pub fn success_rate(&self) -> f64 {
        success_rate(self.successes, self.total)
    }
}

pub fn success_rate(successes: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    (10_000.0 * successes as f64 / total as f64).round() / 100.0
}

/// `41, 101` → `"40.59"`, `0, 30` → `"0"`, `1, 2` → `"50"`.
pub fn format_rate(successes: usize, total: usize) -> String {
    let s = format!("{:.2}", success_rate(successes, total));
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialTable {
    pub rows: Vec<TrialRow>,
}

impl TrialTable {
    /// Per-exemplar rows in ascending id order, then the totals row.
    pub fn from_trials(method: &str, trials: &[TrialResult]) -> Self {
        let mut ids: Vec<u8> = trials.iter().map(|t| t.exemplar).collect();
        ids.sort_unstable();
        ids.dedup();
        let mut rows: Vec<TrialRow> = ids
            .iter()
            .map(|&id| {
                let subset: Vec<&TrialResult> = trials.iter().filter(|t| t.exemplar == id).collect();
                row_of(method, Some(id), &subset)
            })
            .collect();
        let all: Vec<&TrialResult> = trials.iter().collect();
        rows.push(row_of(method, None, &all));
        Self { rows }
    }

    pub fn extend(&mut self, other: TrialTable) {
        self.rows.extend(other.rows);
    }

    pub fn totals(&self) -> impl Iterator<Item = &TrialRow> {
        self.rows.iter().filter(|r| r.exemplar.is_none())
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("method,exemplar,success_rate,successes,failures,total,mean_cycle_s\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.method,
                exemplar_label(r),
                format_rate(r.successes, r.total),
                r.successes,
                r.failures,
                r.total,
                cycle_label(r),
            );
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let header = [
            "Method",
            "Exemplar",
            "Success Rate",
            "Success",
            "Failure",
            "Total",
            "Mean cycle (s)",
        ];
        let body: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.method.clone(),
                    exemplar_label(r),
                    format!("{}%", format_rate(r.successes, r.total)),
                    r.successes.to_string(),
                    r.failures.to_string(),
                    r.total.to_string(),
                    cycle_label(r),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let line = |cells: Vec<&str>, out: &mut String| {
            out.push('|');
            for (i, (c, w)) in cells.iter().zip(widths).enumerate() {
                // Text columns left-aligned, numbers right-aligned.
                if i < 2 {
                    let _ = write!(out, " {c:<w$} |");
                } else {
                    let _ = write!(out, " {c:>w$} |");
                }
            }
            out.push('\n');
        };
        line(header.to_vec(), &mut out);
        out.push('|');
        for (i, w) in widths.iter().enumerate() {
            if i < 2 {
                let _ = write!(out, " {} |", "-".repeat(*w));
            } else {
                let _ = write!(out, " {}: |", "-".repeat(w - 1));
            }
        }
        out.push('\n');
        for row in &body {
            line(row.iter().map(String::as_str).collect(), &mut out);
        }
        out
    }
}

fn row_of(method: &str, exemplar: Option<u8>, trials: &[&TrialResult]) -> TrialRow {
    let successes = trials.iter().filter(|t| t.success).count();
    let cycles: Vec<f64> = trials.iter().filter(|t| t.success).map(|t| t.cycle_seconds).collect();
    TrialRow {
        method: method.to_string(),
        exemplar,
        successes,
        failures: trials.len() - successes,
        total: trials.len(),
        mean_cycle_seconds: (!cycles.is_empty()).then(|| cycles.iter().sum::<f64>() / cycles.len() as f64),
    }
}

fn exemplar_label(r: &TrialRow) -> String {
    match r.exemplar {
        Some(id) => id.to_string(),
        None => "Total".into(),
    }
}

fn cycle_label(r: &TrialRow) -> String {
    r.mean_cycle_seconds.map(|c| format!("{c:.2}")).unwrap_or_else(|| "-".into())
}
