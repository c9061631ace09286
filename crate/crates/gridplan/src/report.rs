//! Rendering comparison results as aligned text and CSV.
//!
//! The table follows the usual aggregation-benchmark layout: the baseline
//! (full-resolution) row carries absolute numbers, every other row is
//! expressed relative to it, so a lossless method reads as a row of 1.0000
//! and an undervaluing method shows up directly as `room < 1`. Wall-clock
//! seconds stay absolute on every row — a relative runtime hides whether
//! anything was fast. Quantities whose baseline is (numerically) zero have
//! no meaningful ratio and render as `n/a`; failed rows render their error
//! in place of numbers.
//!
//! CSV output mirrors the table cell for cell (a `basis` column says whether
//! a row is absolute or relative) so a spreadsheet reads like the terminal.
//! Sweep curves are emitted in long form — `method,room_cost,optimal_room` —
//! ready for plotting.

use crate::scenario::{ComparisonReport, MethodOutcome};
use crate::tol;

const VALUE_COLUMNS: [&str; 5] = ["room", "door", "objective", "energy_value", "capacity_value"];

fn values_of(outcome: &MethodOutcome) -> [f64; 5] {
    [outcome.room, outcome.door, outcome.objective, outcome.energy_value, outcome.capacity_value]
}

/// Cells for one row: `Ok` holds the five value columns (already divided by
/// the baseline when relative; `None` = ratio against ~0) plus seconds.
fn row_cells(
    outcome: &Result<MethodOutcome, String>,
    baseline: Option<&MethodOutcome>,
) -> Result<([Option<f64>; 5], f64), String> {
    let outcome = outcome.as_ref().map_err(|e| e.clone())?;
    let mut cells = values_of(outcome).map(Some);
    if let Some(base) = baseline {
        let base_values = values_of(base);
        for (cell, base_value) in cells.iter_mut().zip(base_values) {
            *cell = if base_value.abs() > tol::FEAS { cell.map(|v| v / base_value) } else { None };
        }
    }
    Ok((cells, outcome.seconds))
}

fn fmt_cell(cell: Option<f64>) -> String {
    match cell {
        Some(v) => format!("{v:.4}"),
        None => "n/a".into(),
    }
}

/// Aligned comparison table; one line per method.
pub fn comparison_table(report: &ComparisonReport) -> String {
    let baseline = report.baseline_outcome();
    let mut header: Vec<String> = vec!["method".into(), "basis".into()];
    header.extend(VALUE_COLUMNS.iter().map(|c| c.to_string()));
    header.push("seconds".into());

    let mut grid: Vec<Vec<String>> = vec![header];
    for (i, row) in report.rows.iter().enumerate() {
        let basis = if Some(i) == report.baseline || baseline.is_none() { "abs" } else { "rel" };
        let mut line = vec![row.label.clone(), basis.into()];
        match row_cells(&row.outcome, if Some(i) == report.baseline { None } else { baseline }) {
            Ok((cells, seconds)) => {
                line.extend(cells.into_iter().map(fmt_cell));
                line.push(format!("{seconds:.3}"));
            }
            Err(e) => {
                line[1] = "-".into();
                line.push(format!("error: {e}"));
            }
        }
        grid.push(line);
    }

    let mut widths = vec![0usize; grid.iter().map(Vec::len).max().unwrap_or(0)];
    for line in &grid {
        for (w, cell) in widths.iter_mut().zip(line) {
            *w = (*w).max(cell.len());
        }
    }

    let mut out = String::new();
    for line in &grid {
        for (col, cell) in line.iter().enumerate() {
            if col > 0 {
                out.push_str("  ");
            }
            if col == 0 {
                out.push_str(&format!("{cell:<width$}", width = widths[0]));
            } else {
                out.push_str(&format!("{cell:>width$}", width = widths[col]));
            }
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    }
    if baseline.is_none() {
        out.push_str("(no full-resolution baseline; all rows absolute)\n");
    }
    out
}

/// The comparison table as CSV, same cells as the text table; failed rows
/// leave the value columns empty and fill `error`.
pub fn comparison_csv(report: &ComparisonReport) -> String {
    let baseline = report.baseline_outcome();
    let mut out = String::from("method,basis,");
    out.push_str(&VALUE_COLUMNS.join(","));
    out.push_str(",seconds,error\n");
    for (i, row) in report.rows.iter().enumerate() {
        let basis = if Some(i) == report.baseline || baseline.is_none() { "abs" } else { "rel" };
        match row_cells(&row.outcome, if Some(i) == report.baseline { None } else { baseline }) {
            Ok((cells, seconds)) => {
                out.push_str(&format!(
                    "{},{basis},{},{seconds:.6},\n",
                    csv_field(&row.label),
                    cells.map(fmt_cell).join(","),
                ));
            }
            Err(e) => {
                out.push_str(&format!("{},,,,,,,,{}\n", csv_field(&row.label), csv_field(&e)));
            }
        }
    }
    out
}

/// Sweep curves in long form for plotting; failed curves emit one row with
/// the error in place of a value pair.
pub fn sweep_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("method,room_cost,optimal_room,error\n");
    for curve in &report.sweep {
        match &curve.points {
            Ok(points) => {
                for p in points {
                    out.push_str(&format!(
                        "{},{},{},\n",
                        csv_field(&curve.label),
                        p.room_cost,
                        p.optimal_room
                    ));
                }
            }
            Err(e) => {
                out.push_str(&format!("{},,,{}\n", csv_field(&curve.label), csv_field(e)));
            }
        }
    }
    out
}

/// Aligned sweep table: one row per room-cost point, one column per method.
pub fn sweep_table(report: &ComparisonReport) -> String {
    if report.sweep.is_empty() {
        return String::new();
    }
    let costs: Vec<f64> = report
        .sweep
        .iter()
        .find_map(|c| c.points.as_ref().ok())
        .map(|pts| pts.iter().map(|p| p.room_cost).collect())
        .unwrap_or_default();

    let mut grid: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["room_cost".to_string()];
    header.extend(report.sweep.iter().map(|c| c.label.clone()));
    grid.push(header);
    for (row_idx, cost) in costs.iter().enumerate() {
        let mut line = vec![format!("{cost}")];
        for curve in &report.sweep {
            line.push(match &curve.points {
                Ok(points) => format!("{:.4}", points[row_idx].optimal_room),
                Err(_) => "error".into(),
            });
        }
        grid.push(line);
    }

    let mut widths = vec![0usize; grid[0].len()];
    for line in &grid {
        for (w, cell) in widths.iter_mut().zip(line) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for line in &grid {
        for (col, cell) in line.iter().enumerate() {
            if col > 0 {
                out.push_str("  ");
            }
            out.push_str(&format!("{cell:>width$}", width = widths[col]));
        }
        out.push('\n');
    }
    for curve in &report.sweep {
        if let Err(e) = &curve.points {
            out.push_str(&format!("{}: error: {e}\n", curve.label));
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
