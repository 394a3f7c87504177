//! Text rendering for the comparison table.

use mslp::variants::Comparison;

/// Render the comparison either as aligned human-readable columns or as
/// comma-separated rows with full-precision numbers.
pub fn comparison(c: &Comparison, delimited: bool) -> String {
    let mut header = vec!["variant".to_string(), "iterations".to_string()];
    for t in &c.time_checkpoints {
        header.push(format!("lb@{t}s"));
        header.push(format!("%lb@{t}s"));
    }
    for k in &c.iteration_checkpoints {
        header.push(format!("lb@it{k}"));
        header.push(format!("%lb@it{k}"));
    }
    header.extend(
        ["final_lb", "%lb", "lp_scenario", "lp_cluster", "cuts"]
            .map(str::to_string),
    );

    let value = |v: f64| {
        if delimited {
            v.to_string()
        } else {
            format!("{v:.6}")
        }
    };
    let pct = |v: f64| {
        if delimited {
            v.to_string()
        } else {
            format!("{v:+.2}%")
        }
    };

    let mut rows = Vec::new();
    for row in &c.rows {
        let mut cells = vec![row.variant.to_string(), row.iterations.to_string()];
        for i in 0..c.time_checkpoints.len() {
            cells.push(value(row.lower_at_time[i]));
            cells.push(pct(row.pct_at_time[i]));
        }
        for i in 0..c.iteration_checkpoints.len() {
            cells.push(value(row.lower_at_iteration[i]));
            cells.push(pct(row.pct_at_iteration[i]));
        }
        cells.push(value(row.final_lower));
        cells.push(pct(row.pct_lb));
        cells.push(row.lp_solves_scenario.to_string());
        cells.push(row.lp_solves_cluster.to_string());
        cells.push(row.cuts_total.to_string());
        rows.push(cells);
    }

    if delimited {
        let mut out = header.join(",");
        out.push('\n');
        for cells in &rows {
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        return out;
    }

    // Aligned layout: first column left-justified, the rest right-justified.
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for cells in &rows {
        for (w, cell) in widths.iter_mut().zip(cells) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut emit = |cells: &[String]| {
        let line: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                if i == 0 {
                    format!("{cell:<width$}", width = widths[i])
                } else {
                    format!("{cell:>width$}", width = widths[i])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    };
    emit(&header);
    for cells in &rows {
        emit(cells);
    }
    out
}
