//! Plain-text tables for standard output.

use cauchy_source::experiments::{EocSummary, MultiRecord, RunRecord};

fn row(cells: &[String]) -> String {
    let mut line = String::new();
    for (i, c) in cells.iter().enumerate() {
        if i == 0 {
            line.push_str(&format!("{c:>5}"));
        } else {
            line.push_str(&format!(" {c:>12}"));
        }
    }
    line.push('\n');
    line
}

fn header(names: &[&str]) -> String {
    row(&names.iter().map(|s| s.to_string()).collect::<Vec<_>>())
}

fn sci(v: f64) -> String {
    format!("{v:.4e}")
}

pub fn sweep_table(records: &[RunRecord]) -> String {
    let mut out = header(&[
        "ℓ", "h_ℓ", "ρ_ℓ", "δ_ℓ", "Iterate", "Tolerance", "L²_f", "L²_N", "L²_D", "H¹_N", "H¹_D",
    ]);
    for r in records {
        out += &row(&[
            r.level.to_string(),
            sci(r.h),
            sci(r.rho),
            sci(r.delta),
            r.iterations.to_string(),
            sci(r.tolerance),
            sci(r.l2_f),
            sci(r.l2_n),
            sci(r.l2_d),
            sci(r.h1_n),
            sci(r.h1_d),
        ]);
    }
    out
}

pub fn eoc_table(records: &[RunRecord], cols: &[EocSummary; 5]) -> String {
    let mut out = header(&["ℓ", "EOC L²_f", "EOC L²_N", "EOC L²_D", "EOC H¹_N", "EOC H¹_D"]);
    for (i, r) in records.iter().enumerate().skip(1) {
        let mut cells = vec![r.level.to_string()];
        cells.extend(cols.iter().map(|c| format!("{:.4}", c.steps[i - 1])));
        out += &row(&cells);
    }
    let mut cells = vec!["mean".to_string()];
    cells.extend(cols.iter().map(|c| format!("{:.4}", c.mean)));
    out += &row(&cells);
    out
}

pub fn multi_table(records: &[MultiRecord]) -> String {
    let mut out = header(&[
        "I", "Iterate", "Tolerance", "δ̄", "L²_f", "L²_N", "L²_D", "H¹_N", "H¹_D",
    ]);
    for r in records {
        out += &row(&[
            r.measurements.to_string(),
            r.iterations.to_string(),
            sci(r.tolerance),
            sci(r.delta_bar),
            sci(r.l2_f),
            sci(r.l2_n),
            sci(r.l2_d),
            sci(r.h1_n),
            sci(r.h1_d),
        ]);
    }
    out
}
