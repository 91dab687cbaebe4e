use std::fmt::Write;

use super::LinearProgram;

/// Fixed-format MPS dump. MPS minimizes, so the objective is negated.
/// Rows are named `R<n>` and columns `C<n>`; the labels go into comments.
pub fn to_mps(lp: &LinearProgram, name: &str) -> String {
    let mut out = String::new();
    let name: String = name.chars().take(8).collect();
    writeln!(out, "NAME          {name}").unwrap();
    writeln!(out, "* objective negated: maximize c.x").unwrap();
    writeln!(out, "ROWS").unwrap();
    writeln!(out, " N  OBJ").unwrap();
    for (i, row) in lp.rows.iter().enumerate() {
        writeln!(out, " L  {:<8}", row_name(i)).unwrap();
        writeln!(out, "* {} = {}", row_name(i), row.label).unwrap();
    }
    writeln!(out, "COLUMNS").unwrap();
    let mut in_marker = false;
    let mut marker = 0;
    for (j, col) in lp.columns.iter().enumerate() {
        if col.binary != in_marker {
            let kind = if col.binary { "'INTORG'" } else { "'INTEND'" };
            writeln!(out, "    {:<8}  {:<8}  {:>12}", format!("M{marker}"), "'MARKER'", kind).unwrap();
            marker += 1;
            in_marker = col.binary;
        }
        let cname = col_name(j);
        if col.objective != 0.0 {
            field_line(&mut out, &cname, "OBJ", -col.objective);
        }
        for &(i, a) in &col.entries {
            field_line(&mut out, &cname, &row_name(i), a);
        }
        if col.objective == 0.0 && col.entries.is_empty() {
            field_line(&mut out, &cname, "OBJ", 0.0);
        }
    }
    if in_marker {
        writeln!(out, "    {:<8}  {:<8}  {:>12}", format!("M{marker}"), "'MARKER'", "'INTEND'").unwrap();
    }
    writeln!(out, "RHS").unwrap();
    for (i, row) in lp.rows.iter().enumerate() {
        if row.rhs != 0.0 {
            field_line(&mut out, "RHS", &row_name(i), row.rhs);
        }
    }
    writeln!(out, "BOUNDS").unwrap();
    for (j, col) in lp.columns.iter().enumerate() {
        let ub = match (col.upper, col.binary) {
            (Some(u), true) => Some(u.min(1.0)),
            (None, true) => Some(1.0),
            (u, false) => u,
        };
        if let Some(u) = ub {
            writeln!(out, " UP BND       {:<8}  {:>12}", col_name(j), num(u)).unwrap();
        }
    }
    writeln!(out, "ENDATA").unwrap();
    out
}

fn row_name(i: usize) -> String {
    format!("R{i}")
}

fn col_name(j: usize) -> String {
    format!("C{j}")
}

fn field_line(out: &mut String, name: &str, row: &str, v: f64) {
    writeln!(out, "    {:<8}  {:<8}  {:>12}", name, row, num(v)).unwrap();
}

/// At most 12 characters, as the fixed format requires.
fn num(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    for prec in (1..=6).rev() {
        let s = format!("{v:.prec$e}");
        if s.len() <= 12 {
            return s;
        }
    }
    format!("{v:.0e}")
}
