//! Plain-text rendering of programs for debugging.
//!
//! Grammar (one item per line, sections in this order):
//!
//! ```text
//! program   := "\ program: " NAME NL objective rows bounds [binaries] "End"
//! objective := "Minimize" NL " obj: " expr [ " + " CONST ] NL
//! rows      := "Subject To" NL { " " NAME ": " expr " " SENSE " " NUMBER NL }
//! bounds    := "Bounds" NL { " " bound NL }
//! bound     := NUMBER " <= " VAR " <= " NUMBER     (both finite)
//!            | VAR " >= " NUMBER | VAR " <= " NUMBER | VAR " free" | VAR " = " NUMBER
//! binaries  := "Binaries" NL { " " VAR NL }
//! expr      := term { (" + " | " - ") term }    term := NUMBER " " VAR
//! SENSE     := "<=" | "=" | ">="
//! ```
//!
//! Variable and row names are emitted verbatim with characters outside
//! `[A-Za-z0-9_.,\[\]]` replaced by `_`. Numbers use Rust's shortest
//! round-trip formatting.

use std::fmt::Write;

use crate::model::{LinearProgram, MixedIntegerProgram, Variable};

fn clean(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.,[]".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_expr(out: &mut String, terms: impl Iterator<Item = (String, f64)>) {
    let mut first = true;
    for (name, a) in terms {
        if a == 0.0 {
            continue;
        }
        if first {
            let _ = write!(out, "{} {}", a, name);
            first = false;
        } else if a < 0.0 {
            let _ = write!(out, " - {} {}", -a, name);
        } else {
            let _ = write!(out, " + {} {}", a, name);
        }
    }
    if first {
        out.push('0');
    }
}

fn write_bound(out: &mut String, v: &Variable) {
    let n = clean(&v.name);
    let _ = match (v.lower.is_finite(), v.upper.is_finite()) {
        (true, true) if v.lower == v.upper => writeln!(out, " {} = {}", n, v.lower),
        (true, true) => writeln!(out, " {} <= {} <= {}", v.lower, n, v.upper),
        (true, false) => writeln!(out, " {} >= {}", n, v.lower),
        (false, true) => writeln!(out, " {} <= {}", n, v.upper),
        (false, false) => writeln!(out, " {} free", n),
    };
}

fn render(lp: &LinearProgram, binaries: &[crate::VarId]) -> String {
    let names: Vec<String> = lp.variables.iter().map(|v| clean(&v.name)).collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ program: {}", clean(&lp.name));
    out.push_str("Minimize\n obj: ");
    write_expr(
        &mut out,
        lp.variables.iter().enumerate().map(|(j, v)| (names[j].clone(), v.cost)),
    );
    if lp.objective_offset != 0.0 {
        let _ = write!(out, " + {}", lp.objective_offset);
    }
    out.push_str("\nSubject To\n");
    for c in &lp.constraints {
        let _ = write!(out, " {}: ", clean(&c.name));
        write_expr(&mut out, c.terms.iter().map(|(v, a)| (names[v.0].clone(), *a)));
        let _ = writeln!(out, " {} {}", c.sense.symbol(), c.rhs);
    }
    out.push_str("Bounds\n");
    for v in &lp.variables {
        write_bound(&mut out, v);
    }
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for b in binaries {
            let _ = writeln!(out, " {}", names[b.0]);
        }
    }
    out.push_str("End\n");
    out
}

/// Render a MIP (or an LP wrapped with no binaries) as LP text.
pub fn write_lp(p: &MixedIntegerProgram) -> String {
    render(&p.lp, &p.binaries)
}
