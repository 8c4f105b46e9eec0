//! Plain-text problem format.
//!
//! One record per line, fields separated by whitespace, `#` starts a comment:
//!
//! ```text
//! mibp 1
//! var <name> <C|B|I> <lower> <upper>
//! row <family> <le|eq> <rhs> [<var> <coef>]...
//! obj <var> <coef>
//! const <value>
//! bilinear <coef> <var> <var> <obj | row <index>>
//! ```
//!
//! Variables are referenced by name and rows by their zero-based position.
//! Numbers are written in shortest round-trip form, so `read(write(p)) == p`.

use std::fmt::Write as _;

use crate::error::MibpError;
use crate::problem::{MibpProblem, RowSense, TermLocation, VarKind};

pub fn write_problem(problem: &MibpProblem) -> Result<String, MibpError> {
    let mut out = String::new();
    out.push_str("mibp 1\n");
    for v in &problem.vars {
        if v.name.is_empty() || v.name.chars().any(|c| c.is_whitespace() || c == '#') {
            return Err(MibpError::Invalid(format!(
                "variable name {:?} cannot be exported",
                v.name
            )));
        }
        let kind = match v.kind {
            VarKind::Continuous => "C",
            VarKind::Binary => "B",
            VarKind::Integer => "I",
        };
        writeln!(out, "var {} {} {:?} {:?}", v.name, kind, v.lower, v.upper).unwrap();
    }
    for r in &problem.rows {
        if r.family.is_empty() || r.family.chars().any(|c| c.is_whitespace() || c == '#') {
            return Err(MibpError::Invalid(format!(
                "row family {:?} cannot be exported",
                r.family
            )));
        }
        let sense = match r.sense {
            RowSense::Le => "le",
            RowSense::Eq => "eq",
        };
        write!(out, "row {} {} {:?}", r.family, sense, r.rhs).unwrap();
        for &(j, a) in &r.coeffs {
            write!(out, " {} {:?}", problem.vars[j].name, a).unwrap();
        }
        out.push('\n');
    }
    for &(j, c) in &problem.objective {
        writeln!(out, "obj {} {:?}", problem.vars[j].name, c).unwrap();
    }
    if problem.objective_constant != 0.0 {
        writeln!(out, "const {:?}", problem.objective_constant).unwrap();
    }
    for t in &problem.bilinear {
        let loc = match t.location {
            TermLocation::Objective => "obj".to_string(),
            TermLocation::Row(r) => format!("row {r}"),
        };
        writeln!(
            out,
            "bilinear {:?} {} {} {}",
            t.coef, problem.vars[t.a].name, problem.vars[t.b].name, loc
        )
        .unwrap();
    }
    Ok(out)
}

pub fn read_problem(text: &str) -> Result<MibpProblem, MibpError> {
    let mut p = MibpProblem::new();
    let mut index = std::collections::HashMap::new();
    let mut seen_header = false;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: &str| MibpError::Parse {
            line,
            msg: msg.to_string(),
        };
        let f: Vec<&str> = content.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(&format!("bad number {s:?}")));
        let var = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| err(&format!("unknown variable {s:?}")))
        };
        if !seen_header {
            if f != ["mibp", "1"] {
                return Err(err("expected header `mibp 1`"));
            }
            seen_header = true;
            continue;
        }
        match f[0] {
            "var" => {
                if f.len() != 5 {
                    return Err(err("var takes a name, a kind and two bounds"));
                }
                let kind = match f[2] {
                    "C" => VarKind::Continuous,
                    "B" => VarKind::Binary,
                    "I" => VarKind::Integer,
                    k => return Err(err(&format!("unknown kind {k:?}"))),
                };
                let (lo, up) = (num(f[3])?, num(f[4])?);
                if index.contains_key(f[1]) {
                    return Err(err(&format!("duplicate variable {:?}", f[1])));
                }
                let id = p.add_var(f[1], lo, up, kind);
                index.insert(f[1].to_string(), id);
            }
            "row" => {
                if f.len() < 4 || !(f.len() - 4).is_multiple_of(2) {
                    return Err(err("row takes a family, a sense, a rhs and variable/coefficient pairs"));
                }
                let sense = match f[2] {
                    "le" => RowSense::Le,
                    "eq" => RowSense::Eq,
                    s => return Err(err(&format!("unknown sense {s:?}"))),
                };
                let rhs = num(f[3])?;
                let mut coeffs = Vec::with_capacity((f.len() - 4) / 2);
                for pair in f[4..].chunks(2) {
                    coeffs.push((var(pair[0])?, num(pair[1])?));
                }
                p.add_row(f[1], coeffs, sense, rhs);
            }
            "obj" => {
                if f.len() != 3 {
                    return Err(err("obj takes a variable and a coefficient"));
                }
                let j = var(f[1])?;
                p.add_objective(j, num(f[2])?);
            }
            "const" => {
                if f.len() != 2 {
                    return Err(err("const takes one value"));
                }
                p.objective_constant = num(f[1])?;
            }
            "bilinear" => {
                let location = match f.get(4).copied() {
                    Some("obj") if f.len() == 5 => TermLocation::Objective,
                    Some("row") if f.len() == 6 => {
                        let r: usize = f[5].parse().map_err(|_| err("bad row index"))?;
                        if r >= p.rows.len() {
                            return Err(err("bilinear term points at a row not yet declared"));
                        }
                        TermLocation::Row(r)
                    }
                    _ => return Err(err("bilinear takes a coefficient, two variables and a location")),
                };
                let coef = num(f[1])?;
                let (a, b) = (var(f[2])?, var(f[3])?);
                p.add_bilinear(coef, a, b, location);
            }
            other => return Err(err(&format!("unknown record {other:?}"))),
        }
    }
    if !seen_header {
        return Err(MibpError::Parse {
            line: 0,
            msg: "empty input".into(),
        });
    }
    Ok(p)
}
