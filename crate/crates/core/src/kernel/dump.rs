//! Plain-text model dump, one record per line:
//!
//! ```text
//! MODEL <name>
//! OFFSET <value>
//! VAR <name> <lower> <upper> <cost> CONT|BIN
//! ROW <name> LE|GE|EQ <rhs> <coef> <var> <coef> <var> ...
//! END
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so a dump read back
//! reproduces the model exactly. Names must not contain whitespace.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use super::{Constraint, Sense, SolverModel, VarType, Variable};

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn parse_err(line: usize, msg: impl Into<String>) -> DumpError {
    DumpError::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn write_model<W: Write>(model: &SolverModel, mut out: W) -> Result<(), DumpError> {
    let name = if model.name.is_empty() { "model" } else { &model.name };
    writeln!(out, "MODEL {}", name.replace(char::is_whitespace, "_"))?;
    writeln!(out, "OFFSET {}", model.objective_offset)?;
    for v in &model.vars {
        let kind = match v.var_type {
            VarType::Continuous => "CONT",
            VarType::Binary => "BIN",
        };
        writeln!(out, "VAR {} {} {} {} {}", v.name, v.lower, v.upper, v.cost, kind)?;
    }
    for c in &model.cons {
        let sense = match c.sense {
            Sense::Le => "LE",
            Sense::Ge => "GE",
            Sense::Eq => "EQ",
        };
        write!(out, "ROW {} {} {}", c.name, sense, c.rhs)?;
        for &(j, a) in &c.coeffs {
            write!(out, " {} {}", a, model.vars[j].name)?;
        }
        writeln!(out)?;
    }
    writeln!(out, "END")?;
    Ok(())
}

pub fn read_model<R: BufRead>(input: R) -> Result<SolverModel, DumpError> {
    let mut model = SolverModel::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut ended = false;
    for (ln, line) in input.lines().enumerate() {
        let line = line?;
        let ln = ln + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() || toks[0].starts_with('#') {
            continue;
        }
        if ended {
            return Err(parse_err(ln, "content after END"));
        }
        let num = |s: &str| -> Result<f64, DumpError> {
            s.parse::<f64>()
                .map_err(|_| parse_err(ln, format!("bad number '{}'", s)))
        };
        match toks[0] {
            "MODEL" => model.name = toks.get(1).unwrap_or(&"model").to_string(),
            "OFFSET" => {
                let v = toks.get(1).ok_or_else(|| parse_err(ln, "missing offset"))?;
                model.objective_offset = num(v)?;
            }
            "VAR" => {
                if toks.len() != 6 {
                    return Err(parse_err(ln, "VAR needs name lb ub cost type"));
                }
                let var_type = match toks[5] {
                    "CONT" => VarType::Continuous,
                    "BIN" => VarType::Binary,
                    other => return Err(parse_err(ln, format!("unknown type '{}'", other))),
                };
                if index.contains_key(toks[1]) {
                    return Err(parse_err(ln, format!("duplicate variable '{}'", toks[1])));
                }
                index.insert(toks[1].to_string(), model.vars.len());
                model.vars.push(Variable {
                    name: toks[1].to_string(),
                    lower: num(toks[2])?,
                    upper: num(toks[3])?,
                    cost: num(toks[4])?,
                    var_type,
                });
            }
            "ROW" => {
                if toks.len() < 4 || (toks.len() - 4) % 2 != 0 {
                    return Err(parse_err(ln, "ROW needs name sense rhs and coef/var pairs"));
                }
                let sense = match toks[2] {
                    "LE" => Sense::Le,
                    "GE" => Sense::Ge,
                    "EQ" => Sense::Eq,
                    other => return Err(parse_err(ln, format!("unknown sense '{}'", other))),
                };
                let mut coeffs = Vec::with_capacity((toks.len() - 4) / 2);
                for pair in toks[4..].chunks(2) {
                    let j = *index
                        .get(pair[1])
                        .ok_or_else(|| parse_err(ln, format!("unknown variable '{}'", pair[1])))?;
                    coeffs.push((j, num(pair[0])?));
                }
                model.cons.push(Constraint {
                    name: toks[1].to_string(),
                    coeffs,
                    sense,
                    rhs: num(toks[3])?,
                });
            }
            "END" => ended = true,
            other => return Err(parse_err(ln, format!("unknown record '{}'", other))),
        }
    }
    if !ended {
        return Err(parse_err(0, "missing END"));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut m = SolverModel::new("rt");
        let a = m.add_var("v[3,1]", 0.0, f64::INFINITY, 1.0 / 3.0);
        let b = m.add_binary("y[2,4]", 0.1);
        let c = m.add_var("W[1,1]", f64::NEG_INFINITY, 7.25, -2.0);
        m.add_con("flow", vec![(a, 1.0), (c, -0.7)], Sense::Eq, 0.3);
        m.add_con("mc", vec![(a, 1.0), (b, -1e7)], Sense::Le, 0.0);
        m.objective_offset = 12.5;
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let back = read_model(buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        write_model(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(back.vars[0].cost, 1.0 / 3.0);
        assert_eq!(back.vars[2].lower, f64::NEG_INFINITY);
        assert_eq!(back.vars[1].var_type, VarType::Binary);
    }

    #[test]
    fn rejects_unknown_variable() {
        let text = "MODEL x\nVAR a 0 1 0 CONT\nROW r LE 1 1 b\nEND\n";
        assert!(read_model(text.as_bytes()).is_err());
    }
}
