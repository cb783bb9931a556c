//! DIMACS CNF reader restricted to 3-CNF.
//!
//! Accepts `c` comment lines, one `p cnf <vars> <clauses>` header, clauses
//! terminated by `0` (possibly spanning lines) and the `%` trailer used by
//! the SATLIB benchmark files.

use std::path::Path;

use sgda_core::hardness::Sat3Instance;

use crate::error::{HarnessError, Result};

pub fn parse_dimacs(text: &str, path: &Path) -> Result<Sat3Instance> {
    let err = |line: usize, message: String| HarnessError::Parse { path: path.to_path_buf(), line, message };
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<[i64; 3]> = Vec::new();
    let mut pending: Vec<i64> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if header.is_some() {
                return Err(err(line_no, "duplicate problem line".into()));
            }
            let parts: Vec<&str> = rest.split_whitespace().collect();
            match parts.as_slice() {
                ["cnf", v, c] => {
                    let v = v.parse().map_err(|_| err(line_no, format!("bad variable count `{v}`")))?;
                    let c = c.parse().map_err(|_| err(line_no, format!("bad clause count `{c}`")))?;
                    header = Some((v, c));
                }
                _ => return Err(err(line_no, "expected `p cnf <vars> <clauses>`".into())),
            }
            continue;
        }
        let (vars, _) = header.ok_or_else(|| err(line_no, "clause before problem line".into()))?;
        for tok in line.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| err(line_no, format!("bad literal `{tok}`")))?;
            if lit == 0 {
                let clause: [i64; 3] = pending
                    .as_slice()
                    .try_into()
                    .map_err(|_| err(line_no, format!("clause {} has {} literals, expected 3", clauses.len() + 1, pending.len())))?;
                clauses.push(clause);
                pending.clear();
            } else {
                if lit.unsigned_abs() as usize > vars {
                    return Err(err(line_no, format!("literal {lit} exceeds {vars} variables")));
                }
                pending.push(lit);
            }
        }
    }
    let (vars, count) = header.ok_or_else(|| err(0, "missing problem line".into()))?;
    if !pending.is_empty() {
        return Err(err(text.lines().count(), "unterminated clause".into()));
    }
    if clauses.len() != count {
        return Err(err(0, format!("header declares {count} clauses, found {}", clauses.len())));
    }
    Ok(Sat3Instance::from_dimacs(vars, &clauses)?)
}

pub fn read_dimacs(path: &Path) -> Result<Sat3Instance> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_dimacs(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Sat3Instance> {
        parse_dimacs(text, Path::new("t.cnf"))
    }

    #[test]
    fn reads_multiline_clauses_and_trailer() {
        let sat = parse("c example\np cnf 3 4\n1 -2 3 0\n-1 2\n -3 0\n1 2 3 0 -1 -2 -3 0\n%\n0\n").unwrap();
        assert_eq!(sat.num_vars(), 3);
        assert_eq!(sat.clauses().len(), 4);
        assert_eq!(sat.clauses()[1].map(|l| l.to_dimacs()), [-1, 2, -3]);
    }

    #[test]
    fn rejects_malformed_input() {
        for text in [
            "1 2 3 0\n",
            "p cnf 3 1\n1 2 0\n",
            "p cnf 3 1\n1 2 4 0\n",
            "p cnf 3 2\n1 2 3 0\n",
            "p cnf 3 1\n1 2 3\n",
            "p cnf 3 1\n1 x 3 0\n",
            "p dnf 3 1\n",
        ] {
            assert!(parse(text).is_err(), "{text:?}");
        }
    }
}
