//! Versioned line-oriented model format.
//!
//! ```text
//! rulerbm-model 1
//! visible <n>
//! <name> <bias>                  n lines
//! rule_units <k>
//! hidden <m>
//! standard <label>               then one row: <bias> <w_0> .. <w_{n-1}>
//! pooling <members> <label>      then one row per member
//! end
//! ```
//!
//! Reals are written in shortest round-trip form, so reading a written
//! model reproduces it bit for bit.

use std::fmt::Write as _;

use super::{HiddenUnit, Member, Rbm, UnitKind};
use crate::error::{Error, Result};

pub const FORMAT_HEADER: &str = "rulerbm-model 1";

fn check_token(kind: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(Error::Format(format!(
            "{kind} `{s}` must be non-empty and contain no whitespace"
        )));
    }
    Ok(())
}

fn write_row(out: &mut String, m: &Member) {
    let _ = write!(out, "{}", m.bias);
    for w in &m.weights {
        let _ = write!(out, " {w}");
    }
    out.push('\n');
}

pub fn write_model(m: &Rbm) -> Result<String> {
    m.validate()?;
    let mut out = String::new();
    let _ = writeln!(out, "{FORMAT_HEADER}");
    let _ = writeln!(out, "visible {}", m.n_visible());
    for (name, b) in m.visible_names.iter().zip(&m.visible_bias) {
        check_token("visible name", name)?;
        let _ = writeln!(out, "{name} {b}");
    }
    let _ = writeln!(out, "rule_units {}", m.n_rule_units);
    let _ = writeln!(out, "hidden {}", m.n_hidden());
    for unit in &m.hidden {
        check_token("unit label", &unit.label)?;
        match &unit.kind {
            UnitKind::Standard(member) => {
                let _ = writeln!(out, "standard {}", unit.label);
                write_row(&mut out, member);
            }
            UnitKind::Pooling(members) => {
                let _ = writeln!(out, "pooling {} {}", members.len(), unit.label);
                for member in members {
                    write_row(&mut out, member);
                }
            }
        }
    }
    out.push_str("end\n");
    Ok(out)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, line)) => {
                self.last = i + 1;
                Ok(line)
            }
            None => Err(Error::Format("unexpected end of model".into())),
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Format(format!("line {}: {msg}", self.last))
    }

    fn keyed_count(&mut self, key: &str) -> Result<usize> {
        let line = self.next()?;
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(k), Some(v), None) if k == key => {
                v.parse().map_err(|_| self.err(format!("bad count `{v}`")))
            }
            _ => Err(self.err(format!("expected `{key} <count>`"))),
        }
    }

    fn real(&self, s: &str) -> Result<f64> {
        s.parse().map_err(|_| self.err(format!("bad number `{s}`")))
    }

    fn row(&mut self, n: usize) -> Result<Member> {
        let line = self.next()?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|s| self.real(s))
            .collect::<Result<_>>()?;
        if values.len() != n + 1 {
            return Err(self.err(format!("expected {} values, got {}", n + 1, values.len())));
        }
        Ok(Member {
            bias: values[0],
            weights: values[1..].to_vec(),
        })
    }
}

pub fn read_model(text: &str) -> Result<Rbm> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    if lines.next()?.trim() != FORMAT_HEADER {
        return Err(lines.err(format!("expected header `{FORMAT_HEADER}`")));
    }
    let n = lines.keyed_count("visible")?;
    let mut names = Vec::with_capacity(n);
    let mut bias = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next()?;
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(name), Some(b), None) => {
                names.push(name.to_string());
                bias.push(lines.real(b)?);
            }
            _ => return Err(lines.err("expected `<name> <bias>`")),
        }
    }
    let n_rule_units = lines.keyed_count("rule_units")?;
    let m = lines.keyed_count("hidden")?;
    let mut hidden = Vec::with_capacity(m);
    for _ in 0..m {
        let line = lines.next()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let unit = match parts.as_slice() {
            ["standard", label] => HiddenUnit {
                label: label.to_string(),
                kind: UnitKind::Standard(lines.row(n)?),
            },
            ["pooling", count, label] => {
                let k: usize = count
                    .parse()
                    .map_err(|_| lines.err(format!("bad member count `{count}`")))?;
                let members = (0..k).map(|_| lines.row(n)).collect::<Result<Vec<_>>>()?;
                HiddenUnit {
                    label: label.to_string(),
                    kind: UnitKind::Pooling(members),
                }
            }
            _ => return Err(lines.err("expected `standard <label>` or `pooling <k> <label>`")),
        };
        hidden.push(unit);
    }
    if lines.next()?.trim() != "end" {
        return Err(lines.err("expected `end`"));
    }
    let model = Rbm {
        visible_names: names,
        visible_bias: bias,
        hidden,
        n_rule_units,
    };
    model.validate()?;
    Ok(model)
}
