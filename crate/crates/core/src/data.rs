//! Dataset loaders, one-hot encoding and result emission.

use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::{build_kinship_scheme, Entity, GroundAtom, Predicate};
use crate::logic::SymbolTable;
use crate::relpipe::ExampleSet;

pub const PROMOTER_LENGTH: usize = 57;
pub const NUCLEOTIDES: [char; 4] = ['a', 'c', 'g', 't'];
pub const PROMOTER_LABEL: &str = "promoter";

/// The promoter domain theory shipped with the crate.
pub const PROMOTER_RULES: &str = include_str!("../assets/promoter.rules");
/// Symbols of the promoter theory that never appear in the data.
pub const PROMOTER_INTERMEDIATES: [&str; 4] = ["contact", "minus_35", "minus_10", "conformation"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromoterRecord {
    pub label: bool,
    pub name: String,
    pub sequence: String,
}

fn data_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses `+,name,sequence` lines. Whitespace inside the sequence is
/// ignored, case is folded, and blank lines are skipped.
pub fn parse_promoters(text: &str, path: &Path) -> Result<Vec<PromoterRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let no = i + 1;
        let mut parts = line.splitn(3, ',');
        let (label, name, seq) = match (parts.next(), parts.next(), parts.next()) {
            (Some(l), Some(n), Some(s)) => (l.trim(), n.trim(), s),
            _ => return Err(data_err(path, no, "expected `label,name,sequence`")),
        };
        let label = match label {
            "+" => true,
            "-" => false,
            other => return Err(data_err(path, no, format!("label must be + or -, got `{other}`"))),
        };
        let sequence: String = seq
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        if let Some(bad) = sequence.chars().find(|c| !NUCLEOTIDES.contains(c)) {
            return Err(data_err(path, no, format!("record `{name}`: invalid base `{bad}`")));
        }
        if sequence.len() != PROMOTER_LENGTH {
            return Err(data_err(
                path,
                no,
                format!(
                    "record `{name}`: sequence has {} bases, expected {PROMOTER_LENGTH}",
                    sequence.len()
                ),
            ));
        }
        out.push(PromoterRecord {
            label,
            name: name.to_string(),
            sequence,
        });
    }
    Ok(out)
}

pub fn load_promoters(path: impl AsRef<Path>) -> Result<Vec<PromoterRecord>> {
    let path = path.as_ref();
    parse_promoters(&fs::read_to_string(path)?, path)
}

/// `p0=a, p0=c, p0=g, p0=t, p1=a, ..., p56=t, promoter`.
pub fn promoter_symbols() -> SymbolTable {
    let names = (0..PROMOTER_LENGTH)
        .flat_map(|p| NUCLEOTIDES.iter().map(move |b| format!("p{p}={b}")))
        .chain(std::iter::once(PROMOTER_LABEL.to_string()));
    SymbolTable::from_names(names).expect("distinct names")
}

pub fn promoter_label_index() -> usize {
    PROMOTER_LENGTH * NUCLEOTIDES.len()
}

/// 228 one-hot sequence bits followed by the label bit.
pub fn one_hot_promoter(r: &PromoterRecord) -> Vec<bool> {
    let mut bits = vec![false; promoter_label_index() + 1];
    for (p, c) in r.sequence.chars().enumerate() {
        if let Some(k) = NUCLEOTIDES.iter().position(|&b| b == c) {
            bits[p * 4 + k] = true;
        }
    }
    bits[promoter_label_index()] = r.label;
    bits
}

/// Inverse of the sequence part of [`one_hot_promoter`].
pub fn decode_promoter(bits: &[bool]) -> Result<String> {
    if bits.len() < promoter_label_index() {
        return Err(Error::Dimension {
            expected: promoter_label_index() + 1,
            actual: bits.len(),
        });
    }
    (0..PROMOTER_LENGTH)
        .map(|p| {
            let block = &bits[p * 4..p * 4 + 4];
            match block.iter().filter(|&&b| b).count() {
                1 => Ok(NUCLEOTIDES[block.iter().position(|&b| b).expect("one set")]),
                n => Err(Error::Format(format!("position {p} has {n} bases set"))),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KinshipTriple {
    pub relation: String,
    pub person1: String,
    pub person2: String,
}

/// Parses one `relation(person1, person2)` atom.
pub fn parse_atom(text: &str) -> Option<KinshipTriple> {
    let text = text.trim();
    let open = text.find('(')?;
    let inner = text[open + 1..].strip_suffix(')')?;
    let relation = text[..open].trim();
    let mut args = inner.split(',').map(str::trim);
    let (p1, p2) = (args.next()?, args.next()?);
    let valid = |s: &str| !s.is_empty() && !s.contains(|c: char| c.is_whitespace() || "(),".contains(c));
    if args.next().is_some() || !valid(relation) || !valid(p1) || !valid(p2) {
        return None;
    }
    Some(KinshipTriple {
        relation: relation.to_string(),
        person1: p1.to_string(),
        person2: p2.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinshipData {
    pub examples: ExampleSet,
    pub people: Vec<Entity>,
    pub relations: Vec<Predicate>,
}

/// One atom per line; `#` comments and blank lines are ignored. People and
/// relations are numbered in order of first appearance.
pub fn parse_kinship(text: &str, path: &Path) -> Result<KinshipData> {
    let mut triples = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut people: IndexSet<String> = IndexSet::new();
    let mut relations: IndexSet<String> = IndexSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let t = parse_atom(line)
            .ok_or_else(|| data_err(path, i + 1, format!("expected `relation(person1,person2)`, got `{line}`")))?;
        if !seen.insert(t.clone()) {
            return Err(data_err(path, i + 1, format!("duplicate triple `{line}`")));
        }
        relations.insert(t.relation.clone());
        people.insert(t.person1.clone());
        people.insert(t.person2.clone());
        triples.push(t);
    }
    if triples.is_empty() {
        return Err(data_err(path, 0, "no triples"));
    }
    let people: Vec<Entity> = people
        .into_iter()
        .enumerate()
        .map(|(id, name)| Entity { id, name })
        .collect();
    let relations: Vec<Predicate> = relations
        .into_iter()
        .enumerate()
        .map(|(id, name)| Predicate { id, name, arity: 2 })
        .collect();
    let scheme = build_kinship_scheme(&people, &relations)?;
    let atoms = triples
        .iter()
        .map(|t| {
            Ok(GroundAtom::new(
                scheme.predicate(&t.relation)?,
                vec![scheme.entity(&t.person1)?, scheme.entity(&t.person2)?],
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KinshipData {
        examples: ExampleSet::new(atoms, scheme)?,
        people,
        relations,
    })
}

pub fn load_kinship(path: impl AsRef<Path>) -> Result<KinshipData> {
    let path = path.as_ref();
    parse_kinship(&fs::read_to_string(path)?, path)
}

/// One measurement of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub train_size: usize,
    pub repeat: usize,
    pub seed: u64,
    pub mode: String,
    pub accuracy: f64,
}

pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["experiment", "train_size", "repeat", "seed", "mode", "accuracy"])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn results_to_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_results(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn emit_results(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, results_to_string(rows)?)?;
    Ok(())
}
