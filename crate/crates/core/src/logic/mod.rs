//! Propositional rules, their DNF form, and the confidence/pooling rules
//! they compile to.
//!
//! A weighted if-then rule `c: y <- x1 & !x2` is rewritten as the DNF
//! `(y & x1 & !x2) | !x1 | x2`. The head conjunct becomes a confidence rule
//! and the single-literal tail is grouped into one pooling rule, so that at
//! most one of the two hypotheses is active for any assignment.

mod eliminate;
mod parse;

use std::fmt;

use indexmap::IndexSet;

use crate::error::{Error, Result};

pub use eliminate::{eliminate_intermediates, eliminate_intermediates_with, FlattenConfidence};
pub use parse::parse_rules;

/// A named propositional atom with a dense id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Symbol {
    pub id: usize,
    pub name: String,
}

/// Interned symbol names; ids are contiguous from zero in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolTable {
    names: IndexSet<String>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a table from names in order. Fails on duplicates.
    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table = Self::new();
        for name in names {
            let name = name.into();
            if table.names.contains(&name) {
                return Err(Error::Duplicate {
                    kind: "symbol",
                    name,
                });
            }
            table.names.insert(name);
        }
        Ok(table)
    }

    pub fn intern(&mut self, name: &str) -> usize {
        match self.names.get_index_of(name) {
            Some(id) => id,
            None => self.names.insert_full(name.to_string()).0,
        }
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.get_index_of(name)
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get_index(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.names.iter().enumerate().map(|(id, name)| Symbol {
            id,
            name: name.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub symbol: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(symbol: usize) -> Self {
        Self {
            symbol,
            negated: false,
        }
    }

    pub fn neg(symbol: usize) -> Self {
        Self {
            symbol,
            negated: true,
        }
    }

    pub fn negate(self) -> Self {
        Self {
            symbol: self.symbol,
            negated: !self.negated,
        }
    }

    pub fn holds(&self, a: &Assignment) -> Result<bool> {
        Ok(a.get(self.symbol)? != self.negated)
    }

    pub(crate) fn display<'a>(&'a self, symbols: &'a SymbolTable) -> impl fmt::Display + 'a {
        LiteralDisplay { lit: self, symbols }
    }
}

struct LiteralDisplay<'a> {
    lit: &'a Literal,
    symbols: &'a SymbolTable,
}

impl fmt::Display for LiteralDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lit.negated {
            f.write_str("!")?;
        }
        match self.symbols.name(self.lit.symbol) {
            Some(name) => f.write_str(name),
            None => write!(f, "#{}", self.lit.symbol),
        }
    }
}

/// A total truth assignment, indexed by symbol id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn all_false(n: usize) -> Self {
        Self {
            bits: vec![false; n],
        }
    }

    /// Bit `i` of `index` becomes the value of symbol `i`.
    pub fn from_index(n: usize, index: u64) -> Self {
        Self {
            bits: (0..n).map(|i| (index >> i) & 1 == 1).collect(),
        }
    }

    pub fn get(&self, symbol: usize) -> Result<bool> {
        self.bits
            .get(symbol)
            .copied()
            .ok_or(Error::SymbolOutOfRange {
                id: symbol,
                len: self.bits.len(),
            })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

fn check_distinct<'a>(
    literals: impl IntoIterator<Item = &'a Literal>,
    symbols: Option<&SymbolTable>,
) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for lit in literals {
        if !seen.insert(lit.symbol) {
            let symbol = symbols
                .and_then(|t| t.name(lit.symbol))
                .map(str::to_string)
                .unwrap_or_else(|| format!("#{}", lit.symbol));
            return Err(Error::DuplicateSymbol { symbol });
        }
    }
    Ok(())
}

/// A conjunction of literals over distinct symbols; empty means true.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Conjunction {
    pub literals: Vec<Literal>,
}

impl Conjunction {
    pub fn new(literals: Vec<Literal>) -> Result<Self> {
        check_distinct(&literals, None)?;
        Ok(Self { literals })
    }

    pub fn holds(&self, a: &Assignment) -> Result<bool> {
        for lit in &self.literals {
            if !lit.holds(a)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.literals.iter().filter(|l| !l.negated).count()
    }

    pub fn render(&self, symbols: &SymbolTable) -> String {
        if self.literals.is_empty() {
            return "true".into();
        }
        self.literals
            .iter()
            .map(|l| l.display(symbols).to_string())
            .collect::<Vec<_>>()
            .join(" & ")
    }
}

/// `confidence: head <- body`.
#[derive(Debug, Clone, PartialEq)]
pub struct IfThenRule {
    pub confidence: f64,
    pub head: Literal,
    pub body: Vec<Literal>,
}

impl IfThenRule {
    pub fn new(confidence: f64, head: Literal, body: Vec<Literal>) -> Result<Self> {
        if !(confidence >= 0.0) {
            return Err(Error::NegativeConfidence {
                line: 0,
                value: confidence,
            });
        }
        check_distinct(std::iter::once(&head).chain(&body), None)?;
        Ok(Self {
            confidence,
            head,
            body,
        })
    }

    /// Material implication: false iff the body holds and the head does not.
    pub fn evaluate(&self, a: &Assignment) -> Result<bool> {
        let head = self.head.holds(a)?;
        for lit in &self.body {
            if !lit.holds(a)? {
                return Ok(true);
            }
        }
        Ok(head)
    }

    /// `(head & body) | !b1 | ... | !bn`, in body order.
    pub fn to_dnf(&self) -> Dnf {
        let mut conjuncts = Vec::with_capacity(self.body.len() + 1);
        let mut head = Vec::with_capacity(self.body.len() + 1);
        head.push(self.head);
        head.extend_from_slice(&self.body);
        conjuncts.push(Conjunction { literals: head });
        conjuncts.extend(self.body.iter().map(|l| Conjunction {
            literals: vec![l.negate()],
        }));
        Dnf {
            confidence: self.confidence,
            conjuncts,
        }
    }

    pub fn symbols(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.head.symbol).chain(self.body.iter().map(|l| l.symbol))
    }

    pub fn render(&self, symbols: &SymbolTable) -> String {
        let body = self
            .body
            .iter()
            .map(|l| l.display(symbols).to_string())
            .collect::<Vec<_>>()
            .join(" & ");
        let head = self.head.display(symbols);
        let confidence = format_confidence(self.confidence);
        if body.is_empty() {
            format!("{confidence}: {head} <-")
        } else {
            format!("{confidence}: {head} <- {body}")
        }
    }
}

/// Shortest round-trip decimal with at least one fractional digit.
pub(crate) fn format_confidence(c: f64) -> String {
    let s = c.to_string();
    if s.contains('.') || !c.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dnf {
    pub confidence: f64,
    pub conjuncts: Vec<Conjunction>,
}

impl Dnf {
    pub fn evaluate(&self, a: &Assignment) -> Result<bool> {
        for conj in &self.conjuncts {
            if conj.holds(a)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Splits a DNF produced by [`IfThenRule::to_dnf`] into the head
    /// confidence rule and the pooling rule over the single-literal tail.
    /// The pooling rule is `None` when the rule body is empty.
    pub fn to_confidence_rules(&self) -> Result<(ConfidenceRule, Option<PoolingRule>)> {
        let (head, tail) = self
            .conjuncts
            .split_first()
            .ok_or_else(|| Error::MalformedDnf("no head conjunct".into()))?;
        if head.is_empty() {
            return Err(Error::MalformedDnf("head conjunct is empty".into()));
        }
        if let Some(bad) = tail.iter().position(|c| c.len() != 1) {
            return Err(Error::MalformedDnf(format!(
                "tail conjunct {} has {} literals, expected 1",
                bad + 1,
                tail[bad].len()
            )));
        }
        let cr = ConfidenceRule {
            confidence: self.confidence,
            hypothesis: "h_y".into(),
            body: head.clone(),
        };
        let pr = (!tail.is_empty()).then(|| PoolingRule {
            confidence: self.confidence,
            hypothesis: "h_p".into(),
            disjuncts: tail.to_vec(),
        });
        Ok((cr, pr))
    }
}

/// `confidence: hypothesis <-> body`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceRule {
    pub confidence: f64,
    pub hypothesis: String,
    pub body: Conjunction,
}

/// `confidence: hypothesis <-> d1 | d2 | ...`, realised by one max-pooling unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolingRule {
    pub confidence: f64,
    pub hypothesis: String,
    pub disjuncts: Vec<Conjunction>,
}

impl PoolingRule {
    pub fn holds(&self, a: &Assignment) -> Result<bool> {
        for d in &self.disjuncts {
            if d.holds(a)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    pub symbols: SymbolTable,
    pub rules: Vec<IfThenRule>,
}

impl KnowledgeBase {
    pub fn new(symbols: SymbolTable) -> Self {
        Self {
            symbols,
            rules: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_rules(text)
    }

    pub fn push(&mut self, rule: IfThenRule) -> Result<()> {
        for s in rule.symbols() {
            if s >= self.symbols.len() {
                return Err(Error::SymbolOutOfRange {
                    id: s,
                    len: self.symbols.len(),
                });
            }
        }
        self.rules.push(rule);
        Ok(())
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols.len()
    }

    /// `sum_i c_i * s_i(a)`.
    pub fn weighted_satisfiability(&self, a: &Assignment) -> Result<f64> {
        let mut total = 0.0;
        for rule in &self.rules {
            if rule.evaluate(a)? {
                total += rule.confidence;
            }
        }
        Ok(total)
    }

    /// Number of satisfied rules, ignoring confidences.
    pub fn satisfied_count(&self, a: &Assignment) -> Result<usize> {
        let mut n = 0;
        for rule in &self.rules {
            if rule.evaluate(a)? {
                n += 1;
            }
        }
        Ok(n)
    }

    /// Re-expresses the rules over `target`, which must contain every symbol
    /// the rules mention.
    pub fn project_onto(&self, target: &SymbolTable) -> Result<Self> {
        let map = |lit: &Literal| -> Result<Literal> {
            let name = self.symbols.name(lit.symbol).ok_or(Error::SymbolOutOfRange {
                id: lit.symbol,
                len: self.symbols.len(),
            })?;
            let id = target
                .id(name)
                .ok_or_else(|| Error::UnknownSymbol(name.to_string()))?;
            Ok(Literal {
                symbol: id,
                negated: lit.negated,
            })
        };
        let mut rules = Vec::with_capacity(self.rules.len());
        for rule in &self.rules {
            rules.push(IfThenRule {
                confidence: rule.confidence,
                head: map(&rule.head)?,
                body: rule.body.iter().map(map).collect::<Result<_>>()?,
            });
        }
        Ok(Self {
            symbols: target.clone(),
            rules,
        })
    }

    /// Canonical text form; parses back to the same rules.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&rule.render(&self.symbols));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1() -> KnowledgeBase {
        parse_rules("5: y <- x1 & !x2").unwrap()
    }

    // Table 2 uses (x1, x2, y); the parser interns y, x1, x2.
    fn row(kb: &KnowledgeBase, x1: bool, x2: bool, y: bool) -> Assignment {
        let mut bits = vec![false; 3];
        bits[kb.symbols.id("x1").unwrap()] = x1;
        bits[kb.symbols.id("x2").unwrap()] = x2;
        bits[kb.symbols.id("y").unwrap()] = y;
        Assignment::new(bits)
    }

    #[test]
    fn evaluate_matches_table2_rows() {
        let kb = example1();
        let r = &kb.rules[0];
        assert!(!r.evaluate(&row(&kb, true, false, false)).unwrap());
        assert!(r.evaluate(&row(&kb, false, false, false)).unwrap());
    }

    #[test]
    fn empty_body_is_vacuously_true() {
        let r = IfThenRule::new(1.0, Literal::pos(0), vec![]).unwrap();
        assert!(r.evaluate(&Assignment::new(vec![true])).unwrap());
        assert!(!r.evaluate(&Assignment::new(vec![false])).unwrap());
    }

    #[test]
    fn evaluate_unknown_symbol() {
        let r = IfThenRule::new(1.0, Literal::pos(3), vec![]).unwrap();
        assert!(matches!(
            r.evaluate(&Assignment::all_false(2)),
            Err(Error::SymbolOutOfRange { id: 3, len: 2 })
        ));
    }

    #[test]
    fn dnf_of_example1() {
        let kb = example1();
        let dnf = kb.rules[0].to_dnf();
        assert_eq!(dnf.confidence, 5.0);
        let rendered: Vec<_> = dnf
            .conjuncts
            .iter()
            .map(|c| c.render(&kb.symbols))
            .collect();
        assert_eq!(rendered, ["y & x1 & !x2", "!x1", "x2"]);
    }

    #[test]
    fn dnf_single_literal_body() {
        let kb = parse_rules("1: y <- x").unwrap();
        let dnf = kb.rules[0].to_dnf();
        let rendered: Vec<_> = dnf
            .conjuncts
            .iter()
            .map(|c| c.render(&kb.symbols))
            .collect();
        assert_eq!(rendered, ["y & x", "!x"]);
    }

    #[test]
    fn confidence_rules_of_example1() {
        let kb = example1();
        let (cr, pr) = kb.rules[0].to_dnf().to_confidence_rules().unwrap();
        let pr = pr.unwrap();
        assert_eq!(cr.confidence, 5.0);
        assert_eq!(pr.confidence, 5.0);
        assert_eq!(cr.body.render(&kb.symbols), "y & x1 & !x2");
        let pool: Vec<_> = pr.disjuncts.iter().map(|d| d.render(&kb.symbols)).collect();
        assert_eq!(pool, ["!x1", "x2"]);
    }

    #[test]
    fn one_member_pool() {
        let kb = parse_rules("1: y <- x").unwrap();
        let (cr, pr) = kb.rules[0].to_dnf().to_confidence_rules().unwrap();
        assert_eq!(cr.body.render(&kb.symbols), "y & x");
        assert_eq!(pr.unwrap().disjuncts.len(), 1);
    }

    #[test]
    fn malformed_dnf_is_rejected() {
        let empty = Dnf {
            confidence: 1.0,
            conjuncts: vec![],
        };
        assert!(matches!(
            empty.to_confidence_rules(),
            Err(Error::MalformedDnf(_))
        ));
        let wide_tail = Dnf {
            confidence: 1.0,
            conjuncts: vec![
                Conjunction::new(vec![Literal::pos(0)]).unwrap(),
                Conjunction::new(vec![Literal::pos(1), Literal::pos(2)]).unwrap(),
            ],
        };
        assert!(matches!(
            wide_tail.to_confidence_rules(),
            Err(Error::MalformedDnf(_))
        ));
    }

    #[test]
    fn weighted_satisfiability_examples() {
        let kb = example1();
        assert_eq!(
            kb.weighted_satisfiability(&row(&kb, true, false, true))
                .unwrap(),
            5.0
        );
        assert_eq!(
            kb.weighted_satisfiability(&row(&kb, true, false, false))
                .unwrap(),
            0.0
        );
        let empty = KnowledgeBase::default();
        assert_eq!(
            empty
                .weighted_satisfiability(&Assignment::all_false(0))
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn rule_rejects_duplicates_and_negative_confidence() {
        assert!(matches!(
            IfThenRule::new(1.0, Literal::pos(0), vec![Literal::neg(0)]),
            Err(Error::DuplicateSymbol { .. })
        ));
        assert!(IfThenRule::new(-1.0, Literal::pos(0), vec![]).is_err());
    }

    #[test]
    fn confidence_formatting() {
        assert_eq!(format_confidence(5.0), "5.0");
        assert_eq!(format_confidence(2.25), "2.25");
        assert_eq!(format_confidence(0.1), "0.1");
    }

    #[test]
    fn project_onto_table() {
        let kb = example1();
        let target = SymbolTable::from_names(["x1", "x2", "y", "other"]).unwrap();
        let projected = kb.project_onto(&target).unwrap();
        assert_eq!(projected.rules[0].head, Literal::pos(2));
        assert_eq!(
            projected.rules[0].body,
            vec![Literal::pos(0), Literal::neg(1)]
        );
        let small = SymbolTable::from_names(["x1"]).unwrap();
        assert!(matches!(
            kb.project_onto(&small),
            Err(Error::UnknownSymbol(_))
        ));
    }
}
