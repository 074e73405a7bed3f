//! Hypothetical-syllogism elimination of unobserved symbols.

use std::collections::{HashMap, HashSet};

use super::{IfThenRule, KnowledgeBase, Literal, SymbolTable};
use crate::error::{Error, Result};

/// How a flattened rule picks its confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlattenConfidence {
    /// Keep the confidence of the rule whose body was expanded.
    #[default]
    Consumer,
    /// Smallest confidence along the chain of rules that was used.
    Minimum,
}

/// One way of deriving a hidden symbol: literals over observed symbols plus
/// the smallest confidence of the rules involved.
#[derive(Debug, Clone)]
struct Derivation {
    literals: Vec<Literal>,
    min_confidence: f64,
}

struct Eliminator<'a> {
    kb: &'a KnowledgeBase,
    hidden: HashSet<usize>,
    definitions: HashMap<usize, Vec<&'a IfThenRule>>,
    memo: HashMap<usize, Vec<Derivation>>,
    visiting: HashSet<usize>,
}

impl Eliminator<'_> {
    fn name(&self, id: usize) -> String {
        self.kb.symbols.name(id).unwrap_or("?").to_string()
    }

    fn expand_symbol(&mut self, s: usize) -> Result<Vec<Derivation>> {
        if let Some(done) = self.memo.get(&s) {
            return Ok(done.clone());
        }
        if !self.visiting.insert(s) {
            return Err(Error::CyclicHidden(self.name(s)));
        }
        let defs = self
            .definitions
            .get(&s)
            .cloned()
            .ok_or_else(|| Error::UndefinedHidden(self.name(s)))?;
        let mut out = Vec::new();
        for rule in defs {
            for mut d in self.expand_body(&rule.body)? {
                d.min_confidence = d.min_confidence.min(rule.confidence);
                out.push(d);
            }
        }
        self.visiting.remove(&s);
        self.memo.insert(s, out.clone());
        Ok(out)
    }

    /// Cross product of the alternatives of every body literal. Derivations
    /// that need a symbol both ways are dropped (their body never holds).
    fn expand_body(&mut self, body: &[Literal]) -> Result<Vec<Derivation>> {
        let mut partial = vec![Derivation {
            literals: Vec::new(),
            min_confidence: f64::INFINITY,
        }];
        for lit in body {
            let alternatives = if self.hidden.contains(&lit.symbol) {
                if lit.negated {
                    return Err(Error::NonHornHidden(self.name(lit.symbol)));
                }
                self.expand_symbol(lit.symbol)?
            } else {
                vec![Derivation {
                    literals: vec![*lit],
                    min_confidence: f64::INFINITY,
                }]
            };
            let mut next = Vec::with_capacity(partial.len() * alternatives.len());
            for p in &partial {
                for alt in &alternatives {
                    if let Some(merged) = merge(&p.literals, &alt.literals) {
                        next.push(Derivation {
                            literals: merged,
                            min_confidence: p.min_confidence.min(alt.min_confidence),
                        });
                    }
                }
            }
            partial = next;
        }
        Ok(partial)
    }
}

fn merge(a: &[Literal], b: &[Literal]) -> Option<Vec<Literal>> {
    let mut out = a.to_vec();
    for lit in b {
        match out.iter().find(|l| l.symbol == lit.symbol) {
            Some(existing) if existing.negated != lit.negated => return None,
            Some(_) => {}
            None => out.push(*lit),
        }
    }
    Some(out)
}

/// [`eliminate_intermediates_with`] using the consumer rule's confidence.
pub fn eliminate_intermediates(kb: &KnowledgeBase, hidden: &[&str]) -> Result<KnowledgeBase> {
    eliminate_intermediates_with(kb, hidden, FlattenConfidence::Consumer)
}

/// Replaces every hidden symbol in a rule body by the bodies of the rules
/// defining it, distributing multiple definitions into separate rules.
/// Rules that define hidden symbols are dropped and the returned knowledge
/// base is over the remaining symbols, in their original order. Hidden names
/// that do not occur in `kb` are ignored.
pub fn eliminate_intermediates_with(
    kb: &KnowledgeBase,
    hidden: &[&str],
    policy: FlattenConfidence,
) -> Result<KnowledgeBase> {
    let hidden: HashSet<usize> = hidden.iter().filter_map(|h| kb.symbols.id(h)).collect();
    let mut definitions: HashMap<usize, Vec<&IfThenRule>> = HashMap::new();
    for rule in &kb.rules {
        if hidden.contains(&rule.head.symbol) {
            if rule.head.negated {
                return Err(Error::NonHornHidden(
                    kb.symbols.name(rule.head.symbol).unwrap_or("?").to_string(),
                ));
            }
            definitions.entry(rule.head.symbol).or_default().push(rule);
        }
    }

    let mut elim = Eliminator {
        kb,
        hidden: hidden.clone(),
        definitions,
        memo: HashMap::new(),
        visiting: HashSet::new(),
    };

    let (observed, remap): (Vec<&str>, HashMap<usize, usize>) = {
        let names: Vec<&str> = kb
            .symbols
            .names()
            .enumerate()
            .filter(|(id, _)| !hidden.contains(id))
            .map(|(_, n)| n)
            .collect();
        let remap = kb
            .symbols
            .names()
            .enumerate()
            .filter(|(id, _)| !hidden.contains(id))
            .enumerate()
            .map(|(new, (old, _))| (old, new))
            .collect();
        (names, remap)
    };
    let symbols = SymbolTable::from_names(observed.iter().copied())?;
    let relabel = |lit: &Literal| Literal {
        symbol: remap[&lit.symbol],
        negated: lit.negated,
    };

    let mut rules = Vec::new();
    for rule in &kb.rules {
        if hidden.contains(&rule.head.symbol) {
            continue;
        }
        for mut d in elim.expand_body(&rule.body)? {
            // `h <- h & b` is a tautology; `h <- !h & b` is equivalent to `h <- b`.
            if d.literals.contains(&rule.head) {
                continue;
            }
            d.literals.retain(|l| l.symbol != rule.head.symbol);
            let confidence = match policy {
                FlattenConfidence::Consumer => rule.confidence,
                FlattenConfidence::Minimum => rule.confidence.min(d.min_confidence),
            };
            rules.push(IfThenRule {
                confidence,
                head: relabel(&rule.head),
                body: d.literals.iter().map(relabel).collect(),
            });
        }
    }
    Ok(KnowledgeBase { symbols, rules })
}
