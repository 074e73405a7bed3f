//! Grounding of first-order atoms and clauses over a finite domain.
//!
//! An argument slot holding entity `a` becomes the proposition `x=a`
//! (`y=a`, `z=a`, ... for later slots) and a predicate `P` becomes the
//! proposition `P`. A true atom `P(a, b)` is then the conjunction
//! `x=a & y=b & P`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::logic::{ConfidenceRule, Conjunction, Literal, PoolingRule, SymbolTable};

const SLOT_NAMES: [&str; 6] = ["x", "y", "z", "u", "v", "w"];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Entity {
    pub id: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Predicate {
    pub id: usize,
    pub name: String,
    pub arity: usize,
}

/// `predicate(args...)` by id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: usize,
    pub args: Vec<usize>,
}

impl GroundAtom {
    pub fn new(predicate: usize, args: Vec<usize>) -> Self {
        Self { predicate, args }
    }
}

pub fn slot_name(slot: usize) -> String {
    SLOT_NAMES
        .get(slot)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("s{slot}"))
}

/// Symbol layout: one block of entity propositions per slot, in slot order,
/// followed by one proposition per predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundingScheme {
    pub entities: Vec<Entity>,
    pub predicates: Vec<Predicate>,
    pub n_slots: usize,
    pub omit_entity_negations: bool,
    pub symbols: SymbolTable,
    entity_index: HashMap<String, usize>,
    predicate_index: HashMap<String, usize>,
}

impl GroundingScheme {
    pub fn new(
        entities: &[String],
        predicates: &[(String, usize)],
        n_slots: usize,
        omit_entity_negations: bool,
    ) -> Result<Self> {
        if entities.is_empty() || predicates.is_empty() || n_slots == 0 {
            return Err(Error::Grounding(
                "a scheme needs at least one entity, predicate and slot".into(),
            ));
        }
        let mut entity_index = HashMap::new();
        for (i, name) in entities.iter().enumerate() {
            if entity_index.insert(name.clone(), i).is_some() {
                return Err(Error::Duplicate {
                    kind: "entity",
                    name: name.clone(),
                });
            }
        }
        let mut predicate_index = HashMap::new();
        for (i, (name, arity)) in predicates.iter().enumerate() {
            if *arity == 0 {
                return Err(Error::Grounding(format!("predicate `{name}` has arity 0")));
            }
            if predicate_index.insert(name.clone(), i).is_some() {
                return Err(Error::Duplicate {
                    kind: "relation",
                    name: name.clone(),
                });
            }
        }
        let mut names = Vec::with_capacity(n_slots * entities.len() + predicates.len());
        for slot in 0..n_slots {
            let s = slot_name(slot);
            names.extend(entities.iter().map(|e| format!("{s}={e}")));
        }
        names.extend(predicates.iter().map(|(p, _)| p.clone()));
        Ok(Self {
            entities: entities
                .iter()
                .enumerate()
                .map(|(id, name)| Entity {
                    id,
                    name: name.clone(),
                })
                .collect(),
            predicates: predicates
                .iter()
                .enumerate()
                .map(|(id, (name, arity))| Predicate {
                    id,
                    name: name.clone(),
                    arity: *arity,
                })
                .collect(),
            n_slots,
            omit_entity_negations,
            symbols: SymbolTable::from_names(names)?,
            entity_index,
            predicate_index,
        })
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn entity(&self, name: &str) -> Result<usize> {
        self.entity_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownEntity(name.to_string()))
    }

    pub fn predicate(&self, name: &str) -> Result<usize> {
        self.predicate_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn slot_symbol(&self, slot: usize, entity: usize) -> Result<usize> {
        if slot >= self.n_slots {
            return Err(Error::Grounding(format!(
                "slot {slot} exceeds the scheme's {} slots",
                self.n_slots
            )));
        }
        if entity >= self.entities.len() {
            return Err(Error::UnknownEntity(format!("#{entity}")));
        }
        Ok(slot * self.entities.len() + entity)
    }

    pub fn predicate_symbol(&self, predicate: usize) -> Result<usize> {
        if predicate >= self.predicates.len() {
            return Err(Error::UnknownRelation(format!("#{predicate}")));
        }
        Ok(self.n_slots * self.entities.len() + predicate)
    }

    /// Symbols of the whole predicate block, in predicate order.
    pub fn predicate_block(&self) -> std::ops::Range<usize> {
        let start = self.n_slots * self.entities.len();
        start..start + self.predicates.len()
    }

    pub fn slot_block(&self, slot: usize) -> std::ops::Range<usize> {
        let n = self.entities.len();
        slot * n..(slot + 1) * n
    }

    pub fn atom(&self, predicate: &str, args: &[&str]) -> Result<GroundAtom> {
        let p = self.predicate(predicate)?;
        let args = args.iter().map(|a| self.entity(a)).collect::<Result<Vec<_>>>()?;
        let atom = GroundAtom::new(p, args);
        self.check_atom(&atom)?;
        Ok(atom)
    }

    pub fn check_atom(&self, atom: &GroundAtom) -> Result<()> {
        let p = self
            .predicates
            .get(atom.predicate)
            .ok_or_else(|| Error::UnknownRelation(format!("#{}", atom.predicate)))?;
        if atom.args.len() != p.arity {
            return Err(Error::Grounding(format!(
                "`{}` has arity {} but was given {} arguments",
                p.name,
                p.arity,
                atom.args.len()
            )));
        }
        if let Some(&bad) = atom.args.iter().find(|&&e| e >= self.entities.len()) {
            return Err(Error::UnknownEntity(format!("#{bad}")));
        }
        Ok(())
    }

    pub fn render_atom(&self, atom: &GroundAtom) -> String {
        let args: Vec<&str> = atom
            .args
            .iter()
            .map(|&e| self.entities.get(e).map_or("?", |e| e.name.as_str()))
            .collect();
        let name = self
            .predicates
            .get(atom.predicate)
            .map_or("?", |p| p.name.as_str());
        format!("{name}({})", args.join(","))
    }
}

/// One confidence rule `h <-> x=a & y=b & P` per model of `p`, with
/// argument `k` bound to slot `k`.
pub fn ground_predicate(
    p: &Predicate,
    models: &[GroundAtom],
    scheme: &GroundingScheme,
    confidence: f64,
) -> Result<Vec<ConfidenceRule>> {
    models
        .iter()
        .map(|atom| {
            if atom.predicate != p.id {
                return Err(Error::Grounding(format!(
                    "model {} is not an instance of `{}`",
                    scheme.render_atom(atom),
                    p.name
                )));
            }
            if atom.args.len() != p.arity {
                return Err(Error::Grounding(format!(
                    "model {} has {} arguments, `{}` has arity {}",
                    scheme.render_atom(atom),
                    atom.args.len(),
                    p.name,
                    p.arity
                )));
            }
            scheme.check_atom(atom)?;
            let mut literals = atom
                .args
                .iter()
                .enumerate()
                .map(|(slot, &e)| scheme.slot_symbol(slot, e).map(Literal::pos))
                .collect::<Result<Vec<_>>>()?;
            literals.push(Literal::pos(scheme.predicate_symbol(p.id)?));
            Ok(ConfidenceRule {
                confidence,
                hypothesis: format!("h:{}", scheme.render_atom(atom)),
                body: Conjunction::new(literals)?,
            })
        })
        .collect()
}

/// Grounds the clause `head <- body`. Distinct entities are bound to slots
/// in order of first appearance, scanning the body before the head.
///
/// The confidence rule is the conjunction of every entity and predicate
/// proposition (head predicate first). The pooling rule collects the
/// negated entity propositions, unless the scheme omits them, and the
/// negated body predicates; it is `None` when nothing is left.
pub fn ground_example_clause(
    head: &GroundAtom,
    body: &[GroundAtom],
    scheme: &GroundingScheme,
    c: f64,
) -> Result<(ConfidenceRule, Option<PoolingRule>)> {
    scheme.check_atom(head)?;
    for atom in body {
        scheme.check_atom(atom)?;
    }
    let mut entities: Vec<usize> = Vec::new();
    for &e in body.iter().chain(std::iter::once(head)).flat_map(|a| &a.args) {
        if !entities.contains(&e) {
            entities.push(e);
        }
    }
    let entity_lits = entities
        .iter()
        .enumerate()
        .map(|(slot, &e)| scheme.slot_symbol(slot, e).map(Literal::pos))
        .collect::<Result<Vec<_>>>()?;

    let mut body_preds: Vec<usize> = Vec::new();
    for atom in body {
        if atom.predicate == head.predicate {
            return Err(Error::Grounding(format!(
                "recursive clause on `{}` cannot be grounded into distinct propositions",
                scheme.predicates[head.predicate].name
            )));
        }
        if !body_preds.contains(&atom.predicate) {
            body_preds.push(atom.predicate);
        }
    }
    let head_lit = Literal::pos(scheme.predicate_symbol(head.predicate)?);
    let pred_lits = body_preds
        .iter()
        .map(|&p| scheme.predicate_symbol(p).map(Literal::pos))
        .collect::<Result<Vec<_>>>()?;

    let mut conj = entity_lits.clone();
    conj.push(head_lit);
    conj.extend(&pred_lits);
    let label = scheme.render_atom(head);
    let cr = ConfidenceRule {
        confidence: c,
        hypothesis: format!("h:{label}"),
        body: Conjunction::new(conj)?,
    };

    let mut pool: Vec<Conjunction> = Vec::new();
    if !scheme.omit_entity_negations {
        pool.extend(entity_lits.iter().map(|l| Conjunction {
            literals: vec![l.negate()],
        }));
    }
    pool.extend(pred_lits.iter().map(|l| Conjunction {
        literals: vec![l.negate()],
    }));
    let pr = (!pool.is_empty()).then(|| PoolingRule {
        confidence: c,
        hypothesis: format!("hp:{label}"),
        disjuncts: pool,
    });
    Ok((cr, pr))
}

/// Two-slot layout `[x block | y block | relation block]` for binary relations.
pub fn build_kinship_scheme(people: &[Entity], relations: &[Predicate]) -> Result<GroundingScheme> {
    if let Some(r) = relations.iter().find(|r| r.arity != 2) {
        return Err(Error::Grounding(format!(
            "relation `{}` has arity {}; only binary relations are supported",
            r.name, r.arity
        )));
    }
    let names: Vec<String> = people.iter().map(|p| p.name.clone()).collect();
    let preds: Vec<(String, usize)> = relations.iter().map(|r| (r.name.clone(), 2)).collect();
    GroundingScheme::new(&names, &preds, 2, true)
}
