//! Confidence and pooling rules to hidden units.
//!
//! A conjunction with `P` positive literals and confidence `c` becomes a
//! unit with weight `+c` on positive and `-c` on negative literals and bias
//! `c * (epsilon - P)`. Its potential is `c * epsilon` when the conjunction
//! holds and at most `c * (epsilon - 1)` otherwise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{ConfidenceRule, Conjunction, KnowledgeBase, PoolingRule};
use crate::rbm::{HiddenUnit, Member, Rbm};

const FREE_INIT_STD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompileConfig {
    /// Satisfied-conjunct margin, strictly inside (0, 1).
    pub epsilon: f64,
    pub n_free_hidden: usize,
    pub seed: u64,
}

impl Default for CompileConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            n_free_hidden: 0,
            seed: 0,
        }
    }
}

impl CompileConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

fn member_for(c: f64, conj: &Conjunction, n_visible: usize, epsilon: f64) -> Result<Member> {
    if conj.is_empty() {
        return Err(Error::EmptyConjunction);
    }
    let mut weights = vec![0.0; n_visible];
    for lit in &conj.literals {
        if lit.symbol >= n_visible {
            return Err(Error::SymbolOutOfRange {
                id: lit.symbol,
                len: n_visible,
            });
        }
        weights[lit.symbol] = if lit.negated { -c } else { c };
    }
    Ok(Member {
        weights,
        bias: c * (epsilon - conj.positives() as f64),
    })
}

pub fn compile_conjunction(
    c: f64,
    conj: &Conjunction,
    n_visible: usize,
    cfg: &CompileConfig,
) -> Result<HiddenUnit> {
    cfg.validate()?;
    let m = member_for(c, conj, n_visible, cfg.epsilon)?;
    Ok(HiddenUnit::standard("h", m.weights, m.bias))
}

/// One member per disjunct, each built like [`compile_conjunction`].
pub fn compile_pooling(
    c: f64,
    pr: &PoolingRule,
    n_visible: usize,
    cfg: &CompileConfig,
) -> Result<HiddenUnit> {
    cfg.validate()?;
    if pr.disjuncts.is_empty() {
        return Err(Error::EmptyPool);
    }
    let members = pr
        .disjuncts
        .iter()
        .map(|d| member_for(c, d, n_visible, cfg.epsilon))
        .collect::<Result<Vec<_>>>()?;
    Ok(HiddenUnit::pooling(pr.hypothesis.clone(), members))
}

/// Builds a model over `visible_names` from compiled rule pairs, followed
/// by `cfg.n_free_hidden` free units drawn from `N(0, 0.01^2)`.
pub fn compile_rules(
    visible_names: Vec<String>,
    rules: &[(ConfidenceRule, Option<PoolingRule>)],
    cfg: &CompileConfig,
) -> Result<Rbm> {
    cfg.validate()?;
    let n = visible_names.len();
    let mut model = Rbm::with_names(visible_names);
    for (cr, pr) in rules {
        let mut unit = compile_conjunction(cr.confidence, &cr.body, n, cfg)?;
        unit.label = cr.hypothesis.clone();
        model.hidden.push(unit);
        if let Some(pr) = pr {
            model.hidden.push(compile_pooling(pr.confidence, pr, n, cfg)?);
        }
    }
    model.n_rule_units = model.hidden.len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, FREE_INIT_STD).expect("valid normal");
    for j in 0..cfg.n_free_hidden {
        let weights = (0..n).map(|_| normal.sample(&mut rng)).collect();
        model
            .hidden
            .push(HiddenUnit::standard(format!("free{j}"), weights, 0.0));
    }
    Ok(model)
}

/// Confidence/pooling pairs of every rule, labelled `h<i>` and `hp<i>`.
pub fn kb_confidence_rules(kb: &KnowledgeBase) -> Result<Vec<(ConfidenceRule, Option<PoolingRule>)>> {
    kb.rules
        .iter()
        .enumerate()
        .map(|(i, rule)| {
            let (mut cr, pr) = rule.to_dnf().to_confidence_rules()?;
            cr.hypothesis = format!("h{i}");
            let pr = pr.map(|mut p| {
                p.hypothesis = format!("hp{i}");
                p
            });
            Ok((cr, pr))
        })
        .collect()
}

/// Rule units in rule order (confidence unit, then pooling unit when the
/// body is non-empty), then free units. Visible layout follows the symbol
/// table and visible biases are zero.
pub fn compile_kb(kb: &KnowledgeBase, cfg: &CompileConfig) -> Result<Rbm> {
    let names = kb.symbols.names().map(str::to_string).collect();
    compile_rules(names, &kb_confidence_rules(kb)?, cfg)
}

/// For each hidden unit of a model built by [`compile_kb`], the rule it came from.
/// Free units map to `None`.
pub fn unit_origins(kb: &KnowledgeBase, n_hidden: usize) -> Vec<Option<usize>> {
    let mut out = Vec::with_capacity(n_hidden);
    for (i, rule) in kb.rules.iter().enumerate() {
        out.push(Some(i));
        if !rule.body.is_empty() {
            out.push(Some(i));
        }
    }
    out.resize(n_hidden, None);
    out.truncate(n_hidden);
    out
}
