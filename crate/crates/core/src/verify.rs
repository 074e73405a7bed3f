//! Exhaustive checks that a compiled model's rank energy is an affine,
//! decreasing function of satisfiability.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::compile::{compile_kb, unit_origins, CompileConfig};
use crate::error::{Error, Result};
use crate::logic::{Assignment, IfThenRule, KnowledgeBase, Literal, SymbolTable};
use crate::rbm::{Clamp, Rbm};

pub const MAX_ENUMERATION_SYMBOLS: usize = 22;
const REPORT_ROWS: usize = 64;

/// `s(x) = -a * E_rank(x) + b`, with the worst residual over all assignments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceWitness {
    pub a: f64,
    pub b: f64,
    pub max_residual: f64,
}

/// Which truth value plays `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Satisfiability {
    /// `sum_i c_i s_i(x)`.
    Weighted,
    /// Number of satisfied rules.
    Unweighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceRow {
    pub assignment: Vec<bool>,
    pub satisfiability: f64,
    pub rank_energy: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub mode: Satisfiability,
    pub witness: EquivalenceWitness,
    /// `(a, b)` implied by the compilation, when one exists.
    pub expected: Option<(f64, f64)>,
    pub tolerance: f64,
    pub passed: bool,
    pub n_assignments: u64,
    pub symbols: Vec<String>,
    /// At most 64 rows; failing assignments first when there are any.
    pub rows: Vec<EquivalenceRow>,
}

impl EquivalenceReport {
    pub fn summary(&self) -> String {
        let mode = match self.mode {
            Satisfiability::Weighted => "weighted",
            Satisfiability::Unweighted => "unweighted",
        };
        format!(
            "{mode}: a={} b={} max_residual={:e} assignments={} {}",
            self.witness.a,
            self.witness.b,
            self.witness.max_residual,
            self.n_assignments,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let header = self.symbols.join(" ");
        let _ = writeln!(out, "{header} | s | E_rank | residual");
        for row in &self.rows {
            let bits: Vec<String> = row
                .assignment
                .iter()
                .zip(&self.symbols)
                .map(|(&b, name)| format!("{:>w$}", b as u8, w = name.len()))
                .collect();
            let _ = writeln!(
                out,
                "{} | {} | {} | {:e}",
                bits.join(" "),
                row.satisfiability,
                row.rank_energy,
                row.residual
            );
        }
        if self.n_assignments > self.rows.len() as u64 {
            let _ = writeln!(out, "... {} more rows", self.n_assignments - self.rows.len() as u64);
        }
        out.push_str(&self.summary());
        out.push('\n');
        out
    }
}

fn satisfiability(kb: &KnowledgeBase, a: &Assignment, mode: Satisfiability) -> Result<f64> {
    match mode {
        Satisfiability::Weighted => kb.weighted_satisfiability(a),
        Satisfiability::Unweighted => Ok(kb.satisfied_count(a)? as f64),
    }
}

fn expected_coefficients(kb: &KnowledgeBase, epsilon: f64, mode: Satisfiability) -> Option<(f64, f64)> {
    match mode {
        Satisfiability::Weighted => Some((1.0 / epsilon, 0.0)),
        Satisfiability::Unweighted => {
            let c = kb.rules.first().map(|r| r.confidence).unwrap_or(1.0);
            if c > 0.0 && kb.rules.iter().all(|r| r.confidence == c) {
                Some((1.0 / (c * epsilon), 0.0))
            } else {
                None
            }
        }
    }
}

/// Enumerates every assignment of `kb`'s symbols, pairs satisfiability with
/// the rank energy of `m`, and checks the affine relation. The exact
/// coefficients of the compilation are tried first; a least-squares fit is
/// reported when they do not hold.
pub fn check_equivalence(
    kb: &KnowledgeBase,
    m: &Rbm,
    epsilon: f64,
    mode: Satisfiability,
    tol: f64,
) -> Result<EquivalenceReport> {
    let n = kb.n_symbols();
    if n > MAX_ENUMERATION_SYMBOLS {
        return Err(Error::EnumerationTooLarge(n));
    }
    if m.n_visible() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: m.n_visible(),
        });
    }
    let total = 1u64 << n;
    let pairs: Vec<(f64, f64)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let a = Assignment::from_index(n, idx);
            Ok((satisfiability(kb, &a, mode)?, m.rank_energy(&a.bits)?))
        })
        .collect::<Result<_>>()?;

    let residual = |a: f64, b: f64, (s, e): (f64, f64)| (s - (-a * e + b)).abs();
    let max_residual =
        |a: f64, b: f64| pairs.par_iter().map(|&p| residual(a, b, p)).reduce(|| 0.0, f64::max);

    let expected = expected_coefficients(kb, epsilon, mode);
    let witness = match expected {
        Some((a, b)) if max_residual(a, b) <= tol => EquivalenceWitness {
            a,
            b,
            max_residual: max_residual(a, b),
        },
        _ => {
            let count = pairs.len() as f64;
            let mean_e = pairs.iter().map(|p| p.1).sum::<f64>() / count;
            let mean_s = pairs.iter().map(|p| p.0).sum::<f64>() / count;
            let var_e = pairs.iter().map(|p| (p.1 - mean_e).powi(2)).sum::<f64>();
            let cov = pairs
                .iter()
                .map(|p| (p.1 - mean_e) * (p.0 - mean_s))
                .sum::<f64>();
            let a = if var_e > 0.0 {
                -cov / var_e
            } else {
                expected.map(|e| e.0).unwrap_or(1.0 / epsilon)
            };
            let b = mean_s + a * mean_e;
            EquivalenceWitness {
                a,
                b,
                max_residual: max_residual(a, b),
            }
        }
    };
    let passed = witness.a > 0.0 && witness.max_residual <= tol;

    // Rows are scored against the compilation's coefficients when known, so
    // that failing rows point at assignments where the model is wrong.
    let (ra, rb) = expected.unwrap_or((witness.a, witness.b));
    let make_row = |idx: u64| {
        let p = pairs[idx as usize];
        EquivalenceRow {
            assignment: Assignment::from_index(n, idx).bits,
            satisfiability: p.0,
            rank_energy: p.1,
            residual: residual(ra, rb, p),
        }
    };
    let mut rows: Vec<EquivalenceRow> = (0..total)
        .filter(|&i| residual(ra, rb, pairs[i as usize]) > tol)
        .take(REPORT_ROWS)
        .map(make_row)
        .collect();
    if rows.is_empty() {
        rows = (0..total.min(REPORT_ROWS as u64)).map(make_row).collect();
    }

    Ok(EquivalenceReport {
        mode,
        witness,
        expected,
        tolerance: tol,
        passed,
        n_assignments: total,
        symbols: kb.symbols.names().map(str::to_string).collect(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub target: Vec<usize>,
    pub gibbs: Vec<f64>,
    pub exact: Vec<f64>,
    pub max_deviation: f64,
    pub passed: bool,
}

/// Compares long-chain Gibbs frequencies of the target visibles with their
/// exact conditional marginals.
pub fn check_conditional_consistency<R: Rng + ?Sized>(
    m: &Rbm,
    clamp: &Clamp,
    target: &[usize],
    n_chains: usize,
    steps: usize,
    tol: f64,
    rng: &mut R,
) -> Result<ConsistencyReport> {
    if target.is_empty() {
        return Ok(ConsistencyReport {
            target: vec![],
            gibbs: vec![],
            exact: vec![],
            max_deviation: 0.0,
            passed: true,
        });
    }
    let joint = m.conditional_label(clamp, target)?;
    let exact: Vec<f64> = (0..target.len())
        .map(|bit| {
            joint
                .iter()
                .enumerate()
                .filter(|(cfg, _)| (cfg >> bit) & 1 == 1)
                .map(|(_, p)| p)
                .sum()
        })
        .collect();
    let freq = m.gibbs_infer(clamp, steps, n_chains, rng)?;
    let gibbs: Vec<f64> = target.iter().map(|&t| freq[t]).collect();
    let max_deviation = gibbs
        .iter()
        .zip(&exact)
        .map(|(g, e)| (g - e).abs())
        .fold(0.0, f64::max);
    Ok(ConsistencyReport {
        target: target.to_vec(),
        gibbs,
        exact,
        max_deviation,
        passed: max_deviation <= tol,
    })
}

/// A hidden unit whose contribution disagrees with what the rules imply.
#[derive(Debug, Clone, PartialEq)]
pub struct Suspect {
    pub unit: usize,
    pub label: String,
    /// Index of the originating rule; `None` for units the rules do not explain.
    pub rule: Option<usize>,
    pub rule_text: Option<String>,
    /// Pooling members whose affine value deviates.
    pub members: Vec<usize>,
    pub expected: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleReport {
    pub original: Vec<bool>,
    pub reduced: Vec<bool>,
    pub residual: f64,
    pub suspects: Vec<Suspect>,
}

impl CounterexampleReport {
    pub fn render(&self, symbols: &SymbolTable) -> String {
        let on: Vec<&str> = self
            .reduced
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .filter_map(|(i, _)| symbols.name(i))
            .collect();
        let mut out = format!(
            "counterexample {{{}}} residual {:e}\n",
            on.join(", "),
            self.residual
        );
        for s in &self.suspects {
            let _ = write!(out, "unit {} ({})", s.unit, s.label);
            if let Some(text) = &s.rule_text {
                let _ = write!(out, " from rule `{text}`");
            }
            if !s.members.is_empty() {
                let _ = write!(out, " members {:?}", s.members);
            }
            let _ = writeln!(out, ": expected {} got {}", s.expected, s.actual);
        }
        out
    }
}

/// Greedily switches symbols off while the weighted equivalence residual at
/// the assignment stays above `tol`, then names the units whose
/// contribution differs from a fresh compilation of `kb`.
pub fn minimize_counterexample(
    kb: &KnowledgeBase,
    m: &Rbm,
    epsilon: f64,
    failing: &Assignment,
    tol: f64,
) -> Result<CounterexampleReport> {
    let residual = |a: &Assignment| -> Result<f64> {
        Ok((m.rank_energy(&a.bits)? + epsilon * kb.weighted_satisfiability(a)?).abs())
    };
    if residual(failing)? <= tol {
        return Err(Error::NoFailure);
    }
    let mut x = failing.clone();
    loop {
        let mut changed = false;
        for i in 0..x.len() {
            if x.bits[i] {
                x.bits[i] = false;
                if residual(&x)? > tol {
                    changed = true;
                } else {
                    x.bits[i] = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let reference = compile_kb(kb, &CompileConfig::with_epsilon(epsilon))?;
    let origins = unit_origins(kb, m.n_hidden());
    let mut suspects = Vec::new();
    for (j, unit) in m.hidden.iter().enumerate() {
        let actual = unit.potential(&x.bits).max(0.0);
        let reference_unit = reference.hidden.get(j);
        let expected = reference_unit.map_or(0.0, |u| u.potential(&x.bits).max(0.0));
        if (actual - expected).abs() <= tol {
            continue;
        }
        let members = match reference_unit {
            Some(r) if unit.is_pooling() && r.members().len() == unit.members().len() => unit
                .members()
                .iter()
                .zip(r.members())
                .enumerate()
                .filter(|(_, (a, e))| (a.affine(&x.bits) - e.affine(&x.bits)).abs() > tol)
                .map(|(k, _)| k)
                .collect(),
            _ => vec![],
        };
        let rule = origins[j];
        suspects.push(Suspect {
            unit: j,
            label: unit.label.clone(),
            rule,
            rule_text: rule.map(|r| kb.rules[r].render(&kb.symbols)),
            members,
            expected,
            actual,
        });
    }
    Ok(CounterexampleReport {
        original: failing.bits.clone(),
        residual: residual(&x)?,
        reduced: x.bits,
        suspects,
    })
}

/// A random knowledge base with 1..=`max_symbols` symbols, 1..=`max_rules`
/// rules and confidences in (0, 10].
pub fn random_kb<R: Rng + ?Sized>(rng: &mut R, max_symbols: usize, max_rules: usize) -> KnowledgeBase {
    let n = rng.random_range(1..=max_symbols);
    let symbols = SymbolTable::from_names((0..n).map(|i| format!("s{i}"))).expect("distinct");
    let mut kb = KnowledgeBase::new(symbols);
    for _ in 0..rng.random_range(1..=max_rules) {
        let mut ids: Vec<usize> = (0..n).collect();
        let len = rng.random_range(1..=n.min(6));
        let (chosen, _) = ids.partial_shuffle(rng, len);
        let lits: Vec<Literal> = chosen
            .iter()
            .map(|&s| Literal {
                symbol: s,
                negated: rng.random_bool(0.4),
            })
            .collect();
        let confidence = 10.0 - rng.random_range(0.0..10.0);
        let rule = IfThenRule::new(confidence, lits[0], lits[1..].to_vec()).expect("distinct symbols");
        kb.push(rule).expect("symbols in range");
    }
    kb
}


#[derive(Debug, Clone, PartialEq)]
pub struct FuzzCase {
    pub index: usize,
    pub n_symbols: usize,
    pub n_rules: usize,
    pub epsilon: f64,
    pub max_residual: f64,
    pub passed: bool,
}

impl FuzzCase {
    pub fn line(&self) -> String {
        format!(
            "case {}: {} symbols={} rules={} epsilon={} max_residual={:e}",
            self.index,
            if self.passed { "PASS" } else { "FAIL" },
            self.n_symbols,
            self.n_rules,
            self.epsilon,
            self.max_residual
        )
    }
}

pub const FUZZ_EPSILONS: [f64; 3] = [0.1, 0.5, 0.9];

/// Random knowledge bases (at most 12 symbols and 8 rules) compiled and
/// checked against `E_rank = -epsilon * weighted satisfiability`.
/// Case `i` depends only on `(seed, i)`.
pub fn fuzz(seed: u64, cases: usize, tol: f64) -> Result<Vec<FuzzCase>> {
    (0..cases)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, index as u64));
            let kb = random_kb(&mut rng, 12, 8);
            let epsilon = FUZZ_EPSILONS[rng.random_range(0..FUZZ_EPSILONS.len())];
            let m = compile_kb(&kb, &CompileConfig::with_epsilon(epsilon))?;
            let report = check_equivalence(&kb, &m, epsilon, Satisfiability::Weighted, tol)?;
            let (a, b) = report.expected.expect("weighted mode has exact coefficients");
            Ok(FuzzCase {
                index,
                n_symbols: kb.n_symbols(),
                n_rules: kb.rules.len(),
                epsilon,
                max_residual: report.witness.max_residual,
                passed: report.passed && report.witness.a == a && report.witness.b == b,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_rules;
    use crate::rbm::UnitKind;
    use approx::assert_abs_diff_eq;

    #[test]
    fn example1_unweighted_witness() {
        let kb = parse_rules("5: y <- x1 & !x2").unwrap();
        let m = compile_kb(&kb, &CompileConfig::default()).unwrap();
        let r = check_equivalence(&kb, &m, 0.5, Satisfiability::Unweighted, 1e-12).unwrap();
        assert!(r.passed);
        assert_abs_diff_eq!(r.witness.a, 0.4, epsilon = 1e-15);
        assert_eq!(r.witness.b, 0.0);
        assert_eq!(r.witness.max_residual, 0.0);
        let w = check_equivalence(&kb, &m, 0.5, Satisfiability::Weighted, 1e-12).unwrap();
        assert!(w.passed);
        assert_eq!(w.witness.a, 2.0);
        assert_eq!(r.rows.len(), 8);
        assert!(r.render().ends_with("PASS\n"));
    }

    #[test]
    fn empty_kb_is_trivially_equivalent() {
        let kb = parse_rules("").unwrap();
        let m = compile_kb(&kb, &CompileConfig::default()).unwrap();
        let r = check_equivalence(&kb, &m, 0.5, Satisfiability::Weighted, 1e-12).unwrap();
        assert!(r.passed);
        assert_eq!(r.n_assignments, 1);
    }

    #[test]
    fn single_implication_rank_energies() {
        let kb = parse_rules("1: y <- x").unwrap();
        let m = compile_kb(&kb, &CompileConfig::default()).unwrap();
        for idx in 0..4 {
            let a = Assignment::from_index(2, idx);
            let e = m.rank_energy(&a.bits).unwrap();
            let expected = if kb.rules[0].evaluate(&a).unwrap() { -0.5 } else { 0.0 };
            assert_eq!(e, expected);
        }
    }

    #[test]
    fn uneven_confidences_have_no_unweighted_witness() {
        let kb = parse_rules("1: y <- x\n4: z <- x").unwrap();
        let m = compile_kb(&kb, &CompileConfig::default()).unwrap();
        let r = check_equivalence(&kb, &m, 0.5, Satisfiability::Unweighted, 1e-9).unwrap();
        assert_eq!(r.expected, None);
        assert!(!r.passed);
        assert!(check_equivalence(&kb, &m, 0.5, Satisfiability::Weighted, 1e-9).unwrap().passed);
    }

    #[test]
    fn fault_injection_names_rule() {
        let kb = parse_rules("2: y <- a & !b\n3: z <- y & c").unwrap();
        let mut m = compile_kb(&kb, &CompileConfig::default()).unwrap();
        // Unit 2 is the confidence unit of rule 1.
        if let UnitKind::Standard(member) = &mut m.hidden[2].kind {
            member.bias += 0.7;
        }
        let report = check_equivalence(&kb, &m, 0.5, Satisfiability::Weighted, 1e-9).unwrap();
        assert!(!report.passed);
        let failing = Assignment::new(report.rows[0].assignment.clone());
        let cx = minimize_counterexample(&kb, &m, 0.5, &failing, 1e-9).unwrap();
        assert_eq!(cx.suspects.len(), 1);
        assert_eq!(cx.suspects[0].rule, Some(1));
        assert_eq!(cx.suspects[0].rule_text.as_deref(), Some("3.0: z <- y & c"));
        assert!(cx.render(&kb.symbols).contains("from rule `3.0: z <- y & c`"));
    }

    #[test]
    fn fault_injection_isolates_pool_member() {
        let kb = parse_rules("2: y <- a & !b & c").unwrap();
        let mut m = compile_kb(&kb, &CompileConfig::default()).unwrap();
        if let UnitKind::Pooling(members) = &mut m.hidden[1].kind {
            members[1].bias += 1.5;
        }
        let report = check_equivalence(&kb, &m, 0.5, Satisfiability::Weighted, 1e-9).unwrap();
        assert!(!report.passed);
        let cx = minimize_counterexample(
            &kb,
            &m,
            0.5,
            &Assignment::new(report.rows[0].assignment.clone()),
            1e-9,
        )
        .unwrap();
        assert_eq!(cx.suspects.len(), 1);
        assert_eq!(cx.suspects[0].unit, 1);
        assert_eq!(cx.suspects[0].members, vec![1]);
    }

    #[test]
    fn counterexample_requires_failure() {
        let kb = parse_rules("y <- x").unwrap();
        let m = compile_kb(&kb, &CompileConfig::default()).unwrap();
        assert!(matches!(
            minimize_counterexample(&kb, &m, 0.5, &Assignment::all_false(2), 1e-9),
            Err(Error::NoFailure)
        ));
    }

    #[test]
    fn fuzz_is_deterministic() {
        let a = fuzz(7, 20, 1e-9).unwrap();
        let b = fuzz(7, 20, 1e-9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|c| c.passed));
        assert_ne!(a, fuzz(8, 20, 1e-9).unwrap());
    }

    #[test]
    fn enumeration_limit() {
        let names: Vec<String> = (0..23).map(|i| format!("s{i}")).collect();
        let kb = KnowledgeBase::new(SymbolTable::from_names(names).unwrap());
        let m = compile_kb(&kb, &CompileConfig::default()).unwrap();
        assert!(matches!(
            check_equivalence(&kb, &m, 0.5, Satisfiability::Weighted, 1e-9),
            Err(Error::EnumerationTooLarge(23))
        ));
    }
}
