mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rulerbm_core::compile::{compile_kb, compile_rules, CompileConfig};
use rulerbm_core::logic::{parse_rules, Assignment, IfThenRule, KnowledgeBase, Literal, SymbolTable};
use rulerbm_core::rbm::Clamp;
use rulerbm_core::verify::{check_equivalence, random_kb, Satisfiability};
use support::{bits, rule_holds, weighted_rank_oracle, XOR_RULES};

#[test]
fn single_rule_rank_energies_match_table() {
    let kb = parse_rules("5: y <- x1 & !x2").unwrap();
    let m = compile_kb(&kb, &CompileConfig::with_epsilon(0.5)).unwrap();
    let (y, x1, x2) = (0, 1, 2);
    for idx in 0..8 {
        let x = bits(3, idx);
        let expected = if x[y] == false && x[x1] && !x[x2] { 0.0 } else { -2.5 };
        assert!((m.rank_energy(&x).unwrap() - expected).abs() < 1e-12, "{x:?}");
    }
}

#[test]
fn random_kbs_match_weighted_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..60 {
        let kb = random_kb(&mut rng, 10, 6);
        let eps = [0.1, 0.5, 0.9][case % 3];
        let m = compile_kb(&kb, &CompileConfig::with_epsilon(eps)).unwrap();
        for idx in 0..1u64 << kb.n_symbols() {
            let x = bits(kb.n_symbols(), idx);
            let got = m.rank_energy(&x).unwrap();
            assert!((got - weighted_rank_oracle(&kb, eps, &x)).abs() <= 1e-9);
        }
        let report = check_equivalence(&kb, &m, eps, Satisfiability::Weighted, 1e-9).unwrap();
        assert!(report.passed, "{}", report.summary());
        assert!((report.witness.a - 1.0 / eps).abs() < 1e-12);
    }
}

#[test]
fn confidence_and_pool_split_satisfaction() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(1..=6);
        let kb = random_kb(&mut rng, n, 1);
        let rule = &kb.rules[0];
        let (cr, pr) = rule.to_dnf().to_confidence_rules().unwrap();
        for idx in 0..1u64 << kb.n_symbols() {
            let a = Assignment::from_index(kb.n_symbols(), idx);
            let head = cr.body.holds(&a).unwrap() as u8;
            let pool = pr.as_ref().map_or(0, |p| p.holds(&a).unwrap() as u8);
            assert_eq!(head + pool, rule_holds(rule, &a.bits) as u8);
        }
    }
}

#[test]
fn compiled_units_fire_for_satisfied_rules_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let kb = random_kb(&mut rng, 8, 1);
        let rule = &kb.rules[0];
        let pair = rule.to_dnf().to_confidence_rules().unwrap();
        let names = kb.symbols.names().map(str::to_string).collect();
        let m = compile_rules(names, &[pair], &CompileConfig::with_epsilon(0.5)).unwrap();
        for idx in 0..1u64 << kb.n_symbols() {
            let x = bits(kb.n_symbols(), idx);
            let active = m.potentials(&x).unwrap().iter().filter(|&&p| p > 0.0).count();
            let expected = if rule.confidence > 0.0 { rule_holds(rule, &x) as usize } else { 0 };
            assert_eq!(active, expected);
        }
    }
}

#[test]
fn unweighted_witness_requires_equal_confidences() {
    let kb = parse_rules("2: a <- b\n2: c <- a & !b").unwrap();
    let m = compile_kb(&kb, &CompileConfig::with_epsilon(0.5)).unwrap();
    let r = check_equivalence(&kb, &m, 0.5, Satisfiability::Unweighted, 1e-9).unwrap();
    assert!(r.passed);
    assert!((r.witness.a - 1.0).abs() < 1e-12);
}

#[test]
fn xor_recovers_every_third_variable() {
    let kb = parse_rules(XOR_RULES).unwrap();
    let m = compile_kb(&kb, &CompileConfig::default()).unwrap();
    let ids = ["x", "y", "z"].map(|s| kb.symbols.id(s).unwrap());
    for target in 0..3 {
        for idx in 0..4u64 {
            let others: Vec<usize> = (0..3).filter(|&k| k != target).collect();
            let mut pairs = Vec::new();
            let mut vals = [false; 3];
            for (bit, &k) in others.iter().enumerate() {
                vals[k] = (idx >> bit) & 1 == 1;
                pairs.push((ids[k], vals[k]));
            }
            let truth = match target {
                2 => vals[0] ^ vals[1],
                _ => vals[others[0]] ^ vals[others[1]],
            };
            let clamp = Clamp::from_pairs(3, &pairs).unwrap();
            let p = m.conditional_label(&clamp, &[ids[target]]).unwrap();
            assert!(p[truth as usize] > 0.9, "target {target} clamp {pairs:?}: {p:?}");
        }
    }
}

#[test]
fn accepts_hand_built_knowledge_base() {
    let symbols = SymbolTable::from_names(["a", "b"]).unwrap();
    let mut kb = KnowledgeBase::new(symbols);
    kb.push(IfThenRule::new(1.5, Literal::pos(0), vec![Literal::neg(1)]).unwrap())
        .unwrap();
    let m = compile_kb(&kb, &CompileConfig::with_epsilon(0.9)).unwrap();
    for idx in 0..4 {
        let x = bits(2, idx);
        assert!((m.rank_energy(&x).unwrap() - weighted_rank_oracle(&kb, 0.9, &x)).abs() < 1e-12);
    }
}
