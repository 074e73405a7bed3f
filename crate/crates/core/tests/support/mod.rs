//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

pub mod family;

use rand::Rng;
use rulerbm_core::data::{parse_kinship, KinshipData};
use rulerbm_core::logic::{IfThenRule, KnowledgeBase};
use rulerbm_core::rbm::{Clamp, HiddenUnit, Member, Rbm};

/// Family-tree triples: the file named by `RULERBM_KINSHIP` when set,
/// otherwise the two generated trees.
pub fn kinship() -> (KinshipData, String) {
    match std::env::var("RULERBM_KINSHIP") {
        Ok(path) => (
            rulerbm_core::data::load_kinship(&path).expect("kinship file"),
            path,
        ),
        Err(_) => (
            parse_kinship(&family::family_text(), std::path::Path::new("<family trees>")).unwrap(),
            "generated family trees".into(),
        ),
    }
}

pub fn bits(n: usize, idx: u64) -> Vec<bool> {
    (0..n).map(|i| (idx >> i) & 1 == 1).collect()
}

/// Material implication evaluated straight from the literals.
pub fn rule_holds(r: &IfThenRule, x: &[bool]) -> bool {
    let lit = |l: &rulerbm_core::logic::Literal| x[l.symbol] != l.negated;
    !r.body.iter().all(lit) || lit(&r.head)
}

/// `-eps * sum_i c_i s_i(x)`.
pub fn weighted_rank_oracle(kb: &KnowledgeBase, eps: f64, x: &[bool]) -> f64 {
    -eps * kb
        .rules
        .iter()
        .filter(|r| rule_holds(r, x))
        .map(|r| r.confidence)
        .sum::<f64>()
}

fn member_potential(m: &Member, x: &[bool]) -> f64 {
    m.bias + m.weights.iter().zip(x).filter(|(_, &v)| v).map(|(w, _)| w).sum::<f64>()
}

fn unit_potential(u: &HiddenUnit, x: &[bool]) -> f64 {
    u.members()
        .iter()
        .map(|m| member_potential(m, x))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `E(x, h) = -sum_j h_j max_k(w_jk . x + b_jk) - b . x`.
pub fn joint_energy(m: &Rbm, x: &[bool], h: &[bool]) -> f64 {
    let hidden: f64 = m
        .hidden
        .iter()
        .zip(h)
        .filter(|(_, &on)| on)
        .map(|(u, _)| unit_potential(u, x))
        .sum();
    let visible: f64 = m.visible_bias.iter().zip(x).filter(|(_, &on)| on).map(|(b, _)| b).sum();
    -hidden - visible
}

/// `P(target configuration | clamp)` by summing `exp(-E)` over every
/// free visible and every hidden state.
pub fn joint_conditional(m: &Rbm, clamp: &Clamp, target: &[usize]) -> Vec<f64> {
    let n = m.n_visible();
    let free: Vec<usize> = (0..n).filter(|&i| !clamp.mask[i]).collect();
    let mut weights = vec![0.0; 1 << target.len()];
    for fi in 0..1u64 << free.len() {
        let mut x = clamp.values.clone();
        for (k, &i) in free.iter().enumerate() {
            x[i] = (fi >> k) & 1 == 1;
        }
        let cfg = target
            .iter()
            .enumerate()
            .fold(0, |acc, (bit, &t)| acc | ((x[t] as usize) << bit));
        for hi in 0..1u64 << m.n_hidden() {
            let h = bits(m.n_hidden(), hi);
            weights[cfg] += (-joint_energy(m, &x, &h)).exp();
        }
    }
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Expected visible activations after one hidden/visible sweep from the
/// clamp with free visibles off, summed exactly over hidden states.
pub fn one_step_expectation(m: &Rbm, clamp: &Clamp) -> Vec<f64> {
    let n = m.n_visible();
    let x0: Vec<bool> = (0..n).map(|i| clamp.mask[i] && clamp.values[i]).collect();
    let pots: Vec<f64> = m.hidden.iter().map(|u| unit_potential(u, &x0)).collect();
    let argmax: Vec<usize> = m
        .hidden
        .iter()
        .map(|u| {
            let ps: Vec<f64> = u.members().iter().map(|mm| member_potential(mm, &x0)).collect();
            (0..ps.len()).fold(0, |b, k| if ps[k] > ps[b] { k } else { b })
        })
        .collect();
    let mut out = vec![0.0; n];
    for hi in 0..1u64 << m.n_hidden() {
        let h = bits(m.n_hidden(), hi);
        let p: f64 = h
            .iter()
            .zip(&pots)
            .map(|(&on, &pot)| if on { logistic(pot) } else { 1.0 - logistic(pot) })
            .product();
        for i in 0..n {
            let mut logit = m.visible_bias[i];
            for (j, u) in m.hidden.iter().enumerate() {
                if h[j] {
                    logit += u.members()[argmax[j]].weights[i];
                }
            }
            out[i] += p * logistic(logit);
        }
    }
    for i in 0..n {
        if clamp.mask[i] {
            out[i] = clamp.values[i] as u8 as f64;
        }
    }
    out
}

/// Random model with standard and pooling units.
pub fn random_rbm<R: Rng>(rng: &mut R, n_visible: usize, n_hidden: usize) -> Rbm {
    let mut m = Rbm::new(n_visible);
    let member = |rng: &mut R| Member {
        weights: (0..n_visible).map(|_| rng.random_range(-2.0..2.0)).collect(),
        bias: rng.random_range(-2.0..2.0),
    };
    m.visible_bias = (0..n_visible).map(|_| rng.random_range(-1.0..1.0)).collect();
    for j in 0..n_hidden {
        if rng.random_bool(0.3) {
            let k = rng.random_range(2..=3);
            let members = (0..k).map(|_| member(rng)).collect();
            m.hidden.push(HiddenUnit::pooling(format!("p{j}"), members));
        } else {
            let mm = member(rng);
            m.hidden.push(HiddenUnit::standard(format!("h{j}"), mm.weights, mm.bias));
        }
    }
    m
}

/// Random clamp leaving at least one visible free; returns the free list.
pub fn random_clamp<R: Rng>(rng: &mut R, n: usize) -> (Clamp, Vec<usize>) {
    let mask: Vec<bool> = loop {
        let mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if mask.iter().any(|&m| !m) {
            break mask;
        }
    };
    let values = mask.iter().map(|&m| m && rng.random_bool(0.5)).collect();
    let free = (0..n).filter(|&i| !mask[i]).collect();
    (Clamp::new(mask, values).unwrap(), free)
}

/// `z <-> x xor y` as four rules, one per row of the truth table.
pub const XOR_RULES: &str = "\
10: z <- x & !y
10: z <- !x & y
10: !z <- x & y
10: !z <- !x & !y
";

/// Promoter-style records whose label is decided by the bundled theory's
/// strongest signals, for pipeline tests without the real data.
pub fn synthetic_promoters<R: Rng>(rng: &mut R, n: usize) -> String {
    let bases = ['a', 'c', 'g', 't'];
    let mut out = String::new();
    for k in 0..n {
        let mut s: Vec<char> = (0..57).map(|_| bases[rng.random_range(0..4)]).collect();
        let positive = k % 2 == 0;
        if positive {
            for (i, b) in [(13, 'c'), (14, 't'), (15, 't'), (16, 'g'), (17, 'a'), (18, 'c')] {
                s[i] = b;
            }
            for (i, b) in [(36, 't'), (37, 'a'), (38, 't'), (39, 'a'), (40, 'a'), (41, 't')] {
                s[i] = b;
            }
            for (i, b) in [(5, 'a'), (6, 'a'), (9, 'a')] {
                s[i] = b;
            }
        } else {
            s[15] = 'c';
            s[38] = 'g';
            s[5] = 'g';
        }
        let seq: String = s.into_iter().collect();
        out.push_str(&format!("{},S{k},{seq}\n", if positive { '+' } else { '-' }));
    }
    out
}
