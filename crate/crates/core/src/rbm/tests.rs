use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

// Visible order (y, x1, x2), as interned from `5: y <- x1 & !x2`.
fn example1() -> Rbm {
    let mut m = Rbm::with_names(vec!["y".into(), "x1".into(), "x2".into()]);
    m.hidden
        .push(HiddenUnit::standard("h1", vec![5.0, 5.0, -5.0], -7.5));
    m.hidden.push(HiddenUnit::pooling(
        "h2",
        vec![
            Member {
                weights: vec![0.0, -5.0, 0.0],
                bias: 2.5,
            },
            Member {
                weights: vec![0.0, 0.0, 5.0],
                bias: -2.5,
            },
        ],
    ));
    m.n_rule_units = 2;
    m
}

fn yx(y: bool, x1: bool, x2: bool) -> Vec<bool> {
    vec![y, x1, x2]
}

/// Scalar-loop energy, independent of the model's own methods.
fn brute_energy(m: &Rbm, x: &[bool], h: &[bool]) -> f64 {
    let mut e = 0.0;
    for (i, &on) in x.iter().enumerate() {
        if on {
            e -= m.visible_bias[i];
        }
    }
    for (j, unit) in m.hidden.iter().enumerate() {
        if !h[j] {
            continue;
        }
        let mut best = f64::NEG_INFINITY;
        for member in unit.members() {
            let mut a = member.bias;
            for i in 0..x.len() {
                if x[i] {
                    a += member.weights[i];
                }
            }
            best = best.max(a);
        }
        e -= best;
    }
    e
}

fn bits(n: usize, idx: u64) -> Vec<bool> {
    (0..n).map(|i| (idx >> i) & 1 == 1).collect()
}

fn random_model(rng: &mut ChaCha8Rng, n_visible: usize, n_hidden: usize) -> Rbm {
    let mut m = Rbm::new(n_visible);
    m.visible_bias = (0..n_visible).map(|_| rng.random_range(-1.0..1.0)).collect();
    for j in 0..n_hidden {
        let member = |rng: &mut ChaCha8Rng| Member {
            weights: (0..n_visible).map(|_| rng.random_range(-2.0..2.0)).collect(),
            bias: rng.random_range(-2.0..2.0),
        };
        if rng.random_bool(0.3) {
            let k = rng.random_range(1..4);
            m.hidden
                .push(HiddenUnit::pooling(format!("p{j}"), (0..k).map(|_| member(rng)).collect()));
        } else {
            let mm = member(rng);
            m.hidden.push(HiddenUnit::standard(format!("h{j}"), mm.weights, mm.bias));
        }
    }
    m
}

/// `P(free visibles | clamp)` by summing `exp(-E)` over every (x, h).
fn brute_conditional(m: &Rbm, clamp: &Clamp, target: &[usize]) -> Vec<f64> {
    let free: Vec<usize> = clamp.free().collect();
    let mut weights = vec![0.0; 1 << target.len()];
    for fidx in 0..(1u64 << free.len()) {
        let mut x = clamp.initial_state();
        for (b, &i) in free.iter().enumerate() {
            x[i] = (fidx >> b) & 1 == 1;
        }
        let mut w = 0.0;
        for hidx in 0..(1u64 << m.n_hidden()) {
            w += (-brute_energy(m, &x, &bits(m.n_hidden(), hidx))).exp();
        }
        let cfg = target
            .iter()
            .enumerate()
            .fold(0usize, |acc, (b, &t)| acc | ((x[t] as usize) << b));
        weights[cfg] += w;
    }
    let z: f64 = weights.iter().sum();
    weights.iter().map(|w| w / z).collect()
}

#[test]
fn example1_potentials() {
    let m = example1();
    assert_abs_diff_eq!(m.hidden[0].potential(&yx(true, true, false)), 2.5, epsilon = 1e-12);
    assert_abs_diff_eq!(m.hidden[1].potential(&yx(false, true, false)), -2.5, epsilon = 1e-12);
    let zero = HiddenUnit::standard("z", vec![0.0; 3], 0.0);
    for idx in 0..8 {
        assert_eq!(zero.potential(&bits(3, idx)), 0.0);
    }
}

#[test]
fn example1_energy_and_rank_energy() {
    let m = example1();
    let s = State {
        visible: yx(true, true, false),
        hidden: vec![true, false],
    };
    assert_abs_diff_eq!(m.energy(&s).unwrap(), -2.5, epsilon = 1e-12);
    // Table 2: only (x1, x2, y) = (1, 0, 0) has zero rank energy.
    for idx in 0..8 {
        let x = bits(3, idx);
        let expected = if x == yx(false, true, false) { 0.0 } else { -2.5 };
        assert_abs_diff_eq!(m.rank_energy(&x).unwrap(), expected, epsilon = 1e-12);
    }
    let zero_h = State {
        visible: yx(true, true, true),
        hidden: vec![false, false],
    };
    assert_eq!(m.energy(&zero_h).unwrap(), 0.0);
}

#[test]
fn minimizing_hidden_examples() {
    let m = example1();
    assert_eq!(m.minimizing_hidden(&yx(true, true, false)).unwrap(), vec![true, false]);
    let mut neg = Rbm::new(2);
    neg.hidden.push(HiddenUnit::standard("a", vec![-1.0, -1.0], -0.5));
    neg.hidden.push(HiddenUnit::standard("tie", vec![1.0, 0.0], -1.0));
    assert_eq!(neg.minimizing_hidden(&[true, false]).unwrap(), vec![false, false]);
}

#[test]
fn dimension_errors() {
    let m = example1();
    assert!(matches!(m.rank_energy(&[true]), Err(Error::Dimension { .. })));
    let s = State {
        visible: vec![true; 3],
        hidden: vec![true],
    };
    assert!(m.energy(&s).is_err());
    assert!(Clamp::new(vec![true], vec![]).is_err());
    let h = HiddenSample {
        states: vec![false; 2],
        argmax: vec![0; 2],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(m.sample_visible(&h, &Clamp::none(2), &mut rng).is_err());
}

#[test]
fn hidden_probability_of_example1_head_unit() {
    let m = example1();
    let (p, _) = m.hidden_probabilities(&yx(true, true, false)).unwrap();
    // Two-state Boltzmann ratio for h in {0, 1} at potential 2.5.
    let expected = 2.5f64.exp() / (1.0 + 2.5f64.exp());
    assert_abs_diff_eq!(p[0], expected, epsilon = 1e-12);
    assert_abs_diff_eq!(p[0], 0.924, epsilon = 1e-3);

    let zero = {
        let mut z = Rbm::new(1);
        z.hidden.push(HiddenUnit::standard("z", vec![0.0], 0.0));
        z
    };
    assert_eq!(zero.hidden_probabilities(&[true]).unwrap().0, vec![0.5]);
}

#[test]
fn sample_hidden_frequency_matches_probability() {
    let m = example1();
    let x = yx(true, true, false);
    let (p, _) = m.hidden_probabilities(&x).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let mut on = [0usize; 2];
    for _ in 0..n {
        let h = m.sample_hidden(&x, &mut rng).unwrap();
        for j in 0..2 {
            on[j] += h.states[j] as usize;
        }
    }
    for j in 0..2 {
        let freq = on[j] as f64 / n as f64;
        let sigma = (p[j] * (1.0 - p[j]) / n as f64).sqrt();
        assert!((freq - p[j]).abs() < 0.01);
        assert!((freq - p[j]).abs() <= 3.0 * sigma + 1e-12, "unit {j}: {freq} vs {}", p[j]);
    }
}

#[test]
fn sample_visible_examples() {
    let m = example1();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let none = HiddenSample {
        states: vec![false, false],
        argmax: vec![0, 0],
    };
    let probs = m.visible_probabilities(&none).unwrap();
    assert_eq!(probs, vec![0.5; 3]);

    let full = Clamp::all(&yx(true, false, true));
    for _ in 0..20 {
        let h = HiddenSample {
            states: vec![rng.random(), rng.random()],
            argmax: vec![0, rng.random_range(0..2)],
        };
        assert_eq!(m.sample_visible(&h, &full, &mut rng).unwrap(), yx(true, false, true));
    }

    let head_on = HiddenSample {
        states: vec![true, false],
        argmax: vec![0, 0],
    };
    let probs = m.visible_probabilities(&head_on).unwrap();
    assert_abs_diff_eq!(probs[0], 1.0 / (1.0 + (-5.0f64).exp()), epsilon = 1e-12);
    assert_abs_diff_eq!(probs[0], 0.9933, epsilon = 1e-4);
}

#[test]
fn pooling_down_pass_uses_argmax_member() {
    let m = example1();
    // x1 = 0, x2 = 1: both members reach 2.5, the lower index wins.
    let (_, argmax) = m.hidden_probabilities(&yx(false, false, true)).unwrap();
    assert_eq!(argmax[1], 0);
    let (_, argmax) = m.hidden_probabilities(&yx(false, true, true)).unwrap();
    assert_eq!(argmax[1], 1);
    let pool_on = HiddenSample {
        states: vec![false, true],
        argmax: vec![0, 1],
    };
    let probs = m.visible_probabilities(&pool_on).unwrap();
    assert_abs_diff_eq!(probs[2], crate::logistic(5.0), epsilon = 1e-12);
    assert_eq!(probs[1], 0.5);
}

#[test]
fn conditional_label_example1() {
    let m = example1();
    let clamp = Clamp::from_pairs(3, &[(1, true), (2, false)]).unwrap();
    let p = m.conditional_label(&clamp, &[0]).unwrap();
    let oracle = brute_conditional(&m, &clamp, &[0]);
    assert_abs_diff_eq!(p[1], oracle[1], epsilon = 1e-12);
    let expected = crate::logistic(crate::softplus(2.5) - crate::softplus(-2.5));
    assert_abs_diff_eq!(p[1], expected, epsilon = 1e-12);
    assert_abs_diff_eq!(p[1], 0.924, epsilon = 1e-3);
    assert!(matches!(
        m.conditional_label(&clamp, &[1]),
        Err(Error::TargetClamped(1))
    ));
}

#[test]
fn conditional_label_without_hidden_units_is_uniform() {
    let m = Rbm::new(3);
    let p = m.conditional_label(&Clamp::none(3), &[0, 2]).unwrap();
    for v in p {
        assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
    }
}

#[test]
fn conditional_matches_boltzmann_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..40 {
        let nv = rng.random_range(1..8);
        let nh = rng.random_range(0..7);
        let m = random_model(&mut rng, nv, nh);
        let mut clamp = Clamp::none(nv);
        for i in 0..nv {
            if rng.random_bool(0.4) {
                clamp.mask[i] = true;
                clamp.values[i] = rng.random();
            }
        }
        let free: Vec<usize> = clamp.free().collect();
        let target: Vec<usize> = free.iter().copied().filter(|_| rng.random_bool(0.7)).collect();
        let got = m.conditional_label(&clamp, &target).unwrap();
        let want = brute_conditional(&m, &clamp, &target);
        for (g, w) in got.iter().zip(&want) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-9);
        }
        // Per-visible marginals from the factorised path.
        let marg = m.conditional_marginals(&clamp).unwrap();
        for &i in &free {
            let single = brute_conditional(&m, &clamp, &[i]);
            assert!((marg[i] - single[1]).abs() < 1e-9, "case {case} visible {i}");
        }
        for i in 0..nv {
            if clamp.mask[i] {
                assert_eq!(marg[i], clamp.values[i] as u8 as f64);
            }
        }
    }
}

#[test]
fn marginals_factorise_over_disconnected_visibles() {
    // 40 free visibles, each touched by its own unit: too many for joint
    // enumeration, trivial per component.
    let n = 40;
    let mut m = Rbm::new(n);
    for i in 0..n {
        let mut w = vec![0.0; n];
        w[i] = 1.0 + i as f64 * 0.1;
        m.hidden.push(HiddenUnit::standard(format!("h{i}"), w, -0.5));
    }
    let marg = m.conditional_marginals(&Clamp::none(n)).unwrap();
    for i in 0..n {
        let w = 1.0 + i as f64 * 0.1;
        let expected = crate::logistic(crate::softplus(w - 0.5) - crate::softplus(-0.5));
        assert_abs_diff_eq!(marg[i], expected, epsilon = 1e-12);
    }
    assert!(matches!(
        m.conditional_label(&Clamp::none(n), &[0]),
        Err(Error::EnumerationTooLarge(40))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_energy_is_min_over_hidden(seed in any::<u64>(), nv in 1usize..7, nh in 0usize..11) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, nv, nh);
        for xi in 0..(1u64 << nv) {
            let x = bits(nv, xi);
            let closed = m.rank_energy(&x).unwrap();
            let mut best = f64::INFINITY;
            for hi in 0..(1u64 << nh) {
                best = best.min(brute_energy(&m, &x, &bits(nh, hi)));
            }
            prop_assert!((closed - best).abs() < 1e-9);
            let h = m.minimizing_hidden(&x).unwrap();
            let s = State { visible: x.clone(), hidden: h };
            prop_assert_eq!(m.energy(&s).unwrap(), closed);
        }
    }

    #[test]
    fn scaling_hidden_parameters_scales_rank_energy(seed in any::<u64>(), lambda in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = random_model(&mut rng, 4, 5);
        m.visible_bias.fill(0.0);
        let scaled = m.scaled(lambda);
        let mut argmin = (f64::INFINITY, 0);
        let mut argmin_scaled = (f64::INFINITY, 0);
        for xi in 0..16u64 {
            let x = bits(4, xi);
            let e = m.rank_energy(&x).unwrap();
            let es = scaled.rank_energy(&x).unwrap();
            prop_assert!((es - lambda * e).abs() < 1e-9 * (1.0 + e.abs() * lambda));
            if e < argmin.0 - 1e-9 { argmin = (e, xi); }
            if es < argmin_scaled.0 - 1e-9 * lambda { argmin_scaled = (es, xi); }
        }
        prop_assert_eq!(argmin.1, argmin_scaled.1);
    }
}

#[test]
fn one_step_gibbs_matches_analytic_composition() {
    let m = example1();
    let clamp = Clamp::from_pairs(3, &[(1, true), (2, false)]).unwrap();
    // Start state has y = 0; enumerate the hidden layer for the one-step law.
    let x0 = clamp.initial_state();
    let (probs, argmax) = m.hidden_probabilities(&x0).unwrap();
    let mut analytic = 0.0;
    for hi in 0..4u64 {
        let states = bits(2, hi);
        let ph: f64 = states
            .iter()
            .zip(&probs)
            .map(|(&s, &p)| if s { p } else { 1.0 - p })
            .product();
        let h = HiddenSample {
            states,
            argmax: argmax.clone(),
        };
        analytic += ph * m.visible_probabilities(&h).unwrap()[0];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let freq = m.gibbs_infer(&clamp, 1, 100_000, &mut rng).unwrap();
    assert!((freq[0] - analytic).abs() < 0.01, "{} vs {analytic}", freq[0]);
    assert_eq!(freq[1], 1.0);
    assert_eq!(freq[2], 0.0);
}

#[test]
fn gibbs_fully_clamped_echoes_clamp() {
    let m = example1();
    let x = yx(true, false, true);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = m.gibbs_infer(&Clamp::all(&x), 3, 10, &mut rng).unwrap();
    assert_eq!(f, vec![1.0, 0.0, 1.0]);
    assert!(m.gibbs_infer(&Clamp::all(&x), 0, 10, &mut rng).is_err());
}

#[test]
fn train_with_zero_learning_rate_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = random_model(&mut rng, 4, 3);
    let data: Vec<Vec<bool>> = (0..20).map(|i| bits(4, i % 16)).collect();
    let cfg = CdConfig {
        learning_rate: 0.0,
        epochs: 3,
        ..CdConfig::default()
    };
    assert_eq!(m.train_cd(&data, &cfg).unwrap(), m);
    assert!(matches!(m.train_cd(&[], &cfg), Err(Error::EmptyData)));
    let bad = CdConfig {
        batch_size: 0,
        ..CdConfig::default()
    };
    assert!(m.train_cd(&data, &bad).is_err());
}

#[test]
fn frozen_rule_units_leave_only_visible_bias_trainable() {
    let m = example1();
    let data: Vec<Vec<bool>> = (0..30).map(|i| bits(3, i % 8)).collect();
    let cfg = CdConfig {
        epochs: 5,
        ..CdConfig::default()
    };
    let trained = m.train_cd(&data, &cfg).unwrap();
    assert_eq!(trained.hidden, m.hidden);
    assert_ne!(trained.visible_bias, m.visible_bias);

    // Unfrozen: the standard rule unit moves, the pooling unit never does.
    let cfg = CdConfig {
        freeze_rule_units: false,
        ..cfg
    };
    let trained = m.train_cd(&data, &cfg).unwrap();
    assert_ne!(trained.hidden[0], m.hidden[0]);
    assert_eq!(trained.hidden[1], m.hidden[1]);
}
