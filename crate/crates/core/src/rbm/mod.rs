//! Binary restricted Boltzmann machines with standard and max-pooling
//! hidden units.
//!
//! The energy of a joint state is
//! `E(x, h) = -sum_j h_j * potential_j(x) - visible_bias . x`, where a
//! standard unit's potential is affine in `x` and a pooling unit's potential
//! is the maximum of several affine members.

mod io;
mod sample;
mod train;

use crate::error::{Error, Result};
use crate::{logistic, softplus};

pub use io::{read_model, write_model, FORMAT_HEADER};
pub use sample::{Clamp, HiddenSample};
pub use train::CdConfig;

/// One affine term `weights . x + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Member {
    pub fn zeros(n_visible: usize) -> Self {
        Self {
            weights: vec![0.0; n_visible],
            bias: 0.0,
        }
    }

    pub fn affine(&self, x: &[bool]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .filter(|(_, &on)| on)
            .fold(self.bias, |acc, (w, _)| acc + w)
    }

    fn affine_active(&self, active: &[usize]) -> f64 {
        active.iter().fold(self.bias, |acc, &i| acc + self.weights[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnitKind {
    Standard(Member),
    /// Potential is the maximum over members; must have at least one.
    Pooling(Vec<Member>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenUnit {
    pub label: String,
    pub kind: UnitKind,
}

impl HiddenUnit {
    pub fn standard(label: impl Into<String>, weights: Vec<f64>, bias: f64) -> Self {
        Self {
            label: label.into(),
            kind: UnitKind::Standard(Member { weights, bias }),
        }
    }

    pub fn pooling(label: impl Into<String>, members: Vec<Member>) -> Self {
        Self {
            label: label.into(),
            kind: UnitKind::Pooling(members),
        }
    }

    pub fn members(&self) -> &[Member] {
        match &self.kind {
            UnitKind::Standard(m) => std::slice::from_ref(m),
            UnitKind::Pooling(ms) => ms,
        }
    }

    pub fn is_pooling(&self) -> bool {
        matches!(self.kind, UnitKind::Pooling(_))
    }

    pub fn potential(&self, x: &[bool]) -> f64 {
        self.potential_with_argmax(x).0
    }

    /// Potential plus the index of the member attaining it (lowest index on ties).
    pub fn potential_with_argmax(&self, x: &[bool]) -> (f64, usize) {
        argmax(self.members().iter().map(|m| m.affine(x)))
    }

    fn potential_active(&self, active: &[usize]) -> (f64, usize) {
        argmax(self.members().iter().map(|m| m.affine_active(active)))
    }

    fn scale(&mut self, factor: f64) {
        let scale_member = |m: &mut Member| {
            m.weights.iter_mut().for_each(|w| *w *= factor);
            m.bias *= factor;
        };
        match &mut self.kind {
            UnitKind::Standard(m) => scale_member(m),
            UnitKind::Pooling(ms) => ms.iter_mut().for_each(scale_member),
        }
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in values.enumerate() {
        if i == 0 || v > best.0 {
            best = (v, i);
        }
    }
    best
}

pub(crate) fn active_indices(x: &[bool]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter_map(|(i, &on)| on.then_some(i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub visible: Vec<bool>,
    pub hidden: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rbm {
    pub visible_names: Vec<String>,
    pub visible_bias: Vec<f64>,
    pub hidden: Vec<HiddenUnit>,
    /// Units `0..n_rule_units` were compiled from rules; the rest are free.
    pub n_rule_units: usize,
}

impl Rbm {
    /// A model with unnamed visibles (`v0`, `v1`, ...) and no hidden units.
    pub fn new(n_visible: usize) -> Self {
        Self::with_names((0..n_visible).map(|i| format!("v{i}")).collect())
    }

    pub fn with_names(visible_names: Vec<String>) -> Self {
        Self {
            visible_bias: vec![0.0; visible_names.len()],
            visible_names,
            hidden: Vec::new(),
            n_rule_units: 0,
        }
    }

    pub fn n_visible(&self) -> usize {
        self.visible_names.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden.len()
    }

    pub fn visible_index(&self, name: &str) -> Option<usize> {
        self.visible_names.iter().position(|n| n == name)
    }

    /// Checks that every weight vector matches the visible layer and every
    /// pooling unit has a member.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_visible();
        if self.visible_bias.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: self.visible_bias.len(),
            });
        }
        if self.n_rule_units > self.hidden.len() {
            return Err(Error::Format(format!(
                "{} rule units but only {} hidden units",
                self.n_rule_units,
                self.hidden.len()
            )));
        }
        for unit in &self.hidden {
            if unit.members().is_empty() {
                return Err(Error::EmptyPool);
            }
            for m in unit.members() {
                if m.weights.len() != n {
                    return Err(Error::Dimension {
                        expected: n,
                        actual: m.weights.len(),
                    });
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_visible(&self, x: &[bool]) -> Result<()> {
        if x.len() != self.n_visible() {
            return Err(Error::Dimension {
                expected: self.n_visible(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn visible_term(&self, x: &[bool]) -> f64 {
        self.visible_bias
            .iter()
            .zip(x)
            .filter(|(_, &on)| on)
            .map(|(b, _)| b)
            .sum()
    }

    pub fn potentials(&self, x: &[bool]) -> Result<Vec<f64>> {
        self.check_visible(x)?;
        let active = active_indices(x);
        Ok(self
            .hidden
            .iter()
            .map(|u| u.potential_active(&active).0)
            .collect())
    }

    pub(crate) fn potentials_with_argmax(&self, x: &[bool]) -> (Vec<f64>, Vec<usize>) {
        let active = active_indices(x);
        self.hidden
            .iter()
            .map(|u| u.potential_active(&active))
            .unzip()
    }

    pub fn energy(&self, s: &State) -> Result<f64> {
        self.check_visible(&s.visible)?;
        if s.hidden.len() != self.n_hidden() {
            return Err(Error::Dimension {
                expected: self.n_hidden(),
                actual: s.hidden.len(),
            });
        }
        let pots = self.potentials(&s.visible)?;
        let hidden_term: f64 = pots
            .iter()
            .zip(&s.hidden)
            .filter(|(_, &on)| on)
            .map(|(p, _)| p)
            .sum();
        Ok(-hidden_term - self.visible_term(&s.visible))
    }

    /// `min_h E(x, h) = -sum_j max(0, potential_j(x)) - visible_bias . x`.
    pub fn rank_energy(&self, x: &[bool]) -> Result<f64> {
        let pots = self.potentials(x)?;
        let hidden_term: f64 = pots.iter().map(|p| p.max(0.0)).sum();
        Ok(-hidden_term - self.visible_term(x))
    }

    /// The hidden state realising the rank energy; zero potentials map to 0.
    pub fn minimizing_hidden(&self, x: &[bool]) -> Result<Vec<bool>> {
        Ok(self.potentials(x)?.into_iter().map(|p| p > 0.0).collect())
    }

    /// `F(x) = -visible_bias . x - sum_j softplus(potential_j(x))`.
    pub fn free_energy(&self, x: &[bool]) -> Result<f64> {
        let pots = self.potentials(x)?;
        Ok(-self.visible_term(x) - pots.into_iter().map(softplus).sum::<f64>())
    }

    /// `P(h_j = 1 | x) = logistic(potential_j(x))` with the argmax member of
    /// each unit.
    pub fn hidden_probabilities(&self, x: &[bool]) -> Result<(Vec<f64>, Vec<usize>)> {
        self.check_visible(x)?;
        let (pots, argmax) = self.potentials_with_argmax(x);
        Ok((pots.into_iter().map(logistic).collect(), argmax))
    }

    /// Visible logits given real-valued hidden activations; pooling units
    /// contribute through the weights of member `argmax[j]`.
    pub fn visible_logits(&self, h: &[f64], argmax: &[usize]) -> Vec<f64> {
        let mut logits = self.visible_bias.clone();
        for ((unit, &act), &k) in self.hidden.iter().zip(h).zip(argmax) {
            if act == 0.0 {
                continue;
            }
            let member = &unit.members()[k];
            for (l, w) in logits.iter_mut().zip(&member.weights) {
                *l += act * w;
            }
        }
        logits
    }

    /// Multiplies every hidden parameter by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.hidden.iter_mut().for_each(|u| u.scale(factor));
        out
    }

    /// Exact `P(target configuration | clamp)`. Configuration index bit `i`
    /// is the value of `target[i]`. Free visibles outside `target` are
    /// summed out, so at most 24 visibles may be unclamped.
    pub fn conditional_label(&self, clamp: &Clamp, target: &[usize]) -> Result<Vec<f64>> {
        clamp.check_len(self.n_visible())?;
        for &t in target {
            if t >= self.n_visible() {
                return Err(Error::SymbolOutOfRange {
                    id: t,
                    len: self.n_visible(),
                });
            }
            if clamp.mask[t] {
                return Err(Error::TargetClamped(t));
            }
        }
        if target.len() > 16 {
            return Err(Error::EnumerationTooLarge(target.len()));
        }
        let free: Vec<usize> = (0..self.n_visible()).filter(|&i| !clamp.mask[i]).collect();
        if free.len() > 24 {
            return Err(Error::EnumerationTooLarge(free.len()));
        }
        let partial = PartialPotentials::new(self, clamp, &free);
        let target_pos: Vec<usize> = target
            .iter()
            .map(|t| free.iter().position(|f| f == t).unwrap())
            .collect();

        let mut log_weights = vec![f64::NEG_INFINITY; 1 << target.len()];
        let mut x_free = vec![false; free.len()];
        for idx in 0..(1u64 << free.len()) {
            for (i, slot) in x_free.iter_mut().enumerate() {
                *slot = (idx >> i) & 1 == 1;
            }
            let lw = partial.log_weight(self, &x_free, 0..self.hidden.len());
            let cfg = target_pos
                .iter()
                .enumerate()
                .fold(0usize, |acc, (bit, &p)| acc | ((x_free[p] as usize) << bit));
            log_weights[cfg] = log_add(log_weights[cfg], lw);
        }
        Ok(normalize_log(&log_weights))
    }

    /// Exact per-visible `P(x_i = 1 | clamp)`; clamped entries echo the clamp.
    ///
    /// Free visibles are grouped into components that share a hidden unit,
    /// and each component is enumerated on its own, so the cost depends on
    /// the largest component (at most 24 visibles) rather than on the number
    /// of free visibles.
    pub fn conditional_marginals(&self, clamp: &Clamp) -> Result<Vec<f64>> {
        clamp.check_len(self.n_visible())?;
        let n = self.n_visible();
        let free: Vec<usize> = (0..n).filter(|&i| !clamp.mask[i]).collect();
        let mut out: Vec<f64> = clamp.values.iter().map(|&v| v as u8 as f64).collect();
        if free.is_empty() {
            return Ok(out);
        }
        let partial = PartialPotentials::new(self, clamp, &free);

        // Union-find over free positions.
        let mut parent: Vec<usize> = (0..free.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for touched in &partial.touched {
            if let Some((&first, rest)) = touched.split_first() {
                for &other in rest {
                    let (a, b) = (find(&mut parent, first), find(&mut parent, other));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut components: Vec<Vec<usize>> = Vec::new();
        let mut root_to_comp = std::collections::HashMap::new();
        for p in 0..free.len() {
            let r = find(&mut parent, p);
            let c = *root_to_comp.entry(r).or_insert_with(|| {
                components.push(Vec::new());
                components.len() - 1
            });
            components[c].push(p);
        }
        let mut units_of: Vec<Vec<usize>> = vec![Vec::new(); components.len()];
        for (j, touched) in partial.touched.iter().enumerate() {
            if let Some(&first) = touched.first() {
                let r = find(&mut parent, first);
                units_of[root_to_comp[&r]].push(j);
            }
        }

        let mut x_free = vec![false; free.len()];
        for (comp, units) in components.iter().zip(&units_of) {
            if comp.len() > 24 {
                return Err(Error::EnumerationTooLarge(comp.len()));
            }
            let mut log_z = f64::NEG_INFINITY;
            let mut log_on = vec![f64::NEG_INFINITY; comp.len()];
            for idx in 0..(1u64 << comp.len()) {
                for (bit, &p) in comp.iter().enumerate() {
                    x_free[p] = (idx >> bit) & 1 == 1;
                }
                let lw = partial.log_weight_subset(self, &x_free, comp, units);
                log_z = log_add(log_z, lw);
                for (bit, acc) in log_on.iter_mut().enumerate() {
                    if (idx >> bit) & 1 == 1 {
                        *acc = log_add(*acc, lw);
                    }
                }
            }
            for (bit, &p) in comp.iter().enumerate() {
                out[free[p]] = (log_on[bit] - log_z).exp();
                x_free[p] = false;
            }
        }
        Ok(out)
    }
}

/// Member potentials split into a clamped constant and sparse weights on
/// the free visibles.
struct PartialPotentials {
    /// `base[j][k]`: bias plus clamped contribution of member `k` of unit `j`.
    base: Vec<Vec<f64>>,
    /// `sparse[j][k]`: `(free position, weight)` pairs with non-zero weight.
    sparse: Vec<Vec<Vec<(usize, f64)>>>,
    /// Free positions touched by any member of unit `j`, sorted.
    touched: Vec<Vec<usize>>,
    /// Visible index of each free position.
    free: Vec<usize>,
}

impl PartialPotentials {
    fn new(m: &Rbm, clamp: &Clamp, free: &[usize]) -> Self {
        let clamped_on: Vec<usize> = (0..m.n_visible())
            .filter(|&i| clamp.mask[i] && clamp.values[i])
            .collect();
        let mut base = Vec::with_capacity(m.n_hidden());
        let mut sparse = Vec::with_capacity(m.n_hidden());
        let mut touched = Vec::with_capacity(m.n_hidden());
        for unit in &m.hidden {
            let mut b = Vec::new();
            let mut s = Vec::new();
            let mut t = Vec::new();
            for member in unit.members() {
                b.push(member.affine_active(&clamped_on));
                let entries: Vec<(usize, f64)> = free
                    .iter()
                    .enumerate()
                    .filter(|(_, &i)| member.weights[i] != 0.0)
                    .map(|(p, &i)| (p, member.weights[i]))
                    .collect();
                t.extend(entries.iter().map(|(p, _)| *p));
                s.push(entries);
            }
            t.sort_unstable();
            t.dedup();
            base.push(b);
            sparse.push(s);
            touched.push(t);
        }
        Self {
            base,
            sparse,
            touched,
            free: free.to_vec(),
        }
    }

    fn unit_potential(&self, j: usize, x_free: &[bool]) -> f64 {
        self.base[j]
            .iter()
            .zip(&self.sparse[j])
            .map(|(b, entries)| {
                entries
                    .iter()
                    .filter(|(p, _)| x_free[*p])
                    .fold(*b, |acc, (_, w)| acc + w)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `-F` up to a clamp-only constant, over all free visibles.
    fn log_weight(&self, m: &Rbm, x_free: &[bool], units: std::ops::Range<usize>) -> f64 {
        let free_bias: f64 = x_free
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(p, _)| m.visible_bias[self.free[p]])
            .sum();
        free_bias
            + units
                .map(|j| softplus(self.unit_potential(j, x_free)))
                .sum::<f64>()
    }

    fn log_weight_subset(&self, m: &Rbm, x_free: &[bool], comp: &[usize], units: &[usize]) -> f64 {
        let bias: f64 = comp
            .iter()
            .filter(|&&p| x_free[p])
            .map(|&p| m.visible_bias[self.free[p]])
            .sum();
        bias + units
            .iter()
            .map(|&j| softplus(self.unit_potential(j, x_free)))
            .sum::<f64>()
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn normalize_log(log_weights: &[f64]) -> Vec<f64> {
    let log_z = log_weights.iter().copied().fold(f64::NEG_INFINITY, log_add);
    log_weights.iter().map(|lw| (lw - log_z).exp()).collect()
}

#[cfg(test)]
mod tests;
