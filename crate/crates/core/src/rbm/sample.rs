use rand::Rng;

use super::Rbm;
use crate::error::{Error, Result};
use crate::logistic;

/// Visibles held fixed during inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clamp {
    pub mask: Vec<bool>,
    pub values: Vec<bool>,
}

impl Clamp {
    pub fn new(mask: Vec<bool>, values: Vec<bool>) -> Result<Self> {
        if mask.len() != values.len() {
            return Err(Error::Dimension {
                expected: mask.len(),
                actual: values.len(),
            });
        }
        Ok(Self { mask, values })
    }

    pub fn none(n_visible: usize) -> Self {
        Self {
            mask: vec![false; n_visible],
            values: vec![false; n_visible],
        }
    }

    pub fn all(values: &[bool]) -> Self {
        Self {
            mask: vec![true; values.len()],
            values: values.to_vec(),
        }
    }

    pub fn from_pairs(n_visible: usize, pairs: &[(usize, bool)]) -> Result<Self> {
        let mut c = Self::none(n_visible);
        for &(i, v) in pairs {
            if i >= n_visible {
                return Err(Error::SymbolOutOfRange {
                    id: i,
                    len: n_visible,
                });
            }
            c.mask[i] = true;
            c.values[i] = v;
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn free(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| (!m).then_some(i))
    }

    pub(crate) fn check_len(&self, n_visible: usize) -> Result<()> {
        if self.mask.len() != n_visible {
            return Err(Error::Dimension {
                expected: n_visible,
                actual: self.mask.len(),
            });
        }
        Ok(())
    }

    /// Clamped values, with free visibles set to `false`.
    pub fn initial_state(&self) -> Vec<bool> {
        self.mask
            .iter()
            .zip(&self.values)
            .map(|(&m, &v)| m && v)
            .collect()
    }
}

/// A hidden sample together with the member each pooling unit selected on
/// the up-pass; the down-pass reuses that member's weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiddenSample {
    pub states: Vec<bool>,
    pub argmax: Vec<usize>,
}

impl Rbm {
    pub fn sample_hidden<R: Rng + ?Sized>(&self, x: &[bool], rng: &mut R) -> Result<HiddenSample> {
        let (probs, argmax) = self.hidden_probabilities(x)?;
        let states = probs.iter().map(|&p| rng.random::<f64>() < p).collect();
        Ok(HiddenSample { states, argmax })
    }

    /// Probabilities of each visible being on given a hidden sample.
    pub fn visible_probabilities(&self, h: &HiddenSample) -> Result<Vec<f64>> {
        if h.states.len() != self.n_hidden() || h.argmax.len() != self.n_hidden() {
            return Err(Error::Dimension {
                expected: self.n_hidden(),
                actual: h.states.len(),
            });
        }
        let act: Vec<f64> = h.states.iter().map(|&s| s as u8 as f64).collect();
        Ok(self
            .visible_logits(&act, &h.argmax)
            .into_iter()
            .map(logistic)
            .collect())
    }

    pub fn sample_visible<R: Rng + ?Sized>(
        &self,
        h: &HiddenSample,
        clamp: &Clamp,
        rng: &mut R,
    ) -> Result<Vec<bool>> {
        clamp.check_len(self.n_visible())?;
        let probs = self.visible_probabilities(h)?;
        Ok(probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let draw = rng.random::<f64>() < p;
                if clamp.mask[i] {
                    clamp.values[i]
                } else {
                    draw
                }
            })
            .collect())
    }

    /// Runs `chains` independent chains for `steps` hidden/visible sweeps,
    /// each starting from the clamp with free visibles off, and returns the
    /// mean final activation of every visible.
    pub fn gibbs_infer<R: Rng + ?Sized>(
        &self,
        clamp: &Clamp,
        steps: usize,
        chains: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        clamp.check_len(self.n_visible())?;
        if steps == 0 {
            return Err(Error::InvalidConfig("gibbs steps must be at least 1".into()));
        }
        let mut counts = vec![0usize; self.n_visible()];
        for _ in 0..chains {
            let mut x = clamp.initial_state();
            for _ in 0..steps {
                let h = self.sample_hidden(&x, rng)?;
                x = self.sample_visible(&h, clamp, rng)?;
            }
            for (c, &on) in counts.iter_mut().zip(&x) {
                *c += on as usize;
            }
        }
        let denom = chains.max(1) as f64;
        Ok(counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                if clamp.mask[i] {
                    clamp.values[i] as u8 as f64
                } else {
                    c as f64 / denom
                }
            })
            .collect())
    }
}
