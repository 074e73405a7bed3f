use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Clamp, Rbm, UnitKind};
use crate::error::{Error, Result};
use crate::logistic;

/// Contrastive-divergence hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CdConfig {
    pub learning_rate: f64,
    pub cd_steps: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Keep the parameters of compiled rule units fixed.
    pub freeze_rule_units: bool,
    pub seed: u64,
}

impl Default for CdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            cd_steps: 1,
            epochs: 100,
            batch_size: 10,
            freeze_rule_units: true,
            seed: 0,
        }
    }
}

impl CdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be non-negative".into()));
        }
        if self.cd_steps == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "cd_steps, epochs and batch_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Rbm {
    /// Units whose parameters CD updates. Pooling units never are.
    pub fn trainable_units(&self, freeze_rule_units: bool) -> Vec<usize> {
        self.hidden
            .iter()
            .enumerate()
            .filter(|(j, u)| {
                matches!(u.kind, UnitKind::Standard(_)) && !(freeze_rule_units && *j < self.n_rule_units)
            })
            .map(|(j, _)| j)
            .collect()
    }

    /// CD-k with mini-batches; returns the trained copy.
    pub fn train_cd(&self, data: &[Vec<bool>], cfg: &CdConfig) -> Result<Rbm> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        for v in data {
            self.check_visible(v)?;
        }
        let mut model = self.clone();
        let trainable = model.trainable_units(cfg.freeze_rule_units);
        let n = model.n_visible();
        let free = Clamp::none(n);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();

        let mut grad_w = vec![vec![0.0; n]; trainable.len()];
        let mut grad_b = vec![0.0; trainable.len()];
        let mut grad_vb = vec![0.0; n];

        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                grad_w.iter_mut().for_each(|g| g.fill(0.0));
                grad_b.fill(0.0);
                grad_vb.fill(0.0);
                for &idx in batch {
                    let v0 = &data[idx];
                    let mut vk = v0.clone();
                    for _ in 0..cfg.cd_steps {
                        let h = model.sample_hidden(&vk, &mut rng)?;
                        vk = model.sample_visible(&h, &free, &mut rng)?;
                    }
                    let (pos, _) = model.potentials_with_argmax(v0);
                    let (neg, _) = model.potentials_with_argmax(&vk);
                    for (t, &j) in trainable.iter().enumerate() {
                        let p0 = logistic(pos[j]);
                        let pk = logistic(neg[j]);
                        let g = &mut grad_w[t];
                        for i in 0..n {
                            g[i] += p0 * (v0[i] as u8 as f64) - pk * (vk[i] as u8 as f64);
                        }
                        grad_b[t] += p0 - pk;
                    }
                    for i in 0..n {
                        grad_vb[i] += (v0[i] as u8 as f64) - (vk[i] as u8 as f64);
                    }
                }
                let step = cfg.learning_rate / batch.len() as f64;
                for (t, &j) in trainable.iter().enumerate() {
                    if let UnitKind::Standard(m) = &mut model.hidden[j].kind {
                        for (w, g) in m.weights.iter_mut().zip(&grad_w[t]) {
                            *w += step * g;
                        }
                        m.bias += step * grad_b[t];
                    }
                }
                for (b, g) in model.visible_bias.iter_mut().zip(&grad_vb) {
                    *b += step * g;
                }
            }
        }
        Ok(model)
    }

    /// Mean over `data` of the summed binary cross-entropy of a mean-field
    /// reconstruction `x -> P(h|x) -> P(x|h)`.
    pub fn reconstruction_cross_entropy(&self, data: &[Vec<bool>]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut total = 0.0;
        for v in data {
            let (probs, argmax) = self.hidden_probabilities(v)?;
            let logits = self.visible_logits(&probs, &argmax);
            for (&on, l) in v.iter().zip(logits) {
                let p = logistic(l).clamp(1e-12, 1.0 - 1e-12);
                total -= if on { p.ln() } else { (1.0 - p).ln() };
            }
        }
        Ok(total / data.len() as f64)
    }
}
