//! One-hidden-layer logistic autoencoder trained on reconstruction
//! cross-entropy.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{logistic, softplus};

pub const AE_FORMAT_HEADER: &str = "rulerbm-autoencoder 1";
const INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_size: usize,
    pub seed: u64,
    pub tie_weights: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 1000,
            batch_size: 8,
            hidden_size: 24,
            seed: 0,
            tie_weights: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be finite and non-negative".into()));
        }
        if self.batch_size == 0 || self.hidden_size == 0 {
            return Err(Error::InvalidConfig("batch_size and hidden_size must be positive".into()));
        }
        Ok(())
    }
}

/// Encoder `a = logistic(W1^T f + b1)`, decoder `r = logistic(W2^T a + b2)`.
/// With tied weights `W2 = W1^T` and only `W1` is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoEncoder {
    pub d_in: usize,
    pub d_hidden: usize,
    /// `d_in x d_hidden`, row-major.
    pub enc_w: Vec<f64>,
    pub enc_b: Vec<f64>,
    /// `d_hidden x d_in`, row-major; empty when tied.
    pub dec_w: Vec<f64>,
    pub dec_b: Vec<f64>,
    pub tied: bool,
}

/// Gradient of the loss with respect to every parameter, laid out like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub enc_w: Vec<f64>,
    pub enc_b: Vec<f64>,
    pub dec_w: Vec<f64>,
    pub dec_b: Vec<f64>,
}

impl AutoEncoder {
    pub fn zeros(d_in: usize, d_hidden: usize, tied: bool) -> Self {
        Self {
            d_in,
            d_hidden,
            enc_w: vec![0.0; d_in * d_hidden],
            enc_b: vec![0.0; d_hidden],
            dec_w: if tied { vec![] } else { vec![0.0; d_hidden * d_in] },
            dec_b: vec![0.0; d_in],
            tied,
        }
    }

    /// Weights from `N(0, 0.1^2)`, zero biases.
    pub fn init(d_in: usize, cfg: &TrainConfig) -> Self {
        let mut ae = Self::zeros(d_in, cfg.hidden_size, cfg.tie_weights);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
        for w in ae.enc_w.iter_mut().chain(ae.dec_w.iter_mut()) {
            *w = normal.sample(&mut rng);
        }
        ae
    }

    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.d_in {
            return Err(Error::Dimension {
                expected: self.d_in,
                actual: f.len(),
            });
        }
        Ok(())
    }

    pub fn encode(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        Ok(self.encode_unchecked(f))
    }

    fn encode_unchecked(&self, f: &[f64]) -> Vec<f64> {
        let mut pre = self.enc_b.clone();
        for (i, &x) in f.iter().enumerate() {
            if x != 0.0 {
                let row = &self.enc_w[i * self.d_hidden..(i + 1) * self.d_hidden];
                for (p, w) in pre.iter_mut().zip(row) {
                    *p += w * x;
                }
            }
        }
        pre.into_iter().map(logistic).collect()
    }

    fn decode_logits(&self, a: &[f64]) -> Vec<f64> {
        let (h, n) = (self.d_hidden, self.d_in);
        let mut z = self.dec_b.clone();
        if self.tied {
            for (i, zi) in z.iter_mut().enumerate() {
                *zi += dot(&self.enc_w[i * h..(i + 1) * h], a);
            }
        } else {
            for (j, &aj) in a.iter().enumerate() {
                for (zi, w) in z.iter_mut().zip(&self.dec_w[j * n..(j + 1) * n]) {
                    *zi += w * aj;
                }
            }
        }
        z
    }

    pub fn reconstruct(&self, f: &[f64]) -> Result<Vec<f64>> {
        let a = self.encode(f)?;
        Ok(self.decode_logits(&a).into_iter().map(logistic).collect())
    }

    /// Mean over `data` of `sum_i -t_i ln r_i - (1 - t_i) ln(1 - r_i)`.
    pub fn loss(&self, data: &[Vec<f64>]) -> Result<f64> {
        Ok(self.loss_and_gradient(data)?.0)
    }

    pub fn loss_and_gradient(&self, data: &[Vec<f64>]) -> Result<(f64, Gradient)> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        for f in data {
            self.check(f)?;
        }
        let mut g = self.zero_gradient();
        let loss = self.accumulate(data.iter().map(Vec::as_slice), &mut g);
        Ok((loss, g))
    }

    fn zero_gradient(&self) -> Gradient {
        Gradient {
            enc_w: vec![0.0; self.enc_w.len()],
            enc_b: vec![0.0; self.enc_b.len()],
            dec_w: vec![0.0; self.dec_w.len()],
            dec_b: vec![0.0; self.dec_b.len()],
        }
    }

    /// Mean loss over `batch`; the mean gradient is written into `g`.
    fn accumulate<'a>(&self, batch: impl ExactSizeIterator<Item = &'a [f64]>, g: &mut Gradient) -> f64 {
        for v in g.enc_w.iter_mut().chain(&mut g.enc_b).chain(&mut g.dec_w).chain(&mut g.dec_b) {
            *v = 0.0;
        }
        let (h, n) = (self.d_hidden, self.d_in);
        let count = batch.len();
        let mut loss = 0.0;
        let mut da = vec![0.0; h];
        let mut dz = vec![0.0; n];
        for f in batch {
            let a = self.encode_unchecked(f);
            let z = self.decode_logits(&a);
            for i in 0..n {
                // Cross-entropy in logit form: softplus(z) - t z.
                loss += softplus(z[i]) - f[i] * z[i];
                dz[i] = logistic(z[i]) - f[i];
                g.dec_b[i] += dz[i];
            }
            if self.tied {
                da.fill(0.0);
                for i in 0..n {
                    let row = i * h..(i + 1) * h;
                    for ((gw, w), (d, &aj)) in g.enc_w[row.clone()]
                        .iter_mut()
                        .zip(&self.enc_w[row])
                        .zip(da.iter_mut().zip(&a))
                    {
                        *gw += aj * dz[i];
                        *d += w * dz[i];
                    }
                }
            } else {
                for j in 0..h {
                    let row = j * n..(j + 1) * n;
                    da[j] = dot(&self.dec_w[row.clone()], &dz);
                    for (gw, &d) in g.dec_w[row].iter_mut().zip(&dz) {
                        *gw += a[j] * d;
                    }
                }
            }
            for j in 0..h {
                da[j] *= a[j] * (1.0 - a[j]);
                g.enc_b[j] += da[j];
            }
            for (i, &x) in f.iter().enumerate() {
                if x != 0.0 {
                    for (gw, &d) in g.enc_w[i * h..(i + 1) * h].iter_mut().zip(&da) {
                        *gw += x * d;
                    }
                }
            }
        }
        let scale = 1.0 / count as f64;
        for v in g.enc_w.iter_mut().chain(&mut g.enc_b).chain(&mut g.dec_w).chain(&mut g.dec_b) {
            *v *= scale;
        }
        loss * scale
    }

    fn step(&mut self, g: &Gradient, lr: f64) {
        let pairs = [
            (&mut self.enc_w, &g.enc_w),
            (&mut self.enc_b, &g.enc_b),
            (&mut self.dec_w, &g.dec_w),
            (&mut self.dec_b, &g.dec_b),
        ];
        for (params, grads) in pairs {
            for (p, d) in params.iter_mut().zip(grads) {
                *p -= lr * d;
            }
        }
    }

    /// Parameters as one flat vector in the order enc_w, enc_b, dec_w, dec_b.
    pub fn parameters(&self) -> Vec<f64> {
        [&self.enc_w, &self.enc_b, &self.dec_w, &self.dec_b]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        let total = self.enc_w.len() + self.enc_b.len() + self.dec_w.len() + self.dec_b.len();
        if flat.len() != total {
            return Err(Error::Dimension {
                expected: total,
                actual: flat.len(),
            });
        }
        let mut rest = flat;
        for params in [&mut self.enc_w, &mut self.enc_b, &mut self.dec_w, &mut self.dec_b] {
            let (head, tail) = rest.split_at(params.len());
            params.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }
}

impl Gradient {
    pub fn flatten(&self) -> Vec<f64> {
        [&self.enc_w, &self.enc_b, &self.dec_w, &self.dec_b]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn check_data(data: &[Vec<f64>]) -> Result<usize> {
    let d = data.first().ok_or(Error::EmptyData)?.len();
    if let Some(bad) = data.iter().find(|f| f.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            actual: bad.len(),
        });
    }
    Ok(d)
}

pub fn train(data: &[Vec<f64>], cfg: &TrainConfig) -> Result<AutoEncoder> {
    Ok(fit(data, cfg, false)?.0)
}

/// Also returns the full-data loss before training and after each epoch.
pub fn train_with_history(data: &[Vec<f64>], cfg: &TrainConfig) -> Result<(AutoEncoder, Vec<f64>)> {
    fit(data, cfg, true)
}

fn fit(data: &[Vec<f64>], cfg: &TrainConfig, record: bool) -> Result<(AutoEncoder, Vec<f64>)> {
    cfg.validate()?;
    let d = check_data(data)?;
    let mut ae = AutoEncoder::init(d, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(cfg.seed, 1));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::new();
    if record {
        history.push(ae.loss(data)?);
    }
    let mut g = ae.zero_gradient();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            ae.accumulate(chunk.iter().map(|&i| data[i].as_slice()), &mut g);
            ae.step(&g, cfg.learning_rate);
        }
        if record {
            history.push(ae.loss(data)?);
        }
    }
    Ok((ae, history))
}

fn write_matrix(out: &mut String, values: &[f64], cols: usize) {
    for row in values.chunks(cols.max(1)) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

pub fn write_autoencoder(ae: &AutoEncoder) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{AE_FORMAT_HEADER}");
    let _ = writeln!(out, "input {}", ae.d_in);
    let _ = writeln!(out, "hidden {}", ae.d_hidden);
    let _ = writeln!(out, "tied {}", ae.tied as u8);
    out.push_str("encoder\n");
    write_matrix(&mut out, &ae.enc_w, ae.d_hidden);
    write_matrix(&mut out, &ae.enc_b, ae.d_hidden);
    if !ae.tied {
        out.push_str("decoder\n");
        write_matrix(&mut out, &ae.dec_w, ae.d_in);
    }
    out.push_str("decoder_bias\n");
    write_matrix(&mut out, &ae.dec_b, ae.d_in);
    out.push_str("end\n");
    out
}

struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let item = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::Format(format!("unexpected end, expected {what}")))?;
        self.pos += 1;
        Ok(item)
    }

    fn keyed(&mut self, key: &str) -> Result<usize> {
        let (no, line) = self.next(key)?;
        line.strip_prefix(key)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad_line(no, format!("expected `{key} <n>`")))
    }

    fn marker(&mut self, name: &str) -> Result<()> {
        let (no, line) = self.next(name)?;
        if line != name {
            return Err(bad_line(no, format!("expected `{name}`")));
        }
        Ok(())
    }

    fn rows(&mut self, into: &mut [f64], cols: usize) -> Result<()> {
        for chunk in into.chunks_mut(cols.max(1)) {
            let (no, line) = self.next("matrix row")?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad_line(no, format!("bad number `{s}`"))))
                .collect::<Result<_>>()?;
            if vals.len() != chunk.len() {
                return Err(bad_line(no, format!("expected {} values", chunk.len())));
            }
            chunk.copy_from_slice(&vals);
        }
        Ok(())
    }
}

fn bad_line(line: usize, msg: String) -> Error {
    Error::Format(format!("line {line}: {msg}"))
}

pub fn read_autoencoder(text: &str) -> Result<AutoEncoder> {
    let mut c = Cursor {
        lines: text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).collect(),
        pos: 0,
    };
    let (no, header) = c.next("header")?;
    if header != AE_FORMAT_HEADER {
        return Err(bad_line(no, format!("expected header `{AE_FORMAT_HEADER}`")));
    }
    let d_in = c.keyed("input")?;
    let d_hidden = c.keyed("hidden")?;
    let tied = match c.keyed("tied")? {
        0 => false,
        1 => true,
        _ => return Err(Error::Format("`tied` must be 0 or 1".into())),
    };
    let mut ae = AutoEncoder::zeros(d_in, d_hidden, tied);
    c.marker("encoder")?;
    c.rows(&mut ae.enc_w, d_hidden)?;
    c.rows(&mut ae.enc_b, d_hidden)?;
    if !tied {
        c.marker("decoder")?;
        c.rows(&mut ae.dec_w, d_in)?;
    }
    c.marker("decoder_bias")?;
    c.rows(&mut ae.dec_b, d_in)?;
    c.marker("end")?;
    Ok(ae)
}
