//! Experiment protocols for the promoter and kinship datasets.
//!
//! Configuration is TOML with optional `[dna]` and `[kinship]` tables;
//! every key has a default, so an empty file is valid.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compile::{compile_kb, CompileConfig};
use crate::data::{
    one_hot_promoter, promoter_label_index, promoter_symbols, KinshipData, PromoterRecord, ResultRow,
    PROMOTER_INTERMEDIATES, PROMOTER_RULES,
};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::logic::{eliminate_intermediates_with, parse_rules, FlattenConfidence, KnowledgeBase};
use crate::rbm::{CdConfig, Clamp, Rbm};
use crate::relpipe::{entity_error, entity_queries, leave_one_out, InferenceMode, RelConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dna: DnaConfig,
    pub kinship: KinshipConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.dna.validate()?;
        cfg.kinship.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlattenPolicy {
    Consumer,
    Minimum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DnaConfig {
    pub data: Option<PathBuf>,
    /// Rule file; the bundled promoter theory when absent.
    pub rules: Option<PathBuf>,
    pub epsilon: f64,
    /// Confidence of every rule not listed in `confidences`.
    pub confidence: f64,
    /// Per-head confidence overrides, applied before flattening.
    pub confidences: BTreeMap<String, f64>,
    pub flatten: FlattenPolicy,
    pub n_free_hidden: usize,
    pub train_sizes: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub modes: Vec<String>,
    pub gibbs_chains: usize,
    pub gibbs_steps: usize,
    pub leave_one_out: bool,
    pub learning_curve: bool,
    pub cd: CdConfig,
}

impl Default for DnaConfig {
    fn default() -> Self {
        Self {
            data: None,
            rules: None,
            epsilon: 0.5,
            confidence: 1.0,
            confidences: BTreeMap::new(),
            flatten: FlattenPolicy::Consumer,
            n_free_hidden: 10,
            train_sizes: (1..=9).map(|k| k * 10).collect(),
            repeats: 50,
            seed: 0,
            modes: vec!["gibbs".into(), "conditional".into()],
            gibbs_chains: 100,
            gibbs_steps: 1,
            leave_one_out: true,
            learning_curve: true,
            cd: CdConfig::default(),
        }
    }
}

impl DnaConfig {
    pub fn validate(&self) -> Result<()> {
        CompileConfig::with_epsilon(self.epsilon).validate()?;
        self.cd.validate()?;
        if self.repeats == 0 || self.train_sizes.contains(&0) {
            return Err(Error::InvalidConfig("repeats and train sizes must be positive".into()));
        }
        if self.gibbs_chains == 0 || self.gibbs_steps == 0 {
            return Err(Error::InvalidConfig("gibbs chains and steps must be positive".into()));
        }
        for m in &self.modes {
            if m != "gibbs" && m != "conditional" {
                return Err(Error::InvalidConfig(format!("unknown inference mode `{m}`")));
            }
        }
        if self.confidence < 0.0 || self.confidences.values().any(|&c| !(c >= 0.0)) {
            return Err(Error::InvalidConfig("confidences must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinshipConfig {
    pub data: Option<PathBuf>,
    pub model: RelConfig,
    pub seeds: Vec<u64>,
    pub test_sizes: Vec<usize>,
    pub repeats: usize,
    pub leave_one_out: bool,
    pub entity_queries: bool,
}

impl Default for KinshipConfig {
    fn default() -> Self {
        Self {
            data: None,
            model: RelConfig::default(),
            seeds: vec![0, 1, 2],
            test_sizes: vec![10, 20, 30],
            repeats: 5,
            leave_one_out: true,
            entity_queries: true,
        }
    }
}

impl KinshipConfig {
    pub fn validate(&self) -> Result<()> {
        CompileConfig::with_epsilon(self.model.epsilon).validate()?;
        self.model.autoencoder.validate()?;
        if self.repeats == 0 || self.seeds.is_empty() || self.test_sizes.contains(&0) {
            return Err(Error::InvalidConfig(
                "repeats, seeds and test sizes must be non-empty and positive".into(),
            ));
        }
        Ok(())
    }
}

/// Promoter theory with overridden confidences, flattened over the
/// sequence features and projected onto the one-hot layout.
pub fn promoter_kb(rules_text: &str, cfg: &DnaConfig) -> Result<KnowledgeBase> {
    let mut kb = parse_rules(rules_text)?;
    for rule in &mut kb.rules {
        let head = kb.symbols.name(rule.head.symbol).unwrap_or_default();
        rule.confidence = cfg.confidences.get(head).copied().unwrap_or(cfg.confidence);
    }
    let hidden: Vec<&str> = PROMOTER_INTERMEDIATES
        .iter()
        .copied()
        .filter(|h| kb.symbols.id(h).is_some())
        .collect();
    let policy = match cfg.flatten {
        FlattenPolicy::Consumer => FlattenConfidence::Consumer,
        FlattenPolicy::Minimum => FlattenConfidence::Minimum,
    };
    let flat = eliminate_intermediates_with(&kb, &hidden, policy)?;
    flat.project_onto(&promoter_symbols())
}

/// An untrained promoter model: compiled rules plus free units, or free
/// units only for the plain baseline.
pub fn promoter_model(kb: Option<&KnowledgeBase>, cfg: &DnaConfig, seed: u64) -> Result<Rbm> {
    let empty = KnowledgeBase::new(promoter_symbols());
    let compile = CompileConfig {
        epsilon: cfg.epsilon,
        n_free_hidden: cfg.n_free_hidden,
        seed,
    };
    compile_kb(kb.unwrap_or(&empty), &compile)
}

/// Predicted label of each record, with its label unit left free.
pub fn predict_promoters(m: &Rbm, records: &[&PromoterRecord], mode: &str, chains: usize, steps: usize, seed: u64) -> Result<Vec<bool>> {
    let label = promoter_label_index();
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let bits = one_hot_promoter(r);
            let mut clamp = Clamp::all(&bits);
            clamp.mask[label] = false;
            clamp.values[label] = false;
            let p = match mode {
                "conditional" => m.conditional_label(&clamp, &[label])?[1],
                _ => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
                    m.gibbs_infer(&clamp, steps, chains, &mut rng)?[label]
                }
            };
            Ok(p > 0.5)
        })
        .collect()
}

fn accuracy(preds: &[bool], records: &[&PromoterRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let hits = preds.iter().zip(records).filter(|(p, r)| **p == r.label).count();
    hits as f64 / records.len() as f64
}

struct Split<'a> {
    train: Vec<&'a PromoterRecord>,
    test: Vec<&'a PromoterRecord>,
}

/// Trains both model types on one split and scores every mode.
fn evaluate_split(
    split: &Split<'_>,
    kb: &KnowledgeBase,
    cfg: &DnaConfig,
    seed: u64,
    train_size: usize,
    repeat: usize,
) -> Result<Vec<ResultRow>> {
    let data: Vec<Vec<bool>> = split.train.iter().map(|r| one_hot_promoter(r)).collect();
    let mut rows = Vec::new();
    for (name, rules) in [("dna-plain", None), ("dna-rules", Some(kb))] {
        let init = promoter_model(rules, cfg, derive_seed(seed, 1))?;
        let cd = CdConfig {
            seed: derive_seed(seed, 2),
            ..cfg.cd.clone()
        };
        let trained = init.train_cd(&data, &cd)?;
        for mode in &cfg.modes {
            let preds = predict_promoters(&trained, &split.test, mode, cfg.gibbs_chains, cfg.gibbs_steps, derive_seed(seed, 3))?;
            rows.push(ResultRow {
                experiment: name.into(),
                train_size,
                repeat,
                seed,
                mode: mode.clone(),
                accuracy: accuracy(&preds, &split.test),
            });
        }
    }
    Ok(rows)
}

/// Leave-one-out (one row per model and mode, accuracy over all folds)
/// followed by learning-curve rows for every train size and repeat.
pub fn run_dna(records: &[PromoterRecord], rules_text: &str, cfg: &DnaConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    if records.len() < 2 {
        return Err(Error::EmptyData);
    }
    let kb = promoter_kb(rules_text, cfg)?;
    let mut rows = Vec::new();
    if cfg.leave_one_out {
        let folds: Vec<Vec<ResultRow>> = (0..records.len())
            .into_par_iter()
            .map(|i| {
                let split = Split {
                    train: records.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, r)| r).collect(),
                    test: vec![&records[i]],
                };
                evaluate_split(&split, &kb, cfg, derive_seed(cfg.seed, i as u64), records.len() - 1, 0)
            })
            .collect::<Result<_>>()?;
        let n = folds.len() as f64;
        for (k, template) in folds[0].iter().enumerate() {
            let mean = folds.iter().map(|f| f[k].accuracy).sum::<f64>() / n;
            rows.push(ResultRow {
                accuracy: mean,
                seed: cfg.seed,
                ..template.clone()
            });
        }
    }
    if cfg.learning_curve {
        let jobs: Vec<(usize, usize)> = cfg
            .train_sizes
            .iter()
            .filter(|&&s| s < records.len())
            .flat_map(|&s| (0..cfg.repeats).map(move |r| (s, r)))
            .collect();
        let curve: Vec<Vec<ResultRow>> = jobs
            .par_iter()
            .map(|&(size, repeat)| {
                let seed = derive_seed(derive_seed(cfg.seed, 1 << 32 | size as u64), repeat as u64);
                let mut order: Vec<&PromoterRecord> = records.iter().collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let test = order.split_off(size);
                evaluate_split(&Split { train: order, test }, &kb, cfg, seed, size, repeat)
            })
            .collect::<Result<_>>()?;
        rows.extend(curve.into_iter().flatten());
    }
    Ok(rows)
}

pub fn dna_rules_text(cfg: &DnaConfig) -> Result<String> {
    match &cfg.rules {
        Some(path) => Ok(std::fs::read_to_string(path)?),
        None => Ok(PROMOTER_RULES.to_string()),
    }
}

/// Leave-one-out rows (`kinship-loo`, one per seed) and entity-query rows
/// (`kinship-entity`, one per test size and repeat, accuracy = 1 - error).
pub fn run_kinship(data: &KinshipData, cfg: &KinshipConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let e = &data.examples;
    let mode = cfg.model.mode.name().to_string();
    let mut rows = Vec::new();
    if cfg.leave_one_out {
        for (k, &seed) in cfg.seeds.iter().enumerate() {
            let model = RelConfig {
                seed,
                ..cfg.model.clone()
            };
            rows.push(ResultRow {
                experiment: "kinship-loo".into(),
                train_size: e.len() - 1,
                repeat: k,
                seed,
                mode: mode.clone(),
                accuracy: leave_one_out(e, &model)?.accuracy(),
            });
        }
    }
    if cfg.entity_queries {
        let base = cfg.seeds[0];
        let jobs: Vec<(usize, usize)> = cfg
            .test_sizes
            .iter()
            .flat_map(|&s| (0..cfg.repeats).map(move |r| (s, r)))
            .collect();
        let entity: Vec<ResultRow> = jobs
            .par_iter()
            .map(|&(size, repeat)| {
                let seed = derive_seed(derive_seed(base, 1 << 32 | size as u64), repeat as u64);
                let model = RelConfig {
                    seed,
                    ..cfg.model.clone()
                };
                let queries = entity_queries(e, size, &model)?;
                Ok(ResultRow {
                    experiment: "kinship-entity".into(),
                    train_size: e.len().saturating_sub(size),
                    repeat,
                    seed,
                    mode: mode.clone(),
                    accuracy: 1.0 - entity_error(&queries),
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(entity);
    }
    Ok(rows)
}

/// Mean accuracy per `(experiment, train_size, mode)`, in first-seen order.
pub fn summarize(rows: &[ResultRow]) -> Vec<(String, usize, String, f64, usize)> {
    let mut out: Vec<(String, usize, String, f64, usize)> = Vec::new();
    for r in rows {
        match out
            .iter_mut()
            .find(|o| o.0 == r.experiment && o.1 == r.train_size && o.2 == r.mode)
        {
            Some(o) => {
                o.3 += r.accuracy;
                o.4 += 1;
            }
            None => out.push((r.experiment.clone(), r.train_size, r.mode.clone(), r.accuracy, 1)),
        }
    }
    for o in &mut out {
        o.3 /= o.4 as f64;
    }
    out
}

pub fn parse_mode(s: &str) -> Result<InferenceMode> {
    match s {
        "conditional" => Ok(InferenceMode::Conditional),
        "gibbs" => Ok(InferenceMode::gibbs()),
        other => Err(Error::InvalidConfig(format!("unknown inference mode `{other}`"))),
    }
}
