//! Relational reasoning over binary relations: every known atom is encoded
//! as a rule in an RBM, the RBM is queried for relation activations of a
//! pair and of each of its members, and an autoencoder trained on those
//! features fills in the relation of an unseen pair.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoenc::{self, AutoEncoder, TrainConfig};
use crate::compile::{compile_rules, CompileConfig};
use crate::error::{Error, Result};
use crate::ground::{ground_example_clause, GroundAtom, GroundingScheme};
use crate::rbm::{Clamp, Rbm};

/// Known atoms over a grounding scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleSet {
    pub atoms: Vec<GroundAtom>,
    pub scheme: GroundingScheme,
}

impl ExampleSet {
    pub fn new(atoms: Vec<GroundAtom>, scheme: GroundingScheme) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for atom in &atoms {
            scheme.check_atom(atom)?;
            if atom.args.len() != 2 {
                return Err(Error::Grounding("only binary relations are supported".into()));
            }
            if !seen.insert(atom) {
                return Err(Error::Duplicate {
                    kind: "atom",
                    name: scheme.render_atom(atom),
                });
            }
        }
        Ok(Self { atoms, scheme })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }

    /// The same set with `removed` taken out.
    pub fn without(&self, removed: &[GroundAtom]) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .filter(|a| !removed.contains(a))
                .cloned()
                .collect(),
            scheme: self.scheme.clone(),
        }
    }

    pub fn n_relations(&self) -> usize {
        self.scheme.predicates.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum InferenceMode {
    /// Exact marginals of the free visibles given the clamp.
    Conditional,
    /// Mean activations of Gibbs chains started from the clamp.
    Gibbs { chains: usize, steps: usize },
}

impl Default for InferenceMode {
    fn default() -> Self {
        Self::Conditional
    }
}

impl InferenceMode {
    pub fn gibbs() -> Self {
        Self::Gibbs {
            chains: 100,
            steps: 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Conditional => "conditional",
            Self::Gibbs { .. } => "gibbs",
        }
    }
}

/// How the one-sided blocks `R(a,*)` and `R(*,b)` read the open slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpenSlot {
    /// The open slot is clamped to nobody.
    Empty,
    /// Strongest pair activation over every other person in the open slot.
    #[default]
    Best,
}

/// Relation activations for the pair `(a, b)`: with both people clamped,
/// with only `a` in the first slot, and with only `b` in the second.
///
/// The `reverse*` blocks hold the same three readings with the slots
/// swapped (`R(b,a)`, `R(*,a)`, `R(b,*)`). They are empty when the model
/// is configured without them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub direct: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub reverse: Vec<f64>,
    pub left_reverse: Vec<f64>,
    pub right_reverse: Vec<f64>,
}

impl FeatureVector {
    pub fn has_reverse(&self) -> bool {
        !self.reverse.is_empty()
    }

    pub fn concat(&self) -> Vec<f64> {
        [
            &self.direct,
            &self.left,
            &self.right,
            &self.reverse,
            &self.left_reverse,
            &self.right_reverse,
        ]
        .into_iter()
        .flatten()
        .copied()
        .collect()
    }

    /// Inverse of [`FeatureVector::concat`]; accepts 3 or 6 blocks.
    pub fn from_concat(v: &[f64], n_relations: usize) -> Result<Self> {
        let n = n_relations;
        if n == 0 || (v.len() != 3 * n && v.len() != 6 * n) {
            return Err(Error::Dimension {
                expected: 3 * n,
                actual: v.len(),
            });
        }
        let block = |k: usize| v.get(k * n..(k + 1) * n).map_or(Vec::new(), <[f64]>::to_vec);
        Ok(Self {
            direct: block(0),
            left: block(1),
            right: block(2),
            reverse: block(3),
            left_reverse: block(4),
            right_reverse: block(5),
        })
    }
}

/// Candidates ranked by descending score, ties by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub ranked: Vec<(usize, String, f64)>,
}

impl Answer {
    fn from_scores(scores: Vec<(usize, String, f64)>) -> Self {
        let mut ranked = scores;
        ranked.sort_by(|x, y| y.2.total_cmp(&x.2).then(x.0.cmp(&y.0)));
        Self { ranked }
    }

    pub fn top(&self) -> Option<&(usize, String, f64)> {
        self.ranked.first()
    }

    pub fn top_ids(&self, k: usize) -> Vec<usize> {
        self.ranked.iter().take(k).map(|r| r.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelConfig {
    pub epsilon: f64,
    /// Confidence of every encoded atom.
    pub confidence: f64,
    pub mode: InferenceMode,
    pub autoencoder: TrainConfig,
    /// Also read every relation with the two people swapped.
    pub reverse_features: bool,
    pub open_slot: OpenSlot,
    pub seed: u64,
}

impl Default for RelConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            confidence: 5.0,
            mode: InferenceMode::Conditional,
            autoencoder: TrainConfig {
                learning_rate: 0.5,
                hidden_size: 36,
                ..TrainConfig::default()
            },
            reverse_features: true,
            open_slot: OpenSlot::Best,
            seed: 0,
        }
    }
}

impl RelConfig {
    fn compile_config(&self) -> CompileConfig {
        CompileConfig::with_epsilon(self.epsilon)
    }
}

/// One hidden unit per atom (plus a pooling unit when grounding leaves one).
pub fn encode_examples(e: &ExampleSet, cfg: &CompileConfig, confidence: f64) -> Result<Rbm> {
    if e.is_empty() {
        return Err(Error::EmptyData);
    }
    let rules = e
        .atoms
        .iter()
        .map(|atom| ground_example_clause(atom, &[], &e.scheme, confidence))
        .collect::<Result<Vec<_>>>()?;
    let names = e.scheme.symbols.names().map(str::to_string).collect();
    compile_rules(names, &rules, cfg)
}

fn pair_clamp(scheme: &GroundingScheme, a: Option<usize>, b: Option<usize>) -> Result<Clamp> {
    let n = scheme.n_symbols();
    let mut clamp = Clamp::none(n);
    for slot in 0..2 {
        for s in scheme.slot_block(slot) {
            clamp.mask[s] = true;
        }
    }
    if let Some(a) = a {
        clamp.values[scheme.slot_symbol(0, a)?] = true;
    }
    if let Some(b) = b {
        clamp.values[scheme.slot_symbol(1, b)?] = true;
    }
    Ok(clamp)
}

fn query_seed(seed: u64, a: Option<usize>, b: Option<usize>) -> u64 {
    let code = |e: Option<usize>| e.map_or(0, |e| e as u64 + 1);
    crate::derive_seed(crate::derive_seed(seed, code(a)), code(b))
}

/// Relation-block activations with the given people clamped into the two
/// slots. Every other person unit is clamped off.
pub fn relation_activations(
    n: &Rbm,
    scheme: &GroundingScheme,
    a: Option<usize>,
    b: Option<usize>,
    mode: InferenceMode,
    seed: u64,
) -> Result<Vec<f64>> {
    let clamp = pair_clamp(scheme, a, b)?;
    let probs = match mode {
        InferenceMode::Conditional => n.conditional_marginals(&clamp)?,
        InferenceMode::Gibbs { chains, steps } => {
            let mut rng = ChaCha8Rng::seed_from_u64(query_seed(seed, a, b));
            n.gibbs_infer(&clamp, steps, chains, &mut rng)?
        }
    };
    Ok(probs[scheme.predicate_block()].to_vec())
}

/// One-sided activations of `person` sitting in `slot` (0 or 1).
pub fn sided_activations(
    n: &Rbm,
    scheme: &GroundingScheme,
    slot: usize,
    person: usize,
    open: OpenSlot,
    mode: InferenceMode,
    seed: u64,
) -> Result<Vec<f64>> {
    let place = |other: Option<usize>| if slot == 0 { (Some(person), other) } else { (other, Some(person)) };
    match open {
        OpenSlot::Empty => {
            let (a, b) = place(None);
            relation_activations(n, scheme, a, b, mode, seed)
        }
        OpenSlot::Best => {
            if person >= scheme.entities.len() {
                return Err(Error::UnknownEntity(format!("#{person}")));
            }
            let mut best = vec![f64::NEG_INFINITY; scheme.predicates.len()];
            for other in (0..scheme.entities.len()).filter(|&o| o != person) {
                let (a, b) = place(Some(other));
                let v = relation_activations(n, scheme, a, b, mode, seed)?;
                for (m, x) in best.iter_mut().zip(v) {
                    *m = m.max(x);
                }
            }
            Ok(best.into_iter().map(|m| m.max(0.0)).collect())
        }
    }
}

pub fn infer_features(
    n: &Rbm,
    scheme: &GroundingScheme,
    a: usize,
    b: usize,
    cfg: &RelConfig,
) -> Result<FeatureVector> {
    let (mode, seed, open) = (cfg.mode, cfg.seed, cfg.open_slot);
    let pair = |x, y| relation_activations(n, scheme, Some(x), Some(y), mode, seed);
    let sided = |slot, p| sided_activations(n, scheme, slot, p, open, mode, seed);
    let mut f = FeatureVector {
        direct: pair(a, b)?,
        left: sided(0, a)?,
        right: sided(1, b)?,
        reverse: Vec::new(),
        left_reverse: Vec::new(),
        right_reverse: Vec::new(),
    };
    if cfg.reverse_features {
        f.reverse = pair(b, a)?;
        f.left_reverse = sided(1, a)?;
        f.right_reverse = sided(0, b)?;
    }
    Ok(f)
}

/// An encoded example set together with the autoencoder trained on the
/// features of its pairs.
#[derive(Debug, Clone)]
pub struct RelationalModel {
    pub rbm: Rbm,
    pub autoencoder: AutoEncoder,
    pub scheme: GroundingScheme,
    pub cfg: RelConfig,
    /// One-sided activations keyed by (slot, person).
    sided: HashMap<(usize, usize), Vec<f64>>,
}

impl RelationalModel {
    pub fn fit(e: &ExampleSet, cfg: &RelConfig) -> Result<Self> {
        if e.len() < 2 {
            return Err(Error::Query("at least two examples are needed".into()));
        }
        let rbm = encode_examples(e, &cfg.compile_config(), cfg.confidence)?;
        let mut model = Self {
            rbm,
            autoencoder: AutoEncoder::zeros(3 * e.n_relations(), 1, false),
            scheme: e.scheme.clone(),
            cfg: cfg.clone(),
            sided: HashMap::new(),
        };
        let data = e
            .atoms
            .iter()
            .map(|atom| Ok(model.features(atom.args[0], atom.args[1])?.concat()))
            .collect::<Result<Vec<_>>>()?;
        model.autoencoder = autoenc::train(&data, &cfg.autoencoder)?;
        Ok(model)
    }

    fn sided(&mut self, slot: usize, person: usize) -> Result<Vec<f64>> {
        if let Some(v) = self.sided.get(&(slot, person)) {
            return Ok(v.clone());
        }
        let c = &self.cfg;
        let v = sided_activations(&self.rbm, &self.scheme, slot, person, c.open_slot, c.mode, c.seed)?;
        self.sided.insert((slot, person), v.clone());
        Ok(v)
    }

    /// Features of `(a, b)`; the one-sided blocks are cached per person.
    pub fn features(&mut self, a: usize, b: usize) -> Result<FeatureVector> {
        let (mode, seed) = (self.cfg.mode, self.cfg.seed);
        let pair = |m: &Self, x, y| relation_activations(&m.rbm, &m.scheme, Some(x), Some(y), mode, seed);
        let mut f = FeatureVector {
            direct: pair(self, a, b)?,
            left: self.sided(0, a)?,
            right: self.sided(1, b)?,
            reverse: Vec::new(),
            left_reverse: Vec::new(),
            right_reverse: Vec::new(),
        };
        if self.cfg.reverse_features {
            f.reverse = pair(self, b, a)?;
            f.left_reverse = self.sided(1, a)?;
            f.right_reverse = self.sided(0, b)?;
        }
        Ok(f)
    }

    pub fn reconstruct(&mut self, a: usize, b: usize) -> Result<FeatureVector> {
        let f = self.features(a, b)?;
        let r = self.autoencoder.reconstruct(&f.concat())?;
        FeatureVector::from_concat(&r, self.scheme.predicates.len())
    }

    fn check_entity(&self, e: usize) -> Result<()> {
        if e >= self.scheme.entities.len() {
            return Err(Error::UnknownEntity(format!("#{e}")));
        }
        Ok(())
    }

    /// Relations ranked by the reconstructed direct block of `(a, b)`.
    pub fn answer_relation(&mut self, a: usize, b: usize) -> Result<Answer> {
        self.check_entity(a)?;
        self.check_entity(b)?;
        let r = self.reconstruct(a, b)?;
        Ok(Answer::from_scores(
            self.scheme
                .predicates
                .iter()
                .map(|p| (p.id, p.name.clone(), r.direct[p.id]))
                .collect(),
        ))
    }

    /// Every person other than `a`, ranked by the reconstructed score of
    /// `rel` for the pair `(a, b)`.
    pub fn answer_entity(&mut self, rel: usize, a: usize) -> Result<Answer> {
        if rel >= self.scheme.predicates.len() {
            return Err(Error::UnknownRelation(format!("#{rel}")));
        }
        self.check_entity(a)?;
        let people: Vec<(usize, String)> = self
            .scheme
            .entities
            .iter()
            .filter(|e| e.id != a)
            .map(|e| (e.id, e.name.clone()))
            .collect();
        let mut scores = Vec::with_capacity(people.len());
        for (id, name) in people {
            let r = self.reconstruct(a, id)?;
            scores.push((id, name, r.direct[rel]));
        }
        Ok(Answer::from_scores(scores))
    }
}

/// Builds the model on `e` (which must not contain the queried atom) and
/// answers `?(a, b)`.
pub fn answer_relation(e: &ExampleSet, a: usize, b: usize, cfg: &RelConfig) -> Result<Answer> {
    RelationalModel::fit(e, cfg)?.answer_relation(a, b)
}

pub fn answer_entity(e: &ExampleSet, rel: usize, a: usize, cfg: &RelConfig) -> Result<Answer> {
    RelationalModel::fit(e, cfg)?.answer_entity(rel, a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooFold {
    pub atom: GroundAtom,
    pub predicted: usize,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooReport {
    pub folds: Vec<LooFold>,
}

impl LooReport {
    pub fn accuracy(&self) -> f64 {
        if self.folds.is_empty() {
            return 0.0;
        }
        self.folds.iter().filter(|f| f.correct).count() as f64 / self.folds.len() as f64
    }
}

/// Holds out each atom in turn and predicts its relation from the rest.
/// Fold `i` uses seed `derive_seed(cfg.seed, i)`.
pub fn leave_one_out(e: &ExampleSet, cfg: &RelConfig) -> Result<LooReport> {
    let folds = (0..e.len())
        .into_par_iter()
        .map(|i| {
            let atom = e.atoms[i].clone();
            let mut fold_cfg = cfg.clone();
            fold_cfg.seed = crate::derive_seed(cfg.seed, i as u64);
            fold_cfg.autoencoder.seed = crate::derive_seed(fold_cfg.seed, 0);
            let train = e.without(std::slice::from_ref(&atom));
            let answer = answer_relation(&train, atom.args[0], atom.args[1], &fold_cfg)?;
            let predicted = answer.top().map(|t| t.0).unwrap_or(usize::MAX);
            Ok(LooFold {
                correct: predicted == atom.predicate,
                predicted,
                atom,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LooReport { folds })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityQuery {
    pub relation: usize,
    pub subject: usize,
    pub gold: Vec<usize>,
    pub top: Vec<usize>,
    pub correct: bool,
}

/// Holds out `test_size` random atoms, builds the model on the rest and
/// asks `R(a, ?)` for each held-out `R(a, b)`. A query is correct when
/// every `b'` with `R(a, b')` in the full set is among the top
/// `|gold|` candidates.
pub fn entity_queries(e: &ExampleSet, test_size: usize, cfg: &RelConfig) -> Result<Vec<EntityQuery>> {
    if test_size == 0 || test_size + 2 > e.len() {
        return Err(Error::InvalidConfig(format!(
            "test size {test_size} does not fit {} examples",
            e.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut test: Vec<GroundAtom> = e.atoms.clone();
    test.shuffle(&mut rng);
    test.truncate(test_size);
    let mut model_cfg = cfg.clone();
    model_cfg.autoencoder.seed = crate::derive_seed(cfg.seed, 0);
    let mut model = RelationalModel::fit(&e.without(&test), &model_cfg)?;
    test.iter()
        .map(|atom| {
            let (rel, a) = (atom.predicate, atom.args[0]);
            let gold: Vec<usize> = e
                .atoms
                .iter()
                .filter(|t| t.predicate == rel && t.args[0] == a)
                .map(|t| t.args[1])
                .collect();
            let top = model.answer_entity(rel, a)?.top_ids(gold.len());
            Ok(EntityQuery {
                relation: rel,
                subject: a,
                correct: gold.iter().all(|g| top.contains(g)),
                gold,
                top,
            })
        })
        .collect()
}

/// Fraction of wrong answers in one [`entity_queries`] run.
pub fn entity_error(queries: &[EntityQuery]) -> f64 {
    if queries.is_empty() {
        return 0.0;
    }
    queries.iter().filter(|q| !q.correct).count() as f64 / queries.len() as f64
}
