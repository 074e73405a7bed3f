//! Python bindings: parse and compile rule sets, query the compiled machine,
//! check equivalence and answer kinship queries.

use std::collections::HashMap;
use std::path::Path;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rulerbm_core::compile::{compile_kb, CompileConfig};
use rulerbm_core::data::{parse_kinship, KinshipData};
use rulerbm_core::logic::Assignment;
use rulerbm_core::rbm::{read_model, write_model, Clamp};
use rulerbm_core::relpipe::{RelConfig, RelationalModel};
use rulerbm_core::verify::{self, Satisfiability};

fn err(e: rulerbm_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "KnowledgeBase", module = "rulerbm")]
struct PyKnowledgeBase {
    inner: rulerbm_core::logic::KnowledgeBase,
}

#[pymethods]
impl PyKnowledgeBase {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        rulerbm_core::logic::parse_rules(text)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[getter]
    fn symbols(&self) -> Vec<String> {
        self.inner.symbols.names().map(str::to_string).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.rules.len()
    }

    fn weighted_satisfiability(&self, x: Vec<bool>) -> PyResult<f64> {
        if x.len() != self.inner.n_symbols() {
            return Err(PyValueError::new_err(format!(
                "expected {} values, got {}",
                self.inner.n_symbols(),
                x.len()
            )));
        }
        self.inner.weighted_satisfiability(&Assignment::new(x)).map_err(err)
    }

    #[pyo3(signature = (epsilon=0.5))]
    fn compile(&self, epsilon: f64) -> PyResult<PyRbm> {
        compile_kb(&self.inner, &CompileConfig::with_epsilon(epsilon))
            .map(|inner| PyRbm { inner })
            .map_err(err)
    }

    fn __str__(&self) -> String {
        self.inner.pretty()
    }
}

#[pyclass(name = "Rbm", module = "rulerbm")]
struct PyRbm {
    inner: rulerbm_core::rbm::Rbm,
}

impl PyRbm {
    fn index(&self, name: &str) -> PyResult<usize> {
        self.inner
            .visible_index(name)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))
    }

    fn clamp(&self, evidence: &HashMap<String, bool>) -> PyResult<Clamp> {
        let pairs = evidence
            .iter()
            .map(|(k, &v)| Ok((self.index(k)?, v)))
            .collect::<PyResult<Vec<_>>>()?;
        Clamp::from_pairs(self.inner.n_visible(), &pairs).map_err(err)
    }
}

#[pymethods]
impl PyRbm {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        read_model(text).map(|inner| Self { inner }).map_err(err)
    }

    fn to_text(&self) -> PyResult<String> {
        write_model(&self.inner).map_err(err)
    }

    #[getter]
    fn n_visible(&self) -> usize {
        self.inner.n_visible()
    }

    #[getter]
    fn n_hidden(&self) -> usize {
        self.inner.n_hidden()
    }

    #[getter]
    fn visible_names(&self) -> Vec<String> {
        self.inner.visible_names.clone()
    }

    fn rank_energy(&self, x: Vec<bool>) -> PyResult<f64> {
        self.inner.rank_energy(&x).map_err(err)
    }

    fn free_energy(&self, x: Vec<bool>) -> PyResult<f64> {
        self.inner.free_energy(&x).map_err(err)
    }

    /// Distribution over the joint assignments of `targets` given the
    /// evidence, indexed with the first target as the lowest bit.
    fn conditional(&self, evidence: HashMap<String, bool>, targets: Vec<String>) -> PyResult<Vec<f64>> {
        let clamp = self.clamp(&evidence)?;
        let ids = targets.iter().map(|t| self.index(t)).collect::<PyResult<Vec<_>>>()?;
        self.inner.conditional_label(&clamp, &ids).map_err(err)
    }

    /// `P(v = 1 | evidence)` for every visible.
    fn marginals(&self, evidence: HashMap<String, bool>) -> PyResult<HashMap<String, f64>> {
        let p = self.inner.conditional_marginals(&self.clamp(&evidence)?).map_err(err)?;
        Ok(self.inner.visible_names.iter().cloned().zip(p).collect())
    }

    #[pyo3(signature = (evidence, chains=100, steps=1, seed=0))]
    fn gibbs(&self, evidence: HashMap<String, bool>, chains: usize, steps: usize, seed: u64) -> PyResult<HashMap<String, f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = self
            .inner
            .gibbs_infer(&self.clamp(&evidence)?, steps, chains, &mut rng)
            .map_err(err)?;
        Ok(self.inner.visible_names.iter().cloned().zip(p).collect())
    }
}

/// Returns `(passed, a, b, max_residual)` for `rank_energy = a * sat + b`.
#[pyfunction]
#[pyo3(signature = (kb, rbm, epsilon=0.5, weighted=true, tol=1e-9))]
fn check_equivalence(
    kb: &PyKnowledgeBase,
    rbm: &PyRbm,
    epsilon: f64,
    weighted: bool,
    tol: f64,
) -> PyResult<(bool, f64, f64, f64)> {
    let mode = if weighted {
        Satisfiability::Weighted
    } else {
        Satisfiability::Unweighted
    };
    let r = verify::check_equivalence(&kb.inner, &rbm.inner, epsilon, mode, tol).map_err(err)?;
    Ok((r.passed, r.witness.a, r.witness.b, r.witness.max_residual))
}

/// A relational model fitted to kinship triples.
#[pyclass(name = "Kinship", module = "rulerbm", unsendable)]
struct PyKinship {
    data: KinshipData,
    model: RelationalModel,
}

impl PyKinship {
    fn person(&self, name: &str) -> PyResult<usize> {
        self.data
            .examples
            .scheme
            .entity(name)
            .map_err(|_| PyKeyError::new_err(name.to_string()))
    }
}

#[pymethods]
impl PyKinship {
    /// Fits on `text`, one `relation(person1,person2)` per line.
    #[new]
    #[pyo3(signature = (text, seed=0))]
    fn new(text: &str, seed: u64) -> PyResult<Self> {
        let data = parse_kinship(text, Path::new("<string>")).map_err(err)?;
        let cfg = RelConfig {
            seed,
            ..RelConfig::default()
        };
        let model = RelationalModel::fit(&data.examples, &cfg).map_err(err)?;
        Ok(Self { data, model })
    }

    #[getter]
    fn people(&self) -> Vec<String> {
        self.data.people.iter().map(|p| p.name.clone()).collect()
    }

    #[getter]
    fn relations(&self) -> Vec<String> {
        self.data.relations.iter().map(|r| r.name.clone()).collect()
    }

    /// Relations ranked for `?(a, b)`, best first.
    fn relation(&mut self, a: &str, b: &str) -> PyResult<Vec<(String, f64)>> {
        let (a, b) = (self.person(a)?, self.person(b)?);
        let ans = self.model.answer_relation(a, b).map_err(err)?;
        Ok(ans.ranked.into_iter().map(|r| (r.1, r.2)).collect())
    }

    /// People ranked for `rel(a, ?)`, best first.
    fn entity(&mut self, rel: &str, a: &str) -> PyResult<Vec<(String, f64)>> {
        let r = self
            .data
            .examples
            .scheme
            .predicate(rel)
            .map_err(|_| PyKeyError::new_err(rel.to_string()))?;
        let a = self.person(a)?;
        let ans = self.model.answer_entity(r, a).map_err(err)?;
        Ok(ans.ranked.into_iter().map(|r| (r.1, r.2)).collect())
    }
}

#[pymodule]
fn rulerbm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKnowledgeBase>()?;
    m.add_class::<PyRbm>()?;
    m.add_class::<PyKinship>()?;
    m.add_function(wrap_pyfunction!(check_equivalence, m)?)?;
    Ok(())
}
