//! Python bindings: the store, Z-count tables, models, training and
//! evaluation, exposed as the `kge_py` extension module.

use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use kge_core::config::{Lambda0, PacingSpec, TrainConfig};
use kge_core::curriculum::{self, PacingConfig, PacingKind};
use kge_core::eval;
use kge_core::model::{ModelKind, ModelParams};
use kge_core::store::{Split, Triple};
use kge_core::zcount::{self, ZCountTable, ZPathPolicy};
use kge_core::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::NonFiniteLoss { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn policy(exclude_query_edge: bool, require_distinct_intermediates: bool) -> ZPathPolicy {
    ZPathPolicy {
        exclude_query_edge,
        require_distinct_intermediates,
    }
}

/// Dictionary-encoded dataset with train/valid/test splits.
#[pyclass(name = "TripleStore", module = "kge_py")]
struct PyTripleStore {
    inner: kge_core::store::TripleStore,
}

#[pymethods]
impl PyTripleStore {
    /// Load train.txt / valid.txt / test.txt from a directory.
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(PyTripleStore {
            inner: kge_core::store::TripleStore::load_dir(&dir).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn load_files(train: PathBuf, valid: PathBuf, test: PathBuf) -> PyResult<Self> {
        Ok(PyTripleStore {
            inner: kge_core::store::TripleStore::load_files(&train, &valid, &test)
                .map_err(to_py_err)?,
        })
    }

    #[getter]
    fn n_entities(&self) -> usize {
        self.inner.n_entities()
    }

    #[getter]
    fn n_relations(&self) -> usize {
        self.inner.n_relations()
    }

    fn entity_id(&self, name: &str) -> Option<u32> {
        self.inner.entity_id(name)
    }

    fn entity_name(&self, id: u32) -> PyResult<String> {
        if (id as usize) < self.inner.n_entities() {
            Ok(self.inner.entity_name(id).to_string())
        } else {
            Err(PyValueError::new_err(format!("entity id {id} out of range")))
        }
    }

    fn relation_id(&self, name: &str) -> Option<u32> {
        self.inner.relation_id(name)
    }

    fn relation_name(&self, id: u32) -> PyResult<String> {
        if (id as usize) < self.inner.n_relations() {
            Ok(self.inner.relation_name(id).to_string())
        } else {
            Err(PyValueError::new_err(format!("relation id {id} out of range")))
        }
    }

    fn known(&self, head: u32, relation: u32, tail: u32) -> bool {
        self.inner.known(head, relation, tail)
    }

    /// Triples of one split as (head, relation, tail) id tuples.
    fn triples(&self, split: &str) -> PyResult<Vec<(u32, u32, u32)>> {
        let split = Split::parse(split).map_err(to_py_err)?;
        Ok(self
            .inner
            .split(split)
            .iter()
            .map(|t| (t.head, t.relation, t.tail))
            .collect())
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.train().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "TripleStore(entities={}, relations={}, train={}, valid={}, test={})",
            self.inner.n_entities(),
            self.inner.n_relations(),
            self.inner.train().len(),
            self.inner.valid().len(),
            self.inner.test().len()
        )
    }
}

/// One difficulty count per train triple.
#[pyclass(name = "ZCounts", module = "kge_py")]
struct PyZCounts {
    inner: ZCountTable,
}

#[pymethods]
impl PyZCounts {
    #[getter]
    fn counts(&self) -> Vec<u64> {
        self.inner.counts.clone()
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.stats();
        let d = PyDict::new(py);
        d.set_item("nonzero_count", s.nonzero_count)?;
        d.set_item("nonzero_fraction", s.nonzero_fraction)?;
        d.set_item("max", s.max)?;
        d.set_item("mean_over_nonzero", s.mean_over_nonzero)?;
        d.set_item("mean_over_all", s.mean_over_all)?;
        Ok(d)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyZCounts {
            inner: ZCountTable::load(&path).map_err(to_py_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Trained (or freshly initialized) embedding parameters.
#[pyclass(name = "Model", module = "kge_py")]
struct PyModel {
    inner: ModelParams,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (kind, n_entities, n_relations, dim, gamma, seed=42))]
    fn init(
        kind: &str,
        n_entities: usize,
        n_relations: usize,
        dim: usize,
        gamma: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let kind = ModelKind::parse(kind).map_err(to_py_err)?;
        Ok(PyModel {
            inner: ModelParams::init(kind, n_entities, n_relations, dim, gamma, seed),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: ModelParams::load(&path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py_err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    /// Score one triple; lower is more plausible.
    fn score(&self, head: u32, relation: u32, tail: u32) -> PyResult<f64> {
        if head as usize >= self.inner.n_entities()
            || tail as usize >= self.inner.n_entities()
            || relation as usize >= self.inner.n_relations()
        {
            return Err(PyValueError::new_err("triple ids out of range"));
        }
        Ok(self.inner.score(head, relation, tail))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(kind={}, dim={}, entities={}, relations={})",
            self.inner.kind.name(),
            self.inner.dim,
            self.inner.n_entities(),
            self.inner.n_relations()
        )
    }
}

/// Z-count of a single triple against the store's train edges.
#[pyfunction]
#[pyo3(signature = (store, head, relation, tail, exclude_query_edge=true, require_distinct_intermediates=false))]
fn z_count(
    store: PyRef<'_, PyTripleStore>,
    head: u32,
    relation: u32,
    tail: u32,
    exclude_query_edge: bool,
    require_distinct_intermediates: bool,
) -> u64 {
    zcount::z_count(
        &store.inner,
        &Triple::new(head, relation, tail),
        policy(exclude_query_edge, require_distinct_intermediates),
    )
}

/// Difficulty of every train triple.
#[pyfunction]
#[pyo3(signature = (store, exclude_query_edge=true, require_distinct_intermediates=false))]
fn compute_z_counts(
    py: Python<'_>,
    store: PyRef<'_, PyTripleStore>,
    exclude_query_edge: bool,
    require_distinct_intermediates: bool,
) -> PyZCounts {
    let inner = &store.inner;
    let p = policy(exclude_query_edge, require_distinct_intermediates);
    let table = py.detach(|| ZCountTable::compute(inner, p));
    PyZCounts { inner: table }
}

/// The share of zero-count triples, floored at 0.05.
#[pyfunction]
fn initial_percentage(table: PyRef<'_, PyZCounts>) -> f64 {
    curriculum::initial_percentage(&table.inner)
}

/// Availability fraction lambda(t) for one pacing function.
#[pyfunction]
#[pyo3(signature = (kind, lambda0, t_grow, t, p_exponent=2.0))]
fn pacing_lambda(kind: &str, lambda0: f64, t_grow: u32, t: u32, p_exponent: f64) -> PyResult<f64> {
    let kind = PacingKind::from_str(kind).map_err(to_py_err)?;
    let cfg = PacingConfig::new(kind, lambda0, t_grow, p_exponent).map_err(to_py_err)?;
    Ok(cfg.lambda(t))
}

/// Difficulty-ascending permutation of train indices (seeded tie shuffle).
#[pyfunction]
fn sort_by_difficulty(table: PyRef<'_, PyZCounts>, seed: u64) -> Vec<usize> {
    curriculum::sort_by_difficulty(&table.inner, seed)
}

#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (store, zcounts, model="transe-l2", learning_rate=5e-4, batch_size=512,
    negatives=64, alpha=1.0, gamma=9.0, max_epochs=100, dim=256, seed=42,
    pacing="geometric", lambda0=None, t_grow=50, p_exponent=2.0, filter_negatives=false))]
fn train(
    py: Python<'_>,
    store: PyRef<'_, PyTripleStore>,
    zcounts: PyRef<'_, PyZCounts>,
    model: &str,
    learning_rate: f64,
    batch_size: usize,
    negatives: usize,
    alpha: f64,
    gamma: f64,
    max_epochs: u32,
    dim: usize,
    seed: u64,
    pacing: &str,
    lambda0: Option<f64>,
    t_grow: u32,
    p_exponent: f64,
    filter_negatives: bool,
) -> PyResult<(PyModel, Vec<HashMap<String, f64>>)> {
    let kind = ModelKind::parse(model).map_err(to_py_err)?;
    let cfg = TrainConfig {
        learning_rate,
        batch_size,
        negatives,
        alpha,
        gamma,
        max_epochs,
        dim,
        seed,
        pacing: PacingSpec {
            kind: PacingKind::from_str(pacing).map_err(to_py_err)?,
            lambda0: lambda0.map_or(Lambda0::Auto, Lambda0::Fixed),
            t_grow,
            p_exponent,
        },
        filter_negatives,
        ..TrainConfig::default()
    };
    let (inner_store, inner_table) = (&store.inner, &zcounts.inner);
    let output = py
        .detach(|| kge_core::train::train(inner_store, inner_table, kind, &cfg))
        .map_err(to_py_err)?;
    let logs = output
        .epochs
        .iter()
        .map(|e| {
            HashMap::from([
                ("epoch".to_string(), e.epoch as f64),
                ("lambda".to_string(), e.lambda),
                ("mean_loss".to_string(), e.mean_loss),
                ("seconds".to_string(), e.seconds),
                ("triples".to_string(), e.triples as f64),
            ])
        })
        .collect();
    Ok((PyModel { inner: output.params }, logs))
}

/// Filtered (or raw) ranking metrics over a split.
#[pyfunction]
#[pyo3(signature = (model, store, split="test", filtered=true))]
fn evaluate<'py>(
    py: Python<'py>,
    model: PyRef<'_, PyModel>,
    store: PyRef<'_, PyTripleStore>,
    split: &str,
    filtered: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let split = Split::parse(split).map_err(to_py_err)?;
    let (params, inner) = (&model.inner, &store.inner);
    let triples = inner.split(split);
    if triples.is_empty() {
        return Err(PyValueError::new_err(format!("{split} split is empty")));
    }
    let report = py.detach(|| eval::evaluate(params, inner, triples, filtered));
    let d = PyDict::new(py);
    d.set_item("mrr", report.mrr)?;
    d.set_item("mr", report.mr)?;
    d.set_item("hits1", report.hits1)?;
    d.set_item("hits3", report.hits3)?;
    d.set_item("hits10", report.hits10)?;
    d.set_item("count", report.count)?;
    Ok(d)
}

/// Area under the precision-recall curve; scores are lower-is-better.
#[pyfunction]
fn auc_pr(labels: Vec<bool>, scores: Vec<f64>) -> PyResult<f64> {
    eval::auc_pr(&labels, &scores).map_err(to_py_err)
}

/// Pooled query-style AUC-PR over a split (candidates = its distinct tails).
#[pyfunction]
#[pyo3(signature = (model, store, split="test"))]
fn auc_pr_pooled(
    py: Python<'_>,
    model: PyRef<'_, PyModel>,
    store: PyRef<'_, PyTripleStore>,
    split: &str,
) -> PyResult<f64> {
    let split = Split::parse(split).map_err(to_py_err)?;
    let (params, inner) = (&model.inner, &store.inner);
    let triples = inner.split(split);
    py.detach(|| eval::auc_pr_pooled(params, triples))
        .map_err(to_py_err)
}

/// Rank-vs-Z-count diagnostic over a split: per-triple (rank, z) rows plus
/// the mean Z of triples ranked inside / outside the top 10.
#[pyfunction]
#[pyo3(signature = (model, store, split="test", exclude_query_edge=true, require_distinct_intermediates=false))]
fn diagnose<'py>(
    py: Python<'py>,
    model: PyRef<'_, PyModel>,
    store: PyRef<'_, PyTripleStore>,
    split: &str,
    exclude_query_edge: bool,
    require_distinct_intermediates: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let split = Split::parse(split).map_err(to_py_err)?;
    let (params, inner) = (&model.inner, &store.inner);
    let triples = inner.split(split);
    let p = policy(exclude_query_edge, require_distinct_intermediates);
    let diag = py.detach(|| eval::diagnose_zcount_rank(params, inner, p, triples));
    let d = PyDict::new(py);
    d.set_item("top_mean", diag.top_mean)?;
    d.set_item("bottom_mean", diag.bottom_mean)?;
    d.set_item(
        "rows",
        diag.rows.iter().map(|r| (r.rank, r.z)).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

#[pymodule]
fn kge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTripleStore>()?;
    m.add_class::<PyZCounts>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(z_count, m)?)?;
    m.add_function(wrap_pyfunction!(compute_z_counts, m)?)?;
    m.add_function(wrap_pyfunction!(initial_percentage, m)?)?;
    m.add_function(wrap_pyfunction!(pacing_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(sort_by_difficulty, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(auc_pr, m)?)?;
    m.add_function(wrap_pyfunction!(auc_pr_pooled, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    Ok(())
}
