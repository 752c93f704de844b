//! Python bindings: the `commgraph_py` extension module.
//!
//! Build with `cargo build -p commgraph-py --release` and import the
//! resulting shared library as `commgraph_py`.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use commgraph::baselines::{distmult_train, MethodKind};
use commgraph::dataset::{NamedTriplet, Triplet, TripletDataset};
use commgraph::error::ErrorClass;
use commgraph::evaluation::{self, run_experiment, ExperimentConfig, Label, LabeledScore};
use commgraph::model::{self, HyperParams, Method, TrainedModel};
use commgraph::numeric::Rng;
use commgraph::scorer::{RankQuery, ScoreKey, Side};
use commgraph::scoring::{self, Verdict};
use commgraph::snapshot;
use commgraph::synthgen::{generate, SynthSpec};
use commgraph::Error;

fn to_py(e: Error) -> PyErr {
    match (&e, e.class()) {
        (Error::Io { .. }, _) => PyOSError::new_err(e.to_string()),
        (_, ErrorClass::Usage) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

type Row = (String, String, String);

fn named(rows: &[Row]) -> Vec<NamedTriplet> {
    rows.iter().map(|(s, p, c)| NamedTriplet::new(s, p, c)).collect()
}

fn rows(ds: &TripletDataset, ts: &[Triplet]) -> Vec<Row> {
    ts.iter()
        .map(|&t| {
            let n = ds.name_of(t);
            (n.server, n.relation, n.client)
        })
        .collect()
}

/// Train/test triplets over a fixed IP and relation vocabulary.
#[pyclass(module = "commgraph_py", name = "Dataset", frozen)]
pub struct PyDataset {
    pub inner: TripletDataset,
}

#[pymethods]
impl PyDataset {
    /// Build from `(server_ip, relation, client_ip)` tuples.
    #[new]
    #[pyo3(signature = (train, test=Vec::new()))]
    pub fn new(train: Vec<Row>, test: Vec<Row>) -> PyResult<Self> {
        let inner = TripletDataset::from_named(&named(&train), &named(&test)).map_err(to_py)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    pub fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: TripletDataset::load(&path).map_err(to_py)?,
        })
    }

    pub fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[getter]
    pub fn num_ips(&self) -> usize {
        self.inner.num_ips()
    }

    #[getter]
    pub fn num_relations(&self) -> usize {
        self.inner.num_relations()
    }

    #[getter]
    pub fn ips(&self) -> Vec<String> {
        self.inner.ips().items().to_vec()
    }

    #[getter]
    pub fn relations(&self) -> Vec<String> {
        self.inner.relations().items().to_vec()
    }

    pub fn train_triplets(&self) -> Vec<Row> {
        rows(&self.inner, self.inner.train())
    }

    pub fn test_triplets(&self) -> Vec<Row> {
        rows(&self.inner, self.inner.test())
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.summary();
        let d = PyDict::new(py);
        d.set_item("ip_addresses", s.ip_addresses)?;
        d.set_item("relations", s.relations)?;
        d.set_item("training_triplets", s.training_triplets)?;
        d.set_item("test_triplets", s.test_triplets)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let s = self.inner.summary();
        format!(
            "Dataset(ips={}, relations={}, train={}, test={})",
            s.ip_addresses, s.relations, s.training_triplets, s.test_triplets
        )
    }
}

/// A trained R-GCN or DistMult model together with its whitelist.
#[pyclass(module = "commgraph_py", name = "Model", frozen)]
pub struct PyModel {
    pub inner: TrainedModel,
}

fn verdict_tuple(v: Verdict) -> (String, f64, Option<f64>) {
    (v.kind.label().to_string(), v.raw_score, v.rank_score)
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    pub fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: snapshot::load_model(&path).map_err(to_py)?,
        })
    }

    pub fn save(&self, path: PathBuf) -> PyResult<()> {
        snapshot::save_model(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    pub fn method(&self) -> String {
        self.inner.hyperparams.method.to_string()
    }

    #[getter]
    pub fn training_log(&self) -> Vec<f64> {
        self.inner.training_log.clone()
    }

    fn hyperparams<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let hp = &self.inner.hyperparams;
        let d = PyDict::new(py);
        d.set_item("method", hp.method.to_string())?;
        d.set_item("hidden_dim", hp.hidden_dim)?;
        d.set_item("block_size", hp.block_size)?;
        d.set_item("dropout_rate", hp.dropout_rate)?;
        d.set_item("l2_weight", hp.l2_weight)?;
        d.set_item("learning_rate", hp.learning_rate)?;
        d.set_item("negative_rate", hp.negative_rate)?;
        d.set_item("epochs", hp.epochs)?;
        d.set_item("seed", hp.seed)?;
        Ok(d)
    }

    /// Node embedding of an IP address.
    pub fn embedding(&self, ip: &str) -> PyResult<Vec<f64>> {
        let i = self
            .inner
            .ips
            .get(ip)
            .ok_or_else(|| PyValueError::new_err(format!("unknown IP address {ip:?}")))?;
        Ok(self.inner.embedding(i).to_vec())
    }

    /// Score one triplet: `(verdict, raw_score, rank_score)`. The rank score
    /// is only computed for `SCORED` triplets.
    pub fn score(&self, server_ip: &str, relation: &str, client_ip: &str) -> PyResult<(String, f64, Option<f64>)> {
        let t = NamedTriplet::new(server_ip, relation, client_ip);
        let report = scoring::batch_score(&self.inner, &[(1, t)]);
        if let Some(e) = report.errors.first() {
            return Err(PyValueError::new_err(e.message.clone()));
        }
        Ok(verdict_tuple(report.rows[0].verdict))
    }

    /// Score many triplets. Rows that cannot be scored yield `None`.
    pub fn score_many(&self, py: Python<'_>, triplets: Vec<Row>) -> Vec<Option<(String, f64, Option<f64>)>> {
        let indexed: Vec<(u64, NamedTriplet)> = named(&triplets)
            .into_iter()
            .enumerate()
            .map(|(i, t)| (i as u64, t))
            .collect();
        let report = py.detach(|| scoring::batch_score(&self.inner, &indexed));
        let mut out = vec![None; triplets.len()];
        let failed: std::collections::HashSet<u64> = report.errors.iter().map(|e| e.line).collect();
        let mut rows = report.rows.into_iter();
        for (i, slot) in out.iter_mut().enumerate() {
            if !failed.contains(&(i as u64)) {
                *slot = rows.next().map(|r| verdict_tuple(r.verdict));
            }
        }
        out
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(method={}, ips={}, relations={}, epochs={})",
            self.inner.hyperparams.method,
            self.inner.ips.len(),
            self.inner.relations.len(),
            self.inner.training_log.len()
        )
    }
}

/// Generate a synthetic plant dataset; the built-in desk-scale plant unless
/// `spec_path` names a TOML spec.
#[pyfunction]
#[pyo3(signature = (seed=7, spec_path=None))]
pub fn synth_dataset(seed: u64, spec_path: Option<PathBuf>) -> PyResult<PyDataset> {
    let spec = match spec_path {
        Some(p) => SynthSpec::load(&p).map_err(to_py)?,
        None => SynthSpec::desk_scale(),
    };
    let out = generate(&spec, &mut Rng::seed_from_u64(seed)).map_err(to_py)?;
    Ok(PyDataset { inner: out.dataset })
}

#[allow(clippy::too_many_arguments)]
fn hyperparams(
    method: &str,
    epochs: Option<usize>,
    dim: Option<usize>,
    block_size: Option<usize>,
    dropout: Option<f64>,
    l2: Option<f64>,
    lr: Option<f64>,
    neg_rate: Option<usize>,
    seed: Option<u64>,
) -> PyResult<HyperParams> {
    let method: Method = method.parse().map_err(to_py)?;
    let mut hp = HyperParams::defaults_for(method);
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut hp.epochs, epochs);
    set(&mut hp.hidden_dim, dim);
    set(&mut hp.block_size, block_size);
    set(&mut hp.negative_rate, neg_rate);
    hp.dropout_rate = dropout.unwrap_or(hp.dropout_rate);
    hp.l2_weight = l2.unwrap_or(hp.l2_weight);
    hp.learning_rate = lr.unwrap_or(hp.learning_rate);
    hp.seed = seed.unwrap_or(hp.seed);
    hp.validate().map_err(to_py)?;
    Ok(hp)
}

/// Train a model. Unset hyperparameters take the method's defaults.
#[pyfunction]
#[pyo3(signature = (dataset, method="rgcn", *, epochs=None, dim=None, block_size=None, dropout=None, l2=None, lr=None, neg_rate=None, seed=None))]
#[allow(clippy::too_many_arguments)]
pub fn train(
    py: Python<'_>,
    dataset: &PyDataset,
    method: &str,
    epochs: Option<usize>,
    dim: Option<usize>,
    block_size: Option<usize>,
    dropout: Option<f64>,
    l2: Option<f64>,
    lr: Option<f64>,
    neg_rate: Option<usize>,
    seed: Option<u64>,
) -> PyResult<PyModel> {
    let hp = hyperparams(method, epochs, dim, block_size, dropout, l2, lr, neg_rate, seed)?;
    let ds = &dataset.inner;
    let trained = py
        .detach(|| match hp.method {
            Method::Rgcn => model::train(ds, &hp),
            Method::DistMult => distmult_train(ds, &hp),
        })
        .map_err(to_py)?;
    Ok(PyModel { inner: trained })
}

/// Run the full evaluation. Returns one dict per method with keys
/// `method, mrr, hits1, hits3, hits10, auc_score_based, auc_rank_based`.
#[pyfunction]
#[pyo3(signature = (dataset, methods="all", anomaly_count=500, eval_seed=7, epochs=None))]
pub fn evaluate<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    methods: &str,
    anomaly_count: usize,
    eval_seed: u64,
    epochs: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = ExperimentConfig {
        methods: MethodKind::parse_list(methods).map_err(to_py)?,
        anomaly_count,
        eval_seed,
        ..ExperimentConfig::default()
    };
    if let Some(e) = epochs {
        cfg.rgcn.epochs = e;
        cfg.distmult.epochs = e;
    }
    let ds = &dataset.inner;
    let results = py.detach(|| run_experiment(ds, &cfg)).map_err(to_py)?;
    results
        .methods
        .iter()
        .map(|m| {
            let d = PyDict::new(py);
            d.set_item("method", &m.method)?;
            d.set_item("mrr", m.mrr)?;
            d.set_item("hits1", m.hits1)?;
            d.set_item("hits3", m.hits3)?;
            d.set_item("hits10", m.hits10)?;
            d.set_item("auc_score_based", m.auc_score_based)?;
            d.set_item("auc_rank_based", m.auc_rank_based)?;
            Ok(d)
        })
        .collect()
}

/// ROC AUC for separating anomalous from normal samples, where lower
/// scores mean "more anomalous". Ties count one half.
#[pyfunction]
pub fn roc_auc(normal_scores: Vec<f64>, anomalous_scores: Vec<f64>) -> PyResult<f64> {
    let labeled = |scores: Vec<f64>, label| {
        scores
            .into_iter()
            .map(move |s| ScoreKey::single(s).map(|score| LabeledScore { score, label }))
    };
    let samples = labeled(normal_scores, Label::Normal)
        .chain(labeled(anomalous_scores, Label::Anomalous))
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    evaluation::roc_auc(&samples).map_err(to_py)
}

fn queries(ranks: &[f64]) -> PyResult<Vec<RankQuery>> {
    ranks
        .iter()
        .map(|&r| {
            if !(r >= 1.0 && r.is_finite()) {
                return Err(PyValueError::new_err(format!("rank {r} must be a finite value >= 1")));
            }
            Ok(RankQuery {
                target: Triplet::new(0, 0, 1),
                side: Side::CorruptObject,
                num_candidates: r.ceil() as usize,
                target_rank: r,
            })
        })
        .collect()
}

/// Mean reciprocal rank of a list of (possibly fractional) ranks.
#[pyfunction]
pub fn mrr(ranks: Vec<f64>) -> PyResult<f64> {
    evaluation::mrr(&queries(&ranks)?).map_err(to_py)
}

/// Share of ranks that are at most `n`.
#[pyfunction]
pub fn hits_at_n(ranks: Vec<f64>, n: usize) -> PyResult<f64> {
    evaluation::hits_at_n(&queries(&ranks)?, n).map_err(to_py)
}

#[pymodule]
fn commgraph_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(synth_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(mrr, m)?)?;
    m.add_function(wrap_pyfunction!(hits_at_n, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
