//! Python bindings: configs, experiments, sample sets, and a small-network
//! handle for evaluating SINRs, gradients and power controllers directly.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cellfree_core::clustering::{build_association_matrix, hierarchical_cluster as cluster, AssociationMatrix, DistanceMatrix};
use cellfree_core::config::Linkage;
use cellfree_core::geometry::LargeScaleMatrix;
use cellfree_core::harness::{self, ClusteringMode, Controller, ExperimentSpec, SeSampleSet};
use cellfree_core::pilot::{PilotAssignment, PilotPowerVector};
use cellfree_core::power::{self, SinrContext};
use cellfree_core::report;
use cellfree_core::solver::{self, SolverSettings, SolverTrace};
use cellfree_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidConfig(_)
        | Error::ConfigParse(_)
        | Error::UnknownPreset { .. }
        | Error::EmptyServingSet { .. }
        | Error::EmptySamples => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Simulation configuration. Pass TOML text to override defaults.
#[pyclass(name = "SimConfig", from_py_object)]
#[derive(Clone)]
pub struct PySimConfig {
    pub inner: cellfree_core::SimConfig,
}

#[pymethods]
impl PySimConfig {
    #[new]
    #[pyo3(signature = (toml=None))]
    pub fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(text) => cellfree_core::SimConfig::from_toml(text).map_err(py_err)?,
            None => cellfree_core::SimConfig::default(),
        };
        Ok(Self { inner })
    }

    pub fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn num_aps(&self) -> usize {
        self.inner.network.num_aps
    }
    #[setter]
    fn set_num_aps(&mut self, v: usize) {
        self.inner.network.num_aps = v;
    }

    #[getter]
    fn num_users(&self) -> usize {
        self.inner.network.num_users
    }
    #[setter]
    fn set_num_users(&mut self, v: usize) {
        self.inner.network.num_users = v;
    }

    #[getter]
    fn antennas_per_ap(&self) -> usize {
        self.inner.network.antennas_per_ap
    }
    #[setter]
    fn set_antennas_per_ap(&mut self, v: usize) {
        self.inner.network.antennas_per_ap = v;
    }

    #[getter]
    fn pilot_length(&self) -> usize {
        self.inner.network.pilot_length
    }
    #[setter]
    fn set_pilot_length(&mut self, v: usize) {
        self.inner.network.pilot_length = v;
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.clustering.threshold
    }
    #[setter]
    fn set_threshold(&mut self, v: f64) {
        self.inner.clustering.threshold = v;
    }

    /// LSE sharpness λ.
    #[getter]
    fn lam(&self) -> f64 {
        self.inner.solver.lambda
    }
    #[setter]
    fn set_lam(&mut self, v: f64) {
        self.inner.solver.lambda = v;
    }

    fn __repr__(&self) -> String {
        let n = &self.inner.network;
        format!(
            "SimConfig(num_aps={}, num_users={}, antennas_per_ap={}, pilot_length={})",
            n.num_aps, n.num_users, n.antennas_per_ap, n.pilot_length
        )
    }
}

fn parse_controller(s: &str) -> PyResult<Controller> {
    match s {
        "wsrm" | "wsrm-ppc" => Ok(Controller::Wsrm),
        "mse" | "mse-ppc" => Ok(Controller::Mse),
        "f" | "f-ppc" => Ok(Controller::Full),
        _ => Err(PyValueError::new_err(format!("unknown controller `{s}` (wsrm, mse, f)"))),
    }
}

fn parse_clustering(s: &str) -> PyResult<ClusteringMode> {
    match s {
        "proposed" | "clustered" => Ok(ClusteringMode::Proposed),
        "all-aps" => Ok(ClusteringMode::AllAps),
        _ => Err(PyValueError::new_err(format!("unknown clustering mode `{s}` (proposed, all-aps)"))),
    }
}

fn parse_linkage(s: &str) -> PyResult<Linkage> {
    match s {
        "average" => Ok(Linkage::Average),
        "single" => Ok(Linkage::Single),
        "complete" => Ok(Linkage::Complete),
        _ => Err(PyValueError::new_err(format!("unknown linkage `{s}` (average, single, complete)"))),
    }
}

/// A Monte Carlo experiment: config, curve set, realization count and seed.
#[pyclass(name = "Experiment", from_py_object)]
#[derive(Clone)]
pub struct PyExperiment {
    pub inner: ExperimentSpec,
}

#[pymethods]
impl PyExperiment {
    #[new]
    #[pyo3(signature = (id, config=None, controllers=None, clustering=None, antennas=None, realizations=300, seed=1))]
    pub fn new(
        id: String,
        config: Option<PySimConfig>,
        controllers: Option<Vec<String>>,
        clustering: Option<Vec<String>>,
        antennas: Option<Vec<usize>>,
        realizations: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let mut spec = ExperimentSpec::new(id, config.map(|c| c.inner).unwrap_or_default());
        if let Some(c) = controllers {
            spec.controllers = c.iter().map(|s| parse_controller(s)).collect::<PyResult<_>>()?;
        }
        if let Some(c) = clustering {
            spec.clustering_modes = c.iter().map(|s| parse_clustering(s)).collect::<PyResult<_>>()?;
        }
        spec.antenna_sweep = antennas.unwrap_or_default();
        spec.realizations = realizations;
        spec.base_seed = seed;
        spec.validate().map_err(py_err)?;
        Ok(Self { inner: spec })
    }

    #[staticmethod]
    pub fn preset(name: &str) -> PyResult<Self> {
        harness::preset(name).map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn realizations(&self) -> usize {
        self.inner.realizations
    }
    #[setter]
    fn set_realizations(&mut self, n: usize) {
        self.inner.realizations = n;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.base_seed
    }
    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.base_seed = seed;
    }

    #[getter]
    fn config(&self) -> PySimConfig {
        PySimConfig {
            inner: self.inner.config.clone(),
        }
    }

    /// Curve labels in output order.
    pub fn labels(&self) -> Vec<String> {
        self.inner.variants().iter().map(|v| self.inner.label(v)).collect()
    }

    pub fn hash(&self) -> String {
        self.inner.hash()
    }

    /// Runs every realization; releases the GIL while working.
    #[pyo3(signature = (workers=None))]
    pub fn run(&self, py: Python<'_>, workers: Option<usize>) -> PyResult<PySampleSet> {
        let spec = self.inner.clone();
        py.detach(move || harness::monte_carlo(&spec, workers))
            .map(|inner| PySampleSet { inner })
            .map_err(py_err)
    }
}

/// Per-user SE samples of every curve of one experiment run.
#[pyclass(name = "SampleSet")]
pub struct PySampleSet {
    pub inner: SeSampleSet,
}

#[pymethods]
impl PySampleSet {
    pub fn labels(&self) -> Vec<String> {
        self.inner.series.iter().map(|s| s.label.clone()).collect()
    }

    pub fn values(&self, label: &str) -> PyResult<Vec<f64>> {
        self.inner
            .series(label)
            .map(|s| s.values())
            .ok_or_else(|| PyValueError::new_err(format!("no curve labelled `{label}`")))
    }

    /// Median SE per curve label.
    pub fn medians(&self) -> PyResult<BTreeMap<String, f64>> {
        let summary = report::summarize(&self.inner).map_err(py_err)?;
        Ok(summary.controllers.into_iter().map(|(k, v)| (k, v.median)).collect())
    }

    #[getter]
    fn failed(&self) -> Vec<usize> {
        self.inner.failed.clone()
    }

    pub fn samples_csv(&self) -> String {
        report::samples_csv(&self.inner)
    }

    pub fn cdf_csv(&self) -> PyResult<String> {
        report::cdf_csv(&self.inner).map_err(py_err)
    }

    pub fn summary_json(&self) -> PyResult<String> {
        report::summary_json(&self.inner).map_err(py_err)
    }

    /// Writes the samples, CDF and summary files; returns their paths.
    pub fn write(&self, directory: PathBuf) -> PyResult<Vec<String>> {
        let files = report::write_artifacts(&self.inner, &directory).map_err(py_err)?;
        Ok(files.into_iter().map(|p| p.display().to_string()).collect())
    }
}

/// Fixed network snapshot for evaluating SINRs and running power controllers.
///
/// `beta[m][k]` holds large-scale gains, `pilots[k]` the pilot index of user `k`
/// and `serving[k]` its serving APs (every AP when omitted).
#[pyclass(name = "Network")]
pub struct PyNetwork {
    pub ctx: SinrContext,
    pub settings: SolverSettings,
}

fn trace_tuple(q: PilotPowerVector, trace: SolverTrace) -> (Vec<f64>, Vec<f64>, String) {
    let objectives = trace.iterates.iter().map(|it| it.objective).collect();
    (q.0, objectives, format!("{:?}", trace.stop))
}

impl PyNetwork {
    fn check_len(&self, q: &[f64]) -> PyResult<()> {
        if q.len() == self.ctx.num_users() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!(
                "expected {} pilot powers, got {}",
                self.ctx.num_users(),
                q.len()
            )))
        }
    }

    fn check_user(&self, k: usize) -> PyResult<()> {
        if k < self.ctx.num_users() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("user {k} out of range")))
        }
    }
}

#[pymethods]
impl PyNetwork {
    #[new]
    #[pyo3(signature = (beta, pilots, tau_p, serving=None, antennas=1, config=None))]
    pub fn new(
        beta: Vec<Vec<f64>>,
        pilots: Vec<usize>,
        tau_p: usize,
        serving: Option<Vec<Vec<usize>>>,
        antennas: usize,
        config: Option<PySimConfig>,
    ) -> PyResult<Self> {
        let cfg = config.map(|c| c.inner).unwrap_or_default();
        let m_count = beta.len();
        let k_count = pilots.len();
        if m_count == 0 || beta.iter().any(|row| row.len() != k_count) {
            return Err(PyValueError::new_err("beta must be a non-empty M x K list with K = len(pilots)"));
        }
        if beta.iter().flatten().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(PyValueError::new_err("beta entries must be finite and non-negative"));
        }
        if tau_p == 0 || pilots.iter().any(|&p| p >= tau_p) {
            return Err(PyValueError::new_err("pilot indices must lie in [0, tau_p)"));
        }
        let flat: Vec<f64> = beta.into_iter().flatten().collect();
        let array = ndarray_from(m_count, k_count, flat);
        let assoc = match serving {
            Some(sets) => {
                if sets.len() != k_count || sets.iter().flatten().any(|&m| m >= m_count) {
                    return Err(PyValueError::new_err("serving must hold one AP list per user with indices < M"));
                }
                build_association_matrix(m_count, sets).map_err(py_err)?
            }
            None => AssociationMatrix::full(m_count, k_count),
        };
        let net = &cfg.network;
        let ctx = SinrContext::new(
            LargeScaleMatrix::new(array),
            assoc,
            PilotAssignment::new(pilots, tau_p),
            vec![net.max_data_power; k_count],
            tau_p,
            net.coherence_block,
            antennas,
            net.noise_power,
            cfg.sinr,
        )
        .map_err(py_err)?;
        Ok(Self {
            ctx,
            settings: SolverSettings::new(&cfg.solver, net),
        })
    }

    #[getter]
    fn num_users(&self) -> usize {
        self.ctx.num_users()
    }

    #[getter]
    fn num_aps(&self) -> usize {
        self.ctx.num_aps()
    }

    pub fn sinr(&self, q: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_len(&q)?;
        Ok(power::sinr_all(&q, &self.ctx))
    }

    pub fn spectral_efficiency(&self, q: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_len(&q)?;
        Ok(power::spectral_efficiency_all(&q, &self.ctx))
    }

    pub fn grad_sinr(&self, k: usize, q: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_len(&q)?;
        self.check_user(k)?;
        Ok(power::grad_sinr(k, &q, &self.ctx))
    }

    pub fn lse(&self, q: Vec<f64>, lam: f64) -> PyResult<f64> {
        self.check_len(&q)?;
        Ok(power::lse_objective(&q, &self.ctx, lam))
    }

    pub fn grad_lse(&self, q: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
        self.check_len(&q)?;
        Ok(power::grad_lse(&q, &self.ctx, lam))
    }

    /// Proposed controller. Returns (powers, objective per iterate, stop reason).
    #[pyo3(signature = (q_init=None))]
    pub fn wsrm_ppc(&self, q_init: Option<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>, String)> {
        let start = match q_init {
            Some(q) => {
                self.check_len(&q)?;
                PilotPowerVector(q)
            }
            None => PilotPowerVector::constant(self.ctx.num_users(), self.settings.max_power),
        };
        let (q, trace) = solver::wsrm_ppc(&self.ctx, &self.settings, &start).map_err(py_err)?;
        Ok(trace_tuple(q, trace))
    }

    /// Estimation-error baseline. Returns (powers, error per iterate, stop reason).
    pub fn mse_ppc(&self) -> PyResult<(Vec<f64>, Vec<f64>, String)> {
        let (q, trace) = solver::mse_ppc(&self.ctx, &self.settings).map_err(py_err)?;
        Ok(trace_tuple(q, trace))
    }

    pub fn f_ppc(&self) -> Vec<f64> {
        solver::f_ppc(&self.ctx, &self.settings).0
    }
}

fn ndarray_from(rows: usize, cols: usize, flat: Vec<f64>) -> Array2<f64> {
    Array2::from_shape_vec((rows, cols), flat).expect("shape checked by caller")
}

#[pyfunction]
pub fn preset_names() -> Vec<String> {
    harness::PRESET_NAMES.iter().map(|s| s.to_string()).collect()
}

#[pyfunction]
pub fn log_sum_exp(values: Vec<f64>, lam: f64) -> PyResult<f64> {
    if values.is_empty() || lam.is_nan() || lam <= 0.0 {
        return Err(PyValueError::new_err("need at least one value and lam > 0"));
    }
    Ok(power::log_sum_exp(&values, lam))
}

#[pyfunction]
pub fn se_from_sinr(sinr: f64, tau_p: usize, tau_c: usize) -> PyResult<f64> {
    if tau_p > tau_c || tau_c == 0 {
        return Err(PyValueError::new_err("need tau_p <= tau_c and tau_c > 0"));
    }
    Ok(power::se_from_sinr(sinr, tau_p, tau_c))
}

/// Partition plus (a, b, height) merge rows.
type ClusterResult = (Vec<Vec<usize>>, Vec<(usize, usize, f64)>);

/// Agglomerative clustering of a symmetric distance matrix.
///
/// Returns the partition at `threshold` and the merges as (a, b, height) rows.
#[pyfunction]
#[pyo3(signature = (distances, threshold, linkage="average"))]
pub fn hierarchical_cluster(
    distances: Vec<Vec<f64>>,
    threshold: f64,
    linkage: &str,
) -> PyResult<ClusterResult> {
    let n = distances.len();
    if distances.iter().any(|row| row.len() != n) {
        return Err(PyValueError::new_err("distances must be square"));
    }
    let flat: Vec<f64> = distances.into_iter().flatten().collect();
    let d = ndarray_from(n, n, flat);
    let symmetric = (0..n).all(|i| d[[i, i]] == 0.0 && (0..n).all(|j| d[[i, j]] == d[[j, i]]));
    if !symmetric || d.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(PyValueError::new_err("distances must be symmetric, zero on the diagonal and within [0, 1]"));
    }
    let result = cluster(&DistanceMatrix::new(d), threshold, parse_linkage(linkage)?);
    let merges = result
        .dendrogram
        .merges
        .iter()
        .map(|m| (m.cluster_a, m.cluster_b, m.height))
        .collect();
    Ok((result.partition, merges))
}

#[pymodule]
fn cellfree(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySimConfig>()?;
    m.add_class::<PyExperiment>()?;
    m.add_class::<PySampleSet>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(log_sum_exp, m)?)?;
    m.add_function(wrap_pyfunction!(se_from_sinr, m)?)?;
    m.add_function(wrap_pyfunction!(hierarchical_cluster, m)?)?;
    Ok(())
}
