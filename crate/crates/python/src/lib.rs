//! Python bindings: particle worlds, training, evaluation and checkpoints.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use marl_core::env::{scenario_catalog as catalog_for, EnvConfig, EnvKind, Scenario, World};
use marl_core::harness::{
    self, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Method, TrainerConfig,
};
use marl_core::rng::seeded;
use marl_core::Error;

create_exception!(marl_py, MarlError, PyException);
create_exception!(marl_py, CheckpointError, MarlError);
create_exception!(marl_py, NumericError, MarlError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(m) => PyValueError::new_err(m),
        Error::Format(f) => CheckpointError::new_err(f.to_string()),
        Error::Numeric(m) => NumericError::new_err(m),
        other => MarlError::new_err(other.to_string()),
    }
}

/// Converts any serializable value into plain Python objects.
fn to_object<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| MarlError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse_kind(kind: &str) -> PyResult<EnvKind> {
    kind.parse().map_err(to_py)
}

/// A particle world. Observations are lists of floats, one per agent.
#[pyclass(module = "marl_py")]
struct Env {
    config: EnvConfig,
    catalog: Vec<Scenario>,
    world: World,
}

#[pymethods]
impl Env {
    #[new]
    #[pyo3(signature = (kind="coop_nav", scenario=0, seed=0, cooperators=None, landmarks=None, horizon=None))]
    fn new(
        kind: &str,
        scenario: usize,
        seed: u64,
        cooperators: Option<usize>,
        landmarks: Option<usize>,
        horizon: Option<usize>,
    ) -> PyResult<Self> {
        let kind = parse_kind(kind)?;
        let mut config = EnvConfig::for_kind(kind);
        config.cooperators = cooperators.unwrap_or(config.cooperators);
        config.landmarks = landmarks.unwrap_or(config.landmarks);
        config.horizon = horizon.unwrap_or(config.horizon);
        let catalog = catalog_for(kind);
        let chosen = catalog
            .get(scenario)
            .ok_or_else(|| PyValueError::new_err(format!("scenario {scenario} outside 0..{}", catalog.len())))?;
        let world = World::reset(&config, chosen, &mut seeded(seed, 0)).map_err(to_py)?;
        Ok(Env { config, catalog, world })
    }

    /// Starts a new episode; returns the initial observations.
    #[pyo3(signature = (seed, scenario=None))]
    fn reset(&mut self, seed: u64, scenario: Option<usize>) -> PyResult<Vec<Vec<f64>>> {
        let id = scenario.unwrap_or(self.world.scenario.id);
        let chosen = self.catalog.get(id).ok_or_else(|| PyValueError::new_err(format!("unknown scenario {id}")))?;
        self.world = World::reset(&self.config, chosen, &mut seeded(seed, 0)).map_err(to_py)?;
        Ok(self.world.observe_all())
    }

    /// Advances one step; returns `(observations, rewards, done)`.
    fn step(&mut self, actions: Vec<[f64; 2]>) -> PyResult<(Vec<Vec<f64>>, Vec<f64>, bool)> {
        let out = self.world.step(&actions).map_err(to_py)?;
        Ok((out.observations, out.rewards, out.done))
    }

    fn observe(&self) -> Vec<Vec<f64>> {
        self.world.observe_all()
    }

    fn positions(&self) -> Vec<[f64; 2]> {
        self.world.entities.iter().map(|e| e.pos).collect()
    }

    fn velocities(&self) -> Vec<[f64; 2]> {
        self.world.entities.iter().map(|e| e.vel).collect()
    }

    fn kinetic_energy(&self) -> f64 {
        self.world.kinetic_energy()
    }

    #[getter]
    fn num_agents(&self) -> usize {
        self.config.num_agents()
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.config.obs_dim()
    }

    #[getter]
    fn t(&self) -> usize {
        self.world.t
    }

    #[getter]
    fn done(&self) -> bool {
        self.world.is_done()
    }

    #[getter]
    fn scenario(&self) -> usize {
        self.world.scenario.id
    }

    fn __repr__(&self) -> String {
        format!("Env(kind='{}', scenario={}, t={})", self.config.kind, self.world.scenario.id, self.world.t)
    }
}

/// A trained (or freshly initialized) set of learners.
#[pyclass(module = "marl_py")]
struct Model {
    inner: harness::Model,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Model { inner: load_checkpoint(&path).map_err(to_py)?.model })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Model { inner: decode_checkpoint(data).map_err(to_py)?.model })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&path, &encode_checkpoint(&self.inner, None)).map_err(to_py)
    }

    fn to_bytes(&self) -> Vec<u8> {
        encode_checkpoint(&self.inner, None)
    }

    /// Noiseless evaluation; returns the report as a dict.
    #[pyo3(signature = (episodes=100, seed=0))]
    fn evaluate(&self, py: Python<'_>, episodes: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let model = &self.inner;
        let (report, _) = py.detach(|| harness::evaluate(model, episodes, seed, false)).map_err(to_py)?;
        to_object(py, &report)
    }

    /// Round-robin against `other` with role swapping in mixed worlds.
    #[pyo3(signature = (other, episodes=100, seed=0))]
    fn cross_play(&self, py: Python<'_>, other: &Model, episodes: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let (a, b) = (&self.inner, &other.inner);
        let report = py.detach(|| harness::cross_play(a, b, episodes, seed)).map_err(to_py)?;
        to_object(py, &report)
    }

    /// The configuration as TOML text.
    fn config(&self) -> String {
        self.inner.config.to_toml_string()
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.method().name().to_string()
    }

    #[getter]
    fn episode(&self) -> usize {
        self.inner.episode
    }

    #[getter]
    fn num_agents(&self) -> usize {
        self.inner.num_agents()
    }

    fn __repr__(&self) -> String {
        format!("Model(method='{}', env='{}', episode={})", self.inner.method(), self.inner.config.env.kind, self.inner.episode)
    }
}

/// Trains from a TOML config (or defaults) with keyword overrides.
/// Returns `(model, metrics)` where metrics is a list of per-agent rows.
#[pyfunction]
#[pyo3(signature = (config=None, method=None, env=None, episodes=None, seed=None))]
fn train(
    py: Python<'_>,
    config: Option<&str>,
    method: Option<&str>,
    env: Option<&str>,
    episodes: Option<usize>,
    seed: Option<u64>,
) -> PyResult<(Model, Py<PyAny>)> {
    let mut cfg = match config {
        Some(text) => TrainerConfig::from_toml_str(text).map_err(to_py)?,
        None => TrainerConfig::default(),
    };
    if let Some(kind) = env {
        let kind = parse_kind(kind)?;
        if kind != cfg.env.kind {
            cfg.env = EnvConfig::for_kind(kind);
            cfg.scenarios = None;
        }
    }
    if let Some(m) = method {
        cfg.method = m.parse::<Method>().map_err(to_py)?;
    }
    cfg.episodes = episodes.unwrap_or(cfg.episodes);
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.validate().map_err(to_py)?;
    let (model, rows) = py.detach(|| harness::train(&cfg)).map_err(to_py)?;
    Ok((Model { inner: model }, to_object(py, &rows)?))
}

/// The three built-in scenarios of an environment, as dicts.
#[pyfunction]
fn scenario_catalog(py: Python<'_>, kind: &str) -> PyResult<Py<PyAny>> {
    to_object(py, &catalog_for(parse_kind(kind)?))
}

#[pyfunction]
fn normalize_scores(raw: Vec<f64>) -> PyResult<Vec<f64>> {
    harness::normalize_scores(&raw).map_err(to_py)
}

#[pyfunction]
fn discounted_return(rewards: Vec<f64>, gamma: f64) -> f64 {
    harness::discounted_return(&rewards, gamma)
}

/// Default training configuration as TOML text.
#[pyfunction]
fn default_config() -> String {
    let mut cfg = TrainerConfig::default();
    cfg.scenarios = Some(cfg.catalog());
    cfg.to_toml_string()
}

#[pymodule]
fn marl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Env>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_catalog, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_scores, m)?)?;
    m.add_function(wrap_pyfunction!(discounted_return, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add("MarlError", m.py().get_type::<MarlError>())?;
    m.add("CheckpointError", m.py().get_type::<CheckpointError>())?;
    m.add("NumericError", m.py().get_type::<NumericError>())?;
    Ok(())
}
