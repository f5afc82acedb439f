//! Python bindings: run configuration, datasets, assembly, discovery and
//! reporting, plus direct access to the feature library.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use hyperlaw::assembly::assemble;
use hyperlaw::cli::{analyze as analyze_samples, discover as discover_posterior, generate_dataset, RunConfig};
use hyperlaw::features::{FeatureLibrary, N_FEATURES};
use hyperlaw::forward::{Dataset, MaterialName};
use hyperlaw::kinematics::Tensor3;
use hyperlaw::sampler::PosteriorSamples;

create_exception!(hyperlaw, HyperlawError, PyException);

fn to_py(e: hyperlaw::Error) -> PyErr {
    match e {
        hyperlaw::Error::Config(m) => PyValueError::new_err(m),
        other => HyperlawError::new_err(other.to_string()),
    }
}

fn tensor(rows: Vec<Vec<f64>>) -> PyResult<Tensor3> {
    if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
        return Err(PyValueError::new_err("deformation gradient must be 3x3"));
    }
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| rows[i][j])))
}

fn nested(t: &Tensor3) -> Vec<Vec<f64>> {
    t.iter().map(|r| r.to_vec()).collect()
}

/// Names accepted wherever a benchmark material is expected.
#[pyfunction]
fn material_names() -> Vec<String> {
    MaterialName::ALL.iter().map(|m| m.to_string()).collect()
}

/// The 26-feature strain-energy library, optionally with suppressed features
/// (1-based indices).
#[pyclass(name = "FeatureLibrary", module = "hyperlaw", frozen)]
struct PyFeatureLibrary(FeatureLibrary);

#[pymethods]
impl PyFeatureLibrary {
    #[new]
    #[pyo3(signature = (suppress=None))]
    fn new(suppress: Option<Vec<usize>>) -> PyResult<Self> {
        let lib = FeatureLibrary::default()
            .with_suppressed(&suppress.unwrap_or_default())
            .map_err(to_py)?;
        Ok(Self(lib))
    }

    #[getter]
    fn n_features(&self) -> usize {
        N_FEATURES
    }

    fn labels(&self) -> Vec<String> {
        self.0.labels()
    }

    /// Feature values at a 3x3 deformation gradient.
    fn evaluate(&self, f: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        Ok(self.0.evaluate_at(&tensor(f)?).map_err(to_py)?.to_vec())
    }

    /// One 3x3 derivative per feature.
    fn gradient(&self, f: Vec<Vec<f64>>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        Ok(self.0.gradient(&tensor(f)?).map_err(to_py)?.iter().map(nested).collect())
    }

    /// Strain energy of the coefficient vector `theta`.
    fn energy(&self, f: Vec<Vec<f64>>, theta: Vec<f64>) -> PyResult<f64> {
        self.0.energy(&tensor(f)?, &theta).map_err(to_py)
    }
}

/// Complete run configuration; every field has a default.
#[pyclass(name = "RunConfig", module = "hyperlaw")]
struct PyRunConfig(RunConfig);

#[pymethods]
impl PyRunConfig {
    /// Builds the defaults, overridden by an optional JSON document.
    #[new]
    #[pyo3(signature = (json=None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let cfg = match json {
            Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
            None => RunConfig::default(),
        };
        cfg.validate().map_err(to_py)?;
        Ok(Self(cfg))
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(to_py)
    }

    #[getter]
    fn material(&self) -> String {
        self.0.material.to_string()
    }
    #[setter]
    fn set_material(&mut self, name: &str) -> PyResult<()> {
        self.0.material = name.parse().map_err(to_py)?;
        Ok(())
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }
    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.0.seed = seed;
    }

    #[getter]
    fn sigma_u(&self) -> f64 {
        self.0.noise.sigma_u
    }
    #[setter]
    fn set_sigma_u(&mut self, sigma_u: f64) {
        self.0.noise.sigma_u = sigma_u;
    }

    #[getter]
    fn denoise(&self) -> bool {
        self.0.noise.denoise
    }
    #[setter]
    fn set_denoise(&mut self, denoise: bool) {
        self.0.noise.denoise = denoise;
    }

    #[getter]
    fn suppress(&self) -> Vec<usize> {
        self.0.suppress.clone()
    }
    #[setter]
    fn set_suppress(&mut self, features: Vec<usize>) {
        self.0.suppress = features;
    }

    /// `(n_burn, n_g, n_chains)`.
    #[getter]
    fn chains(&self) -> (usize, usize, usize) {
        let c = self.0.chains;
        (c.n_burn, c.n_g, c.n_chains)
    }
    #[setter]
    fn set_chains(&mut self, lengths: (usize, usize, usize)) {
        (self.0.chains.n_burn, self.0.chains.n_g, self.0.chains.n_chains) = lengths;
    }

    #[getter]
    fn out(&self) -> PathBuf {
        self.0.out.clone()
    }
    #[setter]
    fn set_out(&mut self, out: PathBuf) {
        self.0.out = out;
    }
}

/// Mesh, displacement snapshots and provenance manifest.
#[pyclass(name = "Dataset", module = "hyperlaw", frozen)]
struct PyDataset(Dataset);

#[pymethods]
impl PyDataset {
    /// Synthetic data for the configured material, loading and noise.
    #[staticmethod]
    fn generate(py: Python<'_>, config: &PyRunConfig) -> PyResult<Self> {
        let cfg = config.0.clone();
        py.detach(|| generate_dataset(&cfg)).map(Self).map_err(to_py)
    }

    /// Reads a dataset directory; the manifest must be present.
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let (mesh, snapshots, manifest) = Dataset::read(&path).map_err(to_py)?;
        let manifest = manifest.ok_or_else(|| HyperlawError::new_err(format!("{} has no manifest", path.display())))?;
        Ok(Self(Dataset { mesh, snapshots, manifest }))
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        self.0.write(&path).map_err(to_py)
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.0.mesh.n_nodes()
    }

    #[getter]
    fn n_snapshots(&self) -> usize {
        self.0.snapshots.len()
    }

    #[getter]
    fn material(&self) -> Option<String> {
        self.0.manifest.material.map(|m| m.to_string())
    }

    #[getter]
    fn theta_true(&self) -> Option<Vec<f64>> {
        self.0.manifest.theta_true.clone()
    }

    fn nodes(&self) -> Vec<[f64; 2]> {
        self.0.mesh.nodes().to_vec()
    }

    fn displacements(&self, snapshot: usize) -> PyResult<Vec<[f64; 2]>> {
        self.0
            .snapshots
            .get(snapshot)
            .map(|s| s.displacements.clone())
            .ok_or_else(|| PyValueError::new_err(format!("snapshot {snapshot} out of range")))
    }

    fn reactions(&self, snapshot: usize) -> PyResult<Vec<f64>> {
        self.0
            .snapshots
            .get(snapshot)
            .map(|s| s.reactions.clone())
            .ok_or_else(|| PyValueError::new_err(format!("snapshot {snapshot} out of range")))
    }
}

/// The weak-form system `A θ ≈ b`.
#[pyclass(name = "LinearSystem", module = "hyperlaw", frozen)]
struct PyLinearSystem(hyperlaw::assembly::LinearSystem);

#[pymethods]
impl PyLinearSystem {
    #[staticmethod]
    fn assemble(dataset: &PyDataset, config: &PyRunConfig) -> PyResult<Self> {
        let lib = config.0.library().map_err(to_py)?;
        let ds = &dataset.0;
        assemble(&ds.mesh, &ds.snapshots, &lib, &config.0.assembly_spec())
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.0.n_rows()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.0.n_features()
    }

    /// Row-major copy of `A`.
    fn matrix(&self) -> Vec<Vec<f64>> {
        self.0.a.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    fn rhs(&self) -> Vec<f64> {
        self.0.b.iter().copied().collect()
    }

    fn residual(&self, theta: Vec<f64>) -> PyResult<Vec<f64>> {
        if theta.len() != self.0.n_features() {
            return Err(PyValueError::new_err(format!("theta needs {} entries", self.0.n_features())));
        }
        Ok(self.0.residual(&theta).iter().copied().collect())
    }
}

/// Recorded Gibbs states after burn-in, all chains concatenated.
#[pyclass(name = "Posterior", module = "hyperlaw", frozen)]
struct PyPosterior(PosteriorSamples);

#[pymethods]
impl PyPosterior {
    /// Assembles the dataset and samples the posterior.
    #[staticmethod]
    fn discover(py: Python<'_>, dataset: &PyDataset, config: &PyRunConfig) -> PyResult<Self> {
        let cfg = config.0.clone();
        let ds = &dataset.0;
        py.detach(|| discover_posterior(&cfg, &ds.mesh, &ds.snapshots))
            .map(|d| Self(d.samples))
            .map_err(to_py)
    }

    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        PosteriorSamples::read_csv(&path).map(Self).map_err(to_py)
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.0.write_csv(&path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn n_chains(&self) -> usize {
        self.0.n_chains()
    }

    fn theta(&self) -> Vec<Vec<f64>> {
        self.0.states().iter().map(|s| s.theta.clone()).collect()
    }

    fn z(&self) -> Vec<Vec<bool>> {
        self.0.states().iter().map(|s| s.z.clone()).collect()
    }

    fn sigma2(&self) -> Vec<f64> {
        self.0.states().iter().map(|s| s.sigma2).collect()
    }

    /// Fraction of states in which each feature is active.
    fn z_avg(&self) -> PyResult<Vec<f64>> {
        hyperlaw::analysis::average_activity(&self.0).map(|a| a.z_avg).map_err(to_py)
    }

    /// `(active features, frequency)` per distinct activity pattern, most
    /// frequent first.
    fn modes(&self) -> PyResult<Vec<(Vec<usize>, f64)>> {
        let activity = hyperlaw::analysis::average_activity(&self.0).map_err(to_py)?;
        Ok(activity.modes.into_iter().map(|m| (m.active, m.frequency)).collect())
    }
}

/// Writes the report (JSON, CSV envelopes, SVG figures) to `out` and returns
/// the report as JSON. Ground-truth overlays come from `dataset` when given.
#[pyfunction]
#[pyo3(signature = (posterior, out, dataset=None))]
fn analyze(posterior: &PyPosterior, out: PathBuf, dataset: Option<&PyDataset>) -> PyResult<String> {
    let manifest = dataset.map(|d| &d.0.manifest);
    let (report, _) = analyze_samples(&posterior.0, manifest, &out).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| HyperlawError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "hyperlaw")]
fn hyperlaw_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HyperlawError", m.py().get_type::<HyperlawError>())?;
    m.add_function(wrap_pyfunction!(material_names, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_class::<PyFeatureLibrary>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyLinearSystem>()?;
    m.add_class::<PyPosterior>()?;
    Ok(())
}
