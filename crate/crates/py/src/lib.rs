//! Python bindings: data generation, model training, CATE prediction and sweeps.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tnw_cate::bench::{self, ExperimentSpec, Metric, ModelId, SweepOutput, SweepSpec, TrainedModel};
use tnw_cate::datagen::{self, Family, GeneratorSpec, Group};
use tnw_cate::nn::Matrix;
use tnw_cate::tnw::{self as tnw_core, SubsetSize, TnwConfig};

fn err(e: tnw_cate::Error) -> PyErr {
    match e {
        tnw_cate::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = tnw_cate::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("feature matrix is empty"));
    }
    Matrix::from_rows(rows).map_err(err)
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

/// Rows of one group: features, outcomes and, for generated data, the latent `t`.
#[pyclass(name = "Dataset", module = "tnw_cate_py")]
struct PyDataset {
    inner: datagen::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (features, outcomes, group))]
    fn new(features: Vec<Vec<f64>>, outcomes: Vec<f64>, group: &str) -> PyResult<Self> {
        let inner = datagen::Dataset::single_group(matrix(&features)?, outcomes, parse(group)?).map_err(err)?;
        Ok(PyDataset { inner })
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        rows_of(self.inner.features())
    }

    #[getter]
    fn outcomes(&self) -> Vec<f64> {
        self.inner.outcomes().to_vec()
    }

    #[getter]
    fn latent_t(&self) -> Option<Vec<f64>> {
        self.inner.latent_t().map(<[f64]>::to_vec)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(rows={}, dim={})", self.inner.len(), self.inner.dim())
    }
}

/// Training, validation and test data of one replication.
#[pyclass(name = "Split", module = "tnw_cate_py")]
struct PySplit {
    generator: GeneratorSpec,
    inner: datagen::Split,
}

#[pymethods]
impl PySplit {
    #[getter]
    fn train_control(&self) -> PyDataset {
        PyDataset {
            inner: self.inner.train.control.clone(),
        }
    }

    #[getter]
    fn train_treatment(&self) -> PyDataset {
        PyDataset {
            inner: self.inner.train.treatment.clone(),
        }
    }

    #[getter]
    fn validation_control(&self) -> PyDataset {
        PyDataset {
            inner: self.inner.validation.control.clone(),
        }
    }

    #[getter]
    fn validation_treatment(&self) -> PyDataset {
        PyDataset {
            inner: self.inner.validation.treatment.clone(),
        }
    }

    #[getter]
    fn test_features(&self) -> Vec<Vec<f64>> {
        rows_of(&self.inner.test.features)
    }

    #[getter]
    fn test_cate(&self) -> Vec<f64> {
        self.inner.test.true_cate.clone()
    }

    #[getter]
    fn test_g0(&self) -> Vec<f64> {
        self.inner.test.g0.clone()
    }

    #[getter]
    fn test_g1(&self) -> Vec<f64> {
        self.inner.test.g1.clone()
    }

    /// Writes generator.json, train.csv, validation.csv and test.csv.
    fn save(&self, dir: PathBuf) -> PyResult<()> {
        datagen::write_split_dir(&dir, &self.generator, &self.inner).map_err(err)
    }
}

/// A synthetic family with its parameters drawn from `seed`.
#[pyclass(name = "Generator", module = "tnw_cate_py")]
struct PyGenerator {
    inner: GeneratorSpec,
}

#[pymethods]
impl PyGenerator {
    #[new]
    #[pyo3(signature = (family, d = 10, noise_std = 0.0, seed = 0))]
    fn new(family: &str, d: usize, noise_std: f64, seed: u64) -> PyResult<Self> {
        let family: Family = parse(family)?;
        Ok(PyGenerator {
            inner: GeneratorSpec::sample(family, d, noise_std, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let path = if path.is_dir() {
            path.join(datagen::GENERATOR_FILE)
        } else {
            path
        };
        Ok(PyGenerator {
            inner: datagen::read_generator(&path).map_err(err)?,
        })
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family.as_str()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[pyo3(signature = (controls, ratio = 0.1, val_fraction = 0.2, test_points = datagen::TEST_POINTS))]
    fn split(&self, controls: usize, ratio: f64, val_fraction: f64, test_points: usize) -> PyResult<PySplit> {
        let inner = datagen::make_split_with(&self.inner, controls, ratio, val_fraction, test_points).map_err(err)?;
        Ok(PySplit {
            generator: self.inner.clone(),
            inner,
        })
    }

    /// Draws `count` rows of one group from the given stream.
    #[pyo3(signature = (count, group, stream = 0))]
    fn sample(&self, count: usize, group: &str, stream: u64) -> PyResult<PyDataset> {
        let inner = self.inner.generate(count, parse(group)?, stream).map_err(err)?;
        Ok(PyDataset { inner })
    }

    /// Noise-free effect at `x`; spiral, logarithmic and power need the latent `t`.
    #[pyo3(signature = (x, t = None))]
    fn true_cate(&self, x: Vec<f64>, t: Option<f64>) -> PyResult<f64> {
        datagen::true_cate(&self.inner.oracle(), &x, t).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Generator(family={:?}, d={}, seed={})",
            self.inner.family.as_str(),
            self.inner.d,
            self.inner.seed
        )
    }
}

/// A fitted estimator: TNW or one of the meta-learners.
#[pyclass(name = "Model", module = "tnw_cate_py")]
struct PyModel {
    inner: TrainedModel,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn name(&self) -> &'static str {
        self.inner.model().as_str()
    }

    fn cate(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        features.iter().map(|x| self.inner.cate(x).map_err(err)).collect()
    }

    fn predict(&self, group: &str, features: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let group: Group = parse(group)?;
        features
            .iter()
            .map(|x| self.inner.predict_response(group, x).map_err(err))
            .collect()
    }

    /// Attention weights of a TNW model over the stored rows of `group`.
    fn weights(&self, group: &str, x: Vec<f64>) -> PyResult<Vec<f64>> {
        match &self.inner {
            TrainedModel::Tnw(m) => m.weights(parse(group)?, &x).map_err(err),
            TrainedModel::Meta { .. } => Err(PyValueError::new_err("only TNW models have attention weights")),
        }
    }

    /// Test-set MSEs against the split's noise-free responses.
    fn evaluate<'py>(&self, py: Python<'py>, split: &PySplit) -> PyResult<Bound<'py, PyDict>> {
        let m = self.inner.evaluate(&split.inner.test).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("cate_mse", m.cate_mse)?;
        d.set_item("control_mse", m.control_mse)?;
        d.set_item("treatment_mse", m.treatment_mse)?;
        Ok(d)
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.save_dir(&dir).map_err(err)
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: TrainedModel::load_dir(&dir).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Model({})", self.inner.model())
    }
}

fn experiment_from(config: Option<&str>) -> PyResult<ExperimentSpec> {
    match config {
        Some(text) => Ok(SweepSpec::from_toml_str(text).map_err(err)?.experiment),
        None => Ok(ExperimentSpec::default()),
    }
}

/// Fits `model` on a split. Baselines choose hyperparameters on the
/// validation part; `config` is TOML in the sweep config format.
#[pyfunction]
#[pyo3(signature = (model, split, config = None, seed = 0))]
fn train(py: Python<'_>, model: &str, split: &PySplit, config: Option<&str>, seed: u64) -> PyResult<PyModel> {
    let model: ModelId = parse(model)?;
    let mut spec = experiment_from(config)?;
    spec.family = split.generator.family;
    spec.d = split.generator.d;
    let data = &split.inner;
    let inner = py
        .detach(|| bench::train_model(model, &spec, &data.train, &data.validation, seed))
        .map_err(err)?;
    Ok(PyModel { inner })
}

fn subset_size(v: f64) -> SubsetSize {
    if v >= 1.0 && v.fract() == 0.0 {
        SubsetSize::Count(v as usize)
    } else {
        SubsetSize::Fraction(v)
    }
}

/// Trains TNW directly on two groups and returns the model with its
/// per-epoch loss. `n` and `m` accept a count or a fraction.
#[pyfunction]
#[pyo3(signature = (control, treatment, epochs = None, n = None, m = None, alpha = None, seed = 0, hidden = None))]
#[allow(clippy::too_many_arguments)]
fn train_tnw(
    py: Python<'_>,
    control: &PyDataset,
    treatment: &PyDataset,
    epochs: Option<usize>,
    n: Option<f64>,
    m: Option<f64>,
    alpha: Option<f64>,
    seed: u64,
    hidden: Option<Vec<usize>>,
) -> PyResult<(PyModel, Vec<f64>)> {
    let mut cfg = TnwConfig {
        alpha,
        seed,
        ..TnwConfig::default()
    };
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    if let Some(v) = n {
        cfg.n = subset_size(v);
    }
    if let Some(v) = m {
        cfg.m = subset_size(v);
    }
    if let Some(h) = hidden {
        cfg.hidden = h;
    }
    let (c, t) = (&control.inner, &treatment.inner);
    let (model, report) = py.detach(|| tnw_core::train_tnw(c, t, &cfg)).map_err(err)?;
    Ok((
        PyModel {
            inner: TrainedModel::Tnw(model),
        },
        report.loss_history,
    ))
}

/// Output of a sweep: per-replication rows, a summary and rendered tables.
#[pyclass(name = "SweepResult", module = "tnw_cate_py")]
struct PySweepResult {
    inner: SweepOutput,
}

#[pymethods]
impl PySweepResult {
    #[getter]
    fn results_csv(&self) -> String {
        self.inner.results_csv()
    }

    #[getter]
    fn summary_csv(&self) -> String {
        self.inner.summary_csv()
    }

    /// Summary rows as dictionaries.
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .summary
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("model", r.model.as_str())?;
                d.set_item("family", r.family.as_str())?;
                d.set_item("axis", r.axis.as_str())?;
                d.set_item("value", r.value)?;
                d.set_item("replications", r.replications)?;
                d.set_item("failed", r.failed)?;
                d.set_item("cate_mse", r.cate_mse)?;
                d.set_item("control_mse", r.control_mse)?;
                d.set_item("treatment_mse", r.treatment_mse)?;
                Ok(d)
            })
            .collect()
    }

    #[pyo3(signature = (metric = "cate", reference = false))]
    fn table(&self, metric: &str, reference: bool) -> PyResult<String> {
        let metric: Metric = parse(metric)?;
        Ok(bench::emit_table(&self.inner.summary, metric, reference).to_text())
    }

    fn write(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.write_dir(&dir).map_err(err)
    }
}

/// Runs a sweep described by TOML text in the config file format.
#[pyfunction]
fn sweep(py: Python<'_>, config: &str) -> PyResult<PySweepResult> {
    let spec = SweepSpec::from_toml_str(config).map_err(err)?;
    let inner = py.detach(|| bench::sweep(&spec)).map_err(err)?;
    Ok(PySweepResult { inner })
}

/// Published CATE MSE for a family and model, if there is one.
#[pyfunction]
fn reference_value(family: &str, model: &str) -> PyResult<Option<f64>> {
    Ok(bench::reference_value(parse(family)?, parse(model)?))
}

#[pymodule]
fn tnw_cate_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PySplit>()?;
    m.add_class::<PyGenerator>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PySweepResult>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(train_tnw, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(reference_value, m)?)?;
    m.add("MODELS", ModelId::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>())?;
    Ok(())
}
