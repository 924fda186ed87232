//! Python bindings. Images and latents cross the boundary as flat lists of
//! floats; factor tuples as six integers `(shape, scale, x, y, hue, bg)`.

use std::fs::File;
use std::io::BufReader;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use flowfactor::data::{self, Factors, LatentCodec, LatentLayout, ToyDataset, NUM_FACTORS};
use flowfactor::metrics::{self as fm, MetricsConfig, Representation};
use flowfactor::model::{FlowState, ModelConfig, ModelParams};
use flowfactor::odeint::{self, OdeError, SolverKind, SolverSpec};
use flowfactor::rng::{self, Rng};
use flowfactor::tensor::{Primitive, Tape, Tensor};
use flowfactor::training;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Tensor", module = "flowfactor_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyTensor {
    inner: Tensor,
}

fn primitive(name: &str) -> PyResult<Primitive> {
    Ok(match name {
        "matmul" => Primitive::MatMul,
        "bmm" => Primitive::BatchMatMul,
        "add" => Primitive::Add,
        "sub" => Primitive::Sub,
        "mul" => Primitive::Mul,
        "div" => Primitive::Div,
        "relu" => Primitive::Relu,
        "tanh" => Primitive::Tanh,
        "exp" => Primitive::Exp,
        "log" => Primitive::Log,
        "softmax" => Primitive::SoftmaxRows,
        "sum" => Primitive::Sum,
        "mean" => Primitive::Mean,
        "square" => Primitive::Square,
        "sqrt" => Primitive::Sqrt,
        "transpose" => Primitive::Transpose,
        "bias_add" => Primitive::BiasAdd,
        "dot" => Primitive::Dot,
        other => return Err(PyValueError::new_err(format!("unknown primitive {other:?}"))),
    })
}

#[pymethods]
impl PyTensor {
    #[new]
    fn new(shape: Vec<usize>, data: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: Tensor::new(shape, data).map_err(value_err)?,
        })
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    /// Row-major values.
    fn tolist(&self) -> Vec<f64> {
        self.inner.to_vec()
    }

    /// Forward value of the named primitive applied to `(self, *others)`.
    #[pyo3(signature = (op, *others))]
    fn apply(&self, op: &str, others: Vec<PyTensor>) -> PyResult<PyTensor> {
        let tape = Tape::new();
        let mut inputs = vec![&self.inner];
        inputs.extend(others.iter().map(|t| &t.inner));
        let out = tape.apply(primitive(op)?, &inputs).map_err(value_err)?;
        Ok(PyTensor { inner: out.detach() })
    }

    fn __repr__(&self) -> String {
        format!("Tensor(shape={:?})", self.inner.shape())
    }
}

/// Gradients of `<op(*inputs), cotangent>` with respect to every input.
#[pyfunction]
fn vjp(op: &str, inputs: Vec<PyTensor>, cotangent: PyTensor) -> PyResult<Vec<PyTensor>> {
    let tape = Tape::new();
    let leaves: Vec<Tensor> = inputs.iter().map(|t| tape.param(&t.inner)).collect();
    let refs: Vec<&Tensor> = leaves.iter().collect();
    let y = tape.apply(primitive(op)?, &refs).map_err(value_err)?;
    let loss = tape.dot(&y, &cotangent.inner).map_err(value_err)?;
    let grads = tape.backward(&loss).map_err(value_err)?;
    leaves
        .iter()
        .map(|leaf| {
            let g = grads.wrt_or_zero(leaf);
            Ok(PyTensor {
                inner: Tensor::new(leaf.shape().to_vec(), g).map_err(value_err)?,
            })
        })
        .collect()
}

#[pyclass(name = "Rng", module = "flowfactor_py")]
struct PyRng {
    inner: Rng,
}

#[pymethods]
impl PyRng {
    #[new]
    fn new(seed: u64) -> Self {
        Self { inner: Rng::new(seed) }
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn uniform(&mut self) -> f64 {
        self.inner.uniform()
    }

    fn gaussian(&mut self) -> f64 {
        self.inner.gaussian()
    }

    fn below(&mut self, n: usize) -> PyResult<usize> {
        if n == 0 {
            return Err(PyValueError::new_err("n must be positive"));
        }
        Ok(self.inner.below(n))
    }
}

/// One SplitMix64 step: `(next_state, output)`.
#[pyfunction]
fn splitmix64(state: u64) -> (u64, u64) {
    rng::splitmix64(state)
}

fn factors(f: [usize; NUM_FACTORS]) -> PyResult<Factors> {
    Factors::new(f).map_err(value_err)
}

#[pyfunction]
fn render(f: [usize; NUM_FACTORS]) -> PyResult<Vec<f64>> {
    Ok(data::render(&factors(f)?))
}

#[pyfunction]
fn scene_factors(index: usize) -> PyResult<[usize; NUM_FACTORS]> {
    Ok(Factors::from_index(index).map_err(value_err)?.0)
}

/// Reads the six factors back from an image; `ValueError` when no object
/// is visible.
#[pyfunction]
fn extract_attributes(image: Vec<f64>) -> PyResult<[usize; NUM_FACTORS]> {
    Ok(fm::extract_attributes(&image).map_err(value_err)?.0)
}

#[pyfunction]
fn make_bridge(z0: Vec<f64>, z1: Vec<f64>, t: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    training::make_bridge(&z0, &z1, t).map_err(value_err)
}

/// Mean squared cosine similarity over ordered pairs of components.
#[pyfunction]
#[pyo3(signature = (components, eps = 1e-8))]
fn orth_loss(components: Vec<Vec<f64>>, eps: f64) -> PyResult<f64> {
    if components.windows(2).any(|w| w[0].len() != w[1].len()) {
        return Err(PyValueError::new_err("components must share one length"));
    }
    Ok(training::orth_loss_single(&components, eps))
}

fn solver_spec(solver: &str, rtol: f64, atol: f64, steps: usize) -> PyResult<SolverSpec> {
    let kind: SolverKind = solver.parse().map_err(value_err)?;
    let spec = SolverSpec {
        kind,
        rtol,
        atol,
        steps,
        ..SolverSpec::default()
    };
    spec.validate().map_err(value_err)?;
    Ok(spec)
}

/// Integrates `z' = field(t, z)` from `t = 0` to `1`. Returns the final
/// state and the number of field evaluations.
#[pyfunction]
#[pyo3(signature = (field, z0, solver = "dopri5", rtol = 1e-6, atol = 1e-6, steps = 100))]
fn integrate(
    field: Bound<'_, PyAny>,
    z0: Vec<f64>,
    solver: &str,
    rtol: f64,
    atol: f64,
    steps: usize,
) -> PyResult<(Vec<f64>, usize)> {
    let spec = solver_spec(solver, rtol, atol, steps)?;
    let f = |t: f64, z: &[f64]| -> Result<Vec<f64>, OdeError> {
        field
            .call1((t, z.to_vec()))
            .and_then(|v| v.extract::<Vec<f64>>().map_err(PyErr::from))
            .map_err(|e| OdeError::Field(e.to_string()))
    };
    let tr = odeint::integrate(f, &z0, &spec).map_err(value_err)?;
    Ok((tr.last().to_vec(), tr.evaluations))
}

#[pyclass(name = "Codec", module = "flowfactor_py", frozen)]
struct PyCodec {
    inner: LatentCodec,
}

#[pymethods]
impl PyCodec {
    /// Fits the PCA codec on every toy scene (about a minute).
    #[staticmethod]
    #[pyo3(signature = (tokens = 16, channels = 4))]
    fn fit(tokens: usize, channels: usize) -> PyResult<Self> {
        let inner = LatentCodec::fit(&ToyDataset, LatentLayout { tokens, channels }).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let f = File::open(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let inner = LatentCodec::read_from(&mut BufReader::new(f)).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dims(&self) -> usize {
        self.inner.dims()
    }

    fn encode(&self, image: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.encode(&image).map_err(value_err)
    }

    fn decode(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.decode(&z).map_err(value_err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }
}

#[pyclass(name = "Model", module = "flowfactor_py", frozen)]
struct PyModel {
    inner: ModelParams,
}

impl PyModel {
    fn with_net<T>(&self, f: impl FnOnce(&flowfactor::model::Network) -> flowfactor::model::Result<T>) -> PyResult<T> {
        let tape = Tape::new();
        f(&self.inner.frozen(&tape)).map_err(value_err)
    }

    fn flow_state(&self, z: Vec<f64>, t: f64, image: &[f64]) -> PyResult<FlowState> {
        let c = self.inner.config();
        let factors = self.with_net(|n| n.factor_set(image))?;
        Ok(FlowState {
            z: Tensor::matrix(c.tokens, c.channels, z).map_err(value_err)?,
            t,
            factors,
        })
    }
}

#[pymethods]
impl PyModel {
    /// Fresh parameters; keyword arguments override the default
    /// architecture.
    #[new]
    #[pyo3(signature = (seed = 0, **config))]
    fn new(seed: u64, config: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut c = ModelConfig::default();
        if let Some(kw) = config {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                let v: usize = v.extract()?;
                let slot = match key.as_str() {
                    "tokens" => &mut c.tokens,
                    "channels" => &mut c.channels,
                    "factors" => &mut c.factors,
                    "factor_dim" => &mut c.factor_dim,
                    "hidden" => &mut c.hidden,
                    "blocks" => &mut c.blocks,
                    "key_dim" => &mut c.key_dim,
                    "time_dim" => &mut c.time_dim,
                    "encoder_hidden" => &mut c.encoder_hidden,
                    other => return Err(PyValueError::new_err(format!("unknown model option {other:?}"))),
                };
                *slot = v;
            }
        }
        Ok(Self {
            inner: ModelParams::init(c, seed).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let f = File::open(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let inner = ModelParams::read_from(&mut BufReader::new(f)).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        let mut r = data;
        Ok(Self {
            inner: ModelParams::read_from(&mut r).map_err(value_err)?,
        })
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }

    fn parameter_count(&self) -> usize {
        self.inner.count()
    }

    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    /// Factor tokens of one image, `factors × factor_dim` values.
    fn factor_tokens(&self, image: Vec<f64>) -> PyResult<Vec<f64>> {
        self.with_net(|n| n.factor_set(&image)).map(|f| f.tokens.to_vec())
    }

    /// Aggregate velocity of latent `z` at time `t` under `image`'s factors.
    fn velocity(&self, z: Vec<f64>, t: f64, image: Vec<f64>) -> PyResult<Vec<f64>> {
        let state = self.flow_state(z, t, &image)?;
        self.with_net(|n| n.velocity(&state)).map(|(v, _)| v.to_vec())
    }

    /// Routing weights (`tokens × factors`) and the per-factor velocities.
    fn route(&self, z: Vec<f64>, t: f64, image: Vec<f64>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let state = self.flow_state(z, t, &image)?;
        self.with_net(|n| {
            let (v, h) = n.velocity(&state)?;
            let (attn, parts) = n.route(&h, &state.factors, &v)?;
            Ok((attn.to_vec(), parts.iter().map(Tensor::to_vec).collect()))
        })
    }

    /// Decoded image generated under `image`'s factors.
    #[pyo3(signature = (codec, image, seed = 0, solver = "dopri5", rtol = 1e-5, atol = 1e-5, steps = 100))]
    #[allow(clippy::too_many_arguments)]
    fn sample(
        &self,
        codec: &PyCodec,
        image: Vec<f64>,
        seed: u64,
        solver: &str,
        rtol: f64,
        atol: f64,
        steps: usize,
    ) -> PyResult<Vec<f64>> {
        let spec = solver_spec(solver, rtol, atol, steps)?;
        let factors = self.with_net(|n| n.factor_set(&image))?;
        let s = odeint::sample(&self.inner, &factors, &codec.inner, &spec, &mut Rng::new(seed)).map_err(value_err)?;
        Ok(s.image)
    }
}

fn scores<'py>(py: Python<'py>, rep: &Representation, samples: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let cfg = MetricsConfig {
        samples,
        ..MetricsConfig::default()
    };
    let r = fm::evaluate(rep, &cfg, seed).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("factorvae_score", r.factorvae_score)?;
    d.set_item("dci_disentanglement", r.dci_disentanglement)?;
    d.set_item("mig", r.mig)?;
    Ok(d)
}

/// FactorVAE, DCI and MIG for a representation given as one row per toy
/// scene in index order.
#[pyfunction]
#[pyo3(signature = (rows, seed = 0, samples = 10_000))]
fn evaluate<'py>(py: Python<'py>, rows: Vec<Vec<f64>>, seed: u64, samples: usize) -> PyResult<Bound<'py, PyDict>> {
    if rows.len() != data::NUM_SCENES {
        return Err(PyValueError::new_err(format!(
            "expected {} rows, got {}",
            data::NUM_SCENES,
            rows.len()
        )));
    }
    let dims = rows[0].len();
    if rows.iter().any(|r| r.len() != dims) {
        return Err(PyValueError::new_err("rows must share one length"));
    }
    let rep = Representation::new(dims, rows.into_iter().flatten().collect());
    scores(py, &rep, samples, seed)
}

/// Scores of the planted ground-truth representation.
#[pyfunction]
#[pyo3(signature = (seed = 0, samples = 10_000))]
fn evaluate_planted(py: Python<'_>, seed: u64, samples: usize) -> PyResult<Bound<'_, PyDict>> {
    scores(py, &Representation::planted(), samples, seed)
}

#[pymodule]
fn flowfactor_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyRng>()?;
    m.add_class::<PyCodec>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(vjp, m)?)?;
    m.add_function(wrap_pyfunction!(splitmix64, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(scene_factors, m)?)?;
    m.add_function(wrap_pyfunction!(extract_attributes, m)?)?;
    m.add_function(wrap_pyfunction!(make_bridge, m)?)?;
    m.add_function(wrap_pyfunction!(orth_loss, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_planted, m)?)?;
    m.add("NUM_SCENES", data::NUM_SCENES)?;
    m.add("FACTOR_NAMES", data::FACTOR_NAMES.to_vec())?;
    Ok(())
}
