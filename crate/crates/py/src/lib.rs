//! Python bindings. Node labels are 1-based on the Python side.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use maxlin_core::asymptotics::build_wm;
use maxlin_core::dag::{ten_node_dag, Dag};
use maxlin_core::identification::{recover_a2 as core_recover_a2, ScalingVector, TransformMatrix};
use maxlin_core::io::Samples;
use maxlin_core::learning::ReorderConfig;
use maxlin_core::model::{draw_model, scaling_of_max, simulate, standardize, MlMatrix, SampleMatrix};
use maxlin_core::pipeline::{
    cmd_learn, cmd_learn_exact, Estimate, LearnOptions, OrderAlgorithm, Transforms,
};
use maxlin_core::spectral::{default_k as core_default_k, estimate_scaling_subset};
use maxlin_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Csv(_) => PyIOError::new_err(e.to_string()),
        Error::Threshold { .. } | Error::NoInitialNode(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn zero_based(h: &[usize]) -> PyResult<Vec<usize>> {
    h.iter()
        .map(|&i| {
            i.checked_sub(1)
                .ok_or_else(|| PyValueError::new_err("node labels start at 1"))
        })
        .collect()
}

fn samples_from(x: &[Vec<f64>]) -> PyResult<SampleMatrix> {
    let cols = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows must have equal length"));
    }
    SampleMatrix::new_signed(x.len(), cols, x.concat()).map_err(to_py)
}

fn rows_of(s: &SampleMatrix) -> Vec<Vec<f64>> {
    (0..s.nrows()).map(|l| s.row(l).to_vec()).collect()
}

fn order_algorithm(name: &str) -> PyResult<OrderAlgorithm> {
    match name {
        "argmax" => Ok(OrderAlgorithm::Argmax),
        "threshold" => Ok(OrderAlgorithm::Threshold),
        _ => Err(PyValueError::new_err(format!("unknown algorithm {name:?}"))),
    }
}

fn estimate_dict<'py>(py: Python<'py>, e: &Estimate) -> PyResult<Bound<'py, PyDict>> {
    let d = e.a_hat.nrows();
    let out = PyDict::new(py);
    out.set_item("valid", e.learn.valid)?;
    out.set_item("discovery", e.learn.discovery.iter().map(|v| v + 1).collect::<Vec<_>>())?;
    out.set_item(
        "order",
        e.learn.order.as_ref().map(|o| o.as_slice().iter().map(|v| v + 1).collect::<Vec<_>>()),
    )?;
    out.set_item("generations", e.learn.generations.as_ref().map(|g| g.to_labels()))?;
    let a_hat: Vec<Vec<f64>> = (0..d)
        .map(|i| e.a_hat.row(i).iter().copied().collect())
        .collect();
    out.set_item("a_hat", a_hat)?;
    out.set_item("row_scalings", e.row_scalings())?;
    Ok(out)
}

/// Recursive max-linear model given by its coefficient matrix.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: MlMatrix,
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyModel {
            inner: MlMatrix::from_rows(&rows).map_err(to_py)?,
        })
    }

    /// Standardized model on the built-in ten-node graph with drawn weights.
    #[staticmethod]
    fn ten_node(seed: u64) -> PyResult<Self> {
        Ok(PyModel {
            inner: draw_model(&ten_node_dag(), seed).map_err(to_py)?,
        })
    }

    /// Standardized model on a DAG given as `(parent, child)` pairs.
    #[staticmethod]
    fn from_dag(nodes: usize, edges: Vec<(usize, usize)>, seed: u64) -> PyResult<Self> {
        let edges = edges
            .iter()
            .map(|&(j, i)| Ok((zero_based(&[j])?[0], zero_based(&[i])?[0])))
            .collect::<PyResult<Vec<_>>>()?;
        let dag = Dag::new(nodes, &edges).map_err(to_py)?;
        Ok(PyModel {
            inner: draw_model(&dag, seed).map_err(to_py)?,
        })
    }

    fn standardized(&self) -> PyResult<Self> {
        Ok(PyModel {
            inner: standardize(&self.inner).map_err(to_py)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows()
    }

    /// `σ²` of the componentwise maximum over `h`.
    fn scaling(&self, h: Vec<usize>) -> PyResult<f64> {
        scaling_of_max(&self.inner, &zero_based(&h)?).map_err(to_py)
    }

    fn scaling_vector(&self) -> PyResult<Vec<f64>> {
        Ok(ScalingVector::theoretical(&self.inner)
            .map_err(to_py)?
            .values()
            .to_vec())
    }

    fn simulate(&self, py: Python<'_>, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let x = py.detach(|| simulate(&self.inner, seed, n)).map_err(to_py)?;
        Ok(rows_of(&x))
    }

    /// Asymptotic covariance of the scaling vector estimator.
    fn wm(&self) -> PyResult<Vec<Vec<f64>>> {
        let w = build_wm(&self.inner).map_err(to_py)?;
        Ok((0..w.size())
            .map(|r| (0..w.size()).map(|c| w.get(r, c)).collect())
            .collect())
    }

    /// Order learning and recovery from the model's own scalings.
    #[pyo3(signature = (algorithm="argmax", a=std::f64::consts::SQRT_2, eps1=0.1, eps2=0.05, eps3=0.1))]
    fn learn_exact<'py>(
        &self,
        py: Python<'py>,
        algorithm: &str,
        a: f64,
        eps1: f64,
        eps2: f64,
        eps3: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let opts = LearnOptions {
            reorder: ReorderConfig { a, eps1, eps2, eps3 },
            algorithm: order_algorithm(algorithm)?,
            ..LearnOptions::default()
        };
        let r = cmd_learn_exact(&self.inner, &opts).map_err(to_py)?;
        estimate_dict(py, &r.estimate)
    }

    fn __repr__(&self) -> String {
        format!("Model(dim={}, standardized={})", self.inner.dim(), self.inner.is_standardized())
    }
}

/// Dense `T` with `A² = T S`.
#[pyfunction]
fn transform_matrix(d: usize) -> PyResult<Vec<Vec<i8>>> {
    let t = TransformMatrix::new(d).map_err(to_py)?.to_dense();
    Ok((0..t.nrows())
        .map(|r| (0..t.ncols()).map(|c| t[(r, c)] as i8).collect())
        .collect())
}

/// Upper triangular `A²` from a scaling vector in layout order.
#[pyfunction]
fn recover_a2(d: usize, s: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let a2 = core_recover_a2(&ScalingVector::new(d, s).map_err(to_py)?).map_err(to_py)?;
    Ok((0..d)
        .map(|i| (0..d).map(|j| if j < i { 0.0 } else { a2.at(i, j) }).collect())
        .collect())
}

/// Spectral estimate of `σ²` of the maximum over `h` with `k` order statistics.
#[pyfunction]
fn estimate_scaling(x: Vec<Vec<f64>>, h: Vec<usize>, k: usize) -> PyResult<f64> {
    estimate_scaling_subset(&samples_from(&x)?, &zero_based(&h)?, k).map_err(to_py)
}

#[pyfunction]
fn default_k(n: usize) -> usize {
    core_default_k(n)
}

/// Learns a causal order from samples and estimates the coefficient matrix.
#[pyfunction]
#[pyo3(signature = (
    x, k=None, a=std::f64::consts::SQRT_2, eps1=0.1, eps2=0.05, eps3=0.1,
    algorithm="argmax", negate=false, frechet2=false
))]
#[allow(clippy::too_many_arguments)]
fn learn<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    k: Option<usize>,
    a: f64,
    eps1: f64,
    eps2: f64,
    eps3: f64,
    algorithm: &str,
    negate: bool,
    frechet2: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = LearnOptions {
        k,
        reorder: ReorderConfig { a, eps1, eps2, eps3 },
        algorithm: order_algorithm(algorithm)?,
        transforms: Transforms { negate, frechet2 },
        ..LearnOptions::default()
    };
    let samples = Samples::with_default_headers(samples_from(&x)?);
    let r = py.detach(|| cmd_learn(&samples, &opts)).map_err(to_py)?;
    let out = estimate_dict(py, &r.estimate)?;
    out.set_item("k", r.k)?;
    Ok(out)
}

#[pymodule]
fn maxlin(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(transform_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(recover_a2, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_scaling, m)?)?;
    m.add_function(wrap_pyfunction!(default_k, m)?)?;
    m.add_function(wrap_pyfunction!(learn, m)?)?;
    Ok(())
}
