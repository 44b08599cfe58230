//! Python bindings. Structured results come back as plain dicts and lists
//! (decoded from the same JSON the CLI writes).

use cdspack_core::connector::CdsPacking;
use cdspack_core::generators::{self, GenSpec};
use cdspack_core::graph::{Graph, VertexSet};
use cdspack_core::params::{derive_params, Mode, Overrides};
use cdspack_core::pipeline::{self, PackConfig};
use cdspack_core::spectral::extremal_eigenvalues;
use cdspack_core::verifier::{brute_force_max_disjoint_cds, brute_force_min_cds, is_dominating, verify_packing};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(cdspack, CdspackError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    CdspackError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse().map_err(|e: String| PyValueError::new_err(e))
}

/// Simple undirected graph on vertices `0..n`.
#[pyclass(name = "Graph", module = "cdspack", frozen)]
struct PyGraph {
    inner: Graph,
    source: Option<GenSpec>,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self { inner: Graph::from_edges(n, edges).map_err(err)?, source: None })
    }

    /// Parses the `n m` header plus `u v` lines format.
    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        Ok(Self { inner: Graph::parse_edge_list(text).map_err(err)?, source: None })
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    /// Common degree, or `None` if the graph is not regular.
    #[getter]
    fn degree(&self) -> Option<usize> {
        self.inner.regular_degree()
    }

    fn neighbors(&self, v: usize) -> PyResult<Vec<usize>> {
        self.inner.check_vertex(v).map_err(err)?;
        Ok(self.inner.neighbors(v).to_vec())
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n() && v < self.n() && self.inner.has_edge(u, v)
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn __len__(&self) -> usize {
        self.n()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={})", self.n(), self.edge_count())
    }
}

fn generated(spec: GenSpec) -> PyResult<PyGraph> {
    let inner = spec.build().map_err(err)?;
    Ok(PyGraph { inner, source: Some(spec) })
}

#[pyfunction]
#[pyo3(signature = (n, d, seed=0))]
fn random_regular(n: usize, d: usize, seed: u64) -> PyResult<PyGraph> {
    generated(GenSpec::Regular { n, d, seed })
}

#[pyfunction]
#[pyo3(signature = (n, p, seed=0))]
fn binomial_random(n: usize, p: f64, seed: u64) -> PyResult<PyGraph> {
    generated(GenSpec::Binomial { n, p, seed })
}

#[pyfunction]
fn glued_cliques(k: usize) -> PyResult<PyGraph> {
    generated(GenSpec::GluedCliques { k })
}

#[pyfunction]
fn complete(n: usize) -> PyResult<PyGraph> {
    generated(GenSpec::Complete { n })
}

#[pyfunction]
fn cycle(n: usize) -> PyResult<PyGraph> {
    generated(GenSpec::Cycle { n })
}

#[pyfunction]
fn petersen() -> PyGraph {
    PyGraph { inner: generators::petersen(), source: Some(GenSpec::Petersen) }
}

#[pyfunction]
#[pyo3(signature = (g, tol=1e-6))]
fn spectrum<'py>(py: Python<'py>, g: &PyGraph, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let profile = extremal_eigenvalues(&g.inner, tol).map_err(err)?;
    to_py(py, &profile)
}

#[pyfunction]
#[pyo3(signature = (n, d, lam, epsilon=0.3, mode="practice", m=None, degree_cap=None))]
#[allow(clippy::too_many_arguments)]
fn params<'py>(
    py: Python<'py>,
    n: usize,
    d: usize,
    lam: f64,
    epsilon: f64,
    mode: &str,
    m: Option<usize>,
    degree_cap: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let overrides = Overrides { joined_size: m, degree_cap };
    let p = derive_params(n, d, lam, epsilon, parse_mode(mode)?, overrides).map_err(err)?;
    to_py(py, &p)
}

/// Full pipeline. Returns the run report; failures are described in its
/// `error` field rather than raised.
#[pyfunction]
#[pyo3(signature = (g, seed=0, epsilon=0.3, mode="practice", tol=1e-6, m=None, degree_cap=None, target=None, max_sets=None))]
#[allow(clippy::too_many_arguments)]
fn pack<'py>(
    py: Python<'py>,
    g: &PyGraph,
    seed: u64,
    epsilon: f64,
    mode: &str,
    tol: f64,
    m: Option<usize>,
    degree_cap: Option<usize>,
    target: Option<usize>,
    max_sets: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let config = PackConfig {
        epsilon,
        mode: parse_mode(mode)?,
        tol,
        overrides: Overrides { joined_size: m, degree_cap },
        target,
        max_sets,
    };
    let report = py.detach(|| pipeline::pack(&g.inner, g.source.clone(), &config, seed));
    let exit_code = report.exit_code();
    let out = to_py(py, &report)?;
    out.set_item("exit_code", exit_code)?;
    Ok(out)
}

/// Checks a packing: either a dict with a `sets` list, a whole pack report,
/// or a bare list of vertex lists.
#[pyfunction]
#[pyo3(signature = (g, packing, target=None))]
fn verify<'py>(
    py: Python<'py>,
    g: &PyGraph,
    packing: &Bound<'py, PyAny>,
    target: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let parsed: CdsPacking = if let Ok(sets) = packing.extract::<Vec<Vec<usize>>>() {
        CdsPacking { params: None, sets: sets.into_iter().map(VertexSet::from).collect(), certificates: Vec::new(), paths: Vec::new() }
    } else {
        let inner = match packing.get_item("packing") {
            Ok(p) if packing.get_item("sets").is_err() => p,
            _ => packing.clone(),
        };
        from_py(py, &inner)?
    };
    let report = verify_packing(&g.inner, &parsed, target);
    let passed = report.passed();
    let out = to_py(py, &report)?;
    out.set_item("passed", passed)?;
    Ok(out)
}

#[pyfunction(name = "is_dominating")]
fn py_is_dominating(g: &PyGraph, s: Vec<usize>) -> PyResult<bool> {
    let set = VertexSet::from(s);
    set.validate(&g.inner).map_err(err)?;
    Ok(is_dominating(&g.inner, &set))
}

/// Exhaustive minimum connected dominating set (small graphs only).
#[pyfunction]
fn min_cds(g: &PyGraph) -> PyResult<(usize, Vec<usize>)> {
    let (size, set) = brute_force_min_cds(&g.inner).map_err(err)?;
    Ok((size, set.as_slice().to_vec()))
}

/// Exhaustive maximum number of disjoint connected dominating sets.
#[pyfunction]
fn max_disjoint_cds(g: &PyGraph) -> PyResult<(usize, Vec<Vec<usize>>)> {
    let (count, sets) = brute_force_max_disjoint_cds(&g.inner).map_err(err)?;
    Ok((count, sets.iter().map(|s| s.as_slice().to_vec()).collect()))
}

#[pyfunction]
fn default_target(d: usize) -> usize {
    pipeline::default_target(d)
}

#[pymodule]
fn cdspack(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CdspackError", m.py().get_type::<CdspackError>())?;
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(random_regular, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_random, m)?)?;
    m.add_function(wrap_pyfunction!(glued_cliques, m)?)?;
    m.add_function(wrap_pyfunction!(complete, m)?)?;
    m.add_function(wrap_pyfunction!(cycle, m)?)?;
    m.add_function(wrap_pyfunction!(petersen, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(params, m)?)?;
    m.add_function(wrap_pyfunction!(pack, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(py_is_dominating, m)?)?;
    m.add_function(wrap_pyfunction!(min_cds, m)?)?;
    m.add_function(wrap_pyfunction!(max_disjoint_cds, m)?)?;
    m.add_function(wrap_pyfunction!(default_target, m)?)?;
    Ok(())
}
