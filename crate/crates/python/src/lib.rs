//! Python bindings for the ism-dematel analysis library.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use ism_dematel::dematel::{self, DematelResult};
use ism_dematel::ism::{self, IsmResult};
use ism_dematel::micmac::{self, Quadrant, QuadrantAssignment};
use ism_dematel::pipeline::{self, Formats, RunConfig};
use ism_dematel::survey::{self, ReliabilityResult};
use ism_dematel::{
    dot, io, BarrierRegistry, Error, ErrorKind, InfluenceMatrix, MatrixRole, ReachabilityMatrix,
    RelationSymbol, SsimMatrix,
};

create_exception!(ism_dematel_py, IsmDematelError, PyException);
create_exception!(ism_dematel_py, InputError, IsmDematelError);
create_exception!(ism_dematel_py, ValidationError, IsmDematelError);
create_exception!(ism_dematel_py, NumericError, IsmDematelError);

fn to_py(err: Error) -> PyErr {
    let msg = err.to_string();
    match err.kind() {
        ErrorKind::Input => InputError::new_err(msg),
        ErrorKind::Validation => ValidationError::new_err(msg),
        ErrorKind::Numeric => NumericError::new_err(msg),
    }
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn symbol(s: &str) -> PyResult<RelationSymbol> {
    let mut chars = s.chars();
    match (chars.next().and_then(RelationSymbol::from_char), chars.next()) {
        (Some(sym), None) => Ok(sym),
        _ => Err(InputError::new_err(format!("unknown relation symbol `{s}`; expected V, A, X or O"))),
    }
}

fn role(name: &str) -> PyResult<MatrixRole> {
    match name {
        "expert_response" => Ok(MatrixRole::ExpertResponse),
        "average" => Ok(MatrixRole::Average),
        "normalized" => Ok(MatrixRole::Normalized),
        "total_relation" => Ok(MatrixRole::TotalRelation),
        other => Err(InputError::new_err(format!("unknown matrix role `{other}`"))),
    }
}

fn reach_rows(m: &ReachabilityMatrix) -> Vec<Vec<String>> {
    m.to_rows()
        .into_iter()
        .map(|row| row.into_iter().map(|r| r.literal().to_owned()).collect())
        .collect()
}

#[pyclass(name = "Registry", module = "ism_dematel_py", skip_from_py_object)]
#[derive(Clone)]
struct PyRegistry {
    inner: BarrierRegistry,
}

#[pymethods]
impl PyRegistry {
    /// Factors in index order as (abbreviation, name) pairs.
    #[new]
    fn new(pairs: Vec<(String, String)>) -> PyResult<Self> {
        let inner = BarrierRegistry::from_pairs(pairs).map_err(to_py)?;
        Ok(PyRegistry { inner })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        let inner = io::parse_registry(text, "registry").map_err(to_py)?;
        Ok(PyRegistry { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn abbrs(&self) -> Vec<String> {
        self.inner.abbrs().map(str::to_owned).collect()
    }

    fn names(&self) -> Vec<String> {
        self.inner.entries().iter().map(|b| b.name.clone()).collect()
    }

    fn index_of(&self, abbr: &str) -> Option<usize> {
        self.inner.index_of(abbr)
    }
}

#[pyclass(name = "Ssim", module = "ism_dematel_py", skip_from_py_object)]
#[derive(Clone)]
struct PySsim {
    inner: SsimMatrix,
}

#[pymethods]
impl PySsim {
    /// `entries` lists every pair i < j once as (i, j, symbol).
    #[new]
    fn new(n: usize, entries: Vec<(usize, usize, String)>) -> PyResult<Self> {
        let parsed = entries
            .into_iter()
            .map(|(i, j, s)| Ok((i, j, symbol(&s)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let inner = SsimMatrix::from_entries(n, parsed).map_err(to_py)?;
        Ok(PySsim { inner })
    }

    #[staticmethod]
    fn from_csv(text: &str, n: usize) -> PyResult<Self> {
        let inner = io::parse_ssim(text, "ssim", n).map_err(to_py)?;
        Ok(PySsim { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<String> {
        let s = self.inner.get(i, j).map_err(to_py)?;
        Ok(s.as_char().to_string())
    }

    fn entries(&self) -> Vec<(usize, usize, String)> {
        self.inner.iter().map(|(i, j, s)| (i, j, s.as_char().to_string())).collect()
    }
}

#[pyclass(name = "InfluenceMatrix", module = "ism_dematel_py", skip_from_py_object)]
#[derive(Clone)]
struct PyInfluenceMatrix {
    inner: InfluenceMatrix,
}

#[pymethods]
impl PyInfluenceMatrix {
    #[new]
    #[pyo3(signature = (rows, role = "average"))]
    fn new(rows: Vec<Vec<f64>>, role: &str) -> PyResult<Self> {
        let inner = InfluenceMatrix::from_rows(&rows, self::role(role)?).map_err(to_py)?;
        Ok(PyInfluenceMatrix { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn role(&self) -> String {
        self.inner.role().to_string()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        self.inner.get(i, j).map_err(to_py)
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }
}

#[pyclass(name = "IsmResult", module = "ism_dematel_py", skip_from_py_object)]
struct PyIsmResult {
    inner: IsmResult,
}

#[pymethods]
impl PyIsmResult {
    /// Cells as "0", "1" or "1*".
    fn irm(&self) -> Vec<Vec<String>> {
        reach_rows(&self.inner.irm)
    }

    fn frm(&self) -> Vec<Vec<String>> {
        reach_rows(&self.inner.frm)
    }

    fn driving_power(&self) -> Vec<usize> {
        self.inner.frm.driving_power().to_vec()
    }

    fn dependence_power(&self) -> Vec<usize> {
        self.inner.frm.dependence_power().to_vec()
    }

    /// Level of each factor, 1 being the top.
    fn levels(&self) -> Vec<usize> {
        self.inner.levels.levels()
    }

    fn level_members(&self, level: usize) -> Vec<usize> {
        self.inner.levels.members(level)
    }

    fn conical_order(&self) -> Vec<usize> {
        self.inner.conical.order.clone()
    }

    /// Digraph edges as (source members, target members).
    fn digraph_edges(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let g = &self.inner.digraph;
        g.edges
            .iter()
            .map(|e| (g.nodes[e.from].members.clone(), g.nodes[e.to].members.clone()))
            .collect()
    }

    fn to_dot(&self, registry: &PyRegistry) -> String {
        dot::ism_dot(&self.inner.digraph, &registry.inner)
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.inner)
    }
}

#[pyclass(name = "Quadrants", module = "ism_dematel_py", skip_from_py_object)]
struct PyQuadrants {
    inner: QuadrantAssignment,
}

#[pymethods]
impl PyQuadrants {
    #[getter]
    fn mid(&self) -> f64 {
        self.inner.mid
    }

    /// Quadrant name per factor in index order.
    fn assignments(&self) -> Vec<String> {
        self.inner.points.iter().map(|p| p.quadrant.to_string()).collect()
    }

    fn members(&self, quadrant: &str) -> PyResult<Vec<usize>> {
        let q = Quadrant::ALL
            .into_iter()
            .find(|q| q.to_string().eq_ignore_ascii_case(quadrant))
            .ok_or_else(|| InputError::new_err(format!("unknown quadrant `{quadrant}`")))?;
        Ok(self.inner.members(q))
    }

    /// (dependence, driving) per factor.
    fn chart_coordinates(&self) -> Vec<(usize, usize)> {
        self.inner.chart_coordinates()
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.inner)
    }
}

#[pyclass(name = "DematelResult", module = "ism_dematel_py", skip_from_py_object)]
struct PyDematelResult {
    inner: DematelResult,
}

#[pymethods]
impl PyDematelResult {
    #[getter]
    fn divisor(&self) -> f64 {
        self.inner.normalization.divisor
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold()
    }

    #[getter]
    fn condition_number(&self) -> f64 {
        self.inner.total.condition_number
    }

    fn normalized(&self) -> Vec<Vec<f64>> {
        self.inner.normalization.matrix.to_rows()
    }

    fn total(&self) -> Vec<Vec<f64>> {
        self.inner.total.matrix.to_rows()
    }

    /// Rows of (index, R, C, R+C, R-C, group).
    fn cause_effect(&self) -> Vec<(usize, f64, f64, f64, f64, String)> {
        self.inner
            .cause_effect
            .rows
            .iter()
            .map(|r| (r.index, r.r, r.c, r.prominence, r.relation, r.group.to_string()))
            .collect()
    }

    fn causes(&self) -> Vec<usize> {
        self.inner.cause_effect.causes()
    }

    fn effects(&self) -> Vec<usize> {
        self.inner.cause_effect.effects()
    }

    fn ranking(&self) -> Vec<usize> {
        self.inner.ranking.clone()
    }

    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.edges.edges.iter().map(|e| (e.from, e.to, e.value)).collect()
    }

    fn to_dot(&self, registry: &PyRegistry) -> String {
        dot::influence_dot(&self.inner, &registry.inner)
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.inner)
    }
}

#[pyclass(name = "Reliability", module = "ism_dematel_py", get_all, skip_from_py_object)]
struct PyReliability {
    k: usize,
    respondents: usize,
    item_variance_sum: f64,
    total_variance: f64,
    alpha: f64,
    acceptable: bool,
}

impl From<ReliabilityResult> for PyReliability {
    fn from(r: ReliabilityResult) -> Self {
        PyReliability {
            k: r.k,
            respondents: r.respondents,
            item_variance_sum: r.item_variance_sum,
            total_variance: r.total_variance,
            alpha: r.alpha,
            acceptable: r.acceptable,
        }
    }
}

#[pyfunction]
fn ism_analyze(ssim: &PySsim) -> PyResult<PyIsmResult> {
    let inner = ism::analyze(&ssim.inner).map_err(to_py)?;
    Ok(PyIsmResult { inner })
}

#[pyfunction]
#[pyo3(signature = (ism, mid = None))]
fn micmac_classify(ism: &PyIsmResult, mid: Option<f64>) -> PyQuadrants {
    PyQuadrants {
        inner: micmac::classify(&ism.inner.frm, mid),
    }
}

#[pyfunction]
fn dematel_analyze(average: &PyInfluenceMatrix) -> PyResult<PyDematelResult> {
    let inner = dematel::analyze(&average.inner).map_err(to_py)?;
    Ok(PyDematelResult { inner })
}

#[pyfunction]
fn aggregate_ssim(judgments: Vec<PyRef<'_, PySsim>>) -> PyResult<PySsim> {
    let inner = survey::aggregate_ssim(judgments.iter().map(|s| &s.inner)).map_err(to_py)?;
    Ok(PySsim { inner })
}

#[pyfunction]
fn aggregate_average(scores: Vec<PyRef<'_, PyInfluenceMatrix>>) -> PyResult<PyInfluenceMatrix> {
    let inner = survey::aggregate_average(scores.iter().map(|m| &m.inner)).map_err(to_py)?;
    Ok(PyInfluenceMatrix { inner })
}

#[pyfunction]
fn cronbach_alpha(score_table: Vec<Vec<f64>>, k: usize) -> PyResult<PyReliability> {
    survey::cronbach_alpha(&score_table, k).map(Into::into).map_err(to_py)
}

#[pyfunction]
fn alpha_from_summary(k: usize, item_variance_sum: f64, total_variance: f64) -> PyResult<PyReliability> {
    survey::reliability_from_summary(k, item_variance_sum, total_variance)
        .map(Into::into)
        .map_err(to_py)
}

/// Runs the full pipeline and returns the text summary. Outputs are written
/// to `out` unless `write` is false.
#[pyfunction]
#[pyo3(signature = (registry, responses, out, *, strict = false, alpha_items = None, mid = None, formats = "csv,json,dot", write = true))]
#[allow(clippy::too_many_arguments)]
fn run_pipeline(
    py: Python<'_>,
    registry: &str,
    responses: &str,
    out: &str,
    strict: bool,
    alpha_items: Option<usize>,
    mid: Option<f64>,
    formats: &str,
    write: bool,
) -> PyResult<String> {
    let mut config = RunConfig::new(registry, responses, out);
    config.strict_screening = strict;
    config.alpha_item_count = alpha_items;
    config.micmac_mid_override = mid;
    config.formats = formats.parse::<Formats>().map_err(to_py)?;
    py.detach(|| {
        let output = pipeline::run_pipeline(&config)?;
        if write {
            pipeline::write_bundle(&config.output_dir, &output.bundle)?;
        }
        Ok(pipeline::summary(&output.report))
    })
    .map_err(to_py)
}

#[pymodule]
fn ism_dematel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("IsmDematelError", py.get_type::<IsmDematelError>())?;
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("ValidationError", py.get_type::<ValidationError>())?;
    m.add("NumericError", py.get_type::<NumericError>())?;
    m.add_class::<PyRegistry>()?;
    m.add_class::<PySsim>()?;
    m.add_class::<PyInfluenceMatrix>()?;
    m.add_class::<PyIsmResult>()?;
    m.add_class::<PyQuadrants>()?;
    m.add_class::<PyDematelResult>()?;
    m.add_class::<PyReliability>()?;
    m.add_function(wrap_pyfunction!(ism_analyze, m)?)?;
    m.add_function(wrap_pyfunction!(micmac_classify, m)?)?;
    m.add_function(wrap_pyfunction!(dematel_analyze, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_ssim, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_average, m)?)?;
    m.add_function(wrap_pyfunction!(cronbach_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_from_summary, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
