//! Python bindings for `olshanski`.
//!
//! Parameters `α` are plain float lists, group elements wrap an `n×n`
//! complex matrix, measures carry their atoms, weights and `ψ(e)`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use olshanski::bochner::{self, DiscreteParamMeasure, MeasureSpec};
use olshanski::classb::{self, ClassBSamples, RecoveryOptions};
use olshanski::group::{self, CMatrix};
use olshanski::kernels;
use olshanski::measures;
use olshanski::params::{self, Alpha};
use olshanski::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Validation(_)
        | Error::DimensionMismatch { .. }
        | Error::StepMismatch(..)
        | Error::InsufficientWindow { .. }
        | Error::Json(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn alpha(values: Vec<f64>) -> PyResult<Alpha> {
    Alpha::new(values).map_err(py_err)
}

fn matrix(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Π(α, λ) = ∏ (cosh λ − i α_j sinh λ)⁻¹.
#[pyfunction]
fn pi_eval(alpha_values: Vec<f64>, lam: f64) -> PyResult<Complex64> {
    Ok(classb::pi_eval(&alpha(alpha_values)?, lam))
}

#[pyfunction]
fn log_derivative(alpha_values: Vec<f64>, lam: f64) -> PyResult<Complex64> {
    Ok(classb::log_derivative(&alpha(alpha_values)?, lam))
}

#[pyfunction]
fn power_sum(alpha_values: Vec<f64>, m: i32) -> PyResult<f64> {
    params::power_sum(&alpha(alpha_values)?, m).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (a, b, lambda_max = 3.0, grid_step = 0.01))]
fn classb_sup_distance(a: Vec<f64>, b: Vec<f64>, lambda_max: f64, grid_step: f64) -> PyResult<f64> {
    classb::classb_sup_distance(&alpha(a)?, &alpha(b)?, lambda_max, grid_step).map_err(py_err)
}

/// `(alpha_bound, p_bound)` for `|Π(α, λ0)| ≥ C`.
#[pyfunction]
fn compactness_bounds(c: f64, lambda0: f64) -> PyResult<(f64, f64)> {
    classb::compactness_bounds(c, lambda0).map_err(py_err)
}

/// Recovers α from samples of Π(α, ·). Returns the sorted parameters.
#[pyfunction]
#[pyo3(signature = (lambdas, values, order = None))]
fn recover_from_samples(lambdas: Vec<f64>, values: Vec<Complex64>, order: Option<usize>) -> PyResult<Vec<f64>> {
    let samples = ClassBSamples::new(lambdas, values).map_err(py_err)?;
    let rec = classb::recover_from_samples(&samples, order, &RecoveryOptions::default()).map_err(py_err)?;
    Ok(rec.alpha.values().to_vec())
}

/// The sampling plan expected by `recover_from_samples` for best accuracy.
#[pyfunction]
fn default_recovery_lambdas() -> Vec<f64> {
    classb::default_recovery_lambdas()
}

/// Density grid of the measure with Fourier transform Π(α, ·): `(t_min, step, values)`.
#[pyfunction]
#[pyo3(signature = (alpha_values, t_max = measures::DEFAULT_T_MAX, step = measures::DEFAULT_STEP))]
fn density_grid(alpha_values: Vec<f64>, t_max: f64, step: f64) -> PyResult<(f64, f64, Vec<f64>)> {
    let g = measures::density_grid(&alpha(alpha_values)?, t_max, step).map_err(py_err)?;
    Ok((g.t_min(), g.step(), g.values().to_vec()))
}

/// Maximal Fourier residual of the density grid on `[−3, 3]`.
#[pyfunction]
#[pyo3(signature = (alpha_values, t_max = measures::DEFAULT_T_MAX, step = measures::DEFAULT_STEP))]
fn ft_residual(alpha_values: Vec<f64>, t_max: f64, step: f64) -> PyResult<f64> {
    let a = alpha(alpha_values)?;
    let g = measures::density_grid(&a, t_max, step).map_err(py_err)?;
    Ok(measures::ft_residual(&g, &a, 3.0, 0.01))
}

/// Unimodular complex matrix.
#[pyclass(name = "GroupElement", module = "pyolshanski", frozen)]
struct PyGroupElement {
    inner: group::GroupElement,
}

#[pymethods]
impl PyGroupElement {
    #[new]
    fn new(entries: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let inner = group::GroupElement::new(matrix(entries)?).map_err(py_err)?;
        Ok(PyGroupElement { inner })
    }

    #[staticmethod]
    fn identity(n: usize) -> Self {
        PyGroupElement { inner: group::GroupElement::identity(n) }
    }

    /// `diag(e^{λ_1}, …, e^{λ_n})` for a zero-sum profile.
    #[staticmethod]
    fn from_profile(lambdas: Vec<f64>) -> PyResult<Self> {
        Ok(PyGroupElement { inner: group::GroupElement::from_profile(&lambdas).map_err(py_err)? })
    }

    #[staticmethod]
    fn random_sl(n: usize, seed: u64) -> PyResult<Self> {
        Ok(PyGroupElement { inner: group::random_sl(n, seed).map_err(py_err)? })
    }

    #[staticmethod]
    fn random_su(n: usize, seed: u64) -> PyResult<Self> {
        Ok(PyGroupElement { inner: group::random_su(n, seed).map_err(py_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyGroupElement { inner: group::GroupElement::from_json(text).map_err(py_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn matrix(&self) -> Vec<Vec<Complex64>> {
        rows(self.inner.matrix())
    }

    fn determinant(&self) -> Complex64 {
        self.inner.determinant()
    }

    fn inverse(&self) -> PyResult<Self> {
        Ok(PyGroupElement { inner: self.inner.inverse().map_err(py_err)? })
    }

    fn __matmul__(&self, other: &PyGroupElement) -> PyResult<Self> {
        Ok(PyGroupElement { inner: self.inner.mul(&other.inner).map_err(py_err)? })
    }

    /// Log singular values, descending, summing to zero.
    fn cartan_profile(&self) -> PyResult<Vec<f64>> {
        Ok(group::cartan_profile(&self.inner).map_err(py_err)?.lambdas().to_vec())
    }

    /// Block embedding `diag(g, I)` into rank `big_n`.
    fn embed(&self, big_n: usize) -> PyResult<Self> {
        Ok(PyGroupElement { inner: group::embed(&self.inner, big_n).map_err(py_err)? })
    }

    fn __repr__(&self) -> String {
        format!("GroupElement(dim={})", self.inner.dim())
    }
}

fn elements(list: &[PyRef<'_, PyGroupElement>]) -> Vec<group::GroupElement> {
    list.iter().map(|g| g.inner.clone()).collect()
}

/// φ_α(g) = ∏_j Π(α, λ_j(g)).
#[pyfunction]
fn spherical_eval(alpha_values: Vec<f64>, g: &PyGroupElement) -> PyResult<Complex64> {
    group::spherical_eval(&alpha(alpha_values)?, &g.inner).map_err(py_err)
}

/// Rows `(n, estimate, target, abs_err, mc_stderr)` of the Monte Carlo limit test.
#[pyfunction]
fn spherical_limit_test(
    alpha_values: Vec<f64>,
    x: &PyGroupElement,
    y: &PyGroupElement,
    n_list: Vec<usize>,
    mc: usize,
    seed: u64,
) -> PyResult<Vec<(usize, Complex64, Complex64, f64, f64)>> {
    let rows = group::spherical_limit_test(&alpha(alpha_values)?, &x.inner, &y.inner, &n_list, mc, seed)
        .map_err(py_err)?;
    Ok(rows.into_iter().map(|r| (r.n, r.estimate, r.target, r.abs_err, r.mc_stderr)).collect())
}

/// `K_ij = φ_α(g_j⁻¹ g_i)`.
#[pyfunction]
fn spherical_gram(alpha_values: Vec<f64>, elements_list: Vec<PyRef<'_, PyGroupElement>>) -> PyResult<Vec<Vec<Complex64>>> {
    let a = alpha(alpha_values)?;
    let pairs = kernels::PairProfiles::new(&elements(&elements_list)).map_err(py_err)?;
    Ok(rows(&pairs.gram(|p| group::spherical_eval_profile(&a, p))))
}

#[pyclass(name = "GramReport", module = "pyolshanski", frozen, get_all)]
struct PyGramReport {
    size: usize,
    hermiticity_defect: f64,
    extremal_eigenvalue: f64,
    threshold: f64,
    passed: bool,
    witness: Option<Vec<Complex64>>,
}

#[pymethods]
impl PyGramReport {
    fn __repr__(&self) -> String {
        format!(
            "GramReport(size={}, passed={}, extremal_eigenvalue={:e})",
            self.size,
            if self.passed { "True" } else { "False" },
            self.extremal_eigenvalue
        )
    }
}

impl From<kernels::GramReport> for PyGramReport {
    fn from(r: kernels::GramReport) -> Self {
        PyGramReport {
            size: r.size,
            hermiticity_defect: r.hermiticity_defect,
            extremal_eigenvalue: r.extremal_eigenvalue,
            threshold: r.threshold,
            passed: r.passed,
            witness: r.witness.map(|w| w.into_iter().map(|[re, im]| Complex64::new(re, im)).collect()),
        }
    }
}

#[pyfunction]
#[pyo3(signature = (k, tol = kernels::GRAM_TOL))]
fn psd_check(k: Vec<Vec<Complex64>>, tol: f64) -> PyResult<PyGramReport> {
    Ok(kernels::psd_check(&matrix(k)?, tol).map_err(py_err)?.into())
}

#[pyfunction]
#[pyo3(signature = (k, tol = kernels::GRAM_TOL))]
fn negtype_check(k: Vec<Vec<Complex64>>, tol: f64) -> PyResult<PyGramReport> {
    Ok(kernels::negtype_check(&matrix(k)?, tol).map_err(py_err)?.into())
}

/// Finitely atomic measure on the parameter space, with the value `ψ(e)`
/// used for negative-type synthesis.
#[pyclass(name = "Measure", module = "pyolshanski", frozen)]
struct PyMeasure {
    spec: MeasureSpec,
}

#[pymethods]
impl PyMeasure {
    #[new]
    #[pyo3(signature = (atoms, weights, psi_at_e = 0.0))]
    fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>, psi_at_e: f64) -> PyResult<Self> {
        if !(psi_at_e >= 0.0) {
            return Err(PyValueError::new_err("psi_at_e must be >= 0"));
        }
        let atoms = atoms.into_iter().map(alpha).collect::<PyResult<Vec<_>>>()?;
        let measure = DiscreteParamMeasure::new(atoms, weights).map_err(py_err)?;
        Ok(PyMeasure { spec: MeasureSpec { psi_at_e, measure } })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyMeasure { spec: MeasureSpec::from_json(text).map_err(py_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.spec.to_json().map_err(py_err)
    }

    #[getter]
    fn atoms(&self) -> Vec<Vec<f64>> {
        self.spec.measure.atoms().iter().map(|a| a.values().to_vec()).collect()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.spec.measure.weights().to_vec()
    }

    #[getter]
    fn psi_at_e(&self) -> f64 {
        self.spec.psi_at_e
    }

    /// Mass outside the trivial atom.
    fn nontrivial_mass(&self) -> f64 {
        self.spec.measure.nontrivial_mass()
    }

    fn weight_of(&self, alpha_values: Vec<f64>) -> PyResult<f64> {
        Ok(self.spec.measure.weight_of(&alpha(alpha_values)?))
    }

    /// `Σ w_k φ_{α_k}(g)`.
    fn synth_positive(&self, g: &PyGroupElement) -> PyResult<Complex64> {
        bochner::synth_positive(&self.spec.measure, &g.inner).map_err(py_err)
    }

    /// `ψ(e) + Σ w_k (1 − φ_{α_k}(g))`.
    fn synth_negative(&self, g: &PyGroupElement) -> PyResult<Complex64> {
        bochner::synth_negative(&self.spec.measure, self.spec.psi_at_e, &g.inner).map_err(py_err)
    }

    /// `(bound, observed_sup, passed)` of the boundedness certificate.
    #[pyo3(signature = (n = 6, num_samples = 200, seed = 0))]
    fn boundedness_check(&self, n: usize, num_samples: usize, seed: u64) -> PyResult<(f64, f64, bool)> {
        let r = bochner::boundedness_check(&self.spec.measure, self.spec.psi_at_e, n, num_samples, seed)
            .map_err(py_err)?;
        Ok((r.bound, r.observed_sup, r.passed))
    }

    fn __repr__(&self) -> String {
        format!("Measure(atoms={}, psi_at_e={})", self.spec.measure.atoms().len(), self.spec.psi_at_e)
    }
}

/// NNLS fit of sampled values on a grid of atoms. With `psi_at_e` given,
/// the values are read as a negative-type function. Returns
/// `(measure, residual, ill_conditioned)`.
#[pyfunction]
#[pyo3(signature = (elements_list, values, grid, psi_at_e = None, reg_tol = bochner::NNLS_TOL))]
fn fit_measure(
    elements_list: Vec<PyRef<'_, PyGroupElement>>,
    values: Vec<Complex64>,
    grid: Vec<Vec<f64>>,
    psi_at_e: Option<f64>,
    reg_tol: f64,
) -> PyResult<(PyMeasure, f64, bool)> {
    if elements_list.len() != values.len() {
        return Err(PyValueError::new_err("elements and values differ in length"));
    }
    let data: Vec<_> = elements(&elements_list).into_iter().zip(values).collect();
    let grid = grid.into_iter().map(alpha).collect::<PyResult<Vec<_>>>()?;
    let fit = match psi_at_e {
        None => bochner::fit_measure(&data, &grid, reg_tol),
        Some(p) => bochner::fit_negative_measure(&data, &grid, p, reg_tol),
    }
    .map_err(py_err)?;
    let spec = MeasureSpec { psi_at_e: psi_at_e.unwrap_or(0.0), measure: fit.measure };
    Ok((PyMeasure { spec }, fit.residual, fit.ill_conditioned))
}

/// Deterministic Halton design of diagonal elements of SL(n).
#[pyfunction]
#[pyo3(signature = (n, count, skip = 0))]
fn design_elements(n: usize, count: usize, skip: u64) -> PyResult<Vec<PyGroupElement>> {
    Ok(bochner::design_elements(n, count, skip)
        .map_err(py_err)?
        .into_iter()
        .map(|inner| PyGroupElement { inner })
        .collect())
}

#[pymodule]
pub fn pyolshanski(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGroupElement>()?;
    m.add_class::<PyGramReport>()?;
    m.add_class::<PyMeasure>()?;
    m.add_function(wrap_pyfunction!(pi_eval, m)?)?;
    m.add_function(wrap_pyfunction!(log_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(power_sum, m)?)?;
    m.add_function(wrap_pyfunction!(classb_sup_distance, m)?)?;
    m.add_function(wrap_pyfunction!(compactness_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(recover_from_samples, m)?)?;
    m.add_function(wrap_pyfunction!(default_recovery_lambdas, m)?)?;
    m.add_function(wrap_pyfunction!(density_grid, m)?)?;
    m.add_function(wrap_pyfunction!(ft_residual, m)?)?;
    m.add_function(wrap_pyfunction!(spherical_eval, m)?)?;
    m.add_function(wrap_pyfunction!(spherical_limit_test, m)?)?;
    m.add_function(wrap_pyfunction!(spherical_gram, m)?)?;
    m.add_function(wrap_pyfunction!(psd_check, m)?)?;
    m.add_function(wrap_pyfunction!(negtype_check, m)?)?;
    m.add_function(wrap_pyfunction!(fit_measure, m)?)?;
    m.add_function(wrap_pyfunction!(design_elements, m)?)?;
    Ok(())
}
