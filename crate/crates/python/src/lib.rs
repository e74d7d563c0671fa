//! Python bindings for the `kerrcat` crate.

use kerrcat::catspace::{CatModel, CubicInvariants};
use kerrcat::dynamics::{self, DensityMatrix};
use kerrcat::exceptional::{self, EpPoint, Lep2Options};
use kerrcat::fock::{self, Parity};
use kerrcat::liouville;
use kerrcat::model::{ExperimentUnits, KappaConvention};
use kerrcat::winding::{self, Contour, Route, WindingOptions};
use kerrcat::{ComplexMatrix, Error, ModelParams, C64};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::DimensionMismatch { .. } | Error::Truncation { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rows(m: &ComplexMatrix) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn route(name: &str) -> PyResult<Route> {
    match name {
        "invariants" => Ok(Route::Invariants),
        "eigenvalues" => Ok(Route::Eigenvalues),
        "numeric" => Ok(Route::Numeric),
        _ => Err(PyValueError::new_err(format!("unknown route `{name}`"))),
    }
}

/// Δ, K, P, ε, κ in rad/µs (κ in 1/µs).
#[pyclass(name = "ModelParams", module = "kerrcat", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (delta, kerr, two_photon, drive, kappa))]
    fn new(delta: f64, kerr: f64, two_photon: f64, drive: f64, kappa: f64) -> PyResult<Self> {
        let inner = ModelParams::new(delta, kerr, two_photon, drive, kappa).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (alpha, kappa, drive = 0.0, delta = 0.0))]
    fn from_alpha(alpha: f64, kappa: f64, drive: f64, delta: f64) -> PyResult<Self> {
        let inner = ModelParams::from_alpha(alpha, kappa, drive, delta).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Parameters of the reference device; `angular` multiplies κ by 2π.
    #[staticmethod]
    #[pyo3(signature = (angular = false))]
    fn device(angular: bool) -> PyResult<Self> {
        let convention = if angular { KappaConvention::Angular } else { KappaConvention::PlainRate };
        let inner = ExperimentUnits::kerr_cat_device().to_params(convention).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn with_drive(&self, drive: f64) -> Self {
        Self { inner: self.inner.with_drive(drive) }
    }

    fn with_delta(&self, delta: f64) -> Self {
        Self { inner: self.inner.with_delta(delta) }
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }
    #[getter]
    fn kerr(&self) -> f64 {
        self.inner.kerr
    }
    #[getter]
    fn two_photon(&self) -> f64 {
        self.inner.two_photon
    }
    #[getter]
    fn drive(&self) -> f64 {
        self.inner.drive
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }
    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(delta={}, kerr={}, two_photon={}, drive={}, kappa={})",
            p.delta, p.kerr, p.two_photon, p.drive, p.kappa
        )
    }
}

fn invariants_dict<'py>(py: Python<'py>, inv: &CubicInvariants) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("shift", inv.shift)?;
    d.set_item("q", inv.q)?;
    d.set_item("m", inv.m)?;
    d.set_item("discriminant", inv.discriminant)?;
    Ok(d)
}

fn ep_dict<'py>(py: Python<'py>, p: &EpPoint) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("eps", p.eps)?;
    d.set_item("delta", p.delta)?;
    d.set_item("order", p.order)?;
    d.set_item("disc_residual", p.disc_residual)?;
    d.set_item("coalescence", p.coalescence)?;
    Ok(d)
}

/// Four-level model on the cat manifold.
#[pyclass(name = "CatModel", module = "kerrcat", frozen)]
struct PyCatModel {
    inner: CatModel,
}

#[pymethods]
impl PyCatModel {
    #[new]
    fn new(alpha: f64, kappa: f64) -> PyResult<Self> {
        Ok(Self { inner: CatModel::new(alpha, kappa).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_params(params: &PyModelParams) -> Self {
        Self { inner: CatModel::from_params(&params.inner) }
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn rate_scale(&self) -> f64 {
        self.inner.rate_scale()
    }

    /// Closed-form eigenvalues `[E1, E2, E3, E4]` with `E1 = 0`.
    fn spectrum(&self, eps: f64, delta: f64) -> Vec<C64> {
        self.inner.spectrum(eps, delta).as_array().to_vec()
    }

    fn numeric_spectrum(&self, eps: f64, delta: f64) -> PyResult<Vec<C64>> {
        self.inner.reduced(eps, delta).numeric_eigenvalues().map_err(to_py)
    }

    fn reduced_matrix(&self, eps: f64, delta: f64) -> Vec<Vec<C64>> {
        rows(&self.inner.reduced(eps, delta).matrix())
    }

    fn invariants<'py>(&self, py: Python<'py>, eps: f64, delta: f64) -> PyResult<Bound<'py, PyDict>> {
        invariants_dict(py, &self.inner.invariants(eps, delta))
    }

    /// The four third-order points from their closed form.
    fn lep3_points<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let pts = exceptional::lep3_closed_form(&self.inner).map_err(to_py)?;
        pts.iter().map(|p| ep_dict(py, p)).collect()
    }

    /// Newton refinement of a third-order point from `(eps, delta)`.
    fn lep3_refine<'py>(&self, py: Python<'py>, eps: f64, delta: f64) -> PyResult<Bound<'py, PyDict>> {
        let p = exceptional::lep3_numeric(&self.inner, (eps, delta)).map_err(to_py)?;
        ep_dict(py, &p)
    }

    /// |Δ| of the double-root line at zero drive.
    fn lep2_delta_at_zero_drive(&self) -> f64 {
        exceptional::lep2_delta_at_zero_drive(&self.inner)
    }

    /// Δ values in `[-delta_max, delta_max]` where the discriminant vanishes.
    #[pyo3(signature = (eps, delta_max, n_delta = 4000))]
    fn discriminant_roots(&self, eps: f64, delta_max: f64, n_delta: usize) -> Vec<f64> {
        exceptional::discriminant_roots(&self.inner, eps, delta_max, n_delta)
    }

    /// Double-root points traced over `n_eps` drive slices, one list per curve.
    #[pyo3(signature = (eps_min, eps_max, n_eps = 201, n_delta = 4000))]
    fn lep2_curves<'py>(
        &self,
        py: Python<'py>,
        eps_min: f64,
        eps_max: f64,
        n_eps: usize,
        n_delta: usize,
    ) -> PyResult<Vec<Vec<(f64, f64)>>> {
        let options = Lep2Options { n_delta, ..Lep2Options::default() };
        let trace = py
            .detach(|| exceptional::lep2_trace(&self.inner, (eps_min, eps_max), n_eps, &options))
            .map_err(to_py)?;
        Ok(trace.curves.iter().map(|c| c.iter().map(|p| (p.eps, p.delta)).collect()).collect())
    }

    /// Winding number of the resultant vector along a circle in (ε, Δ).
    #[pyo3(signature = (center, radius, samples = 720, route = "invariants"))]
    fn winding_number<'py>(
        &self,
        py: Python<'py>,
        center: (f64, f64),
        radius: f64,
        samples: usize,
        route: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let contour = Contour::circle(center, radius).map_err(to_py)?.with_samples(samples);
        let options = WindingOptions { route: self::route(route)?, ..WindingOptions::default() };
        let r = winding::winding_number(&contour, &self.inner, &options).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("W", r.winding)?;
        d.set_item("raw", r.raw)?;
        d.set_item("samples", r.samples)?;
        d.set_item("min_norm", r.min_norm)?;
        Ok(d)
    }

    /// Rescaled resultant vector `(R1, R2)` at one point.
    #[pyo3(signature = (eps, delta, route = "invariants"))]
    fn resultant(&self, eps: f64, delta: f64, route: &str) -> PyResult<(f64, f64)> {
        let r = winding::rescaled_resultant(&self.inner, eps, delta, self::route(route)?).map_err(to_py)?;
        Ok((r.r1, r.r2))
    }
}

/// `(R1, R2)` built from products of eigenvalue differences.
#[pyfunction]
fn resultant_vector(e2: C64, e3: C64, e4: C64) -> PyResult<(f64, f64)> {
    let r = winding::resultant_vector(e2, e3, e4).map_err(to_py)?;
    Ok((r.r1, r.r2))
}

/// Eigenvalues of the full Liouvillian at Fock truncation `dim`.
#[pyfunction]
fn liouvillian_eigenvalues(py: Python<'_>, params: &PyModelParams, dim: usize) -> PyResult<Vec<C64>> {
    let p = params.inner;
    py.detach(|| {
        let l = liouville::kerr_cat_liouvillian(&p, dim)?;
        liouville::eigenvalues(&l)
    })
    .map_err(to_py)
}

/// Steady-state density matrix as nested lists.
#[pyfunction]
fn steady_state(py: Python<'_>, params: &PyModelParams, dim: usize) -> PyResult<Vec<Vec<C64>>> {
    let p = params.inner;
    let ss = py
        .detach(|| {
            let l = liouville::kerr_cat_liouvillian(&p, dim)?;
            liouville::steady_state(&l)
        })
        .map_err(to_py)?;
    Ok(rows(ss.matrix()))
}

/// Fock amplitudes of a normalized cat state; `parity` is +1 or -1.
#[pyfunction]
#[pyo3(signature = (alpha, dim, parity = 1))]
fn cat_state(alpha: f64, dim: usize, parity: i32) -> PyResult<Vec<C64>> {
    let parity = match parity {
        1 => Parity::Even,
        -1 => Parity::Odd,
        _ => return Err(PyValueError::new_err("parity must be +1 or -1")),
    };
    Ok(fock::cat_state(alpha, parity, dim).map_err(to_py)?.amplitudes().to_vec())
}

/// Uhlmann fidelity of two density matrices given as nested lists.
#[pyfunction]
fn fidelity(rho: Vec<Vec<C64>>, sigma: Vec<Vec<C64>>) -> PyResult<f64> {
    let to_state = |m: &Vec<Vec<C64>>| -> PyResult<DensityMatrix> {
        let n = m.len();
        if m.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("density matrix must be square"));
        }
        DensityMatrix::new(ComplexMatrix::from_fn(n, n, |i, j| m[i][j])).map_err(to_py)
    };
    dynamics::fidelity(&to_state(&rho)?, &to_state(&sigma)?).map_err(to_py)
}

#[pymodule(name = "kerrcat")]
fn kerrcat_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyCatModel>()?;
    m.add_function(wrap_pyfunction!(resultant_vector, m)?)?;
    m.add_function(wrap_pyfunction!(liouvillian_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(cat_state, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    Ok(())
}
