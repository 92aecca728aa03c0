//! Python bindings. Matrices cross the boundary as lists of rows of
//! complex numbers; anything indexable that way (nested lists, 2-D numpy
//! arrays) is accepted on input.

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use oblique_qr::probe;
use oblique_qr::reflector;
use oblique_qr::{
    Direction, Driver, Error, GsOptions, GsVariant, Matrix, OrthOptions, OrthoBasis,
    SecondPassCoefficients, C64,
};

create_exception!(
    oblique_qr_py,
    LinAlgError,
    PyArithmeticError,
    "A factorization broke down (indefinite matrix, degenerate reflector)."
);

type Rows = Vec<Vec<C64>>;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::NotPositiveDefinite { .. }
        | Error::InitialBasisFailure { .. }
        | Error::DegenerateReflector { .. } => LinAlgError::new_err(err.to_string()),
        Error::Io(_) => PyOSError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn matrix(rows: Rows) -> PyResult<Matrix> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, 0));
    }
    Matrix::from_rows(&rows).map_err(to_py)
}

fn rows(m: &Matrix) -> Rows {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[pyclass(name = "BOperator", module = "oblique_qr_py", frozen)]
struct PyBOperator {
    inner: oblique_qr::BOperator,
}

#[pymethods]
impl PyBOperator {
    /// Wraps an explicit Hermitian positive-definite matrix.
    #[new]
    fn new(b: Rows) -> PyResult<Self> {
        let inner = oblique_qr::BOperator::explicit(matrix(b)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn identity(n: usize) -> Self {
        Self {
            inner: oblique_qr::BOperator::identity(n),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, m: Rows) -> PyResult<Rows> {
        Ok(rows(&self.inner.apply(&matrix(m)?).map_err(to_py)?))
    }

    fn to_dense(&self) -> Rows {
        rows(&self.inner.to_dense())
    }

    fn __repr__(&self) -> String {
        format!("BOperator(dim={})", self.inner.dim())
    }
}

#[pyclass(name = "QRFactorization", module = "oblique_qr_py", frozen)]
struct PyQr {
    inner: oblique_qr::QRFactorization,
}

#[pymethods]
impl PyQr {
    #[getter]
    fn q(&self) -> Rows {
        rows(&self.inner.q)
    }

    #[getter]
    fn r(&self) -> Rows {
        rows(&self.inner.r)
    }

    #[getter]
    fn numerical_rank(&self) -> usize {
        self.inner.numerical_rank
    }

    #[getter]
    fn deflated(&self) -> Vec<bool> {
        self.inner.deflated.clone()
    }

    /// Householder vectors as columns; empty for Gram–Schmidt results.
    #[getter]
    fn reflectors(&self) -> Rows {
        rows(self.inner.reflectors.vectors())
    }

    /// Phase of each reflector, `None` where the column was deflated.
    #[getter]
    fn phases(&self) -> Vec<Option<C64>> {
        self.inner.reflectors.phases().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "QRFactorization(n={}, k={}, rank={})",
            self.inner.q.rows(),
            self.inner.r.cols(),
            self.inner.numerical_rank
        )
    }
}

#[pyfunction]
fn b_inner(x: Vec<C64>, y: Vec<C64>, b: &PyBOperator) -> PyResult<C64> {
    oblique_qr::b_inner(&x, &y, &b.inner).map_err(to_py)
}

#[pyfunction]
fn b_norm(x: Vec<C64>, b: &PyBOperator) -> PyResult<f64> {
    oblique_qr::b_norm(&x, &b.inner).map_err(to_py)
}

#[pyfunction]
fn cholesky(a: Rows) -> PyResult<Rows> {
    Ok(rows(&oblique_qr::dense::cholesky(&matrix(a)?).map_err(to_py)?))
}

#[pyfunction]
fn initial_basis(b: &PyBOperator, k: usize) -> PyResult<Rows> {
    Ok(rows(&oblique_qr::initial_basis(&b.inner, k).map_err(to_py)?))
}

fn parse_driver(name: &str) -> PyResult<Driver> {
    match name {
        "right" | "hh_right" => Ok(Driver::RightLooking),
        "left" | "hh_left" => Ok(Driver::LeftLooking),
        "block" | "hh_block" => Ok(Driver::Blocked),
        _ => Err(PyValueError::new_err(format!(
            "unknown driver '{name}' (expected right, left or block)"
        ))),
    }
}

/// Householder QR of `x` in the B-inner product.
///
/// `u` is a B-orthonormal starting basis; when omitted it is built from
/// the leading block of `b`.
#[pyfunction]
#[pyo3(signature = (x, b, u=None, driver="left", reorth=true, deflation_tol=0.0, panel_width=32))]
#[allow(clippy::too_many_arguments)]
fn householder_qr(
    py: Python<'_>,
    x: Rows,
    b: &PyBOperator,
    u: Option<Rows>,
    driver: &str,
    reorth: bool,
    deflation_tol: f64,
    panel_width: usize,
) -> PyResult<PyQr> {
    let x = matrix(x)?;
    let driver = parse_driver(driver)?;
    let u = match u {
        Some(u) => matrix(u)?,
        None => oblique_qr::initial_basis(&b.inner, x.cols()).map_err(to_py)?,
    };
    let opts = OrthOptions {
        reorth,
        deflation_tol,
        panel_width,
    };
    let b = &b.inner;
    let inner = py
        .detach(|| {
            let basis = OrthoBasis::new(b, u)?;
            oblique_qr::householder_qr(driver, &x, b, &basis, &opts)
        })
        .map_err(to_py)?;
    Ok(PyQr { inner })
}

#[pyfunction]
#[pyo3(signature = (x, b, variant="cgs2", drop_tol=0.0, second_pass="summed"))]
fn gram_schmidt(
    py: Python<'_>,
    x: Rows,
    b: &PyBOperator,
    variant: &str,
    drop_tol: f64,
    second_pass: &str,
) -> PyResult<PyQr> {
    let x = matrix(x)?;
    let variant: GsVariant = variant.parse().map_err(to_py)?;
    let second_pass = match second_pass {
        "summed" => SecondPassCoefficients::Summed,
        "discarded" | "first" => SecondPassCoefficients::Discarded,
        _ => {
            return Err(PyValueError::new_err(format!(
                "unknown second_pass '{second_pass}' (expected summed or discarded)"
            )))
        }
    };
    let opts = GsOptions {
        drop_tol,
        second_pass,
    };
    let b = &b.inner;
    let inner = py
        .detach(|| oblique_qr::gram_schmidt_with(&x, b, variant, &opts))
        .map_err(to_py)?;
    Ok(PyQr { inner })
}

/// Returns `(w, alpha)` with `H v = u alpha` for `H = I - 2 w wᴴ B`.
#[pyfunction]
#[pyo3(signature = (v, u, b, prior=None, reorth=false))]
fn make_reflector(
    v: Vec<C64>,
    u: Vec<C64>,
    b: &PyBOperator,
    prior: Option<Rows>,
    reorth: bool,
) -> PyResult<(Vec<C64>, C64)> {
    let prior = match prior {
        Some(p) => matrix(p)?,
        None => Matrix::zeros(b.inner.dim(), 0),
    };
    reflector::make_reflector(&v, &u, &b.inner, &prior, reorth).map_err(to_py)
}

#[pyfunction]
fn apply_reflector(w: Vec<C64>, b: &PyBOperator, m: Rows) -> PyResult<Rows> {
    Ok(rows(&reflector::apply_reflector(&w, &b.inner, &matrix(m)?).map_err(to_py)?))
}

/// `T` with `H_1 ⋯ H_k = I - 2 W T Wᴴ B` for the columns `W` of `w`.
#[pyfunction]
fn wy_build(w: Rows, b: &PyBOperator) -> PyResult<Rows> {
    Ok(rows(&reflector::wy_build(&matrix(w)?, &b.inner).map_err(to_py)?))
}

#[pyfunction]
#[pyo3(signature = (w, t, b, m, adjoint=false))]
fn wy_apply(w: Rows, t: Rows, b: &PyBOperator, m: Rows, adjoint: bool) -> PyResult<Rows> {
    let direction = if adjoint {
        Direction::Adjoint
    } else {
        Direction::Forward
    };
    let out = reflector::wy_apply(&matrix(w)?, &matrix(t)?, &b.inner, &matrix(m)?, direction)
        .map_err(to_py)?;
    Ok(rows(&out))
}

#[pyfunction]
fn gen_spd(py: Python<'_>, n: usize, log_kappa: f64, seed: u64) -> PyResult<PyBOperator> {
    let inner = py.detach(|| probe::gen_spd(n, log_kappa, seed)).map_err(to_py)?;
    Ok(PyBOperator { inner })
}

#[pyfunction]
fn gen_conditioned(n: usize, k: usize, log_kappa: f64, seed: u64) -> PyResult<Rows> {
    Ok(rows(&probe::gen_conditioned(n, k, log_kappa, seed).map_err(to_py)?))
}

#[pyfunction]
fn build_rank_deficient(x0: Rows) -> PyResult<Rows> {
    Ok(rows(&probe::build_rank_deficient(&matrix(x0)?)))
}

#[pyfunction]
fn loss_of_orthogonality(q: Rows, b: &PyBOperator) -> PyResult<f64> {
    probe::loss_of_orthogonality(&matrix(q)?, &b.inner).map_err(to_py)
}

#[pyfunction]
fn relative_residual(x: Rows, q: Rows, r: Rows) -> PyResult<f64> {
    probe::relative_residual(&matrix(x)?, &matrix(q)?, &matrix(r)?).map_err(to_py)
}

#[pyfunction]
fn matrix_condition(m: Rows) -> PyResult<f64> {
    Ok(probe::matrix_condition(&matrix(m)?))
}

#[pyfunction]
fn spd_condition(py: Python<'_>, b: &PyBOperator) -> f64 {
    let b = &b.inner;
    py.detach(|| probe::spd_condition(b))
}

#[pymodule]
fn oblique_qr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LinAlgError", m.py().get_type::<LinAlgError>())?;
    m.add_class::<PyBOperator>()?;
    m.add_class::<PyQr>()?;
    m.add_function(wrap_pyfunction!(b_inner, m)?)?;
    m.add_function(wrap_pyfunction!(b_norm, m)?)?;
    m.add_function(wrap_pyfunction!(cholesky, m)?)?;
    m.add_function(wrap_pyfunction!(initial_basis, m)?)?;
    m.add_function(wrap_pyfunction!(householder_qr, m)?)?;
    m.add_function(wrap_pyfunction!(gram_schmidt, m)?)?;
    m.add_function(wrap_pyfunction!(make_reflector, m)?)?;
    m.add_function(wrap_pyfunction!(apply_reflector, m)?)?;
    m.add_function(wrap_pyfunction!(wy_build, m)?)?;
    m.add_function(wrap_pyfunction!(wy_apply, m)?)?;
    m.add_function(wrap_pyfunction!(gen_spd, m)?)?;
    m.add_function(wrap_pyfunction!(gen_conditioned, m)?)?;
    m.add_function(wrap_pyfunction!(build_rank_deficient, m)?)?;
    m.add_function(wrap_pyfunction!(loss_of_orthogonality, m)?)?;
    m.add_function(wrap_pyfunction!(relative_residual, m)?)?;
    m.add_function(wrap_pyfunction!(matrix_condition, m)?)?;
    m.add_function(wrap_pyfunction!(spd_condition, m)?)?;
    Ok(())
}
