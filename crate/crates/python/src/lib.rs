use mavaltk::convex::{self, AffinePiece, ConvexFn, Frame, MaxAffine, Quadratic};
use mavaltk::forms::{self, ConstantForm};
use mavaltk::harness::{self, FunctionJson};
use mavaltk::maops::{self, Lebesgue, MongeAmpere, Valuation, Weighted};
use mavaltk::measures::{AxisBox, RadonMeasure};
use mavaltk::{minors, Complex64};
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(mavaltk, MavaltkError, PyValueError);

fn err(e: mavaltk::Error) -> PyErr {
    MavaltkError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(MavaltkError::new_err("matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn region(n: usize, lo: Option<Vec<f64>>, hi: Option<Vec<f64>>, radius: f64) -> PyResult<AxisBox> {
    match (lo, hi) {
        (None, None) => Ok(AxisBox::cube(n, radius)),
        (Some(lo), Some(hi)) => AxisBox::new(lo, hi).map_err(err),
        _ => Err(MavaltkError::new_err("give both lo and hi, or neither")),
    }
}

/// Constant complex differential form on R^n x R^n, indices 1-based.
#[pyclass(name = "Form", module = "mavaltk", frozen)]
#[derive(Clone)]
struct PyForm(ConstantForm);

#[pymethods]
impl PyForm {
    /// `c dx_I ^ dy_J` in the given index order.
    #[new]
    #[pyo3(signature = (n, dx, dy, c = Complex64::new(1.0, 0.0)))]
    fn new(n: usize, dx: Vec<usize>, dy: Vec<usize>, c: Complex64) -> PyResult<Self> {
        ConstantForm::from_word(n, &dx, &dy, c).map(PyForm).map_err(err)
    }

    #[staticmethod]
    fn zero(n: usize) -> PyResult<Self> {
        if n == 0 {
            return Err(MavaltkError::new_err("n must be positive"));
        }
        Ok(PyForm(ConstantForm::zero(n)))
    }

    /// Form whose `Psi` is the k-th Hessian measure.
    #[staticmethod]
    fn hessian(n: usize, k: usize) -> PyResult<Self> {
        minors::hessian_form(n, k).map(PyForm).map_err(err)
    }

    #[staticmethod]
    fn symplectic(n: usize) -> Self {
        PyForm(forms::symplectic_form(n))
    }

    #[staticmethod]
    fn primitive_basis(n: usize, k: usize) -> PyResult<Vec<Self>> {
        forms::primitive_basis(n, k).map(|b| b.into_iter().map(PyForm).collect()).map_err(err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        ConstantForm::from_json(s).map(PyForm).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn bidegree(&self) -> Option<(usize, usize)> {
        self.0.bidegree()
    }

    fn is_primitive(&self) -> PyResult<bool> {
        forms::is_primitive(&self.0).map_err(err)
    }

    /// `(primitive part, remainder)`.
    fn lefschetz_split(&self) -> PyResult<(Self, Self)> {
        let d = forms::lefschetz_project(&self.0).map_err(err)?;
        Ok((PyForm(d.primitive), PyForm(d.remainder)))
    }

    /// `P_tau` at a complex symmetric matrix given as rows.
    fn p(&self, q: Vec<Vec<Complex64>>) -> PyResult<Complex64> {
        let n = q.len();
        let entries = q.into_iter().flatten().collect();
        let m = minors::SymMatrix::new(n, entries).map_err(err)?;
        minors::p_eval(&self.0, &m).map_err(err)
    }

    /// `Q_tau` on a k-tuple of complex vectors.
    fn q(&self, ws: Vec<Vec<Complex64>>) -> PyResult<Complex64> {
        let poly = minors::q_of_form(&self.0).map_err(err)?;
        minors::eval_on_tuple(&poly, &ws).map_err(err)
    }

    /// Left action of `g` in GL(n).
    fn pullback(&self, g: Vec<Vec<f64>>) -> PyResult<Self> {
        forms::gl_pullback(&matrix(&g)?, &self.0).map(PyForm).map_err(err)
    }

    fn wedge(&self, other: &PyForm) -> PyResult<Self> {
        self.0.wedge(&other.0).map(PyForm).map_err(err)
    }

    fn __add__(&self, other: &PyForm) -> PyResult<Self> {
        self.0.add(&other.0).map(PyForm).map_err(err)
    }

    fn __sub__(&self, other: &PyForm) -> PyResult<Self> {
        self.0.sub(&other.0).map(PyForm).map_err(err)
    }

    fn __mul__(&self, c: Complex64) -> Self {
        PyForm(self.0.scale(c))
    }

    fn __rmul__(&self, c: Complex64) -> Self {
        PyForm(self.0.scale(c))
    }

    fn __neg__(&self) -> Self {
        PyForm(self.0.scale_real(-1.0))
    }

    fn __eq__(&self, other: &PyForm) -> bool {
        self.0.approx_eq(&other.0, 1e-12)
    }

    fn __repr__(&self) -> String {
        format!("Form({})", self.0)
    }
}

/// Convex function: max-affine, or C^2 (quadratic, exponential sums, softmax).
#[pyclass(name = "ConvexFunction", module = "mavaltk", frozen)]
#[derive(Clone)]
struct PyConvex(ConvexFn);

#[pymethods]
impl PyConvex {
    /// `max_i <a_i, x> + b_i` from `[(a, b), ..]`.
    #[staticmethod]
    fn max_affine(pieces: Vec<(Vec<f64>, f64)>) -> PyResult<Self> {
        let pieces = pieces.into_iter().map(|(a, b)| AffinePiece { a, b }).collect();
        MaxAffine::new(pieces).map(|f| PyConvex(f.into())).map_err(err)
    }

    /// `h_P(x - shift)` for the hull of `vertices`.
    #[staticmethod]
    #[pyo3(signature = (vertices, shift = None))]
    fn support_function(vertices: Vec<Vec<f64>>, shift: Option<Vec<f64>>) -> PyResult<Self> {
        let n = vertices.first().map(|v| v.len()).unwrap_or(0);
        let x = shift.unwrap_or_else(|| vec![0.0; n]);
        convex::support_function_at(&vertices, &x).map(|f| PyConvex(f.into())).map_err(err)
    }

    /// `1/2 x^T A x + <c, x> + d`.
    #[staticmethod]
    #[pyo3(signature = (a, c = None, d = 0.0))]
    fn quadratic(a: Vec<Vec<f64>>, c: Option<Vec<f64>>, d: f64) -> PyResult<Self> {
        let a = matrix(&a)?;
        let c = c.unwrap_or_else(|| vec![0.0; a.nrows()]);
        Quadratic::new(a, c, d).map(|q| PyConvex(q.into())).map_err(err)
    }

    /// `sum_i exp(-<x_i, y>)`.
    #[staticmethod]
    fn exponentials(xs: Vec<Vec<f64>>) -> PyResult<Self> {
        if xs.is_empty() {
            return Err(MavaltkError::new_err("need at least one exponent"));
        }
        Ok(PyConvex(maops::exp_sum(&xs).into()))
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let j: FunctionJson = serde_json::from_str(s).map_err(|e| MavaltkError::new_err(e.to_string()))?;
        j.to_function().map(PyConvex).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn is_smooth(&self) -> bool {
        self.0.as_smooth().is_some()
    }

    /// Softmax smoothing of a max-affine function at inverse temperature `beta`.
    fn softmax(&self, beta: f64) -> PyResult<Self> {
        let f = self.0.as_max_affine().ok_or_else(|| MavaltkError::new_err("softmax needs a max-affine function"))?;
        if !(beta > 0.0) {
            return Err(MavaltkError::new_err("beta must be positive"));
        }
        Ok(PyConvex(f.softmax(beta).into()))
    }

    fn scale(&self, t: f64) -> Self {
        PyConvex(self.0.scale(t))
    }

    /// `x -> f(x + shift)`.
    fn translate(&self, shift: Vec<f64>) -> Self {
        PyConvex(self.0.translate(&shift))
    }

    fn add_affine(&self, a: Vec<f64>, b: f64) -> Self {
        PyConvex(self.0.add_affine(&a, b))
    }

    /// `x -> f(g x)`.
    fn compose_linear(&self, g: Vec<Vec<f64>>) -> PyResult<Self> {
        self.0.compose_linear(&matrix(&g)?).map(PyConvex).map_err(err)
    }

    fn __add__(&self, other: &PyConvex) -> PyResult<Self> {
        self.0.sum(&other.0).map(PyConvex).map_err(err)
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.0.dim() {
            return Err(MavaltkError::new_err(format!("expected a point in R^{}", self.0.dim())));
        }
        Ok(self.0.eval(&x))
    }

    fn __repr__(&self) -> String {
        let kind = if self.is_smooth() { "smooth" } else { "max-affine" };
        format!("ConvexFunction({kind}, n={})", self.0.dim())
    }
}

/// Complex Radon measure: atoms plus an optional grid density.
#[pyclass(name = "Measure", module = "mavaltk", frozen)]
#[derive(Clone)]
struct PyMeasure(RadonMeasure);

#[pymethods]
impl PyMeasure {
    #[getter]
    fn n(&self) -> usize {
        self.0.dim()
    }

    /// `[(point, mass), ..]`.
    #[getter]
    fn atoms(&self) -> Vec<(Vec<f64>, Complex64)> {
        self.0.atoms().iter().map(|a| (a.point.clone(), a.mass)).collect()
    }

    #[getter]
    fn has_density(&self) -> bool {
        self.0.density().is_some()
    }

    fn total_mass(&self) -> Complex64 {
        self.0.total_mass()
    }

    fn total_variation(&self) -> f64 {
        self.0.total_variation()
    }

    /// Mass of the half-open box `[lo, hi)`.
    fn mass_on_box(&self, lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Complex64> {
        let b = AxisBox::new(lo, hi).map_err(err)?;
        self.0.mass_on_box(&b).map_err(err)
    }

    fn atom_mass_at(&self, x: Vec<f64>, radius: f64) -> Complex64 {
        self.0.atom_mass_at(&x, radius)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0.to_json()).expect("measure serializes")
    }

    fn __add__(&self, other: &PyMeasure) -> PyResult<Self> {
        self.0.add(&other.0).map(PyMeasure).map_err(err)
    }

    fn __sub__(&self, other: &PyMeasure) -> PyResult<Self> {
        self.0.sub(&other.0).map(PyMeasure).map_err(err)
    }

    fn __mul__(&self, c: Complex64) -> Self {
        PyMeasure(self.0.scale(c))
    }

    fn __rmul__(&self, c: Complex64) -> Self {
        PyMeasure(self.0.scale(c))
    }

    fn __repr__(&self) -> String {
        let m = self.0.total_mass();
        format!("Measure(n={}, atoms={}, density={}, total_mass={m})", self.0.dim(), self.0.atoms().len(), self.has_density())
    }
}

fn smooth(f: &PyConvex) -> PyResult<&convex::SmoothConvex> {
    f.0.as_smooth().ok_or_else(|| MavaltkError::new_err("needs a C^2 function"))
}

/// Monge-Ampere measure. Max-affine inputs give Alexandrov atoms in the window,
/// which defaults to a large cube; smooth inputs a density on `[lo, hi)`.
#[pyfunction]
#[pyo3(signature = (f, lo = None, hi = None, grid = 64))]
fn ma(f: &PyConvex, lo: Option<Vec<f64>>, hi: Option<Vec<f64>>, grid: usize) -> PyResult<PyMeasure> {
    let n = f.0.dim();
    let radius = if f.is_smooth() { 1.0 } else { 1e6 };
    let b = region(n, lo, hi, radius)?;
    maops::ma(&f.0, &b, &vec![grid; n]).map(PyMeasure).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (fs, lo = None, hi = None, grid = 64))]
fn mixed_ma(fs: Vec<PyRef<'_, PyConvex>>, lo: Option<Vec<f64>>, hi: Option<Vec<f64>>, grid: usize) -> PyResult<PyMeasure> {
    let n = fs.first().map(|f| f.0.dim()).ok_or_else(|| MavaltkError::new_err("empty function list"))?;
    let radius = if fs[0].is_smooth() { 1.0 } else { 1e6 };
    let b = region(n, lo, hi, radius)?;
    let fs: Vec<ConvexFn> = fs.iter().map(|f| f.0.clone()).collect();
    maops::mixed_ma(&fs, &b, &vec![grid; n]).map(PyMeasure).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (k, f, lo = None, hi = None, grid = 64))]
fn hessian_measure(k: usize, f: &PyConvex, lo: Option<Vec<f64>>, hi: Option<Vec<f64>>, grid: usize) -> PyResult<PyMeasure> {
    let n = f.0.dim();
    let b = region(n, lo, hi, 1.0)?;
    maops::hessian_measure(k, smooth(f)?, &b, &vec![grid; n]).map(PyMeasure).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (tau, f, lo = None, hi = None, grid = 64))]
fn psi_tau(tau: &PyForm, f: &PyConvex, lo: Option<Vec<f64>>, hi: Option<Vec<f64>>, grid: usize) -> PyResult<PyMeasure> {
    let n = f.0.dim();
    let b = region(n, lo, hi, 1.0)?;
    maops::psi_tau(&tau.0, smooth(f)?, &b, &vec![grid; n]).map(PyMeasure).map_err(err)
}

/// Klain function at the span of `vectors` (orthonormalized if needed).
#[pyfunction]
fn klain(tau: &PyForm, vectors: Vec<Vec<f64>>) -> PyResult<Complex64> {
    let frame = Frame::from_spanning(&vectors).map_err(err)?;
    maops::klain(&tau.0, &frame).map_err(err)
}

/// `(value, ball_normalized, volume_ratio)` for `weight * MA` or `weight * vol` at `x`.
#[pyfunction]
#[pyo3(signature = (x, valuation = "ma", weight = Complex64::new(1.0, 0.0), m = 64, grid = 64))]
fn extract_density(x: Vec<f64>, valuation: &str, weight: Complex64, m: usize, grid: usize) -> PyResult<(Complex64, Complex64, f64)> {
    let n = x.len();
    let (region, grid) = (AxisBox::cube(n, 1.0), vec![grid; n]);
    let inner: Box<dyn Valuation> = match valuation {
        "ma" => Box::new(MongeAmpere { region, grid }),
        "lebesgue" => Box::new(Lebesgue { region, grid }),
        other => return Err(MavaltkError::new_err(format!("unknown valuation {other:?}, expected \"ma\" or \"lebesgue\""))),
    };
    let est = maops::extract_density(&Weighted::constant(inner, weight), &x, m).map_err(err)?;
    Ok((est.value, est.ball_normalized, est.volume_ratio))
}

#[pyfunction]
fn primitive_dimension(n: usize, k: usize) -> PyResult<usize> {
    forms::primitive_dimension(n, k).map_err(err)
}

/// Run a named suite and return its report as a JSON string.
#[pyfunction]
#[pyo3(signature = (suite, n = 2, k = 1, seed = None))]
fn run_suite(py: Python<'_>, suite: &str, n: usize, k: usize, seed: Option<u64>) -> PyResult<String> {
    let seed = seed.unwrap_or_else(harness::default_seed);
    let suite = suite.to_owned();
    let report = py
        .detach(move || match suite.as_str() {
            "positivity" => harness::suite_positivity(n, k, seed),
            "classification" => harness::suite_classification(n, seed),
            "equivariance" => harness::suite_equivariance(n, seed),
            "valuation-axioms" | "valuation_axioms" => harness::suite_valuation_axioms(n, seed),
            other => Err(mavaltk::Error::Invalid(format!("unknown suite {other:?}"))),
        })
        .map_err(err)?;
    Ok(report.to_json())
}

#[pymodule]
#[pyo3(name = "mavaltk")]
fn mavaltk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MavaltkError", m.py().get_type::<MavaltkError>())?;
    m.add_class::<PyForm>()?;
    m.add_class::<PyConvex>()?;
    m.add_class::<PyMeasure>()?;
    m.add_function(wrap_pyfunction!(ma, m)?)?;
    m.add_function(wrap_pyfunction!(mixed_ma, m)?)?;
    m.add_function(wrap_pyfunction!(hessian_measure, m)?)?;
    m.add_function(wrap_pyfunction!(psi_tau, m)?)?;
    m.add_function(wrap_pyfunction!(klain, m)?)?;
    m.add_function(wrap_pyfunction!(extract_density, m)?)?;
    m.add_function(wrap_pyfunction!(primitive_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    Ok(())
}
