//! Measure-valued valuations on convex functions.
//!
//! Piecewise-linear inputs go through the Alexandrov construction (atoms at
//! the vertices of the induced subdivision, weighted by the volume of the
//! subdifferential); `C^2` inputs through densities of Hessian polynomials
//! sampled at grid midpoints.

use std::sync::Arc;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::convex::{self, ConvexFn, Frame, MaxAffine, Quadratic, SmoothConvex};
use crate::error::{Error, Result};
use crate::forms::{self, ConstantForm};
use crate::hull;
use crate::measures::{self, AxisBox, GridDensity, RadonMeasure, TestFunction};
use crate::minors::{self, SymMatrix};
use crate::poly::{MultiPoly, VarSpace};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Radius used to read an atom off a measure at a prescribed point.
pub const ATOM_MATCH_RADIUS: f64 = 1e-9;

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Vertices of the polyhedral subdivision of `f`: points where `n + 1` pieces
/// tie at the maximum, merged within [`measures::ATOM_MERGE_TOL`].
pub fn pl_vertices(f: &MaxAffine) -> Vec<Vec<f64>> {
    let f = f.pruned();
    let n = f.dim();
    let pieces = f.pieces();
    let mut out: Vec<Vec<f64>> = Vec::new();
    if pieces.len() < n + 1 {
        return out;
    }
    for subset in (0..pieces.len()).combinations(n + 1) {
        // <a_i, x> - t = -b_i
        let m = DMatrix::from_fn(n + 1, n + 1, |r, c| if c < n { pieces[subset[r]].a[c] } else { -1.0 });
        let rhs = DVector::from_fn(n + 1, |r, _| -pieces[subset[r]].b);
        let Some(sol) = m.clone().lu().solve(&rhs) else { continue };
        if (&m * &sol - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
            continue;
        }
        let x: Vec<f64> = sol.iter().take(n).copied().collect();
        let t = sol[n];
        if f.eval(&x) > t + 1e-9 * (1.0 + t.abs()) {
            continue;
        }
        if !out.iter().any(|v| v.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= measures::ATOM_MERGE_TOL) {
            out.push(x);
        }
    }
    out
}

/// Alexandrov Monge-Ampere measure of a max-affine function: an atom at each
/// vertex of the subdivision inside the half-open `window`, with mass the
/// volume of the convex hull of the active gradients.
pub fn ma_pl(f: &MaxAffine, window: &AxisBox) -> Result<RadonMeasure> {
    let n = f.dim();
    if window.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: window.dim() });
    }
    let f = f.pruned();
    let mut atoms = Vec::new();
    for v in pl_vertices(&f) {
        if !window.contains(&v) {
            continue;
        }
        let t = f.eval(&v);
        let grads: Vec<Vec<f64>> =
            f.active_set(&v, 1e-9 * (1.0 + t.abs())).into_iter().map(|i| f.pieces()[i].a.clone()).collect();
        let vol = hull::hull_volume(&grads);
        if vol > 0.0 {
            atoms.push(measures::Atom { point: v, mass: real(vol) });
        }
    }
    RadonMeasure::from_atoms(n, atoms)
}

fn check_box(f: &SmoothConvex, region: &AxisBox) -> Result<()> {
    if f.dim() != region.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), actual: region.dim() });
    }
    Ok(())
}

/// Grid density `g(D^2 f)` sampled at cell midpoints.
pub fn hessian_density(
    f: &SmoothConvex,
    region: &AxisBox,
    grid: &[usize],
    g: impl Fn(&DMatrix<f64>) -> Complex64,
) -> Result<RadonMeasure> {
    check_box(f, region)?;
    Ok(RadonMeasure::from_density(GridDensity::sample(region, grid, |x| g(&f.hessian(x)))?))
}

/// `det D^2 f` as a grid density.
pub fn ma_c2(f: &SmoothConvex, region: &AxisBox, grid: &[usize]) -> Result<RadonMeasure> {
    hessian_density(f, region, grid, |h| real(h.determinant()))
}

/// Elementary symmetric polynomials `e_0, .., e_n` of the eigenvalues of a
/// square matrix, from the characteristic polynomial (Faddeev-LeVerrier).
pub fn elementary_symmetric(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    // det(s I - m) = sum_j c[j] s^j, c[n] = 1
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for j in 1..=n {
        acc = m * &acc + DMatrix::identity(n, n) * c[n - j + 1];
        c[n - j] = -(m * &acc).trace() / j as f64;
    }
    (0..=n).map(|k| if k % 2 == 0 { c[n - k] } else { -c[n - k] }).collect()
}

/// `k`-th Hessian measure: density `e_k(D^2 f)`.
pub fn hessian_measure(k: usize, f: &SmoothConvex, region: &AxisBox, grid: &[usize]) -> Result<RadonMeasure> {
    let n = f.dim();
    if k > n {
        return Err(Error::DegreeOutOfRange { n, k });
    }
    hessian_density(f, region, grid, |h| real(elementary_symmetric(h)[k]))
}

/// Check that `tau` is a primitive middle-degree form; returns its `k` (`None` for `tau = 0`).
pub fn primitive_degree(tau: &ConstantForm) -> Result<Option<usize>> {
    let Some((_, k)) = forms::middle_bidegree(tau)? else { return Ok(None) };
    if !forms::is_primitive(tau)? {
        return Err(Error::NotPrimitive);
    }
    Ok(Some(k))
}

/// `Psi_tau(f)`: density `P_tau(D^2 f)` for a primitive form `tau`.
pub fn psi_tau(tau: &ConstantForm, f: &SmoothConvex, region: &AxisBox, grid: &[usize]) -> Result<RadonMeasure> {
    if tau.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), actual: tau.dim() });
    }
    if primitive_degree(tau)?.is_none() {
        return hessian_density(f, region, grid, |_| ZERO);
    }
    let p = minors::p_of_form(tau)?;
    hessian_density(f, region, grid, |h| p.eval(&SymMatrix::symmetrized(h).to_vars()))
}

/// Monge-Ampere measure of either representation. Max-affine inputs use the
/// `window` and ignore the grid.
pub fn ma(f: &ConvexFn, region: &AxisBox, grid: &[usize]) -> Result<RadonMeasure> {
    match f {
        ConvexFn::MaxAffine(m) => ma_pl(m, region),
        ConvexFn::Smooth(s) => ma_c2(s, region, grid),
    }
}

/// Inclusion-exclusion polarization
/// `(1/n!) sum_{S} (-1)^{n - |S|} MA(sum_{i in S} f_i)`, exact because
/// `MA(sum lambda_i f_i)` is a homogeneous polynomial of degree `n` in `lambda`.
pub fn mixed_ma(fs: &[ConvexFn], region: &AxisBox, grid: &[usize]) -> Result<RadonMeasure> {
    let n = region.dim();
    if fs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: fs.len() });
    }
    let smooth = matches!(fs[0], ConvexFn::Smooth(_));
    if fs.iter().any(|f| matches!(f, ConvexFn::Smooth(_)) != smooth) {
        return Err(Error::MixedRepresentations);
    }
    if let Some(f) = fs.iter().find(|f| f.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, actual: f.dim() });
    }
    let mut total = if smooth { RadonMeasure::lebesgue(region, grid)?.scale_real(0.0) } else { RadonMeasure::zero(n) };
    for size in 1..=n {
        let sign = if (n - size) % 2 == 0 { 1.0 } else { -1.0 };
        for subset in (0..n).combinations(size) {
            let mut g = fs[subset[0]].clone();
            for &i in &subset[1..] {
                g = g.sum(&fs[i])?;
            }
            total = total.add(&ma(&g, region, grid)?.scale_real(sign))?;
        }
    }
    Ok(total.scale_real(1.0 / factorial(n)))
}

/// Mixed discriminant `D(A_1, .., A_n)` by inclusion-exclusion over determinants.
pub fn mixed_discriminant(mats: &[DMatrix<f64>]) -> Result<f64> {
    let n = mats.len();
    if let Some(m) = mats.iter().find(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::DimensionMismatch { expected: n, actual: m.nrows() });
    }
    let mut total = 0.0;
    for size in 1..=n {
        let sign = if (n - size) % 2 == 0 { 1.0 } else { -1.0 };
        for subset in (0..n).combinations(size) {
            let s = subset.iter().fold(DMatrix::zeros(n, n), |acc, &i| acc + &mats[i]);
            total += sign * s.determinant();
        }
    }
    Ok(total / factorial(n))
}

/// `MA(f[k], Q_1, .., Q_{n-k})`: `f` held in `k` slots, the quadratics in the rest.
pub fn mixed_ma_quadratic_type(
    k: usize,
    f: &SmoothConvex,
    quads: &[Quadratic],
    region: &AxisBox,
    grid: &[usize],
) -> Result<RadonMeasure> {
    let n = f.dim();
    if k > n || quads.len() != n - k {
        return Err(Error::DegreeOutOfRange { n, k });
    }
    let mut args: Vec<ConvexFn> = vec![ConvexFn::Smooth(f.clone()); k];
    args.extend(quads.iter().map(|q| ConvexFn::Smooth(q.to_smooth())));
    mixed_ma(&args, region, grid)
}

/// The density of [`mixed_ma_quadratic_type`] as a polynomial in the entries of
/// `D^2 f`: the same polarization carried out on a symbolic symmetric matrix.
pub fn quadratic_type_density_poly(k: usize, quads: &[Quadratic]) -> Result<MultiPoly> {
    let n = quads.first().map(|q| q.dim()).ok_or(Error::Empty("quadratics"))?;
    let n = if k == 0 { n } else { n.max(k + quads.len()) };
    if quads.len() + k != n || quads.iter().any(|q| q.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n - k, actual: quads.len() });
    }
    let vars = VarSpace::SymMatrix { n };
    let sym = |i: usize, j: usize| MultiPoly::var(vars.clone(), VarSpace::sym_index(n, i, j));
    let mut total = MultiPoly::zero(vars.clone());
    for size in 1..=n {
        let sign = if (n - size) % 2 == 0 { 1.0 } else { -1.0 };
        for subset in (0..n).combinations(size) {
            let copies = subset.iter().filter(|&&s| s < k).count() as f64;
            let constant = subset.iter().filter(|&&s| s >= k).fold(DMatrix::zeros(n, n), |acc, &s| acc + &quads[s - k].a);
            let entries: Vec<Vec<MultiPoly>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let c = MultiPoly::constant(vars.clone(), real(constant[(i, j)]));
                            if copies > 0.0 {
                                sym(i, j).scale(real(copies)).add(&c).expect("same variables")
                            } else {
                                c
                            }
                        })
                        .collect()
                })
                .collect();
            total = total.add(&minors::symbolic_det(&entries)?.scale(real(sign)))?;
        }
    }
    Ok(total.scale(real(1.0 / factorial(n))).pruned(1e-12))
}

/// Symbolic oracle for the mixed discriminant: the coefficient of
/// `l_1 .. l_n` in `det(sum_i l_i A_i)`, divided by `n!`.
pub fn mixed_discriminant_symbolic(mats: &[DMatrix<f64>]) -> Result<f64> {
    let n = mats.len();
    let vars = VarSpace::Named((1..=n).map(|i| format!("l{i}")).collect());
    let entries: Vec<Vec<MultiPoly>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    (0..n).fold(MultiPoly::zero(vars.clone()), |acc, i| {
                        acc.add(&MultiPoly::var(vars.clone(), i).scale(real(mats[i][(r, c)]))).expect("same variables")
                    })
                })
                .collect()
        })
        .collect();
    let det = minors::symbolic_det(&entries)?;
    Ok(det.coefficient(&vec![1; n]).re / factorial(n))
}

/// A measure-valued valuation on convex functions.
pub trait Valuation: Send + Sync {
    fn eval(&self, f: &ConvexFn) -> Result<RadonMeasure>;

    /// Degree of homogeneity, when known.
    fn degree(&self) -> Option<usize> {
        None
    }

    /// Generating form, for `Psi_tau`.
    fn form(&self) -> Option<&ConstantForm> {
        None
    }

    fn name(&self) -> String;
}

/// `MA`, Alexandrov on max-affine inputs inside `region`, `det D^2 f` on smooth ones.
#[derive(Clone, Debug)]
pub struct MongeAmpere {
    pub region: AxisBox,
    pub grid: Vec<usize>,
}

impl Valuation for MongeAmpere {
    fn eval(&self, f: &ConvexFn) -> Result<RadonMeasure> {
        ma(f, &self.region, &self.grid)
    }

    fn degree(&self) -> Option<usize> {
        Some(self.region.dim())
    }

    fn name(&self) -> String {
        "MA".into()
    }
}

/// `f -> vol` restricted to `region`, the degree-0 valuation.
#[derive(Clone, Debug)]
pub struct Lebesgue {
    pub region: AxisBox,
    pub grid: Vec<usize>,
}

impl Valuation for Lebesgue {
    fn eval(&self, f: &ConvexFn) -> Result<RadonMeasure> {
        if f.dim() != self.region.dim() {
            return Err(Error::DimensionMismatch { expected: self.region.dim(), actual: f.dim() });
        }
        RadonMeasure::lebesgue(&self.region, &self.grid)
    }

    fn degree(&self) -> Option<usize> {
        Some(0)
    }

    fn name(&self) -> String {
        "vol".into()
    }
}

fn smooth_only<'a>(f: &'a ConvexFn, what: &str) -> Result<&'a SmoothConvex> {
    f.as_smooth().ok_or_else(|| Error::Unsupported(format!("{what} is implemented for C^2 functions only")))
}

/// `Phi_k`, the `k`-th Hessian measure.
#[derive(Clone, Debug)]
pub struct HessianValuation {
    pub k: usize,
    pub region: AxisBox,
    pub grid: Vec<usize>,
}

impl Valuation for HessianValuation {
    fn eval(&self, f: &ConvexFn) -> Result<RadonMeasure> {
        hessian_measure(self.k, smooth_only(f, "the Hessian measure")?, &self.region, &self.grid)
    }

    fn degree(&self) -> Option<usize> {
        Some(self.k)
    }

    fn name(&self) -> String {
        format!("Phi_{}", self.k)
    }
}

/// `Psi_tau` for a primitive form.
#[derive(Clone, Debug)]
pub struct PsiTau {
    pub tau: ConstantForm,
    pub region: AxisBox,
    pub grid: Vec<usize>,
}

impl PsiTau {
    pub fn new(tau: ConstantForm, region: AxisBox, grid: Vec<usize>) -> Result<Self> {
        primitive_degree(&tau)?;
        Ok(PsiTau { tau, region, grid })
    }
}

impl Valuation for PsiTau {
    fn eval(&self, f: &ConvexFn) -> Result<RadonMeasure> {
        psi_tau(&self.tau, smooth_only(f, "Psi_tau")?, &self.region, &self.grid)
    }

    fn degree(&self) -> Option<usize> {
        forms::middle_bidegree(&self.tau).ok().flatten().map(|(_, k)| k)
    }

    fn form(&self) -> Option<&ConstantForm> {
        Some(&self.tau)
    }

    fn name(&self) -> String {
        format!("Psi[{}]", self.tau)
    }
}

/// Sum of valuations.
pub struct SumValuation(pub Vec<Box<dyn Valuation>>);

impl Valuation for SumValuation {
    fn eval(&self, f: &ConvexFn) -> Result<RadonMeasure> {
        let mut parts = self.0.iter();
        let first = parts.next().ok_or(Error::Empty("sum of valuations"))?.eval(f)?;
        parts.try_fold(first, |acc, v| acc.add(&v.eval(f)?))
    }

    fn degree(&self) -> Option<usize> {
        let d = self.0.first()?.degree()?;
        self.0.iter().all(|v| v.degree() == Some(d)).then_some(d)
    }

    fn name(&self) -> String {
        self.0.iter().map(|v| v.name()).join(" + ")
    }
}

/// `w(x) Psi(f)` for a continuous weight `w`.
pub struct Weighted {
    pub inner: Box<dyn Valuation>,
    pub weight: Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>,
}

impl Weighted {
    pub fn constant(inner: Box<dyn Valuation>, c: Complex64) -> Self {
        Weighted { inner, weight: Arc::new(move |_| c) }
    }
}

impl Valuation for Weighted {
    fn eval(&self, f: &ConvexFn) -> Result<RadonMeasure> {
        Ok(self.inner.eval(f)?.weighted(|x| (self.weight)(x)))
    }

    fn degree(&self) -> Option<usize> {
        self.inner.degree()
    }

    fn name(&self) -> String {
        format!("w * {}", self.inner.name())
    }
}

/// Homogeneous components `Psi_0(f), .., Psi_n(f)` from `Psi(t_j f)` at the
/// nodes `t_j = 0, 1, .., n`, inverting the Vandermonde matrix.
pub fn decompose_homogeneous(psi: &dyn Valuation, f: &ConvexFn) -> Result<Vec<RadonMeasure>> {
    let nodes: Vec<f64> = (0..=f.dim()).map(|j| j as f64).collect();
    decompose_homogeneous_at(psi, f, &nodes)
}

/// As [`decompose_homogeneous`] with caller-chosen distinct nonnegative nodes.
pub fn decompose_homogeneous_at(psi: &dyn Valuation, f: &ConvexFn, nodes: &[f64]) -> Result<Vec<RadonMeasure>> {
    let d = nodes.len();
    if nodes.iter().any(|&t| t < 0.0) {
        return Err(Error::Invalid("convex functions can only be scaled by t >= 0".into()));
    }
    let v = DMatrix::from_fn(d, d, |j, k| nodes[j].powi(k as i32));
    let inv = v.try_inverse().ok_or(Error::Singular)?;
    let values: Vec<RadonMeasure> = nodes.iter().map(|&t| psi.eval(&f.scale(t))).collect::<Result<_>>()?;
    let zero = values[0].scale_real(0.0);
    (0..d)
        .map(|k| (0..d).try_fold(zero.clone(), |acc, j| acc.add(&values[j].scale_real(inv[(k, j)]))))
        .collect()
}

/// Result of [`extract_density`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityEstimate {
    /// Atom of `Psi(h_P(. - x))` at `x`, divided by `vol(P)`.
    pub value: Complex64,
    /// The atom divided by `omega_n` instead, i.e. with the ball volume in place of `vol(P)`.
    pub ball_normalized: Complex64,
    /// `vol(P) / omega_n`.
    pub volume_ratio: f64,
}

/// Density of an `n`-homogeneous valuation at `x`, read off the atom that
/// `Psi` places at `x` for the support function of an `m`-vertex polytope
/// inscribed in the unit ball and centered at `x`.
pub fn extract_density(psi: &dyn Valuation, x: &[f64], m: usize) -> Result<DensityEstimate> {
    let n = x.len();
    if !(1..=3).contains(&n) {
        return Err(Error::Unsupported(format!("ball polytopes are available for n <= 3, got {n}")));
    }
    let p = hull::ball_polytope(n, m);
    let vol = hull::hull_volume(&p);
    let f = ConvexFn::MaxAffine(convex::support_function_at(&p, x)?);
    let atom = psi.eval(&f)?.atom_mass_at(x, ATOM_MATCH_RADIUS);
    let omega = measures::unit_ball_volume(n);
    Ok(DensityEstimate { value: atom / vol, ball_normalized: atom / omega, volume_ratio: vol / omega })
}

/// Klain function of `Psi_tau` at `E = span(frame)`: `P_tau(Pi_E)`.
pub fn klain(tau: &ConstantForm, frame: &Frame) -> Result<Complex64> {
    if frame.ambient_dim() != tau.dim() {
        return Err(Error::DimensionMismatch { expected: tau.dim(), actual: frame.ambient_dim() });
    }
    let Some(k) = primitive_degree(tau)? else { return Ok(ZERO) };
    if frame.k() != k {
        return Err(Error::DimensionMismatch { expected: k, actual: frame.k() });
    }
    minors::p_eval(tau, &SymMatrix::from_real(&frame.projector())?)
}

/// Quadrature cross-check of [`klain`]: integrate `Psi_tau(1/2 |pi_E x|^2)`
/// against `phi_E(pi_E x) phi_perp(pi_perp x)` on a `grid^n` mesh of
/// `[-1, 1]^n` and divide by the product of the two factor integrals.
pub fn klain_quadrature(tau: &ConstantForm, frame: &Frame, grid: usize) -> Result<Complex64> {
    let n = tau.dim();
    if frame.ambient_dim() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: frame.ambient_dim() });
    }
    let k = frame.k();
    let f = Quadratic::homogeneous(frame.projector())?.to_smooth();
    let region = AxisBox::cube(n, 1.0);
    let mu = psi_tau(tau, &f, &region, &vec![grid; n])?;
    let perp = frame.complement();
    let r = 0.5 / (n as f64).sqrt();
    let tent = move |u: &[f64]| u.iter().map(|v| (1.0 - v.abs() / r).max(0.0)).product::<f64>();
    let (fe, fp) = (frame.clone(), perp.clone());
    let phi = TestFunction::real(region, move |x| tent(&fe.coords(x)) * tent(&fp.coords(x)));
    let num = mu.integrate(&phi)?;
    let factor = |d: usize| -> Result<Complex64> {
        if d == 0 {
            return Ok(real(1.0));
        }
        let t = TestFunction::real(AxisBox::cube(d, r), move |u| tent(u));
        measures::fourier_laplace(&t, &vec![ZERO; d], &vec![grid; d])
    };
    Ok(num / (factor(k)? * factor(n - k)?))
}

/// Outcome of [`gw_fourier_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub abs_error: f64,
    pub rel_error: f64,
}

/// `f(y) = sum_i exp(-<x_i, y>)` with analytic derivatives.
pub fn exp_sum(xs: &[Vec<f64>]) -> SmoothConvex {
    let n = xs[0].len();
    let (a, b, c) = (xs.to_vec(), xs.to_vec(), xs.to_vec());
    let e = |x: &[f64], y: &[f64]| (-x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()).exp();
    SmoothConvex::new(
        n,
        Arc::new(move |y| a.iter().map(|x| e(x, y)).sum()),
        Arc::new(move |y| (0..n).map(|r| b.iter().map(|x| -x[r] * e(x, y)).sum()).collect()),
        Some(Arc::new(move |y| {
            DMatrix::from_fn(n, n, |r, s| c.iter().map(|x| x[r] * x[s] * e(x, y)).sum())
        })),
    )
}

/// Compare the polarized Goodey-Weil pairing of `Psi_tau[phi]` on
/// exponentials `exp(-<x_i, .>)` (left side, midpoint rule on a `grid^n` mesh of
/// the support of `phi`) with `((-1)^k / k!) Q_tau(i x) F(phi)[i sum x_j]`
/// (right side, Fourier-Laplace transform on the finer `rhs_grid^n` mesh).
pub fn gw_fourier_check_with(
    tau: &ConstantForm,
    phi: &TestFunction,
    xs: &[Vec<f64>],
    grid: usize,
    rhs_grid: usize,
) -> Result<FourierCheck> {
    let n = tau.dim();
    let k = xs.len();
    if phi.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: phi.dim() });
    }
    if let Some(x) = xs.iter().find(|x| x.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, actual: x.len() });
    }
    if let Some(kk) = primitive_degree(tau)? {
        if kk != k {
            return Err(Error::DimensionMismatch { expected: kk, actual: k });
        }
    }
    let support = phi.support();
    let mut worst: f64 = 0.0;
    for corner in 0..(1usize << n) {
        let y: Vec<f64> = (0..n).map(|a| if corner >> a & 1 == 1 { support.hi[a] } else { support.lo[a] }).collect();
        let total: f64 = xs.iter().map(|x| x.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>()).sum();
        worst = worst.max(total.abs());
        for x in xs {
            worst = worst.max(x.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>().abs());
        }
    }
    if worst > 600.0 {
        return Err(Error::Overflow(worst));
    }

    let region = support.clone();
    let g = vec![grid; n];
    let mut lhs = ZERO;
    for size in 1..=k {
        let sign = if (k - size) % 2 == 0 { 1.0 } else { -1.0 };
        for subset in (0..k).combinations(size) {
            let chosen: Vec<Vec<f64>> = subset.iter().map(|&i| xs[i].clone()).collect();
            lhs += sign * psi_tau(tau, &exp_sum(&chosen), &region, &g)?.integrate(phi)?;
        }
    }
    lhs /= factorial(k);

    let i = Complex64::new(0.0, 1.0);
    let q = if k == 0 { tau.top_base_coefficient() } else {
        let ws: Vec<Vec<Complex64>> = xs.iter().map(|x| x.iter().map(|v| i * v).collect()).collect();
        minors::p_eval(tau, &minors::phi_map(&ws)?)?
    };
    let z: Vec<Complex64> = (0..n).map(|a| i * xs.iter().map(|x| x[a]).sum::<f64>()).collect();
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let rhs = sign / factorial(k) * q * measures::fourier_laplace(phi, &z, &vec![rhs_grid; n])?;
    let abs_error = (lhs - rhs).norm();
    let rel_error = abs_error / lhs.norm().max(rhs.norm()).max(f64::MIN_POSITIVE);
    Ok(FourierCheck { lhs, rhs, abs_error, rel_error })
}

/// [`gw_fourier_check_with`] with the right side on an 8x finer mesh.
pub fn gw_fourier_check(tau: &ConstantForm, phi: &TestFunction, xs: &[Vec<f64>], grid: usize) -> Result<FourierCheck> {
    gw_fourier_check_with(tau, phi, xs, grid, 8 * grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{support_function_at, AffinePiece};
    use crate::minors::hessian_form;

    fn ma1(pieces: &[(f64, f64)]) -> MaxAffine {
        MaxAffine::new(pieces.iter().map(|&(a, b)| AffinePiece { a: vec![a], b }).collect()).unwrap()
    }

    fn square() -> Vec<Vec<f64>> {
        vec![vec![-1.0, -1.0], vec![1.0, -1.0], vec![1.0, 1.0], vec![-1.0, 1.0]]
    }

    #[test]
    fn alexandrov_examples() {
        let w1 = AxisBox::cube(1, 2.0);
        let m = ma_pl(&ma1(&[(1.0, 0.0), (-1.0, 0.0)]), &w1).unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert!((m.atom_mass_at(&[0.0], 1e-12).re - 2.0).abs() < 1e-12);

        let x = vec![0.3, -0.2];
        let f = support_function_at(&square(), &x).unwrap();
        let m = ma_pl(&f, &AxisBox::cube(2, 1.0)).unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert!((m.atom_mass_at(&x, 1e-9).re - 4.0).abs() < 1e-12);

        let aff = MaxAffine::affine(vec![1.0, 2.0], 3.0);
        assert!(ma_pl(&aff, &AxisBox::cube(2, 1.0)).unwrap().is_zero());
    }

    #[test]
    fn window_drops_outside_vertices() {
        let f = support_function_at(&square(), &[3.0, 0.0]).unwrap();
        assert!(ma_pl(&f, &AxisBox::cube(2, 1.0)).unwrap().is_zero());
    }

    #[test]
    fn smooth_examples() {
        let unit = AxisBox::unit(2);
        let half = Quadratic::half_norm_squared(2).to_smooth();
        let m = ma_c2(&half, &unit, &[8, 8]).unwrap();
        assert!((m.mass_on_box(&unit).unwrap().re - 1.0).abs() < 1e-12);

        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let q = Quadratic::homogeneous(a.clone()).unwrap().to_smooth();
        let m = ma_c2(&q, &unit, &[4, 4]).unwrap();
        assert!(m.density().unwrap().values.iter().all(|v| (v.re - a.determinant()).abs() < 1e-12));

        assert!(hessian_measure(0, &half, &unit, &[4, 4]).unwrap().density().unwrap().values.iter().all(|v| v.re == 1.0));
        let h1 = hessian_measure(1, &half, &unit, &[4, 4]).unwrap();
        assert!((h1.mass_on_box(&unit).unwrap().re - 2.0).abs() < 1e-12);
        let h2 = hessian_measure(2, &q, &unit, &[4, 4]).unwrap();
        assert_eq!(h2, m);
    }

    #[test]
    fn radial_function_against_polar_oracle() {
        // f = r^4 / 4: D^2 f has eigenvalues 3 r^2 and r^2, det = 3 r^4; mass of the
        // unit disc is 2 pi int_0^1 3 r^5 dr = pi
        let f = SmoothConvex::new(
            2,
            Arc::new(|x| (x[0] * x[0] + x[1] * x[1]).powi(2) / 4.0),
            Arc::new(|x| {
                let r2 = x[0] * x[0] + x[1] * x[1];
                vec![r2 * x[0], r2 * x[1]]
            }),
            None,
        );
        let region = AxisBox::cube(2, 1.0);
        let m = ma_c2(&f, &region, &[256, 256]).unwrap();
        let disc = TestFunction::real(region, |x| if x[0] * x[0] + x[1] * x[1] < 1.0 { 1.0 } else { 0.0 });
        let got = m.integrate(&disc).unwrap().re;
        assert!((got - std::f64::consts::PI).abs() < 1e-2, "{got}");
        let ring = TestFunction::real(AxisBox::cube(2, 1.0), |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            (1.0 - r).max(0.0)
        });
        // 2 pi int_0^1 3 r^5 (1 - r) dr = 6 pi (1/6 - 1/7)
        let exact = 6.0 * std::f64::consts::PI * (1.0 / 6.0 - 1.0 / 7.0);
        assert!((m.integrate(&ring).unwrap().re - exact).abs() < 1e-3);
    }

    #[test]
    fn elementary_symmetric_matches_minors() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.5, 1.0, 3.0, -1.0, 0.5, -1.0, 1.5]);
        let e = elementary_symmetric(&m);
        let s = SymMatrix::from_real(&m).unwrap();
        for k in 0..=3 {
            assert!((e[k] - s.principal_minor_sum(k).re).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_tau_examples() {
        let region = AxisBox::cube(2, 1.0);
        let q = Quadratic::homogeneous(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap().to_smooth();
        for k in 0..=2 {
            let a = psi_tau(&hessian_form(2, k).unwrap(), &q, &region, &[6, 6]).unwrap();
            let b = hessian_measure(k, &q, &region, &[6, 6]).unwrap();
            for (x, y) in a.density().unwrap().values.iter().zip(&b.density().unwrap().values) {
                assert!((x - y).norm() < 1e-10);
            }
        }
        let tau = ConstantForm::real_monomial(2, &[2], &[1], 1.0).unwrap();
        let half = Quadratic::half_norm_squared(2).to_smooth();
        let m = psi_tau(&tau, &half, &region, &[3, 3]).unwrap();
        assert!(m.density().unwrap().values.iter().all(|v| (v.re + 1.0).abs() < 1e-14));
        assert!(psi_tau(&ConstantForm::zero(2), &half, &region, &[3, 3]).unwrap().is_zero());

        let not_primitive = forms::symplectic_form(2);
        assert!(matches!(psi_tau(&not_primitive, &half, &region, &[3, 3]), Err(Error::NotPrimitive)));
    }

    #[test]
    fn mixed_ma_examples() {
        let region = AxisBox::cube(2, 1.0);
        let grid = [4, 4];
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, -0.2, -0.2, 3.0]);
        let qa = ConvexFn::from(Quadratic::homogeneous(a.clone()).unwrap());
        let qb = ConvexFn::from(Quadratic::homogeneous(b.clone()).unwrap());
        let diag = mixed_ma(&[qa.clone(), qa.clone()], &region, &grid).unwrap();
        let full = ma(&qa, &region, &grid).unwrap();
        for (x, y) in diag.density().unwrap().values.iter().zip(&full.density().unwrap().values) {
            assert!((x - y).norm() < 1e-12);
        }
        let d = mixed_discriminant(&[a.clone(), b.clone()]).unwrap();
        assert!((d - mixed_discriminant_symbolic(&[a.clone(), b.clone()]).unwrap()).abs() < 1e-12);
        let mixed = mixed_ma(&[qa.clone(), qb.clone()], &region, &grid).unwrap();
        assert!(mixed.density().unwrap().values.iter().all(|v| (v.re - d).abs() < 1e-12));

        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 1.5]);
        let a3 = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.3, 0.0, 0.3, 1.0]);
        let mats = vec![a3, c, DMatrix::identity(3, 3)];
        assert!((mixed_discriminant(&mats).unwrap() - mixed_discriminant_symbolic(&mats).unwrap()).abs() < 1e-12);

        let aff = ConvexFn::from(MaxAffine::affine(vec![1.0, -1.0], 0.5).pruned());
        let pl = ConvexFn::from(support_function_at(&square(), &[0.1, 0.2]).unwrap());
        assert!(mixed_ma(&[pl.clone(), aff], &region, &grid).unwrap().total_variation() < 1e-12);
        assert!(matches!(mixed_ma(&[pl, qa], &region, &grid), Err(Error::MixedRepresentations)));
    }

    #[test]
    fn pl_mixed_ma_is_mixed_volume() {
        // MA(h_K, h_L) at the origin is the mixed area V(K, L); for two squares it is 4 s t
        let region = AxisBox::cube(2, 1.0);
        let scaled = |s: f64| square().iter().map(|v| v.iter().map(|c| c * s).collect()).collect::<Vec<Vec<f64>>>();
        let f = ConvexFn::from(support_function_at(&scaled(1.0), &[0.0, 0.0]).unwrap());
        let h = ConvexFn::from(support_function_at(&scaled(0.5), &[0.0, 0.0]).unwrap());
        let m = mixed_ma(&[f, h], &region, &[1, 1]).unwrap();
        assert!((m.atom_mass_at(&[0.0, 0.0], 1e-9).re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_type_examples() {
        let region = AxisBox::cube(2, 1.0);
        let grid = [4, 4];
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = Quadratic::homogeneous(a.clone()).unwrap().to_smooth();
        let half = Quadratic::half_norm_squared(2);
        let m = mixed_ma_quadratic_type(1, &f, &[half.clone()], &region, &grid).unwrap();
        assert!(m.density().unwrap().values.iter().all(|v| (v.re - 0.5 * a.trace()).abs() < 1e-12));
        let m0 = mixed_ma_quadratic_type(0, &f, &[half.clone(), half.clone()], &region, &grid).unwrap();
        assert!(m0.density().unwrap().values.iter().all(|v| (v.re - 1.0).abs() < 1e-12));
        let m2 = mixed_ma_quadratic_type(2, &f, &[], &region, &grid).unwrap();
        assert!(m2.density().unwrap().values.iter().all(|v| (v.re - a.determinant()).abs() < 1e-12));

        let p = quadratic_type_density_poly(1, &[half]).unwrap();
        let tr = minors::elementary_symmetric_poly(2, 1).unwrap().scale(real(0.5));
        assert!(p.approx_eq(&tr, 1e-12));
        assert!(minors::express_in_minors(&p, 1).unwrap().is_in_span());
    }

    #[test]
    fn homogeneous_decomposition() {
        let region = AxisBox::cube(2, 1.0);
        let grid = vec![4, 4];
        let f = ConvexFn::from(Quadratic::homogeneous(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap());
        let ma_v = MongeAmpere { region: region.clone(), grid: grid.clone() };
        let parts = decompose_homogeneous(&ma_v, &f).unwrap();
        assert!(parts[0].total_variation() < 1e-10 && parts[1].total_variation() < 1e-10);
        let whole = ma_v.eval(&f).unwrap();
        assert!(parts[2].sub(&whole).unwrap().total_variation() < 1e-10);

        let sum = SumValuation(vec![
            Box::new(ma_v.clone()),
            Box::new(Lebesgue { region: region.clone(), grid: grid.clone() }),
            Box::new(HessianValuation { k: 1, region: region.clone(), grid: grid.clone() }),
        ]);
        let parts = decompose_homogeneous(&sum, &f).unwrap();
        let leb = RadonMeasure::lebesgue(&region, &grid).unwrap();
        assert!(parts[0].sub(&leb).unwrap().total_variation() < 1e-10);
        let total = parts.iter().skip(1).try_fold(parts[0].clone(), |a, b| a.add(b)).unwrap();
        assert!(total.sub(&sum.eval(&f).unwrap()).unwrap().total_variation() < 1e-8);
    }

    #[test]
    fn density_of_multiples_of_ma() {
        let region = AxisBox::cube(2, 2.0);
        for c in [1.0, 2.5, -1.0] {
            let v = Weighted::constant(Box::new(MongeAmpere { region: region.clone(), grid: vec![1, 1] }), real(c));
            let est = extract_density(&v, &[0.2, -0.4], 64).unwrap();
            assert!((est.value.re - c).abs() < 1e-12);
            assert!(est.volume_ratio < 1.0 && est.volume_ratio > 0.99);
        }
        let weighted = Weighted {
            inner: Box::new(MongeAmpere { region: region.clone(), grid: vec![1, 1] }),
            weight: Arc::new(|x| real(1.0 + x[0] * x[0])),
        };
        let est = extract_density(&weighted, &[0.5, 0.0], 32).unwrap();
        assert!((est.value.re - 1.25).abs() < 1e-12);
    }

    #[test]
    fn klain_examples() {
        for n in 2..=3 {
            for k in 0..=n {
                let tau = hessian_form(n, k).unwrap();
                let frame = Frame::random_seeded(n, k, 7 + k as u64);
                assert!((klain(&tau, &frame).unwrap() - real(1.0)).norm() < 1e-12);
            }
        }
        let tau = ConstantForm::real_monomial(2, &[2], &[1], 1.0).unwrap();
        assert!((klain(&tau, &Frame::coordinate(2, 1)).unwrap() - real(-1.0)).norm() < 1e-14);
        assert!(matches!(klain(&tau, &Frame::coordinate(2, 2)), Err(Error::DimensionMismatch { .. })));

        let frame = Frame::random_seeded(3, 1, 4);
        let tau = crate::forms::primitive_basis(3, 1).unwrap()[2].clone();
        let exact = klain(&tau, &frame).unwrap();
        let quad = klain_quadrature(&tau, &frame, 48).unwrap();
        assert!((exact - quad).norm() < 1e-2 * (1.0 + exact.norm()), "{exact} vs {quad}");
    }

    #[test]
    fn fourier_factorization() {
        let tau = hessian_form(2, 1).unwrap();
        let phi = TestFunction::tent(AxisBox::cube(2, 1.0));
        let c = gw_fourier_check(&tau, &phi, &[vec![0.3, -0.5]], 64).unwrap();
        assert!(c.rel_error < 1e-2, "{c:?}");

        // k = n: Q_tau is c * Gram determinant
        let top = ConstantForm::real_monomial(2, &[], &[1, 2], 1.0).unwrap();
        let xs = vec![vec![0.4, 0.1], vec![-0.2, 0.6]];
        let c = gw_fourier_check(&top, &phi, &xs, 64).unwrap();
        assert!(c.rel_error < 1e-2, "{c:?}");
        let gram = 0.4f64 * 0.6 - 0.1 * (-0.2);
        let z: Vec<Complex64> = vec![Complex64::new(0.0, 0.2), Complex64::new(0.0, 0.7)];
        let expected = 0.5 * gram * gram * measures::fourier_laplace(&phi, &z, &[512, 512]).unwrap();
        assert!((c.rhs - expected).norm() < 1e-12);

        let dep = vec![vec![0.4, 0.1], vec![0.8, 0.2]];
        let c = gw_fourier_check(&top, &phi, &dep, 32).unwrap();
        assert!(c.lhs.norm() < 1e-12 && c.rhs.norm() < 1e-12);

        let far = vec![vec![1e3, 0.0], vec![0.0, 1.0]];
        assert!(matches!(gw_fourier_check(&top, &phi, &far, 8), Err(Error::Overflow(_))));
    }

    #[test]
    fn softmax_converges_to_pl() {
        let f = support_function_at(&square(), &[0.0, 0.0]).unwrap();
        let beta = 200.0;
        let s = f.softmax(beta);
        let r = 12.0 / beta;
        let b = AxisBox::cube(2, r);
        let m = ma_c2(&s, &b, &[96, 96]).unwrap();
        assert!((m.total_mass().re - 4.0).abs() < 0.08, "{}", m.total_mass());
    }
}
