//! Polynomials attached to middle-degree forms.
//!
//! For a form `tau` of bidegree `(n-k, k)`, `P_tau` is the degree-`k`
//! polynomial on symmetric matrices with `F_Q^* tau = P_tau(Q) dx_1 ^ .. ^ dx_n`,
//! where `F_Q(x) = (x, Q x)`. Each basis monomial `dx_I ^ dy_J` contributes
//! a signed minor `det Q[J, I^c]`, so `P_tau` lies in the span `M_k` of the
//! `k x k` minors.
//!
//! `Q_tau` lives on `k`-tuples of vectors and is the pullback of `P_tau`
//! along `Phi(w_1, .., w_k) = sum_i w_i w_i^T`. The iterated Lie derivative
//! `L_{X_1} .. L_{X_k} tau` along the fields `X_j = <w_j, x> sum_l w_{j,l} d/dy_l`
//! gives the same polynomial and is kept as an independent oracle
//! ([`q_lie_oracle`]). With this normalization `Q_tau = P_tau o Phi` exactly.

use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::forms::{self, ConstantForm};
use crate::linalg;
use crate::poly::{MultiPoly, VarSpace};

/// Seed of the evaluation points used by every membership and rank test.
pub const EVAL_SEED: u64 = 0x6d61_7661_6c74_6b31;

/// Relative residual below which a least-squares fit counts as exact.
pub const SPAN_TOL: f64 = 1e-8;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A symmetric `n x n` matrix with real or complex entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    entries: Vec<Complex64>,
}

impl SymMatrix {
    /// Row-major entries; symmetry must hold exactly.
    pub fn new(n: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, actual: entries.len() });
        }
        for i in 0..n {
            for j in 0..i {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::Invalid(format!("entry ({i},{j}) breaks symmetry")));
                }
            }
        }
        Ok(SymMatrix { n, entries })
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: m.ncols() });
        }
        Self::new(n, (0..n * n).map(|t| Complex64::new(m[(t / n, t % n)], 0.0)).collect())
    }

    /// Symmetrize `(m + m^T) / 2`, for Hessians assembled numerically.
    pub fn symmetrized(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let entries = (0..n * n)
            .map(|t| {
                let (i, j) = (t / n, t % n);
                Complex64::new(if i == j { m[(i, i)] } else { 0.5 * (m[(i, j)] + m[(j, i)]) }, 0.0)
            })
            .collect();
        SymMatrix { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix {
            n,
            entries: (0..n * n).map(|t| if t / n == t % n { ONE } else { ZERO }).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.n + j]
    }

    /// Values of the `q_ij` (`i <= j`) variables.
    pub fn to_vars(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.n * (self.n + 1) / 2);
        for i in 0..self.n {
            for j in i..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Real part as a dense matrix.
    pub fn real(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).re)
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.n).map(|i| self.entries[i * self.n..(i + 1) * self.n].to_vec()).collect()
    }

    /// Sum of the principal `k x k` minors (elementary symmetric polynomial of the eigenvalues).
    pub fn principal_minor_sum(&self, k: usize) -> Complex64 {
        (0..self.n)
            .combinations(k)
            .map(|s| {
                let sub: Vec<Vec<Complex64>> =
                    s.iter().map(|&i| s.iter().map(|&j| self.get(i, j)).collect()).collect();
                if k == 0 {
                    ONE
                } else {
                    linalg::det_complex(&sub)
                }
            })
            .sum()
    }
}

/// `P_tau(Q)`: substitute `dy_j -> sum_l Q_jl dx_l`, expand and read off the
/// coefficient of `dx_1 ^ .. ^ dx_n`.
pub fn p_eval(tau: &ConstantForm, q: &SymMatrix) -> Result<Complex64> {
    let n = tau.dim();
    if q.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: q.dim() });
    }
    forms::middle_bidegree(tau)?;
    let images: Vec<ConstantForm> = (0..n).map(|j| ConstantForm::base_one_form(&q.rows()[j])).collect();
    let mut total = ZERO;
    for (mono, c) in tau.terms() {
        let mut acc = ConstantForm::real_monomial(n, &mono.base_indices(), &[], 1.0)?;
        for j in mono.fiber_indices() {
            acc = acc.wedge(&images[j - 1])?;
            if acc.is_empty() {
                break;
            }
        }
        total += c * acc.top_base_coefficient();
    }
    Ok(total)
}

fn permutation_is_odd(word: &[usize]) -> bool {
    let mut inv = 0;
    for a in 0..word.len() {
        for b in a + 1..word.len() {
            if word[a] > word[b] {
                inv += 1;
            }
        }
    }
    inv % 2 == 1
}

/// Symbolic `P_tau` in the entries of a symmetric matrix. Each monomial
/// `dx_I ^ dy_J` becomes `sign(I, I^c) det Q[J, I^c]`.
pub fn p_of_form(tau: &ConstantForm) -> Result<MultiPoly> {
    let n = tau.dim();
    let vars = VarSpace::SymMatrix { n };
    let mut out = MultiPoly::zero(vars.clone());
    if forms::middle_bidegree(tau)?.is_none() {
        return Ok(out);
    }
    for (mono, c) in tau.terms() {
        let base = mono.base_indices();
        let fiber = mono.fiber_indices();
        let rest: Vec<usize> = (1..=n).filter(|i| !base.contains(i)).collect();
        for perm in rest.iter().copied().permutations(rest.len()) {
            // dy_{fiber[m]} contributes dx_{perm[m]} with factor q_{fiber[m], perm[m]}
            let mut word = base.clone();
            word.extend(&perm);
            let sign = if permutation_is_odd(&word) { -1.0 } else { 1.0 };
            let mut exp = vec![0u16; vars.len()];
            for (j, l) in fiber.iter().zip(&perm) {
                exp[VarSpace::sym_index(n, j - 1, l - 1)] += 1;
            }
            out.add_term(exp, c * sign);
        }
    }
    Ok(out)
}

/// `Phi(w_1, .., w_k) = sum_i w_i w_i^T` (bilinear, no conjugation).
pub fn phi_map(ws: &[Vec<Complex64>]) -> Result<SymMatrix> {
    let n = ws.first().map(|w| w.len()).ok_or(Error::Empty("vector tuple"))?;
    let mut entries = vec![ZERO; n * n];
    for w in ws {
        if w.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: w.len() });
        }
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] += w[i] * w[j];
            }
        }
    }
    SymMatrix::new(n, entries)
}

/// `Phi` as polynomials in the coordinates of `k` vectors, one per `q_ij` variable.
fn phi_polynomials(n: usize, k: usize) -> Vec<MultiPoly> {
    let frames = VarSpace::Frames { n, k };
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for a in 0..n {
        for b in a..n {
            let mut p = MultiPoly::zero(frames.clone());
            for i in 0..k {
                let mut e = vec![0u16; frames.len()];
                e[VarSpace::frame_index(n, i, a)] += 1;
                e[VarSpace::frame_index(n, i, b)] += 1;
                p.add_term(e, ONE);
            }
            out.push(p);
        }
    }
    out
}

fn primitive_degree(tau: &ConstantForm) -> Result<Option<usize>> {
    let Some((_, k)) = forms::middle_bidegree(tau)? else { return Ok(None) };
    if !forms::is_primitive(tau)? {
        return Err(Error::NotPrimitive);
    }
    Ok(Some(k))
}

/// `Q_tau = P_tau o Phi` on `(C^n)^k`. Rejects non-primitive forms.
pub fn q_of_form(tau: &ConstantForm) -> Result<MultiPoly> {
    let Some(k) = primitive_degree(tau)? else {
        return Err(Error::Invalid("degree of the zero form is undefined; use q_of_form_with_degree".into()));
    };
    q_of_form_with_degree(tau, k)
}

/// As [`q_of_form`], with the degree given explicitly so that `tau = 0` maps to
/// the zero polynomial on `(C^n)^k`.
pub fn q_of_form_with_degree(tau: &ConstantForm, k: usize) -> Result<MultiPoly> {
    let n = tau.dim();
    if let Some(kk) = primitive_degree(tau)? {
        if kk != k {
            return Err(Error::InadmissibleBidegree { n, base: n - kk, fiber: kk });
        }
    }
    if k == 0 {
        let vars = VarSpace::Frames { n, k: 0 };
        return Ok(MultiPoly::constant(vars, tau.top_base_coefficient()));
    }
    let p = p_of_form(tau)?;
    if p.is_zero() {
        return Ok(MultiPoly::zero(VarSpace::Frames { n, k }));
    }
    p.compose(&phi_polynomials(n, k))
}

/// Evaluate a polynomial on `Frames` variables at a tuple of vectors.
pub fn eval_on_tuple(p: &MultiPoly, ws: &[Vec<Complex64>]) -> Result<Complex64> {
    let VarSpace::Frames { n, k } = *p.vars() else {
        return Err(Error::Invalid("polynomial is not on vector tuples".into()));
    };
    if ws.len() != k || ws.iter().any(|w| w.len() != n) {
        return Err(Error::DimensionMismatch { expected: k, actual: ws.len() });
    }
    let flat: Vec<Complex64> = ws.iter().flatten().copied().collect();
    Ok(p.eval(&flat))
}

/// One Lie derivative `L_X tau = d(i_X tau)` for the constant form `tau` and
/// `X = <w, x> sum_l w_l d/dy_l`.
fn lie_step(tau: &ConstantForm, w: &[Complex64]) -> Result<ConstantForm> {
    let n = tau.dim();
    let dw = ConstantForm::base_one_form(w);
    let mut contracted = ConstantForm::zero(n);
    for (mono, c) in tau.terms() {
        for l in mono.fiber_indices() {
            if let Some((neg, rest)) = mono.contract_fiber(l) {
                let coeff = c * w[l - 1];
                let term = ConstantForm::from_coordinates(n, &[rest], &[if neg { -coeff } else { coeff }]);
                contracted = contracted.add(&term)?;
            }
        }
    }
    // the contraction carries the factor <w, x>; d of it is dw ^ .
    dw.wedge(&contracted)
}

/// Coefficient of `dx_1 ^ .. ^ dx_n` in `L_{X_1} .. L_{X_k} tau`, computed
/// directly with interior products and exterior derivatives.
pub fn q_lie_oracle(tau: &ConstantForm, ws: &[Vec<Complex64>]) -> Result<Complex64> {
    let n = tau.dim();
    let mut acc = tau.clone();
    for w in ws.iter().rev() {
        if w.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: w.len() });
        }
        acc = lie_step(&acc, w)?;
    }
    Ok(acc.top_base_coefficient())
}

fn det_poly(entries: &[Vec<MultiPoly>], vars: &VarSpace) -> MultiPoly {
    let k = entries.len();
    let mut out = MultiPoly::zero(vars.clone());
    for perm in (0..k).permutations(k) {
        let sign = if permutation_is_odd(&perm) { -ONE } else { ONE };
        let mut term = MultiPoly::constant(vars.clone(), sign);
        for (r, &c) in perm.iter().enumerate() {
            term = term.mul(&entries[r][c]).expect("same variables");
        }
        out = out.add(&term).expect("same variables");
    }
    out
}

/// Symbolic determinant of a square matrix of polynomials.
pub fn symbolic_det(entries: &[Vec<MultiPoly>]) -> Result<MultiPoly> {
    let vars = entries
        .first()
        .and_then(|r| r.first())
        .map(|p| p.vars().clone())
        .ok_or(Error::Empty("matrix"))?;
    if entries.iter().any(|r| r.len() != entries.len()) {
        return Err(Error::Invalid("matrix is not square".into()));
    }
    Ok(det_poly(entries, &vars))
}

/// Spanning set of a minor space together with its numeric rank.
#[derive(Clone, Debug)]
pub struct MinorBasis {
    pub polys: Vec<MultiPoly>,
    /// Row and column index sets (1-based) of each generator; for products of
    /// frame minors the two row sets.
    pub labels: Vec<(Vec<usize>, Vec<usize>)>,
    pub rank: usize,
}

fn sym_minor(n: usize, rows: &[usize], cols: &[usize]) -> MultiPoly {
    let vars = VarSpace::SymMatrix { n };
    let entries: Vec<Vec<MultiPoly>> = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| MultiPoly::var(vars.clone(), VarSpace::sym_index(n, i, j))).collect())
        .collect();
    det_poly(&entries, &vars)
}

/// Minors `det A[I, J]` of a symmetric `n x n` matrix, `|I| = |J| = k`, with
/// the duplicates `det A[I, J] = det A[J, I]` collapsed.
pub fn minor_basis(n: usize, k: usize) -> Result<MinorBasis> {
    if k == 0 || k > n {
        return Err(Error::DegreeOutOfRange { n, k });
    }
    let subsets: Vec<Vec<usize>> = (0..n).combinations(k).collect();
    let mut polys = Vec::new();
    let mut labels = Vec::new();
    for a in 0..subsets.len() {
        for b in a..subsets.len() {
            polys.push(sym_minor(n, &subsets[a], &subsets[b]));
            labels.push((one_based(&subsets[a]), one_based(&subsets[b])));
        }
    }
    let rank = span_rank(&polys);
    Ok(MinorBasis { polys, labels, rank })
}

fn one_based(s: &[usize]) -> Vec<usize> {
    s.iter().map(|i| i + 1).collect()
}

/// The `k x k` minors `Delta_alpha` of the `n x k` matrix `[w_1 .. w_k]`.
pub fn frame_minors(n: usize, k: usize) -> Result<Vec<(Vec<usize>, MultiPoly)>> {
    if k == 0 || k > n {
        return Err(Error::DegreeOutOfRange { n, k });
    }
    let vars = VarSpace::Frames { n, k };
    Ok((0..n)
        .combinations(k)
        .map(|rows| {
            let entries: Vec<Vec<MultiPoly>> = rows
                .iter()
                .map(|&l| (0..k).map(|i| MultiPoly::var(vars.clone(), VarSpace::frame_index(n, i, l))).collect())
                .collect();
            (one_based(&rows), det_poly(&entries, &vars))
        })
        .collect())
}

/// Products `Delta_alpha Delta_beta` (`alpha <= beta`) spanning `M^2_k`.
pub fn minor_product_basis(n: usize, k: usize) -> Result<MinorBasis> {
    let minors = frame_minors(n, k)?;
    let mut polys = Vec::new();
    let mut labels = Vec::new();
    for a in 0..minors.len() {
        for b in a..minors.len() {
            polys.push(minors[a].1.mul(&minors[b].1)?);
            labels.push((minors[a].0.clone(), minors[b].0.clone()));
        }
    }
    let rank = span_rank(&polys);
    Ok(MinorBasis { polys, labels, rank })
}

/// Seeded Gaussian evaluation points for polynomials on `nvars` variables.
pub fn evaluation_points(nvars: usize, count: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..nvars).map(|_| Complex64::new(rng.sample(StandardNormal), 0.0)).collect())
        .collect()
}

fn evaluation_matrix(polys: &[MultiPoly], points: &[Vec<Complex64>]) -> DMatrix<f64> {
    // polynomials with real coefficients only; complex ones are split by callers
    DMatrix::from_fn(points.len(), polys.len(), |r, c| polys[c].eval(&points[r]).re)
}

/// Numeric rank of the span of real-coefficient polynomials, from random evaluations.
pub fn span_rank(polys: &[MultiPoly]) -> usize {
    let Some(first) = polys.first() else { return 0 };
    let points = evaluation_points(first.nvars(), 2 * polys.len() + 8, EVAL_SEED);
    linalg::svd_rank(&evaluation_matrix(polys, &points), 1e-9)
}

/// Outcome of a least-squares membership test.
#[derive(Clone, Debug, PartialEq)]
pub enum SpanMembership {
    InSpan { coefficients: Vec<Complex64>, residual: f64 },
    NotInSpan { residual: f64 },
}

impl SpanMembership {
    pub fn coefficients(&self) -> Option<&[Complex64]> {
        match self {
            SpanMembership::InSpan { coefficients, .. } => Some(coefficients),
            SpanMembership::NotInSpan { .. } => None,
        }
    }

    pub fn is_in_span(&self) -> bool {
        matches!(self, SpanMembership::InSpan { .. })
    }

    pub fn residual(&self) -> f64 {
        match self {
            SpanMembership::InSpan { residual, .. } | SpanMembership::NotInSpan { residual } => *residual,
        }
    }
}

/// Least-squares fit of `p` against real-coefficient generators on seeded points.
pub fn fit_in_span(p: &MultiPoly, generators: &[MultiPoly]) -> Result<SpanMembership> {
    if generators.iter().any(|g| g.vars() != p.vars()) {
        return Err(Error::Invalid("generators and target live on different variables".into()));
    }
    if generators.is_empty() {
        return Ok(if p.is_zero() {
            SpanMembership::InSpan { coefficients: vec![], residual: 0.0 }
        } else {
            SpanMembership::NotInSpan { residual: 1.0 }
        });
    }
    let points = evaluation_points(p.nvars(), 2 * generators.len() + 8, EVAL_SEED ^ 0x5a5a);
    let a = evaluation_matrix(generators, &points);
    let b: Vec<Complex64> = points.iter().map(|x| p.eval(x)).collect();
    let (coefficients, residual) = linalg::lstsq_complex(&a, &b);
    Ok(if residual <= SPAN_TOL {
        SpanMembership::InSpan { coefficients, residual }
    } else {
        SpanMembership::NotInSpan { residual }
    })
}

/// Express `p` in the minors: `M_k` for polynomials on symmetric matrices
/// (generators from [`minor_basis`]) or `M^2_k` for polynomials on `k`-tuples
/// (generators from [`minor_product_basis`]). A degree mismatch is `NotInSpan`.
pub fn express_in_minors(p: &MultiPoly, k: usize) -> Result<SpanMembership> {
    let (basis, degree) = match *p.vars() {
        VarSpace::SymMatrix { n } => (minor_basis(n, k)?, k),
        VarSpace::Frames { n, k: kk } => {
            if kk != k {
                return Err(Error::DimensionMismatch { expected: k, actual: kk });
            }
            (minor_product_basis(n, k)?, 2 * k)
        }
        VarSpace::Named(_) => return Err(Error::Invalid("express_in_minors needs matrix or tuple variables".into())),
    };
    if !p.is_homogeneous(degree) {
        return Ok(SpanMembership::NotInSpan { residual: f64::INFINITY });
    }
    fit_in_span(p, &basis.polys)
}

/// The unique primitive form with `P_tau = p`, for `p` in `M_k`.
pub fn form_from_minors(p: &MultiPoly) -> Result<ConstantForm> {
    let VarSpace::SymMatrix { n } = *p.vars() else {
        return Err(Error::Invalid("expected a polynomial on symmetric matrices".into()));
    };
    let Some(k) = p.degree() else { return Ok(ConstantForm::zero(n)) };
    if !p.is_homogeneous(k) || k > n {
        return Err(Error::NotInSpan);
    }
    let basis = forms::primitive_basis(n, k)?;
    let images: Vec<MultiPoly> = basis.iter().map(p_of_form).collect::<Result<_>>()?;
    solve_in_form_basis(n, &basis, &images, p)
}

/// The unique primitive form with `Q_tau = q`, for `q` in `M^2_k`.
pub fn form_from_q(q: &MultiPoly) -> Result<ConstantForm> {
    let VarSpace::Frames { n, k } = *q.vars() else {
        return Err(Error::Invalid("expected a polynomial on vector tuples".into()));
    };
    if q.is_zero() {
        return Ok(ConstantForm::zero(n));
    }
    let basis = forms::primitive_basis(n, k)?;
    let images: Vec<MultiPoly> = basis.iter().map(|b| q_of_form_with_degree(b, k)).collect::<Result<_>>()?;
    solve_in_form_basis(n, &basis, &images, q)
}

fn solve_in_form_basis(
    n: usize,
    basis: &[ConstantForm],
    images: &[MultiPoly],
    target: &MultiPoly,
) -> Result<ConstantForm> {
    if span_rank(images) != basis.len() {
        // the map from primitive forms is injective; a rank drop is a numerical failure
        return Err(Error::Singular);
    }
    let fit = fit_in_span(target, images)?;
    let coeffs = fit.coefficients().ok_or(Error::NotInSpan)?;
    let mut out = ConstantForm::zero(n);
    for (b, c) in basis.iter().zip(coeffs) {
        out = out.add(&b.scale(*c))?;
    }
    let scale = out.max_abs_coefficient();
    Ok(clean_coefficients(&out.pruned(1e-12 * scale)))
}

// Snap coefficients within 1e-12 of a multiple of 1/24 so exact forms
// reproduce exactly; leaves generic values untouched.
fn clean_coefficients(f: &ConstantForm) -> ConstantForm {
    let snap = |x: f64| {
        let r = (x * 24.0).round() / 24.0;
        if (x - r).abs() < 1e-12 * x.abs().max(1.0) { r } else { x }
    };
    let mut out = ConstantForm::zero(f.dim());
    for (m, c) in f.terms() {
        out.add_term(*m, Complex64::new(snap(c.re), snap(c.im)));
    }
    out
}

/// Sum of the principal `k x k` minors as a polynomial.
pub fn elementary_symmetric_poly(n: usize, k: usize) -> Result<MultiPoly> {
    if k > n {
        return Err(Error::DegreeOutOfRange { n, k });
    }
    let vars = VarSpace::SymMatrix { n };
    if k == 0 {
        return Ok(MultiPoly::constant(vars, ONE));
    }
    let mut out = MultiPoly::zero(vars);
    for s in (0..n).combinations(k) {
        out = out.add(&sym_minor(n, &s, &s))?;
    }
    Ok(out)
}

/// The primitive form whose polynomial is the sum of principal `k`-minors;
/// it generates the `k`-th Hessian measure.
pub fn hessian_form(n: usize, k: usize) -> Result<ConstantForm> {
    if k == 0 {
        let all: Vec<usize> = (1..=n).collect();
        return ConstantForm::real_monomial(n, &all, &[], 1.0);
    }
    form_from_minors(&elementary_symmetric_poly(n, k)?)
}

/// One summand `coefficient * (sum_alpha c_alpha Delta_alpha)^2`.
#[derive(Clone, Debug)]
pub struct SquareTerm {
    pub coefficient: Complex64,
    /// `(alpha, c_alpha)` pairs; `alpha` is a 1-based row set.
    pub combination: Vec<(Vec<usize>, f64)>,
}

/// Write `q` in `M^2_k` as a sum of multiples of squares of minor combinations,
/// using `Delta_a Delta_b = 1/4 (Delta_a + Delta_b)^2 - 1/4 (Delta_a - Delta_b)^2`.
pub fn nonneg_decomposition(q: &MultiPoly) -> Result<Vec<SquareTerm>> {
    let VarSpace::Frames { n, k } = *q.vars() else {
        return Err(Error::Invalid("expected a polynomial on vector tuples".into()));
    };
    let basis = minor_product_basis(n, k)?;
    let fit = express_in_minors(q, k)?;
    let coeffs = fit.coefficients().ok_or(Error::NotInSpan)?;
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut out = Vec::new();
    for ((a, b), c) in basis.labels.iter().zip(coeffs) {
        if c.norm() <= 1e-13 * scale {
            continue;
        }
        if a == b {
            out.push(SquareTerm { coefficient: *c, combination: vec![(a.clone(), 1.0)] });
        } else {
            out.push(SquareTerm { coefficient: c * 0.25, combination: vec![(a.clone(), 1.0), (b.clone(), 1.0)] });
            out.push(SquareTerm { coefficient: -c * 0.25, combination: vec![(a.clone(), 1.0), (b.clone(), -1.0)] });
        }
    }
    Ok(out)
}

/// Re-expand a square decomposition on `(C^n)^k`.
pub fn expand_squares(n: usize, k: usize, terms: &[SquareTerm]) -> Result<MultiPoly> {
    let minors = frame_minors(n, k)?;
    let vars = VarSpace::Frames { n, k };
    let mut out = MultiPoly::zero(vars.clone());
    for t in terms {
        let mut lin = MultiPoly::zero(vars.clone());
        for (alpha, c) in &t.combination {
            let m = minors
                .iter()
                .find(|(rows, _)| rows == alpha)
                .ok_or_else(|| Error::Invalid(format!("unknown minor {alpha:?}")))?;
            lin = lin.add(&m.1.scale(Complex64::new(*c, 0.0)))?;
        }
        out = out.add(&lin.mul(&lin)?.scale(t.coefficient))?;
    }
    Ok(out)
}
