//! Constant complex differential forms on `R^n x (R^n)^*`.
//!
//! A basis monomial is `dx_I ^ dy_J`, always stored in canonical order: the
//! `dx` block first, then the `dy` block, each ascending. Indices are 1-based
//! at the public boundary (`dx_1 .. dx_n`) and stored as bitmasks internally.
//!
//! The symplectic form is `omega_s = sum_i dx_i ^ dy_i`. The linear group acts by
//! `gl_pullback(g, tau) = (g#)^* tau` where `g#(x, y) = (g^{-1} x, g^T y)`,
//! so `dx` transforms by `g^{-1}` and `dy` by `g^T`. This is a left action:
//! `gl_pullback(g h, tau) == gl_pullback(g, gl_pullback(h, tau))`.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Largest supported ambient dimension (indices live in a `u16` mask).
pub const MAX_DIM: usize = 16;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `dx_I ^ dy_J` in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FormMonomial {
    dx: u16,
    dy: u16,
}

/// Sign of merging two strictly increasing index words into one, or `None`
/// when they share an index.
fn merge_sign(a: u16, b: u16) -> Option<bool> {
    if a & b != 0 {
        return None;
    }
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        inversions += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    Some(inversions % 2 == 1)
}

fn mask_from(indices: &[usize]) -> Option<(u16, bool)> {
    // Returns the mask and the parity of sorting `indices`, None on repeats.
    let mut mask = 0u16;
    let mut negative = false;
    for &i in indices {
        if i == 0 || i > MAX_DIM {
            return None;
        }
        let bit = 1u16 << (i - 1);
        if mask & bit != 0 {
            return None;
        }
        negative ^= (mask >> i).count_ones() % 2 == 1;
        mask |= bit;
    }
    Some((mask, negative))
}

fn indices_of(mask: u16) -> Vec<usize> {
    (0..16).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).collect()
}

impl FormMonomial {
    /// Canonical monomial from strictly increasing 1-based index lists.
    pub fn new(dx: &[usize], dy: &[usize]) -> Result<Self> {
        for w in [dx, dy] {
            if !w.windows(2).all(|p| p[0] < p[1]) {
                return Err(Error::Invalid(format!("indices {w:?} not strictly increasing")));
            }
        }
        let (dx, _) = mask_from(dx).ok_or_else(|| Error::Invalid("bad dx index".into()))?;
        let (dy, _) = mask_from(dy).ok_or_else(|| Error::Invalid("bad dy index".into()))?;
        Ok(FormMonomial { dx, dy })
    }

    pub(crate) fn from_masks(dx: u16, dy: u16) -> Self {
        FormMonomial { dx, dy }
    }

    pub fn base_indices(&self) -> Vec<usize> {
        indices_of(self.dx)
    }

    pub fn fiber_indices(&self) -> Vec<usize> {
        indices_of(self.dy)
    }

    /// `(|I|, |J|)`.
    pub fn bidegree(&self) -> (usize, usize) {
        (self.dx.count_ones() as usize, self.dy.count_ones() as usize)
    }

    pub fn degree(&self) -> usize {
        (self.dx.count_ones() + self.dy.count_ones()) as usize
    }

    fn max_index(&self) -> usize {
        16 - (self.dx | self.dy).leading_zeros() as usize
    }

    /// Canonical product `self ^ other` with its sign, or `None` if it vanishes.
    pub fn wedge(&self, other: &FormMonomial) -> Option<(bool, FormMonomial)> {
        // word: dx_a dy_a dx_b dy_b; move dx_b left past dy_a first
        let mut negative = (self.dy.count_ones() * other.dx.count_ones()) % 2 == 1;
        negative ^= merge_sign(self.dx, other.dx)?;
        negative ^= merge_sign(self.dy, other.dy)?;
        Some((negative, FormMonomial { dx: self.dx | other.dx, dy: self.dy | other.dy }))
    }

    /// Interior product with `d/dy_l` (1-based): the sign and the monomial
    /// with `dy_l` removed, or `None` when `dy_l` is absent.
    pub fn contract_fiber(&self, l: usize) -> Option<(bool, FormMonomial)> {
        let bit = 1u16 << (l - 1);
        if self.dy & bit == 0 {
            return None;
        }
        let position = self.dx.count_ones() + (self.dy & (bit - 1)).count_ones();
        Some((position % 2 == 1, FormMonomial { dx: self.dx, dy: self.dy & !bit }))
    }
}

impl fmt::Display for FormMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .base_indices()
            .iter()
            .map(|i| format!("dx{i}"))
            .chain(self.fiber_indices().iter().map(|j| format!("dy{j}")))
            .collect();
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("^"))
        }
    }
}

/// A constant complex form on `R^n x (R^n)^*`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantForm {
    n: usize,
    terms: BTreeMap<FormMonomial, Complex64>,
}

impl ConstantForm {
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_DIM, "dimension {n} unsupported");
        ConstantForm { n, terms: BTreeMap::new() }
    }

    /// The constant 0-form `c`.
    pub fn scalar(n: usize, c: Complex64) -> Self {
        let mut f = Self::zero(n);
        f.add_term(FormMonomial::from_masks(0, 0), c);
        f
    }

    pub fn monomial(n: usize, dx: &[usize], dy: &[usize], c: Complex64) -> Result<Self> {
        let m = FormMonomial::new(dx, dy)?;
        if m.max_index() > n {
            return Err(Error::IndexOutOfRange { index: m.max_index(), n });
        }
        let mut f = Self::zero(n);
        f.add_term(m, c);
        Ok(f)
    }

    /// Monomial with real coefficient.
    pub fn real_monomial(n: usize, dx: &[usize], dy: &[usize], c: f64) -> Result<Self> {
        Self::monomial(n, dx, dy, Complex64::new(c, 0.0))
    }

    /// Wedge of `dx_i` (in the given order, sign applied) and `dy_j`.
    pub fn from_word(n: usize, dx: &[usize], dy: &[usize], c: Complex64) -> Result<Self> {
        let Some((mx, sx)) = mask_from(dx) else { return Ok(Self::zero(n)) };
        let Some((my, sy)) = mask_from(dy) else { return Ok(Self::zero(n)) };
        let m = FormMonomial::from_masks(mx, my);
        if m.max_index() > n {
            return Err(Error::IndexOutOfRange { index: m.max_index(), n });
        }
        let mut f = Self::zero(n);
        f.add_term(m, if sx ^ sy { -c } else { c });
        Ok(f)
    }

    pub fn dx(n: usize, i: usize) -> Result<Self> {
        Self::real_monomial(n, &[i], &[], 1.0)
    }

    pub fn dy(n: usize, i: usize) -> Result<Self> {
        Self::real_monomial(n, &[], &[i], 1.0)
    }

    /// 1-form `sum_i a_i dx_i`.
    pub fn base_one_form(coeffs: &[Complex64]) -> Self {
        let mut f = Self::zero(coeffs.len());
        for (i, &c) in coeffs.iter().enumerate() {
            f.add_term(FormMonomial::from_masks(1 << i, 0), c);
        }
        f
    }

    /// 1-form `sum_i b_i dy_i`.
    pub fn fiber_one_form(coeffs: &[Complex64]) -> Self {
        let mut f = Self::zero(coeffs.len());
        for (i, &c) in coeffs.iter().enumerate() {
            f.add_term(FormMonomial::from_masks(0, 1 << i), c);
        }
        f
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FormMonomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &FormMonomial) -> Complex64 {
        self.terms.get(m).copied().unwrap_or(ZERO)
    }

    /// Coefficient of `dx_1 ^ ... ^ dx_n`.
    pub fn top_base_coefficient(&self) -> Complex64 {
        let all = ((1u32 << self.n) - 1) as u16;
        self.coefficient(&FormMonomial::from_masks(all, 0))
    }

    pub(crate) fn add_term(&mut self, m: FormMonomial, c: Complex64) {
        if c == ZERO {
            return;
        }
        let entry = self.terms.entry(m).or_insert(ZERO);
        *entry += c;
        if *entry == ZERO {
            self.terms.remove(&m);
        }
    }

    /// Drop coefficients with modulus at most `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        ConstantForm {
            n: self.n,
            terms: self.terms.iter().filter(|(_, c)| c.norm() > tol).map(|(m, c)| (*m, *c)).collect(),
        }
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `Some((|I|, |J|))` when every term shares one bidegree; `None` for the
    /// zero form or mixed bidegrees.
    pub fn bidegree(&self) -> Option<(usize, usize)> {
        let mut it = self.terms.keys().map(|m| m.bidegree());
        let first = it.next()?;
        it.all(|b| b == first).then_some(first)
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: other.n });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, *c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            out.add_term(*m, c * s);
        }
        out
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Exterior product.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let mut out = Self::zero(self.n);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if let Some((neg, m)) = ma.wedge(mb) {
                    let c = ca * cb;
                    out.add_term(m, if neg { -c } else { c });
                }
            }
        }
        Ok(out)
    }

    /// Coefficient vector over an ordered monomial basis.
    pub fn coordinates(&self, basis: &[FormMonomial]) -> Vec<Complex64> {
        basis.iter().map(|m| self.coefficient(m)).collect()
    }

    pub fn from_coordinates(n: usize, basis: &[FormMonomial], coords: &[Complex64]) -> Self {
        let mut out = Self::zero(n);
        for (m, c) in basis.iter().zip(coords) {
            out.add_term(*m, *c);
        }
        out
    }

    /// Coefficient-wise comparison with tolerance relative to the larger form.
    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        if self.n != other.n {
            return false;
        }
        let scale = self.max_abs_coefficient().max(other.max_abs_coefficient()).max(1.0);
        match self.sub(other) {
            Ok(d) => d.max_abs_coefficient() <= rel_tol * scale,
            Err(_) => false,
        }
    }
}

impl fmt::Display for ConstantForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| {
                if c.im == 0.0 {
                    format!("{}*{}", c.re, m)
                } else {
                    format!("({}{:+}i)*{}", c.re, c.im, m)
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// `omega_s = sum_i dx_i ^ dy_i`.
pub fn symplectic_form(n: usize) -> ConstantForm {
    let mut f = ConstantForm::zero(n);
    for i in 0..n {
        f.add_term(FormMonomial::from_masks(1 << i, 1 << i), Complex64::new(1.0, 0.0));
    }
    f
}

/// All canonical monomials of bidegree `(p, q)` on `R^n`, in a fixed order.
pub fn bidegree_basis(n: usize, p: usize, q: usize) -> Vec<FormMonomial> {
    let subsets = |size: usize| -> Vec<u16> {
        (0..n)
            .combinations(size)
            .map(|c| c.iter().fold(0u16, |m, &i| m | (1 << i)))
            .collect()
    };
    let xs = subsets(p);
    let ys = subsets(q);
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &x in &xs {
        for &y in &ys {
            out.push(FormMonomial::from_masks(x, y));
        }
    }
    out
}

fn binomial(n: usize, k: isize) -> usize {
    if k < 0 || k as usize > n {
        return 0;
    }
    let k = k as usize;
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// `C(n,k)^2 - C(n,k-1) C(n,n-k-1)`.
pub fn primitive_dimension(n: usize, k: usize) -> Result<usize> {
    if k > n {
        return Err(Error::DegreeOutOfRange { n, k });
    }
    let (ni, ki) = (n as isize, k as isize);
    Ok(binomial(n, ki).pow(2) - binomial(n, ki - 1) * binomial(n, ni - ki - 1))
}

/// Matrix of `tau -> omega_s ^ tau` from bidegree `(p, q)` to `(p+1, q+1)`
/// in the canonical monomial bases.
pub fn lefschetz_matrix(n: usize, p: usize, q: usize) -> DMatrix<f64> {
    let src = bidegree_basis(n, p, q);
    let dst = if p < n && q < n { bidegree_basis(n, p + 1, q + 1) } else { Vec::new() };
    let omega = symplectic_form(n);
    let mut m = DMatrix::zeros(dst.len(), src.len());
    for (c, mono) in src.iter().enumerate() {
        let f = ConstantForm::from_coordinates(n, &[*mono], &[Complex64::new(1.0, 0.0)]);
        let image = omega.wedge(&f).expect("same dimension");
        for (r, target) in dst.iter().enumerate() {
            m[(r, c)] = image.coefficient(target).re;
        }
    }
    m
}

/// Dimension of the kernel of `omega_s ^ .` on bidegree `(n-k, k)`.
pub fn lefschetz_kernel_dimension(n: usize, k: usize) -> Result<usize> {
    if k > n {
        return Err(Error::DegreeOutOfRange { n, k });
    }
    if n == 0 {
        // only the constants, and omega_s = 0
        return Ok(1);
    }
    let m = lefschetz_matrix(n, n - k, k);
    Ok(m.ncols() - linalg_rank_exact(&m))
}

fn linalg_rank_exact(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 {
        return 0;
    }
    linalg::rref(m, 1e-12).1.len()
}

/// A basis of the primitive forms of bidegree `(n-k, k)`, read off the
/// kernel of the Lefschetz map.
pub fn primitive_basis(n: usize, k: usize) -> Result<Vec<ConstantForm>> {
    if n == 0 || k > n {
        return Err(Error::DegreeOutOfRange { n, k });
    }
    let src = bidegree_basis(n, n - k, k);
    let m = lefschetz_matrix(n, n - k, k);
    Ok(linalg::kernel_basis(&m, 1e-12)
        .into_iter()
        .map(|v| {
            let coords: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            ConstantForm::from_coordinates(n, &src, &coords).pruned(1e-14)
        })
        .collect())
}

/// `(n-k, k)` for a form of total degree `n`, or an error.
pub fn middle_bidegree(tau: &ConstantForm) -> Result<Option<(usize, usize)>> {
    if tau.is_empty() {
        return Ok(None);
    }
    let (p, q) = tau.bidegree().ok_or(Error::NotHomogeneous)?;
    if p + q != tau.dim() {
        return Err(Error::InadmissibleBidegree { n: tau.dim(), base: p, fiber: q });
    }
    Ok(Some((p, q)))
}

/// True iff `omega_s ^ tau` vanishes. Input must be homogeneous.
pub fn is_primitive(tau: &ConstantForm) -> Result<bool> {
    if tau.is_empty() {
        return Ok(true);
    }
    tau.bidegree().ok_or(Error::NotHomogeneous)?;
    let image = symplectic_form(tau.dim()).wedge(tau)?;
    let scale = tau.max_abs_coefficient();
    Ok(image.max_abs_coefficient() <= 1e-12 * scale)
}

/// `tau = primitive + omega_s ^ sigma`.
#[derive(Clone, Debug)]
pub struct LefschetzDecomposition {
    pub primitive: ConstantForm,
    /// `omega_s ^ sigma`.
    pub remainder: ConstantForm,
    pub sigma: ConstantForm,
}

/// Split a middle-degree form into its primitive part and a multiple of the
/// symplectic form by solving `omega_s^2 ^ sigma = omega_s ^ tau`.
pub fn lefschetz_project(tau: &ConstantForm) -> Result<LefschetzDecomposition> {
    let n = tau.dim();
    let zero = ConstantForm::zero(n);
    let Some((p, q)) = middle_bidegree(tau)? else {
        return Ok(LefschetzDecomposition { primitive: zero.clone(), remainder: zero.clone(), sigma: zero });
    };
    if p == 0 || q == 0 {
        return Ok(LefschetzDecomposition { primitive: tau.clone(), remainder: zero.clone(), sigma: zero });
    }
    let omega = symplectic_form(n);
    let omega2 = omega.wedge(&omega)?;
    let sigma_basis = bidegree_basis(n, p - 1, q - 1);
    let target_basis = bidegree_basis(n, p + 1, q + 1);
    let mut l2 = DMatrix::zeros(target_basis.len(), sigma_basis.len());
    for (c, mono) in sigma_basis.iter().enumerate() {
        let s = ConstantForm::from_coordinates(n, &[*mono], &[Complex64::new(1.0, 0.0)]);
        let image = omega2.wedge(&s)?;
        for (r, t) in target_basis.iter().enumerate() {
            l2[(r, c)] = image.coefficient(t).re;
        }
    }
    // omega^2 ^ . is an isomorphism between these bidegrees.
    if l2.nrows() != l2.ncols() || linalg::inverse_condition(&l2) < 1e-12 {
        return Err(Error::Singular);
    }
    let rhs = omega.wedge(tau)?.coordinates(&target_basis);
    let lu = l2.lu();
    let solve = |v: DVector<f64>| lu.solve(&v).ok_or(Error::Singular);
    let re = solve(DVector::from_iterator(rhs.len(), rhs.iter().map(|z| z.re)))?;
    let im = solve(DVector::from_iterator(rhs.len(), rhs.iter().map(|z| z.im)))?;
    let coords: Vec<Complex64> = re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect();
    let sigma = ConstantForm::from_coordinates(n, &sigma_basis, &coords).pruned(1e-15);
    let remainder = omega.wedge(&sigma)?;
    let primitive = tau.sub(&remainder)?.pruned(1e-15 * tau.max_abs_coefficient());
    Ok(LefschetzDecomposition { primitive, remainder, sigma })
}

/// `(g#)^* tau` with `g#(x, y) = (g^{-1} x, g^T y)`.
pub fn gl_pullback(g: &DMatrix<f64>, tau: &ConstantForm) -> Result<ConstantForm> {
    let n = tau.dim();
    if g.nrows() != n || g.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: g.nrows() });
    }
    if linalg::inverse_condition(g) < 1e-14 {
        return Err(Error::Singular);
    }
    let ginv = g.clone().try_inverse().ok_or(Error::Singular)?;
    let c = |x: f64| Complex64::new(x, 0.0);
    let dx_images: Vec<ConstantForm> = (0..n)
        .map(|i| ConstantForm::base_one_form(&(0..n).map(|j| c(ginv[(i, j)])).collect::<Vec<_>>()))
        .collect();
    let dy_images: Vec<ConstantForm> = (0..n)
        .map(|i| ConstantForm::fiber_one_form(&(0..n).map(|j| c(g[(j, i)])).collect::<Vec<_>>()))
        .collect();
    let mut out = ConstantForm::zero(n);
    for (mono, coeff) in tau.terms() {
        let mut acc = ConstantForm::scalar(n, *coeff);
        for i in mono.base_indices() {
            acc = acc.wedge(&dx_images[i - 1])?;
        }
        for j in mono.fiber_indices() {
            acc = acc.wedge(&dy_images[j - 1])?;
        }
        out = out.add(&acc)?;
    }
    Ok(out.pruned(1e-14 * out.max_abs_coefficient()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FormTermJson {
    pub dx: Vec<usize>,
    pub dy: Vec<usize>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// `{"n": int, "terms": [{"dx": [..], "dy": [..], "re": f, "im": f}]}` with
/// 1-based indices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FormJson {
    pub n: usize,
    pub terms: Vec<FormTermJson>,
}

impl From<&ConstantForm> for FormJson {
    fn from(f: &ConstantForm) -> Self {
        FormJson {
            n: f.n,
            terms: f
                .terms
                .iter()
                .map(|(m, c)| FormTermJson { dx: m.base_indices(), dy: m.fiber_indices(), re: c.re, im: c.im })
                .collect(),
        }
    }
}

impl TryFrom<&FormJson> for ConstantForm {
    type Error = Error;

    fn try_from(j: &FormJson) -> Result<Self> {
        if j.n == 0 || j.n > MAX_DIM {
            return Err(Error::Invalid(format!("form dimension {} unsupported", j.n)));
        }
        let mut f = ConstantForm::zero(j.n);
        for t in &j.terms {
            // accept any order; the word sign is applied
            f = f.add(&ConstantForm::from_word(j.n, &t.dx, &t.dy, Complex64::new(t.re, t.im))?)?;
        }
        Ok(f)
    }
}

impl ConstantForm {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&FormJson::from(self)).expect("form serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: FormJson = serde_json::from_str(s)?;
        ConstantForm::try_from(&j)
    }
}
