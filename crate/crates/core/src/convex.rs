//! Finite representations of convex functions on `R^n`.

use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::AxisBox;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `x -> <a, x> + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub a: Vec<f64>,
    pub b: f64,
}

impl AffinePiece {
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) + self.b
    }
}

/// `f(x) = max_i <a_i, x> + b_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxAffine {
    dim: usize,
    pieces: Vec<AffinePiece>,
}

impl MaxAffine {
    pub fn new(pieces: Vec<AffinePiece>) -> Result<Self> {
        let dim = pieces.first().map(|p| p.a.len()).ok_or(Error::Empty("max-affine pieces"))?;
        if let Some(p) = pieces.iter().find(|p| p.a.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: p.a.len() });
        }
        Ok(MaxAffine { dim, pieces })
    }

    /// The affine function `<a, x> + b` as a single piece.
    pub fn affine(a: Vec<f64>, b: f64) -> Self {
        MaxAffine { dim: a.len(), pieces: vec![AffinePiece { a, b }] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.pieces.iter().map(|p| p.eval(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Indices of pieces within `tol` of the maximum at `x`.
    pub fn active_set(&self, x: &[f64], tol: f64) -> Vec<usize> {
        let v = self.eval(x);
        (0..self.pieces.len()).filter(|&i| self.pieces[i].eval(x) >= v - tol).collect()
    }

    /// Merge pieces with equal gradients, keeping the largest offset.
    pub fn pruned(&self) -> Self {
        let mut out: Vec<AffinePiece> = Vec::new();
        for p in &self.pieces {
            if let Some(q) = out.iter_mut().find(|q| q.a.iter().zip(&p.a).all(|(x, y)| (x - y).abs() <= 1e-14)) {
                q.b = q.b.max(p.b);
            } else {
                out.push(p.clone());
            }
        }
        MaxAffine { dim: self.dim, pieces: out }
    }

    /// `t f` for `t >= 0`.
    pub fn scale(&self, t: f64) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| AffinePiece { a: p.a.iter().map(|x| t * x).collect(), b: t * p.b })
            .collect();
        MaxAffine { dim: self.dim, pieces }.pruned()
    }

    /// Pointwise sum; the pieces are all pairwise sums.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: other.dim });
        }
        let mut pieces = Vec::with_capacity(self.pieces.len() * other.pieces.len());
        for p in &self.pieces {
            for q in &other.pieces {
                pieces.push(AffinePiece { a: p.a.iter().zip(&q.a).map(|(x, y)| x + y).collect(), b: p.b + q.b });
            }
        }
        Ok(MaxAffine { dim: self.dim, pieces }.pruned())
    }

    /// `f + <a, x> + b`.
    pub fn add_affine(&self, a: &[f64], b: f64) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| AffinePiece { a: p.a.iter().zip(a).map(|(x, y)| x + y).collect(), b: p.b + b })
            .collect();
        MaxAffine { dim: self.dim, pieces }
    }

    /// `x -> f(x + shift)`.
    pub fn translate(&self, shift: &[f64]) -> Self {
        let pieces = self.pieces.iter().map(|p| AffinePiece { a: p.a.clone(), b: p.b + dot(&p.a, shift) }).collect();
        MaxAffine { dim: self.dim, pieces }
    }

    /// `x -> f(g x)` for a square matrix `g`.
    pub fn compose_linear(&self, g: &DMatrix<f64>) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let a = g.transpose() * DVector::from_column_slice(&p.a);
                AffinePiece { a: a.iter().copied().collect(), b: p.b }
            })
            .collect();
        MaxAffine { dim: g.ncols(), pieces }
    }

    /// `f v g` as a max-affine function.
    pub fn max_with(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: other.dim });
        }
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        Ok(MaxAffine { dim: self.dim, pieces }.pruned())
    }

    /// True when the affine function `piece` is at most `self` everywhere:
    /// `a` must be a convex combination of the gradients whose offsets
    /// combine to at least `b`. Checked over basic solutions of that LP.
    pub fn dominates(&self, piece: &AffinePiece, tol: f64) -> bool {
        let n = self.dim;
        for size in 1..=(n + 1).min(self.pieces.len()) {
            for subset in (0..self.pieces.len()).combinations(size) {
                let m = DMatrix::from_fn(n + 1, size, |r, c| if r < n { self.pieces[subset[c]].a[r] } else { 1.0 });
                if crate::linalg::svd_rank(&m, 1e-12) < size {
                    continue;
                }
                let rhs = DVector::from_fn(n + 1, |r, _| if r < n { piece.a[r] } else { 1.0 });
                let svd = m.clone().svd(true, true);
                let Ok(lambda) = svd.solve(&rhs, 1e-14) else { continue };
                if (&m * &lambda - &rhs).norm() > tol * (1.0 + rhs.norm()) {
                    continue;
                }
                if lambda.iter().any(|&l| l < -tol) {
                    continue;
                }
                let value: f64 = subset.iter().zip(lambda.iter()).map(|(&i, l)| l * self.pieces[i].b).sum();
                if value >= piece.b - tol * (1.0 + piece.b.abs()) {
                    return true;
                }
            }
        }
        false
    }

    /// Log-sum-exp smoothing `beta^{-1} log sum_i exp(beta (<a_i, x> + b_i))`,
    /// within `log(m) / beta` of `f` and with analytic derivatives.
    pub fn softmax(&self, beta: f64) -> SmoothConvex {
        let n = self.dim;
        let weights = {
            let pieces = self.pieces.clone();
            move |x: &[f64]| -> (f64, Vec<f64>) {
                let v: Vec<f64> = pieces.iter().map(|p| beta * p.eval(x)).collect();
                let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = v.iter().map(|t| (t - top).exp()).collect();
                let z: f64 = e.iter().sum();
                ((top + z.ln()) / beta, e.into_iter().map(|t| t / z).collect())
            }
        };
        let w1 = weights.clone();
        let w2 = weights.clone();
        let (p1, p2) = (self.pieces.clone(), self.pieces.clone());
        let value: ScalarFn = Arc::new(move |x| weights(x).0);
        let gradient: VectorFn = Arc::new(move |x| {
            let (_, w) = w1(x);
            (0..n).map(|r| p1.iter().zip(&w).map(|(p, wi)| wi * p.a[r]).sum()).collect()
        });
        let hessian: MatrixFn = Arc::new(move |x| {
            let (_, w) = w2(x);
            let g: Vec<f64> = (0..n).map(|r| p2.iter().zip(&w).map(|(p, wi)| wi * p.a[r]).sum()).collect();
            DMatrix::from_fn(n, n, |r, c| {
                let second: f64 = p2.iter().zip(&w).map(|(p, wi)| wi * p.a[r] * p.a[c]).sum();
                beta * (second - g[r] * g[c])
            })
        });
        SmoothConvex::new(n, value, gradient, Some(hessian))
    }
}

/// A convex `C^2` function given by callbacks.
#[derive(Clone)]
pub struct SmoothConvex {
    dim: usize,
    value: ScalarFn,
    gradient: VectorFn,
    hessian: Option<MatrixFn>,
}

impl fmt::Debug for SmoothConvex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothConvex")
            .field("dim", &self.dim)
            .field("analytic_hessian", &self.hessian.is_some())
            .finish()
    }
}

impl SmoothConvex {
    pub fn new(dim: usize, value: ScalarFn, gradient: VectorFn, hessian: Option<MatrixFn>) -> Self {
        SmoothConvex { dim, value, gradient, hessian }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    /// Analytic Hessian if present, else central differences of the gradient
    /// with step `1e-4 (1 + |x|)`, symmetrized.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        if let Some(h) = &self.hessian {
            return h(x);
        }
        let n = self.dim;
        let step = 1e-4 * (1.0 + dot(x, x).sqrt());
        let mut h = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        for j in 0..n {
            xp[j] = x[j] + step;
            let gp = self.gradient(&xp);
            xp[j] = x[j] - step;
            let gm = self.gradient(&xp);
            xp[j] = x[j];
            for i in 0..n {
                h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
        (&h + h.transpose()) * 0.5
    }

    /// `t f`.
    pub fn scale(&self, t: f64) -> Self {
        let (v, g) = (self.value.clone(), self.gradient.clone());
        let h = self.hessian.clone();
        SmoothConvex {
            dim: self.dim,
            value: Arc::new(move |x| t * v(x)),
            gradient: Arc::new(move |x| g(x).into_iter().map(|y| t * y).collect()),
            hessian: h.map(|h| -> MatrixFn { Arc::new(move |x| h(x) * t) }),
        }
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: other.dim });
        }
        let (v1, g1, v2, g2) = (self.value.clone(), self.gradient.clone(), other.value.clone(), other.gradient.clone());
        let hessian = match (&self.hessian, &other.hessian) {
            (Some(h1), Some(h2)) => {
                let (h1, h2) = (h1.clone(), h2.clone());
                Some(Arc::new(move |x: &[f64]| h1(x) + h2(x)) as MatrixFn)
            }
            _ => None,
        };
        Ok(SmoothConvex {
            dim: self.dim,
            value: Arc::new(move |x| v1(x) + v2(x)),
            gradient: Arc::new(move |x| g1(x).iter().zip(g2(x)).map(|(a, b)| a + b).collect()),
            hessian,
        })
    }

    /// `f + <a, x> + b`; the Hessian is unchanged.
    pub fn add_affine(&self, a: &[f64], b: f64) -> Self {
        let (v, g) = (self.value.clone(), self.gradient.clone());
        let (a1, a2) = (a.to_vec(), a.to_vec());
        SmoothConvex {
            dim: self.dim,
            value: Arc::new(move |x| v(x) + dot(&a1, x) + b),
            gradient: Arc::new(move |x| g(x).iter().zip(&a2).map(|(p, q)| p + q).collect()),
            hessian: self.hessian.clone(),
        }
    }

    /// `x -> f(x + shift)`.
    pub fn translate(&self, shift: &[f64]) -> Self {
        let s = shift.to_vec();
        let shifted = move |x: &[f64]| -> Vec<f64> { x.iter().zip(&s).map(|(a, b)| a + b).collect() };
        let (v, g) = (self.value.clone(), self.gradient.clone());
        let (s1, s2, s3) = (shifted.clone(), shifted.clone(), shifted);
        SmoothConvex {
            dim: self.dim,
            value: Arc::new(move |x| v(&s1(x))),
            gradient: Arc::new(move |x| g(&s2(x))),
            hessian: self.hessian.clone().map(|h| -> MatrixFn { Arc::new(move |x| h(&s3(x))) }),
        }
    }

    /// `x -> f(m x)` for an `n x d` matrix `m`; lives on `R^d`.
    pub fn compose_linear(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: m.nrows() });
        }
        let d = m.ncols();
        let apply = {
            let m = m.clone();
            move |x: &[f64]| -> Vec<f64> { (&m * DVector::from_column_slice(x)).iter().copied().collect() }
        };
        let (v, g) = (self.value.clone(), self.gradient.clone());
        let (a1, a2, a3) = (apply.clone(), apply.clone(), apply);
        let (mt, mt2, m2) = (m.transpose(), m.transpose(), m.clone());
        let hessian: MatrixFn = match self.hessian.clone() {
            Some(h) => Arc::new(move |x| &mt2 * h(&a3(x)) * &m2),
            None => {
                let inner = self.clone();
                Arc::new(move |x| &mt2 * inner.hessian(&a3(x)) * &m2)
            }
        };
        Ok(SmoothConvex {
            dim: d,
            value: Arc::new(move |x| v(&a1(x))),
            gradient: Arc::new(move |x| (&mt * DVector::from_vec(g(&a2(x)))).iter().copied().collect()),
            hessian: Some(hessian),
        })
    }

    /// Pointwise maximum; derivatives follow the larger branch.
    pub fn max_with(&self, other: &Self) -> Result<Self> {
        self.select(other, true)
    }

    /// Pointwise minimum (only convex for special pairs, see [`lattice_pair_check`]).
    pub fn min_with(&self, other: &Self) -> Result<Self> {
        self.select(other, false)
    }

    fn select(&self, other: &Self, take_max: bool) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: other.dim });
        }
        let (f, h) = (self.clone(), other.clone());
        let pick = move |x: &[f64]| -> bool {
            let (a, b) = (f.value(x), h.value(x));
            if take_max { a >= b } else { a <= b }
        };
        let (f1, h1, p1) = (self.clone(), other.clone(), pick.clone());
        let (f2, h2, p2) = (self.clone(), other.clone(), pick.clone());
        let (f3, h3, p3) = (self.clone(), other.clone(), pick);
        Ok(SmoothConvex {
            dim: self.dim,
            value: Arc::new(move |x| if p1(x) { f1.value(x) } else { h1.value(x) }),
            gradient: Arc::new(move |x| if p2(x) { f2.gradient(x) } else { h2.gradient(x) }),
            hessian: Some(Arc::new(move |x| if p3(x) { f3.hessian(x) } else { h3.hessian(x) })),
        })
    }

    /// Spot-check symmetry and positive semi-definiteness of the Hessian.
    pub fn check_convex_at(&self, points: &[Vec<f64>], tol: f64) -> bool {
        points.iter().all(|x| {
            let h = self.hessian(x);
            let asym = (&h - h.transpose()).amax();
            let scale = h.amax().max(1.0);
            asym <= tol * scale && h.symmetric_eigenvalues().min() >= -tol * scale
        })
    }
}

/// `f(x) = 1/2 x^T A x + <c, x> + d` with `A` symmetric PSD.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    pub a: DMatrix<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

impl Quadratic {
    pub fn new(a: DMatrix<f64>, c: Vec<f64>, d: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || c.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: c.len() });
        }
        if (&a - a.transpose()).amax() > 0.0 {
            return Err(Error::Invalid("quadratic form matrix is not symmetric".into()));
        }
        if a.symmetric_eigenvalues().min() < -1e-12 * a.amax().max(1.0) {
            return Err(Error::Invalid("quadratic form matrix is not positive semi-definite".into()));
        }
        Ok(Quadratic { a, c, d })
    }

    /// `1/2 x^T A x`.
    pub fn homogeneous(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, vec![0.0; n], 0.0)
    }

    /// `1/2 |x|^2`.
    pub fn half_norm_squared(n: usize) -> Self {
        Quadratic { a: DMatrix::identity(n, n), c: vec![0.0; n], d: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        0.5 * v.dot(&(&self.a * &v)) + dot(&self.c, x) + self.d
    }

    pub fn to_smooth(&self) -> SmoothConvex {
        let (q1, q2, a) = (self.clone(), self.clone(), self.a.clone());
        SmoothConvex::new(
            self.dim(),
            Arc::new(move |x| q1.eval(x)),
            Arc::new(move |x| {
                let g = &q2.a * DVector::from_column_slice(x);
                g.iter().zip(&q2.c).map(|(p, q)| p + q).collect()
            }),
            Some(Arc::new(move |_| a.clone())),
        )
    }
}

/// An orthonormal `k`-frame spanning a subspace `E` of `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    columns: DMatrix<f64>,
}

impl Frame {
    /// Columns must be orthonormal to `1e-12`.
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        let k = columns.ncols();
        let gram = columns.transpose() * &columns;
        if (gram - DMatrix::identity(k, k)).amax() > 1e-12 {
            return Err(Error::Invalid("frame columns are not orthonormal".into()));
        }
        Ok(Frame { columns })
    }

    /// Orthonormalize spanning vectors (Householder QR).
    pub fn from_spanning(vectors: &[Vec<f64>]) -> Result<Self> {
        let n = vectors.first().map(|v| v.len()).ok_or(Error::Empty("frame vectors"))?;
        let m = DMatrix::from_fn(n, vectors.len(), |r, c| vectors[c][r]);
        if crate::linalg::svd_rank(&m, 1e-10) < vectors.len() {
            return Err(Error::Invalid("frame vectors are linearly dependent".into()));
        }
        let q = m.qr().q();
        Frame::new(q.columns(0, vectors.len()).into_owned())
    }

    /// The first `k` coordinate axes.
    pub fn coordinate(n: usize, k: usize) -> Self {
        Frame { columns: DMatrix::from_fn(n, k, |r, c| if r == c { 1.0 } else { 0.0 }) }
    }

    /// Haar-random frame: QR of a Gaussian matrix with the sign of `R`'s diagonal fixed.
    pub fn random<R: Rng>(n: usize, k: usize, rng: &mut R) -> Self {
        if k == 0 {
            return Frame::coordinate(n, 0);
        }
        let g = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = g.qr();
        let r = qr.r();
        let mut q = qr.q().columns(0, k).into_owned();
        for j in 0..k {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Frame { columns: q }
    }

    pub fn random_seeded(n: usize, k: usize, seed: u64) -> Self {
        Self::random(n, k, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn k(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// Orthogonal projector `Pi_E = F F^T`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.columns * self.columns.transpose()
    }

    /// Coordinates of the projection of `x` onto `E`.
    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        (self.columns.transpose() * DVector::from_column_slice(x)).iter().copied().collect()
    }

    /// Point of `R^n` with coordinates `u` in `E`.
    pub fn embed(&self, u: &[f64]) -> Vec<f64> {
        (&self.columns * DVector::from_column_slice(u)).iter().copied().collect()
    }

    /// Orthonormal frame of `E^perp`.
    pub fn complement(&self) -> Frame {
        let n = self.ambient_dim();
        let k = self.k();
        let mut cols: Vec<DVector<f64>> = (0..k).map(|j| self.columns.column(j).into_owned()).collect();
        for i in 0..n {
            if cols.len() == n {
                break;
            }
            let mut v = DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
            for _ in 0..2 {
                for c in &cols {
                    let p = v.dot(c);
                    v -= c * p;
                }
            }
            let l = v.norm();
            if l > 1e-8 {
                cols.push(v / l);
            }
        }
        let perp: Vec<DVector<f64>> = cols.into_iter().skip(k).collect();
        if perp.is_empty() {
            return Frame { columns: DMatrix::zeros(n, 0) };
        }
        Frame { columns: DMatrix::from_columns(&perp) }
    }

    /// Apply a linear map to the subspace: the frame of `R E`, for orthogonal `R`.
    pub fn rotated(&self, r: &DMatrix<f64>) -> Result<Self> {
        Frame::new(r * &self.columns)
    }
}

/// Any supported convex function.
#[derive(Clone, Debug)]
pub enum ConvexFn {
    MaxAffine(MaxAffine),
    Smooth(SmoothConvex),
}

impl From<MaxAffine> for ConvexFn {
    fn from(f: MaxAffine) -> Self {
        ConvexFn::MaxAffine(f)
    }
}

impl From<SmoothConvex> for ConvexFn {
    fn from(f: SmoothConvex) -> Self {
        ConvexFn::Smooth(f)
    }
}

impl From<Quadratic> for ConvexFn {
    fn from(f: Quadratic) -> Self {
        ConvexFn::Smooth(f.to_smooth())
    }
}

impl ConvexFn {
    pub fn dim(&self) -> usize {
        match self {
            ConvexFn::MaxAffine(f) => f.dim(),
            ConvexFn::Smooth(f) => f.dim(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ConvexFn::MaxAffine(f) => f.eval(x),
            ConvexFn::Smooth(f) => f.value(x),
        }
    }

    pub fn scale(&self, t: f64) -> Self {
        match self {
            ConvexFn::MaxAffine(f) => ConvexFn::MaxAffine(f.scale(t)),
            ConvexFn::Smooth(f) => ConvexFn::Smooth(f.scale(t)),
        }
    }

    pub fn add_affine(&self, a: &[f64], b: f64) -> Self {
        match self {
            ConvexFn::MaxAffine(f) => ConvexFn::MaxAffine(f.add_affine(a, b)),
            ConvexFn::Smooth(f) => ConvexFn::Smooth(f.add_affine(a, b)),
        }
    }

    pub fn translate(&self, shift: &[f64]) -> Self {
        match self {
            ConvexFn::MaxAffine(f) => ConvexFn::MaxAffine(f.translate(shift)),
            ConvexFn::Smooth(f) => ConvexFn::Smooth(f.translate(shift)),
        }
    }

    pub fn compose_linear(&self, g: &DMatrix<f64>) -> Result<Self> {
        Ok(match self {
            ConvexFn::MaxAffine(f) => ConvexFn::MaxAffine(f.compose_linear(g)),
            ConvexFn::Smooth(f) => ConvexFn::Smooth(f.compose_linear(g)?),
        })
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        match (self, other) {
            (ConvexFn::MaxAffine(f), ConvexFn::MaxAffine(g)) => Ok(ConvexFn::MaxAffine(f.sum(g)?)),
            (ConvexFn::Smooth(f), ConvexFn::Smooth(g)) => Ok(ConvexFn::Smooth(f.sum(g)?)),
            _ => Err(Error::MixedRepresentations),
        }
    }

    pub fn as_max_affine(&self) -> Option<&MaxAffine> {
        match self {
            ConvexFn::MaxAffine(f) => Some(f),
            ConvexFn::Smooth(_) => None,
        }
    }

    pub fn as_smooth(&self) -> Option<&SmoothConvex> {
        match self {
            ConvexFn::Smooth(f) => Some(f),
            ConvexFn::MaxAffine(_) => None,
        }
    }
}

/// Support function `h_P(y) = max_i <v_i, y>` of the polytope with vertices `v_i`.
pub fn support_function(vertices: &[Vec<f64>]) -> Result<MaxAffine> {
    if vertices.is_empty() {
        return Err(Error::Empty("polytope vertices"));
    }
    MaxAffine::new(vertices.iter().map(|v| AffinePiece { a: v.clone(), b: 0.0 }).collect())
}

/// `y -> h_P(y - x)`, pieces `(v_i, -<v_i, x>)`.
pub fn support_function_at(vertices: &[Vec<f64>], x: &[f64]) -> Result<MaxAffine> {
    let h = support_function(vertices)?;
    if x.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), actual: x.len() });
    }
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    Ok(h.translate(&neg))
}

/// `x -> f(F^T x)` for `f` on the coordinates of `E`.
pub fn pullback_subspace(f: &ConvexFn, frame: &Frame) -> Result<ConvexFn> {
    if f.dim() != frame.k() {
        return Err(Error::DimensionMismatch { expected: frame.k(), actual: f.dim() });
    }
    let ft = frame.columns().transpose();
    match f {
        ConvexFn::MaxAffine(g) => {
            let pieces = g
                .pieces()
                .iter()
                .map(|p| AffinePiece { a: frame.embed(&p.a), b: p.b })
                .collect();
            Ok(ConvexFn::MaxAffine(MaxAffine::new(pieces)?))
        }
        ConvexFn::Smooth(g) => Ok(ConvexFn::Smooth(g.compose_linear(&ft)?)),
    }
}

/// Outcome of the minimum half of [`lattice_pair_check`].
#[derive(Clone, Debug)]
pub enum LatticeMin {
    Convex(ConvexFn),
    NotConvex,
}

#[derive(Clone, Debug)]
pub struct LatticePair {
    pub max: ConvexFn,
    pub min: LatticeMin,
}

/// Sampling parameters for convexity checks.
#[derive(Clone, Debug)]
pub struct ConvexitySampling {
    pub region: AxisBox,
    pub pairs: usize,
    pub seed: u64,
    pub tol: f64,
}

impl ConvexitySampling {
    pub fn new(region: AxisBox, seed: u64) -> Self {
        ConvexitySampling { region, pairs: 400, seed, tol: 1e-9 }
    }
}

/// Midpoint convexity on seeded random pairs in the region.
pub fn midpoint_convex(g: &dyn Fn(&[f64]) -> f64, sampling: &ConvexitySampling) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    (0..sampling.pairs).all(|_| {
        let x = sampling.region.sample(&mut rng);
        let y = sampling.region.sample(&mut rng);
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let (gx, gy, gm) = (g(&x), g(&y), g(&mid));
        gm <= 0.5 * (gx + gy) + sampling.tol * (1.0 + gx.abs().max(gy.abs()))
    })
}

/// `f v h` and, when it passes the sampled midpoint-convexity test, `f ^ h`.
pub fn lattice_pair_check(f: &ConvexFn, h: &ConvexFn, sampling: &ConvexitySampling) -> Result<LatticePair> {
    match (f, h) {
        (ConvexFn::MaxAffine(a), ConvexFn::MaxAffine(b)) => {
            let max = ConvexFn::MaxAffine(a.max_with(b)?);
            let g = |x: &[f64]| a.eval(x).min(b.eval(x));
            if !midpoint_convex(&g, sampling) {
                return Ok(LatticePair { max, min: LatticeMin::NotConvex });
            }
            // a convex PL minimum is the max of the pieces lying below both
            let tol = 1e-10;
            let kept: Vec<AffinePiece> = a
                .pieces()
                .iter()
                .filter(|p| b.dominates(p, tol))
                .chain(b.pieces().iter().filter(|p| a.dominates(p, tol)))
                .cloned()
                .collect();
            if kept.is_empty() {
                return Ok(LatticePair { max, min: LatticeMin::NotConvex });
            }
            let min = MaxAffine::new(kept)?.pruned();
            let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed ^ 0x9e37);
            let consistent = (0..sampling.pairs).all(|_| {
                let x = sampling.region.sample(&mut rng);
                (min.eval(&x) - g(&x)).abs() <= 1e-8 * (1.0 + g(&x).abs())
            });
            let min = if consistent { LatticeMin::Convex(ConvexFn::MaxAffine(min)) } else { LatticeMin::NotConvex };
            Ok(LatticePair { max, min })
        }
        (ConvexFn::Smooth(a), ConvexFn::Smooth(b)) => {
            let max = ConvexFn::Smooth(a.max_with(b)?);
            let g = |x: &[f64]| a.value(x).min(b.value(x));
            let min = if midpoint_convex(&g, sampling) {
                LatticeMin::Convex(ConvexFn::Smooth(a.min_with(b)?))
            } else {
                LatticeMin::NotConvex
            };
            Ok(LatticePair { max, min })
        }
        _ => Err(Error::MixedRepresentations),
    }
}

/// `{"vertices": [[..], ..]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolytopeJson {
    pub vertices: Vec<Vec<f64>>,
}

/// `{"pieces": [{"a": [..], "b": f}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaxAffineJson {
    pub pieces: Vec<AffinePiece>,
}

/// `{"columns": [[..], ..]}`, each inner array one column of length `n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameJson {
    pub columns: Vec<Vec<f64>>,
}

impl TryFrom<&MaxAffineJson> for MaxAffine {
    type Error = Error;
    fn try_from(j: &MaxAffineJson) -> Result<Self> {
        MaxAffine::new(j.pieces.clone())
    }
}

impl From<&MaxAffine> for MaxAffineJson {
    fn from(f: &MaxAffine) -> Self {
        MaxAffineJson { pieces: f.pieces.clone() }
    }
}

impl TryFrom<&FrameJson> for Frame {
    type Error = Error;
    fn try_from(j: &FrameJson) -> Result<Self> {
        let n = j.columns.first().map(|c| c.len()).ok_or(Error::Empty("frame columns"))?;
        if j.columns.iter().any(|c| c.len() != n) {
            return Err(Error::Invalid("frame columns differ in length".into()));
        }
        // accept any spanning set; orthonormal input is returned unchanged up to signs
        let cols = DMatrix::from_fn(n, j.columns.len(), |r, c| j.columns[c][r]);
        match Frame::new(cols) {
            Ok(f) => Ok(f),
            Err(_) => Frame::from_spanning(&j.columns),
        }
    }
}

impl From<&Frame> for FrameJson {
    fn from(f: &Frame) -> Self {
        FrameJson { columns: (0..f.k()).map(|j| f.columns.column(j).iter().copied().collect()).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_vertices(n: usize) -> Vec<Vec<f64>> {
        (0..1usize << n)
            .map(|s| (0..n).map(|b| if s & (1 << b) != 0 { 1.0 } else { -1.0 }).collect())
            .collect()
    }

    fn unit_box(n: usize, r: f64) -> AxisBox {
        AxisBox::new(vec![-r; n], vec![r; n]).unwrap()
    }

    #[test]
    fn support_of_point_is_zero() {
        let h = support_function(&[vec![0.0, 0.0]]).unwrap();
        assert_eq!(h.eval(&[3.0, -2.0]), 0.0);
        assert!(support_function(&[]).is_err());
    }

    #[test]
    fn support_of_cube_is_l1_norm() {
        let h = support_function(&cube_vertices(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let y: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let l1: f64 = y.iter().map(|v: &f64| v.abs()).sum();
            assert!((h.eval(&y) - l1).abs() < 1e-12);
        }
    }

    #[test]
    fn support_function_scaling_and_translation() {
        let verts = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![-1.0, -1.0]];
        let h = support_function(&verts).unwrap();
        let scaled: Vec<Vec<f64>> = verts.iter().map(|v| v.iter().map(|x| 2.5 * x).collect()).collect();
        let h2 = support_function(&scaled).unwrap();
        let x = vec![0.3, -0.7];
        let moved: Vec<Vec<f64>> = verts.iter().map(|v| vec![v[0] + x[0], v[1] + x[1]]).collect();
        let hx = support_function(&moved).unwrap();
        for y in [[1.0, 2.0], [-0.5, 0.1], [0.0, -3.0]] {
            assert!((h2.eval(&y) - 2.5 * h.eval(&y)).abs() < 1e-12);
            assert!((hx.eval(&y) - h.eval(&y) - dot(&y, &x)).abs() < 1e-12);
        }
    }

    #[test]
    fn pullback_identity_frame() {
        let f: ConvexFn = Quadratic::half_norm_squared(2).into();
        let g = pullback_subspace(&f, &Frame::coordinate(2, 2)).unwrap();
        assert!((g.eval(&[1.0, 2.0]) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn pullback_of_half_norm_has_projector_hessian() {
        let frame = Frame::random_seeded(3, 2, 4);
        let f: ConvexFn = Quadratic::half_norm_squared(2).into();
        let g = pullback_subspace(&f, &frame).unwrap();
        let h = g.as_smooth().unwrap().hessian(&[0.3, 0.1, -2.0]);
        assert!((h - frame.projector()).amax() < 1e-12);
    }

    #[test]
    fn pullback_of_max_affine_restricts_back() {
        let frame = Frame::random_seeded(3, 2, 9);
        let f = MaxAffine::new(vec![
            AffinePiece { a: vec![1.0, 0.0], b: 0.0 },
            AffinePiece { a: vec![-1.0, 2.0], b: 0.5 },
        ])
        .unwrap();
        let g = pullback_subspace(&ConvexFn::MaxAffine(f.clone()), &frame).unwrap();
        for u in [[0.2, 0.4], [-1.0, 3.0]] {
            assert!((g.eval(&frame.embed(&u)) - f.eval(&u)).abs() < 1e-12);
        }
        let gp = g.as_max_affine().unwrap();
        assert_eq!(gp.pieces()[0].a, frame.embed(&[1.0, 0.0]));
    }

    #[test]
    fn frame_projector_is_idempotent() {
        let frame = Frame::random_seeded(4, 2, 11);
        let p = frame.projector();
        assert!((&p * &p - &p).amax() < 1e-12);
        assert!((&p - p.transpose()).amax() < 1e-12);
        let perp = frame.complement();
        assert_eq!(perp.k(), 2);
        assert!((perp.projector() + &p - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn lattice_dominated_pair() {
        let f = ConvexFn::MaxAffine(support_function(&cube_vertices(2)).unwrap());
        let h = ConvexFn::MaxAffine(MaxAffine::affine(vec![0.0, 0.0], -1.0));
        let pair = lattice_pair_check(&f, &h, &ConvexitySampling::new(unit_box(2, 2.0), 1)).unwrap();
        let LatticeMin::Convex(min) = pair.min else { panic!("min should be convex") };
        assert!((min.eval(&[0.5, 0.2]) + 1.0).abs() < 1e-12);
        assert!((pair.max.eval(&[0.5, 0.2]) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn lattice_relu_pair_has_zero_min() {
        let f = MaxAffine::new(vec![AffinePiece { a: vec![1.0], b: 0.0 }, AffinePiece { a: vec![0.0], b: 0.0 }]).unwrap();
        let h = MaxAffine::new(vec![AffinePiece { a: vec![-1.0], b: 0.0 }, AffinePiece { a: vec![0.0], b: 0.0 }]).unwrap();
        let pair = lattice_pair_check(&f.into(), &h.into(), &ConvexitySampling::new(unit_box(1, 3.0), 2)).unwrap();
        let LatticeMin::Convex(ConvexFn::MaxAffine(min)) = pair.min else { panic!("expected convex PL min") };
        assert_eq!(min.pieces().len(), 1);
        assert_eq!(min.eval(&[1.3]), 0.0);
    }

    #[test]
    fn lattice_radial_pair_is_not_convex() {
        let f = SmoothConvex::new(
            2,
            Arc::new(|x: &[f64]| dot(x, x)),
            Arc::new(|x: &[f64]| x.iter().map(|v| 2.0 * v).collect()),
            None,
        );
        let h = SmoothConvex::new(
            2,
            Arc::new(|x: &[f64]| 1.0 + 0.1 * dot(x, x)),
            Arc::new(|x: &[f64]| x.iter().map(|v| 0.2 * v).collect()),
            None,
        );
        let pair = lattice_pair_check(&f.into(), &h.into(), &ConvexitySampling::new(unit_box(2, 3.0), 3)).unwrap();
        assert!(matches!(pair.min, LatticeMin::NotConvex));
    }

    #[test]
    fn finite_difference_hessian_matches_analytic() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let q = Quadratic::homogeneous(a.clone()).unwrap().to_smooth();
        let fd = SmoothConvex::new(2, q.value.clone(), q.gradient.clone(), None);
        assert!((fd.hessian(&[0.3, -1.2]) - a).amax() < 1e-8);
        assert!(fd.check_convex_at(&[vec![0.0, 0.0], vec![1.0, 1.0]], 1e-6));
    }

    #[test]
    fn quadratic_rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(Quadratic::homogeneous(a).is_err());
    }

    #[test]
    fn frame_json_orthonormalizes() {
        let j = FrameJson { columns: vec![vec![2.0, 0.0, 0.0]] };
        let f = Frame::try_from(&j).unwrap();
        assert!((f.projector()[(0, 0)] - 1.0).abs() < 1e-14);
    }
}
