//! Complex Radon measures made of finitely many atoms plus one piecewise
//! constant density on an axis-aligned grid.
//!
//! Boxes are half-open, `[lo, hi)`, so box masses add up exactly over
//! partitions. Density cells are integrated with the midpoint rule.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::convex::Frame;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Atoms closer than this are merged when measures are added.
pub const ATOM_MERGE_TOL: f64 = 1e-9;

/// Volume of the unit ball in `R^n`, `pi^{n/2} / Gamma(n/2 + 1)`.
pub fn unit_ball_volume(n: usize) -> f64 {
    // omega_n = 2 pi / n * omega_{n-2}
    let (mut w, start) = if n % 2 == 0 { (1.0, 2) } else { (2.0, 3) };
    let mut m = start;
    while m <= n {
        w *= 2.0 * std::f64::consts::PI / m as f64;
        m += 2;
    }
    w
}

/// Axis-aligned box `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), actual: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Invalid("box needs finite lo < hi on every axis".into()));
        }
        Ok(AxisBox { lo, hi })
    }

    /// `[-r, r)^n`.
    pub fn cube(n: usize, r: f64) -> Self {
        AxisBox { lo: vec![-r; n], hi: vec![r; n] }
    }

    /// `[0, 1)^n`.
    pub fn unit(n: usize) -> Self {
        AxisBox { lo: vec![0.0; n], hi: vec![1.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v < *b)
    }

    /// Closed-box membership, for test-function supports.
    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Uniform sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect()
    }

    pub fn translate(&self, shift: &[f64]) -> Self {
        AxisBox {
            lo: self.lo.iter().zip(shift).map(|(a, s)| a + s).collect(),
            hi: self.hi.iter().zip(shift).map(|(a, s)| a + s).collect(),
        }
    }

    /// Shrink by `margin` on every side.
    pub fn shrink(&self, margin: f64) -> Result<Self> {
        AxisBox::new(self.lo.iter().map(|a| a + margin).collect(), self.hi.iter().map(|b| b - margin).collect())
    }

    /// Intersection, or `None` when it is empty.
    pub fn intersect(&self, other: &AxisBox) -> Option<AxisBox> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        AxisBox::new(lo, hi).ok()
    }
}

/// Flat cell index -> per-axis indices, last axis fastest.
fn unravel(mut flat: usize, grid: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; grid.len()];
    for a in (0..grid.len()).rev() {
        idx[a] = flat % grid[a];
        flat /= grid[a];
    }
    idx
}

/// Density values on the cells of a uniform grid over a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    #[serde(rename = "box")]
    pub region: AxisBox,
    pub grid: Vec<usize>,
    /// Density (mass per unit volume) per cell, last axis fastest.
    pub values: Vec<Complex64>,
}

impl GridDensity {
    pub fn new(region: AxisBox, grid: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        if grid.len() != region.dim() {
            return Err(Error::DimensionMismatch { expected: region.dim(), actual: grid.len() });
        }
        if grid.contains(&0) {
            return Err(Error::Invalid("grid resolution must be positive".into()));
        }
        let cells: usize = grid.iter().product();
        if values.len() != cells {
            return Err(Error::DimensionMismatch { expected: cells, actual: values.len() });
        }
        Ok(GridDensity { region, grid, values })
    }

    /// Sample `f` at the cell midpoints.
    pub fn sample(region: &AxisBox, grid: &[usize], f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let probe = GridDensity::new(region.clone(), grid.to_vec(), vec![ZERO; grid.iter().product()])?;
        let values = (0..probe.num_cells()).map(|c| f(&probe.midpoint(c))).collect();
        Ok(GridDensity { values, ..probe })
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    pub fn cell_widths(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|a| (self.region.hi[a] - self.region.lo[a]) / self.grid[a] as f64).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_widths().iter().product()
    }

    pub fn midpoint(&self, cell: usize) -> Vec<f64> {
        let w = self.cell_widths();
        unravel(cell, &self.grid)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.region.lo[a] + (i as f64 + 0.5) * w[a])
            .collect()
    }

    /// Lower and upper corner of a cell.
    pub fn cell_bounds(&self, cell: usize) -> (Vec<f64>, Vec<f64>) {
        let w = self.cell_widths();
        let idx = unravel(cell, &self.grid);
        let lo: Vec<f64> = idx.iter().enumerate().map(|(a, &i)| self.region.lo[a] + i as f64 * w[a]).collect();
        let hi: Vec<f64> = lo.iter().zip(&w).map(|(l, w)| l + w).collect();
        (lo, hi)
    }

    /// Cell containing `x` (half-open), if any.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if !self.region.contains(x) {
            return None;
        }
        let w = self.cell_widths();
        let mut flat = 0;
        for a in 0..self.grid.len() {
            let i = (((x[a] - self.region.lo[a]) / w[a]).floor() as usize).min(self.grid[a] - 1);
            flat = flat * self.grid[a] + i;
        }
        Some(flat)
    }

    /// Mass per cell.
    pub fn cell_masses(&self) -> Vec<Complex64> {
        let v = self.cell_volume();
        self.values.iter().map(|c| c * v).collect()
    }

    fn same_layout(&self, other: &GridDensity) -> bool {
        self.grid == other.grid && self.region == other.region
    }
}

/// Point mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub mass: Complex64,
}

/// Atoms plus an optional grid density.
#[derive(Clone, Debug, PartialEq)]
pub struct RadonMeasure {
    dim: usize,
    atoms: Vec<Atom>,
    density: Option<GridDensity>,
}

/// A compactly supported test function; it is taken to vanish outside `support`.
#[derive(Clone)]
pub struct TestFunction {
    support: AxisBox,
    f: Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("support", &self.support).finish_non_exhaustive()
    }
}

impl TestFunction {
    pub fn new(support: AxisBox, f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        TestFunction { support, f: Arc::new(f) }
    }

    pub fn real(support: AxisBox, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(support, move |x| Complex64::new(f(x), 0.0))
    }

    /// Indicator of the half-open box.
    pub fn indicator(b: AxisBox) -> Self {
        let inner = b.clone();
        Self::real(b, move |x| if inner.contains(x) { 1.0 } else { 0.0 })
    }

    /// Product of tents `prod (1 - |x_a - c_a| / r_a)_+` on the box, peak 1 at its center.
    pub fn tent(b: AxisBox) -> Self {
        let c = b.center();
        let r: Vec<f64> = b.lo.iter().zip(&b.hi).map(|(l, h)| 0.5 * (h - l)).collect();
        Self::real(b, move |x| x.iter().zip(c.iter().zip(&r)).map(|(v, (c, r))| (1.0 - (v - c).abs() / r).max(0.0)).product())
    }

    /// Smooth bump `exp(-1 / (1 - |x - c|^2 / r^2))` inside the ball of radius `r`.
    pub fn bump(center: Vec<f64>, r: f64) -> Self {
        let b = AxisBox::new(center.iter().map(|c| c - r).collect(), center.iter().map(|c| c + r).collect())
            .expect("bump radius must be positive");
        Self::real(b, move |x| {
            let s: f64 = x.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / (r * r);
            if s < 1.0 {
                (-1.0 / (1.0 - s)).exp()
            } else {
                0.0
            }
        })
    }

    /// `exp(-|x|^2 / (2 s^2))` cut off to `[-r, r]^n`.
    pub fn truncated_gaussian(n: usize, s: f64, r: f64) -> Self {
        Self::real(AxisBox::cube(n, r), move |x| (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * s * s)).exp())
    }

    pub fn support(&self) -> &AxisBox {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// Value at `x`, zero outside the closed support box.
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        if self.support.contains_closed(x) {
            (self.f)(x)
        } else {
            ZERO
        }
    }

    /// `x -> phi(x - shift)`.
    pub fn translate(&self, shift: &[f64]) -> Self {
        let f = self.f.clone();
        let s = shift.to_vec();
        TestFunction::new(self.support.translate(shift), move |x| {
            let y: Vec<f64> = x.iter().zip(&s).map(|(a, b)| a - b).collect();
            f(&y)
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let f = self.f.clone();
        TestFunction::new(self.support.clone(), move |x| c * f(x))
    }

    /// Sum, supported on the bounding box of both supports.
    pub fn add(&self, other: &TestFunction) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        let support = AxisBox {
            lo: self.support.lo.iter().zip(&other.support.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.support.hi.iter().zip(&other.support.hi).map(|(a, b)| a.max(*b)).collect(),
        };
        let (a, b) = (self.clone(), other.clone());
        Ok(TestFunction::new(support, move |x| a.eval(x) + b.eval(x)))
    }
}

/// Target of a projection pushforward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Onto {
    /// The span of the frame, in frame coordinates.
    E,
    /// Its orthogonal complement, in the coordinates of [`Frame::complement`].
    Perp,
}

impl RadonMeasure {
    pub fn zero(dim: usize) -> Self {
        RadonMeasure { dim, atoms: Vec::new(), density: None }
    }

    pub fn dirac(point: Vec<f64>, mass: Complex64) -> Self {
        let dim = point.len();
        let mut m = Self::zero(dim);
        if mass != ZERO {
            m.atoms.push(Atom { point, mass });
        }
        m
    }

    pub fn from_atoms(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        let mut m = Self::zero(dim);
        for a in atoms {
            if a.point.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: a.point.len() });
            }
            m.push_atom(a);
        }
        Ok(m)
    }

    pub fn from_density(density: GridDensity) -> Self {
        RadonMeasure { dim: density.region.dim(), atoms: Vec::new(), density: Some(density) }
    }

    /// Lebesgue measure restricted to a box.
    pub fn lebesgue(region: &AxisBox, grid: &[usize]) -> Result<Self> {
        Ok(Self::from_density(GridDensity::sample(region, grid, |_| Complex64::new(1.0, 0.0))?))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&GridDensity> {
        self.density.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density.as_ref().is_none_or(|d| d.values.iter().all(|v| *v == ZERO))
    }

    fn push_atom(&mut self, atom: Atom) {
        if let Some(a) = self.atoms.iter_mut().find(|a| dist(&a.point, &atom.point) <= ATOM_MERGE_TOL) {
            a.mass += atom.mass;
        } else {
            self.atoms.push(atom);
        }
    }

    /// Sum; atoms within [`ATOM_MERGE_TOL`] merge, densities must share box and grid.
    pub fn add(&self, other: &RadonMeasure) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: other.dim });
        }
        let mut out = self.clone();
        for a in &other.atoms {
            out.push_atom(a.clone());
        }
        out.atoms.retain(|a| a.mass != ZERO);
        out.density = match (&self.density, &other.density) {
            (None, None) => None,
            (Some(d), None) | (None, Some(d)) => Some(d.clone()),
            (Some(a), Some(b)) => {
                if !a.same_layout(b) {
                    return Err(Error::Unsupported("adding densities on different grids".into()));
                }
                let values = a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect();
                Some(GridDensity { values, ..a.clone() })
            }
        };
        Ok(out)
    }

    pub fn sub(&self, other: &RadonMeasure) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { point: a.point.clone(), mass: a.mass * c })
            .filter(|a| a.mass != ZERO)
            .collect();
        let density = self
            .density
            .as_ref()
            .map(|d| GridDensity { values: d.values.iter().map(|v| v * c).collect(), ..d.clone() });
        RadonMeasure { dim: self.dim, atoms, density }
    }

    /// Multiply by a continuous weight: atoms by `w(point)`, density cells by `w(midpoint)`.
    pub fn weighted(&self, w: impl Fn(&[f64]) -> Complex64) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { point: a.point.clone(), mass: a.mass * w(&a.point) })
            .filter(|a| a.mass != ZERO)
            .collect();
        let density = self.density.as_ref().map(|d| GridDensity {
            values: d.values.iter().enumerate().map(|(c, v)| v * w(&d.midpoint(c))).collect(),
            ..d.clone()
        });
        RadonMeasure { dim: self.dim, atoms, density }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn total_mass(&self) -> Complex64 {
        let a: Complex64 = self.atoms.iter().map(|a| a.mass).sum();
        a + self.density.as_ref().map_or(ZERO, |d| d.cell_masses().iter().sum())
    }

    /// Total variation norm.
    pub fn total_variation(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|a| a.mass.norm()).sum();
        a + self.density.as_ref().map_or(0.0, |d| d.values.iter().map(|v| v.norm()).sum::<f64>() * d.cell_volume())
    }

    /// Sum of atom masses within `radius` of `x`.
    pub fn atom_mass_at(&self, x: &[f64], radius: f64) -> Complex64 {
        self.atoms.iter().filter(|a| dist(&a.point, x) <= radius).map(|a| a.mass).sum()
    }

    /// Atoms at `phi(p) * mass`, density cells by the midpoint rule.
    pub fn integrate(&self, phi: &TestFunction) -> Result<Complex64> {
        if phi.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: phi.dim() });
        }
        let mut total: Complex64 = self.atoms.iter().map(|a| phi.eval(&a.point) * a.mass).sum();
        if let Some(d) = &self.density {
            let v = d.cell_volume();
            let mut acc = ZERO;
            for (c, val) in d.values.iter().enumerate() {
                if *val != ZERO {
                    acc += phi.eval(&d.midpoint(c)) * val;
                }
            }
            total += acc * v;
        }
        Ok(total)
    }

    /// Mass of the half-open box; density cells contribute by exact overlap fraction.
    pub fn mass_on_box(&self, b: &AxisBox) -> Result<Complex64> {
        if b.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: b.dim() });
        }
        let mut total: Complex64 = self.atoms.iter().filter(|a| b.contains(&a.point)).map(|a| a.mass).sum();
        if let Some(d) = &self.density {
            for c in 0..d.num_cells() {
                let (lo, hi) = d.cell_bounds(c);
                let overlap: f64 = (0..self.dim).map(|a| (hi[a].min(b.hi[a]) - lo[a].max(b.lo[a])).max(0.0)).product();
                if overlap > 0.0 {
                    total += d.values[c] * overlap;
                }
            }
        }
        Ok(total)
    }

    /// Pushforward under the orthogonal projection onto `span(frame)` or its complement.
    ///
    /// Atoms map exactly. Each density cell moves its whole mass to the cell of
    /// the projected grid containing its projected midpoint, so total mass is
    /// preserved. Axes of the target that are images of coordinate axes reuse
    /// the source resolution, which makes coordinate marginals exact.
    pub fn pushforward_projection(&self, frame: &Frame, onto: Onto) -> Result<Self> {
        if frame.ambient_dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: frame.ambient_dim() });
        }
        let target = match onto {
            Onto::E => frame.clone(),
            Onto::Perp => frame.complement(),
        };
        let k = target.k();
        let mut out = RadonMeasure::zero(k);
        for a in &self.atoms {
            out.push_atom(Atom { point: target.coords(&a.point), mass: a.mass });
        }
        out.atoms.retain(|a| a.mass != ZERO);
        let Some(d) = &self.density else { return Ok(out) };
        if k == 0 {
            out.push_atom(Atom { point: Vec::new(), mass: d.cell_masses().iter().sum() });
            return Ok(out);
        }
        let cols = target.columns();
        let mut lo = vec![f64::INFINITY; k];
        let mut hi = vec![f64::NEG_INFINITY; k];
        for corner in 0..(1usize << self.dim) {
            let x: Vec<f64> =
                (0..self.dim).map(|a| if corner >> a & 1 == 1 { d.region.hi[a] } else { d.region.lo[a] }).collect();
            for (j, c) in target.coords(&x).into_iter().enumerate() {
                lo[j] = lo[j].min(c);
                hi[j] = hi[j].max(c);
            }
        }
        let finest = *d.grid.iter().max().unwrap();
        let grid: Vec<usize> = (0..k)
            .map(|j| {
                let col: Vec<f64> = (0..self.dim).map(|a| cols[(a, j)]).collect();
                match coordinate_axis(&col) {
                    Some(a) => d.grid[a],
                    None => finest,
                }
            })
            .collect();
        for j in 0..k {
            if hi[j] - lo[j] <= 1e-300 {
                hi[j] = lo[j] + 1.0;
            }
        }
        let region = AxisBox::new(lo, hi)?;
        let cells: usize = grid.iter().product();
        let mut proj = GridDensity::new(region, grid, vec![ZERO; cells])?;
        let w = proj.cell_widths();
        let inv_vol = 1.0 / proj.cell_volume();
        for (c, m) in d.cell_masses().into_iter().enumerate() {
            if m == ZERO {
                continue;
            }
            let y = target.coords(&d.midpoint(c));
            let mut flat = 0;
            for j in 0..k {
                let t = ((y[j] - proj.region.lo[j]) / w[j]).floor().max(0.0) as usize;
                flat = flat * proj.grid[j] + t.min(proj.grid[j] - 1);
            }
            proj.values[flat] += m * inv_vol;
        }
        out.density = Some(proj);
        Ok(out)
    }

    pub fn to_json(&self) -> MeasureJson {
        MeasureJson {
            atoms: self.atoms.iter().map(|a| AtomJson { x: a.point.clone(), re: a.mass.re, im: a.mass.im }).collect(),
            density: self.density.clone(),
        }
    }

    pub fn from_json(j: &MeasureJson) -> Result<Self> {
        let dim = j
            .density
            .as_ref()
            .map(|d| d.region.dim())
            .or_else(|| j.atoms.first().map(|a| a.x.len()))
            .ok_or(Error::Empty("measure without atoms or density has no dimension"))?;
        let atoms = j.atoms.iter().map(|a| Atom { point: a.x.clone(), mass: Complex64::new(a.re, a.im) }).collect();
        let mut m = Self::from_atoms(dim, atoms)?;
        if let Some(d) = &j.density {
            let d = GridDensity::new(d.region.clone(), d.grid.clone(), d.values.clone())?;
            m.density = Some(d);
        }
        Ok(m)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `Some(a)` when `col` is `+-e_a`.
fn coordinate_axis(col: &[f64]) -> Option<usize> {
    let mut hit = None;
    for (a, v) in col.iter().enumerate() {
        if (v.abs() - 1.0).abs() < 1e-14 {
            if hit.is_some() {
                return None;
            }
            hit = Some(a);
        } else if v.abs() > 1e-14 {
            return None;
        }
    }
    hit
}

/// `{"x": [..], "re": f, "im": f}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomJson {
    pub x: Vec<f64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// `{"atoms": [..], "density": {"box": {"lo", "hi"}, "grid": [..], "values": [[re, im], ..]}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureJson {
    #[serde(default)]
    pub atoms: Vec<AtomJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<GridDensity>,
}

/// Midpoint-rule `int phi(x) exp(i <z, x>) dx` over the support of `phi`
/// (bilinear pairing, `z` is not conjugated).
pub fn fourier_laplace(phi: &TestFunction, z: &[Complex64], grid: &[usize]) -> Result<Complex64> {
    if z.len() != phi.dim() {
        return Err(Error::DimensionMismatch { expected: phi.dim(), actual: z.len() });
    }
    let cells = GridDensity::sample(phi.support(), grid, |_| ZERO)?;
    let i = Complex64::new(0.0, 1.0);
    let mut acc = ZERO;
    for c in 0..cells.num_cells() {
        let x = cells.midpoint(c);
        let v = phi.eval(&x);
        if v != ZERO {
            let phase: Complex64 = z.iter().zip(&x).map(|(zi, xi)| zi * xi).sum();
            acc += v * (i * phase).exp();
        }
    }
    Ok(acc * cells.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn ball_volumes() {
        let pi = std::f64::consts::PI;
        assert_eq!(unit_ball_volume(0), 1.0);
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - pi).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * pi / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - pi * pi / 2.0).abs() < 1e-14);
    }

    #[test]
    fn integrate_basic() {
        let phi = TestFunction::real(AxisBox::cube(2, 1.0), |_| 3.0);
        let d = RadonMeasure::dirac(vec![0.0, 0.0], c(1.0));
        assert_eq!(d.integrate(&phi).unwrap(), c(3.0));

        let leb = RadonMeasure::lebesgue(&AxisBox::unit(2), &[16, 16]).unwrap();
        let one = TestFunction::real(AxisBox::unit(2), |_| 1.0);
        assert!((leb.integrate(&one).unwrap() - c(1.0)).norm() < 1e-12);

        let lin = RadonMeasure::from_density(GridDensity::sample(&AxisBox::unit(2), &[32, 32], |x| c(x[0])).unwrap());
        assert!((lin.integrate(&one).unwrap() - c(0.5)).norm() < 1e-12);
    }

    #[test]
    fn box_masses_half_open() {
        let x = vec![0.5, 0.5];
        let d = RadonMeasure::dirac(x, c(1.0));
        assert_eq!(d.mass_on_box(&AxisBox::unit(2)).unwrap(), c(1.0));
        let upper = AxisBox::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        assert_eq!(d.mass_on_box(&upper).unwrap(), c(0.0));
        for n in 1..=3 {
            let leb = RadonMeasure::lebesgue(&AxisBox::unit(n), &vec![5; n]).unwrap();
            let half = AxisBox::new(vec![0.0; n], vec![0.5; n]).unwrap();
            assert!((leb.mass_on_box(&half).unwrap().re - 0.5f64.powi(n as i32)).abs() < 1e-14);
        }
    }

    #[test]
    fn box_mass_is_additive_over_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let region = AxisBox::cube(2, 1.0);
        let atoms: Vec<Atom> = (0..30)
            .map(|i| Atom { point: if i < 3 { vec![0.0, -0.25 * i as f64] } else { region.sample(&mut rng) }, mass: c(rng.random()) })
            .collect();
        let dens = GridDensity::sample(&AxisBox::new(vec![-0.7, -0.9], vec![0.8, 0.6]).unwrap(), &[7, 9], |x| c(1.0 + x[0] * x[1]))
            .unwrap();
        let m = RadonMeasure::from_atoms(2, atoms).unwrap().add(&RadonMeasure::from_density(dens)).unwrap();
        let cuts = [-1.0, -0.3, 0.0, 0.45, 1.0];
        let mut sum = c(0.0);
        for i in 0..4 {
            for j in 0..4 {
                let b = AxisBox::new(vec![cuts[i], cuts[j]], vec![cuts[i + 1], cuts[j + 1]]).unwrap();
                sum += m.mass_on_box(&b).unwrap();
            }
        }
        assert!((sum - m.mass_on_box(&region).unwrap()).norm() < 1e-12);
        assert!((sum - m.total_mass()).norm() < 1e-12);
    }

    #[test]
    fn integrate_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let region = AxisBox::cube(2, 1.0);
        let mk = |rng: &mut ChaCha8Rng, s: f64| {
            let pts: Vec<Atom> = (0..5).map(|_| Atom { point: region.sample(rng), mass: c(rng.random::<f64>() - 0.5) }).collect();
            let dens = GridDensity::sample(&region, &[8, 8], move |x| Complex64::new(s * x[0], x[1] * x[1])).unwrap();
            RadonMeasure::from_atoms(2, pts).unwrap().add(&RadonMeasure::from_density(dens)).unwrap()
        };
        let (m1, m2) = (mk(&mut rng, 1.0), mk(&mut rng, -2.0));
        let p1 = TestFunction::tent(region.clone());
        let p2 = TestFunction::real(region.clone(), |x| (x[0] + 2.0 * x[1]).sin());
        let (a, b) = (Complex64::new(0.3, -1.2), c(2.5));
        let lhs = m1.scale(a).add(&m2.scale(b)).unwrap().integrate(&p1).unwrap();
        let rhs = a * m1.integrate(&p1).unwrap() + b * m2.integrate(&p1).unwrap();
        assert!((lhs - rhs).norm() < 1e-10);
        let lhs = m1.integrate(&p1.scale(a).add(&p2.scale(b)).unwrap()).unwrap();
        let rhs = a * m1.integrate(&p1).unwrap() + b * m1.integrate(&p2).unwrap();
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn pushforward_of_atom_and_marginal() {
        let d = RadonMeasure::dirac(vec![1.0, 2.0], c(1.0));
        let p = d.pushforward_projection(&Frame::coordinate(2, 1), Onto::E).unwrap();
        assert_eq!(p.atoms(), &[Atom { point: vec![1.0], mass: c(1.0) }]);

        // density (1 + x) * 2y on [0,1)^2 has first marginal (1 + x)
        let dens = GridDensity::sample(&AxisBox::unit(2), &[20, 10], |x| c((1.0 + x[0]) * 2.0 * x[1])).unwrap();
        let m = RadonMeasure::from_density(dens);
        let marg = m.pushforward_projection(&Frame::coordinate(2, 1), Onto::E).unwrap();
        let md = marg.density().unwrap();
        assert_eq!(md.grid, vec![20]);
        for cell in 0..20 {
            let x = md.midpoint(cell)[0];
            assert!((md.values[cell].re - (1.0 + x)).abs() < 1e-12);
        }
        let other = m.pushforward_projection(&Frame::coordinate(2, 1), Onto::Perp).unwrap();
        let od = other.density().unwrap();
        for cell in 0..10 {
            let y = od.midpoint(cell)[0].abs();
            assert!((od.values[cell].re - 1.5 * 2.0 * y).abs() < 1e-12);
        }
    }

    #[test]
    fn pushforward_preserves_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=3 {
            for k in 0..=n {
                let region = AxisBox::cube(n, 1.0);
                let atoms: Vec<Atom> = (0..4).map(|_| Atom { point: region.sample(&mut rng), mass: c(rng.random()) }).collect();
                let dens = GridDensity::sample(&region, &vec![6; n], |x| Complex64::new(x[0].exp(), x[n - 1])).unwrap();
                let m = RadonMeasure::from_atoms(n, atoms).unwrap().add(&RadonMeasure::from_density(dens)).unwrap();
                let f = Frame::random(n, k, &mut rng);
                for onto in [Onto::E, Onto::Perp] {
                    let p = m.pushforward_projection(&f, onto).unwrap();
                    assert!((p.total_mass() - m.total_mass()).norm() < 1e-10 * m.total_variation());
                }
            }
        }
    }

    #[test]
    fn atoms_merge_on_addition() {
        let a = RadonMeasure::dirac(vec![0.0], c(1.0));
        let b = RadonMeasure::dirac(vec![1e-12], c(2.0));
        let s = a.add(&b).unwrap();
        assert_eq!(s.atoms().len(), 1);
        assert_eq!(s.atom_mass_at(&[0.0], 1e-9), c(3.0));
        assert!(a.sub(&a).unwrap().is_zero());
    }

    #[test]
    fn fourier_laplace_checks() {
        let phi = TestFunction::tent(AxisBox::cube(2, 1.0));
        let at0 = fourier_laplace(&phi, &[c(0.0), c(0.0)], &[64, 64]).unwrap();
        let leb = RadonMeasure::lebesgue(phi.support(), &[64, 64]).unwrap();
        assert!((at0 - leb.integrate(&phi).unwrap()).norm() < 1e-12);

        let bump = TestFunction::bump(vec![0.0, 0.0], 1.0);
        let v = fourier_laplace(&bump, &[c(1.3), c(-0.4)], &[40, 40]).unwrap();
        assert!(v.im.abs() < 1e-12 * v.re.abs().max(1.0));

        // truncation at 8 sigma is far below 1e-4
        let s = 0.5;
        let g = TestFunction::truncated_gaussian(2, s, 8.0 * s);
        let z = [c(1.0), c(-2.0)];
        let v = fourier_laplace(&g, &z, &[128, 128]).unwrap();
        let exact = 2.0 * std::f64::consts::PI * s * s * (-0.5 * s * s * 5.0f64).exp();
        assert!((v - c(exact)).norm() < 1e-4);
    }

    #[test]
    fn json_round_trip() {
        let dens = GridDensity::sample(&AxisBox::unit(2), &[2, 3], |x| Complex64::new(x[0], -x[1])).unwrap();
        let m = RadonMeasure::from_density(dens).add(&RadonMeasure::dirac(vec![0.25, 0.5], Complex64::new(1.0, 2.0))).unwrap();
        let s = serde_json::to_string(&m.to_json()).unwrap();
        let back = RadonMeasure::from_json(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back, m);
        let parsed: MeasureJson = serde_json::from_str(r#"{"atoms":[{"x":[1.0],"re":4.0}]}"#).unwrap();
        assert_eq!(RadonMeasure::from_json(&parsed).unwrap().total_mass(), c(4.0));
    }
}
