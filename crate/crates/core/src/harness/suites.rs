use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{case_rng, convergence_order, SuiteReport};
use crate::convex::{
    self, AffinePiece, ConvexFn, ConvexitySampling, Frame, LatticeMin, MaxAffine, Quadratic, SmoothConvex,
};
use crate::error::{Error, Result};
use crate::forms::{self, ConstantForm};
use crate::maops::{self, HessianValuation, Lebesgue, MongeAmpere, PsiTau, SumValuation, Valuation, Weighted};
use crate::measures::{AxisBox, RadonMeasure, TestFunction};
use crate::minors::{self, SymMatrix};
use crate::poly::MultiPoly;

/// Panel size of the positivity suite.
pub const POSITIVITY_PANEL: usize = 20;
/// Random vector tuples tested against `Q_tau`.
pub const POSITIVITY_TUPLES: usize = 500;
/// Random PSD matrices tested against `P_tau`.
pub const POSITIVITY_MATRICES: usize = 500;
/// Random `k`-planes tested against the Klain function.
pub const POSITIVITY_FRAMES: usize = 200;

const EXACT: f64 = 1e-9;

/// Sampled nonnegativity of one form under the three criteria.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityVerdict {
    pub label: String,
    pub q: bool,
    pub p: bool,
    pub kl: bool,
    /// Known answer for constructed panel members.
    pub expected: Option<bool>,
}

impl PositivityVerdict {
    pub fn agree(&self) -> bool {
        self.q == self.p && self.p == self.kl
    }
}

fn gaussian<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn gaussian_matrix<R: Rng>(r: usize, c: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn complexify(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// `B B^T / n + 0.2 I`.
fn random_psd<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let b = gaussian_matrix(n, n, rng);
    &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * 0.2
}

/// A quadratic plus two exponentials; Hessian at least `0.2 I`.
fn random_smooth<R: Rng>(n: usize, rng: &mut R) -> Result<SmoothConvex> {
    let q = Quadratic::homogeneous(random_psd(n, rng))?.to_smooth();
    let xs: Vec<Vec<f64>> = (0..2).map(|_| gaussian(n, rng).iter().map(|v| 0.5 * v).collect()).collect();
    q.sum(&maops::exp_sum(&xs))
}

fn random_rotation<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = gaussian_matrix(n, n, rng).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

fn random_primitive<R: Rng>(n: usize, k: usize, rng: &mut R) -> Result<ConstantForm> {
    forms::primitive_basis(n, k)?
        .iter()
        .try_fold(ConstantForm::zero(n), |acc, b| acc.add(&b.scale_real(rng.sample(StandardNormal))))
}

fn smooth_region(n: usize) -> (AxisBox, Vec<usize>) {
    let g = match n {
        1 => 64,
        2 => 24,
        _ => 10,
    };
    (AxisBox::cube(n, 1.0), vec![g; n])
}

/// Bumps with support inside `region`, shrunk by `margin`.
fn random_bumps<R: Rng>(region: &AxisBox, margin: f64, count: usize, rng: &mut R) -> Vec<TestFunction> {
    (0..count)
        .map(|_| {
            let r = rng.random_range(0.25..0.6);
            let center: Vec<f64> = region
                .lo
                .iter()
                .zip(&region.hi)
                .map(|(lo, hi)| {
                    let (a, b) = (lo + r + margin, hi - r - margin);
                    if a < b { rng.random_range(a..b) } else { 0.5 * (lo + hi) }
                })
                .collect();
            TestFunction::bump(center, r)
        })
        .collect()
}

/// `max_i |int phi_i da - int phi_i db| / max(1, max_i |int phi_i da|)`.
fn integral_gap(a: &RadonMeasure, b: &RadonMeasure, phis: &[TestFunction]) -> Result<f64> {
    let (mut gap, mut scale) = (0.0f64, 1.0f64);
    for phi in phis {
        let (x, y) = (a.integrate(phi)?, b.integrate(phi)?);
        gap = gap.max((x - y).norm());
        scale = scale.max(x.norm());
    }
    Ok(gap / scale)
}

/// Total variation of `a - b` relative to the larger of the two.
fn tv_gap(a: &RadonMeasure, b: &RadonMeasure) -> Result<f64> {
    let scale = a.total_variation().max(b.total_variation()).max(1e-300);
    Ok(a.sub(b)?.total_variation() / scale)
}

fn sym_vars(m: &DMatrix<f64>) -> Vec<Complex64> {
    SymMatrix::symmetrized(m).to_vars()
}

fn record<T>(report: &mut SuiteReport, what: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            report.record_error(what, &e);
            None
        }
    }
}

// ---------------------------------------------------------------- positivity

struct Sampled {
    min: f64,
    max_abs: f64,
}

impl Sampled {
    fn new() -> Self {
        Sampled { min: f64::INFINITY, max_abs: 0.0 }
    }

    fn push(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max_abs = self.max_abs.max(v.abs());
    }

    fn nonneg(&self) -> bool {
        self.min >= -EXACT * self.max_abs.max(1e-300)
    }
}

/// Sampled verdicts of `Q_tau >= 0`, `P_tau >= 0` on PSD matrices and `Kl >= 0`.
pub fn positivity_verdict(
    label: &str,
    tau: &ConstantForm,
    k: usize,
    expected: Option<bool>,
    rng: &mut ChaCha8Rng,
) -> Result<PositivityVerdict> {
    let n = tau.dim();
    let q = minors::q_of_form_with_degree(tau, k)?;
    let p = minors::p_of_form(tau)?;

    let mut sq = Sampled::new();
    for _ in 0..POSITIVITY_TUPLES {
        let ws: Vec<Vec<Complex64>> = (0..k).map(|_| complexify(&gaussian(n, rng))).collect();
        sq.push(minors::eval_on_tuple(&q, &ws)?.re);
    }

    // ranks below k make P vanish, so draw ranks from k..=n
    let mut sp = Sampled::new();
    for _ in 0..POSITIVITY_MATRICES {
        let r = rng.random_range(k..=n);
        let v = gaussian_matrix(n, r, rng);
        sp.push(p.eval(&sym_vars(&(&v * v.transpose()))).re);
    }

    let mut sk = Sampled::new();
    for _ in 0..POSITIVITY_FRAMES {
        sk.push(maops::klain(tau, &Frame::random(n, k, rng))?.re);
    }

    Ok(PositivityVerdict { label: label.into(), q: sq.nonneg(), p: sp.nonneg(), kl: sk.nonneg(), expected })
}

fn positivity_panel(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(String, ConstantForm, Option<bool>)>> {
    let mut panel: Vec<(String, ConstantForm, Option<bool>)> = Vec::new();
    let hess = minors::hessian_form(n, k)?;
    panel.push((format!("tau_{k}"), hess.clone(), Some(true)));
    panel.push((format!("-tau_{k}"), hess.scale_real(-1.0), Some(false)));

    if n == 2 && k == 1 {
        let t = ConstantForm::real_monomial(2, &[2], &[1], 1.0)?;
        panel.push(("dx2^dy1".into(), t.clone(), Some(false)));
        panel.push(("-dx2^dy1".into(), t.scale_real(-1.0), Some(true)));
    }

    let basis = minors::minor_basis(n, k)?;
    for ((rows, cols), poly) in basis.labels.iter().zip(&basis.polys).filter(|((r, c), _)| r == c).take(2) {
        let _ = cols;
        let t = minors::form_from_minors(poly)?;
        panel.push((format!("minor{rows:?}"), t.clone(), Some(true)));
        panel.push((format!("-minor{rows:?}"), t.scale_real(-1.0), Some(false)));
    }

    let deltas = minors::frame_minors(n, k)?;
    for s in 0..3 {
        let terms: Vec<minors::SquareTerm> = (0..2)
            .map(|_| minors::SquareTerm {
                coefficient: Complex64::new(rng.random_range(0.1..2.0), 0.0),
                combination: deltas.iter().map(|(alpha, _)| (alpha.clone(), rng.sample(StandardNormal))).collect(),
            })
            .collect();
        let q = minors::expand_squares(n, k, &terms)?;
        panel.push((format!("sos{s}"), minors::form_from_q(&q)?, Some(true)));
    }
    for (a, b) in (0..deltas.len()).flat_map(|a| (a + 1..deltas.len()).map(move |b| (a, b))).take(3) {
        // Delta_a Delta_b as a signed sum of squares
        let terms = minors::nonneg_decomposition(&deltas[a].1.mul(&deltas[b].1)?)?;
        let q = minors::expand_squares(n, k, &terms)?;
        let label = format!("delta{:?}*delta{:?}", deltas[a].0, deltas[b].0);
        panel.push((label, minors::form_from_q(&q)?, Some(false)));
    }

    let mut s = 0;
    while panel.len() < POSITIVITY_PANEL {
        panel.push((format!("random{s}"), random_primitive(n, k, rng)?, None));
        s += 1;
    }
    panel.truncate(POSITIVITY_PANEL);
    Ok(panel)
}

/// Verdicts of the whole positivity panel.
pub fn positivity_verdicts(n: usize, k: usize, seed: u64) -> Result<Vec<PositivityVerdict>> {
    if k == 0 || k > n || n > 4 {
        return Err(Error::DegreeOutOfRange { n, k });
    }
    let mut rng = case_rng(seed, 0);
    let panel = positivity_panel(n, k, &mut rng)?;
    panel
        .iter()
        .enumerate()
        .map(|(i, (label, tau, expected))| {
            positivity_verdict(label, tau, k, *expected, &mut case_rng(seed, 1 + i as u64))
        })
        .collect()
}

/// Agreement of the three positivity criteria on a panel of primitive forms.
pub fn suite_positivity(n: usize, k: usize, seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let config = json!({
        "n": n, "k": k, "panel": POSITIVITY_PANEL, "tuples": POSITIVITY_TUPLES,
        "matrices": POSITIVITY_MATRICES, "frames": POSITIVITY_FRAMES,
    });
    let mut report = SuiteReport::new("positivity", seed, config);
    let verdicts = positivity_verdicts(n, k, seed)?;
    for v in &verdicts {
        report.push(
            format!("{}: Q, P and Klain verdicts agree", v.label),
            "agree",
            format!("Q={} P={} Kl={}", v.q, v.p, v.kl),
            EXACT,
            v.agree(),
        );
        if let Some(e) = v.expected {
            report.check_eq(format!("{}: nonnegativity", v.label), e, v.q && v.p && v.kl);
        }
    }
    let nonneg = verdicts.iter().filter(|v| v.q).count();
    report.note(format!("{nonneg} of {} panel forms nonnegative", verdicts.len()));
    Ok(report.finish(start))
}

/// Observed midpoint-rule order of `mass(grid)` against a 12x finer grid.
fn note_order(report: &mut SuiteReport, label: &str, n: usize, mass: impl Fn(usize) -> Result<f64>) -> Result<()> {
    let base = if n == 3 { 4 } else { 8 };
    let reference = mass(base * 12)?;
    let steps: Vec<usize> = vec![base, 2 * base, 4 * base];
    let errors: Vec<f64> = steps.iter().map(|&g| Ok((mass(g)? - reference).abs())).collect::<Result<_>>()?;
    let hs: Vec<f64> = steps.iter().map(|&g| 1.0 / g as f64).collect();
    let shown: Vec<String> = errors.iter().map(|e| format!("{e:.2e}")).collect();
    report.note(format!(
        "{label}: grids {steps:?}, errors [{}], observed order {:.2}",
        shown.join(", "),
        convergence_order(&hs, &errors)
    ));
    Ok(())
}

// ------------------------------------------------------------ classification

fn max_rel_cell_gap(a: &RadonMeasure, b: &[Complex64]) -> f64 {
    let Some(d) = a.density() else { return f64::INFINITY };
    let scale = b.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    d.values.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

fn poly_on_hessians(p: &MultiPoly, f: &SmoothConvex, like: &RadonMeasure) -> Vec<Complex64> {
    let d = like.density().expect("grid measure");
    (0..d.num_cells()).map(|c| p.eval(&sym_vars(&f.hessian(&d.midpoint(c))))).collect()
}

/// Dimensions, the Hessian and mixed-MA members of the family, and the
/// correspondence between primitive forms and minor polynomials.
pub fn suite_classification(n: usize, seed: u64) -> Result<SuiteReport> {
    if !(1..=3).contains(&n) {
        return Err(Error::Unsupported(format!("classification runs for 1 <= n <= 3, got {n}")));
    }
    let start = Instant::now();
    let (region, grid) = smooth_region(n);
    let mut report = SuiteReport::new("classification", seed, json!({"n": n, "grid": grid, "box": region}));
    let mut rng = case_rng(seed, 0);
    let f = random_smooth(n, &mut rng)?;

    for k in 0..=n {
        let basis = forms::primitive_basis(n, k)?;
        let dim = forms::primitive_dimension(n, k)?;
        report.check_eq(format!("k={k}: primitive basis size"), dim, basis.len());
        report.check_eq(format!("k={k}: Lefschetz kernel dimension"), dim, forms::lefschetz_kernel_dimension(n, k)?);
        if k == 0 {
            continue;
        }
        let qs: Vec<MultiPoly> = basis.iter().map(|b| minors::q_of_form_with_degree(b, k)).collect::<Result<_>>()?;
        report.check_eq(format!("k={k}: rank of tau -> Q_tau"), dim, minors::span_rank(&qs));
        let ps: Vec<MultiPoly> = basis.iter().map(minors::p_of_form).collect::<Result<_>>()?;
        report.check_eq(format!("k={k}: rank of tau -> P_tau"), dim, minors::span_rank(&ps));
        report.check_eq(format!("k={k}: dimension of the minor span"), dim, minors::minor_basis(n, k)?.rank);

        // Hessian measure
        let tau_k = minors::hessian_form(n, k)?;
        if let (Some(a), Some(b)) = (
            record(&mut report, "psi_tau of tau_k", maops::psi_tau(&tau_k, &f, &region, &grid)),
            record(&mut report, "hessian measure", maops::hessian_measure(k, &f, &region, &grid)),
        ) {
            report.check_small(format!("k={k}: Psi[tau_k] equals Phi_k"), tv_gap(&a, &b)?, 1e-10);
        }

        // mixed Monge-Ampere with quadratics
        let quads: Vec<Quadratic> =
            (0..n - k).map(|_| Quadratic::homogeneous(random_psd(n, &mut rng))).collect::<Result<_>>()?;
        if !quads.is_empty() {
            let poly = maops::quadratic_type_density_poly(k, &quads)?;
            let span = minors::express_in_minors(&poly, k)?;
            report.check_small(format!("k={k}: mixed-MA density lies in the minor span"), span.residual(), minors::SPAN_TOL);
            let tau = minors::form_from_minors(&poly)?;
            let a = maops::psi_tau(&tau, &f, &region, &grid)?;
            let b = maops::mixed_ma_quadratic_type(k, &f, &quads, &region, &grid)?;
            report.check_small(format!("k={k}: Psi_tau reproduces MA(f[k], Q..)"), tv_gap(&a, &b)?, 1e-9);
        }

        // random member of the minor span
        let mb = minors::minor_basis(n, k)?;
        let p = mb.polys.iter().try_fold(MultiPoly::zero(mb.polys[0].vars().clone()), |acc, m| {
            acc.add(&m.scale(Complex64::new(rng.sample(StandardNormal), 0.0)))
        })?;
        let tau = minors::form_from_minors(&p)?;
        report.push(
            format!("k={k}: form_from_minors is primitive"),
            "true",
            format!("{}", forms::is_primitive(&tau)?),
            0.0,
            forms::is_primitive(&tau)?,
        );
        let back = minors::p_of_form(&tau)?;
        report.check_small(
            format!("k={k}: P of the recovered form"),
            back.sub(&p)?.max_abs_coefficient() / p.max_abs_coefficient().max(1e-300),
            1e-10,
        );
        let m = maops::psi_tau(&tau, &f, &region, &grid)?;
        let direct = poly_on_hessians(&p, &f, &m);
        report.check_small(format!("k={k}: Psi_tau density is P(D^2 f)"), max_rel_cell_gap(&m, &direct), 1e-10);
    }

    let tau = minors::hessian_form(n, n.min(2))?;
    let label = format!("Psi[tau_{}] total mass", n.min(2));
    note_order(&mut report, &label, n, |g| Ok(maops::psi_tau(&tau, &f, &region, &vec![g; n])?.total_mass().re))?;
    Ok(report.finish(start))
}

// --------------------------------------------------------------- equivariance

fn diag(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(values))
}

/// `g^{-1} B` for diagonal `g`.
fn diag_preimage(g: &[f64], b: &AxisBox) -> Result<AxisBox> {
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for ((a, c), t) in b.lo.iter().zip(&b.hi).zip(g) {
        let (x, y) = (a / t, c / t);
        lo.push(x.min(y));
        hi.push(x.max(y));
    }
    AxisBox::new(lo, hi)
}

/// Mass of `(g . Psi)(f)` on `B` over the mass of `Psi(f)` on `B`, for diagonal `g`.
fn weight_ratio(psi: &dyn Fn(&AxisBox) -> Box<dyn Valuation>, f: &SmoothConvex, g: &[f64], b: &AxisBox) -> Result<f64> {
    let fg = ConvexFn::Smooth(f.compose_linear(&diag(g))?);
    let moved = psi(&diag_preimage(g, b)?).eval(&fg)?.total_mass().re;
    let fixed = psi(b).eval(&ConvexFn::Smooth(f.clone()))?.total_mass().re;
    Ok(moved / fixed)
}

/// Klain functions under rotations and weights under scalings.
pub fn suite_equivariance(n: usize, seed: u64) -> Result<SuiteReport> {
    if !(1..=3).contains(&n) {
        return Err(Error::Unsupported(format!("equivariance runs for 1 <= n <= 3, got {n}")));
    }
    let start = Instant::now();
    let rotations = 100;
    let (_, grid) = smooth_region(n);
    let b = AxisBox::cube(n, 0.5);
    let mut report = SuiteReport::new("equivariance", seed, json!({"n": n, "rotations": rotations, "grid": grid}));
    let mut rng = case_rng(seed, 0);
    let rots: Vec<DMatrix<f64>> = (0..rotations).map(|_| random_rotation(n, &mut rng)).collect();

    for k in 0..=n {
        let e = Frame::random(n, k, &mut rng);
        let frames: Vec<Frame> = rots.iter().map(|r| e.rotated(r)).collect::<Result<_>>()?;
        let tau = minors::hessian_form(n, k)?;
        let vals: Vec<f64> = frames.iter().map(|fr| Ok(maops::klain(&tau, fr)?.re)).collect::<Result<_>>()?;
        let spread = vals.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v)) - vals.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        report.check_small(format!("k={k}: Klain function of tau_k is constant on SO(n) orbits"), spread, EXACT);
        report.check_close(format!("k={k}: Klain function of tau_k"), 1.0, vals[0], EXACT);

        if (1..n).contains(&k) {
            let mut widest = 0.0f64;
            for t in forms::primitive_basis(n, k)? {
                let vals: Vec<f64> = frames.iter().map(|fr| Ok(maops::klain(&t, fr)?.re)).collect::<Result<_>>()?;
                let hi = vals.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
                let lo = vals.iter().fold(f64::INFINITY, |a, &v| a.min(v));
                widest = widest.max(hi - lo);
            }
            report.push(
                format!("k={k}: some primitive form has a non-constant Klain function"),
                "> 1e-3",
                format!("{widest:.3e}"),
                1e-3,
                widest > 1e-3,
            );
        }
    }
    if n == 2 {
        let t = ConstantForm::real_monomial(2, &[2], &[1], 1.0)?;
        let e1 = maops::klain(&t, &Frame::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0]))?)?.re;
        let e2 = maops::klain(&t, &Frame::new(DMatrix::from_column_slice(2, 1, &[0.0, 1.0]))?)?.re;
        report.check_close("Klain of dx2^dy1 on span e1", -1.0, e1, EXACT);
        report.check_close("Klain of dx2^dy1 on span e2", 0.0, e2, EXACT);
    }

    // weights of GL(n) acting by (g.Psi)(f)[B] = Psi(f o g)[g^{-1} B]
    let f = random_smooth(n, &mut rng)?;
    let t = 1.5;
    let scalar = vec![t; n];
    let double = vec![2.0; n];
    let mut aniso = vec![1.0; n];
    aniso[n - 1] = 2.0;
    let mut flip = vec![1.0; n];
    flip[0] = -1.3;
    let gr = grid.clone();
    let ma_v = move |r: &AxisBox| -> Box<dyn Valuation> { Box::new(MongeAmpere { region: r.clone(), grid: gr.clone() }) };
    let gr = grid.clone();
    let leb_v = move |r: &AxisBox| -> Box<dyn Valuation> { Box::new(Lebesgue { region: r.clone(), grid: gr.clone() }) };
    for g in [&scalar, &double, &aniso, &flip] {
        let det: f64 = g.iter().product::<f64>().abs();
        report.check_close(format!("MA weight under diag{g:?}"), det, weight_ratio(&ma_v, &f, g, &b)?, EXACT);
        report.check_close(format!("vol weight under diag{g:?}"), 1.0 / det, weight_ratio(&leb_v, &f, g, &b)?, EXACT);
    }
    let fs = ConvexFn::Smooth(f.clone());
    note_order(&mut report, "MA total mass on B", n, |g| {
        Ok(MongeAmpere { region: b.clone(), grid: vec![g; n] }.eval(&fs)?.total_mass().re)
    })?;
    for k in 1..n {
        let gr = grid.clone();
        let phi = move |r: &AxisBox| -> Box<dyn Valuation> {
            Box::new(HessianValuation { k, region: r.clone(), grid: gr.clone() })
        };
        let r = weight_ratio(&phi, &f, &scalar, &b)?;
        report.check_close(format!("Phi_{k} weight under {t} Id"), t.powi(2 * k as i32 - n as i32), r, EXACT);
        for g in [&scalar, &aniso] {
            let r = weight_ratio(&phi, &f, g, &b)?;
            let det: f64 = g.iter().product::<f64>().abs();
            let off = (r - det).abs().min((r - 1.0 / det).abs());
            report.push(
                format!("Phi_{k} is neither |det|- nor |det|^-1-equivariant under diag{g:?}"),
                "> 1e-3",
                format!("ratio {r:.6}, |det| {det}"),
                1e-3,
                off > 1e-3,
            );
        }
    }
    Ok(report.finish(start))
}

// ----------------------------------------------------------- valuation axioms

/// Legendre-type PL function with pieces at jittered points of `{-1, 0, 1}^n`.
fn grid_pl<R: Rng>(n: usize, rng: &mut R) -> Result<(MaxAffine, Vec<Vec<i32>>)> {
    let mut pieces = Vec::new();
    let mut idx = Vec::new();
    for code in 0..3usize.pow(n as u32) {
        let ijk: Vec<i32> = (0..n).map(|d| (code / 3usize.pow(d as u32) % 3) as i32 - 1).collect();
        let a: Vec<f64> = ijk.iter().map(|&i| i as f64 + 0.05 * rng.sample::<f64, _>(StandardNormal)).collect();
        let b = -0.5 * a.iter().map(|v| v * v).sum::<f64>();
        pieces.push(AffinePiece { a, b });
        idx.push(ijk);
    }
    Ok((MaxAffine::new(pieces)?, idx))
}

fn raise(g: &MaxAffine, j: usize, eps: f64) -> Result<MaxAffine> {
    let mut pieces = g.pieces().to_vec();
    pieces[j].b += eps;
    MaxAffine::new(pieces)
}

fn smooth_valuations(n: usize, region: &AxisBox, grid: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<Box<dyn Valuation>>> {
    let mut out: Vec<Box<dyn Valuation>> = vec![
        Box::new(MongeAmpere { region: region.clone(), grid: grid.to_vec() }),
        Box::new(Lebesgue { region: region.clone(), grid: grid.to_vec() }),
    ];
    for k in 1..n {
        out.push(Box::new(HessianValuation { k, region: region.clone(), grid: grid.to_vec() }));
    }
    for k in 1..=n {
        out.push(Box::new(PsiTau::new(random_primitive(n, k, rng)?, region.clone(), grid.to_vec())?));
    }
    Ok(out)
}

/// `f + c <u, x>^3`, convex on the unit cube when `6 c sqrt(n)` stays below
/// the smallest Hessian eigenvalue of `f`.
fn cubic_perturbation(f: &SmoothConvex, u: Vec<f64>, c: f64) -> Result<SmoothConvex> {
    let n = f.dim();
    let (u1, u2, u3) = (u.clone(), u.clone(), u);
    let dot = |u: &[f64], x: &[f64]| -> f64 { u.iter().zip(x).map(|(a, b)| a * b).sum() };
    let cubic = SmoothConvex::new(
        n,
        Arc::new(move |x| c * dot(&u1, x).powi(3)),
        Arc::new(move |x| {
            let s = 3.0 * c * dot(&u2, x).powi(2);
            u2.iter().map(|v| s * v).collect()
        }),
        Some(Arc::new(move |x| {
            let s = 6.0 * c * dot(&u3, x);
            let v = DVector::from_column_slice(&u3);
            &v * v.transpose() * s
        })),
    );
    f.sum(&cubic)
}

/// Every atom and cell of every part is at least `-1e-9` times the largest
/// total variation among the parts, so round-off in vanishing parts is ignored.
fn components_nonneg(parts: &[RadonMeasure]) -> bool {
    let scale = parts.iter().map(|m| m.total_variation()).fold(1e-300, f64::max);
    parts.iter().all(|m| {
        let dens_ok = m.density().is_none_or(|d| d.values.iter().all(|v| v.re >= -EXACT * scale));
        dens_ok && m.atoms().iter().all(|a| a.mass.re >= -EXACT * scale)
    })
}

fn measure_nonneg(m: &RadonMeasure) -> bool {
    components_nonneg(std::slice::from_ref(m))
}

/// The valuation identity, invariances, locality, homogeneity and
/// decomposition of Monge-Ampere-type operators.
pub fn suite_valuation_axioms(n: usize, seed: u64) -> Result<SuiteReport> {
    if !(1..=3).contains(&n) {
        return Err(Error::Unsupported(format!("valuation axioms run for 1 <= n <= 3, got {n}")));
    }
    let start = Instant::now();
    let (region, grid) = smooth_region(n);
    let window = AxisBox::cube(n, 3.0);
    let mut report =
        SuiteReport::new("valuation-axioms", seed, json!({"n": n, "grid": grid, "box": region, "window": window}));
    let mut rng = case_rng(seed, 0);
    let vals = smooth_valuations(n, &region, &grid, &mut rng)?;
    let phis = random_bumps(&region, 0.0, 5, &mut rng);

    // valuation identity, piecewise linear
    let pairs = 3;
    for p in 0..pairs {
        let (g, idx) = grid_pl(n, &mut rng)?;
        let far: Vec<(usize, usize)> = (0..idx.len())
            .flat_map(|a| (0..idx.len()).map(move |b| (a, b)))
            .filter(|&(a, b)| idx[a].iter().zip(&idx[b]).any(|(x, y)| (x - y).abs() == 2))
            .collect();
        let (j1, j2) = far[rng.random_range(0..far.len())];
        let eps = rng.random_range(0.01..0.05);
        let f = ConvexFn::MaxAffine(raise(&g, j1, eps)?);
        let h = ConvexFn::MaxAffine(raise(&g, j2, eps)?);
        let lp = convex::lattice_pair_check(&f, &h, &ConvexitySampling::new(window.clone(), seed ^ p))?;
        let LatticeMin::Convex(min) = lp.min else {
            report.push(format!("PL pair {p}: minimum is convex"), "convex", "not convex", 0.0, false);
            continue;
        };
        let m = |x: &ConvexFn| maops::ma(x, &window, &grid);
        let lhs = m(&f)?.add(&m(&h)?)?;
        let rhs = m(&lp.max)?.add(&m(&min)?)?;
        let pl_phis: Vec<TestFunction> = random_bumps(&AxisBox::cube(n, 2.5), 0.0, 5, &mut rng)
            .into_iter()
            .chain([TestFunction::indicator(window.clone())])
            .collect();
        report.check_small(format!("PL pair {p}: MA(f)+MA(h) = MA(f v h)+MA(f ^ h)"), integral_gap(&lhs, &rhs, &pl_phis)?, EXACT);
    }

    // valuation identity, C^2
    let f = random_smooth(n, &mut rng)?;
    let u = {
        let v = gaussian(n, &mut rng);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / norm).collect::<Vec<_>>()
    };
    let h = cubic_perturbation(&f, u, 0.02 / (n as f64).sqrt())?;
    let (fc, hc) = (ConvexFn::Smooth(f.clone()), ConvexFn::Smooth(h));
    let lp = convex::lattice_pair_check(&fc, &hc, &ConvexitySampling::new(region.clone(), seed))?;
    match lp.min {
        LatticeMin::Convex(min) => {
            for v in &vals {
                let lhs = v.eval(&fc)?.add(&v.eval(&hc)?)?;
                let rhs = v.eval(&lp.max)?.add(&v.eval(&min)?)?;
                report.check_small(format!("{}: valuation identity on a C^2 pair", v.name()), integral_gap(&lhs, &rhs, &phis)?, 1e-6);
            }
        }
        LatticeMin::NotConvex => report.push("C^2 pair: minimum is convex", "convex", "not convex", 0.0, false),
    }

    // epi-translation invariance
    let a = gaussian(n, &mut rng);
    let b0: f64 = rng.sample(StandardNormal);
    for v in &vals {
        let gap = tv_gap(&v.eval(&fc)?, &v.eval(&fc.add_affine(&a, b0))?)?;
        report.check_small(format!("{}: invariant under adding affine functions", v.name()), gap, 1e-12);
    }
    let (g, _) = grid_pl(n, &mut rng)?;
    let gpl = ConvexFn::MaxAffine(g.clone());
    let pl_phis = random_bumps(&AxisBox::cube(n, 2.0), 0.0, 5, &mut rng);
    let gap = integral_gap(&maops::ma(&gpl, &window, &grid)?, &maops::ma(&gpl.add_affine(&a, b0), &window, &grid)?, &pl_phis)?;
    report.check_small("MA: PL epi-translation invariance", gap, EXACT);

    // translation equivariance: Psi(f(. + x)) integrates phi like Psi(f) integrates phi(. - x)
    let h_cell = 2.0 / grid[0] as f64;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2i32..=2) as f64 * h_cell).collect();
    let inner_phis = random_bumps(&region, 0.3, 3, &mut rng);
    for v in &vals {
        let moved = v.eval(&fc.translate(&x))?;
        let fixed = v.eval(&fc)?;
        let mut gap = 0.0f64;
        for phi in &inner_phis {
            let (p, q) = (moved.integrate(phi)?, fixed.integrate(&phi.translate(&x))?);
            gap = gap.max((p - q).norm() / p.norm().max(1.0));
        }
        report.check_small(format!("{}: translation equivariance", v.name()), gap, EXACT);
    }
    let xp = gaussian(n, &mut rng).iter().map(|v| 0.3 * v).collect::<Vec<_>>();
    let moved = maops::ma(&gpl.translate(&xp), &window, &grid)?;
    let fixed = maops::ma(&gpl, &window, &grid)?;
    let mut gap = 0.0f64;
    for phi in &pl_phis {
        let (p, q) = (moved.integrate(phi)?, fixed.integrate(&phi.translate(&xp))?);
        gap = gap.max((p - q).norm() / p.norm().max(1.0));
    }
    report.check_small("MA: PL translation equivariance", gap, EXACT);

    // locality: changing f away from an open set V leaves Psi(f) on V unchanged
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
    let v_box = AxisBox::cube(n, 0.25).translate(&c);
    let mut p_far = c.clone();
    p_far[0] += 0.85;
    let delta = 0.01;
    let grad = f.gradient(&p_far);
    let b_far = f.value(&p_far) - grad.iter().zip(&p_far).map(|(g, p)| g * p).sum::<f64>() + delta;
    let plane = Quadratic::new(DMatrix::zeros(n, n), grad, b_far)?.to_smooth();
    let bumped = ConvexFn::Smooth(f.max_with(&plane)?);
    let local_phis = vec![TestFunction::bump(c.clone(), 0.25), TestFunction::tent(v_box.clone())];
    for v in &vals {
        let gap = integral_gap(&v.eval(&fc)?, &v.eval(&bumped)?, &local_phis)?;
        report.check_small(format!("{}: locality", v.name()), gap, 1e-12);
    }
    let changed = tv_gap(&vals[0].eval(&fc)?, &vals[0].eval(&bumped)?)?;
    report.push("locality probe changes MA away from V", "> 0", format!("{changed:.3e}"), 0.0, changed > 0.0);
    {
        let corners: Vec<Vec<f64>> = (0..1usize << n)
            .map(|m| (0..n).map(|d| if m >> d & 1 == 1 { v_box.hi[d] } else { v_box.lo[d] }).collect())
            .collect();
        let lower = g
            .pieces()
            .iter()
            .map(|p| corners.iter().map(|x| p.eval(x)).fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max);
        let d = {
            let v = gaussian(n, &mut rng);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / norm).collect::<Vec<_>>()
        };
        let s = 5.0;
        let reach = 0.25 * (n as f64).sqrt();
        let a: Vec<f64> = d.iter().map(|v| s * v).collect();
        let b = lower - 0.1 - s * (d.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>() + reach);
        let steep = ConvexFn::MaxAffine(g.max_with(&MaxAffine::affine(a, b))?);
        let gap = integral_gap(&maops::ma(&gpl, &window, &grid)?, &maops::ma(&steep, &window, &grid)?, &local_phis)?;
        report.check_small("MA: PL locality", gap, EXACT);
    }

    // homogeneity of the declared degree
    let t = 1.7;
    for v in &vals {
        let Some(d) = v.degree() else { continue };
        let scaled = v.eval(&fc.scale(t))?;
        let expected = v.eval(&fc)?.scale_real(t.powi(d as i32));
        report.check_small(format!("{}: homogeneous of degree {d}", v.name()), tv_gap(&scaled, &expected)?, 1e-10);
    }
    let gap = integral_gap(
        &maops::ma(&gpl.scale(t), &window, &grid)?,
        &maops::ma(&gpl, &window, &grid)?.scale_real(t.powi(n as i32)),
        &pl_phis,
    )?;
    report.check_small(format!("MA: PL homogeneous of degree {n}"), gap, EXACT);

    // homogeneous decomposition
    let mk = |w: f64| -> SumValuation {
        SumValuation(vec![
            Box::new(MongeAmpere { region: region.clone(), grid: grid.clone() }),
            Box::new(Lebesgue { region: region.clone(), grid: grid.clone() }),
            Box::new(Weighted::constant(
                Box::new(HessianValuation { k: 1, region: region.clone(), grid: grid.clone() }),
                Complex64::new(w, 0.0),
            )),
        ])
    };
    let plus = mk(1.0);
    let parts = maops::decompose_homogeneous(&plus, &fc)?;
    let total = parts[1..].iter().try_fold(parts[0].clone(), |acc, m| acc.add(m))?;
    report.check_small("decomposition: components sum to Psi(f)", tv_gap(&total, &plus.eval(&fc)?)?, 1e-8);
    let leb = Lebesgue { region: region.clone(), grid: grid.clone() }.eval(&fc)?;
    report.check_small("decomposition: degree-0 component is vol", tv_gap(&parts[0], &leb)?, 1e-8);
    let top = MongeAmpere { region: region.clone(), grid: grid.clone() }.eval(&fc)?;
    let phi1 = HessianValuation { k: 1, region: region.clone(), grid: grid.clone() }.eval(&fc)?;
    let expected_top = if n == 1 { top.add(&phi1)? } else { top };
    report.check_small("decomposition: degree-n component", tv_gap(&parts[n], &expected_top)?, 1e-8);
    if n >= 2 {
        report.check_small("decomposition: degree-1 component is Phi_1", tv_gap(&parts[1], &phi1)?, 1e-8);
    }
    let scaled_parts = maops::decompose_homogeneous(&plus, &fc.scale(0.7))?;
    let scale = parts.iter().map(|m| m.total_variation()).fold(1e-300, f64::max);
    let worst = (0..=n)
        .map(|j| Ok(scaled_parts[j].sub(&parts[j].scale_real(0.7f64.powi(j as i32)))?.total_variation() / scale))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    report.check_small("decomposition: components are homogeneous", worst, 1e-8);

    // nonnegativity on a scaling family versus nonnegativity of components
    let scales: Vec<f64> = (0..=16).map(|i| 10f64.powf(-2.0 + 0.25 * i as f64)).collect();
    let family: Vec<SmoothConvex> = (0..3).map(|_| random_smooth(n, &mut rng)).collect::<Result<_>>()?;
    for (label, w, expected) in [("MA + vol + Phi_1", 1.0, true), ("MA + vol - 3 Phi_1", -3.0, false)] {
        let psi = mk(w);
        let mut total_ok = true;
        let mut parts_ok = true;
        for g in &family {
            let g = ConvexFn::Smooth(g.clone());
            parts_ok &= components_nonneg(&maops::decompose_homogeneous(&psi, &g)?);
            for &s in &scales {
                total_ok &= measure_nonneg(&psi.eval(&g.scale(s))?);
            }
        }
        report.check_eq(format!("{label}: nonnegative on the scaling family"), expected, total_ok);
        report.check_eq(format!("{label}: components nonnegative"), expected, parts_ok);
    }

    // vanishing on functions pulled back from low-dimensional subspaces
    if n >= 2 {
        let e = Frame::random(n, n - 1, &mut rng);
        let low = MaxAffine::new(
            (0..6).map(|_| AffinePiece { a: gaussian(n - 1, &mut rng), b: rng.random_range(-1.0..0.0) }).collect(),
        )?;
        let pulled = convex::pullback_subspace(&ConvexFn::MaxAffine(low), &e)?;
        let tv = maops::ma(&pulled, &window, &grid)?.total_variation();
        report.check_small("MA vanishes on PL functions of n-1 variables", tv, EXACT);
        for k in 2..=n {
            let e = Frame::random(n, k - 1, &mut rng);
            let low = ConvexFn::Smooth(random_smooth(k - 1, &mut rng)?);
            let pulled = convex::pullback_subspace(&low, &e)?;
            let Some(ps) = pulled.as_smooth() else { continue };
            let tau = random_primitive(n, k, &mut rng)?;
            let m = maops::psi_tau(&tau, ps, &region, &grid)?;
            let scale = maops::psi_tau(&tau, &f, &region, &grid)?.total_variation().max(1.0);
            report.check_small(format!("Psi_tau of degree {k} vanishes on functions of {} variables", k - 1), m.total_variation() / scale, 1e-10);
        }
    }

    // GL equivariance of the densities: P_{g.tau}(D^2 f(y)) = det(g)^{-1} P_tau(D^2 (f o g)(g^{-1} y))
    for k in 1..=n {
        let gm = gaussian_matrix(n, n, &mut rng) * 0.5 + DMatrix::identity(n, n);
        let Some(ginv) = gm.clone().try_inverse() else { continue };
        let det = gm.determinant();
        let tau = random_primitive(n, k, &mut rng)?;
        let moved = forms::gl_pullback(&gm, &tau)?;
        let fg = f.compose_linear(&gm)?;
        let mut gap = 0.0f64;
        let mut scale = 1.0f64;
        for _ in 0..50 {
            let y = region.sample(&mut rng);
            let x: Vec<f64> = (&ginv * DVector::from_column_slice(&y)).iter().copied().collect();
            let lhs = minors::p_eval(&moved, &SymMatrix::symmetrized(&f.hessian(&y)))?;
            let rhs = minors::p_eval(&tau, &SymMatrix::symmetrized(&fg.hessian(&x)))? / det;
            gap = gap.max((lhs - rhs).norm());
            scale = scale.max(lhs.norm());
        }
        report.check_small(format!("Psi_tau of degree {k}: GL(n) equivariance"), gap / scale, EXACT);
    }
    note_order(&mut report, "Phi_1 integral of a bump", n, |g| {
        let m = HessianValuation { k: 1, region: region.clone(), grid: vec![g; n] }.eval(&fc)?;
        Ok(m.integrate(&phis[0])?.re)
    })?;

    Ok(report.finish(start))
}
