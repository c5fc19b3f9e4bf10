use itertools::Itertools;
use mavaltk::convex::{self, AffinePiece, ConvexFn, Frame, MaxAffine};
use mavaltk::forms::{self, ConstantForm};
use mavaltk::harness::case_rng;
use mavaltk::maops;
use mavaltk::measures::{Atom, AxisBox, GridDensity, Onto, RadonMeasure, TestFunction};
use mavaltk::minors::{self, SymMatrix};
use mavaltk::poly::MultiPoly;
use mavaltk::Complex64;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn well_conditioned(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal)) + DMatrix::identity(n, n)
}

fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a + a.transpose()) * 0.5
}

fn homogeneous_form(n: usize, p: usize, q: usize, rng: &mut ChaCha8Rng) -> ConstantForm {
    let basis = forms::bidegree_basis(n, p, q);
    let coords: Vec<Complex64> = basis.iter().map(|_| c(rng.sample(StandardNormal))).collect();
    ConstantForm::from_coordinates(n, &basis, &coords)
}

fn random_primitive(n: usize, k: usize, rng: &mut ChaCha8Rng) -> ConstantForm {
    forms::primitive_basis(n, k)
        .unwrap()
        .iter()
        .fold(ConstantForm::zero(n), |acc, b| acc.add(&b.scale_real(rng.sample(StandardNormal))).unwrap())
}

fn tuple(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Complex64>> {
    (0..k).map(|_| gaussian(n, rng).into_iter().map(c).collect()).collect()
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3).prop_flat_map(|n| (Just(n), 0..=n))
}

#[test]
fn wedge_is_graded_anticommutative_on_all_monomials() {
    for n in 1..=3 {
        let subsets: Vec<Vec<usize>> = (0..=n).flat_map(|s| (1..=n).combinations(s)).collect();
        let monos: Vec<(ConstantForm, usize)> = subsets
            .iter()
            .cartesian_product(&subsets)
            .map(|(dx, dy)| (ConstantForm::real_monomial(n, dx, dy, 1.0).unwrap(), dx.len() + dy.len()))
            .collect();
        for (a, da) in &monos {
            for (b, db) in &monos {
                let sign = if da * db % 2 == 0 { 1.0 } else { -1.0 };
                let ab = a.wedge(b).unwrap();
                let ba = b.wedge(a).unwrap().scale_real(sign);
                assert!(ab.sub(&ba).unwrap().is_empty(), "{a} and {b}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lefschetz_split_reconstructs((n, k) in dims(), seed in any::<u64>()) {
        let mut rng = case_rng(seed, 0);
        let tau = homogeneous_form(n, n - k, k, &mut rng);
        let d = forms::lefschetz_project(&tau).unwrap();
        prop_assert!(d.primitive.add(&d.remainder).unwrap().approx_eq(&tau, 1e-12));
        prop_assert!(forms::is_primitive(&d.primitive).unwrap());
    }

    #[test]
    fn pullback_by_g_then_inverse_is_identity((n, k) in dims(), seed in any::<u64>()) {
        let mut rng = case_rng(seed, 1);
        let tau = homogeneous_form(n, n - k, k, &mut rng);
        let g = well_conditioned(n, &mut rng);
        let back = forms::gl_pullback(&g.clone().try_inverse().unwrap(), &forms::gl_pullback(&g, &tau).unwrap()).unwrap();
        prop_assert!(back.approx_eq(&tau, 1e-12));
    }

    #[test]
    fn form_json_round_trips((n, k) in dims(), seed in any::<u64>()) {
        let mut rng = case_rng(seed, 2);
        let tau = homogeneous_form(n, n - k, k, &mut rng);
        let back = ConstantForm::from_json(&tau.to_json()).unwrap();
        prop_assert!(back.approx_eq(&tau, 0.0));
    }

    #[test]
    fn p_is_equivariant((n, k) in dims(), seed in any::<u64>()) {
        let mut rng = case_rng(seed, 3);
        let tau = random_primitive(n, k, &mut rng);
        let g = well_conditioned(n, &mut rng);
        let q = random_sym(n, &mut rng);
        let lhs = minors::p_eval(&forms::gl_pullback(&g, &tau).unwrap(), &SymMatrix::from_real(&q).unwrap()).unwrap();
        let moved = SymMatrix::symmetrized(&(g.transpose() * &q * &g));
        let rhs = minors::p_eval(&tau, &moved).unwrap() / g.determinant();
        prop_assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn q_is_symmetric_and_biquadratic(n in 1usize..=3, seed in any::<u64>()) {
        let mut rng = case_rng(seed, 4);
        let k = rng.random_range(1..=n);
        let tau = random_primitive(n, k, &mut rng);
        let q = minors::q_of_form_with_degree(&tau, k).unwrap();
        let ws = tuple(n, k, &mut rng);
        let base = minors::eval_on_tuple(&q, &ws).unwrap();
        let tol = 1e-9 * base.norm().max(1.0);

        let mut swapped = ws.clone();
        swapped.reverse();
        prop_assert!((minors::eval_on_tuple(&q, &swapped).unwrap() - base).norm() <= tol);

        let i = rng.random_range(0..k);
        let t: f64 = rng.random_range(-2.0..2.0);
        let mut scaled = ws.clone();
        scaled[i].iter_mut().for_each(|z| *z *= t);
        prop_assert!((minors::eval_on_tuple(&q, &scaled).unwrap() - base * t * t).norm() <= tol * 4.0);
    }

    #[test]
    fn q_vanishes_on_dependent_tuples(n in 2usize..=3, seed in any::<u64>()) {
        let mut rng = case_rng(seed, 5);
        let k = rng.random_range(2..=n);
        let tau = random_primitive(n, k, &mut rng);
        let q = minors::q_of_form_with_degree(&tau, k).unwrap();
        let mut ws = tuple(n, k, &mut rng);
        let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        // the last vector in the span of the others
        let mix = if k >= 3 { b } else { 0.0 };
        ws[k - 1] = ws[0].iter().zip(&ws[1]).map(|(x, y)| x * a + y * mix).collect();
        let scale = minors::eval_on_tuple(&q, &tuple(n, k, &mut rng)).unwrap().norm().max(1.0);
        prop_assert!(minors::eval_on_tuple(&q, &ws).unwrap().norm() <= 1e-10 * scale);
    }

    #[test]
    fn minors_and_forms_correspond(n in 1usize..=3, seed in any::<u64>()) {
        let mut rng = case_rng(seed, 6);
        let k = rng.random_range(1..=n);
        let basis = minors::minor_basis(n, k).unwrap();
        let p = basis.polys.iter().fold(MultiPoly::zero(basis.polys[0].vars().clone()), |acc, m| {
            acc.add(&m.scale(c(rng.sample(StandardNormal)))).unwrap()
        });
        let tau = minors::form_from_minors(&p).unwrap();
        prop_assert!(minors::p_of_form(&tau).unwrap().approx_eq(&p, 1e-10));
        let sigma = random_primitive(n, k, &mut rng);
        let again = minors::form_from_minors(&minors::p_of_form(&sigma).unwrap()).unwrap();
        prop_assert!(again.approx_eq(&sigma, 1e-10));
    }

    #[test]
    fn support_functions_follow_minkowski_structure(n in 1usize..=3, seed in any::<u64>()) {
        let mut rng = case_rng(seed, 7);
        let verts: Vec<Vec<f64>> = (0..rng.random_range(1..8)).map(|_| gaussian(n, &mut rng)).collect();
        let x = gaussian(n, &mut rng);
        let moved: Vec<Vec<f64>> = verts.iter().map(|v| v.iter().zip(&x).map(|(a, b)| a + b).collect()).collect();
        let (h, hx) = (convex::support_function(&verts).unwrap(), convex::support_function(&moved).unwrap());
        let t = rng.random_range(0.0..3.0);
        let scaled: Vec<Vec<f64>> = verts.iter().map(|v| v.iter().map(|a| t * a).collect()).collect();
        let ht = convex::support_function(&scaled).unwrap();
        for _ in 0..10 {
            let y = gaussian(n, &mut rng);
            let yx: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
            prop_assert!((hx.eval(&y) - h.eval(&y) - yx).abs() <= 1e-12 * (1.0 + hx.eval(&y).abs()));
            prop_assert!((ht.eval(&y) - t * h.eval(&y)).abs() <= 1e-12 * (1.0 + ht.eval(&y).abs()));
        }
    }

    #[test]
    fn pullback_restricts_back(n in 1usize..=3, seed in any::<u64>()) {
        let mut rng = case_rng(seed, 8);
        let k = rng.random_range(1..=n);
        let frame = Frame::random(n, k, &mut rng);
        let pieces: Vec<AffinePiece> = (0..5).map(|_| AffinePiece { a: gaussian(k, &mut rng), b: rng.sample(StandardNormal) }).collect();
        let f = ConvexFn::MaxAffine(MaxAffine::new(pieces).unwrap());
        let pulled = convex::pullback_subspace(&f, &frame).unwrap();
        for _ in 0..10 {
            let u = gaussian(k, &mut rng);
            prop_assert!((pulled.eval(&frame.embed(&u)) - f.eval(&u)).abs() <= 1e-12 * (1.0 + f.eval(&u).abs()));
        }
        let p = frame.projector();
        prop_assert!((&p * &p - &p).norm() <= 1e-12);
        prop_assert!((p.transpose() - &p).norm() <= 1e-12);
    }

    #[test]
    fn integration_is_bilinear(n in 1usize..=3, seed in any::<u64>()) {
        let mut rng = case_rng(seed, 9);
        let region = AxisBox::cube(n, 1.0);
        let grid = vec![6; n];
        let atoms = |rng: &mut ChaCha8Rng| -> Vec<Atom> {
            (0..3).map(|_| Atom { point: region.sample(rng), mass: c(rng.sample(StandardNormal)) }).collect()
        };
        let dens = |rng: &mut ChaCha8Rng| {
            let w = gaussian(n, rng);
            GridDensity::sample(&region, &grid, move |x| c(x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().sin())).unwrap()
        };
        let mu = RadonMeasure::from_atoms(n, atoms(&mut rng)).unwrap().add(&RadonMeasure::from_density(dens(&mut rng))).unwrap();
        let nu = RadonMeasure::from_atoms(n, atoms(&mut rng)).unwrap().add(&RadonMeasure::from_density(dens(&mut rng))).unwrap();
        let phi = TestFunction::bump(region.sample(&mut rng), 0.8);
        let psi = TestFunction::tent(AxisBox::cube(n, 0.7));
        let (a, b) = (c(rng.sample(StandardNormal)), c(rng.sample(StandardNormal)));

        let combo = mu.scale(a).add(&nu.scale(b)).unwrap();
        let lhs = combo.integrate(&phi).unwrap();
        let rhs = a * mu.integrate(&phi).unwrap() + b * nu.integrate(&phi).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));

        let mixed = phi.scale(a).add(&psi.scale(b)).unwrap();
        let lhs = mu.integrate(&mixed).unwrap();
        let rhs = a * mu.integrate(&phi).unwrap() + b * mu.integrate(&psi).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn box_masses_are_additive_and_pushforward_keeps_mass(n in 1usize..=3, seed in any::<u64>()) {
        let mut rng = case_rng(seed, 10);
        let region = AxisBox::cube(n, 1.0);
        let axis = rng.random_range(0..n);
        let cut: f64 = rng.random_range(-0.8..0.8);
        let mut on_cut = region.sample(&mut rng);
        on_cut[axis] = cut;
        let mut atoms = vec![Atom { point: on_cut, mass: c(1.5) }];
        atoms.extend((0..4).map(|_| Atom { point: region.sample(&mut rng), mass: c(rng.sample(StandardNormal)) }));
        let w = gaussian(n, &mut rng);
        let dens = GridDensity::sample(&region, &vec![5; n], move |x| c(1.0 + 0.3 * x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())).unwrap();
        let mu = RadonMeasure::from_atoms(n, atoms).unwrap().add(&RadonMeasure::from_density(dens)).unwrap();

        let (mut left, mut right) = (region.clone(), region.clone());
        left.hi[axis] = cut;
        right.lo[axis] = cut;
        let whole = mu.mass_on_box(&region).unwrap();
        let parts = mu.mass_on_box(&left).unwrap() + mu.mass_on_box(&right).unwrap();
        prop_assert!((whole - parts).norm() <= 1e-12 * (1.0 + whole.norm()));

        let k = rng.random_range(0..=n);
        let frame = Frame::random(n, k, &mut rng);
        let total = mu.total_mass();
        for onto in [Onto::E, Onto::Perp] {
            let pushed = mu.pushforward_projection(&frame, onto).unwrap();
            prop_assert!((pushed.total_mass() - total).norm() <= 1e-10 * (1.0 + total.norm()));
        }
    }

    #[test]
    fn elementary_symmetric_matches_principal_minors(n in 1usize..=4, seed in any::<u64>()) {
        let mut rng = case_rng(seed, 11);
        let m = random_sym(n, &mut rng);
        let e = maops::elementary_symmetric(&m);
        let s = SymMatrix::from_real(&m).unwrap();
        for (k, ek) in e.iter().enumerate() {
            let sum = s.principal_minor_sum(k);
            prop_assert!((sum.re - ek).abs() <= 1e-10 * (1.0 + ek.abs()), "k={k}: {sum} vs {ek}");
        }
    }
}
