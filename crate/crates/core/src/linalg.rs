//! Small dense linear-algebra helpers shared by the form and polynomial code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Reduced row echelon form with partial pivoting. Returns the reduced matrix
/// and the pivot columns.
pub fn rref(m: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, Vec<usize>) {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.amax().max(1.0);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, val) = (r..rows)
            .map(|i| (i, a[(i, c)].abs()))
            .fold((r, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol * scale {
            continue;
        }
        a.swap_rows(r, best);
        let p = a[(r, c)];
        for j in 0..cols {
            a[(r, j)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = a[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        a[(i, j)] -= f * a[(r, j)];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (a, pivots)
}

/// Basis of the null space read off the free columns of the RREF.
pub fn kernel_basis(m: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return (0..cols)
            .map(|i| DVector::from_fn(cols, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
    }
    let (r, pivots) = rref(m, tol);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = DVector::zeros(cols);
            v[f] = 1.0;
            for (row, &p) in pivots.iter().enumerate() {
                v[p] = -r[(row, f)];
            }
            v
        })
        .collect()
}

/// Numerical rank from singular values relative to the largest one.
pub fn svd_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Smallest singular value divided by the largest.
pub fn inverse_condition(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    if top == 0.0 {
        0.0
    } else {
        sv.min() / top
    }
}

/// Least-squares solution of `a x = b` for complex `b` (real `a`), together with
/// the relative residual `|a x - b| / |b|` (absolute when `b` vanishes).
pub fn lstsq_complex(a: &DMatrix<f64>, b: &[Complex64]) -> (Vec<Complex64>, f64) {
    let svd = a.clone().svd(true, true);
    let re = DVector::from_iterator(b.len(), b.iter().map(|z| z.re));
    let im = DVector::from_iterator(b.len(), b.iter().map(|z| z.im));
    let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let xr = svd.solve(&re, eps).expect("svd has both factors");
    let xi = svd.solve(&im, eps).expect("svd has both factors");
    let rr = a * &xr - &re;
    let ri = a * &xi - &im;
    let res = (rr.norm_squared() + ri.norm_squared()).sqrt();
    let bn = (re.norm_squared() + im.norm_squared()).sqrt();
    let rel = if bn > 0.0 { res / bn } else { res };
    let x = xr
        .iter()
        .zip(xi.iter())
        .map(|(&r, &i)| Complex64::new(r, i))
        .collect();
    (x, rel)
}

/// Determinant of a small complex matrix by Gaussian elimination.
pub fn det_complex(m: &[Vec<Complex64>]) -> Complex64 {
    let n = m.len();
    let mut a: Vec<Vec<Complex64>> = m.to_vec();
    let mut det = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].norm().total_cmp(&a[j][c].norm()))
            .unwrap();
        if a[p][c].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        let pivot = a[c][c];
        det *= pivot;
        for i in c + 1..n {
            let f = a[i][c] / pivot;
            for j in c..n {
                let v = a[c][j];
                a[i][j] -= f * v;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_rank_one_map() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = kernel_basis(&m, 1e-12);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!((&m * v).norm() < 1e-14);
        }
    }

    #[test]
    fn empty_rows_give_full_kernel() {
        let m = DMatrix::<f64>::zeros(0, 4);
        assert_eq!(kernel_basis(&m, 1e-12).len(), 4);
    }

    #[test]
    fn complex_determinant_matches_real() {
        let m = vec![
            vec![Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.0)],
            vec![Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)],
        ];
        assert!((det_complex(&m) - Complex64::new(5.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn lstsq_reports_residual() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]);
        let b = [1.0, 2.0, 3.0].map(|x| Complex64::new(x, 0.0));
        let (x, rel) = lstsq_complex(&a, &b);
        assert!((x[0].re - 2.0).abs() < 1e-12);
        assert!(rel > 0.1);
    }
}
