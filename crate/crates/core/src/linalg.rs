//! Small dense symmetric helpers on row-major `Vec<f64>` matrices.

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenvalues of a symmetric `n × n` matrix, ascending.
pub fn sym_eigenvalues(n: usize, a: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    let m = DMatrix::from_row_slice(n, n, a);
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenpairs of a symmetric matrix, ascending; `vectors[k]` belongs to
/// `values[k]`.
pub fn sym_eigen(n: usize, a: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = DMatrix::from_row_slice(n, n, a);
    let e = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]));
    let values = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| e.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (values, vectors)
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm2(n: usize, a: &[f64]) -> f64 {
    sym_eigenvalues(n, a).iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `‖A − Aᵀ‖_∞ / ‖A‖_∞` with the max-row-sum norm.
pub fn asymmetry(n: usize, a: &[f64]) -> f64 {
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for i in 0..n {
        let (mut r, mut s) = (0.0, 0.0);
        for j in 0..n {
            r += (a[i * n + j] - a[j * n + i]).abs();
            s += a[i * n + j].abs();
        }
        num = num.max(r);
        den = den.max(s);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `(A + Aᵀ)/2` in place.
pub fn symmetrize(n: usize, a: &mut [f64]) {
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = s;
            a[j * n + i] = s;
        }
    }
}
