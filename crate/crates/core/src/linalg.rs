//! Dense complex linear algebra helpers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    let mut out = match n {
        0 => Vec::new(),
        1 => vec![m[(0, 0)].re],
        2 => {
            let (a, d) = (m[(0, 0)].re, m[(1, 1)].re);
            let b = m[(0, 1)];
            let mean = 0.5 * (a + d);
            let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            vec![mean - r, mean + r]
        }
        _ => m.clone().symmetric_eigenvalues().iter().copied().collect(),
    };
    out.sort_by(|x, y| x.total_cmp(y));
    out
}

/// Eigenvalues (ascending) and matching orthonormal eigenvectors as columns.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `-sum x ln x` over a spectrum, treating nonpositive values as zero.
pub fn spectrum_entropy(eigs: &[f64]) -> f64 {
    let h: f64 = eigs
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum();
    h.max(0.0)
}

/// Von Neumann entropy of a Hermitian PSD matrix without validation.
pub fn hermitian_entropy(m: &CMat) -> f64 {
    spectrum_entropy(&hermitian_eigenvalues(m))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// Largest entrywise modulus of `m - m^dagger`.
pub fn hermiticity_error(m: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Outer product `|v><v|`.
pub fn projector(v: &DVector<C64>) -> CMat {
    v * v.adjoint()
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let n = m.nrows();
    let d = CMat::from_fn(n, n, |i, j| if i == j { f(vals[i]) } else { ZERO });
    &vecs * d * vecs.adjoint()
}

/// Builds an `rows x cols` complex matrix from `2 * rows * cols` reals
/// (real parts first, then imaginary parts, both column-major).
pub fn complex_from_reals(params: &[f64], rows: usize, cols: usize) -> CMat {
    let n = rows * cols;
    debug_assert_eq!(params.len(), 2 * n);
    CMat::from_fn(rows, cols, |r, c| {
        let k = c * rows + r;
        C64::new(params[k], params[n + k])
    })
}

pub fn reals_from_complex(m: &CMat) -> Vec<f64> {
    let n = m.len();
    let mut out = vec![0.0; 2 * n];
    for (k, z) in m.iter().enumerate() {
        out[k] = z.re;
        out[n + k] = z.im;
    }
    out
}

/// Polar factor `G (G^dagger G)^{-1/2}`: the isometry closest to `G`.
/// Returns `None` when `G` is rank deficient.
pub fn polar_isometry(g: &CMat) -> Option<CMat> {
    let gram = g.adjoint() * g;
    let (vals, _) = hermitian_eigen(&gram);
    let scale = vals.last().copied().unwrap_or(0.0).max(1e-300);
    if vals.first().copied().unwrap_or(0.0) <= 1e-14 * scale {
        return None;
    }
    let inv_sqrt = hermitian_function(&gram, |x| C64::new(1.0 / x.sqrt(), 0.0));
    Some(g * inv_sqrt)
}

/// The first `cols` columns of the identity of size `rows`.
pub fn identity_isometry(rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |r, c| if r == c { ONE } else { ZERO })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_by_two_fast_path_matches_general_solver() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(0.7, 0.0),
                C64::new(0.1, -0.2),
                C64::new(0.1, 0.2),
                C64::new(0.3, 0.0),
            ],
        );
        let fast = hermitian_eigenvalues(&m);
        let slow: Vec<f64> = {
            let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
            v.sort_by(|a, b| a.total_cmp(b));
            v
        };
        for (x, y) in fast.iter().zip(&slow) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn polar_of_isometry_is_itself() {
        let w = identity_isometry(4, 2);
        let p = polar_isometry(&w).unwrap();
        assert!(max_abs_diff(&p, &w) < 1e-14);
        assert!(polar_isometry(&CMat::zeros(3, 2)).is_none());
    }

    #[test]
    fn polar_output_is_isometry() {
        let params: Vec<f64> = (0..24)
            .map(|k| ((k * 37 % 11) as f64 - 5.0) / 3.0)
            .collect();
        let g = complex_from_reals(&params, 4, 3);
        let w = polar_isometry(&g).unwrap();
        let gram = w.adjoint() * &w;
        assert!(max_abs_diff(&gram, &CMat::identity(3, 3)) < 1e-12);
    }

    #[test]
    fn complex_real_round_trip() {
        let params: Vec<f64> = (0..12).map(|k| k as f64).collect();
        let m = complex_from_reals(&params, 3, 2);
        assert_eq!(reals_from_complex(&m), params);
    }
}
