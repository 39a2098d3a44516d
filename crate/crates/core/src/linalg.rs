//! Small dense complex linear algebra on top of nalgebra.

use nalgebra::{DMatrix, DVector, SMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Size of the fluctuation vector.
pub const DIM: usize = 8;
/// Number of independent noise channels.
pub const CHANNELS: usize = 9;

pub type Mat8 = SMatrix<C64, DIM, DIM>;
pub type Mat8x9 = SMatrix<C64, DIM, CHANNELS>;
pub type Mat9 = SMatrix<f64, CHANNELS, CHANNELS>;
pub type Row9 = SMatrix<C64, 1, CHANNELS>;

/// Largest acceptable 1-norm condition estimate for a frequency-domain solve.
pub const MAX_CONDITION: f64 = 1e12;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn one_norm<const R: usize, const K: usize>(m: &SMatrix<C64, R, K>) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `lhs * X = rhs` by a single LU factorization and returns `X`
/// together with the 1-norm condition number of `lhs`.
///
/// The condition number is computed from the explicit inverse, which is
/// cheap at this size.
pub fn lu_solve_with_condition<const K: usize>(
    lhs: &Mat8,
    rhs: &SMatrix<C64, DIM, K>,
) -> Option<(SMatrix<C64, DIM, K>, f64)> {
    let lu = lhs.lu();
    let inverse = lu.try_inverse()?;
    let condition = one_norm(lhs) * one_norm(&inverse);
    let x = lu.solve(rhs)?;
    if !x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return None;
    }
    Some((x, condition))
}

/// All eigenvalues of a complex 8x8 matrix, via the complex Schur form.
pub fn eigenvalues(a: &Mat8) -> Result<Vec<C64>> {
    let dump = || Error::Eigensolver {
        dump: format!("{a:.6e}"),
    };
    if !a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(dump());
    }
    let schur = nalgebra::Schur::try_new(*a, f64::EPSILON, 10_000).ok_or_else(dump)?;
    let values = schur.eigenvalues().ok_or_else(dump)?;
    Ok(values.iter().copied().collect())
}

/// Sorts complex numbers by real part, then imaginary part.
pub fn sort_spectrum(values: &mut [C64]) {
    values.sort_by(|x, y| x.re.total_cmp(&y.re).then_with(|| x.im.total_cmp(&y.im)));
}

/// Solves the continuous Lyapunov equation `A V + V A^T + D = 0` (plain
/// transpose) through its Kronecker form
/// `(I (x) A + A (x) I) vec(V) = -vec(D)`.
pub fn solve_lyapunov(a: &Mat8, d: &Mat8) -> Result<Mat8> {
    let n = DIM;
    let mut big = DMatrix::<C64>::zeros(n * n, n * n);
    // Column-major vec: vec(V)[i + n j] = V[i, j].
    // (A V)[i,j] = sum_k A[i,k] V[k,j]; (V A^T)[i,j] = sum_k V[i,k] A[j,k].
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            for k in 0..n {
                big[(row, k + n * j)] += a[(i, k)];
                big[(row, i + n * k)] += a[(j, k)];
            }
        }
    }
    let rhs = DVector::<C64>::from_iterator(n * n, (0..n * n).map(|idx| -d[(idx % n, idx / n)]));
    let sol = big
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Lyapunov("Kronecker system is singular".into()))?;
    let v = Mat8::from_fn(|i, j| sol[i + n * j]);
    if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Lyapunov("non-finite solution".into()));
    }
    Ok(v)
}
