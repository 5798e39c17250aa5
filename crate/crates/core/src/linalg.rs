//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::scalar::{cx, CMat, CVec, Real};

/// Real embedding `[[Re C, -Im C], [Im C, Re C]]` of a complex matrix.
///
/// For Hermitian `C` and `W`, `tr(C W) = ½ ⟨realify(C), realify(W)⟩`.
pub fn realify<T: Real>(c: &CMat<T>) -> DMatrix<T> {
    let (r, k) = c.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * k);
    for i in 0..r {
        for j in 0..k {
            let z = c[(i, j)];
            out[(i, j)] = z.re;
            out[(i + r, j + k)] = z.re;
            out[(i, j + k)] = -z.im;
            out[(i + r, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`realify`] for a (possibly unstructured) symmetric `2n × 2n`
/// matrix: averages the two copies of each part, which is the orthogonal
/// projection onto realified Hermitian matrices.
pub fn derealify<T: Real>(y: &DMatrix<T>) -> CMat<T> {
    let n = y.nrows() / 2;
    let half = T::one() / (T::one() + T::one());
    CMat::from_fn(n, n, |i, j| {
        let re = (y[(i, j)] + y[(i + n, j + n)]) * half;
        let im = (y[(i + n, j)] - y[(i, j + n)]) * half;
        cx(re, im)
    })
}

pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let half = T::one() / (T::one() + T::one());
    (m + m.transpose()) * half
}

pub fn hermitian_part<T: Real>(m: &CMat<T>) -> CMat<T> {
    let half = cx(T::one() / (T::one() + T::one()), T::zero());
    (m + m.adjoint()) * half
}

/// `(M - Mᴴ) / 2j`, the Hermitian matrix whose trace pairing gives `Im tr(M W)`.
pub fn anti_hermitian_part_over_j<T: Real>(m: &CMat<T>) -> CMat<T> {
    let factor = cx(T::zero(), -T::one() / (T::one() + T::one()));
    (m - m.adjoint()) * factor
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product<T: Real>(a: &CMat<T>, b: &CMat<T>) -> nalgebra::Complex<T> {
    let mut acc = cx(T::zero(), T::zero());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Frobenius inner product `Σ a_ij b_ij` of real matrices.
pub fn inner<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.iter().zip(b.iter()).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

pub fn min_eigenvalue_sym<T: Real>(m: &DMatrix<T>) -> T {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

pub fn hermitian_eigenvalues<T: Real>(m: &CMat<T>) -> DVector<T> {
    SymmetricEigen::new(hermitian_part(m)).eigenvalues
}

pub fn min_eigenvalue_hermitian<T: Real>(m: &CMat<T>) -> T {
    hermitian_eigenvalues(m).min()
}

/// Largest `α ≥ 0` with `X + α ΔX ⪰ 0`, given the Cholesky factor of `X ≻ 0`.
/// Returns `None` when the direction never leaves the cone.
pub fn max_step_to_boundary<T: Real>(chol: &Cholesky<T, nalgebra::Dyn>, dx: &DMatrix<T>) -> Option<T> {
    let l = chol.l();
    let lambda_min = if dx.nrows() == 1 {
        dx[(0, 0)] / (l[(0, 0)] * l[(0, 0)])
    } else {
        let linv_dx = l.solve_lower_triangular(dx).expect("triangular solve");
        let sandwich = l
            .solve_lower_triangular(&linv_dx.transpose())
            .expect("triangular solve");
        min_eigenvalue_sym(&sandwich)
    };
    if lambda_min >= T::zero() {
        None
    } else {
        Some(-T::one() / lambda_min)
    }
}

/// Projects a Hermitian matrix onto the PSD cone by clipping eigenvalues.
pub fn project_psd<T: Real>(m: &CMat<T>) -> CMat<T> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut out = CMat::zeros(m.nrows(), m.ncols());
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > T::zero() {
            let v = eig.eigenvectors.column(idx);
            out += &v * v.adjoint() * cx(lambda, T::zero());
        }
    }
    out
}

pub fn complex_from_real<T: Real>(v: &DVector<T>) -> CVec<T> {
    v.map(|x| cx(x, T::zero()))
}
