//! Dense complex linear algebra helpers shared by all modules.
//!
//! Thin layer over nalgebra: spectral norms via SVD, the matrix
//! exponential (scaling and squaring with Padé approximants), a
//! principal logarithm for matrices near the identity, column stacking
//! of matrix families, and composite Simpson quadrature for
//! matrix-valued integrands.

use nalgebra::{DMatrix, DVector};

pub type C64 = num_complex::Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Shorthand complex constructor.
#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest singular value; 0 for empty matrices.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().cloned().fold(0.0, f64::max)
}

/// Frobenius norm.
#[inline]
pub fn frobenius(m: &CMat) -> f64 {
    m.norm()
}

/// Matrix exponential by scaling and squaring with Padé approximants
/// (orders 3/5/7/9/13, squaring threshold 5.37 in the 1-norm).
#[inline]
pub fn expm(a: &CMat) -> CMat {
    a.exp()
}

/// Principal logarithm of a matrix close to the identity, by the
/// alternating power series in X = P - I.
///
/// Callers must keep the Frobenius norm of X at or below about 0.3;
/// the series is then accurate to full double precision within the
/// fixed term budget.
pub fn log_near_identity(p: &CMat) -> CMat {
    let n = p.nrows();
    let x = p - CMat::identity(n, n);
    debug_assert!(frobenius(&x) < 0.5, "log series needs P near the identity");
    let mut acc = x.clone();
    let mut power = x.clone();
    for k in 2..=72usize {
        power = &power * &x;
        let coeff = if k % 2 == 0 { -1.0 } else { 1.0 } / k as f64;
        acc += &power * c(coeff, 0.0);
        if frobenius(&power) / k as f64 <= 1e-18 * frobenius(&acc).max(1e-300) {
            break;
        }
    }
    acc
}

/// Stacks a family of equally sized matrices into one tall matrix with
/// one column per family member: column i is the row-major flattening
/// of `mats[i]`.
///
/// The spectral norm of the result is the operator norm of the linear
/// map `coords -> Σ_i coords_i * mats[i]` from coordinates with the
/// Euclidean norm into matrices with the Frobenius norm.
pub fn stack_columns(mats: &[CMat]) -> CMat {
    assert!(!mats.is_empty(), "cannot stack an empty family");
    let (r, cl) = (mats[0].nrows(), mats[0].ncols());
    let mut out = CMat::zeros(r * cl, mats.len());
    for (i, mat) in mats.iter().enumerate() {
        assert_eq!((mat.nrows(), mat.ncols()), (r, cl), "ragged family");
        for a in 0..r {
            for b in 0..cl {
                out[(a * cl + b, i)] = mat[(a, b)];
            }
        }
    }
    out
}

/// Composite Simpson quadrature of a matrix-valued integrand on [a, b].
///
/// `steps` counts subintervals and is rounded up to the next even
/// number; the even count is what the 1-4-2-...-4-1 weight pattern
/// requires.
pub fn simpson<F: Fn(f64) -> CMat>(f: F, a: f64, b: f64, steps: usize) -> CMat {
    let n = steps.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + k as f64 * h) * c(w, 0.0);
    }
    acc * c(h / 3.0, 0.0)
}

/// Maximum entry magnitude; 0 for empty matrices.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
