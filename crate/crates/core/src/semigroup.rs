//! Matrix-element evaluation by semigroup decomposition.
//!
//! On a pair of step functions the normalized matrix element
//! factorizes over the merged plateau grid: each cell contributes the
//! matrix exponential of its generator slice, composed in time order
//! with the earliest cell adjacent to the initial condition. This
//! engine is exact up to matrix-exponential accuracy and serves as the
//! reference the other engines are compared against.

use crate::coefficient::{Coefficient, ElementTable, InitialMap};
use crate::error::Error;
use crate::linalg::{expm, CMat, CVec};
use crate::noise::{merged_grid, ExpPair, MERGE_EPS};
use crate::Result;

/// One cell of the decomposition: the generator slice of the
/// coefficient at the plateau values active on [start, end).
#[derive(Clone, Debug)]
pub struct DecompositionCell {
    pub start: f64,
    pub end: f64,
    pub generator: CMat,
}

impl DecompositionCell {
    #[inline]
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() <= MERGE_EPS
    }
}

fn check_dims(phi: &Coefficient, pair: &ExpPair) -> Result<()> {
    if phi.d() != pair.dim() {
        return Err(Error::DimensionMismatch {
            context: "coefficient vs step-function noise dimension".into(),
            expected: phi.d(),
            found: pair.dim(),
        });
    }
    Ok(())
}

/// Decomposition of [0, t) into cells on which both functions of the
/// pair are constant, each carrying its generator slice.
pub fn decomposition(phi: &Coefficient, pair: &ExpPair, t: f64) -> Result<Vec<DecompositionCell>> {
    assert!(t >= 0.0, "horizon must be nonnegative");
    check_dims(phi, pair)?;
    if t <= MERGE_EPS {
        return Ok(Vec::new());
    }
    let grid = merged_grid(&[&pair.left, &pair.right], t);
    grid.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let generator = phi.psi(&pair.left.value_at(mid), &pair.right.value_at(mid))?;
            Ok(DecompositionCell {
                start: w[0],
                end: w[1],
                generator,
            })
        })
        .collect()
}

/// The associated semigroup at time t: exp(t psi(c', c)).
pub fn associated_semigroup(phi: &Coefficient, c_p: &CVec, c: &CVec, t: f64) -> Result<CMat> {
    assert!(t >= 0.0, "semigroup time must be nonnegative");
    let psi = phi.psi(c_p, c)?;
    Ok(expm(&(psi * crate::linalg::c(t, 0.0))))
}

/// Propagator on V for the pair up to time t: the ordered product of
/// the cell exponentials, earliest cell leftmost.
pub fn propagator(phi: &Coefficient, pair: &ExpPair, t: f64) -> Result<CMat> {
    let cells = decomposition(phi, pair, t)?;
    let mut q = CMat::identity(phi.m(), phi.m());
    for cell in &cells {
        q *= expm(&(&cell.generator * crate::linalg::c(cell.len(), 0.0)));
    }
    Ok(q)
}

/// Normalized matrix element at time t: the initial condition composed
/// with the propagator. At t = 0 this is the initial condition itself.
pub fn matrix_element(
    phi: &Coefficient,
    kappa: &InitialMap,
    pair: &ExpPair,
    t: f64,
) -> Result<ElementTable> {
    if kappa.m() != phi.m() {
        return Err(Error::DimensionMismatch {
            context: "initial map vs coefficient source dimension".into(),
            expected: phi.m(),
            found: kappa.m(),
        });
    }
    let q = propagator(phi, pair, t)?;
    let composed = kappa.composed_with(&q)?;
    Ok(ElementTable {
        t,
        entries: composed.matrices().to_vec(),
    })
}

/// Frobenius defect of the cocycle identity at the split (r, r + t):
/// the propagator over [0, r + t) against the propagator to r composed
/// with the propagator of the left-shifted pair over [0, t).
pub fn cocycle_residual(phi: &Coefficient, pair: &ExpPair, r: f64, t: f64) -> Result<f64> {
    assert!(r >= 0.0 && t >= 0.0, "split times must be nonnegative");
    let whole = propagator(phi, pair, r + t)?;
    let head = propagator(phi, pair, r)?;
    let shifted = ExpPair::new(pair.left.shift_back(r), pair.right.shift_back(r))?;
    let tail = propagator(phi, &shifted, t)?;
    Ok((whole - head * tail).norm())
}

/// Effect of redundant grid points on the evaluated propagator: the
/// Frobenius distance between the plain product and the product over a
/// refined grid. Exactly zero in exact arithmetic.
pub fn refinement_residual(phi: &Coefficient, pair: &ExpPair, t: f64, extra: &[f64]) -> Result<f64> {
    let plain = propagator(phi, pair, t)?;
    let refined_pair = ExpPair::new(
        pair.left.with_extra_breakpoints(extra),
        pair.right.with_extra_breakpoints(extra),
    )?;
    let refined = propagator(phi, &refined_pair, t)?;
    Ok((plain - refined).norm())
}

/// Residual of the defining integral equation: the maximum over basis
/// vectors x of the Frobenius norm of
/// k_t(x) - kappa(x) - integral over [0, t] of k_s(generator slice x).
///
/// The integral is composite Simpson with at least `quadrature_steps`
/// (rounded up to even) subintervals per decomposition cell, evaluated
/// on the solved element itself, so the residual probes the engine
/// independently of the exponential code path.
pub fn weak_residual(
    phi: &Coefficient,
    kappa: &InitialMap,
    pair: &ExpPair,
    t: f64,
    quadrature_steps: usize,
) -> Result<f64> {
    if kappa.m() != phi.m() {
        return Err(Error::DimensionMismatch {
            context: "initial map vs coefficient source dimension".into(),
            expected: phi.m(),
            found: kappa.m(),
        });
    }
    let m = phi.m();
    let cells = decomposition(phi, pair, t)?;
    let steps = quadrature_steps.max(2).next_multiple_of(2);

    let mut prefix = CMat::identity(m, m);
    let mut integral = CMat::zeros(m, m);
    for cell in &cells {
        let h = cell.len() / steps as f64;
        let step = expm(&(&cell.generator * crate::linalg::c(h, 0.0)));
        let mut at_node = prefix.clone();
        let mut acc = &at_node * &cell.generator;
        for k in 1..steps {
            at_node *= &step;
            let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += &at_node * &cell.generator * crate::linalg::c(weight, 0.0);
        }
        at_node *= &step;
        acc += &at_node * &cell.generator;
        integral += acc * crate::linalg::c(h / 3.0, 0.0);
        prefix *= expm(&(&cell.generator * crate::linalg::c(cell.len(), 0.0)));
    }

    let defect = prefix - CMat::identity(m, m) - integral;
    let table = kappa.composed_with(&defect)?;
    Ok(table
        .matrices()
        .iter()
        .map(|mat| mat.norm())
        .fold(0.0, f64::max))
}
