//! Coalgebraic layer: comultiplication tensors, convolution of
//! functionals, coefficients induced by a generator functional, and
//! convolution flows evaluated through localised matrix solves.
//!
//! A coalgebra on the coefficient space is stored by its structure
//! tensors: `delta[i]` holds the expansion coefficients of the i-th
//! basis vector's comultiplication, `counit` the counit values.
//! Convolution exponentials are never summed as a dual-space series;
//! every flow value is pulled through a localised run of the semigroup
//! engine, so there is exactly one numerical code path.

use crate::coefficient::Coefficient;
use crate::error::Error;
use crate::linalg::{c, CMat, CVec, C64};
use crate::noise::{ExpPair, StepFunction};
use crate::{semigroup, Result};

/// Relative tolerance for rank decisions while closing a subspace.
pub const RANK_TOL: f64 = 1e-10;

/// Linear functional on the coefficient space, stored by its values on
/// the basis. Functionals act linearly, so pairings below never
/// conjugate.
pub type Functional = CVec;

fn check_entries_finite(context: &str, entries: &[C64]) -> Result<()> {
    if entries
        .iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
    {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: context.into(),
        })
    }
}

/// Coalgebra structure on an m-dimensional space.
#[derive(Clone, Debug)]
pub struct Coalgebra {
    m: usize,
    /// delta[i][(j, k)] is the coefficient of b_j tensor b_k in the
    /// comultiplication of b_i.
    delta: Vec<CMat>,
    counit: CVec,
}

/// Worst-case defects of the structural laws, reported rather than
/// raised so near-misses stay inspectable.
#[derive(Clone, Copy, Debug)]
pub struct ValidationReport {
    /// Largest entry of the two triple-expansion tensors' difference.
    pub coassociativity: f64,
    /// Largest defect of counit-then-identity against the identity.
    pub left_counit: f64,
    /// Largest defect of identity-then-counit against the identity.
    pub right_counit: f64,
}

impl ValidationReport {
    pub fn max(&self) -> f64 {
        self.coassociativity.max(self.left_counit).max(self.right_counit)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

impl Coalgebra {
    pub fn new(delta: Vec<CMat>, counit: CVec) -> Result<Self> {
        let m = delta.len();
        if m == 0 {
            return Err(Error::DimensionMismatch {
                context: "comultiplication tensor".into(),
                expected: 1,
                found: 0,
            });
        }
        if counit.len() != m {
            return Err(Error::DimensionMismatch {
                context: "counit length".into(),
                expected: m,
                found: counit.len(),
            });
        }
        for (i, block) in delta.iter().enumerate() {
            if block.nrows() != m || block.ncols() != m {
                return Err(Error::DimensionMismatch {
                    context: format!("comultiplication block {i}"),
                    expected: m,
                    found: block.nrows().max(block.ncols()),
                });
            }
            check_entries_finite("comultiplication tensor", block.as_slice())?;
        }
        check_entries_finite("counit", counit.as_slice())?;
        Ok(Coalgebra { m, delta, counit })
    }

    /// One-dimensional coalgebra with a group-like basis vector.
    pub fn group_like() -> Self {
        Coalgebra {
            m: 1,
            delta: vec![CMat::from_element(1, 1, c(1.0, 0.0))],
            counit: CVec::from_element(1, c(1.0, 0.0)),
        }
    }

    /// Truncated divided-power coalgebra: the comultiplication of the
    /// n-th basis vector is the sum of all splittings x_k tensor
    /// x_{n-k}, and the counit picks the zeroth coefficient.
    pub fn divided_power(m: usize) -> Self {
        assert!(m >= 1, "divided-power coalgebra needs a basis");
        let delta = (0..m)
            .map(|i| {
                let mut block = CMat::zeros(m, m);
                for j in 0..=i {
                    block[(j, i - j)] = c(1.0, 0.0);
                }
                block
            })
            .collect();
        let mut counit = CVec::zeros(m);
        counit[0] = c(1.0, 0.0);
        Coalgebra { m, delta, counit }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn delta(&self, i: usize) -> &CMat {
        &self.delta[i]
    }

    pub fn delta_blocks(&self) -> &[CMat] {
        &self.delta
    }

    pub fn counit(&self) -> &CVec {
        &self.counit
    }

    pub fn counit_functional(&self) -> Functional {
        self.counit.clone()
    }

    /// Defects of coassociativity and the two counit laws. The triple
    /// expansions compare the (a, b, c) coefficient of splitting the
    /// left tensor leg against splitting the right one.
    pub fn validate(&self) -> ValidationReport {
        let m = self.m;
        let mut coassociativity: f64 = 0.0;
        for i in 0..m {
            for a in 0..m {
                for b in 0..m {
                    for cc in 0..m {
                        let mut left = c(0.0, 0.0);
                        let mut right = c(0.0, 0.0);
                        for j in 0..m {
                            left += self.delta[i][(j, cc)] * self.delta[j][(a, b)];
                            right += self.delta[i][(a, j)] * self.delta[j][(b, cc)];
                        }
                        coassociativity = coassociativity.max((left - right).norm());
                    }
                }
            }
        }
        let mut left_counit: f64 = 0.0;
        let mut right_counit: f64 = 0.0;
        for i in 0..m {
            for k in 0..m {
                let mut contracted = c(0.0, 0.0);
                for j in 0..m {
                    contracted += self.counit[j] * self.delta[i][(j, k)];
                }
                let target = if i == k { 1.0 } else { 0.0 };
                left_counit = left_counit.max((contracted - c(target, 0.0)).norm());
            }
            for j in 0..m {
                let mut contracted = c(0.0, 0.0);
                for k in 0..m {
                    contracted += self.delta[i][(j, k)] * self.counit[k];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                right_counit = right_counit.max((contracted - c(target, 0.0)).norm());
            }
        }
        ValidationReport {
            coassociativity,
            left_counit,
            right_counit,
        }
    }

    /// Convolution of two functionals: both are applied to the legs of
    /// the comultiplication.
    pub fn convolve(&self, lambda: &Functional, mu: &Functional) -> Result<Functional> {
        if lambda.len() != self.m || mu.len() != self.m {
            return Err(Error::DimensionMismatch {
                context: "functional length".into(),
                expected: self.m,
                found: lambda.len().min(mu.len()),
            });
        }
        Ok(Functional::from_iterator(
            self.m,
            self.delta.iter().map(|block| lambda.dot(&(block * mu))),
        ))
    }
}

/// Generator functional: one extended-space matrix per basis vector of
/// the coefficient space.
#[derive(Clone, Debug)]
pub struct GeneratorFunctional {
    varphi: Vec<CMat>,
}

impl GeneratorFunctional {
    pub fn new(varphi: Vec<CMat>) -> Result<Self> {
        let first = varphi.first().ok_or_else(|| Error::DimensionMismatch {
            context: "generator functional needs at least one value".into(),
            expected: 1,
            found: 0,
        })?;
        let dhat = first.nrows();
        if dhat == 0 {
            return Err(Error::DimensionMismatch {
                context: "generator functional extended dimension".into(),
                expected: 1,
                found: 0,
            });
        }
        for (i, mat) in varphi.iter().enumerate() {
            if mat.nrows() != dhat || mat.ncols() != dhat {
                return Err(Error::DimensionMismatch {
                    context: format!("generator functional value {i}"),
                    expected: dhat,
                    found: mat.nrows().max(mat.ncols()),
                });
            }
            check_entries_finite("generator functional", mat.as_slice())?;
        }
        Ok(GeneratorFunctional { varphi })
    }

    pub fn zero(m: usize, d: usize) -> Self {
        GeneratorFunctional {
            varphi: vec![CMat::zeros(d + 1, d + 1); m.max(1)],
        }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.varphi.len()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.varphi[0].nrows() - 1
    }

    pub fn value(&self, i: usize) -> &CMat {
        &self.varphi[i]
    }

    pub fn values(&self) -> &[CMat] {
        &self.varphi
    }

    /// Functional b_k -> <zeta', varphi(b_k) zeta> at a pair of
    /// extended vectors, conjugate-linear in the left argument.
    pub fn slice_functional(&self, zeta_p: &CVec, zeta: &CVec) -> Result<Functional> {
        let dhat = self.d() + 1;
        if zeta_p.len() != dhat || zeta.len() != dhat {
            return Err(Error::DimensionMismatch {
                context: "slice functional argument".into(),
                expected: dhat,
                found: zeta_p.len().min(zeta.len()),
            });
        }
        Ok(Functional::from_iterator(
            self.m(),
            self.varphi.iter().map(|mat| zeta_p.dotc(&(mat * zeta))),
        ))
    }
}

/// Coefficient on the coalgebra space induced by a generator
/// functional: the functional is applied to the right comultiplication
/// leg, so the (mu, nu) block acts by
/// [theta]_{ji} = sum_k delta[i][(j, k)] varphi(b_k)[(mu, nu)].
pub fn induced_coefficient(
    coalgebra: &Coalgebra,
    generator: &GeneratorFunctional,
) -> Result<Coefficient> {
    if generator.m() != coalgebra.m() {
        return Err(Error::DimensionMismatch {
            context: "generator functional length".into(),
            expected: coalgebra.m(),
            found: generator.m(),
        });
    }
    let m = coalgebra.m();
    let dhat = generator.d() + 1;
    let theta = (0..dhat)
        .map(|mu| {
            (0..dhat)
                .map(|nu| {
                    let mut block = CMat::zeros(m, m);
                    for i in 0..m {
                        for j in 0..m {
                            let mut acc = c(0.0, 0.0);
                            for k in 0..m {
                                acc += coalgebra.delta(i)[(j, k)] * generator.value(k)[(mu, nu)];
                            }
                            block[(j, i)] = acc;
                        }
                    }
                    block
                })
                .collect()
        })
        .collect();
    Coefficient::new(m, generator.d(), theta)
}

/// Smallest subspace containing the seed and invariant under every
/// slice block, returned as a matrix of orthonormal columns. Columns
/// are ordered by generation from the seed, so repeated runs on the
/// same input reproduce the same basis.
pub fn localise(phi: &Coefficient, seed: &CVec, cap: usize) -> Result<CMat> {
    let all: Vec<usize> = (0..phi.dims().dhat()).collect();
    localise_with(phi, seed, cap, &all, &all)
}

/// Closure as in [`localise`], but only under the slice blocks whose
/// extended row index lies in `mus` and column index in `nus`.
pub fn localise_with(
    phi: &Coefficient,
    seed: &CVec,
    cap: usize,
    mus: &[usize],
    nus: &[usize],
) -> Result<CMat> {
    let m = phi.m();
    let dhat = phi.dims().dhat();
    if seed.len() != m {
        return Err(Error::DimensionMismatch {
            context: "localisation seed".into(),
            expected: m,
            found: seed.len(),
        });
    }
    for &idx in mus.iter().chain(nus.iter()) {
        if idx >= dhat {
            return Err(Error::DimensionMismatch {
                context: "slice-set extended index".into(),
                expected: dhat,
                found: idx,
            });
        }
    }
    let scale = seed.norm();
    if !scale.is_finite() || scale <= 1e-14 {
        // Normalising a vanishing seed would divide by zero.
        return Err(Error::NonFinite {
            context: "localisation seed normalisation".into(),
        });
    }
    if cap == 0 {
        return Err(Error::LocalisationCapExceeded { cap });
    }
    let mut basis: Vec<CVec> = vec![seed.unscale(scale)];
    let mut next = 0;
    while next < basis.len() {
        let current = basis[next].clone();
        for &mu in mus {
            for &nu in nus {
                let image = phi.theta(mu, nu) * &current;
                let image_norm = image.norm();
                if image_norm <= RANK_TOL {
                    continue;
                }
                // Gram-Schmidt twice keeps the basis orthonormal to
                // machine precision; a direction counts as new when its
                // orthogonal part exceeds RANK_TOL relative to the
                // image.
                let mut residual = image;
                for _ in 0..2 {
                    for q in &basis {
                        let overlap = q.dotc(&residual);
                        residual -= q * overlap;
                    }
                }
                let residual_norm = residual.norm();
                if residual_norm > RANK_TOL * image_norm {
                    if basis.len() >= cap {
                        return Err(Error::LocalisationCapExceeded { cap });
                    }
                    basis.push(residual.unscale(residual_norm));
                }
            }
        }
        next += 1;
    }
    Ok(CMat::from_columns(&basis))
}

/// Compression of the coefficient onto the span of the orthonormal
/// columns of `basis`.
pub fn restrict_coefficient(phi: &Coefficient, basis: &CMat) -> Result<Coefficient> {
    if basis.nrows() != phi.m() {
        return Err(Error::DimensionMismatch {
            context: "restriction basis rows".into(),
            expected: phi.m(),
            found: basis.nrows(),
        });
    }
    let dhat = phi.dims().dhat();
    let adj = basis.adjoint();
    let theta = (0..dhat)
        .map(|mu| {
            (0..dhat)
                .map(|nu| &adj * phi.theta(mu, nu) * basis)
                .collect()
        })
        .collect();
    Coefficient::new(basis.ncols(), phi.d(), theta)
}

/// Largest Frobenius defect of invariance of the basis span under the
/// slice blocks; zero exactly when the span is closed.
pub fn invariance_defect(phi: &Coefficient, basis: &CMat) -> Result<f64> {
    if basis.nrows() != phi.m() {
        return Err(Error::DimensionMismatch {
            context: "invariance basis rows".into(),
            expected: phi.m(),
            found: basis.nrows(),
        });
    }
    let dhat = phi.dims().dhat();
    let adj = basis.adjoint();
    let mut worst: f64 = 0.0;
    for mu in 0..dhat {
        for nu in 0..dhat {
            let moved = phi.theta(mu, nu) * basis;
            let compressed = basis * (&adj * &moved);
            worst = worst.max((moved - compressed).norm());
        }
    }
    Ok(worst)
}

/// Localised solve data for one basis direction: the closure basis,
/// the compressed coefficient on it, and the seed coordinates.
struct LocalisedDirection {
    basis: CMat,
    restricted: Coefficient,
    coords: CVec,
}

/// Convolution flow of a coalgebra along a pair of step functions.
/// Each basis direction is solved on its own localised closure with
/// the identity initial condition, and the counit is applied to the
/// solved coordinates.
pub struct ConvolutionFlow<'a> {
    coalgebra: &'a Coalgebra,
    generator: &'a GeneratorFunctional,
    induced: Coefficient,
    pair: ExpPair,
    directions: Vec<LocalisedDirection>,
}

impl<'a> ConvolutionFlow<'a> {
    pub fn new(
        coalgebra: &'a Coalgebra,
        generator: &'a GeneratorFunctional,
        g_p: &StepFunction,
        g: &StepFunction,
    ) -> Result<Self> {
        if g.dim() != generator.d() || g_p.dim() != generator.d() {
            return Err(Error::DimensionMismatch {
                context: "driving noise vs generator functional".into(),
                expected: generator.d(),
                found: g.dim(),
            });
        }
        let induced = induced_coefficient(coalgebra, generator)?;
        let pair = ExpPair::new(g_p.clone(), g.clone())?;
        let m = coalgebra.m();
        let directions = (0..m)
            .map(|i| {
                let mut seed = CVec::zeros(m);
                seed[i] = c(1.0, 0.0);
                // The closure never outgrows the ambient space, so the
                // cap m is a pure numerical safeguard.
                let basis = localise(&induced, &seed, m)?;
                let restricted = restrict_coefficient(&induced, &basis)?;
                let coords = basis.adjoint() * &seed;
                Ok(LocalisedDirection {
                    basis,
                    restricted,
                    coords,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConvolutionFlow {
            coalgebra,
            generator,
            induced,
            pair,
            directions,
        })
    }

    /// Coefficient induced on the full coalgebra space.
    pub fn induced(&self) -> &Coefficient {
        &self.induced
    }

    /// Dimension of the closure feeding the i-th basis direction.
    pub fn closure_dim(&self, i: usize) -> usize {
        self.directions[i].basis.ncols()
    }

    /// Closure basis of the i-th direction.
    pub fn closure_basis(&self, i: usize) -> &CMat {
        &self.directions[i].basis
    }

    /// The flow functional at time t: one localised semigroup solve
    /// per basis direction, counit applied to the solved coordinates.
    pub fn functional_at(&self, t: f64) -> Result<Functional> {
        let mut out = CVec::zeros(self.directions.len());
        for (i, dir) in self.directions.iter().enumerate() {
            let q = semigroup::propagator(&dir.restricted, &self.pair, t)?;
            let solved = &dir.basis * (q * &dir.coords);
            out[i] = self.coalgebra.counit().dot(&solved);
        }
        Ok(out)
    }

    /// Sup-norm defect between the localised flow and the counit slice
    /// of the full unlocalised solve at time t.
    pub fn counit_slice_defect(&self, t: f64) -> Result<f64> {
        let q = semigroup::propagator(&self.induced, &self.pair, t)?;
        let full = q.transpose() * self.coalgebra.counit();
        let local = self.functional_at(t)?;
        Ok((full - local)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }

    /// Sup-norm residual of the convolution integral equation at time
    /// t: the flow minus the counit minus the time integral of the
    /// flow convolved with the running generator slice. Composite
    /// Simpson with at least `quadrature_steps` (rounded up to even)
    /// subintervals per plateau cell; the slice functional is constant
    /// on each cell.
    pub fn residual(&self, t: f64, quadrature_steps: usize) -> Result<f64> {
        let steps = quadrature_steps.max(2).next_multiple_of(2);
        let cells = semigroup::decomposition(&self.induced, &self.pair, t)?;
        let dims = self.induced.dims();
        let m = self.coalgebra.m();
        let mut integral = CVec::zeros(m);
        for cell in &cells {
            let mid = 0.5 * (cell.start + cell.end);
            let zeta_p = dims.hat(&self.pair.left.value_at(mid));
            let zeta = dims.hat(&self.pair.right.value_at(mid));
            let chi = self.generator.slice_functional(&zeta_p, &zeta)?;
            let h = cell.len() / steps as f64;
            let mut acc = CVec::zeros(m);
            for k in 0..=steps {
                let s = cell.start + h * k as f64;
                let weight = if k == 0 || k == steps {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let l_s = self.functional_at(s)?;
                acc += self.coalgebra.convolve(&l_s, &chi)? * c(weight, 0.0);
            }
            integral += acc * c(h / 3.0, 0.0);
        }
        let defect = self.functional_at(t)? - self.coalgebra.counit() - integral;
        Ok(defect.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}

/// Value of the convolution flow at time t.
pub fn convolution_cocycle(
    coalgebra: &Coalgebra,
    generator: &GeneratorFunctional,
    g_p: &StepFunction,
    g: &StepFunction,
    t: f64,
) -> Result<Functional> {
    ConvolutionFlow::new(coalgebra, generator, g_p, g)?.functional_at(t)
}

/// Integral-equation residual of the convolution flow at time t.
pub fn convolution_residual(
    coalgebra: &Coalgebra,
    generator: &GeneratorFunctional,
    g_p: &StepFunction,
    g: &StepFunction,
    t: f64,
    quadrature_steps: usize,
) -> Result<f64> {
    ConvolutionFlow::new(coalgebra, generator, g_p, g)?.residual(t, quadrature_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;

    fn sup(v: &CVec) -> f64 {
        v.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn basis_vector(m: usize, i: usize) -> CVec {
        let mut e = CVec::zeros(m);
        e[i] = c(1.0, 0.0);
        e
    }

    /// Generator functional with every entry drawn at random, scaled
    /// to keep the induced flow mild.
    fn random_generator(seed: u64, m: usize, d: usize, scale: f64) -> GeneratorFunctional {
        let mut r = sample::rng(seed);
        let varphi = (0..m)
            .map(|_| sample::cmat(&mut r, d + 1, d + 1) * c(scale, 0.0))
            .collect();
        GeneratorFunctional::new(varphi).expect("random generator functional is well formed")
    }

    fn zero_function(d: usize) -> StepFunction {
        StepFunction::zero(d)
    }

    #[test]
    fn stock_structures_validate() {
        let group = Coalgebra::group_like();
        assert!(group.validate().max() <= 1e-15);
        let divided = Coalgebra::divided_power(4);
        let report = divided.validate();
        assert!(report.coassociativity <= 1e-15);
        assert!(report.left_counit <= 1e-15);
        assert!(report.right_counit <= 1e-15);
        assert!(report.passes(1e-12));
    }

    #[test]
    fn a_perturbed_structure_tensor_reports_its_own_magnitude() {
        let clean = Coalgebra::divided_power(4);
        let mut delta = clean.delta_blocks().to_vec();
        delta[2][(1, 0)] += c(1e-3, 0.0);
        let bent = Coalgebra::new(delta, clean.counit().clone()).unwrap();
        let report = bent.validate();
        assert!(!report.passes(1e-12));
        assert!(report.max() >= 5e-4 && report.max() <= 2e-3, "max {}", report.max());
    }

    #[test]
    fn convolving_with_the_counit_is_neutral() {
        for coalgebra in [Coalgebra::group_like(), Coalgebra::divided_power(5)] {
            let mut r = sample::rng(3);
            let lambda = sample::cvec(&mut r, coalgebra.m());
            let eps = coalgebra.counit_functional();
            let left = coalgebra.convolve(&eps, &lambda).unwrap();
            let right = coalgebra.convolve(&lambda, &eps).unwrap();
            assert!(sup(&(left - &lambda)) <= 1e-14);
            assert!(sup(&(right - &lambda)) <= 1e-14);
        }
    }

    #[test]
    fn group_like_convolution_multiplies_pointwise() {
        let coalgebra = Coalgebra::group_like();
        let lambda = CVec::from_element(1, c(2.0, -1.0));
        let mu = CVec::from_element(1, c(0.5, 3.0));
        let product = coalgebra.convolve(&lambda, &mu).unwrap();
        assert!((product[0] - lambda[0] * mu[0]).norm() <= 1e-15);
    }

    #[test]
    fn divided_power_convolution_is_a_cauchy_product() {
        let coalgebra = Coalgebra::divided_power(4);
        let mut r = sample::rng(7);
        let lambda = sample::cvec(&mut r, 4);
        let mu = sample::cvec(&mut r, 4);
        let product = coalgebra.convolve(&lambda, &mu).unwrap();
        let expected = lambda[0] * mu[2] + lambda[1] * mu[1] + lambda[2] * mu[0];
        assert!((product[2] - expected).norm() <= 1e-14);
    }

    #[test]
    fn convolution_is_associative_on_random_functionals() {
        let coalgebra = Coalgebra::divided_power(5);
        let mut r = sample::rng(11);
        let lambda = sample::cvec(&mut r, 5);
        let mu = sample::cvec(&mut r, 5);
        let nu = sample::cvec(&mut r, 5);
        let left = coalgebra
            .convolve(&coalgebra.convolve(&lambda, &mu).unwrap(), &nu)
            .unwrap();
        let right = coalgebra
            .convolve(&lambda, &coalgebra.convolve(&mu, &nu).unwrap())
            .unwrap();
        assert!(sup(&(left - right)) <= 1e-12);
    }

    #[test]
    fn induced_coefficients_expand_the_comultiplication() {
        // Group-like: every block is multiplication by the matching
        // generator entry.
        let group = Coalgebra::group_like();
        let phi = random_generator(13, 1, 2, 1.0);
        let induced = induced_coefficient(&group, &phi).unwrap();
        for mu in 0..3 {
            for nu in 0..3 {
                assert!((induced.theta(mu, nu)[(0, 0)] - phi.value(0)[(mu, nu)]).norm() <= 1e-15);
            }
        }

        // Zero functional: zero coefficient.
        let none = GeneratorFunctional::zero(4, 1);
        let frozen = induced_coefficient(&Coalgebra::divided_power(4), &none).unwrap();
        for mu in 0..2 {
            for nu in 0..2 {
                assert_eq!(frozen.theta(mu, nu).norm(), 0.0);
            }
        }

        // Divided power, two levels: the top direction maps into the
        // span of itself and the level below, with the level-zero
        // value on the diagonal.
        let divided = Coalgebra::divided_power(2);
        let phi2 = random_generator(17, 2, 1, 1.0);
        let induced2 = induced_coefficient(&divided, &phi2).unwrap();
        for mu in 0..2 {
            for nu in 0..2 {
                let block = induced2.theta(mu, nu);
                let a = phi2.value(0)[(mu, nu)];
                let b = phi2.value(1)[(mu, nu)];
                assert!((block[(0, 0)] - a).norm() <= 1e-15);
                assert!((block[(1, 1)] - a).norm() <= 1e-15);
                assert!((block[(0, 1)] - b).norm() <= 1e-15);
                assert!(block[(1, 0)].norm() <= 1e-15);
            }
        }
    }

    #[test]
    fn group_like_directions_localise_to_a_line() {
        let coalgebra = Coalgebra::group_like();
        let phi = random_generator(19, 1, 2, 1.0);
        let induced = induced_coefficient(&coalgebra, &phi).unwrap();
        let basis = localise(&induced, &basis_vector(1, 0), 4).unwrap();
        assert_eq!(basis.ncols(), 1);
    }

    #[test]
    fn divided_power_directions_localise_to_graded_blocks() {
        let coalgebra = Coalgebra::divided_power(4);
        let phi = random_generator(23, 4, 1, 1.0);
        let induced = induced_coefficient(&coalgebra, &phi).unwrap();
        for (level, expected) in [(0usize, 1usize), (1, 2), (3, 4)] {
            let basis = localise(&induced, &basis_vector(4, level), 8).unwrap();
            assert_eq!(basis.ncols(), expected, "level {level}");
            assert!(invariance_defect(&induced, &basis).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn a_generic_action_localises_to_the_whole_space() {
        let mut r = sample::rng(29);
        let phi = sample::coefficient(&mut r, 3, 1);
        let basis = localise(&phi, &basis_vector(3, 0), 3).unwrap();
        assert_eq!(basis.ncols(), 3);
        assert!(invariance_defect(&phi, &basis).unwrap() <= 1e-9);
    }

    #[test]
    fn localisation_respects_the_dimension_cap() {
        let coalgebra = Coalgebra::divided_power(4);
        let phi = random_generator(23, 4, 1, 1.0);
        let induced = induced_coefficient(&coalgebra, &phi).unwrap();
        let err = localise(&induced, &basis_vector(4, 3), 2).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("not finitely localisable"));
    }

    #[test]
    fn closures_are_stable_and_reproducible() {
        let coalgebra = Coalgebra::divided_power(4);
        let phi = random_generator(31, 4, 2, 1.0);
        let induced = induced_coefficient(&coalgebra, &phi).unwrap();
        let basis = localise(&induced, &basis_vector(4, 3), 8).unwrap();
        let again = localise(&induced, &basis_vector(4, 3), 8).unwrap();
        assert_eq!(basis, again);

        // Re-localising from any closure column stays inside the span.
        let projector = &basis * basis.adjoint();
        for col in 0..basis.ncols() {
            let inner = localise(&induced, &basis.column(col).into_owned(), 8).unwrap();
            let outside = &inner - &projector * &inner;
            assert!(outside.norm() <= 1e-9, "column {col}");
        }
    }

    #[test]
    fn restricted_slice_sets_close_on_smaller_subspaces() {
        // Vacuum entries vanish above level zero, so the time-time
        // block alone fixes every direction while the full slice set
        // still mixes the grading.
        let mut r = sample::rng(37);
        let m = 3;
        let mut varphi = Vec::new();
        for k in 0..m {
            let mut mat = sample::cmat(&mut r, 2, 2);
            if k > 0 {
                mat[(0, 0)] = c(0.0, 0.0);
            }
            varphi.push(mat);
        }
        let phi = GeneratorFunctional::new(varphi).unwrap();
        let coalgebra = Coalgebra::divided_power(m);
        let induced = induced_coefficient(&coalgebra, &phi).unwrap();
        let restricted = localise_with(&induced, &basis_vector(m, 2), m, &[0], &[0]).unwrap();
        assert_eq!(restricted.ncols(), 1);
        let full = localise(&induced, &basis_vector(m, 2), m).unwrap();
        assert_eq!(full.ncols(), 3);
    }

    #[test]
    fn localised_flows_match_the_group_like_exponential() {
        let coalgebra = Coalgebra::group_like();
        let phi = random_generator(41, 1, 2, 1.0);
        let mut r = sample::rng(43);
        let c_p = sample::cvec(&mut r, 2);
        let c_v = sample::cvec(&mut r, 2);
        let t = 0.7;
        let g_p = StepFunction::constant(c_p.clone(), t + 0.5).unwrap();
        let g = StepFunction::constant(c_v.clone(), t + 0.5).unwrap();
        let flow = convolution_cocycle(&coalgebra, &phi, &g_p, &g, t).unwrap();
        let dims = crate::NoiseDims::new(2);
        let exponent = dims.hat(&c_p).dotc(&(phi.value(0) * dims.hat(&c_v))) * c(t, 0.0);
        let expected = exponent.exp();
        assert!((flow[0] - expected).norm() <= 1e-10, "defect {}", (flow[0] - expected).norm());
    }

    #[test]
    fn vacuum_divided_power_flows_solve_the_triangular_system() {
        // With vacuum driving only the (0, 0) entries act; the rest
        // are random noise that must not leak into the answer.
        let mut r = sample::rng(47);
        let a = c(-0.4, 0.3);
        let b = c(0.8, -0.6);
        let mut phi0 = sample::cmat(&mut r, 3, 3);
        phi0[(0, 0)] = a;
        let mut phi1 = sample::cmat(&mut r, 3, 3);
        phi1[(0, 0)] = b;
        let phi = GeneratorFunctional::new(vec![phi0, phi1]).unwrap();
        let coalgebra = Coalgebra::divided_power(2);
        let t = 0.9;
        let flow =
            convolution_cocycle(&coalgebra, &phi, &zero_function(2), &zero_function(2), t).unwrap();
        let growth = (a * c(t, 0.0)).exp();
        assert!((flow[0] - growth).norm() <= 1e-10);
        assert!((flow[1] - b * c(t, 0.0) * growth).norm() <= 1e-10);
    }

    #[test]
    fn the_flow_at_time_zero_is_the_counit() {
        let coalgebra = Coalgebra::divided_power(3);
        let phi = random_generator(53, 3, 2, 0.8);
        let mut r = sample::rng(59);
        let g_p = sample::step_function(&mut r, 2, 3, 1.0);
        let g = sample::step_function(&mut r, 2, 3, 1.0);
        let flow = convolution_cocycle(&coalgebra, &phi, &g_p, &g, 0.0).unwrap();
        assert!(sup(&(flow - coalgebra.counit())) <= 1e-14);
    }

    #[test]
    fn frozen_generators_have_zero_residual() {
        let coalgebra = Coalgebra::divided_power(3);
        let phi = GeneratorFunctional::zero(3, 1);
        let res =
            convolution_residual(&coalgebra, &phi, &zero_function(1), &zero_function(1), 0.8, 8)
                .unwrap();
        assert_eq!(res, 0.0);
    }

    #[test]
    fn convolution_flows_satisfy_their_integral_equation() {
        let coalgebra = Coalgebra::group_like();
        let phi = random_generator(61, 1, 2, 1.0);
        let mut r = sample::rng(67);
        let g_p = StepFunction::constant(sample::cvec(&mut r, 2), 1.5).unwrap();
        let g = StepFunction::constant(sample::cvec(&mut r, 2), 1.5).unwrap();
        let res = convolution_residual(&coalgebra, &phi, &g_p, &g, 1.0, 64).unwrap();
        assert!(res <= 1e-9, "residual {res}");

        let divided = Coalgebra::divided_power(3);
        let phi3 = random_generator(71, 3, 1, 0.7);
        let mut r3 = sample::rng(73);
        let h_p = sample::dyadic_step_function(&mut r3, 1, 1.0);
        let h = sample::dyadic_step_function(&mut r3, 1, 1.0);
        let res3 = convolution_residual(&divided, &phi3, &h_p, &h, 1.0, 64).unwrap();
        assert!(res3 <= 1e-9, "residual {res3}");
    }

    #[test]
    fn quadrature_residuals_decay_at_fourth_order() {
        let coalgebra = Coalgebra::group_like();
        let phi = random_generator(79, 1, 1, 1.5);
        let mut r = sample::rng(83);
        let g_p = StepFunction::constant(sample::cvec(&mut r, 1), 1.5).unwrap();
        let g = StepFunction::constant(sample::cvec(&mut r, 1), 1.5).unwrap();
        let flow = ConvolutionFlow::new(&coalgebra, &phi, &g_p, &g).unwrap();
        let coarse = flow.residual(1.0, 8).unwrap();
        let fine = flow.residual(1.0, 16).unwrap();
        assert!(
            coarse / fine >= 10.0,
            "coarse {coarse} fine {fine} ratio {}",
            coarse / fine
        );
    }

    #[test]
    fn counit_slices_of_the_full_solve_match_the_localised_flow() {
        let divided = Coalgebra::divided_power(5);
        let phi = random_generator(89, 5, 2, 0.6);
        let mut r = sample::rng(97);
        let g_p = sample::step_function(&mut r, 2, 2, 1.0);
        let g = sample::step_function(&mut r, 2, 2, 1.0);
        let flow = ConvolutionFlow::new(&divided, &phi, &g_p, &g).unwrap();
        assert!(flow.counit_slice_defect(0.8).unwrap() <= 1e-11);

        let group = Coalgebra::group_like();
        let phi1 = random_generator(101, 1, 2, 1.0);
        let flow1 = ConvolutionFlow::new(&group, &phi1, &g_p, &g).unwrap();
        assert!(flow1.counit_slice_defect(0.8).unwrap() <= 1e-11);
    }

    #[test]
    fn full_solves_stay_inside_each_closure() {
        let coalgebra = Coalgebra::divided_power(4);
        let phi = random_generator(103, 4, 1, 0.8);
        let mut r = sample::rng(107);
        let g_p = sample::step_function(&mut r, 1, 2, 1.0);
        let g = sample::step_function(&mut r, 1, 2, 1.0);
        let flow = ConvolutionFlow::new(&coalgebra, &phi, &g_p, &g).unwrap();
        let q = semigroup::propagator(flow.induced(), &ExpPair::new(g_p, g).unwrap(), 0.9).unwrap();
        for i in 0..4 {
            let basis = flow.closure_basis(i);
            let moved = &q * basis_vector(4, i);
            let outside = &moved - basis * (basis.adjoint() * &moved);
            assert!(outside.norm() <= 1e-10, "direction {i}");
        }
    }

    #[test]
    fn zero_seeds_and_bad_indices_are_rejected() {
        let mut r = sample::rng(109);
        let phi = sample::coefficient(&mut r, 3, 1);
        assert!(localise(&phi, &CVec::zeros(3), 3).is_err());
        let err = localise_with(&phi, &basis_vector(3, 0), 3, &[5], &[0]).unwrap_err();
        assert!(err.is_config());
    }
}
