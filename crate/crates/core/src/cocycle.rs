//! Black-box tools for a solved process: tabulating its associated
//! one-parameter semigroups over a probe set, rebuilding the
//! coefficient from the table, estimating generators by difference
//! quotients, and checking the conjugate-process identity.
//!
//! The probe set always contains the zero vector; with the standard
//! basis probes added the table pins down every coefficient block, and
//! the sesquilinear evaluator extends the table to arbitrary hatted
//! vectors whose noise parts are probes.

use crate::coefficient::{Coefficient, InitialMap, InitialSpace};
use crate::error::Error;
use crate::linalg::{c, log_near_identity, CMat, CVec};
use crate::noise::{ExpPair, StepFunction};
use crate::semigroup;
use crate::Result;

/// Matching tolerance when looking a noise vector up among probes.
const PROBE_TOL: f64 = 1e-12;

/// Table of associated-semigroup generators over a probe set.  Entry
/// `(a, b)` holds the map on V generating the semigroup driven by the
/// constant plateau pair `(probes[a], probes[b])`; probe 0 is the zero
/// vector, so entry `(0, 0)` generates the Markov semigroup.
#[derive(Clone, Debug)]
pub struct SemigroupTable {
    m: usize,
    d: usize,
    probes: Vec<CVec>,
    entries: Vec<Vec<Option<CMat>>>,
}

impl SemigroupTable {
    /// Empty table over the zero probe plus the supplied extra probes.
    pub fn new(m: usize, d: usize, extra_probes: Vec<CVec>) -> Result<Self> {
        let mut probes = vec![CVec::zeros(d)];
        for (i, p) in extra_probes.into_iter().enumerate() {
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    context: format!("probe {i}"),
                    expected: d,
                    found: p.len(),
                });
            }
            probes.push(p);
        }
        let n = probes.len();
        Ok(SemigroupTable {
            m,
            d,
            probes,
            entries: vec![vec![None; n]; n],
        })
    }

    /// Empty table over the standard probe set `{0, e_1, ..., e_d}`.
    pub fn standard(m: usize, d: usize) -> Self {
        let extra = (0..d)
            .map(|i| {
                let mut e = CVec::zeros(d);
                e[i] = c(1.0, 0.0);
                e
            })
            .collect();
        SemigroupTable::new(m, d, extra).expect("standard probes have matching dimension")
    }

    /// Table over the standard probes plus `extra`, filled exactly
    /// from a coefficient.
    pub fn from_coefficient(phi: &Coefficient, extra_probes: &[CVec]) -> Result<Self> {
        let mut table = SemigroupTable::standard(phi.m(), phi.d());
        for p in extra_probes {
            if p.len() != phi.d() {
                return Err(Error::DimensionMismatch {
                    context: "extra probe".into(),
                    expected: phi.d(),
                    found: p.len(),
                });
            }
            table.probes.push(p.clone());
        }
        let n = table.probes.len();
        table.entries = vec![vec![None; n]; n];
        for a in 0..n {
            for b in 0..n {
                let psi = phi.psi(&table.probes[a], &table.probes[b])?;
                table.entries[a][b] = Some(psi);
            }
        }
        Ok(table)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn probes(&self) -> &[CVec] {
        &self.probes
    }

    /// Index of a noise vector in the probe set.
    pub fn probe_index(&self, cvec: &CVec) -> Option<usize> {
        self.probes
            .iter()
            .position(|p| p.len() == cvec.len() && (p - cvec).norm() <= PROBE_TOL)
    }

    /// Stores a generator for the probe pair `(a, b)`.
    pub fn set(&mut self, a: usize, b: usize, psi: CMat) -> Result<()> {
        if psi.nrows() != self.m || psi.ncols() != self.m {
            return Err(Error::DimensionMismatch {
                context: "table entry".into(),
                expected: self.m,
                found: psi.nrows(),
            });
        }
        self.entries[a][b] = Some(psi);
        Ok(())
    }

    pub fn entry(&self, a: usize, b: usize) -> Option<&CMat> {
        self.entries[a][b].as_ref()
    }

    fn require(&self, a: usize, b: usize, missing: &mut Vec<String>) -> Option<&CMat> {
        let got = self.entries[a][b].as_ref();
        if got.is_none() {
            missing.push(format!("({a}, {b})"));
        }
        got
    }

    /// Fills every probe pair by extracting the generator of the
    /// semigroup the oracle evaluates; `t0` seeds the contraction.
    pub fn fill_from_oracle<F>(&mut self, oracle: F, t0: f64) -> Result<()>
    where
        F: Fn(&CVec, &CVec, f64) -> Result<CMat>,
    {
        for a in 0..self.probes.len() {
            for b in 0..self.probes.len() {
                let pa = self.probes[a].clone();
                let pb = self.probes[b].clone();
                let psi = extract_generator(|t| oracle(&pa, &pb, t), t0)?;
                self.set(a, b, psi)?;
            }
        }
        Ok(())
    }

    /// Sesquilinear evaluator at hatted vectors: combines the four
    /// table blocks keyed by the noise parts with the scalar parts.
    /// Both noise parts must be probes with stored entries.
    pub fn slice_at(&self, zeta_p: &CVec, zeta: &CVec) -> Result<CMat> {
        if zeta_p.len() != self.d + 1 || zeta.len() != self.d + 1 {
            return Err(Error::DimensionMismatch {
                context: "hatted evaluation point".into(),
                expected: self.d + 1,
                found: zeta_p.len(),
            });
        }
        let zp = zeta_p[0];
        let zv = zeta[0];
        let cp = zeta_p.rows(1, self.d).into_owned();
        let cv = zeta.rows(1, self.d).into_owned();
        let ia = self.probe_index(&cp).ok_or_else(|| Error::MissingProbes {
            missing: format!("left noise part {:?}", cp.as_slice()),
        })?;
        let ib = self.probe_index(&cv).ok_or_else(|| Error::MissingProbes {
            missing: format!("right noise part {:?}", cv.as_slice()),
        })?;
        let mut missing = Vec::new();
        let p00 = self.require(0, 0, &mut missing).cloned();
        let p0c = self.require(0, ib, &mut missing).cloned();
        let pc0 = self.require(ia, 0, &mut missing).cloned();
        let pcc = self.require(ia, ib, &mut missing).cloned();
        if !missing.is_empty() {
            return Err(Error::MissingProbes {
                missing: missing.join(", "),
            });
        }
        let a = (zp - c(1.0, 0.0)).conj();
        let b = zv - c(1.0, 0.0);
        let mut out = p00.unwrap().map(|z| z * a * b);
        out += p0c.unwrap().map(|z| z * a);
        out += pc0.unwrap().map(|z| z * b);
        out += pcc.unwrap();
        Ok(out)
    }

    /// Rebuilds the coefficient blocks from the standard probes by
    /// inclusion-exclusion against the zero probe.
    pub fn reconstruct(&self) -> Result<Coefficient> {
        let mut basis_index = Vec::with_capacity(self.d);
        let mut missing = Vec::new();
        for i in 0..self.d {
            let mut e = CVec::zeros(self.d);
            e[i] = c(1.0, 0.0);
            match self.probe_index(&e) {
                Some(idx) => basis_index.push(idx),
                None => missing.push(format!("basis probe {}", i + 1)),
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingProbes {
                missing: missing.join(", "),
            });
        }
        let mut need = Vec::new();
        let p00 = self.require(0, 0, &mut need).cloned();
        let row: Vec<Option<CMat>> = basis_index
            .iter()
            .map(|&ia| self.require(ia, 0, &mut need).cloned())
            .collect();
        let col: Vec<Option<CMat>> = basis_index
            .iter()
            .map(|&ib| self.require(0, ib, &mut need).cloned())
            .collect();
        let mut inner = vec![vec![None; self.d]; self.d];
        for (i, &ia) in basis_index.iter().enumerate() {
            for (j, &ib) in basis_index.iter().enumerate() {
                inner[i][j] = self.require(ia, ib, &mut need).cloned();
            }
        }
        if !need.is_empty() {
            return Err(Error::MissingProbes {
                missing: need.join(", "),
            });
        }
        let p00 = p00.unwrap();
        let dhat = self.d + 1;
        let mut theta = vec![vec![CMat::zeros(self.m, self.m); dhat]; dhat];
        theta[0][0] = p00.clone();
        for i in 0..self.d {
            theta[i + 1][0] = row[i].clone().unwrap() - &p00;
            theta[0][i + 1] = col[i].clone().unwrap() - &p00;
        }
        for i in 0..self.d {
            for j in 0..self.d {
                theta[i + 1][j + 1] = inner[i][j].clone().unwrap()
                    - row[i].as_ref().unwrap()
                    - col[j].as_ref().unwrap()
                    + &p00;
            }
        }
        Coefficient::new(self.m, self.d, theta)
    }
}

/// Generator of a one-parameter semigroup evaluated by `p`: halves the
/// time until the matrix is close enough to the identity for the
/// logarithm series, then divides it out.
pub fn extract_generator<F>(p: F, t0: f64) -> Result<CMat>
where
    F: Fn(f64) -> Result<CMat>,
{
    if !(t0 > 0.0) || !t0.is_finite() {
        return Err(Error::NonFinite {
            context: "generator extraction start time".into(),
        });
    }
    let mut t = t0;
    for _ in 0..64 {
        let pt = p(t)?;
        let m = pt.nrows();
        if (&pt - CMat::identity(m, m)).norm() <= 0.25 {
            return Ok(log_near_identity(&pt).map(|z| z / c(t, 0.0)));
        }
        t *= 0.5;
    }
    Err(Error::NonFinite {
        context: "semigroup did not contract toward the identity".into(),
    })
}

/// First-order generator estimate from a single short-time evaluation
/// of the oracle; carries a bias linear in `t_small`.
pub fn difference_quotient_generator<F>(
    oracle: F,
    c_p: &CVec,
    c_v: &CVec,
    t_small: f64,
) -> Result<CMat>
where
    F: Fn(&CVec, &CVec, f64) -> Result<CMat>,
{
    if !(t_small > 0.0) || !t_small.is_finite() {
        return Err(Error::NonFinite {
            context: "difference quotient step".into(),
        });
    }
    let pt = oracle(c_p, c_v, t_small)?;
    let m = pt.nrows();
    Ok((pt - CMat::identity(m, m)).map(|z| z / c(t_small, 0.0)))
}

/// Associated-semigroup oracle backed by the flow engine: evaluates
/// the normalised elements of the solved process between constant
/// plateaus, with the coordinate embedding in place of any initial
/// condition (generators belong to the process, not to it).
pub fn flow_oracle(phi: &Coefficient) -> impl Fn(&CVec, &CVec, f64) -> Result<CMat> + '_ {
    move |c_p: &CVec, c_v: &CVec, t: f64| {
        let kappa = InitialMap::diagonal_units(phi.m());
        let pair = ExpPair::new(
            StepFunction::constant(c_p.clone(), t + 1.0)?,
            StepFunction::constant(c_v.clone(), t + 1.0)?,
        )?;
        let table = semigroup::matrix_element(phi, &kappa, &pair, t)?;
        let mut q = CMat::zeros(phi.m(), phi.m());
        for (i, entry) in table.entries.iter().enumerate() {
            for l in 0..phi.m() {
                q[(l, i)] = entry[(l, l)];
            }
        }
        Ok(q)
    }
}

/// Residual of the one-parameter law `P(s+t) = P(s) P(t)` for the
/// semigroup the oracle evaluates at a fixed probe pair.
pub fn functional_equation_residual<F>(oracle: F, c_p: &CVec, c_v: &CVec, s: f64, t: f64) -> Result<f64>
where
    F: Fn(&CVec, &CVec, f64) -> Result<CMat>,
{
    let joint = oracle(c_p, c_v, s + t)?;
    let split = oracle(c_p, c_v, s)? * oracle(c_p, c_v, t)?;
    Ok((joint - split).norm())
}

/// Largest conjugation defect of the solved elements over domain basis
/// vectors: the elements of the conjugate process at swapped arguments
/// must be the conjugated coordinates of the adjoint elements.
pub fn conjugate_check(
    phi: &Coefficient,
    kappa: &InitialMap,
    space: &InitialSpace,
    pair: &ExpPair,
    t: f64,
) -> Result<f64> {
    let j = space.require_involution()?;
    let phi_dag = phi.conjugate(space)?;
    let kappa_dag = kappa.conjugate(space)?;
    let forward = semigroup::matrix_element(phi, kappa, pair, t)?;
    let swapped = ExpPair::new(pair.right.clone(), pair.left.clone())?;
    let backward = semigroup::matrix_element(&phi_dag, &kappa_dag, &swapped, t)?;
    let m = phi.m();
    let mut worst = 0.0f64;
    for i in 0..m {
        let mut lhs = CMat::zeros(kappa.target_cols(), kappa.target_rows());
        for l in 0..m {
            lhs += backward.entries[l].map(|z| z * j[(l, i)]);
        }
        let rhs = forward.entries[i].adjoint();
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::sample;

    fn scalar_decay() -> Coefficient {
        let theta = vec![
            vec![CMat::from_element(1, 1, c(-1.0, 0.0)), CMat::zeros(1, 1)],
            vec![CMat::zeros(1, 1), CMat::zeros(1, 1)],
        ];
        Coefficient::new(1, 1, theta).unwrap()
    }

    #[test]
    fn the_evaluator_reproduces_the_coefficient_slices() {
        for seed in [0u64, 5, 9] {
            let mut r = sample::rng(seed);
            let m = 1 + (seed as usize % 3);
            let d = 1 + (seed as usize % 2);
            let phi = sample::coefficient(&mut r, m, d);
            let cp = sample::cvec(&mut r, d);
            let cv = sample::cvec(&mut r, d);
            let table = SemigroupTable::from_coefficient(&phi, &[cp.clone(), cv.clone()]).unwrap();

            let zp = sample::c64(&mut r);
            let zv = sample::c64(&mut r);
            let mut zeta_p = CVec::zeros(d + 1);
            zeta_p[0] = zp;
            let mut zeta = CVec::zeros(d + 1);
            zeta[0] = zv;
            for i in 0..d {
                zeta_p[i + 1] = cp[i];
                zeta[i + 1] = cv[i];
            }
            let got = table.slice_at(&zeta_p, &zeta).unwrap();
            let want = phi.slice(&zeta_p, &zeta).unwrap();
            assert!(max_abs(&(got - want)) < 1e-12, "roundtrip failed on seed {seed}");
        }
    }

    #[test]
    fn unit_scalar_parts_select_the_table_entry() {
        let mut r = sample::rng(3);
        let phi = sample::coefficient(&mut r, 2, 2);
        let cp = sample::cvec(&mut r, 2);
        let cv = sample::cvec(&mut r, 2);
        let table = SemigroupTable::from_coefficient(&phi, &[cp.clone(), cv.clone()]).unwrap();
        let dims = crate::noise::NoiseDims::new(2);
        let got = table.slice_at(&dims.hat(&cp), &dims.hat(&cv)).unwrap();
        let want = phi.psi(&cp, &cv).unwrap();
        assert!(max_abs(&(got - want)) < 1e-13);

        // The all-zero probe pair is the Markov block.
        let f0 = dims.hat(&CVec::zeros(2));
        let markov = table.slice_at(&f0, &f0).unwrap();
        assert!(max_abs(&(markov - phi.theta(0, 0))) < 1e-14);
    }

    #[test]
    fn unknown_noise_parts_report_the_missing_probe() {
        let phi = sample::coefficient(&mut sample::rng(1), 2, 1);
        let table = SemigroupTable::from_coefficient(&phi, &[]).unwrap();
        let mut zeta = CVec::zeros(2);
        zeta[0] = c(1.0, 0.0);
        zeta[1] = c(0.7, 0.1);
        let err = table.slice_at(&zeta.clone(), &zeta).unwrap_err();
        match &err {
            Error::MissingProbes { missing } => {
                assert!(missing.contains("noise part"), "message was {missing}")
            }
            other => panic!("expected a probe error, got {other:?}"),
        }
        assert!(err.is_config());
    }

    #[test]
    fn half_filled_tables_list_every_absent_pair() {
        let mut table = SemigroupTable::standard(1, 1);
        table.set(0, 0, CMat::from_element(1, 1, c(-1.0, 0.0))).unwrap();
        let dims = crate::noise::NoiseDims::new(1);
        let e1 = {
            let mut e = CVec::zeros(1);
            e[0] = c(1.0, 0.0);
            e
        };
        let err = table.slice_at(&dims.hat(&e1), &dims.hat(&e1)).unwrap_err();
        match err {
            Error::MissingProbes { missing } => {
                assert!(missing.contains("(0, 1)"));
                assert!(missing.contains("(1, 0)"));
                assert!(missing.contains("(1, 1)"));
            }
            other => panic!("expected a probe error, got {other:?}"),
        }
    }

    #[test]
    fn reconstruction_inverts_the_generator_table() {
        for seed in [2u64, 8] {
            let mut r = sample::rng(seed);
            let phi = sample::coefficient(&mut r, 2, 2);
            let table = SemigroupTable::from_coefficient(&phi, &[]).unwrap();
            let rebuilt = table.reconstruct().unwrap();
            for mu in 0..3 {
                for nu in 0..3 {
                    assert!(
                        max_abs(&(rebuilt.theta(mu, nu) - phi.theta(mu, nu))) < 1e-13,
                        "block ({mu},{nu}) drifted on seed {seed}"
                    );
                }
            }
        }
    }

    #[test]
    fn the_solved_process_returns_its_own_coefficient() {
        // Fill the table through the flow engine as a black box, then
        // re-solve with the rebuilt coefficient: elements must agree.
        let case = sample::mild_engine_case(17);
        let mut table = SemigroupTable::standard(case.phi.m(), case.phi.d());
        table.fill_from_oracle(flow_oracle(&case.phi), 1.0).unwrap();
        let rebuilt = table.reconstruct().unwrap();

        let original =
            semigroup::matrix_element(&case.phi, &case.kappa, &case.pair, case.t).unwrap();
        let resolved =
            semigroup::matrix_element(&rebuilt, &case.kappa, &case.pair, case.t).unwrap();
        assert!(original.diff_frobenius(&resolved) < 1e-10);

        for mu in 0..=case.phi.d() {
            for nu in 0..=case.phi.d() {
                assert!(
                    max_abs(&(rebuilt.theta(mu, nu) - case.phi.theta(mu, nu))) < 1e-11,
                    "extracted block ({mu},{nu}) drifted"
                );
            }
        }
    }

    #[test]
    fn tabulated_semigroups_obey_the_functional_equation() {
        let case = sample::mild_engine_case(23);
        let oracle = flow_oracle(&case.phi);
        let d = case.phi.d();
        for a in 0..=d {
            let mut cp = CVec::zeros(d);
            if a > 0 {
                cp[a - 1] = c(1.0, 0.0);
            }
            for b in 0..=d {
                let mut cv = CVec::zeros(d);
                if b > 0 {
                    cv[b - 1] = c(1.0, 0.0);
                }
                let residual = functional_equation_residual(&oracle, &cp, &cv, 0.3, 0.45).unwrap();
                assert!(residual < 1e-11, "probe pair ({a},{b}) broke the law");
            }
        }
    }

    #[test]
    fn scalar_difference_quotients_carry_first_order_bias() {
        let phi = scalar_decay();
        let oracle = flow_oracle(&phi);
        let zero = CVec::zeros(1);

        let h = 1e-3;
        let q = difference_quotient_generator(&oracle, &zero, &zero, h).unwrap()[(0, 0)];
        let expected = ((-h).exp() - 1.0) / h;
        assert!((q.re - expected).abs() < 1e-9);
        assert!(q.im.abs() < 1e-12);
        assert!((q.re + 1.0).abs() < 1e-3);

        let bias = |h: f64| {
            let q = difference_quotient_generator(&oracle, &zero, &zero, h).unwrap()[(0, 0)];
            (q.re + 1.0).abs()
        };
        let ratio = bias(1e-3) / bias(5e-4);
        assert!((1.9..2.1).contains(&ratio), "bias ratio {ratio}");
    }

    #[test]
    fn quotients_of_a_frozen_process_vanish() {
        let phi = Coefficient::zero(2, 1);
        let oracle = flow_oracle(&phi);
        let zero = CVec::zeros(1);
        let q = difference_quotient_generator(&oracle, &zero, &zero, 1e-2).unwrap();
        assert!(max_abs(&q) < 1e-14);
    }

    #[test]
    fn nonpositive_quotient_steps_are_rejected() {
        let phi = scalar_decay();
        let oracle = flow_oracle(&phi);
        let zero = CVec::zeros(1);
        let err = difference_quotient_generator(&oracle, &zero, &zero, 0.0).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn exact_extraction_recovers_the_generator() {
        let case = sample::engine_case(41);
        let oracle = flow_oracle(&case.phi);
        let d = case.phi.d();
        let cp = CVec::zeros(d);
        let mut cv = CVec::zeros(d);
        cv[0] = c(1.0, 0.0);
        let got = extract_generator(|t| oracle(&cp, &cv, t), 1.0).unwrap();
        let want = case.phi.psi(&cp, &cv).unwrap();
        assert!(max_abs(&(got - want)) < 1e-12);
    }

    #[test]
    fn self_conjugate_scalar_instances_have_no_conjugation_defect() {
        let theta = vec![
            vec![
                CMat::from_element(1, 1, c(-0.8, 0.0)),
                CMat::from_element(1, 1, c(0.4, 0.0)),
            ],
            vec![
                CMat::from_element(1, 1, c(0.4, 0.0)),
                CMat::from_element(1, 1, c(-0.1, 0.0)),
            ],
        ];
        let phi = Coefficient::new(1, 1, theta).unwrap();
        let kappa = InitialMap::diagonal_units(1);
        let space = InitialSpace::with_involution(1, CMat::identity(1, 1)).unwrap();
        let mut r = sample::rng(6);
        let pair = ExpPair::new(
            sample::step_function(&mut r, 1, 2, 1.0),
            sample::step_function(&mut r, 1, 2, 1.0),
        )
        .unwrap();
        let residual = conjugate_check(&phi, &kappa, &space, &pair, 0.8).unwrap();
        assert!(residual < 1e-14);
    }

    #[test]
    fn conjugation_intertwines_solved_elements_on_random_instances() {
        for seed in [4u64, 12, 25] {
            let mut r = sample::rng(seed);
            let m = 1 + (seed as usize % 3);
            let d = 1 + (seed as usize % 2);
            let phi = sample::coefficient(&mut r, m, d);
            let kappa = sample::initial_map(&mut r, m, 2, 3);
            let space = sample::conjugated_space(&mut r, m);
            let pair = ExpPair::new(
                sample::step_function(&mut r, d, 2, 1.0),
                sample::step_function(&mut r, d, 2, 1.0),
            )
            .unwrap();
            let residual = conjugate_check(&phi, &kappa, &space, &pair, 0.9).unwrap();
            assert!(residual < 1e-10, "seed {seed} defect {residual}");
        }
    }

    #[test]
    fn hermitian_families_produce_hermitian_elements() {
        let mut r = sample::rng(33);
        let m = 2;
        // The identity involution makes conjugate coordinates plain
        // conjugates, so self-conjugate data forces hermitian output.
        let space = InitialSpace::with_involution(m, CMat::identity(m, m)).unwrap();
        let phi = sample::self_conjugate_coefficient(&mut r, &space, 1);
        let kappa = sample::self_conjugate_initial_map(&mut r, &space, 2);
        let g = sample::step_function(&mut r, 1, 2, 1.0);
        let pair = ExpPair::new(g.clone(), g).unwrap();

        let residual = conjugate_check(&phi, &kappa, &space, &pair, 0.7).unwrap();
        assert!(residual < 1e-12);

        let table = semigroup::matrix_element(&phi, &kappa, &pair, 0.7).unwrap();
        for entry in &table.entries {
            assert!(max_abs(&(entry - entry.adjoint())) < 1e-10);
        }
    }

    #[test]
    fn conjugate_checks_without_an_involution_fail_loudly() {
        let phi = sample::coefficient(&mut sample::rng(2), 2, 1);
        let kappa = InitialMap::diagonal_units(2);
        let space = InitialSpace::new(2);
        let pair = ExpPair::new(StepFunction::zero(1), StepFunction::zero(1)).unwrap();
        let err = conjugate_check(&phi, &kappa, &space, &pair, 0.5).unwrap_err();
        assert!(matches!(err, Error::MissingInvolution));
    }
}
