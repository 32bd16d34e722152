//! Matrix-element evaluation by the truncated iterated-integral
//! series, with a rigorous tail bound.
//!
//! For step-function data the n-th series level is a finite sum: time
//! ordering within one plateau interval of length L contributes the
//! exact simplex volume L^k / k!, so level n is the sum over weak
//! compositions (n_1, ..., n_K) of n of the ordered products
//! prod_j (L_j^{n_j} / n_j!) psi_j^{n_j}, earliest interval leftmost.
//! No quadrature is involved; truncation is the only error source and
//! is covered by a closed overestimate of the remaining levels.

use crate::coefficient::{Coefficient, ElementTable, InitialMap};
use crate::error::Error;
use crate::linalg::{spectral_norm, CMat};
use crate::noise::{merged_grid, ExpPair, FeConstant, StepFunction, MERGE_EPS};
use crate::semigroup::decomposition;
use crate::Result;

/// Default series truncation level.
pub const DEFAULT_TRUNCATION: usize = 18;

/// All weak compositions of n into `parts` nonnegative summands, in
/// lexicographic order. Exposed so tests can pin the enumeration size
/// against the stars-and-bars count.
pub fn weak_compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if n == 0 { vec![vec![]] } else { Vec::new() };
    }
    let mut out = Vec::new();
    let mut current = vec![0usize; parts];
    fn rec(current: &mut Vec<usize>, idx: usize, remaining: usize, out: &mut Vec<Vec<usize>>) {
        if idx + 1 == current.len() {
            current[idx] = remaining;
            out.push(current.clone());
            return;
        }
        for k in 0..=remaining {
            current[idx] = k;
            rec(current, idx + 1, remaining - k, out);
        }
    }
    rec(&mut current, 0, n, &mut out);
    out
}

/// Number of weak compositions of n into `parts` summands, by direct
/// enumeration count recursion (no closed form), for cross-checks.
pub fn weak_composition_count(n: usize, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(n == 0);
    }
    if parts == 1 {
        return 1;
    }
    (0..=n).map(|k| weak_composition_count(n - k, parts - 1)).sum()
}

/// Per-level matrices A_0..A_N of the series for the given cell
/// generators, via convolution over intervals: appending interval j
/// multiplies the level-generating polynomial by
/// sum_k (L_j psi_j)^k / k!.
fn level_matrices(cells: &[(f64, CMat)], m: usize, n_max: usize) -> Vec<CMat> {
    let mut levels = vec![CMat::zeros(m, m); n_max + 1];
    levels[0] = CMat::identity(m, m);
    for (len, psi) in cells {
        // scaled powers (L psi)^k / k! up to the truncation level
        let mut powers = Vec::with_capacity(n_max + 1);
        powers.push(CMat::identity(m, m));
        for k in 1..=n_max {
            let prev: &CMat = &powers[k - 1];
            powers.push(prev * psi * crate::linalg::c(len / k as f64, 0.0));
        }
        let mut next = vec![CMat::zeros(m, m); n_max + 1];
        for n in 0..=n_max {
            for k in 0..=n {
                next[n] += &levels[n - k] * &powers[k];
            }
        }
        levels = next;
    }
    levels
}

/// Closed tail overestimate sum_{n>N} (Mt)^n / n! <=
/// (Mt)^{N+1}/(N+1)! * 1 / (1 - Mt/(N+2)), valid when Mt < N + 2.
fn tail_overestimate(mt: f64, n_max: usize) -> Result<f64> {
    if mt <= 0.0 {
        return Ok(0.0);
    }
    let limit = (n_max + 2) as f64;
    if mt >= limit {
        return Err(Error::TruncationTooSmall { mt, limit });
    }
    let mut lead = 1.0;
    for k in 1..=(n_max + 1) {
        lead *= mt / k as f64;
    }
    Ok(lead / (1.0 - mt / limit))
}

/// Truncated series evaluation of the normalized matrix element,
/// together with a rigorous bound on the dropped tail in the stacked
/// Frobenius norm.
///
/// # Errors
/// Returns the truncation guard error when M t >= N + 2, where M is
/// the largest generator-slice spectral norm on the merged grid.
pub fn truncated_series(
    phi: &Coefficient,
    kappa: &InitialMap,
    pair: &ExpPair,
    t: f64,
    n_max: usize,
) -> Result<(ElementTable, f64)> {
    if kappa.m() != phi.m() {
        return Err(Error::DimensionMismatch {
            context: "initial map vs coefficient source dimension".into(),
            expected: phi.m(),
            found: kappa.m(),
        });
    }
    let cells = decomposition(phi, pair, t)?;
    let sized: Vec<(f64, CMat)> = cells
        .iter()
        .map(|c| (c.len(), c.generator.clone()))
        .collect();
    let m_norm = sized
        .iter()
        .map(|(_, psi)| spectral_norm(psi))
        .fold(0.0, f64::max);
    let tail = kappa.frobenius_norm() * tail_overestimate(m_norm * t, n_max)?;

    let levels = level_matrices(&sized, phi.m(), n_max);
    let mut total = CMat::zeros(phi.m(), phi.m());
    for level in &levels {
        total += level;
    }
    let composed = kappa.composed_with(&total)?;
    Ok((
        ElementTable {
            t,
            entries: composed.matrices().to_vec(),
        },
        tail,
    ))
}

/// Reference implementation of the series levels by explicit weak
/// composition enumeration; used to validate the convolution path.
pub fn level_matrix_by_enumeration(
    phi: &Coefficient,
    pair: &ExpPair,
    t: f64,
    n: usize,
) -> Result<CMat> {
    let cells = decomposition(phi, pair, t)?;
    let m = phi.m();
    let mut scaled: Vec<Vec<CMat>> = Vec::new();
    for cell in &cells {
        let mut powers = vec![CMat::identity(m, m)];
        for k in 1..=n {
            let prev: &CMat = &powers[k - 1];
            powers.push(prev * &cell.generator * crate::linalg::c(cell.len() / k as f64, 0.0));
        }
        scaled.push(powers);
    }
    let mut out = CMat::zeros(m, m);
    if cells.is_empty() {
        if n == 0 {
            out = CMat::identity(m, m);
        }
        return Ok(out);
    }
    for comp in weak_compositions(n, cells.len()) {
        let mut term = CMat::identity(m, m);
        for (j, &k) in comp.iter().enumerate() {
            term *= &scaled[j][k];
        }
        out += term;
    }
    Ok(out)
}

/// Single point of the form representation: the initial condition
/// composed with the generator slices at the (sorted) times of sigma,
/// smallest time adjacent to the initial condition.
pub fn upsilon_sigma(
    phi: &Coefficient,
    kappa: &InitialMap,
    pair: &ExpPair,
    sigma: &[f64],
) -> Result<InitialMap> {
    if kappa.m() != phi.m() {
        return Err(Error::DimensionMismatch {
            context: "initial map vs coefficient source dimension".into(),
            expected: phi.m(),
            found: kappa.m(),
        });
    }
    for &s in sigma {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::NonFinite {
                context: format!("series evaluation time {s}"),
            });
        }
    }
    let mut times = sigma.to_vec();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut q = CMat::identity(phi.m(), phi.m());
    for s in times {
        let slice = phi.psi(&pair.left.value_at(s), &pair.right.value_at(s))?;
        q *= slice;
    }
    kappa.composed_with(&q)
}

/// Largest column norm of the coefficient over the hatted plateau
/// values of g on [0, horizon].
pub fn max_hatted_column_norm(phi: &Coefficient, g: &StepFunction, horizon: f64) -> Result<f64> {
    if horizon <= MERGE_EPS {
        return Ok(0.0);
    }
    let grid = merged_grid(&[g], horizon);
    let mut best: f64 = 0.0;
    for w in grid.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let zeta = phi.dims().hat(&g.value_at(mid));
        best = best.max(phi.column_norm(&zeta)?);
    }
    Ok(best)
}

/// Relative floor under which further series terms are dropped.
const SERIES_TERM_FLOOR: f64 = 1e-16;

/// A priori bound on the Fock-space distance between solution values
/// at times r <= t within horizon T, against the exponential vector of
/// g: sqrt(t - r) times kappa's stacked spectral norm, the exponential
/// vector norm, the configured growth constant at T, and the series
/// sum of C^n / sqrt(n!) with C the growth constant times
/// sqrt(d + 1) times the largest hatted column norm on [0, T].
pub fn hoelder_bound(
    phi: &Coefficient,
    kappa: &InitialMap,
    g: &StepFunction,
    r: f64,
    t: f64,
    horizon: f64,
    fe: &FeConstant,
) -> Result<f64> {
    assert!(
        0.0 <= r && r <= t && t <= horizon,
        "times must satisfy 0 <= r <= t <= horizon"
    );
    let growth = fe.eval(g, horizon);
    let column = max_hatted_column_norm(phi, g, horizon)?;
    let c = growth * ((phi.d() + 1) as f64).sqrt() * column;
    let mut sum = 0.0f64;
    let mut term = 1.0;
    let mut n = 0usize;
    while term > SERIES_TERM_FLOOR * sum.max(1.0) {
        sum += term;
        n += 1;
        term *= c / (n as f64).sqrt();
    }
    let exp_vector_norm = (0.5 * g.restrict(horizon).l2_norm_sq()).exp();
    Ok((t - r).sqrt() * kappa.spectral_norm() * exp_vector_norm * growth * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, C64};
    use crate::noise::StepFunction;
    use crate::sample;
    use crate::semigroup;

    fn scalar_phi(t00: C64, t01: C64, t10: C64, t11: C64) -> Coefficient {
        let block = |z| CMat::from_element(1, 1, z);
        Coefficient::new(
            1,
            1,
            vec![
                vec![block(t00), block(t01)],
                vec![block(t10), block(t11)],
            ],
        )
        .unwrap()
    }

    fn zero_pair(d: usize) -> ExpPair {
        ExpPair::new(StepFunction::zero(d), StepFunction::zero(d)).unwrap()
    }

    #[test]
    fn scalar_truncation_at_level_three_matches_hand_values() {
        let phi = scalar_phi(c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let kappa = InitialMap::diagonal_units(1);
        let (table, tail) = truncated_series(&phi, &kappa, &zero_pair(1), 1.0, 3).unwrap();
        let partial = table.entries[0][(0, 0)];
        assert!((partial - c(1.0 / 3.0, 0.0)).norm() <= 1e-15, "1 - 1 + 1/2 - 1/6");
        // closed overestimate 5/96 dominates the true tail 0.0516152
        // and the actual error 0.0345461
        assert!((tail - 5.0 / 96.0).abs() <= 1e-15);
        assert!(tail >= 0.0516152);
        let error = (partial - c((-1.0f64).exp(), 0.0)).norm();
        assert!(error <= tail);
    }

    #[test]
    fn zero_coefficient_gives_initial_condition_and_zero_tail() {
        let mut r = sample::rng(5);
        let phi = Coefficient::zero(2, 2);
        let kappa = sample::initial_map(&mut r, 2, 3, 2);
        let gp = sample::step_function(&mut r, 2, 2, 1.0);
        let g = sample::step_function(&mut r, 2, 2, 1.0);
        let pair = ExpPair::new(gp, g).unwrap();
        for n in [0usize, 1, 7] {
            let (table, tail) = truncated_series(&phi, &kappa, &pair, 1.0, n).unwrap();
            assert_eq!(tail, 0.0);
            for i in 0..2 {
                assert!((&table.entries[i] - kappa.matrix(i)).norm() <= 1e-15);
            }
        }
    }

    #[test]
    fn single_plateau_series_is_the_taylor_truncation() {
        let mut r = sample::rng(9);
        let phi = sample::coefficient(&mut r, 3, 1);
        let kappa = InitialMap::diagonal_units(3);
        let cval = sample::cvec(&mut r, 1);
        let cpval = sample::cvec(&mut r, 1);
        let gp = StepFunction::constant(cpval.clone(), 2.0).unwrap();
        let g = StepFunction::constant(cval.clone(), 2.0).unwrap();
        let pair = ExpPair::new(gp, g).unwrap();
        let t = 0.7;
        let n_max = 6;
        let (table, _) = truncated_series(&phi, &kappa, &pair, t, n_max).unwrap();

        let psi = phi.psi(&cpval, &cval).unwrap();
        let mut taylor = CMat::zeros(3, 3);
        let mut power = CMat::identity(3, 3);
        for k in 0..=n_max {
            if k > 0 {
                power = &power * &psi * c(t / k as f64, 0.0);
            }
            taylor += &power;
        }
        let expect = kappa.composed_with(&taylor).unwrap();
        for i in 0..3 {
            assert!((&table.entries[i] - expect.matrix(i)).norm() <= 1e-13);
        }
    }

    #[test]
    fn converged_series_collapses_to_the_exponential_product() {
        for seed in [2u64, 14, 30] {
            let case = sample::mild_engine_case(seed);
            let (table, tail) =
                truncated_series(&case.phi, &case.kappa, &case.pair, case.t, 30).unwrap();
            let reference =
                semigroup::matrix_element(&case.phi, &case.kappa, &case.pair, case.t).unwrap();
            assert!(tail <= 1e-13, "seed {seed}: tail {tail}");
            assert!(
                table.diff_frobenius(&reference) <= 1e-12,
                "seed {seed}: {}",
                table.diff_frobenius(&reference)
            );
        }
    }

    #[test]
    fn series_agrees_with_the_semigroup_engine_within_its_tail() {
        for seed in 0..12 {
            let case = sample::engine_case(seed);
            let (table, tail) = truncated_series(
                &case.phi,
                &case.kappa,
                &case.pair,
                case.t,
                DEFAULT_TRUNCATION,
            )
            .unwrap();
            let reference =
                semigroup::matrix_element(&case.phi, &case.kappa, &case.pair, case.t).unwrap();
            let diff = table.diff_frobenius(&reference);
            assert!(diff <= tail + 1e-10, "seed {seed}: diff {diff}, tail {tail}");
        }
    }

    #[test]
    fn convolved_levels_match_explicit_enumeration() {
        let case = sample::engine_case(21);
        let cells = decomposition(&case.phi, &case.pair, case.t).unwrap();
        let sized: Vec<(f64, CMat)> = cells
            .iter()
            .map(|c| (c.len(), c.generator.clone()))
            .collect();
        let levels = level_matrices(&sized, case.phi.m(), 5);
        for n in 0..=5 {
            let explicit = level_matrix_by_enumeration(&case.phi, &case.pair, case.t, n).unwrap();
            assert!(
                (&levels[n] - explicit).norm() <= 1e-12,
                "level {n} mismatch"
            );
        }
    }

    #[test]
    fn level_two_matches_simplex_quadrature() {
        // noncommuting generators across the plateau change at 0.5
        let e12 = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let e21 = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let theta = vec![
            vec![e21.clone(), e12.clone()],
            vec![CMat::zeros(2, 2), CMat::zeros(2, 2)],
        ];
        let phi = Coefficient::new(2, 1, theta).unwrap();
        let g = StepFunction::new(
            1,
            vec![0.5, 1.1],
            vec![
                crate::linalg::CVec::from_element(1, c(1.0, 0.0)),
                crate::linalg::CVec::from_element(1, c(0.0, 0.0)),
            ],
        )
        .unwrap();
        let pair = ExpPair::new(StepFunction::zero(1), g.clone()).unwrap();
        let t = 1.0;
        let a2 = level_matrix_by_enumeration(&phi, &pair, t, 2).unwrap();

        // midpoint Riemann sum over the ordered square half
        let n_q = 800usize;
        let h = t / n_q as f64;
        let slice_at = |s: f64| {
            phi.psi(&pair.left.value_at(s), &pair.right.value_at(s))
                .unwrap()
        };
        let nodes: Vec<CMat> = (0..n_q)
            .map(|k| slice_at((k as f64 + 0.5) * h))
            .collect();
        let mut quad = CMat::zeros(2, 2);
        for a in 0..n_q {
            for b in (a + 1)..n_q {
                quad += &nodes[a] * &nodes[b];
            }
            quad += (&nodes[a] * &nodes[a]) * c(0.5, 0.0);
        }
        quad *= c(h * h, 0.0);
        assert!((a2 - quad).norm() <= 1e-2, "quadrature cross-check");
    }

    #[test]
    fn form_representation_point_orders_earliest_first() {
        // M(s) = theta00 + g(s) theta01 with E21, E12: before 0.5 the
        // slice is E21 + E12, after it is E21 alone, so
        // M(0.2) M(0.8) = (E21 + E12) E21 = E11.
        let e12 = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let e21 = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let theta = vec![
            vec![e21.clone(), e12.clone()],
            vec![CMat::zeros(2, 2), CMat::zeros(2, 2)],
        ];
        let phi = Coefficient::new(2, 1, theta).unwrap();
        let g = StepFunction::new(
            1,
            vec![0.5, 1.1],
            vec![
                crate::linalg::CVec::from_element(1, c(1.0, 0.0)),
                crate::linalg::CVec::from_element(1, c(0.0, 0.0)),
            ],
        )
        .unwrap();
        let pair = ExpPair::new(StepFunction::zero(1), g).unwrap();
        let kappa = InitialMap::diagonal_units(2);
        let ups = upsilon_sigma(&phi, &kappa, &pair, &[0.8, 0.2]).unwrap();
        // Q = E11: basis 0 maps to kappa_0, basis 1 to zero
        assert!((ups.matrix(0) - kappa.matrix(0)).norm() <= 1e-15);
        assert!(ups.matrix(1).norm() <= 1e-15);

        // empty sigma returns the initial condition
        let empty = upsilon_sigma(&phi, &kappa, &pair, &[]).unwrap();
        for i in 0..2 {
            assert_eq!(empty.matrix(i), kappa.matrix(i));
        }
    }

    #[test]
    fn scalar_plateau_lookup_contracts_the_right_values() {
        // theta01 = [1]: slice at (0, g(s)) is g(s); sigma = {0.2, 0.8}
        // picks plateau values 2 and 3i, so the product is 6i.
        let phi = scalar_phi(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let g = StepFunction::new(
            1,
            vec![0.5, 1.0],
            vec![
                crate::linalg::CVec::from_element(1, c(2.0, 0.0)),
                crate::linalg::CVec::from_element(1, c(0.0, 3.0)),
            ],
        )
        .unwrap();
        let pair = ExpPair::new(StepFunction::zero(1), g).unwrap();
        let kappa = InitialMap::diagonal_units(1);
        let ups = upsilon_sigma(&phi, &kappa, &pair, &[0.2, 0.8]).unwrap();
        assert!((ups.matrix(0)[(0, 0)] - c(0.0, 6.0)).norm() <= 1e-15);
    }

    #[test]
    fn tail_bound_decreases_in_the_truncation_level() {
        let case = sample::engine_case(3);
        let mut previous = f64::INFINITY;
        for n in 4..10 {
            let (_, tail) =
                truncated_series(&case.phi, &case.kappa, &case.pair, case.t, n).unwrap();
            assert!(tail < previous, "level {n}: {tail} !< {previous}");
            previous = tail;
        }
    }

    #[test]
    fn low_truncation_levels_are_rejected_with_the_guard_error() {
        let phi = scalar_phi(c(-3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let kappa = InitialMap::diagonal_units(1);
        let err = truncated_series(&phi, &kappa, &zero_pair(1), 1.0, 0).unwrap_err();
        assert!(matches!(err, Error::TruncationTooSmall { .. }));
        assert!(
            err.to_string()
                .contains("truncation level too small for rigorous tail"),
            "message: {err}"
        );
        assert!(err.is_config());
    }

    #[test]
    fn enumeration_count_matches_stars_and_bars() {
        // Pascal's triangle reference for binomial(n + k - 1, k - 1)
        let binom = |n: u128, k: u128| -> u128 {
            let mut row = vec![1u128];
            for _ in 0..n {
                let mut next = vec![1u128];
                for w in row.windows(2) {
                    next.push(w[0] + w[1]);
                }
                next.push(1);
                row = next;
            }
            row[k as usize]
        };
        for k in 1..=5usize {
            for n in 0..=8usize {
                let count = weak_composition_count(n, k);
                let listed = weak_compositions(n, k).len() as u128;
                let expect = binom((n + k - 1) as u128, (k - 1) as u128);
                assert_eq!(count, expect, "count({n},{k})");
                assert_eq!(listed, expect, "list({n},{k})");
            }
        }
    }

    #[test]
    fn hoelder_bound_scales_as_the_square_root_of_the_gap() {
        let case = sample::engine_case(6);
        let fe = FeConstant::default();
        let horizon = case.t;
        let quarter = hoelder_bound(
            &case.phi,
            &case.kappa,
            &case.pair.right,
            0.0,
            horizon / 4.0,
            horizon,
            &fe,
        )
        .unwrap();
        let full = hoelder_bound(
            &case.phi,
            &case.kappa,
            &case.pair.right,
            0.0,
            horizon,
            horizon,
            &fe,
        )
        .unwrap();
        assert!((full - 2.0 * quarter).abs() <= 1e-12 * full);

        let degenerate = hoelder_bound(
            &case.phi,
            &case.kappa,
            &case.pair.right,
            0.3 * horizon,
            0.3 * horizon,
            horizon,
            &fe,
        )
        .unwrap();
        assert_eq!(degenerate, 0.0);
    }

    #[test]
    fn scalar_hoelder_bound_matches_the_frozen_reference() {
        // theta00 = -1, theta10 = 1, g = 0, kappa = [1], T = 1:
        // column at f_0 has norm sqrt(2), growth constant sqrt(2 T),
        // so C = 2 sqrt(2) and the series sum is the frozen value.
        let phi = scalar_phi(c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let kappa = InitialMap::diagonal_units(1);
        let g = StepFunction::zero(1);
        let fe = FeConstant::default();
        let bound = hoelder_bound(&phi, &kappa, &g, 0.0, 1.0, 1.0, &fe).unwrap();
        let series_sum = 203.622193989047269;
        let expect = 2.0f64.sqrt() * series_sum;
        assert!(
            (bound - expect).abs() <= 1e-9 * expect,
            "bound {bound} vs {expect}"
        );
    }
}
