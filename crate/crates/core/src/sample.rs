//! Deterministic sample data for the verification suites.
//!
//! Every builder takes either a seed or a [`SampleRng`] and produces
//! the same data for the same inputs, so failing checks can be
//! replayed from the seed recorded in a report.

use rand::Rng;
use rand::SeedableRng;

use crate::coefficient::{Coefficient, InitialMap, InitialSpace};
use crate::linalg::{spectral_norm, C64, CMat, CVec};
use crate::noise::{merged_grid, ExpPair, StepFunction};

/// The stream cipher generator behind all sampled data.
pub type SampleRng = rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    SampleRng::seed_from_u64(seed)
}

/// Uniform complex number in the centered unit box.
pub fn c64(rng: &mut SampleRng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn cvec(rng: &mut SampleRng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| c64(rng))
}

pub fn cmat(rng: &mut SampleRng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| c64(rng))
}

/// Random unit vector.
pub fn unit_cvec(rng: &mut SampleRng, n: usize) -> CVec {
    loop {
        let v = cvec(rng, n);
        let norm = v.norm();
        if norm > 1e-3 {
            return v / C64::new(norm, 0.0);
        }
    }
}

/// Random coefficient with entries in the unit box.
pub fn coefficient(rng: &mut SampleRng, m: usize, d: usize) -> Coefficient {
    let theta = (0..=d)
        .map(|_| (0..=d).map(|_| cmat(rng, m, m)).collect())
        .collect();
    Coefficient::new(m, d, theta).expect("sampled coefficient is well formed")
}

/// Random initial map into p' x p matrices.
pub fn initial_map(rng: &mut SampleRng, m: usize, rows: usize, cols: usize) -> InitialMap {
    InitialMap::new((0..m).map(|_| cmat(rng, rows, cols)).collect())
        .expect("sampled initial map is well formed")
}

/// Random conjugation matrix: J = S conj(S)^{-1} satisfies
/// J conj(J) = id for any invertible S. A diagonal shift keeps S well
/// conditioned.
pub fn involution(rng: &mut SampleRng, m: usize) -> CMat {
    let s = cmat(rng, m, m) + CMat::identity(m, m) * C64::new(2.0, 0.0);
    let s_conj_inv = s
        .conjugate()
        .try_inverse()
        .expect("diagonally shifted sample matrix is invertible");
    s * s_conj_inv
}

/// Initial space of dimension m carrying a random conjugation.
pub fn conjugated_space(rng: &mut SampleRng, m: usize) -> InitialSpace {
    let j = involution(rng, m);
    InitialSpace::with_involution(m, j).expect("sampled conjugation is an involution")
}

/// Coefficient invariant under the conjugation of `space`:
/// theta[mu][nu] = A[mu][nu] + J conj(A[nu][mu]) conj(J).
pub fn self_conjugate_coefficient(rng: &mut SampleRng, space: &InitialSpace, d: usize) -> Coefficient {
    let m = space.m();
    let a = coefficient(rng, m, d);
    let dag = a.conjugate(space).expect("space carries a conjugation");
    let theta = (0..=d)
        .map(|mu| {
            (0..=d)
                .map(|nu| a.theta(mu, nu) + dag.theta(mu, nu))
                .collect()
        })
        .collect();
    Coefficient::new(m, d, theta).expect("symmetrized coefficient is well formed")
}

/// Square initial map invariant under conjugation (p' = p):
/// kappa_j = B_j + sum over l of conj(J_{lj}) B_l^*.
pub fn self_conjugate_initial_map(rng: &mut SampleRng, space: &InitialSpace, p: usize) -> InitialMap {
    let m = space.m();
    let b = initial_map(rng, m, p, p);
    let dag = b.conjugate(space).expect("space carries a conjugation");
    InitialMap::new(
        (0..m)
            .map(|i| b.matrix(i) + dag.matrix(i))
            .collect(),
    )
    .expect("symmetrized initial map is well formed")
}

/// Step function with `pieces` plateaus whose support strictly covers
/// [0, horizon]; breakpoints stay away from 0 and the horizon.
pub fn step_function(rng: &mut SampleRng, d: usize, pieces: usize, horizon: f64) -> StepFunction {
    assert!(pieces >= 1);
    let mut ends = Vec::with_capacity(pieces);
    for k in 1..pieces {
        ends.push(horizon * (k as f64 + rng.random_range(-0.3..0.3)) / pieces as f64);
    }
    ends.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ends.push(horizon * rng.random_range(1.05..1.3));
    let values = (0..pieces).map(|_| cvec(rng, d)).collect();
    StepFunction::new(d, ends, values).expect("sampled step function is well formed")
}

/// One seeded engine comparison case.
#[derive(Clone, Debug)]
pub struct EngineCase {
    pub phi: Coefficient,
    pub kappa: InitialMap,
    pub pair: ExpPair,
    pub t: f64,
}

impl EngineCase {
    /// Largest spectral norm of the per-interval generator slices on
    /// the merged grid of the case.
    pub fn max_generator_norm(&self) -> f64 {
        let grid = merged_grid(&[&self.pair.left, &self.pair.right], self.t);
        grid.windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let psi = self
                    .phi
                    .psi(&self.pair.left.value_at(mid), &self.pair.right.value_at(mid))
                    .expect("case dimensions agree");
                spectral_norm(&psi)
            })
            .fold(0.0, f64::max)
    }

    fn rescale_generators_to(&mut self, target: f64) {
        let max = self.max_generator_norm();
        if max > target {
            self.phi = self.phi.scaled(C64::new(target / max, 0.0));
        }
    }
}

/// Seeded case in the standard comparison family: m <= 4, d <= 2, at
/// most four merged intervals, t <= 2, generator slices of spectral
/// norm at most 2.
pub fn engine_case(seed: u64) -> EngineCase {
    let mut r = rng(seed);
    let m = r.random_range(1..=4);
    let d = r.random_range(1..=2);
    let rows = r.random_range(1..=3);
    let cols = r.random_range(1..=3);
    let t = r.random_range(0.5..=2.0);
    let phi = coefficient(&mut r, m, d);
    let kappa = initial_map(&mut r, m, rows, cols);
    let gp_pieces = r.random_range(1..=2);
    let gp = step_function(&mut r, d, gp_pieces, t);
    let g_pieces = r.random_range(1..=2);
    let g = step_function(&mut r, d, g_pieces, t);
    let pair = ExpPair::new(gp, g).expect("matching noise dimensions");
    let mut case = EngineCase {
        phi,
        kappa,
        pair,
        t,
    };
    let target = r.random_range(0.6..2.0);
    case.rescale_generators_to(target);
    case
}

/// Seeded case with small generator norms and short horizon, suited
/// to quadrature residual checks and discrete Fock comparisons.
pub fn mild_engine_case(seed: u64) -> EngineCase {
    let mut r = rng(seed);
    let m = r.random_range(1..=3);
    let d = r.random_range(1..=2);
    let rows = r.random_range(1..=3);
    let cols = r.random_range(1..=3);
    let t = r.random_range(0.4..=1.0);
    let phi = coefficient(&mut r, m, d);
    let kappa = initial_map(&mut r, m, rows, cols);
    let gp_pieces = r.random_range(1..=2);
    let gp = step_function(&mut r, d, gp_pieces, t);
    let g_pieces = r.random_range(1..=2);
    let g = step_function(&mut r, d, g_pieces, t);
    let pair = ExpPair::new(gp, g).expect("matching noise dimensions");
    let mut case = EngineCase {
        phi,
        kappa,
        pair,
        t,
    };
    let target = r.random_range(0.2..0.75);
    case.rescale_generators_to(target);
    case
}

/// Step function whose breakpoints sit on eighths of the horizon, so
/// it is constant on every slot of any grid with a multiple of eight
/// slots; the support strictly covers [0, horizon].
pub fn dyadic_step_function(rng: &mut SampleRng, d: usize, horizon: f64) -> StepFunction {
    let k = rng.random_range(2..=6);
    let ends = vec![horizon * k as f64 / 8.0, horizon * 1.125];
    let values = vec![cvec(rng, d), cvec(rng, d)];
    StepFunction::new(d, ends, values).expect("dyadic step function is well formed")
}

/// Seeded case for discrete-grid studies: horizon 1, dyadic plateau
/// boundaries, m <= 2, small generator norms.
pub fn dyadic_engine_case(seed: u64) -> EngineCase {
    let mut r = rng(seed);
    let m = r.random_range(1..=2);
    let d = r.random_range(1..=2);
    let t = 1.0;
    let phi = coefficient(&mut r, m, d);
    let kappa = initial_map(&mut r, m, m, m);
    let gp = dyadic_step_function(&mut r, d, t);
    let g = dyadic_step_function(&mut r, d, t);
    let pair = ExpPair::new(gp, g).expect("matching noise dimensions");
    let mut case = EngineCase {
        phi,
        kappa,
        pair,
        t,
    };
    case.rescale_generators_to(0.75);
    case
}
