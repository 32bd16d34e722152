//! Verification suites: each builds a list of [`Check`] records from
//! an instance, the requested test-function pair, and a seed for the
//! randomized perturbations. Every randomized check records its seed
//! so a report can be replayed exactly.

use qsde_core::linalg::c;
use qsde_core::{
    coalgebra, cocycle, sample, semigroup, series, toyfock, CMat, CVec, CoalgebraSection,
    ExpPair, Instance, NoiseDims, Result,
};
use rand::Rng;

use crate::encode::Check;

/// Split and refinement identities are exact for ordered exponential
/// products; only roundoff remains.
const COCYCLE_BOUND: f64 = 1e-10;
const REFINEMENT_BOUND: f64 = 1e-12;
/// Conjugation intertwines two independently solved processes.
const CONJUGATION_BOUND: f64 = 1e-10;
/// Lifted solves factor exactly through the base solve.
const LIFTING_BOUND: f64 = 1e-11;
/// Roundoff allowance on top of the rigorous series tail.
const SERIES_SLACK: f64 = 1e-10;
/// Composite Simpson residual of the defining integral equation.
const WEAK_BOUND: f64 = 1e-9;
/// Structure-tensor identities (coassociativity, counit laws) and
/// involution validity are exact up to roundoff.
const STRUCTURE_BOUND: f64 = 1e-10;
/// Invariance of a localised closure under all coefficient slices.
const CLOSURE_BOUND: f64 = 1e-9;
/// Counit slice of the full solve against the localised flow.
const COUNIT_SLICE_BOUND: f64 = 1e-11;
/// Coalgebraic integral-equation residual at the configured steps.
const COALG_RESIDUAL_BOUND: f64 = 1e-9;

pub struct Ctx<'a> {
    pub instance: &'a Instance,
    pub pair: ExpPair,
    pub t: f64,
    pub seed: u64,
    pub tol: Option<f64>,
}

impl Ctx<'_> {
    /// Residual-type bounds may be overridden from the command line;
    /// intrinsic inequalities (norm bounds, monotonicity) may not.
    fn bound(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn sub_seed(&self, salt: u64) -> u64 {
        self.seed.wrapping_mul(1_000_003).wrapping_add(salt)
    }
}

pub fn cocycle_checks(ctx: &Ctx) -> Result<Vec<Check>> {
    let phi = &ctx.instance.phi;
    let mut checks = Vec::new();
    for i in 0..4u64 {
        let seed = ctx.sub_seed(100 + i);
        let mut r = sample::rng(seed);
        let split = r.random_range(0.0..ctx.t);
        let residual = semigroup::cocycle_residual(phi, &ctx.pair, split, ctx.t - split)?;
        checks.push(Check::seeded(
            format!("cocycle split {i}"),
            residual,
            ctx.bound(COCYCLE_BOUND),
            seed,
        ));
    }
    for i in 0..2u64 {
        let seed = ctx.sub_seed(200 + i);
        let mut r = sample::rng(seed);
        let extras: Vec<f64> = (0..3).map(|_| r.random_range(0.0..ctx.t)).collect();
        let residual = semigroup::refinement_residual(phi, &ctx.pair, ctx.t, &extras)?;
        checks.push(Check::seeded(
            format!("grid refinement {i}"),
            residual,
            ctx.bound(REFINEMENT_BOUND),
            seed,
        ));
    }
    Ok(checks)
}

pub fn conjugate_checks(ctx: &Ctx) -> Result<Vec<Check>> {
    let instance = ctx.instance;
    let mut checks = Vec::new();
    let space = match instance.space() {
        Ok(space) => space,
        Err(qsde_core::Error::InvalidInvolution { defect }) => {
            // A present but broken involution is a verification
            // failure, not a configuration problem.
            checks.push(
                Check::new("conjugation structure", defect, STRUCTURE_BOUND)
                    .with_note("involution is not a conjugation"),
            );
            return Ok(checks);
        }
        Err(e) => return Err(e),
    };
    let residual =
        cocycle::conjugate_check(&instance.phi, &instance.kappa, &space, &ctx.pair, ctx.t)?;
    checks.push(Check::new(
        "conjugation residual",
        residual,
        ctx.bound(CONJUGATION_BOUND),
    ));
    for i in 0..2u64 {
        let seed = ctx.sub_seed(300 + i);
        let mut r = sample::rng(seed);
        let g_p = sample::step_function(&mut r, instance.d, 2, ctx.t);
        let g = sample::step_function(&mut r, instance.d, 2, ctx.t);
        let perturbed = ExpPair::new(g_p, g)?;
        let residual =
            cocycle::conjugate_check(&instance.phi, &instance.kappa, &space, &perturbed, ctx.t)?;
        checks.push(Check::seeded(
            format!("conjugation residual perturbed {i}"),
            residual,
            ctx.bound(CONJUGATION_BOUND),
            seed,
        ));
    }
    Ok(checks)
}

pub fn lifting_checks(ctx: &Ctx) -> Result<Vec<Check>> {
    let instance = ctx.instance;
    let base = semigroup::matrix_element(&instance.phi, &instance.kappa, &ctx.pair, ctx.t)?;
    let mut checks = Vec::new();
    for n in [2usize, 3] {
        let lifted_phi = instance.phi.lift(n);
        let lifted_kappa = instance.kappa.lift(n);
        let lifted = semigroup::matrix_element(&lifted_phi, &lifted_kappa, &ctx.pair, ctx.t)?;
        let mut worst: f64 = 0.0;
        for (i, entry) in base.entries.iter().enumerate() {
            for row in 0..n {
                for col in 0..n {
                    let mut unit = CMat::zeros(n, n);
                    unit[(row, col)] = c(1.0, 0.0);
                    let idx = (i * n + row) * n + col;
                    worst = worst.max((&lifted.entries[idx] - entry.kronecker(&unit)).norm());
                }
            }
        }
        checks.push(Check::new(
            format!("lifting level {n}"),
            worst,
            ctx.bound(LIFTING_BOUND),
        ));
    }
    Ok(checks)
}

pub fn bounds_checks(ctx: &Ctx) -> Result<Vec<Check>> {
    let instance = ctx.instance;
    let phi = &instance.phi;
    let dims = NoiseDims::new(instance.d);
    let mut checks = Vec::new();

    for i in 0..5u64 {
        let seed = ctx.sub_seed(400 + i);
        let mut r = sample::rng(seed);
        let chain_len = r.random_range(1..=4);
        let columns: Vec<CMat> = (0..chain_len)
            .map(|_| {
                let zeta = dims.hat(&sample::cvec(&mut r, instance.d));
                phi.column(&zeta)
            })
            .collect::<Result<_>>()?;
        let rows = r.random_range(1..=3);
        let psi = sample::initial_map(&mut r, instance.m, rows, instance.m);
        let outcome = qsde_core::coefficient::composition_bound_check(&psi, &columns)?;
        checks.push(
            Check::seeded("composition norm", outcome.left, outcome.right, seed)
                .with_note(format!("chain of {chain_len} columns")),
        );
    }

    let reference = semigroup::matrix_element(phi, &instance.kappa, &ctx.pair, ctx.t)?;
    let mut tails = Vec::new();
    for n in [6usize, 10, 14, 18] {
        let (table, tail) = series::truncated_series(phi, &instance.kappa, &ctx.pair, ctx.t, n)?;
        let defect = table.diff_frobenius(&reference);
        checks.push(Check::new(
            format!("series defect at cut {n}"),
            defect,
            tail + SERIES_SLACK,
        ));
        tails.push(tail);
    }
    let worst_increase = tails
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    checks.push(Check::new("tail monotonicity", worst_increase, 0.0));

    let slots = instance.defaults.slots;
    let grid = toyfock::ToyGrid::new(ctx.t, slots)?;
    let v = CVec::from_element(instance.kappa.target_cols(), c(1.0, 0.0));
    let solution = toyfock::euler_solve(phi, &instance.kappa, &v, &ctx.pair.right, grid)?;
    checks.push(Check::new(
        "discrete energy ratio",
        solution.fe_report(&instance.fe).max_ratio,
        1.0,
    ));
    let aligned = |alpha: f64| (alpha * slots as f64).fract().abs() < 1e-12;
    for (lo, hi) in [(0.0, 0.5), (0.25, 0.75), (0.0, 1.0)] {
        if !(aligned(lo) && aligned(hi)) {
            continue;
        }
        let (r_t, t_t) = (lo * ctx.t, hi * ctx.t);
        let measure = solution.hoelder_measure(r_t, t_t)?;
        let bound = series::hoelder_bound(
            phi,
            &instance.kappa,
            &ctx.pair.right,
            r_t,
            t_t,
            ctx.t,
            &instance.fe,
        )?;
        checks.push(Check::new(
            format!("increment bound on [{r_t}, {t_t}]"),
            measure,
            bound,
        ));
    }
    Ok(checks)
}

pub fn weak_checks(ctx: &Ctx) -> Result<Vec<Check>> {
    let instance = ctx.instance;
    let steps = instance.defaults.quadrature_steps;
    let mut checks = Vec::new();
    for q in [steps, steps * 2] {
        let residual =
            semigroup::weak_residual(&instance.phi, &instance.kappa, &ctx.pair, ctx.t, q)?;
        checks.push(Check::new(
            format!("weak integral residual at {q} steps"),
            residual,
            ctx.bound(WEAK_BOUND),
        ));
    }
    Ok(checks)
}

pub fn coalg_checks(ctx: &Ctx, section: &CoalgebraSection) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let validation = section.coalgebra.validate();
    checks.push(Check::new(
        "structure tensor identities",
        validation.max(),
        STRUCTURE_BOUND,
    ));

    let induced = coalgebra::induced_coefficient(&section.coalgebra, &section.generator)?;
    let mc = section.coalgebra.m();
    for i in 0..mc {
        let mut direction = CVec::zeros(mc);
        direction[i] = c(1.0, 0.0);
        let basis = coalgebra::localise(&induced, &direction, mc)?;
        let defect = coalgebra::invariance_defect(&induced, &basis)?;
        checks.push(
            Check::new(
                format!("closure invariance at direction {i}"),
                defect,
                ctx.bound(CLOSURE_BOUND),
            )
            .with_note(format!("dim {}", basis.ncols())),
        );
    }

    let flow = coalgebra::ConvolutionFlow::new(
        &section.coalgebra,
        &section.generator,
        &ctx.pair.left,
        &ctx.pair.right,
    )?;
    checks.push(Check::new(
        "counit slice consistency",
        flow.counit_slice_defect(ctx.t)?,
        ctx.bound(COUNIT_SLICE_BOUND),
    ));
    checks.push(Check::new(
        "convolution flow residual",
        flow.residual(ctx.t, ctx.instance.defaults.quadrature_steps)?,
        ctx.bound(COALG_RESIDUAL_BOUND),
    ));
    Ok(checks)
}
