//! Discrete-grid engine: the time axis is cut into equal slots, each
//! carrying one copy of the hatted one-step noise space, and the flow
//! is the explicit Euler chain built from per-slot increment matrices.
//!
//! Two representations are kept in sync.  The factored solver never
//! materialises the exponentially large chain vector: it tracks slot
//! transfer matrices and Gram matrices on the finite-dimensional
//! domain, which is exact because every quantity of interest (matrix
//! elements, state overlaps, energy sums) is a contraction of the
//! chain against product vectors.  The dense solver tracks the full
//! chain vector per domain basis element and is capped at small grids;
//! it exists to cross-validate the factored one against the literal
//! update rule.

use crate::coefficient::{Coefficient, ElementTable, InitialMap};
use crate::error::Error;
use crate::linalg::{c, C64, CMat, CVec};
use crate::noise::{FeConstant, NoiseDims, StepFunction, MERGE_EPS};
use crate::Result;

/// Hard cap on the dense chain dimension `(d+1)^slots`.
pub const DENSE_STATE_CAP: u128 = 1 << 14;

/// Absolute tolerance for matching plateau boundaries and query times
/// to slot boundaries.
const ALIGN_TOL: f64 = 1e-9;

/// Equispaced slot grid on `[0, horizon]`.  Slot `s` (1-based) covers
/// `[(s-1)*delta, s*delta)`; slot 1 is earliest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyGrid {
    horizon: f64,
    slots: usize,
}

impl ToyGrid {
    /// A grid needs a positive horizon unless it is the empty grid
    /// with no slots at horizon zero.
    pub fn new(horizon: f64, slots: usize) -> Result<Self> {
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(Error::NonFinite {
                context: "grid horizon".into(),
            });
        }
        if slots == 0 && horizon > MERGE_EPS {
            return Err(Error::GridMisaligned(
                "a positive horizon needs at least one slot".into(),
            ));
        }
        Ok(ToyGrid { horizon, slots })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Slot width; zero for the empty grid.
    pub fn delta(&self) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            self.horizon / self.slots as f64
        }
    }

    /// Left endpoint of slot `s` (1-based).
    pub fn slot_start(&self, s: usize) -> f64 {
        (s - 1) as f64 * self.delta()
    }

    /// Every interior plateau boundary of `f` must sit on a slot
    /// boundary, otherwise the step function is not constant per slot
    /// and the Euler chain is ill-defined.
    pub fn check_aligned(&self, f: &StepFunction) -> Result<()> {
        let delta = self.delta();
        for &e in f.breakpoints() {
            if e <= ALIGN_TOL || e >= self.horizon - ALIGN_TOL {
                continue;
            }
            let nearest = (e / delta).round() * delta;
            if (e - nearest).abs() > ALIGN_TOL {
                return Err(Error::GridMisaligned(format!(
                    "plateau boundary at {e} is off the slot grid with width {delta}"
                )));
            }
        }
        Ok(())
    }

    /// Values of `f` on each slot.  Sampled just inside the slot so a
    /// boundary that equals a slot start up to rounding still yields
    /// the plateau that rules the slot interior.
    pub fn slot_values(&self, f: &StepFunction) -> Result<Vec<CVec>> {
        self.check_aligned(f)?;
        let delta = self.delta();
        Ok((1..=self.slots)
            .map(|s| f.value_at(self.slot_start(s) + 1e-3 * delta))
            .collect())
    }

    /// Index of the slot boundary nearest to `t`, failing when `t` is
    /// not a boundary.
    pub fn boundary_index(&self, t: f64) -> Result<usize> {
        if self.slots == 0 {
            if t.abs() <= ALIGN_TOL {
                return Ok(0);
            }
            return Err(Error::GridMisaligned(format!("time {t} on an empty grid")));
        }
        let delta = self.delta();
        let j = (t / delta).round();
        if j < 0.0 || j > self.slots as f64 || (t - j * delta).abs() > ALIGN_TOL {
            return Err(Error::GridMisaligned(format!(
                "time {t} is not a slot boundary of the grid with width {delta}"
            )));
        }
        Ok(j as usize)
    }
}

/// One-slot increment matrix: the rank-one jump `|f_mu><f_nu|` with
/// the scaling that gives the time leg a full slot width and each
/// noise leg a square root of it.
pub fn increment_matrix(mu: usize, nu: usize, delta: f64, d: usize) -> CMat {
    let dhat = d + 1;
    assert!(mu < dhat && nu < dhat, "hatted index out of range");
    let scale = match (mu, nu) {
        (0, 0) => delta,
        (0, _) | (_, 0) => delta.sqrt(),
        _ => 1.0,
    };
    let mut out = CMat::zeros(dhat, dhat);
    out[(mu, nu)] = c(scale, 0.0);
    out
}

/// Per-slot update family on the domain: the chain component along
/// `f_mu` of the post-slot state is `B[mu]` applied before the
/// pre-slot state.
fn slot_family(phi: &Coefficient, g_slot: &CVec, delta: f64) -> Vec<CMat> {
    let m = phi.m();
    let d = phi.d();
    let ghat = NoiseDims::new(d).hat(g_slot);
    let mut out = Vec::with_capacity(d + 1);
    let mut b0 = CMat::identity(m, m);
    b0 += phi
        .row_contraction(0, &ghat)
        .expect("validated dimensions")
        .map(|z| z * c(delta, 0.0));
    out.push(b0);
    let root = delta.sqrt();
    for i in 1..=d {
        let mut bi = CMat::identity(m, m).map(|z| z * g_slot[i - 1]);
        bi += phi.row_contraction(i, &ghat).expect("validated dimensions");
        out.push(bi.map(|z| z * c(root, 0.0)));
    }
    out
}

/// Unnormalised slot transfer against a left plateau `gp`: pairing the
/// slot leg of the updated chain with the slot factor of the left
/// exponential collapses the slot to this domain matrix.
fn slot_transfer(phi: &Coefficient, gp_slot: &CVec, g_slot: &CVec, delta: f64) -> (C64, CMat) {
    let m = phi.m();
    let overlap = c(1.0, 0.0) + c(delta, 0.0) * gp_slot.dotc(g_slot);
    let psi = phi.psi(gp_slot, g_slot).expect("validated dimensions");
    let mut transfer = CMat::identity(m, m).map(|z| z * overlap);
    transfer += psi.map(|z| z * c(delta, 0.0));
    (overlap, transfer)
}

/// Per-step energy report of the discrete fundamental estimate.
#[derive(Clone, Copy, Debug)]
pub struct FeReport {
    /// Largest ratio of a squared increment norm to the weighted
    /// integrand energy sum, over all steps and domain basis vectors.
    pub max_ratio: f64,
    /// Step index attaining the maximum (0 when no step qualified).
    pub argmax_step: usize,
}

/// Factored Euler solution: per-slot transfers and Gram matrices in
/// place of the exponential chain vector.
#[derive(Clone, Debug)]
pub struct FactoredSolution {
    grid: ToyGrid,
    phi: Coefficient,
    kappa: InitialMap,
    v: CVec,
    g: StepFunction,
    g_values: Vec<CVec>,
    /// Squared norm of the slot exponential factor, `1 + delta*|g_s|^2`.
    slot_norm_sq: Vec<f64>,
    /// Unnormalised slot transfer of the chain against the driving
    /// function itself.
    self_transfer: Vec<CMat>,
    /// Gram matrices of the evolved family per boundary, length
    /// `slots + 1`; entry `[a, b]` is the overlap of the states driven
    /// by domain basis vectors `a` and `b`.
    gram: Vec<CMat>,
    /// Integrand Gram per step, measuring the one-leg update energy.
    integrand: Vec<CMat>,
}

/// Runs the explicit Euler chain for initial vector `v` and driving
/// exponential argument `g`, keeping the factored representation.
/// `g` must be constant on every slot.
pub fn euler_solve(
    phi: &Coefficient,
    kappa: &InitialMap,
    v: &CVec,
    g: &StepFunction,
    grid: ToyGrid,
) -> Result<FactoredSolution> {
    if kappa.m() != phi.m() {
        return Err(Error::DimensionMismatch {
            context: "initial map domain".into(),
            expected: phi.m(),
            found: kappa.m(),
        });
    }
    if v.len() != kappa.target_cols() {
        return Err(Error::DimensionMismatch {
            context: "initial vector".into(),
            expected: kappa.target_cols(),
            found: v.len(),
        });
    }
    if g.dim() != phi.d() {
        return Err(Error::DimensionMismatch {
            context: "driving function noise dimension".into(),
            expected: phi.d(),
            found: g.dim(),
        });
    }
    let g_values = grid.slot_values(g)?;
    let m = phi.m();
    let delta = grid.delta();

    let images: Vec<CVec> = (0..m).map(|a| kappa.matrix(a) * v).collect();
    let mut w = CMat::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            w[(a, b)] = images[a].dotc(&images[b]);
        }
    }

    let mut gram = Vec::with_capacity(grid.slots() + 1);
    gram.push(w);
    let mut slot_norm_sq = Vec::with_capacity(grid.slots());
    let mut self_transfer = Vec::with_capacity(grid.slots());
    let mut integrand = Vec::with_capacity(grid.slots());

    for g_slot in &g_values {
        let family = slot_family(phi, g_slot, delta);
        let prev = gram.last().expect("gram list starts non-empty");
        let mut next = CMat::zeros(m, m);
        for b_mu in &family {
            next += b_mu.adjoint() * prev * b_mu;
        }
        let ghat = NoiseDims::new(phi.d()).hat(g_slot);
        let mut s_l = CMat::zeros(m, m);
        for mu in 0..=phi.d() {
            let theta = phi
                .row_contraction(mu, &ghat)
                .expect("validated dimensions");
            s_l += theta.adjoint() * prev * &theta;
        }
        let (overlap, transfer) = slot_transfer(phi, g_slot, g_slot, delta);
        slot_norm_sq.push(overlap.re);
        self_transfer.push(transfer);
        gram.push(next);
        integrand.push(s_l);
    }

    Ok(FactoredSolution {
        grid,
        phi: phi.clone(),
        kappa: kappa.clone(),
        v: v.clone(),
        g: g.clone(),
        g_values,
        slot_norm_sq,
        self_transfer,
        gram,
        integrand,
    })
}

impl FactoredSolution {
    pub fn grid(&self) -> ToyGrid {
        self.grid
    }

    /// Product of slot factor norms over slots strictly after `j`:
    /// the squared norm of the untouched tail of the exponential.
    pub fn tail_norm_sq(&self, j: usize) -> f64 {
        self.slot_norm_sq[j..].iter().product()
    }

    /// Full-space Gram of the evolved family at boundary `j`.
    pub fn state_gram(&self, j: usize) -> CMat {
        self.gram[j].map(|z| z * c(self.tail_norm_sq(j), 0.0))
    }

    /// Full-space overlap matrix between boundaries `j_late >= j_early`;
    /// entry `[a, b]` pairs the late state of `a` with the early state
    /// of `b`.
    pub fn cross_gram(&self, j_late: usize, j_early: usize) -> CMat {
        assert!(j_early <= j_late && j_late <= self.grid.slots());
        let m = self.phi.m();
        let mut segment = CMat::identity(m, m);
        for s in j_early..j_late {
            segment *= &self.self_transfer[s];
        }
        let x = segment.adjoint() * &self.gram[j_early];
        x.map(|z| z * c(self.tail_norm_sq(j_late), 0.0))
    }

    /// Gram of the state differences between two boundaries.
    pub fn difference_gram(&self, j_late: usize, j_early: usize) -> CMat {
        let x = self.cross_gram(j_late, j_early);
        self.state_gram(j_late) + self.state_gram(j_early) - &x - x.adjoint()
    }

    /// Normalised discrete matrix elements against a left exponential
    /// argument `gp`, one target matrix per domain basis vector.  The
    /// result does not depend on the initial vector used to drive the
    /// chain.
    pub fn element_table(&self, gp: &StepFunction) -> Result<ElementTable> {
        if gp.dim() != self.phi.d() {
            return Err(Error::DimensionMismatch {
                context: "left exponential argument noise dimension".into(),
                expected: self.phi.d(),
                found: gp.dim(),
            });
        }
        let gp_values = self.grid.slot_values(gp)?;
        let m = self.phi.m();
        let delta = self.grid.delta();
        let mut q = CMat::identity(m, m);
        for (gp_slot, g_slot) in gp_values.iter().zip(&self.g_values) {
            let (overlap, transfer) = slot_transfer(&self.phi, gp_slot, g_slot, delta);
            if overlap.norm() < 1e-9 {
                return Err(Error::NonFinite {
                    context: "degenerate slot normalisation".into(),
                });
            }
            q *= transfer.map(|z| z / overlap);
        }
        Ok(ElementTable {
            t: self.grid.horizon(),
            entries: self.kappa.composed_with(&q)?.matrices().to_vec(),
        })
    }

    /// Normalised increment measure between two boundary times: the
    /// largest state difference over domain basis vectors, divided by
    /// the norm of the undisturbed initial state.
    pub fn hoelder_measure(&self, r: f64, t: f64) -> Result<f64> {
        let j_early = self.grid.boundary_index(r)?;
        let j_late = self.grid.boundary_index(t)?;
        if j_late < j_early {
            return Err(Error::GridMisaligned(
                "increment interval is reversed".into(),
            ));
        }
        let diff = self.difference_gram(j_late, j_early);
        let base_sq = self.v.norm_squared() * self.tail_norm_sq(0);
        let mut worst = 0.0f64;
        for i in 0..self.phi.m() {
            worst = worst.max(diff[(i, i)].re.max(0.0));
        }
        Ok((worst / base_sq).sqrt())
    }

    /// Compares every squared increment-from-start norm against the
    /// weighted discrete energy of the one-leg update integrand, per
    /// domain basis vector.  Ratios at or below one mean the discrete
    /// flow obeys the fundamental estimate with the supplied constant.
    pub fn fe_report(&self, fe: &FeConstant) -> FeReport {
        let horizon = self.grid.horizon();
        let delta = self.grid.delta();
        let growth_sq = fe.eval_sq(&self.g, horizon);
        let m = self.phi.m();
        let scale = self.gram[0].iter().map(|z| z.norm()).fold(1.0f64, f64::max);
        let mut max_ratio = 0.0f64;
        let mut argmax = 0usize;
        let mut energy = vec![0.0f64; m];
        for j in 1..=self.grid.slots() {
            let weight = delta * self.tail_norm_sq(j);
            for (i, acc) in energy.iter_mut().enumerate() {
                *acc += weight * self.integrand[j - 1][(i, i)].re;
            }
            let diff = self.difference_gram(j, 0);
            for (i, acc) in energy.iter().enumerate() {
                let lhs = diff[(i, i)].re;
                let rhs = growth_sq * acc;
                // Product reorderings leave rounding residue in both
                // grams, so an energy-free step only has to pin the
                // increment down to that floor.
                if rhs <= 1e-24 * scale {
                    if lhs > 1e-10 * scale {
                        max_ratio = f64::INFINITY;
                        argmax = j;
                    }
                    continue;
                }
                let ratio = lhs / rhs;
                if ratio > max_ratio {
                    max_ratio = ratio;
                    argmax = j;
                }
            }
        }
        FeReport {
            max_ratio,
            argmax_step: argmax,
        }
    }
}

/// Dense Euler solution: the literal chain vectors per domain basis
/// vector at every boundary.
#[derive(Clone, Debug)]
pub struct DenseSolution {
    grid: ToyGrid,
    dhat: usize,
    g_values: Vec<CVec>,
    /// `history[j][i]` is the chain vector at boundary `j` driven by
    /// domain basis vector `i`; the codomain row leg is slowest, slot
    /// 1 next, the last slot fastest.
    history: Vec<Vec<CVec>>,
}

/// Applies a one-slot operator to the given slot leg (1-based) of a
/// chain vector laid out with earlier slots on larger strides.
fn apply_slot_operator(state: &CVec, op: &CMat, slot: usize, dhat: usize, slots: usize) -> CVec {
    let stride = dhat.pow((slots - slot) as u32);
    let block = stride * dhat;
    let mut out = CVec::zeros(state.len());
    for base in (0..state.len()).step_by(block) {
        for off in 0..stride {
            for mu in 0..dhat {
                let mut acc = c(0.0, 0.0);
                for nu in 0..dhat {
                    acc += op[(mu, nu)] * state[base + nu * stride + off];
                }
                out[base + mu * stride + off] = acc;
            }
        }
    }
    out
}

/// Pairs one slot leg (1-based) of a chain vector with a fixed slot
/// vector, conjugating the slot vector.
fn contract_slot(state: &CVec, w: &CVec, slot: usize, dhat: usize, slots: usize) -> CVec {
    let stride = dhat.pow((slots - slot) as u32);
    let block = stride * dhat;
    let mut out = CVec::zeros(state.len() / dhat);
    let mut written = 0usize;
    for base in (0..state.len()).step_by(block) {
        for off in 0..stride {
            let mut acc = c(0.0, 0.0);
            for mu in 0..dhat {
                acc += w[mu].conj() * state[base + mu * stride + off];
            }
            out[written] = acc;
            written += 1;
        }
    }
    out
}

/// Chain factor of one slot of the discrete exponential vector.
fn slot_exponential(g_slot: &CVec, delta: f64) -> CVec {
    let d = g_slot.len();
    let mut e = CVec::zeros(d + 1);
    e[0] = c(1.0, 0.0);
    for i in 0..d {
        e[i + 1] = c(delta.sqrt(), 0.0) * g_slot[i];
    }
    e
}

/// Dense discrete exponential vector for plateau values `g_values`.
fn dense_exponential(g_values: &[CVec], delta: f64, dhat: usize) -> CVec {
    let mut out = CVec::from_element(1, c(1.0, 0.0));
    for g_slot in g_values {
        let e = slot_exponential(g_slot, delta);
        let mut next = CVec::zeros(out.len() * dhat);
        for i in 0..out.len() {
            for mu in 0..dhat {
                next[i * dhat + mu] = out[i] * e[mu];
            }
        }
        out = next;
    }
    out
}

/// Runs the literal Euler update on explicit chain vectors.  Fails
/// with a cap error when `(d+1)^slots` exceeds [`DENSE_STATE_CAP`].
pub fn dense_euler_solve(
    phi: &Coefficient,
    kappa: &InitialMap,
    v: &CVec,
    g: &StepFunction,
    grid: ToyGrid,
) -> Result<DenseSolution> {
    let dhat = phi.d() + 1;
    let mut chain_dim: u128 = 1;
    for _ in 0..grid.slots() {
        chain_dim = chain_dim.saturating_mul(dhat as u128);
        if chain_dim > DENSE_STATE_CAP {
            return Err(Error::DenseStateTooLarge {
                requested: chain_dim,
                cap: DENSE_STATE_CAP,
            });
        }
    }
    if kappa.m() != phi.m() || v.len() != kappa.target_cols() || g.dim() != phi.d() {
        return Err(Error::DimensionMismatch {
            context: "dense chain inputs".into(),
            expected: phi.m(),
            found: kappa.m(),
        });
    }
    let g_values = grid.slot_values(g)?;
    let delta = grid.delta();
    let m = phi.m();
    let slots = grid.slots();
    let chain = chain_dim as usize;
    let epsilon = dense_exponential(&g_values, delta, dhat);

    let mut current: Vec<CVec> = (0..m)
        .map(|i| {
            let u = kappa.matrix(i) * v;
            let mut state = CVec::zeros(kappa.target_rows() * chain);
            for (r, ur) in u.iter().enumerate() {
                for (f, ef) in epsilon.iter().enumerate() {
                    state[r * chain + f] = ur * ef;
                }
            }
            state
        })
        .collect();
    let mut history = vec![current.clone()];

    for slot in 1..=slots {
        let mut next = current.clone();
        for mu in 0..dhat {
            for nu in 0..dhat {
                let theta = phi.theta(mu, nu);
                let inc = increment_matrix(mu, nu, delta, phi.d());
                for (i, slot_target) in next.iter_mut().enumerate() {
                    let mut combo = CVec::zeros(current[0].len());
                    for l in 0..m {
                        let wgt = theta[(l, i)];
                        if wgt.norm() == 0.0 {
                            continue;
                        }
                        combo += current[l].map(|z| z * wgt);
                    }
                    // The slot operator acts inside each codomain row
                    // block, after the row leg on the stride order.
                    let rows = combo.len() / chain;
                    let mut moved = CVec::zeros(combo.len());
                    for r in 0..rows {
                        let seg = combo.rows(r * chain, chain).into_owned();
                        let seg = apply_slot_operator(&seg, &inc, slot, dhat, slots);
                        moved.rows_mut(r * chain, chain).copy_from(&seg);
                    }
                    *slot_target += moved;
                }
            }
        }
        current = next;
        history.push(current.clone());
    }

    Ok(DenseSolution {
        grid,
        dhat,
        g_values,
        history,
    })
}

impl DenseSolution {
    pub fn grid(&self) -> ToyGrid {
        self.grid
    }

    /// Chain vector at boundary `j` driven by domain basis vector `i`.
    pub fn state(&self, j: usize, i: usize) -> &CVec {
        &self.history[j][i]
    }

    /// Normalised scalar matrix element of domain basis vector `i`
    /// between `vp (x) eps(gp)` and the final state.
    pub fn element_scalar(&self, vp: &CVec, gp: &StepFunction, i: usize) -> Result<C64> {
        let gp_values = self.grid.slot_values(gp)?;
        let delta = self.grid.delta();
        let chain = self.dhat.pow(self.grid.slots() as u32);
        let eps = dense_exponential(&gp_values, delta, self.dhat);
        let state = &self.history[self.grid.slots()][i];
        let rows = state.len() / chain;
        if vp.len() != rows {
            return Err(Error::DimensionMismatch {
                context: "left vector".into(),
                expected: rows,
                found: vp.len(),
            });
        }
        let mut acc = c(0.0, 0.0);
        for r in 0..rows {
            let seg = state.rows(r * chain, chain).into_owned();
            acc += vp[r].conj() * eps.dotc(&seg);
        }
        let mut norm = c(1.0, 0.0);
        for (gp_slot, g_slot) in gp_values.iter().zip(&self.g_values) {
            norm *= c(1.0, 0.0) + c(delta, 0.0) * gp_slot.dotc(g_slot);
        }
        Ok(acc / norm)
    }

    /// Largest pairing of any boundary state against a probe vector
    /// orthogonal to the undisturbed factor of a strictly later slot.
    /// Zero means the flow never touches slots ahead of its clock.
    pub fn adaptedness_defect(&self) -> f64 {
        let slots = self.grid.slots();
        let delta = self.grid.delta();
        let chain = self.dhat.pow(slots as u32);
        let mut worst = 0.0f64;
        for j in 0..slots {
            for s in (j + 1)..=slots {
                let e = slot_exponential(&self.g_values[s - 1], delta);
                for probe_leg in 1..self.dhat {
                    // Orthogonal to e by construction: swap the time
                    // component against one noise component.  The
                    // pairing conjugates w, so w carries conjugates.
                    let mut w = CVec::zeros(self.dhat);
                    w[0] = -e[probe_leg].conj();
                    w[probe_leg] = e[0].conj();
                    for state in &self.history[j] {
                        let rows = state.len() / chain;
                        for r in 0..rows {
                            let seg = state.rows(r * chain, chain).into_owned();
                            let reduced = contract_slot(&seg, &w, s, self.dhat, slots);
                            worst = worst.max(reduced.norm());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// One row of a grid-refinement study against a reference element
/// table.
#[derive(Clone, Copy, Debug)]
pub struct ConvergenceRow {
    pub slots: usize,
    pub error: f64,
    /// Error of the previous (coarser) row divided by this row's
    /// error; `None` on the first row.
    pub ratio: Option<f64>,
}

/// Discrete elements against the flow reference for a list of slot
/// counts.  First-order stepping makes the ratio approach two under
/// slot doubling.
pub fn convergence_table(
    phi: &Coefficient,
    kappa: &InitialMap,
    pair: &crate::noise::ExpPair,
    t: f64,
    slot_counts: &[usize],
) -> Result<Vec<ConvergenceRow>> {
    let reference = crate::semigroup::matrix_element(phi, kappa, pair, t)?;
    let v = CVec::from_element(kappa.target_cols(), c(1.0, 0.0));
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(slot_counts.len());
    for &slots in slot_counts {
        let grid = ToyGrid::new(t, slots)?;
        let solution = euler_solve(phi, kappa, &v, &pair.right, grid)?;
        let table = solution.element_table(&pair.left)?;
        let error = table.diff_frobenius(&reference);
        let ratio = rows.last().map(|prev: &ConvergenceRow| prev.error / error);
        rows.push(ConvergenceRow {
            slots,
            error,
            ratio,
        });
    }
    Ok(rows)
}
