//! Step-function test data over the noise space C^d.
//!
//! A step function is piecewise constant, right-continuous and
//! compactly supported: value j holds on [t_{j-1}, t_j), and the
//! function vanishes from the last breakpoint on. All pairing and grid
//! operations are exact finite sums over merged plateau intervals, so
//! the engines downstream never see quadrature error at this layer.
//!
//! Breakpoints closer than [`MERGE_EPS`] are treated as equal and
//! merged, which keeps interval grids free of zero-width cells.

use crate::error::Error;
use crate::linalg::{C64, CVec};
use crate::Result;

/// Breakpoints closer than this are considered equal.
pub const MERGE_EPS: f64 = 1e-12;

/// The noise dimension space C^d together with its unit extension.
///
/// The extended space adjoins a zeroth (time) direction: its dimension
/// is d + 1 and the hat map sends c to (1, c).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseDims {
    pub d: usize,
}

impl NoiseDims {
    pub fn new(d: usize) -> Self {
        NoiseDims { d }
    }

    /// Dimension of the extended space.
    #[inline]
    pub fn dhat(&self) -> usize {
        self.d + 1
    }

    /// Hat map: c in C^d goes to (1, c) in C^{d+1}.
    pub fn hat(&self, c: &CVec) -> CVec {
        assert_eq!(c.len(), self.d, "hat map needs a C^d argument");
        let mut out = CVec::zeros(self.d + 1);
        out[0] = C64::new(1.0, 0.0);
        for i in 0..self.d {
            out[i + 1] = c[i];
        }
        out
    }

    /// Basis vector f_mu of the extended space (f_0 is the time
    /// direction, f_i = (0, e_i) for i >= 1).
    pub fn basis(&self, mu: usize) -> CVec {
        assert!(mu <= self.d, "basis index out of range");
        let mut out = CVec::zeros(self.d + 1);
        out[mu] = C64::new(1.0, 0.0);
        out
    }
}

/// Piecewise-constant, right-continuous, compactly supported function
/// from [0, inf) to C^d.
///
/// `ends` is strictly increasing and positive; `values[j]` holds on
/// `[ends[j-1], ends[j])` with `ends[-1] = 0`. The function is zero on
/// `[ends.last(), inf)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    d: usize,
    ends: Vec<f64>,
    values: Vec<CVec>,
}

impl StepFunction {
    /// Builds a step function, validating monotonicity and dimensions.
    /// Intervals narrower than [`MERGE_EPS`] are dropped.
    ///
    /// # Errors
    /// Rejects non-finite or non-increasing breakpoints, non-finite
    /// values, and values of the wrong dimension.
    pub fn new(d: usize, ends: Vec<f64>, values: Vec<CVec>) -> Result<Self> {
        if ends.len() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "step function: one value per interval".into(),
                expected: ends.len(),
                found: values.len(),
            });
        }
        let mut clean_ends: Vec<f64> = Vec::with_capacity(ends.len());
        let mut clean_values: Vec<CVec> = Vec::with_capacity(values.len());
        let mut prev = 0.0f64;
        for (j, (&e, v)) in ends.iter().zip(values.into_iter()).enumerate() {
            if !e.is_finite() || e <= 0.0 {
                return Err(Error::BadBreakpoints { index: j, value: e });
            }
            if e < prev - MERGE_EPS {
                return Err(Error::BadBreakpoints { index: j, value: e });
            }
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    context: format!("step function value {j}"),
                    expected: d,
                    found: v.len(),
                });
            }
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("step function value {j}"),
                });
            }
            if e - prev <= MERGE_EPS {
                // zero-width interval: drop it
                continue;
            }
            clean_ends.push(e);
            clean_values.push(v);
            prev = e;
        }
        Ok(StepFunction {
            d,
            ends: clean_ends,
            values: clean_values,
        })
    }

    /// The zero function.
    pub fn zero(d: usize) -> Self {
        StepFunction {
            d,
            ends: Vec::new(),
            values: Vec::new(),
        }
    }

    /// A single plateau: `value` on [0, t_end), zero afterwards.
    pub fn constant(value: CVec, t_end: f64) -> Result<Self> {
        let d = value.len();
        StepFunction::new(d, vec![t_end], vec![value])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.ends
    }

    pub fn values(&self) -> &[CVec] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.iter().all(|z| z.norm() == 0.0))
    }

    /// End of the support (0 for the zero function).
    pub fn support_end(&self) -> f64 {
        self.ends.last().copied().unwrap_or(0.0)
    }

    /// Value at time t (zero outside the support).
    pub fn value_at(&self, t: f64) -> CVec {
        if t < 0.0 {
            return CVec::zeros(self.d);
        }
        let idx = self.ends.partition_point(|&e| e <= t);
        if idx < self.ends.len() {
            self.values[idx].clone()
        } else {
            CVec::zeros(self.d)
        }
    }

    /// Restriction to [0, t): agrees with the function there, zero on
    /// [t, inf).
    pub fn restrict(&self, t: f64) -> Self {
        assert!(t >= 0.0, "restriction time must be nonnegative");
        if t <= MERGE_EPS {
            return StepFunction::zero(self.d);
        }
        if t >= self.support_end() - MERGE_EPS {
            return self.clone();
        }
        let mut ends = Vec::new();
        let mut values = Vec::new();
        for (j, &e) in self.ends.iter().enumerate() {
            if e <= t - MERGE_EPS {
                ends.push(e);
                values.push(self.values[j].clone());
            } else {
                ends.push(t);
                values.push(self.values[j].clone());
                break;
            }
        }
        StepFunction {
            d: self.d,
            ends,
            values,
        }
    }

    /// Restriction to [t, inf): zero before t, the function afterwards.
    pub fn restrict_from(&self, t: f64) -> Self {
        assert!(t >= 0.0, "restriction time must be nonnegative");
        if t <= MERGE_EPS {
            return self.clone();
        }
        if t >= self.support_end() - MERGE_EPS {
            return StepFunction::zero(self.d);
        }
        let j0 = self.ends.partition_point(|&e| e <= t + MERGE_EPS);
        let mut ends = vec![t];
        let mut values = vec![CVec::zeros(self.d)];
        ends.extend_from_slice(&self.ends[j0..]);
        values.extend(self.values[j0..].iter().cloned());
        StepFunction {
            d: self.d,
            ends,
            values,
        }
    }

    /// Left shift: s maps to f(s + r). The support shrinks by r.
    pub fn shift_back(&self, r: f64) -> Self {
        assert!(r >= 0.0, "shift must be nonnegative");
        if r <= MERGE_EPS {
            return self.clone();
        }
        if r >= self.support_end() - MERGE_EPS {
            return StepFunction::zero(self.d);
        }
        let j0 = self.ends.partition_point(|&e| e <= r + MERGE_EPS);
        let mut ends = Vec::with_capacity(self.ends.len() - j0);
        let mut values = Vec::with_capacity(self.ends.len() - j0);
        for j in j0..self.ends.len() {
            ends.push(self.ends[j] - r);
            values.push(self.values[j].clone());
        }
        StepFunction {
            d: self.d,
            ends,
            values,
        }
    }

    /// Returns the same function with redundant breakpoints inserted at
    /// the given interior times (each splits a plateau in two).
    pub fn with_extra_breakpoints(&self, points: &[f64]) -> Self {
        let mut out = self.clone();
        for &p in points {
            if p <= MERGE_EPS || p >= out.support_end() - MERGE_EPS {
                continue;
            }
            if out.ends.iter().any(|&e| (e - p).abs() <= MERGE_EPS) {
                continue;
            }
            let idx = out.ends.partition_point(|&e| e <= p);
            out.ends.insert(idx, p);
            let dup = out.values[idx].clone();
            out.values.insert(idx, dup);
        }
        out
    }

    /// Exact L2 pairing over [0, inf): the integral of <f(s), g(s)> ds,
    /// conjugate-linear in `self`.
    pub fn l2_inner(&self, g: &StepFunction) -> C64 {
        assert_eq!(self.d, g.d, "pairing needs matching noise dimensions");
        let cutoff = self.support_end().min(g.support_end());
        if cutoff <= MERGE_EPS {
            return C64::new(0.0, 0.0);
        }
        let grid = merged_grid(&[self, g], cutoff);
        let mut acc = C64::new(0.0, 0.0);
        for w in grid.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let len = w[1] - w[0];
            acc += self.value_at(mid).dotc(&g.value_at(mid)) * C64::new(len, 0.0);
        }
        acc
    }

    /// Squared L2 norm of the function.
    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_inner(self).re
    }
}

/// Merged plateau grid of a family of step functions on [0, t]: the
/// returned times 0 = s_0 < ... < s_M = t include every interior
/// breakpoint of every input, deduplicated at [`MERGE_EPS`], so each
/// input is constant on each cell [s_{j-1}, s_j).
pub fn merged_grid(fns: &[&StepFunction], t: f64) -> Vec<f64> {
    assert!(t > 0.0, "grid horizon must be positive");
    let mut pts: Vec<f64> = fns
        .iter()
        .flat_map(|f| f.ends.iter().copied())
        .filter(|&e| e > MERGE_EPS && e < t - MERGE_EPS)
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut grid = vec![0.0];
    for p in pts {
        if p - grid.last().unwrap() > MERGE_EPS {
            grid.push(p);
        }
    }
    grid.push(t);
    grid
}

/// Coefficients of the norm-growth constant used by the fundamental
/// estimate and the Hoelder bound: C(g, t)^2 = a t + b |g|^2 with |g|
/// the L2 norm of the restriction to [0, t).
///
/// The default (a, b) = (2, 2) is deliberately generous; the constant
/// only enters reported bounds, never computed values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeConstant {
    pub time_coeff: f64,
    pub l2_coeff: f64,
}

impl Default for FeConstant {
    fn default() -> Self {
        FeConstant {
            time_coeff: 2.0,
            l2_coeff: 2.0,
        }
    }
}

impl FeConstant {
    pub fn eval_sq(&self, g: &StepFunction, t: f64) -> f64 {
        self.time_coeff * t + self.l2_coeff * g.restrict(t).l2_norm_sq()
    }

    pub fn eval(&self, g: &StepFunction, t: f64) -> f64 {
        self.eval_sq(g, t).sqrt()
    }
}

/// A pair (g', g) of step functions over the same noise space; the
/// left slot is the one that gets conjugated in pairings.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpPair {
    pub left: StepFunction,
    pub right: StepFunction,
}

impl ExpPair {
    pub fn new(left: StepFunction, right: StepFunction) -> Result<Self> {
        if left.dim() != right.dim() {
            return Err(Error::DimensionMismatch {
                context: "exponential pair".into(),
                expected: left.dim(),
                found: right.dim(),
            });
        }
        Ok(ExpPair { left, right })
    }

    pub fn dim(&self) -> usize {
        self.left.dim()
    }

    /// Pairing of the restrictions to [0, t).
    pub fn inner_to(&self, t: f64) -> C64 {
        self.left.restrict(t).l2_inner(&self.right.restrict(t))
    }
}
