//! Coefficient data for the equation: the initial space V with its
//! optional conjugation, the coefficient tensor theta, initial maps,
//! element tables, and the composition norm bound.
//!
//! A coefficient is stored as the (d+1) x (d+1) array of its basis
//! slices theta[mu][nu], each an m x m matrix on V. General slices are
//! sesquilinear contractions of that tensor, so sesquilinearity holds
//! by construction.
//!
//! Stacking conventions used throughout the crate: a map V -> V (x) C^D
//! is stored as an (m D) x m matrix with row index j * D + mu (initial
//! space index slowest, noise index fastest); lifted spaces V (x) M_n
//! use basis index i * n^2 + r * n + s; iterated noise legs order
//! earliest time first after any lifting indices.

use crate::error::Error;
use crate::linalg::{spectral_norm, stack_columns, C64, CMat, CVec};
use crate::noise::NoiseDims;
use crate::Result;

/// Acceptable deviation of J * conj(J) from the identity.
const INVOLUTION_TOL: f64 = 1e-10;

/// The source space V of the initial condition, with an optional
/// antilinear conjugation given in coordinates by x -> J * conj(x).
#[derive(Clone, Debug)]
pub struct InitialSpace {
    m: usize,
    involution: Option<CMat>,
}

impl InitialSpace {
    pub fn new(m: usize) -> Self {
        InitialSpace {
            m,
            involution: None,
        }
    }

    /// Attaches a conjugation matrix. J must satisfy J * conj(J) = id
    /// (so conjugating twice is the identity).
    ///
    /// # Errors
    /// Rejects J of the wrong shape or with involution defect above
    /// 1e-10 in Frobenius norm.
    pub fn with_involution(m: usize, j: CMat) -> Result<Self> {
        if j.nrows() != m || j.ncols() != m {
            return Err(Error::DimensionMismatch {
                context: "involution matrix".into(),
                expected: m,
                found: j.nrows().max(j.ncols()),
            });
        }
        let defect = (&j * j.conjugate() - CMat::identity(m, m)).norm();
        if defect > INVOLUTION_TOL {
            return Err(Error::InvalidInvolution { defect });
        }
        Ok(InitialSpace {
            m,
            involution: Some(j),
        })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn involution(&self) -> Option<&CMat> {
        self.involution.as_ref()
    }

    pub fn require_involution(&self) -> Result<&CMat> {
        self.involution.as_ref().ok_or(Error::MissingInvolution)
    }

    /// Coordinates of the conjugate vector: J * conj(x).
    pub fn conjugate_coords(&self, x: &CVec) -> Result<CVec> {
        let j = self.require_involution()?;
        Ok(j * x.conjugate())
    }
}

/// The coefficient of the equation, stored as its basis slices:
/// theta[mu][nu] is the m x m matrix of the slice at (f_mu, f_nu).
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficient {
    m: usize,
    dims: NoiseDims,
    theta: Vec<Vec<CMat>>,
}

impl Coefficient {
    /// Builds a coefficient from its (d+1) x (d+1) slice array.
    pub fn new(m: usize, d: usize, theta: Vec<Vec<CMat>>) -> Result<Self> {
        let dhat = d + 1;
        if theta.len() != dhat {
            return Err(Error::DimensionMismatch {
                context: "coefficient rows".into(),
                expected: dhat,
                found: theta.len(),
            });
        }
        for (mu, row) in theta.iter().enumerate() {
            if row.len() != dhat {
                return Err(Error::DimensionMismatch {
                    context: format!("coefficient row {mu}"),
                    expected: dhat,
                    found: row.len(),
                });
            }
            for (nu, block) in row.iter().enumerate() {
                if block.nrows() != m || block.ncols() != m {
                    return Err(Error::DimensionMismatch {
                        context: format!("coefficient block ({mu},{nu})"),
                        expected: m,
                        found: block.nrows().max(block.ncols()),
                    });
                }
                if block.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::NonFinite {
                        context: format!("coefficient block ({mu},{nu})"),
                    });
                }
            }
        }
        Ok(Coefficient {
            m,
            dims: NoiseDims::new(d),
            theta,
        })
    }

    pub fn zero(m: usize, d: usize) -> Self {
        let dhat = d + 1;
        let theta = vec![vec![CMat::zeros(m, m); dhat]; dhat];
        Coefficient {
            m,
            dims: NoiseDims::new(d),
            theta,
        }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.dims.d
    }

    #[inline]
    pub fn dims(&self) -> NoiseDims {
        self.dims
    }

    pub fn theta(&self, mu: usize, nu: usize) -> &CMat {
        &self.theta[mu][nu]
    }

    /// Slice at a pair of extended-space vectors: the m x m matrix
    /// sum over mu, nu of conj(zeta'_mu) zeta_nu theta[mu][nu].
    /// Antilinear in the first argument, linear in the second.
    pub fn slice(&self, zeta_p: &CVec, zeta: &CVec) -> Result<CMat> {
        let dhat = self.dims.dhat();
        if zeta_p.len() != dhat || zeta.len() != dhat {
            return Err(Error::DimensionMismatch {
                context: "slice argument".into(),
                expected: dhat,
                found: if zeta_p.len() != dhat {
                    zeta_p.len()
                } else {
                    zeta.len()
                },
            });
        }
        let mut out = CMat::zeros(self.m, self.m);
        for mu in 0..dhat {
            let wp = zeta_p[mu].conj();
            if wp == C64::new(0.0, 0.0) {
                continue;
            }
            for nu in 0..dhat {
                let w = wp * zeta[nu];
                if w != C64::new(0.0, 0.0) {
                    out += &self.theta[mu][nu] * w;
                }
            }
        }
        Ok(out)
    }

    /// Semigroup generator slice: the slice at the hatted pair
    /// ((1, c'), (1, c)).
    pub fn psi(&self, c_p: &CVec, c: &CVec) -> Result<CMat> {
        if c_p.len() != self.dims.d || c.len() != self.dims.d {
            return Err(Error::DimensionMismatch {
                context: "generator slice argument".into(),
                expected: self.dims.d,
                found: if c_p.len() != self.dims.d {
                    c_p.len()
                } else {
                    c.len()
                },
            });
        }
        self.slice(&self.dims.hat(c_p), &self.dims.hat(c))
    }

    /// Row contraction: the m x m matrix sum over nu of
    /// zeta_nu theta[mu][nu].
    pub fn row_contraction(&self, mu: usize, zeta: &CVec) -> Result<CMat> {
        let dhat = self.dims.dhat();
        if zeta.len() != dhat {
            return Err(Error::DimensionMismatch {
                context: "row contraction argument".into(),
                expected: dhat,
                found: zeta.len(),
            });
        }
        let mut out = CMat::zeros(self.m, self.m);
        for nu in 0..dhat {
            if zeta[nu] != C64::new(0.0, 0.0) {
                out += &self.theta[mu][nu] * zeta[nu];
            }
        }
        Ok(out)
    }

    /// Column of the coefficient at zeta, as the (m (d+1)) x m matrix
    /// of the map V -> V (x) C^{d+1}: row index j (d+1) + mu holds
    /// component mu of the image of basis vector j.
    pub fn column(&self, zeta: &CVec) -> Result<CMat> {
        let dhat = self.dims.dhat();
        let m = self.m;
        let mut out = CMat::zeros(m * dhat, m);
        for mu in 0..dhat {
            let block = self.row_contraction(mu, zeta)?;
            for j in 0..m {
                for k in 0..m {
                    out[(j * dhat + mu, k)] = block[(j, k)];
                }
            }
        }
        Ok(out)
    }

    /// Spectral norm of the column at zeta.
    pub fn column_norm(&self, zeta: &CVec) -> Result<f64> {
        Ok(spectral_norm(&self.column(zeta)?))
    }

    /// Conjugate coefficient with respect to the conjugation of the
    /// initial space: theta'[mu][nu] = J * conj(theta[nu][mu]) * conj(J),
    /// so that slices of the conjugate act on conjugated coordinates.
    pub fn conjugate(&self, space: &InitialSpace) -> Result<Coefficient> {
        if space.m() != self.m {
            return Err(Error::DimensionMismatch {
                context: "conjugation space".into(),
                expected: self.m,
                found: space.m(),
            });
        }
        let j = space.require_involution()?;
        let jc = j.conjugate();
        let dhat = self.dims.dhat();
        let theta = (0..dhat)
            .map(|mu| {
                (0..dhat)
                    .map(|nu| j * self.theta[nu][mu].conjugate() * &jc)
                    .collect()
            })
            .collect();
        Ok(Coefficient {
            m: self.m,
            dims: self.dims,
            theta,
        })
    }

    /// Lifting to V (x) M_n: every slice picks up a Kronecker identity
    /// factor of size n^2. Basis order of the lifted space is
    /// i n^2 + r n + s for basis vector b_i (x) E_{rs}.
    pub fn lift(&self, n: usize) -> Coefficient {
        assert!(n >= 1, "lifting order must be positive");
        if n == 1 {
            return self.clone();
        }
        let id = CMat::identity(n * n, n * n);
        let dhat = self.dims.dhat();
        let theta = (0..dhat)
            .map(|mu| {
                (0..dhat)
                    .map(|nu| self.theta[mu][nu].kronecker(&id))
                    .collect()
            })
            .collect();
        Coefficient {
            m: self.m * n * n,
            dims: self.dims,
            theta,
        }
    }

    /// The coefficient with every slice multiplied by a scalar.
    pub fn scaled(&self, z: C64) -> Coefficient {
        let theta = self
            .theta
            .iter()
            .map(|row| row.iter().map(|b| b * z).collect())
            .collect();
        Coefficient {
            m: self.m,
            dims: self.dims,
            theta,
        }
    }
}

/// The initial condition: a linear map from V into p' x p matrices,
/// stored through the images of the basis vectors of V.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialMap {
    rows: usize,
    cols: usize,
    kappa: Vec<CMat>,
}

impl InitialMap {
    pub fn new(kappa: Vec<CMat>) -> Result<Self> {
        let first = kappa.first().ok_or_else(|| Error::DimensionMismatch {
            context: "initial map needs at least one basis image".into(),
            expected: 1,
            found: 0,
        })?;
        let (rows, cols) = (first.nrows(), first.ncols());
        for (i, k) in kappa.iter().enumerate() {
            if k.nrows() != rows || k.ncols() != cols {
                return Err(Error::DimensionMismatch {
                    context: format!("initial map image {i}"),
                    expected: rows,
                    found: k.nrows(),
                });
            }
            if k.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("initial map image {i}"),
                });
            }
        }
        Ok(InitialMap { rows, cols, kappa })
    }

    /// The standard embedding of V = C^m into M_m: basis vector i goes
    /// to the diagonal matrix unit E_ii.
    pub fn diagonal_units(m: usize) -> Self {
        let kappa = (0..m)
            .map(|i| {
                let mut e = CMat::zeros(m, m);
                e[(i, i)] = C64::new(1.0, 0.0);
                e
            })
            .collect();
        InitialMap {
            rows: m,
            cols: m,
            kappa,
        }
    }

    /// Dimension of the source space V.
    #[inline]
    pub fn m(&self) -> usize {
        self.kappa.len()
    }

    #[inline]
    pub fn target_rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn target_cols(&self) -> usize {
        self.cols
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.kappa
    }

    pub fn matrix(&self, i: usize) -> &CMat {
        &self.kappa[i]
    }

    /// Image of the vector with the given coordinates.
    pub fn apply(&self, x: &CVec) -> Result<CMat> {
        if x.len() != self.kappa.len() {
            return Err(Error::DimensionMismatch {
                context: "initial map argument".into(),
                expected: self.kappa.len(),
                found: x.len(),
            });
        }
        let mut out = CMat::zeros(self.rows, self.cols);
        for (xi, k) in x.iter().zip(&self.kappa) {
            out += k * *xi;
        }
        Ok(out)
    }

    /// The map as a single (p' p) x m matrix; column i flattens the
    /// image of basis vector i.
    pub fn stacked(&self) -> CMat {
        stack_columns(&self.kappa)
    }

    /// Frobenius norm of the stacked matrix.
    pub fn frobenius_norm(&self) -> f64 {
        self.stacked().norm()
    }

    /// Spectral norm of the stacked matrix.
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.stacked())
    }

    /// Precomposition with a matrix acting on V: basis image i of the
    /// result is the image of column i of q.
    pub fn composed_with(&self, q: &CMat) -> Result<InitialMap> {
        let m = self.kappa.len();
        if q.nrows() != m {
            return Err(Error::DimensionMismatch {
                context: "initial map precomposition".into(),
                expected: m,
                found: q.nrows(),
            });
        }
        let kappa = (0..q.ncols())
            .map(|i| {
                let mut out = CMat::zeros(self.rows, self.cols);
                for l in 0..m {
                    if q[(l, i)] != C64::new(0.0, 0.0) {
                        out += &self.kappa[l] * q[(l, i)];
                    }
                }
                out
            })
            .collect();
        Ok(InitialMap {
            rows: self.rows,
            cols: self.cols,
            kappa,
        })
    }

    /// Conjugate initial map: basis image j of the result is
    /// sum over l of conj(J_{lj}) kappa_l^* (adjoint), a map into
    /// p x p' matrices.
    pub fn conjugate(&self, space: &InitialSpace) -> Result<InitialMap> {
        if space.m() != self.kappa.len() {
            return Err(Error::DimensionMismatch {
                context: "conjugation space".into(),
                expected: self.kappa.len(),
                found: space.m(),
            });
        }
        let j = space.require_involution()?;
        let m = self.kappa.len();
        let kappa: Vec<CMat> = (0..m)
            .map(|jj| {
                let mut out = CMat::zeros(self.cols, self.rows);
                for l in 0..m {
                    out += self.kappa[l].adjoint() * j[(l, jj)].conj();
                }
                out
            })
            .collect();
        Ok(InitialMap {
            rows: self.cols,
            cols: self.rows,
            kappa,
        })
    }

    /// Lifting to V (x) M_n: basis vector (i, r, s) = i n^2 + r n + s
    /// maps to kappa_i (x) E_{rs}.
    pub fn lift(&self, n: usize) -> InitialMap {
        assert!(n >= 1, "lifting order must be positive");
        if n == 1 {
            return self.clone();
        }
        let mut kappa = Vec::with_capacity(self.kappa.len() * n * n);
        for k in &self.kappa {
            for r in 0..n {
                for s in 0..n {
                    let mut e = CMat::zeros(n, n);
                    e[(r, s)] = C64::new(1.0, 0.0);
                    kappa.push(k.kronecker(&e));
                }
            }
        }
        InitialMap {
            rows: self.rows * n,
            cols: self.cols * n,
            kappa,
        }
    }
}

/// The value of a solved matrix element at one time: entry i is the
/// p' x p matrix assigned to basis vector i of V.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementTable {
    pub t: f64,
    pub entries: Vec<CMat>,
}

impl ElementTable {
    pub fn stacked(&self) -> CMat {
        stack_columns(&self.entries)
    }

    /// Frobenius distance between two tables over the whole stacked
    /// matrix.
    pub fn diff_frobenius(&self, other: &ElementTable) -> f64 {
        assert_eq!(
            self.entries.len(),
            other.entries.len(),
            "tables must have matching source dimension"
        );
        (self.stacked() - other.stacked()).norm()
    }
}

/// Outcome of one norm-inequality check.
#[derive(Clone, Copy, Debug)]
pub struct BoundReport {
    pub left: f64,
    pub right: f64,
    pub holds: bool,
}

/// Relative slack granted to the floating-point comparison of the two
/// sides of a proven inequality.
const BOUND_SLACK: f64 = 1e-12;

/// Checks the composition norm inequality: for column maps
/// phi_i: V -> V (x) C^D and a matrix map psi on V, the norm of the
/// composite psi . phi_1 . ... . phi_n (phi_n applied first) is at
/// most D^{n/2} times the product of the individual spectral norms.
///
/// `columns[k]` is the stacked (m D) x m matrix of phi_{k+1}; index 0
/// composes outermost (adjacent to psi).
pub fn composition_bound_check(psi: &InitialMap, columns: &[CMat]) -> Result<BoundReport> {
    let m = psi.m();
    let mut leg = 0usize;
    for (k, col) in columns.iter().enumerate() {
        if col.ncols() != m || col.nrows() % m != 0 || col.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                context: format!("column {k}"),
                expected: m,
                found: col.ncols(),
            });
        }
        let d = col.nrows() / m;
        if k == 0 {
            leg = d;
        } else if d != leg {
            return Err(Error::DimensionMismatch {
                context: format!("column {k} leg dimension"),
                expected: leg,
                found: d,
            });
        }
    }

    let psi_hat = psi.stacked();
    let mut right = spectral_norm(&psi_hat);
    let n = columns.len();
    for col in columns {
        right *= (leg as f64).sqrt() * spectral_norm(col);
    }

    let composed = if n == 0 {
        psi_hat
    } else {
        let mut acc = columns[n - 1].clone();
        let mut carried = 1usize;
        for k in (0..n - 1).rev() {
            let id = CMat::identity(leg.pow(carried as u32), leg.pow(carried as u32));
            acc = columns[k].kronecker(&id) * acc;
            carried += 1;
        }
        let id = CMat::identity(leg.pow(n as u32), leg.pow(n as u32));
        psi_hat.kronecker(&id) * acc
    };
    let left = spectral_norm(&composed);
    Ok(BoundReport {
        left,
        right,
        holds: left <= right * (1.0 + BOUND_SLACK),
    })
}
