//! Full-rank lattices in R^n given by a basis.
//!
//! A lattice point is always carried together with its integer coordinates
//! `z`, and its position is recomputed as `basis · z` with a fixed summation
//! order, so two routes that agree on `z` agree bitwise on the position.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{check_dim, invalid, Error, Result};
use crate::geom::{BoxN, BOX_TOL};

/// Default cap on the number of integer candidates visited by an enumeration.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Full-rank lattice `{ basis · z : z ∈ Z^n }`; the columns of `basis` generate it.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    basis: DMatrix<f64>,
    inverse: DMatrix<f64>,
    det_abs: f64,
}

/// An enumerated lattice point with its integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePoint {
    pub z: Vec<i64>,
    pub p: Vec<f64>,
}

impl Lattice {
    /// Builds a lattice from a square matrix whose columns are the basis vectors.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let n = basis.nrows();
        if n == 0 || basis.ncols() != n {
            return invalid("basis must be a non-empty square matrix");
        }
        if basis.iter().any(|v| !v.is_finite()) {
            return invalid("basis entries must be finite");
        }
        let det = basis.determinant();
        let max_col = (0..n).map(|j| basis.column(j).norm()).fold(0.0, f64::max);
        if !(det.abs() > 1e-12 * libm::pow(max_col, n as f64)) {
            return Err(Error::SingularBasis);
        }
        let inverse = basis.clone().try_inverse().ok_or(Error::SingularBasis)?;
        Ok(Self {
            basis,
            inverse,
            det_abs: det.abs(),
        })
    }

    /// Builds a lattice from an `n × n` matrix given row by row.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            check_dim(n, r.len())?;
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Builds a lattice from its basis vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let n = cols.len();
        for c in cols {
            check_dim(n, c.len())?;
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| cols[j][i]))
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is regular")
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn det_abs(&self) -> f64 {
        self.det_abs
    }

    /// Points per unit volume, `1 / |det basis|`.
    pub fn density(&self) -> f64 {
        1.0 / self.det_abs
    }

    /// The dual lattice `{k : k·ℓ ∈ Z for all ℓ}` with basis `basis^{-T}`.
    pub fn dual(&self) -> Result<Self> {
        Self::new(self.inverse.transpose())
    }

    /// `basis · z`, summed in column order.
    pub fn point(&self, z: &[i64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for (j, zj) in z.iter().enumerate() {
                    s += self.basis[(i, j)] * (*zj as f64);
                }
                s
            })
            .collect()
    }

    /// Real coordinates `basis^{-1} · p`.
    pub fn coordinates(&self, p: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.inverse[(i, j)] * p[j]).sum())
            .collect()
    }

    /// Whether `other` generates the same point set, i.e. `basis^{-1} · other.basis`
    /// is an integer matrix with determinant ±1.
    pub fn same_lattice(&self, other: &Lattice) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let u = &self.inverse * &other.basis;
        let integral = u.iter().all(|v| (v - libm::round(*v)).abs() < 1e-6);
        integral && (u.map(libm::round).determinant().abs() - 1.0).abs() < 1e-6
    }

    /// Integer ranges of `z` whose image can meet `bx` (interval arithmetic on `basis^{-1}`).
    fn preimage_ranges(&self, bx: &BoxN) -> Vec<(i64, i64)> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let (mut lo, mut hi) = (0.0, 0.0);
                for j in 0..n {
                    let c = self.inverse[(i, j)];
                    let (a, b) = (c * (bx.lo[j] - BOX_TOL), c * (bx.hi[j] + BOX_TOL));
                    lo += a.min(b);
                    hi += a.max(b);
                }
                let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
                (
                    libm::floor(lo - slack) as i64,
                    libm::ceil(hi + slack) as i64,
                )
            })
            .collect()
    }

    /// All lattice points in the closed box `bx` (tolerance 1e-9), with their
    /// integer coordinates, sorted by `z`.
    ///
    /// The integer box is visited with the widest coordinate solved in closed
    /// form, so `budget` bounds the number of outer integer tuples visited.
    pub fn enumerate_in_box(&self, bx: &BoxN, budget: u64) -> Result<Vec<LatticePoint>> {
        let n = self.dim();
        check_dim(n, bx.dim())?;
        if bx.is_empty() {
            return Ok(Vec::new());
        }
        let ranges = self.preimage_ranges(bx);
        let solve = (0..n)
            .max_by_key(|&i| ranges[i].1 - ranges[i].0)
            .expect("n > 0");
        let candidates: u128 = ranges
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != solve)
            .map(|(_, (a, b))| (b - a + 1) as u128)
            .product();
        if candidates > budget as u128 {
            return Err(Error::BudgetExceeded { candidates, budget });
        }

        let col: Vec<f64> = (0..n).map(|i| self.basis[(i, solve)]).collect();
        let mut z: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        let mut out = Vec::new();
        loop {
            // partial image with z[solve] = 0
            let mut partial = alloc::vec![0.0; n];
            for (i, pi) in partial.iter_mut().enumerate() {
                for j in 0..n {
                    if j != solve {
                        *pi += self.basis[(i, j)] * (z[j] as f64);
                    }
                }
            }
            let (mut zlo, mut zhi) = (ranges[solve].0 as f64, ranges[solve].1 as f64);
            for i in 0..n {
                let (lo, hi) = (
                    bx.lo[i] - BOX_TOL - partial[i],
                    bx.hi[i] + BOX_TOL - partial[i],
                );
                if col[i] == 0.0 {
                    if lo > 0.0 || hi < 0.0 {
                        zhi = zlo - 1.0;
                    }
                } else {
                    let (a, b) = (lo / col[i], hi / col[i]);
                    zlo = zlo.max(a.min(b));
                    zhi = zhi.min(a.max(b));
                }
            }
            if zlo <= zhi + 2.0 {
                let (s0, s1) = (libm::floor(zlo) as i64 - 1, libm::ceil(zhi) as i64 + 1);
                for zs in s0.max(ranges[solve].0)..=s1.min(ranges[solve].1) {
                    z[solve] = zs;
                    let p = self.point(&z);
                    if bx.contains(&p) {
                        out.push(LatticePoint { z: z.clone(), p });
                    }
                }
            }
            // odometer over the non-solved coordinates
            let mut k = 0;
            loop {
                if k == n {
                    out.sort_by(|a, b| a.z.cmp(&b.z));
                    return Ok(out);
                }
                if k == solve {
                    k += 1;
                    continue;
                }
                if z[k] < ranges[k].1 {
                    z[k] += 1;
                    break;
                }
                z[k] = ranges[k].0;
                k += 1;
            }
        }
    }
}
