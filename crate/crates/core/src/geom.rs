//! Axis-aligned closed boxes and small vector helpers.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Result};

/// Boundary tolerance for closed-box membership.
pub const BOX_TOL: f64 = 1e-9;

/// Closed axis-aligned box `Π [lo_i, hi_i]`. A box with `hi_i < lo_i` in some
/// coordinate is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxN {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxN {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return invalid("box must have positive dimension");
        }
        if lo.iter().chain(hi.iter()).any(|v| !v.is_finite()) {
            return invalid("box bounds must be finite");
        }
        Ok(Self { lo, hi })
    }

    /// `[-r, r]^dim`
    pub fn cube(dim: usize, r: f64) -> Self {
        Self {
            lo: vec![-r; dim],
            hi: vec![r; dim],
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self {
            lo: vec![lo],
            hi: vec![hi],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| h < l)
    }

    pub fn side(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn volume(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    pub fn diameter(&self) -> f64 {
        libm::sqrt(
            (0..self.dim())
                .map(|i| {
                    let s = self.side(i).max(0.0);
                    s * s
                })
                .sum(),
        )
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    /// Closed membership with the library boundary tolerance.
    pub fn contains(&self, p: &[f64]) -> bool {
        self.contains_tol(p, BOX_TOL)
    }

    pub fn contains_tol(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *x >= l - tol && *x <= h + tol)
    }

    pub fn translate(&self, t: &[f64]) -> Self {
        Self {
            lo: self.lo.iter().zip(t).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(t).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn expand(&self, r: f64) -> Self {
        Self {
            lo: self.lo.iter().map(|a| a - r).collect(),
            hi: self.hi.iter().map(|a| a + r).collect(),
        }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        Self {
            lo: self
                .lo
                .iter()
                .zip(&other.lo)
                .map(|(a, b)| a.max(*b))
                .collect(),
            hi: self
                .hi
                .iter()
                .zip(&other.hi)
                .map(|(a, b)| a.min(*b))
                .collect(),
        }
    }

    /// `self ⊆ other` (with tolerance).
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.is_empty()
            || (0..self.dim())
                .all(|i| self.lo[i] >= other.lo[i] - BOX_TOL && self.hi[i] <= other.hi[i] + BOX_TOL)
    }

    /// Cartesian product `self × other`.
    pub fn product(&self, other: &Self) -> Self {
        let mut lo = self.lo.clone();
        lo.extend_from_slice(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend_from_slice(&other.hi);
        Self { lo, hi }
    }

    /// Smallest box containing all points; `None` for an empty set.
    pub fn bounding<'a, I: IntoIterator<Item = &'a [f64]>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Self {
            lo: first.to_vec(),
            hi: first.to_vec(),
        };
        for p in it {
            for (i, x) in p.iter().enumerate() {
                b.lo[i] = b.lo[i].min(*x);
                b.hi[i] = b.hi[i].max(*x);
            }
        }
        Some(b)
    }
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Lexicographic total order on coordinate vectors.
pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> core::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            core::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Index of points sorted by first coordinate, for tolerance lookups.
#[derive(Debug, Clone)]
pub(crate) struct PointIndex {
    order: Vec<usize>,
    keys: Vec<f64>,
}

impl PointIndex {
    pub fn new(points: &[Vec<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&i, &j| lex_cmp(&points[i], &points[j]));
        let keys = order.iter().map(|&i| points[i][0]).collect();
        Self { order, keys }
    }

    /// Indices of points within `tol` (max-norm) of `q`.
    pub fn near(&self, points: &[Vec<f64>], q: &[f64], tol: f64) -> Vec<usize> {
        let start = self.keys.partition_point(|k| *k < q[0] - tol);
        let mut out = Vec::new();
        for pos in start..self.keys.len() {
            if self.keys[pos] > q[0] + tol {
                break;
            }
            let i = self.order[pos];
            if points[i].iter().zip(q).all(|(a, b)| (a - b).abs() <= tol) {
                out.push(i);
            }
        }
        out
    }

    /// Smallest pairwise Euclidean distance, or `None` with fewer than two points.
    pub fn min_pair_distance(&self, points: &[Vec<f64>]) -> Option<f64> {
        let mut best = f64::INFINITY;
        let n = self.order.len();
        for a in 0..n {
            for b in a + 1..n {
                if self.keys[b] - self.keys[a] >= best {
                    break;
                }
                let d = norm2(&sub(&points[self.order[a]], &points[self.order[b]]));
                best = best.min(d);
            }
        }
        (n >= 2).then_some(best)
    }
}
