//! Cut-and-project schemes `(R^d, R^m, L)` with `L ⊂ R^(d+m)`.
//!
//! Injectivity of the physical projection and density of the internal
//! projection are asymptotic properties; the `*_check` operations here only
//! certify them on an explicit finite search region.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Result};
use crate::geom::{lex_cmp, norm2, norm_inf, BoxN};
use crate::lattice::Lattice;

#[derive(Debug, Clone, PartialEq)]
pub struct CutProjectScheme {
    lattice: Lattice,
    d: usize,
    m: usize,
}

/// A window: finite union of closed boxes in internal space. Degenerate
/// (zero-volume) boxes are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub m: usize,
    pub parts: Vec<BoxN>,
}

/// Tolerance for `|exp(2πi⟨k, ℓ⟩) − 1|` in [`CutProjectScheme::dual_pairing_check`].
pub const PAIRING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PairingReport {
    pub ok: bool,
    pub max_defect: f64,
    pub pairs: usize,
}

/// A lattice point split into physical part `x` and internal part `xstar`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePointRef {
    pub z: Vec<i64>,
    pub x: Vec<f64>,
    pub xstar: Vec<f64>,
}

impl LatticePointRef {
    /// `(x, xstar)` concatenated.
    pub fn position(&self) -> Vec<f64> {
        let mut p = self.x.clone();
        p.extend_from_slice(&self.xstar);
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectivityReport {
    pub ok: bool,
    pub witness: Option<Vec<i64>>,
    pub radius: f64,
    pub points_checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub ok: bool,
    pub max_gap: f64,
    pub internal_points: usize,
}

impl Window {
    pub fn new(m: usize, parts: Vec<BoxN>) -> Result<Self> {
        if parts.is_empty() {
            return invalid("window needs at least one box");
        }
        for b in &parts {
            check_dim(m, b.dim())?;
            if b.is_empty() {
                return invalid("window boxes must be nonempty");
            }
        }
        Ok(Self { m, parts })
    }

    pub fn from_box(b: BoxN) -> Self {
        Self {
            m: b.dim(),
            parts: vec![b],
        }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.parts.iter().any(|b| b.contains(y))
    }

    pub fn bounding_box(&self) -> BoxN {
        let mut b = self.parts[0].clone();
        for p in &self.parts[1..] {
            for i in 0..self.m {
                b.lo[i] = b.lo[i].min(p.lo[i]);
                b.hi[i] = b.hi[i].max(p.hi[i]);
            }
        }
        b
    }

    /// Box-wise Minkowski difference `self − other`.
    pub fn difference(&self, other: &Window) -> Window {
        let mut parts = Vec::new();
        for a in &self.parts {
            for b in &other.parts {
                let lo = a.lo.iter().zip(&b.hi).map(|(x, y)| x - y).collect();
                let hi = a.hi.iter().zip(&b.lo).map(|(x, y)| x - y).collect();
                parts.push(BoxN { lo, hi });
            }
        }
        Window { m: self.m, parts }
    }
}

impl CutProjectScheme {
    pub fn new(lattice: Lattice, d: usize, m: usize) -> Result<Self> {
        if d == 0 || m == 0 {
            return invalid("physical and internal dimensions must be positive");
        }
        check_dim(d + m, lattice.dim())?;
        Ok(Self { lattice, d, m })
    }

    /// The Fibonacci scheme: basis columns `(1, 1)` and `(τ, 1 − τ)`.
    pub fn fibonacci() -> Self {
        let t = crate::GOLDEN;
        let l = Lattice::from_columns(&[vec![1.0, 1.0], vec![t, 1.0 - t]]).expect("regular");
        Self {
            lattice: l,
            d: 1,
            m: 1,
        }
    }

    /// The eightfold (Ammann–Beenker) scheme: `Z^4` embedded by
    /// `e_k ↦ (cos kπ/4, sin kπ/4; cos 3kπ/4, sin 3kπ/4)`.
    pub fn ammann_beenker() -> Self {
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|k| {
                let a = core::f64::consts::FRAC_PI_4 * k as f64;
                vec![
                    libm::cos(a),
                    libm::sin(a),
                    libm::cos(3.0 * a),
                    libm::sin(3.0 * a),
                ]
            })
            .collect();
        let l = Lattice::from_columns(&cols).expect("regular");
        Self {
            lattice: l,
            d: 2,
            m: 2,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn split(&self, z: &[i64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim(self.d + self.m, z.len())?;
        let mut p = self.lattice.point(z);
        let xstar = p.split_off(self.d);
        Ok((p, xstar))
    }

    /// Internal part of the lattice point with coordinates `z`.
    pub fn star(&self, z: &[i64]) -> Result<Vec<f64>> {
        Ok(self.split(z)?.1)
    }

    /// Physical part of the lattice point with coordinates `z`.
    pub fn physical(&self, z: &[i64]) -> Result<Vec<f64>> {
        Ok(self.split(z)?.0)
    }

    pub fn point_ref(&self, z: &[i64]) -> Result<LatticePointRef> {
        let (x, xstar) = self.split(z)?;
        Ok(LatticePointRef {
            z: z.to_vec(),
            x,
            xstar,
        })
    }

    /// Lattice points with `x ∈ query` and `x* ∈ internal`, sorted by `z`.
    pub fn strip_points(
        &self,
        query: &BoxN,
        internal: &BoxN,
        budget: u64,
    ) -> Result<Vec<LatticePointRef>> {
        check_dim(self.d, query.dim())?;
        check_dim(self.m, internal.dim())?;
        let pts = self
            .lattice
            .enumerate_in_box(&query.product(internal), budget)?;
        Ok(pts
            .into_iter()
            .map(|lp| {
                let mut x = lp.p;
                let xstar = x.split_off(self.d);
                LatticePointRef { z: lp.z, x, xstar }
            })
            .collect())
    }

    /// The model set `Λ(W) ∩ query`, sorted lexicographically by `x`.
    pub fn model_set(&self, w: &Window, query: &BoxN, budget: u64) -> Result<Vec<LatticePointRef>> {
        check_dim(self.m, w.m)?;
        let mut out: Vec<LatticePointRef> = Vec::new();
        for part in &w.parts {
            out.extend(self.strip_points(query, part, budget)?);
        }
        out.sort_by(|a, b| a.z.cmp(&b.z));
        out.dedup_by(|a, b| a.z == b.z);
        out.sort_by(|a, b| lex_cmp(&a.x, &b.x).then_with(|| a.z.cmp(&b.z)));
        Ok(out)
    }

    /// Finite injectivity certificate: no nonzero lattice point with
    /// `‖(x, x*)‖∞ ≤ radius` has `‖x‖ < tol`.
    pub fn verify_injectivity(
        &self,
        radius: f64,
        tol: f64,
        budget: u64,
    ) -> Result<InjectivityReport> {
        if !(radius > 0.0) {
            return invalid("search radius must be positive");
        }
        let pts = self
            .lattice
            .enumerate_in_box(&BoxN::cube(self.d + self.m, radius), budget)?;
        let mut witness: Option<(f64, Vec<i64>)> = None;
        let mut checked = 0;
        for lp in &pts {
            if lp.z.iter().all(|&c| c == 0) {
                continue;
            }
            checked += 1;
            if norm2(&lp.p[..self.d]) < tol {
                let len = norm2(&lp.p);
                if witness.as_ref().map_or(true, |(l, _)| len < *l - 1e-12) {
                    // report the shortest violator, sign-normalised
                    let mut z = lp.z.clone();
                    if z.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0) {
                        z.iter_mut().for_each(|c| *c = -*c);
                    }
                    witness = Some((len, z));
                }
            }
        }
        let witness = witness.map(|(_, z)| z);
        Ok(InjectivityReport {
            ok: witness.is_none(),
            witness,
            radius,
            points_checked: checked,
        })
    }

    /// Finite density certificate for the internal projection: every point of
    /// a grid of pitch `eps/2` in `reference` lies within `eps` of an internal
    /// part `x*` of a lattice point with `‖x‖∞ ≤ search_radius`.
    pub fn internal_density_check(
        &self,
        reference: &BoxN,
        eps: f64,
        search_radius: f64,
        budget: u64,
    ) -> Result<DensityReport> {
        check_dim(self.m, reference.dim())?;
        if !(eps > 0.0) {
            return invalid("eps must be positive");
        }
        let pts = self.strip_points(
            &BoxN::cube(self.d, search_radius),
            &reference.expand(eps),
            budget,
        )?;
        let stars: Vec<&[f64]> = pts.iter().map(|p| p.xstar.as_slice()).collect();
        let pitch = eps / 2.0;
        let counts: Vec<usize> = (0..self.m)
            .map(|i| (libm::ceil(reference.side(i).max(0.0) / pitch) as usize).max(1) + 1)
            .collect();
        let mut idx = vec![0usize; self.m];
        let mut max_gap: f64 = 0.0;
        loop {
            let g: Vec<f64> = (0..self.m)
                .map(|i| (reference.lo[i] + idx[i] as f64 * pitch).min(reference.hi[i]))
                .collect();
            let nearest = stars
                .iter()
                .map(|s| norm2(&crate::geom::sub(s, &g)))
                .fold(f64::INFINITY, f64::min);
            max_gap = max_gap.max(nearest);
            let mut k = 0;
            while k < self.m {
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == self.m {
                break;
            }
        }
        Ok(DensityReport {
            ok: max_gap <= eps,
            max_gap,
            internal_points: stars.len(),
        })
    }

    /// The dual scheme on the dual lattice with the same split.
    pub fn dual_cps(&self) -> Result<Self> {
        Self::new(self.lattice.dual()?, self.d, self.m)
    }

    /// Checks `exp(2πi(⟨k, x⟩ + ⟨k*, x*⟩)) = 1` on `pairs` seeded random pairs
    /// of lattice and dual-lattice points with coordinates in `[-coeff, coeff]`.
    pub fn dual_pairing_check(&self, pairs: usize, coeff: i64, seed: u64) -> Result<PairingReport> {
        use rand::{Rng, SeedableRng};
        if coeff < 0 {
            return invalid("coefficient range must be non-negative");
        }
        let dual = self.dual_cps()?;
        let n = self.d + self.m;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut max_defect: f64 = 0.0;
        for _ in 0..pairs {
            let a: Vec<i64> = (0..n).map(|_| rng.random_range(-coeff..=coeff)).collect();
            let b: Vec<i64> = (0..n).map(|_| rng.random_range(-coeff..=coeff)).collect();
            let s = crate::geom::dot(&self.lattice.point(&a), &dual.lattice.point(&b));
            let (sn, cs) = libm::sincos(2.0 * core::f64::consts::PI * s);
            let defect = libm::hypot(cs - 1.0, sn);
            max_defect = max_defect.max(defect);
        }
        Ok(PairingReport {
            ok: max_defect < PAIRING_TOL,
            max_defect,
            pairs,
        })
    }

    /// Largest `‖(x, x*)‖∞` over a set of refs; used to size certificates.
    pub fn max_extent(points: &[LatticePointRef]) -> f64 {
        points
            .iter()
            .map(|p| norm_inf(&p.x).max(norm_inf(&p.xstar)))
            .fold(0.0, f64::max)
    }
}

/// Minimum pairwise distance of a point set (`None` for fewer than two points).
pub fn min_separation(points: &[LatticePointRef]) -> Option<f64> {
    let xs: Vec<Vec<f64>> = points.iter().map(|p| p.x.clone()).collect();
    crate::geom::PointIndex::new(&xs).min_pair_distance(&xs)
}
