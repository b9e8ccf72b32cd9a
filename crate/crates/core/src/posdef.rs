//! Gram-matrix tests of positive definiteness for weight functions given as
//! finite combs (value at an atom, zero elsewhere), and the finite-scale
//! check that lifting a comb to the strip preserves positive definiteness.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::comb::{lift, WeightedComb, MERGE_TOL};
use crate::cps::{CutProjectScheme, LatticePointRef, Window};
use crate::error::{check_dim, Error, Result};
use crate::geom::{sub, PointIndex};

/// Relative PSD tolerance on the minimum eigenvalue (scaled by the largest
/// matrix entry).
pub const PSD_TOL: f64 = 1e-8;

/// Largest configuration accepted by the eigensolver.
pub const MAX_GRAM_POINTS: usize = 500;

/// Hermitian discrepancies above this are rejected; smaller nonzero ones are
/// reported.
pub const HERMITIAN_TOL: f64 = 1e-6;

/// A comb read as a function: `f(t)` is the weight of the atom at `t`, zero
/// elsewhere.
pub struct CombFunction<'a> {
    comb: &'a WeightedComb,
    positions: Vec<Vec<f64>>,
    index: PointIndex,
}

impl<'a> CombFunction<'a> {
    pub fn new(comb: &'a WeightedComb) -> Self {
        let positions = comb.positions();
        let index = PointIndex::new(&positions);
        Self {
            comb,
            positions,
            index,
        }
    }

    pub fn value(&self, t: &[f64]) -> Complex64 {
        match self.index.near(&self.positions, t, MERGE_TOL).first() {
            Some(&i) => self.comb.atoms()[i].weight,
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `max_t |f(−t) − conj f(t)|`.
    pub fn hermitian_defect(&self) -> f64 {
        self.comb
            .atoms()
            .iter()
            .map(|a| {
                let neg: Vec<f64> = a.position.iter().map(|v| -v).collect();
                (self.value(&neg) - a.weight.conj()).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Hermitian Gram matrix `M[k][l] = f(x_k − x_l)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub n: usize,
    pub entries: Vec<Complex64>,
}

impl GramMatrix {
    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.entries[k * self.n + l]
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|k| (0..self.n).map(|l| self.get(k, l) * v[l]).sum())
            .collect()
    }

    /// Extreme eigenpairs via the real symmetric embedding `[[A, −B], [B, A]]`
    /// of `M = A + iB`, whose spectrum is that of `M` with doubled multiplicity.
    pub fn extreme_eigen(&self) -> (f64, f64, Vec<Complex64>) {
        let n = self.n;
        if n == 0 {
            return (0.0, 0.0, Vec::new());
        }
        let s = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let (bi, bj) = (i / n, j / n);
            let v = self.get(i % n, j % n);
            match (bi, bj) {
                (0, 0) | (1, 1) => v.re,
                (0, 1) => -v.im,
                _ => v.im,
            }
        });
        let eig = SymmetricEigen::new(s);
        let (mut imin, mut imax) = (0, 0);
        for i in 0..2 * n {
            if eig.eigenvalues[i] < eig.eigenvalues[imin] {
                imin = i;
            }
            if eig.eigenvalues[i] > eig.eigenvalues[imax] {
                imax = i;
            }
        }
        let col = eig.eigenvectors.column(imin);
        let mut v: Vec<Complex64> = (0..n).map(|k| Complex64::new(col[k], col[n + k])).collect();
        let norm = libm::sqrt(v.iter().map(|c| c.norm_sqr()).sum::<f64>());
        if norm > 0.0 {
            v.iter_mut().for_each(|c| *c /= norm);
        }
        (eig.eigenvalues[imin], eig.eigenvalues[imax], v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramReport {
    pub size: usize,
    pub min_eig: f64,
    pub max_eig: f64,
    /// `min_eig ≥ −PSD_TOL · max |M_kl|`
    pub ok: bool,
    pub hermitian_defect: f64,
    /// Unit eigenvector of the minimum eigenvalue.
    pub min_vector: Vec<Complex64>,
    pub config: Vec<Vec<f64>>,
}

/// Builds the Gram matrix of `f` on `points`; the lower triangle is the
/// conjugate of the upper one.
pub fn gram_matrix(f: &CombFunction<'_>, points: &[Vec<f64>]) -> Result<GramMatrix> {
    let n = points.len();
    for p in points {
        check_dim(f.comb.dim(), p.len())?;
    }
    let mut entries = alloc::vec![Complex64::new(0.0, 0.0); n * n];
    for k in 0..n {
        entries[k * n + k] = Complex64::new(f.value(&sub(&points[k], &points[k])).re, 0.0);
        for l in k + 1..n {
            let v = f.value(&sub(&points[k], &points[l]));
            entries[k * n + l] = v;
            entries[l * n + k] = v.conj();
        }
    }
    Ok(GramMatrix { n, entries })
}

/// Minimum eigenvalue of `(f(x_k − x_l))_{k,l}`.
pub fn gram_min_eigenvalue(f: &WeightedComb, points: &[Vec<f64>]) -> Result<GramReport> {
    if points.len() > MAX_GRAM_POINTS {
        return Err(Error::TooManyPoints {
            got: points.len(),
            max: MAX_GRAM_POINTS,
        });
    }
    let func = CombFunction::new(f);
    let defect = func.hermitian_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            discrepancy: defect,
        });
    }
    let m = gram_matrix(&func, points)?;
    let (min_eig, max_eig, min_vector) = m.extreme_eigen();
    Ok(GramReport {
        size: points.len(),
        min_eig,
        max_eig,
        ok: min_eig >= -PSD_TOL * m.max_entry(),
        hermitian_defect: defect,
        min_vector,
        config: points.to_vec(),
    })
}

/// Per-trial seed derived from the master seed (splitmix64 finaliser).
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn draw(pool: usize, size: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, pool, size.min(pool)).into_vec();
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionReport {
    pub ok: bool,
    pub seed: u64,
    pub min_eigs: Vec<f64>,
}

/// Gram tests on `trials` random sub-configurations of at most `config_size`
/// points drawn from `subgroup_points`.
pub fn restriction_check(
    f: &WeightedComb,
    subgroup_points: &[Vec<f64>],
    trials: usize,
    config_size: usize,
    seed: u64,
) -> Result<RestrictionReport> {
    let mut min_eigs = Vec::with_capacity(trials);
    let mut ok = true;
    if !subgroup_points.is_empty() {
        for t in 0..trials {
            let idx = draw(
                subgroup_points.len(),
                config_size,
                trial_seed(seed, t as u64),
            );
            let cfg: Vec<Vec<f64>> = idx.iter().map(|&i| subgroup_points[i].clone()).collect();
            let r = gram_min_eigenvalue(f, &cfg)?;
            ok &= r.ok;
            min_eigs.push(r.min_eig);
        }
    }
    Ok(RestrictionReport { ok, seed, min_eigs })
}

/// Where the random configurations of [`lift_pd_crosscheck`] come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigPool {
    /// Atoms of the comb itself.
    Support,
    /// Explicit lattice points (typically a model-set patch).
    Points(Vec<LatticePointRef>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdOptions {
    pub trials: usize,
    pub config_size: usize,
    pub seed: u64,
    pub pool: ConfigPool,
}

impl Default for PdOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            config_size: 40,
            seed: 0,
            pool: ConfigPool::Support,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftPdReport {
    pub down_ok: bool,
    pub up_ok: bool,
    /// Downstairs and upstairs Gram matrices were bitwise equal in every trial.
    pub entrywise_equal: bool,
    pub min_eig_down: Vec<f64>,
    pub min_eig_up: Vec<f64>,
    pub seed: u64,
}

impl LiftPdReport {
    /// Positive definiteness was decided the same way on both sides.
    pub fn agree(&self) -> bool {
        self.down_ok == self.up_ok
    }
}

/// Compares Gram tests of `gamma` on configurations in `R^d` with those of
/// its lift on the matched configurations in `R^(d+m)`.
pub fn lift_pd_crosscheck(
    cps: &CutProjectScheme,
    gamma: &WeightedComb,
    w: &Window,
    opts: &PdOptions,
) -> Result<LiftPdReport> {
    let eta = lift(cps, gamma, w, w)?;
    let (down_pool, up_pool): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match &opts.pool {
        ConfigPool::Support => (gamma.positions(), eta.positions()),
        ConfigPool::Points(pts) => (
            pts.iter().map(|p| p.x.clone()).collect(),
            pts.iter().map(|p| p.position()).collect(),
        ),
    };
    let mut report = LiftPdReport {
        down_ok: true,
        up_ok: true,
        entrywise_equal: true,
        min_eig_down: Vec::new(),
        min_eig_up: Vec::new(),
        seed: opts.seed,
    };
    if down_pool.is_empty() || gamma.is_empty() {
        return Ok(report);
    }
    let (fd, fu) = (CombFunction::new(gamma), CombFunction::new(&eta));
    for t in 0..opts.trials {
        let idx = draw(
            down_pool.len(),
            opts.config_size,
            trial_seed(opts.seed, t as u64),
        );
        let down: Vec<Vec<f64>> = idx.iter().map(|&i| down_pool[i].clone()).collect();
        let up: Vec<Vec<f64>> = idx.iter().map(|&i| up_pool[i].clone()).collect();
        let (md, mu) = (gram_matrix(&fd, &down)?, gram_matrix(&fu, &up)?);
        report.entrywise_equal &= md == mu;
        let tol_d = PSD_TOL * md.max_entry();
        let tol_u = PSD_TOL * mu.max_entry();
        let (ed, eu) = (md.extreme_eigen().0, mu.extreme_eigen().0);
        report.down_ok &= ed >= -tol_d;
        report.up_ok &= eu >= -tol_u;
        report.min_eig_down.push(ed);
        report.min_eig_up.push(eu);
    }
    Ok(report)
}

/// Negates the weights at `t` and `−t` (breaks positive definiteness of an
/// autocorrelation when `f(t)` is significant).
pub fn flip_weight_pair(comb: &WeightedComb, t: &[f64]) -> Result<WeightedComb> {
    check_dim(comb.dim(), t.len())?;
    let neg: Vec<f64> = t.iter().map(|v| -v).collect();
    let hit = |p: &[f64], q: &[f64]| p.iter().zip(q).all(|(a, b)| (a - b).abs() <= MERGE_TOL);
    let atoms = comb
        .atoms()
        .iter()
        .map(|a| {
            let mut a = a.clone();
            if hit(&a.position, t) || hit(&a.position, &neg) {
                a.weight = -a.weight;
            }
            a
        })
        .collect();
    match comb.refs() {
        Some(r) => WeightedComb::with_refs(comb.dim(), atoms, r.to_vec()),
        None => WeightedComb::new(comb.dim(), atoms),
    }
}

/// Position of the heaviest atom away from the origin, by `|w|`.
pub fn dominant_offset(comb: &WeightedComb) -> Option<Vec<f64>> {
    comb.atoms()
        .iter()
        .filter(|a| a.position.iter().any(|v| v.abs() > MERGE_TOL))
        .max_by(|a, b| a.weight.norm().total_cmp(&b.weight.norm()))
        .map(|a| a.position.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comb::{autocorrelation_patch, Atom};
    use crate::geom::BoxN;
    use crate::lattice::DEFAULT_BUDGET;
    use alloc::vec;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn comb1(xs: &[(f64, Complex64)]) -> WeightedComb {
        WeightedComb::new(
            1,
            xs.iter()
                .map(|(x, w)| Atom {
                    position: vec![*x],
                    weight: *w,
                })
                .collect(),
        )
        .unwrap()
    }

    fn fib_positive(hi: f64, seed: u64) -> (CutProjectScheme, Vec<LatticePointRef>, WeightedComb) {
        let cps = CutProjectScheme::fibonacci();
        let w = Window::from_box(BoxN::interval(0.0, 1.0));
        let pts = cps
            .model_set(&w, &BoxN::interval(0.0, hi), DEFAULT_BUDGET)
            .unwrap();
        let comb = WeightedComb::from_points(1, &pts, |p| {
            let s = trial_seed(seed, (p.z[0] * 1000 + p.z[1]) as u64);
            c(0.5 + (s % 1000) as f64 / 1000.0)
        });
        let g = autocorrelation_patch(&comb, &BoxN::interval(0.0, hi)).unwrap();
        (cps, pts, g)
    }

    fn fib_autocorrelation(
        lo: f64,
        hi: f64,
        seed: u64,
    ) -> (CutProjectScheme, Vec<LatticePointRef>, WeightedComb) {
        let cps = CutProjectScheme::fibonacci();
        let w = Window::from_box(BoxN::interval(0.0, 1.0));
        let pts = cps
            .model_set(&w, &BoxN::interval(lo, hi), DEFAULT_BUDGET)
            .unwrap();
        let weights: Vec<Complex64> = (0..pts.len())
            .map(|i| {
                let s = trial_seed(seed, i as u64);
                Complex64::new(
                    (s % 1000) as f64 / 500.0 - 1.0,
                    ((s >> 20) % 1000) as f64 / 500.0 - 1.0,
                )
            })
            .collect();
        let comb = WeightedComb::from_points(1, &pts, |p| {
            weights[pts.iter().position(|q| q.z == p.z).unwrap()]
        });
        let g = autocorrelation_patch(&comb, &BoxN::interval(lo, hi)).unwrap();
        (cps, pts, g)
    }

    #[test]
    fn dirac_at_origin_gives_identity() {
        let f = comb1(&[(0.0, c(1.0))]);
        let r = gram_min_eigenvalue(&f, &[vec![0.0], vec![0.7], vec![3.1], vec![-2.0]]).unwrap();
        assert!((r.min_eig - 1.0).abs() < 1e-12 && (r.max_eig - 1.0).abs() < 1e-12);
        assert!(r.ok);
    }

    #[test]
    fn off_diagonal_only_is_indefinite() {
        let f = comb1(&[(-0.5, c(1.0)), (0.5, c(1.0))]);
        let r = gram_min_eigenvalue(&f, &[vec![0.0], vec![0.5]]).unwrap();
        assert!((r.min_eig + 1.0).abs() < 1e-12);
        assert!(!r.ok);
    }

    #[test]
    fn non_hermitian_rejected() {
        let f = comb1(&[
            (0.0, c(1.0)),
            (0.5, Complex64::new(0.0, 1.0)),
            (-0.5, Complex64::new(0.0, 1.0)),
        ]);
        assert!(matches!(
            gram_min_eigenvalue(&f, &[vec![0.0]]),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn too_many_points_rejected() {
        let f = comb1(&[(0.0, c(1.0))]);
        let pts: Vec<Vec<f64>> = (0..501).map(|i| vec![i as f64]).collect();
        assert!(matches!(
            gram_min_eigenvalue(&f, &pts),
            Err(Error::TooManyPoints { .. })
        ));
    }

    #[test]
    fn autocorrelation_gram_is_psd_with_small_residual() {
        let (_, pts, g) = fib_autocorrelation(0.0, 60.0, 3);
        let cfg: Vec<Vec<f64>> = pts.iter().take(50).map(|p| p.x.clone()).collect();
        let r = gram_min_eigenvalue(&g, &cfg).unwrap();
        assert!(r.ok && r.min_eig >= -1e-8, "{}", r.min_eig);
        let m = gram_matrix(&CombFunction::new(&g), &cfg).unwrap();
        let mv = m.apply(&r.min_vector);
        let res: f64 = libm::sqrt(
            mv.iter()
                .zip(&r.min_vector)
                .map(|(a, b)| (a - b * r.min_eig).norm_sqr())
                .sum::<f64>(),
        );
        assert!(res <= 1e-8 * m.max_entry() * cfg.len() as f64);
    }

    #[test]
    fn restriction_to_integers_and_model_set() {
        // Fejér-type PD function on Z: autocorrelation of a unit block
        let block = comb1(&(0..6).map(|k| (k as f64, c(1.0))).collect::<Vec<_>>());
        let f = autocorrelation_patch(&block, &BoxN::interval(0.0, 5.0)).unwrap();
        let ints: Vec<Vec<f64>> = (-20..20).map(|k| vec![k as f64]).collect();
        assert!(restriction_check(&f, &ints, 20, 15, 1).unwrap().ok);

        let (_, pts, g) = fib_autocorrelation(0.0, 80.0, 9);
        let xs: Vec<Vec<f64>> = pts.iter().map(|p| p.x.clone()).collect();
        let r = restriction_check(&g, &xs, 100, 20, 42).unwrap();
        assert!(r.ok && r.min_eigs.len() == 100);

        let bad = comb1(&[(-0.5, c(1.0)), (0.5, c(1.0))]);
        let halves: Vec<Vec<f64>> = (0..10).map(|k| vec![0.5 * k as f64]).collect();
        assert!(!restriction_check(&bad, &halves, 5, 10, 0).unwrap().ok);
    }

    #[test]
    fn lifted_autocorrelation_agrees_upstairs() {
        let (cps, pts, g) = fib_autocorrelation(0.0, 60.0, 5);
        let w = Window::from_box(BoxN::interval(0.0, 1.0));
        let ww = w.difference(&w);
        let opts = PdOptions {
            trials: 30,
            config_size: 30,
            seed: 11,
            pool: ConfigPool::Points(pts.clone()),
        };
        let r = lift_pd_crosscheck(&cps, &g, &ww, &opts).unwrap();
        assert!(r.down_ok && r.up_ok && r.entrywise_equal);

        let (cps, pts, g) = fib_positive(100.0, 5);
        let t0 = dominant_offset(&g).unwrap();
        let flipped = flip_weight_pair(&g, &t0).unwrap();
        let opts = PdOptions {
            trials: 20,
            config_size: 40,
            seed: 11,
            pool: ConfigPool::Points(pts),
        };
        let r = lift_pd_crosscheck(&cps, &flipped, &ww, &opts).unwrap();
        assert!(!r.down_ok && !r.up_ok && r.entrywise_equal);
    }

    #[test]
    fn empty_comb_is_vacuously_pd() {
        let cps = CutProjectScheme::fibonacci();
        let w = Window::from_box(BoxN::interval(0.0, 1.0));
        let r =
            lift_pd_crosscheck(&cps, &WeightedComb::empty(1), &w, &PdOptions::default()).unwrap();
        assert!(r.down_ok && r.up_ok);
    }

    #[test]
    fn extension_by_zero_respects_cosets() {
        // f lives on Z; the configuration mixes the cosets Z and Z + 1/3
        let block = comb1(&(0..4).map(|k| (k as f64, c(1.0))).collect::<Vec<_>>());
        let f = autocorrelation_patch(&block, &BoxN::interval(0.0, 4.0)).unwrap();
        let cfg: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 1.0 / 3.0, 4.0 / 3.0, 10.0 / 3.0]
            .iter()
            .map(|x| vec![*x])
            .collect();
        let func = CombFunction::new(&f);
        let m = gram_matrix(&func, &cfg).unwrap();
        for k in 0..6 {
            for l in 0..6 {
                if (k < 3) != (l < 3) {
                    assert_eq!(m.get(k, l), Complex64::new(0.0, 0.0));
                }
            }
        }
        assert!(gram_min_eigenvalue(&f, &cfg).unwrap().ok);
    }
}
