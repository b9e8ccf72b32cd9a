//! Finite patches of weighted Dirac combs, the lift/descent bijection between
//! combs on a model set and combs on the lattice strip, A-norms and norm
//! almost periods.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::cps::{CutProjectScheme, LatticePointRef, Window};
use crate::error::{check_dim, invalid, Error, Result};
use crate::geom::{lex_cmp, sub, BoxN, PointIndex, BOX_TOL};

/// Tolerance for merging coinciding positions (differences, sums of combs).
pub const MERGE_TOL: f64 = 1e-9;

/// Matching tolerance between an atom and the physical part of a lattice point.
pub const LIFT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub position: Vec<f64>,
    pub weight: Complex64,
}

/// A finite weighted Dirac comb `Σ w_i δ_{x_i}`. When `refs` is present the
/// atoms are lattice points and `refs[i]` holds the integer coordinates of
/// atom `i` in the lattice of the scheme it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedComb {
    dim: usize,
    atoms: Vec<Atom>,
    refs: Option<Vec<Vec<i64>>>,
}

impl WeightedComb {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        Self::build(dim, atoms, None)
    }

    pub fn with_refs(dim: usize, atoms: Vec<Atom>, refs: Vec<Vec<i64>>) -> Result<Self> {
        check_dim(atoms.len(), refs.len())?;
        Self::build(dim, atoms, Some(refs))
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            atoms: Vec::new(),
            refs: None,
        }
    }

    fn build(dim: usize, atoms: Vec<Atom>, refs: Option<Vec<Vec<i64>>>) -> Result<Self> {
        if dim == 0 {
            return invalid("comb dimension must be positive");
        }
        for a in &atoms {
            check_dim(dim, a.position.len())?;
            if !a.weight.re.is_finite()
                || !a.weight.im.is_finite()
                || a.position.iter().any(|v| !v.is_finite())
            {
                return invalid("atom positions and weights must be finite");
            }
        }
        let positions: Vec<Vec<f64>> = atoms.iter().map(|a| a.position.clone()).collect();
        let idx = PointIndex::new(&positions);
        if let Some(d) = idx.min_pair_distance(&positions) {
            if d <= MERGE_TOL {
                let i = (0..positions.len())
                    .find(|&i| idx.near(&positions, &positions[i], MERGE_TOL).len() > 1)
                    .unwrap_or(0);
                return Err(Error::DuplicatePosition { index: i });
            }
        }
        Ok(Self { dim, atoms, refs })
    }

    /// Comb on the physical space with weights `weight(p)` on the points of a
    /// model-set patch; integer coordinates are kept as refs.
    pub fn from_points<F: Fn(&LatticePointRef) -> Complex64>(
        d: usize,
        points: &[LatticePointRef],
        weight: F,
    ) -> Self {
        let atoms = points
            .iter()
            .map(|p| Atom {
                position: p.x.clone(),
                weight: weight(p),
            })
            .collect();
        let refs = points.iter().map(|p| p.z.clone()).collect();
        Self {
            dim: d,
            atoms,
            refs: Some(refs),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn refs(&self) -> Option<&[Vec<i64>]> {
        self.refs.as_deref()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec<f64>> {
        self.atoms.iter().map(|a| a.position.clone()).collect()
    }

    /// Bounding box of the atoms.
    pub fn extent(&self) -> Option<BoxN> {
        BoxN::bounding(self.atoms.iter().map(|a| a.position.as_slice()))
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.norm()).sum()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.atoms.iter_mut().for_each(|a| a.weight *= c);
        out
    }

    pub fn translated(&self, t: &[f64]) -> Self {
        let mut out = self.clone();
        out.refs = None;
        out.atoms
            .iter_mut()
            .for_each(|a| a.position = crate::geom::add(&a.position, t));
        out
    }

    /// `self + other`; atoms closer than [`MERGE_TOL`] are merged. Refs are
    /// kept only when both operands carry them.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let mut items: Vec<(Vec<f64>, Complex64, Option<Vec<i64>>)> = Vec::new();
        let keep_refs = self.refs.is_some() && other.refs.is_some();
        for c in [self, other] {
            for (i, a) in c.atoms.iter().enumerate() {
                let r = if keep_refs {
                    c.refs.as_ref().map(|r| r[i].clone())
                } else {
                    None
                };
                items.push((a.position.clone(), a.weight, r));
            }
        }
        let merged = merge_items(items, MERGE_TOL);
        let refs = keep_refs.then(|| {
            merged
                .iter()
                .map(|m| m.2.clone().unwrap_or_default())
                .collect()
        });
        let atoms = merged
            .into_iter()
            .map(|(p, w, _)| Atom {
                position: p,
                weight: w,
            })
            .collect();
        Ok(Self {
            dim: self.dim,
            atoms,
            refs,
        })
    }

    /// Weight of the atom within [`MERGE_TOL`] of `p`, or zero.
    pub fn weight_at(&self, p: &[f64]) -> Complex64 {
        self.atoms
            .iter()
            .find(|a| {
                a.position
                    .iter()
                    .zip(p)
                    .all(|(x, y)| (x - y).abs() <= MERGE_TOL)
            })
            .map_or(Complex64::new(0.0, 0.0), |a| a.weight)
    }
}

/// Merges items closer than `tol` (max-norm); weights of a cluster are summed
/// in input order and the first member's position and ref are kept. Output is
/// sorted lexicographically.
fn merge_items(
    mut items: Vec<(Vec<f64>, Complex64, Option<Vec<i64>>)>,
    tol: f64,
) -> Vec<(Vec<f64>, Complex64, Option<Vec<i64>>)> {
    let n = items.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| items[a].0[0].total_cmp(&items[b].0[0]).then(a.cmp(&b)));
    let mut cluster = vec![usize::MAX; n];
    let mut heads = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if cluster[i] != usize::MAX {
            continue;
        }
        cluster[i] = i;
        let mut members = vec![i];
        for &j in &order[pos + 1..] {
            if items[j].0[0] - items[i].0[0] > tol {
                break;
            }
            if cluster[j] == usize::MAX
                && items[j]
                    .0
                    .iter()
                    .zip(&items[i].0)
                    .all(|(a, b)| (a - b).abs() <= tol)
            {
                cluster[j] = i;
                members.push(j);
            }
        }
        members.sort_unstable();
        heads.push(members);
    }
    let mut out: Vec<(Vec<f64>, Complex64, Option<Vec<i64>>)> = heads
        .into_iter()
        .map(|members| {
            let mut w = Complex64::new(0.0, 0.0);
            for &j in &members {
                w += items[j].1;
            }
            let first = members[0];
            (
                core::mem::take(&mut items[first].0),
                w,
                items[first].2.take(),
            )
        })
        .collect();
    out.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    out
}

/// Lift `Σ c_x δ_x ↦ Σ c_x δ_(x, x*)` from a comb on `Λ(w)` to the strip.
///
/// Atoms are matched to lattice points of `Λ(search)` (`search ⊇ w`) unless
/// the comb already carries integer coordinates.
pub fn lift(
    cps: &CutProjectScheme,
    gamma: &WeightedComb,
    w: &Window,
    search: &Window,
) -> Result<WeightedComb> {
    check_dim(cps.d(), gamma.dim())?;
    check_dim(cps.m(), w.m)?;
    let n = cps.d() + cps.m();
    if gamma.is_empty() {
        return Ok(WeightedComb {
            dim: n,
            atoms: Vec::new(),
            refs: Some(Vec::new()),
        });
    }
    let zs: Vec<Vec<i64>> = match gamma.refs() {
        Some(refs) => {
            for (i, (a, z)) in gamma.atoms.iter().zip(refs).enumerate() {
                check_dim(n, z.len())?;
                let x = cps.physical(z)?;
                if !x
                    .iter()
                    .zip(&a.position)
                    .all(|(u, v)| (u - v).abs() <= LIFT_TOL)
                {
                    return Err(Error::AtomNotOnModelSet { index: i });
                }
            }
            refs.to_vec()
        }
        None => {
            let region = gamma.extent().expect("nonempty").expand(LIFT_TOL);
            let cands = cps.model_set(search, &region, crate::lattice::DEFAULT_BUDGET)?;
            let xs: Vec<Vec<f64>> = cands.iter().map(|c| c.x.clone()).collect();
            let idx = PointIndex::new(&xs);
            let mut zs = Vec::with_capacity(gamma.len());
            for (i, a) in gamma.atoms.iter().enumerate() {
                match idx.near(&xs, &a.position, LIFT_TOL).as_slice() {
                    [] => return Err(Error::AtomNotOnModelSet { index: i }),
                    [j] => zs.push(cands[*j].z.clone()),
                    _ => return Err(Error::InjectivityViolation { index: i }),
                }
            }
            zs
        }
    };
    let mut atoms = Vec::with_capacity(zs.len());
    for (i, (a, z)) in gamma.atoms.iter().zip(&zs).enumerate() {
        let p = cps.lattice().point(z);
        if !w.contains(&p[cps.d()..]) {
            return Err(Error::AtomOutsideWindow { index: i });
        }
        atoms.push(Atom {
            position: p,
            weight: a.weight,
        });
    }
    Ok(WeightedComb {
        dim: n,
        atoms,
        refs: Some(zs),
    })
}

/// Descent `Σ c δ_(x, x*) ↦ Σ c δ_x`; inverse of [`lift`].
pub fn descent(cps: &CutProjectScheme, eta: &WeightedComb) -> Result<WeightedComb> {
    check_dim(cps.d() + cps.m(), eta.dim())?;
    let refs = eta.refs().ok_or(Error::MissingRefs)?;
    let mut atoms = Vec::with_capacity(eta.len());
    for (a, z) in eta.atoms.iter().zip(refs) {
        atoms.push(Atom {
            position: cps.physical(z)?,
            weight: a.weight,
        });
    }
    Ok(WeightedComb {
        dim: cps.d(),
        atoms,
        refs: Some(refs.to_vec()),
    })
}

/// `sup_t |μ|(t + A)` over translates with `t + A ⊆ eval_region`.
///
/// The supremum is attained with each coordinate of `t` either at a feasible
/// bound or placing some atom on the lower face of the box, so it is found
/// exactly by a sweep over these finitely many events.
pub fn a_norm(comb: &WeightedComb, a_box: &BoxN, eval_region: &BoxN) -> Result<f64> {
    a_norm_witness(comb, a_box, eval_region).map(|(v, _)| v)
}

/// [`a_norm`] together with a maximising translate `t` (the window is `A + t`).
pub fn a_norm_witness(
    comb: &WeightedComb,
    a_box: &BoxN,
    eval_region: &BoxN,
) -> Result<(f64, Vec<f64>)> {
    check_dim(comb.dim(), a_box.dim())?;
    check_dim(comb.dim(), eval_region.dim())?;
    if (0..a_box.dim()).any(|i| !(a_box.side(i) > 0.0)) {
        return invalid("A-box must have positive side lengths");
    }
    let feasible: Vec<(f64, f64)> = (0..a_box.dim())
        .map(|i| {
            (
                eval_region.lo[i] - a_box.lo[i],
                eval_region.hi[i] - a_box.hi[i],
            )
        })
        .collect();
    if feasible.iter().any(|(l, h)| h < l) {
        return Err(Error::RegionTooSmall(
            "A-box does not fit into the evaluation region".into(),
        ));
    }
    let pts: Vec<(&[f64], f64)> = comb
        .atoms
        .iter()
        .filter(|a| eval_region.contains(&a.position))
        .map(|a| (a.position.as_slice(), a.weight.norm()))
        .collect();
    Ok(sweep(&pts, a_box, &feasible, 0))
}

fn sweep(
    pts: &[(&[f64], f64)],
    a_box: &BoxN,
    feasible: &[(f64, f64)],
    j: usize,
) -> (f64, Vec<f64>) {
    let rest = a_box.dim() - j;
    if pts.is_empty() {
        return (0.0, feasible[j..].iter().map(|f| f.0).collect());
    }
    let (flo, fhi) = feasible[j];
    let mut cands: Vec<f64> = pts
        .iter()
        .map(|(p, _)| (p[j] - a_box.lo[j]).clamp(flo, fhi))
        .collect();
    cands.push(fhi);
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let mut best = (0.0, Vec::new());
    if rest == 1 {
        // sliding window over sorted coordinates
        let mut sorted: Vec<(f64, f64)> = pts.iter().map(|(p, w)| (p[j], *w)).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        prefix.push(0.0);
        for (_, w) in &sorted {
            prefix.push(prefix.last().copied().unwrap_or(0.0) + w);
        }
        for t in cands {
            let lo = sorted.partition_point(|(x, _)| *x < t + a_box.lo[j] - BOX_TOL);
            let hi = sorted.partition_point(|(x, _)| *x <= t + a_box.hi[j] + BOX_TOL);
            let v = prefix[hi] - prefix[lo];
            if best.1.is_empty() || v > best.0 {
                best = (v, alloc::vec![t]);
            }
        }
    } else {
        for t in cands {
            let slab: Vec<(&[f64], f64)> = pts
                .iter()
                .filter(|(p, _)| {
                    p[j] >= t + a_box.lo[j] - BOX_TOL && p[j] <= t + a_box.hi[j] + BOX_TOL
                })
                .copied()
                .collect();
            let (v, tail) = sweep(&slab, a_box, feasible, j + 1);
            if best.1.is_empty() || v > best.0 {
                let mut tv = alloc::vec![t];
                tv.extend(tail);
                best = (v, tv);
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmostPeriod {
    pub t: Vec<f64>,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmostPeriodReport {
    pub eps: f64,
    /// Candidates with `‖T^t μ − μ‖_A ≤ eps`.
    pub accepted: Vec<AlmostPeriod>,
    /// Every candidate that could be evaluated.
    pub evaluated: Vec<AlmostPeriod>,
    /// Candidates whose overlap region was too small.
    pub skipped: Vec<Vec<f64>>,
    /// Largest gap between accepted translations (in 1D: consecutive sorted
    /// values; otherwise the largest nearest-neighbour distance).
    pub max_gap: Option<f64>,
}

/// `‖T^t μ − μ‖_A` evaluated on `extent ∩ (extent + t)`, or `None` when the
/// overlap is thinner than ten A-box diameters.
pub fn translation_defect(comb: &WeightedComb, a_box: &BoxN, t: &[f64]) -> Result<Option<f64>> {
    check_dim(comb.dim(), t.len())?;
    let Some(ext) = comb.extent() else {
        return Ok(Some(0.0));
    };
    let overlap = ext.intersect(&ext.translate(t));
    let need = 10.0 * a_box.diameter();
    if (0..overlap.dim()).any(|i| overlap.side(i) < need) {
        return Ok(None);
    }
    let region = overlap.expand(MERGE_TOL);
    let mut items = Vec::new();
    for a in &comb.atoms {
        let shifted = crate::geom::add(&a.position, t);
        if region.contains(&shifted) {
            items.push((shifted, a.weight, None));
        }
        if region.contains(&a.position) {
            items.push((a.position.clone(), -a.weight, None));
        }
    }
    let atoms = merge_items(items, MERGE_TOL)
        .into_iter()
        .map(|(p, w, _)| Atom {
            position: p,
            weight: w,
        })
        .collect();
    let diff = WeightedComb {
        dim: comb.dim(),
        atoms,
        refs: None,
    };
    a_norm(&diff, a_box, &overlap).map(Some)
}

/// ε-norm almost periods among caller-supplied candidate translations.
pub fn eps_norm_almost_periods(
    comb: &WeightedComb,
    a_box: &BoxN,
    eps: f64,
    candidates: &[Vec<f64>],
) -> Result<AlmostPeriodReport> {
    if candidates.is_empty() {
        return invalid("candidate list is empty");
    }
    let mut evaluated = Vec::new();
    let mut skipped = Vec::new();
    for t in candidates {
        match translation_defect(comb, a_box, t)? {
            Some(norm) => evaluated.push(AlmostPeriod { t: t.clone(), norm }),
            None => skipped.push(t.clone()),
        }
    }
    let accepted: Vec<AlmostPeriod> = evaluated
        .iter()
        .filter(|a| a.norm <= eps)
        .cloned()
        .collect();
    let max_gap = gap_of(&accepted.iter().map(|a| a.t.clone()).collect::<Vec<_>>());
    Ok(AlmostPeriodReport {
        eps,
        accepted,
        evaluated,
        skipped,
        max_gap,
    })
}

/// Largest gap of a point set: consecutive gaps in 1D, otherwise the largest
/// nearest-neighbour distance.
pub fn gap_of(points: &[Vec<f64>]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    if points[0].len() == 1 {
        let mut v: Vec<f64> = points.iter().map(|p| p[0]).collect();
        v.sort_by(f64::total_cmp);
        return v.windows(2).map(|w| w[1] - w[0]).reduce(f64::max);
    }
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| crate::geom::norm2(&sub(p, q)))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(f64::max)
}

/// Finite-patch autocorrelation `(1/vol) Σ_{x,y} w(x) conj(w(y)) δ_{x−y}`.
///
/// Coinciding differences are merged (by integer coordinates when the comb
/// carries refs, else within [`MERGE_TOL`]). The weight at `−t` is computed
/// as the exact conjugate of the weight at `t`.
pub fn autocorrelation_patch(comb: &WeightedComb, region: &BoxN) -> Result<WeightedComb> {
    check_dim(comb.dim(), region.dim())?;
    let vol = region.volume();
    if !(vol > 0.0) {
        return Err(Error::ZeroVolume);
    }
    if comb.atoms.iter().any(|a| !region.contains(&a.position)) {
        return invalid("comb atoms must lie in the normalising region");
    }
    let n = comb.len();
    let refs = comb.refs();
    let zero_weight: f64 = comb.atoms.iter().map(|a| a.weight.norm_sqr()).sum();
    // positive half of the difference set, keyed by orientation
    let mut groups: Vec<(Vec<f64>, Complex64, Option<Vec<i64>>)> = Vec::new();
    match refs {
        Some(refs) => {
            let mut by_ref: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
            for i in 0..n {
                for j in i + 1..n {
                    let (mut dz, mut dx, mut c) = (
                        refs[i]
                            .iter()
                            .zip(&refs[j])
                            .map(|(a, b)| a - b)
                            .collect::<Vec<i64>>(),
                        sub(&comb.atoms[i].position, &comb.atoms[j].position),
                        comb.atoms[i].weight * comb.atoms[j].weight.conj(),
                    );
                    if dz.iter().find(|&&v| v != 0).is_some_and(|&v| v < 0) {
                        dz.iter_mut().for_each(|v| *v = -*v);
                        dx.iter_mut().for_each(|v| *v = -*v);
                        c = c.conj();
                    }
                    match by_ref.get(&dz) {
                        Some(&g) => groups[g].1 += c,
                        None => {
                            by_ref.insert(dz.clone(), groups.len());
                            groups.push((dx, c, Some(dz)));
                        }
                    }
                }
            }
        }
        None => {
            let mut items = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    let mut dx = sub(&comb.atoms[i].position, &comb.atoms[j].position);
                    let mut c = comb.atoms[i].weight * comb.atoms[j].weight.conj();
                    if dx
                        .iter()
                        .find(|v| v.abs() > MERGE_TOL)
                        .is_some_and(|v| *v < 0.0)
                    {
                        dx.iter_mut().for_each(|v| *v = -*v);
                        c = c.conj();
                    }
                    items.push((dx, c, None));
                }
            }
            groups = merge_items(items, MERGE_TOL);
        }
    }
    let inv = 1.0 / vol;
    let dim = comb.dim();
    let mut atoms = vec![Atom {
        position: vec![0.0; dim],
        weight: Complex64::new(zero_weight * inv, 0.0),
    }];
    let mut out_refs = refs.map(|r| vec![vec![0i64; r.first().map_or(0, |z| z.len())]]);
    for (dx, c, dz) in groups {
        let w = c * inv;
        let neg: Vec<f64> = dx.iter().map(|v| -v).collect();
        atoms.push(Atom {
            position: dx,
            weight: w,
        });
        atoms.push(Atom {
            position: neg,
            weight: w.conj(),
        });
        if let (Some(r), Some(dz)) = (out_refs.as_mut(), dz) {
            let negz: Vec<i64> = dz.iter().map(|v| -v).collect();
            r.push(dz);
            r.push(negz);
        }
    }
    Ok(WeightedComb {
        dim,
        atoms,
        refs: out_refs,
    })
}

/// Minimum positive gap of the iterated difference set `Λ − Λ − ⋯ − Λ`
/// (`folds` subtractions) of a finite patch. Values closer than
/// [`MERGE_TOL`] are identified.
pub fn meyer_gap(positions: &[Vec<f64>], folds: usize, budget: u64) -> Result<f64> {
    if folds == 0 {
        return invalid("folds must be at least 1");
    }
    if positions.is_empty() {
        return invalid("empty point set");
    }
    let dedup = |v: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        merge_items(
            v.into_iter()
                .map(|p| (p, Complex64::new(0.0, 0.0), None))
                .collect(),
            MERGE_TOL,
        )
        .into_iter()
        .map(|m| m.0)
        .collect()
    };
    let base = dedup(positions.to_vec());
    let mut set = base.clone();
    for _ in 0..folds {
        let work = (set.len() as u128) * (base.len() as u128);
        if work > budget as u128 {
            return Err(Error::BudgetExceeded {
                candidates: work,
                budget,
            });
        }
        let mut next = Vec::with_capacity(set.len() * base.len());
        for s in &set {
            for b in &base {
                next.push(sub(s, b));
            }
        }
        set = dedup(next);
    }
    PointIndex::new(&set)
        .min_pair_distance(&set)
        .ok_or_else(|| Error::InvalidArgument("difference set has a single element".into()))
}
