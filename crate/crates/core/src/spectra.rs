//! Fourier side of a cut-and-project scheme: internal profiles and cutoffs with
//! closed-form transforms, the periodic measure `η̂` on the dual lattice, its
//! pairing with `ψ ⊗ φ̌`, diffraction amplitudes, projections `(ρ)_f`, spectral
//! projectors and the norm bound for projections of periodic measures.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::comb::{a_norm_witness, Atom, WeightedComb, LIFT_TOL};
use crate::cps::{CutProjectScheme, LatticePointRef, Window};
use crate::error::{check_dim, invalid, Error, Result};
use crate::geom::{dot, lex_cmp, BoxN, BOX_TOL};
use crate::lattice::DEFAULT_BUDGET;
use crate::piecewise::{cis, PiecewiseQuadratic, Trapezoid};
use crate::quad::{adaptive, gk15};

/// Sign in `A(k) = dens(L) · ĥ(SIGN · k*)`, fixed against the brute-force
/// oracle (see the sign-pinning test).
pub const SIGN: f64 = -1.0;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    Box(BoxN),
    Trapezoid(Vec<Trapezoid>),
    FiniteAtomic(Vec<(Vec<f64>, Complex64)>),
}

/// Weight profile `h` on internal space; atoms of the comb carry `h(x*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalProfile {
    m: usize,
    kind: ProfileKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Factor {
    Trap(Trapezoid),
    Point(f64),
}

impl Factor {
    fn transform(&self, xi: f64) -> Complex64 {
        match self {
            Factor::Trap(t) => t.transform(xi),
            Factor::Point(p) => cis(-2.0 * PI * xi * p),
        }
    }

    /// `(A, p)` with `|transform(ξ)| ≤ A/|ξ|^p`.
    fn power_bounds(&self) -> Vec<(f64, i32)> {
        match self {
            Factor::Trap(t) => t.power_bounds(),
            Factor::Point(_) => vec![(1.0, 0)],
        }
    }

    /// `∫ g(s) · factor(s) · e^{2πiκs} ds`.
    fn pair_with(&self, g: &Trapezoid, kappa: f64) -> Complex64 {
        match self {
            Factor::Trap(h) => PiecewiseQuadratic::product(g, Some(h)).fourier(2.0 * PI * kappa),
            Factor::Point(p) => cis(2.0 * PI * kappa * p) * g.value(*p),
        }
    }

    fn pair_envelope(&self, g: Option<&Trapezoid>) -> AxisEnv {
        match (self, g) {
            (Factor::Trap(h), Some(g)) => AxisEnv::Decay(PiecewiseQuadratic::product(g, Some(h))),
            (Factor::Trap(h), None) => AxisEnv::Decay(PiecewiseQuadratic::product(h, None)),
            (Factor::Point(p), Some(g)) => AxisEnv::Const(g.value(*p).abs()),
            (Factor::Point(_), None) => AxisEnv::Const(1.0),
        }
    }
}

#[derive(Debug, Clone)]
struct TensorTerm {
    weight: Complex64,
    factors: Vec<Factor>,
}

/// Per-axis decay envelope of a Fourier integral.
#[derive(Debug, Clone)]
enum AxisEnv {
    Decay(PiecewiseQuadratic),
    Const(f64),
}

impl AxisEnv {
    fn sup(&self) -> f64 {
        match self {
            AxisEnv::Decay(q) => q.l1_bound(),
            AxisEnv::Const(c) => *c,
        }
    }

    fn radius(&self, t: f64) -> Option<f64> {
        match self {
            AxisEnv::Decay(q) => Some(q.radius(t)),
            AxisEnv::Const(c) if *c < t => Some(0.0),
            AxisEnv::Const(_) => None,
        }
    }
}

/// Per-axis radii `R` such that every summand `c · Π_i env_i(κ_i)` is below
/// `t / #summands` as soon as some `|κ_i| > R_i`.
fn tensor_radius(summands: &[(f64, Vec<AxisEnv>)], m: usize, t: f64) -> Option<Vec<f64>> {
    let mut r = vec![0.0; m];
    let n = summands.len().max(1) as f64;
    for (c, envs) in summands {
        if *c == 0.0 {
            continue;
        }
        for i in 0..m {
            let others: f64 = envs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, e)| e.sup())
                .product();
            if others == 0.0 {
                continue;
            }
            r[i] = f64::max(r[i], envs[i].radius(t / (n * c * others))?);
        }
    }
    Some(r)
}

impl InternalProfile {
    /// Indicator of a box.
    pub fn indicator(bx: BoxN) -> Result<Self> {
        if (0..bx.dim()).any(|i| !(bx.side(i) > 0.0)) {
            return Err(Error::ZeroVolume);
        }
        Ok(Self {
            m: bx.dim(),
            kind: ProfileKind::Box(bx),
        })
    }

    /// Tensor product of one-dimensional trapezoids.
    pub fn trapezoid(axes: Vec<Trapezoid>) -> Result<Self> {
        if axes.is_empty() {
            return invalid("trapezoid profile needs at least one axis");
        }
        Ok(Self {
            m: axes.len(),
            kind: ProfileKind::Trapezoid(axes),
        })
    }

    pub fn finite_atomic(m: usize, atoms: Vec<(Vec<f64>, Complex64)>) -> Result<Self> {
        for (p, _) in &atoms {
            check_dim(m, p.len())?;
        }
        Ok(Self {
            m,
            kind: ProfileKind::FiniteAtomic(atoms),
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    fn terms(&self) -> Vec<TensorTerm> {
        let one = Complex64::new(1.0, 0.0);
        match &self.kind {
            ProfileKind::Box(b) => vec![TensorTerm {
                weight: one,
                factors: (0..self.m)
                    .map(|i| {
                        Factor::Trap(Trapezoid {
                            a: b.lo[i],
                            b: b.hi[i],
                            delta: 0.0,
                        })
                    })
                    .collect(),
            }],
            ProfileKind::Trapezoid(ax) => {
                vec![TensorTerm {
                    weight: one,
                    factors: ax.iter().map(|t| Factor::Trap(*t)).collect(),
                }]
            }
            ProfileKind::FiniteAtomic(atoms) => atoms
                .iter()
                .map(|(p, w)| TensorTerm {
                    weight: *w,
                    factors: p.iter().map(|x| Factor::Point(*x)).collect(),
                })
                .collect(),
        }
    }

    pub fn value(&self, y: &[f64]) -> Complex64 {
        match &self.kind {
            ProfileKind::Box(b) => Complex64::new(if b.contains(y) { 1.0 } else { 0.0 }, 0.0),
            ProfileKind::Trapezoid(ax) => {
                Complex64::new(ax.iter().zip(y).map(|(t, v)| t.value(*v)).product(), 0.0)
            }
            ProfileKind::FiniteAtomic(atoms) => atoms
                .iter()
                .filter(|(p, _)| p.iter().zip(y).all(|(a, b)| a == b))
                .map(|(_, w)| *w)
                .sum(),
        }
    }

    /// `ĥ(ξ) = ∫ h(y) e^{−2πi ξ·y} dy` (for atomic profiles `Σ w e^{−2πi ξ·p}`).
    pub fn transform(&self, xi: &[f64]) -> Complex64 {
        self.terms()
            .iter()
            .map(|t| {
                t.factors
                    .iter()
                    .zip(xi)
                    .fold(t.weight, |acc, (f, x)| acc * f.transform(*x))
            })
            .sum()
    }

    /// `∫ h` (total weight for atomic profiles).
    pub fn integral(&self) -> Complex64 {
        self.transform(&vec![0.0; self.m])
    }

    /// Bounding box of the support.
    pub fn support(&self) -> Option<BoxN> {
        match &self.kind {
            ProfileKind::Box(b) => Some(b.clone()),
            ProfileKind::Trapezoid(ax) => {
                let (lo, hi): (Vec<f64>, Vec<f64>) = ax.iter().map(|t| t.support()).unzip();
                Some(BoxN { lo, hi })
            }
            ProfileKind::FiniteAtomic(atoms) => {
                BoxN::bounding(atoms.iter().map(|(p, _)| p.as_slice()))
            }
        }
    }

    fn supported_in(&self, w: &Window) -> bool {
        match &self.kind {
            ProfileKind::FiniteAtomic(atoms) => atoms.iter().all(|(p, _)| w.contains(p)),
            _ => match self.support() {
                Some(s) => w.parts.iter().any(|p| s.is_subset_of(p)),
                None => true,
            },
        }
    }
}

/// Tensor product of trapezoids with positive margins; `φ ≡ 1` on the
/// plateau box.
#[derive(Debug, Clone, PartialEq)]
pub struct Cutoff {
    axes: Vec<Trapezoid>,
}

impl Cutoff {
    pub fn new(axes: Vec<Trapezoid>) -> Result<Self> {
        if axes.is_empty() {
            return invalid("cutoff needs at least one axis");
        }
        if axes.iter().any(|t| !(t.delta > 0.0)) {
            return invalid("cutoff margins must be positive");
        }
        Ok(Self { axes })
    }

    /// Plateau equal to the bounding box of `w`, margins `delta` per axis.
    pub fn around(w: &Window, delta: &[f64]) -> Result<Self> {
        check_dim(w.m, delta.len())?;
        let b = w.bounding_box();
        Self::new(
            (0..w.m)
                .map(|i| Trapezoid {
                    a: b.lo[i],
                    b: b.hi[i],
                    delta: delta[i],
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Trapezoid] {
        &self.axes
    }

    pub fn plateau(&self) -> BoxN {
        BoxN {
            lo: self.axes.iter().map(|t| t.a).collect(),
            hi: self.axes.iter().map(|t| t.b).collect(),
        }
    }

    pub fn covers(&self, w: &Window) -> bool {
        let p = self.plateau();
        w.parts.iter().all(|b| b.is_subset_of(&p))
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.axes.iter().zip(y).map(|(t, v)| t.value(*v)).product()
    }

    /// `φ̌(ξ) = ∫ φ(y) e^{+2πi ξ·y} dy`.
    pub fn inverse_transform(&self, xi: &[f64]) -> Complex64 {
        self.axes
            .iter()
            .zip(xi)
            .fold(Complex64::new(1.0, 0.0), |acc, (t, x)| {
                acc * t.inverse_transform(*x)
            })
    }

    /// Per-axis grid sups of `(1 + ξ²)|φ̌_i(ξ)|` on `[−half, half]`, multiplied.
    pub fn admissibility_grid(&self, half: f64, pitch: f64) -> f64 {
        let n = libm::ceil(half / pitch) as i64;
        self.axes
            .iter()
            .map(|t| {
                (-n..=n)
                    .map(|j| {
                        let x = j as f64 * pitch;
                        (1.0 + x * x) * t.inverse_transform(x).norm()
                    })
                    .fold(0.0, f64::max)
            })
            .product()
    }

    /// Analytic bound `Π_i (L_i + 1/(π² δ_i)) ≥ sup Π_i (1 + ξ_i²)|φ̌(ξ)|`.
    pub fn admissibility_bound(&self) -> f64 {
        self.axes
            .iter()
            .map(|t| t.admissibility_bound().unwrap_or(f64::INFINITY))
            .product()
    }
}

/// `f = Σ_j c_j · φ̌_j` on the internal dual space, each `φ_j` a [`Cutoff`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleFunction {
    m: usize,
    terms: Vec<(Complex64, Cutoff)>,
}

impl AdmissibleFunction {
    pub fn zero(m: usize) -> Self {
        Self {
            m,
            terms: Vec::new(),
        }
    }

    pub fn from_cutoff(c: Cutoff) -> Self {
        Self {
            m: c.dim(),
            terms: vec![(Complex64::new(1.0, 0.0), c)],
        }
    }

    /// `f = ĝ` for a trapezoid profile `g` with positive margins.
    pub fn transform_of(g: &InternalProfile) -> Result<Self> {
        match &g.kind {
            ProfileKind::Trapezoid(ax) if ax.iter().all(|t| t.delta > 0.0) => Ok(
                Self::from_cutoff(Cutoff::new(ax.iter().map(|t| t.reflected()).collect())?),
            ),
            _ => Err(Error::NoDecay(String::from(
                "only trapezoids with positive margins are strongly admissible",
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn terms(&self) -> &[(Complex64, Cutoff)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(c, _)| *c == ZERO)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            m: self.m,
            terms: self
                .terms
                .iter()
                .map(|(w, g)| (*w * c, g.clone()))
                .collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        check_dim(self.m, other.m)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self { m: self.m, terms })
    }

    pub fn value(&self, y: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(c, g)| *c * g.inverse_transform(y))
            .sum()
    }

    pub fn admissibility_grid(&self, half: f64, pitch: f64) -> f64 {
        self.terms
            .iter()
            .map(|(c, g)| c.norm() * g.admissibility_grid(half, pitch))
            .sum()
    }

    pub fn admissibility_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|(c, g)| c.norm() * g.admissibility_bound())
            .sum()
    }

    /// `∫ f(y) ĥ(y − κ) dy`, evaluated in closed form as
    /// `Σ_j c_j ∫ φ_j(s) h(s) e^{2πiκ·s} ds`.
    pub fn pairing(&self, h: &InternalProfile, kappa: &[f64]) -> Complex64 {
        let terms = h.terms();
        let mut total = ZERO;
        for (c, g) in &self.terms {
            for t in &terms {
                let mut v = *c * t.weight;
                for i in 0..self.m {
                    v *= t.factors[i].pair_with(&g.axes[i], kappa[i]);
                }
                total += v;
            }
        }
        total
    }

    fn value_radius(&self, t: f64) -> Option<Vec<f64>> {
        let s: Vec<(f64, Vec<AxisEnv>)> = self
            .terms
            .iter()
            .map(|(c, g)| {
                (
                    c.norm(),
                    g.axes
                        .iter()
                        .map(|a| AxisEnv::Decay(PiecewiseQuadratic::product(a, None)))
                        .collect(),
                )
            })
            .collect();
        tensor_radius(&s, self.m, t)
    }

    fn pairing_radius(&self, h: &InternalProfile, t: f64) -> Option<Vec<f64>> {
        let mut s = Vec::new();
        for (c, g) in &self.terms {
            for term in h.terms() {
                let envs = (0..self.m)
                    .map(|i| term.factors[i].pair_envelope(Some(&g.axes[i])))
                    .collect();
                s.push((c.norm() * term.weight.norm(), envs));
            }
        }
        tensor_radius(&s, self.m, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MotifKind {
    /// Point mass at `(k, k*)`.
    AtomAtom,
    /// `δ_k ⊗ ĥ(· − k*)`.
    AtomFiber(InternalProfile),
    /// `g(· − k) ⊗ ĥ(· − k*)` with `g` a tensor trapezoid density on the
    /// physical dual space.
    DensityFiber {
        shape: Vec<Trapezoid>,
        fiber: InternalProfile,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotifComponent {
    pub k: Vec<f64>,
    pub kstar: Vec<f64>,
    pub weight: Complex64,
    pub kind: MotifKind,
}

impl MotifComponent {
    pub fn at_origin(d: usize, m: usize, weight: Complex64, kind: MotifKind) -> Self {
        Self {
            k: vec![0.0; d],
            kstar: vec![0.0; m],
            weight,
            kind,
        }
    }

    pub fn spectral_type(&self) -> SpectralType {
        match self.kind {
            MotifKind::DensityFiber { .. } => SpectralType::AbsolutelyContinuous,
            _ => SpectralType::PurePoint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralType {
    PurePoint,
    AbsolutelyContinuous,
    SingularContinuous,
}

/// `scale · Σ_{ℓ ∈ period} T_ℓ (Σ motif)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicMeasure {
    pub period: CutProjectScheme,
    pub scale: f64,
    pub motif: Vec<MotifComponent>,
}

impl PeriodicMeasure {
    pub fn new(period: CutProjectScheme, scale: f64, motif: Vec<MotifComponent>) -> Result<Self> {
        let (d, m) = (period.d(), period.m());
        for c in &motif {
            check_dim(d, c.k.len())?;
            check_dim(m, c.kstar.len())?;
            match &c.kind {
                MotifKind::AtomAtom => {}
                MotifKind::AtomFiber(h) => check_dim(m, h.dim())?,
                MotifKind::DensityFiber { shape, fiber } => {
                    check_dim(d, shape.len())?;
                    check_dim(m, fiber.dim())?;
                }
            }
        }
        if !scale.is_finite() {
            return invalid("scale must be finite");
        }
        Ok(Self {
            period,
            scale,
            motif,
        })
    }

    pub fn d(&self) -> usize {
        self.period.d()
    }

    pub fn m(&self) -> usize {
        self.period.m()
    }

    /// Translates of component `c` with physical part in `query` and internal
    /// part in `internal`.
    fn translates(
        &self,
        c: &MotifComponent,
        query: &BoxN,
        internal: &BoxN,
        budget: u64,
    ) -> Result<Vec<LatticePointRef>> {
        if query.is_empty() || internal.is_empty() {
            return Ok(Vec::new());
        }
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<f64>>();
        let pts = self.period.strip_points(
            &query.translate(&neg(&c.k)),
            &internal.translate(&neg(&c.kstar)),
            budget,
        )?;
        Ok(pts
            .into_iter()
            .map(|p| LatticePointRef {
                z: p.z,
                x: p.x.iter().zip(&c.k).map(|(a, b)| a + b).collect(),
                xstar: p.xstar.iter().zip(&c.kstar).map(|(a, b)| a + b).collect(),
            })
            .collect())
    }
}

/// `η̂` for `η = Σ_{ℓ ∈ L} h(ℓ*) δ_ℓ`: period `L⁰`, scale `dens(L)` and a
/// single fiber `ĥ` at the origin.
pub fn eta_hat(cps: &CutProjectScheme, h: &InternalProfile) -> Result<PeriodicMeasure> {
    check_dim(cps.m(), h.dim())?;
    let dual = cps.dual_cps()?;
    let comp = MotifComponent::at_origin(
        cps.d(),
        cps.m(),
        Complex64::new(1.0, 0.0),
        MotifKind::AtomFiber(h.clone()),
    );
    PeriodicMeasure::new(dual, cps.lattice().density(), vec![comp])
}

/// Spectral projector: keeps the motif components of the given type.
pub fn p_alpha(rho: &PeriodicMeasure, alpha: SpectralType) -> PeriodicMeasure {
    PeriodicMeasure {
        period: rho.period.clone(),
        scale: rho.scale,
        motif: rho
            .motif
            .iter()
            .filter(|c| c.spectral_type() == alpha)
            .cloned()
            .collect(),
    }
}

/// Truncation of the internal-dual integral in [`pair_fibered`].
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationSpec {
    /// Fixed half-width of the integration range; `None` grows it until the
    /// tail bound meets the tolerance.
    pub radius: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_radius: f64,
    /// Internal search radius when matching test atoms to the period lattice.
    pub search_radius: f64,
    /// Test atoms away from the period lattice contribute zero instead of
    /// raising [`Error::OffLattice`].
    pub off_lattice_zero: bool,
    pub budget: u64,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self {
            radius: None,
            rel_tol: 1e-9,
            abs_tol: 1e-13,
            max_radius: 2e6,
            search_radius: 1e4,
            off_lattice_zero: false,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// A value with a rigorous bound on quadrature plus truncation error.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberIntegral {
    pub value: Complex64,
    pub quad_err: f64,
    pub tail: f64,
    pub radius: f64,
}

impl FiberIntegral {
    pub fn error_bound(&self) -> f64 {
        self.quad_err + self.tail
    }
}

fn tail_bound(phi: &Trapezoid, f: &Factor, t: f64) -> f64 {
    let mut best = f64::INFINITY;
    for (a, p) in phi.power_bounds() {
        for (b, q) in f.power_bounds() {
            let s = p + q;
            if s > 1 {
                // |ĥ(y − κ)| ≤ env(y/2) for |y| ≥ 2|κ|
                let c = a * b * libm::pow(2.0, q as f64);
                best = best.min(2.0 * c / ((s - 1) as f64 * libm::pow(t, (s - 1) as f64)));
            }
        }
    }
    best
}

fn integrate_panels<F: FnMut(f64) -> Complex64>(f: &mut F, from: i64, to: i64) -> (Complex64, f64) {
    let mut v = ZERO;
    let mut e = 0.0;
    for j in from..to {
        let (a, b) = (j as f64, (j + 1) as f64);
        let est = gk15(f, a, b);
        let (pv, pe) = if est.1 <= f64::max(1e-16, 1e-12 * est.0.norm()) {
            est
        } else {
            adaptive(f, a, b, 1e-16, 1e-12)
        };
        v += pv;
        e += pe;
    }
    (v, e)
}

/// `∫ φ̌_i(y) · f̂(y − κ) dy` on one axis.
fn axis_integral(
    phi: &Trapezoid,
    f: &Factor,
    kappa: f64,
    rel: f64,
    spec: &TruncationSpec,
) -> Result<FiberIntegral> {
    let mut g = |y: f64| phi.inverse_transform(y) * f.transform(y - kappa);
    let floor = libm::ceil(2.0 * kappa.abs() + 1.0);
    let mut t = match spec.radius {
        Some(r) => libm::ceil(r).max(floor),
        None => floor.max(64.0),
    };
    let (mut v, mut e) = integrate_panels(&mut g, -(t as i64), t as i64);
    loop {
        let target = f64::max(spec.abs_tol, rel * v.norm());
        let tail = tail_bound(phi, f, t);
        if tail <= target {
            return Ok(FiberIntegral {
                value: v,
                quad_err: e,
                tail,
                radius: t,
            });
        }
        if spec.radius.is_some() || t >= spec.max_radius {
            return Err(Error::Truncation { tail, tol: target });
        }
        let grow = libm::sqrt(tail / target) * 1.1;
        let next = libm::ceil(t * grow.clamp(1.5, 64.0)).min(spec.max_radius.max(t + 1.0));
        let (lv, le) = integrate_panels(&mut g, -(next as i64), -(t as i64));
        let (rv, re) = integrate_panels(&mut g, t as i64, next as i64);
        v += lv + rv;
        e += le + re;
        t = next;
    }
}

/// `∫ φ̌(y) ĥ(y − κ) dy` over the internal dual space by quadrature, with a
/// rigorous error bound.
pub fn fiber_quadrature(
    cutoff: &Cutoff,
    h: &InternalProfile,
    kappa: &[f64],
    spec: &TruncationSpec,
) -> Result<FiberIntegral> {
    let m = cutoff.dim();
    check_dim(m, h.dim())?;
    check_dim(m, kappa.len())?;
    let rel = spec.rel_tol / (2.0 * m as f64);
    let mut out = FiberIntegral {
        value: ZERO,
        quad_err: 0.0,
        tail: 0.0,
        radius: 0.0,
    };
    for term in h.terms() {
        let mut value = term.weight;
        let mut exact = term.weight.norm();
        let mut upper = term.weight.norm();
        let mut tail_only = term.weight.norm();
        for i in 0..m {
            let r = axis_integral(&cutoff.axes[i], &term.factors[i], kappa[i], rel, spec)?;
            value *= r.value;
            exact *= r.value.norm();
            upper *= r.value.norm() + r.error_bound();
            tail_only *= r.value.norm() + r.tail;
            out.radius = out.radius.max(r.radius);
        }
        out.value += value;
        let total = upper - exact;
        let tail = (tail_only - exact).min(total);
        out.tail += tail;
        out.quad_err += total - tail;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub value: Complex64,
    pub error_bound: f64,
    pub tail: f64,
    pub max_radius: f64,
}

/// `ρ(ψ ⊗ φ̌)` for an atomic test functional `ψ = Σ ψ_k δ_k`.
pub fn pair_fibered(
    rho: &PeriodicMeasure,
    psi: &WeightedComb,
    cutoff: &Cutoff,
    spec: &TruncationSpec,
) -> Result<PairReport> {
    check_dim(rho.d(), psi.dim())?;
    check_dim(rho.m(), cutoff.dim())?;
    let m = rho.m();
    let internal = BoxN::cube(m, spec.search_radius);
    let atomic = rho
        .motif
        .iter()
        .any(|c| c.spectral_type() == SpectralType::PurePoint);
    let mut rep = PairReport {
        value: ZERO,
        error_bound: 0.0,
        tail: 0.0,
        max_radius: 0.0,
    };
    for (i, atom) in psi.atoms().iter().enumerate() {
        if atom.weight == ZERO {
            continue;
        }
        let near = BoxN {
            lo: atom.position.clone(),
            hi: atom.position.clone(),
        }
        .expand(LIFT_TOL);
        let mut hit = false;
        for c in &rho.motif {
            if c.spectral_type() != SpectralType::PurePoint {
                continue;
            }
            for p in rho.translates(c, &near, &internal, spec.budget)? {
                hit = true;
                let coef = atom.weight * c.weight * rho.scale;
                match &c.kind {
                    MotifKind::AtomAtom => rep.value += coef * cutoff.inverse_transform(&p.xstar),
                    MotifKind::AtomFiber(h) => {
                        let r = fiber_quadrature(cutoff, h, &p.xstar, spec)?;
                        rep.value += coef * r.value;
                        rep.error_bound += coef.norm() * r.error_bound();
                        rep.tail += coef.norm() * r.tail;
                        rep.max_radius = rep.max_radius.max(r.radius);
                    }
                    MotifKind::DensityFiber { .. } => {}
                }
            }
        }
        if atomic && !hit && !spec.off_lattice_zero {
            return Err(Error::OffLattice { index: i });
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub k: Vec<f64>,
    pub kstar: Vec<f64>,
    /// Integer coordinates in the dual lattice.
    pub z: Vec<i64>,
    pub amplitude: Complex64,
}

impl Peak {
    pub fn intensity(&self) -> f64 {
        self.amplitude.norm_sqr()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMeta {
    pub threshold: f64,
    pub scale: f64,
    pub sign: f64,
    /// Half-widths of the internal box searched for peaks.
    pub internal_radius: Vec<f64>,
    pub candidates: usize,
    pub window: Window,
    pub profile: InternalProfile,
    pub cutoff: Cutoff,
    pub query: BoxN,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffractionSpectrum {
    pub peaks: Vec<Peak>,
    pub meta: SpectrumMeta,
}

/// Dual-lattice points that may carry a peak above the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakCandidates {
    pub points: Vec<LatticePointRef>,
    pub meta: SpectrumMeta,
}

/// Checks the inputs of [`diffraction`] and enumerates candidate peaks.
pub fn peak_candidates(
    cps: &CutProjectScheme,
    w: &Window,
    h: &InternalProfile,
    query: &BoxN,
    threshold: f64,
    cutoff: &Cutoff,
    budget: u64,
) -> Result<PeakCandidates> {
    let (d, m) = (cps.d(), cps.m());
    check_dim(m, w.m)?;
    check_dim(m, h.dim())?;
    check_dim(m, cutoff.dim())?;
    check_dim(d, query.dim())?;
    if !(threshold > 0.0 && threshold.is_finite()) {
        return invalid("threshold must be positive");
    }
    if !cutoff.covers(w) {
        return Err(Error::PlateauTooSmall);
    }
    if !h.supported_in(w) {
        return invalid("profile is not supported in the window");
    }
    let scale = cps.lattice().density();
    let envs: Vec<AxisEnv> = match h.terms().as_slice() {
        [t] if t.factors.iter().all(|f| matches!(f, Factor::Trap(_))) => {
            t.factors.iter().map(|f| f.pair_envelope(None)).collect()
        }
        _ => {
            return Err(Error::NoDecay(String::from(
                "atomic profiles have non-decaying transforms",
            )))
        }
    };
    let radius = tensor_radius(&[(1.0, envs)], m, threshold / (10.0 * scale))
        .ok_or_else(|| Error::NoDecay(String::from("profile transform does not decay")))?;
    let internal = BoxN {
        lo: radius.iter().map(|r| -r).collect(),
        hi: radius.clone(),
    };
    let points = if query.is_empty() {
        Vec::new()
    } else {
        cps.dual_cps()?.strip_points(query, &internal, budget)?
    };
    let meta = SpectrumMeta {
        threshold,
        scale,
        sign: SIGN,
        internal_radius: radius,
        candidates: points.len(),
        window: w.clone(),
        profile: h.clone(),
        cutoff: cutoff.clone(),
        query: query.clone(),
    };
    Ok(PeakCandidates { points, meta })
}

/// `A(k) = scale · ĥ(SIGN · k*)`.
pub fn closed_form_amplitude(scale: f64, h: &InternalProfile, kstar: &[f64]) -> Complex64 {
    let xi: Vec<f64> = kstar.iter().map(|v| SIGN * v).collect();
    h.transform(&xi) * scale
}

/// Keeps peaks with `|A| ≥ threshold`, ordered lexicographically by `k`.
pub fn assemble_spectrum(cands: PeakCandidates, amplitudes: Vec<Complex64>) -> DiffractionSpectrum {
    let thr = cands.meta.threshold;
    let mut peaks: Vec<Peak> = cands
        .points
        .into_iter()
        .zip(amplitudes)
        .filter(|(_, a)| a.norm() >= thr)
        .map(|(p, a)| Peak {
            k: p.x,
            kstar: p.xstar,
            z: p.z,
            amplitude: a,
        })
        .collect();
    peaks.sort_by(|a, b| lex_cmp(&a.k, &b.k).then_with(|| a.z.cmp(&b.z)));
    DiffractionSpectrum {
        peaks,
        meta: cands.meta,
    }
}

/// Bragg peaks of the comb `Σ_{x ∈ Λ(w)} h(x*) δ_x` with `k ∈ query`.
pub fn diffraction(
    cps: &CutProjectScheme,
    w: &Window,
    h: &InternalProfile,
    query: &BoxN,
    threshold: f64,
    cutoff: &Cutoff,
    budget: u64,
) -> Result<DiffractionSpectrum> {
    let cands = peak_candidates(cps, w, h, query, threshold, cutoff, budget)?;
    let amps = cands
        .points
        .iter()
        .map(|p| closed_form_amplitude(cands.meta.scale, h, &p.xstar))
        .collect();
    Ok(assemble_spectrum(cands, amps))
}

/// Patch average `(2R)^{−d} Σ_{x ∈ Λ(w), ‖x‖∞ ≤ R} h(x*) e^{−2πi k·x}`.
pub fn oracle_amplitude(
    cps: &CutProjectScheme,
    w: &Window,
    h: &InternalProfile,
    k: &[f64],
    r: f64,
    budget: u64,
) -> Result<Complex64> {
    check_dim(cps.d(), k.len())?;
    if !(r > 0.0 && r.is_finite()) {
        return invalid("patch radius must be positive");
    }
    let pts = cps.model_set(w, &BoxN::cube(cps.d(), r), budget)?;
    let sum: Complex64 = pts
        .iter()
        .map(|p| h.value(&p.xstar) * cis(-2.0 * PI * dot(k, &p.x)))
        .sum();
    Ok(sum / libm::pow(2.0 * r, cps.d() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectOptions {
    /// Internal half-widths of the truncated measure; `None` derives them from
    /// the decay of `f` so that omitted atoms are below `min_weight`.
    pub internal_radius: Option<Vec<f64>>,
    /// Atoms and density terms with smaller modulus are dropped.
    pub min_weight: f64,
    pub budget: u64,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        Self {
            internal_radius: None,
            min_weight: 1e-12,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedAtom {
    pub component: usize,
    pub k: Vec<f64>,
    pub kstar: Vec<f64>,
    pub z: Vec<i64>,
    pub weight: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityTerm {
    pub k: Vec<f64>,
    pub kstar: Vec<f64>,
    pub z: Vec<i64>,
    pub coefficient: Complex64,
}

/// `Σ coefficient · shape(x − k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedDensity {
    pub component: usize,
    pub shape: Vec<Trapezoid>,
    pub terms: Vec<DensityTerm>,
}

impl ProjectedDensity {
    pub fn value(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                t.coefficient
                    * self
                        .shape
                        .iter()
                        .zip(x.iter().zip(&t.k))
                        .map(|(s, (a, b))| s.value(a - b))
                        .product::<f64>()
            })
            .sum()
    }
}

/// Result of [`project`]: atoms from point-like motif components and
/// densities from the others, each tagged with its motif component.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub d: usize,
    pub atoms: Vec<ProjectedAtom>,
    pub densities: Vec<ProjectedDensity>,
    pub internal_radius: Vec<f64>,
}

impl Projection {
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.densities.iter().all(|d| d.terms.is_empty())
    }

    pub fn atomic(&self) -> Projection {
        Projection {
            densities: Vec::new(),
            ..self.clone()
        }
    }

    pub fn continuous(&self) -> Projection {
        Projection {
            atoms: Vec::new(),
            ..self.clone()
        }
    }

    /// Atoms as a comb; coinciding positions from different components merge.
    pub fn comb(&self) -> Result<WeightedComb> {
        let mut out = WeightedComb::empty(self.d);
        let mut comps: Vec<usize> = self.atoms.iter().map(|a| a.component).collect();
        comps.sort_unstable();
        comps.dedup();
        for c in comps {
            let atoms = self
                .atoms
                .iter()
                .filter(|a| a.component == c)
                .map(|a| Atom {
                    position: a.k.clone(),
                    weight: a.weight,
                })
                .collect();
            out = out.sum(&WeightedComb::new(self.d, atoms)?)?;
        }
        Ok(out)
    }

    pub fn density_at(&self, x: &[f64]) -> Complex64 {
        self.densities.iter().map(|d| d.value(x)).sum()
    }
}

/// `(ρ)_f = ρ(· ⊗ f)` restricted to `query`.
pub fn project(
    rho: &PeriodicMeasure,
    f: &AdmissibleFunction,
    query: &BoxN,
    opts: &ProjectOptions,
) -> Result<Projection> {
    let (d, m) = (rho.d(), rho.m());
    check_dim(m, f.dim())?;
    check_dim(d, query.dim())?;
    let mut out = Projection {
        d,
        atoms: Vec::new(),
        densities: Vec::new(),
        internal_radius: vec![0.0; m],
    };
    if f.is_zero() || rho.scale == 0.0 {
        return Ok(out);
    }
    let radius = match &opts.internal_radius {
        Some(r) => {
            check_dim(m, r.len())?;
            r.clone()
        }
        None => {
            if !(opts.min_weight > 0.0) {
                return invalid("min_weight must be positive when no internal radius is given");
            }
            let mut r = vec![0.0; m];
            for c in &rho.motif {
                let t = opts.min_weight / (rho.scale.abs() * c.weight.norm());
                if !t.is_finite() {
                    continue;
                }
                let rc = match &c.kind {
                    MotifKind::AtomAtom => f.value_radius(t),
                    MotifKind::AtomFiber(h) | MotifKind::DensityFiber { fiber: h, .. } => {
                        f.pairing_radius(h, t)
                    }
                }
                .ok_or_else(|| {
                    Error::NoDecay(String::from(
                        "pairing does not decay; give an internal radius",
                    ))
                })?;
                for i in 0..m {
                    r[i] = f64::max(r[i], rc[i] + c.kstar[i].abs());
                }
            }
            r
        }
    };
    out.internal_radius = radius.clone();
    let internal = BoxN {
        lo: radius.iter().map(|r| -r).collect(),
        hi: radius.clone(),
    };
    for (ci, c) in rho.motif.iter().enumerate() {
        let coef = c.weight * rho.scale;
        if coef == ZERO {
            continue;
        }
        match &c.kind {
            MotifKind::AtomAtom | MotifKind::AtomFiber(_) => {
                for p in rho.translates(c, query, &internal, opts.budget)? {
                    let w = coef
                        * match &c.kind {
                            MotifKind::AtomFiber(h) => f.pairing(h, &p.xstar),
                            _ => f.value(&p.xstar),
                        };
                    if w.norm() >= opts.min_weight && w != ZERO {
                        out.atoms.push(ProjectedAtom {
                            component: ci,
                            k: p.x,
                            kstar: p.xstar,
                            z: p.z,
                            weight: w,
                        });
                    }
                }
            }
            MotifKind::DensityFiber { shape, fiber } => {
                let reach = BoxN {
                    lo: query
                        .lo
                        .iter()
                        .zip(shape)
                        .map(|(q, s)| q - s.support().1)
                        .collect(),
                    hi: query
                        .hi
                        .iter()
                        .zip(shape)
                        .map(|(q, s)| q - s.support().0)
                        .collect(),
                };
                let mut terms = Vec::new();
                for p in rho.translates(c, &reach, &internal, opts.budget)? {
                    let w = coef * f.pairing(fiber, &p.xstar);
                    if w.norm() >= opts.min_weight && w != ZERO {
                        terms.push(DensityTerm {
                            k: p.x,
                            kstar: p.xstar,
                            z: p.z,
                            coefficient: w,
                        });
                    }
                }
                terms.sort_by(|a, b| lex_cmp(&a.k, &b.k).then_with(|| a.z.cmp(&b.z)));
                out.densities.push(ProjectedDensity {
                    component: ci,
                    shape: shape.clone(),
                    terms,
                });
            }
        }
    }
    out.atoms.sort_by(|a, b| {
        lex_cmp(&a.k, &b.k)
            .then_with(|| a.component.cmp(&b.component))
            .then_with(|| a.z.cmp(&b.z))
    });
    Ok(out)
}

/// `C = Σ_{n ∈ Z^m} sup_{z ∈ n + [−½, ½]^m} Π_i 1/(1 + z_i²)` in per-axis
/// product form.
#[derive(Debug, Clone, PartialEq)]
pub struct F2Constant {
    /// Truncated one-dimensional sum.
    pub per_axis: f64,
    /// Upper bound used for `C` (truncated sum plus tail, to the power `m`).
    pub value: f64,
    /// `value − per_axis^m`.
    pub tail_bound: f64,
    pub terms: u64,
}

pub fn f2_constant(m: usize, tol: f64) -> Result<F2Constant> {
    if m == 0 || !(tol > 0.0) {
        return invalid("f2_constant needs m ≥ 1 and tol > 0");
    }
    let mut n: u64 = 1024;
    loop {
        // Σ_{j>n} 1/(1+(j−½)²) ≤ ∫_n^∞ dx/(1+(x−½)²)
        let tail_axis = 2.0 * (PI / 2.0 - libm::atan(n as f64 - 0.5));
        let mut s = 0.0;
        for j in (1..=n).rev() {
            let x = j as f64 - 0.5;
            s += 1.0 / (1.0 + x * x);
        }
        let per_axis = 1.0 + 2.0 * s;
        let upper = libm::pow(per_axis + tail_axis, m as f64);
        let tail = upper - libm::pow(per_axis, m as f64);
        if tail < tol || n >= 1 << 30 {
            return Ok(F2Constant {
                per_axis,
                value: upper,
                tail_bound: tail,
                terms: n,
            });
        }
        n *= 4;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormBoundOptions {
    /// Internal half-widths of the truncated measure `ρ_R` used on both sides.
    pub internal_radius: Vec<f64>,
    /// Region in which `‖(ρ_R)_f‖_K` is evaluated.
    pub eval_region: BoxN,
    /// Sup norm of the test function on the compact factor (1 when absent).
    pub phi_sup: f64,
    pub grid_half_width: f64,
    pub grid_pitch: f64,
    pub budget: u64,
}

impl NormBoundOptions {
    pub fn new(internal_radius: Vec<f64>, eval_region: BoxN) -> Self {
        Self {
            internal_radius,
            eval_region,
            phi_sup: 1.0,
            grid_half_width: 50.0,
            grid_pitch: 1e-3,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormBoundReport {
    pub left: f64,
    pub right: f64,
    pub constant: F2Constant,
    /// Grid sup of `Π(1 + ξ_i²)|f(ξ)|`.
    pub admissibility: f64,
    pub admissibility_bound: f64,
    /// Lower estimate of `‖ρ_R‖` on `K₁ × [−½, ½]^m` at the maximising translate.
    pub rho_norm: f64,
    pub translate: Vec<f64>,
    pub cell: Vec<i64>,
    pub ok: bool,
}

fn cell_mass(f: &Factor, kappa: f64, n: i64) -> f64 {
    let mut g = |y: f64| Complex64::new(f.transform(y - kappa).norm(), 0.0);
    let lo = n as f64 - 0.5;
    let mut total = 0.0;
    for j in 0..4 {
        let a = lo + 0.25 * j as f64;
        total += adaptive(&mut g, a, a + 0.25, 1e-15, 1e-11).0.re;
    }
    total
}

/// Compares `‖(ρ)_f‖_K` with `C · ‖φ‖∞ · adm(f) · ‖ρ‖_{K₁ × [−½,½]^m}`, both
/// for the truncation `ρ_R`.
pub fn norm_bound_check(
    rho: &PeriodicMeasure,
    f: &AdmissibleFunction,
    k_box: &BoxN,
    k1_box: &BoxN,
    opts: &NormBoundOptions,
) -> Result<NormBoundReport> {
    let (d, m) = (rho.d(), rho.m());
    check_dim(d, k_box.dim())?;
    check_dim(d, k1_box.dim())?;
    if (0..d).any(|i| !(k1_box.lo[i] < k_box.lo[i] && k_box.hi[i] < k1_box.hi[i])) {
        return invalid("K must lie in the interior of K1");
    }
    for c in &rho.motif {
        match &c.kind {
            MotifKind::DensityFiber { .. } => {
                return invalid("norm bound check takes atomic motif components only")
            }
            MotifKind::AtomFiber(h) if matches!(h.kind, ProfileKind::FiniteAtomic(_)) => {
                return invalid("norm bound check needs box or trapezoid fibers")
            }
            _ => {}
        }
    }
    let constant = f2_constant(m, 1e-6)?;
    let admissibility = f.admissibility_grid(opts.grid_half_width, opts.grid_pitch);
    let popts = ProjectOptions {
        internal_radius: Some(opts.internal_radius.clone()),
        min_weight: 0.0,
        budget: opts.budget,
    };
    let proj = project(rho, f, &opts.eval_region, &popts)?;
    let comb = proj.comb()?;
    let (left, t) = a_norm_witness(&comb, k_box, &opts.eval_region)?;

    // cells around the heaviest atoms in K + t, plus the central one
    let kt = k_box.translate(&t);
    let mut heavy: Vec<&ProjectedAtom> = proj
        .atoms
        .iter()
        .filter(|a| kt.contains_tol(&a.k, BOX_TOL))
        .collect();
    heavy.sort_by(|a, b| b.weight.norm().total_cmp(&a.weight.norm()));
    let mut cells: Vec<Vec<i64>> = heavy
        .iter()
        .take(16)
        .map(|a| a.kstar.iter().map(|v| libm::round(*v) as i64).collect())
        .collect();
    cells.push(vec![0; m]);
    cells.sort();
    cells.dedup();

    let internal = BoxN {
        lo: opts.internal_radius.iter().map(|r| -r).collect(),
        hi: opts.internal_radius.clone(),
    };
    let k1t = k1_box.translate(&t);
    let mut strip = Vec::new();
    for c in &rho.motif {
        for p in rho.translates(c, &k1t, &internal, opts.budget)? {
            strip.push((c, p));
        }
    }
    let mut rho_norm = 0.0;
    let mut best_cell = cells[0].clone();
    for n in &cells {
        let mut mass = 0.0;
        for (c, p) in &strip {
            let w = (c.weight * rho.scale).norm();
            mass += match &c.kind {
                MotifKind::AtomAtom => {
                    if p.xstar
                        .iter()
                        .zip(n)
                        .all(|(y, ni)| (y - *ni as f64).abs() <= 0.5)
                    {
                        w
                    } else {
                        0.0
                    }
                }
                MotifKind::AtomFiber(h) => {
                    let term = &h.terms()[0];
                    w * term.weight.norm()
                        * (0..m)
                            .map(|i| cell_mass(&term.factors[i], p.xstar[i], n[i]))
                            .product::<f64>()
                }
                MotifKind::DensityFiber { .. } => 0.0,
            };
        }
        if mass > rho_norm {
            rho_norm = mass;
            best_cell = n.clone();
        }
    }
    let right = constant.value * opts.phi_sup * admissibility * rho_norm;
    Ok(NormBoundReport {
        left,
        right,
        constant,
        admissibility,
        admissibility_bound: f.admissibility_bound(),
        rho_norm,
        translate: t,
        cell: best_cell,
        ok: left <= right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GOLDEN;

    fn fib() -> (CutProjectScheme, Window) {
        (
            CutProjectScheme::fibonacci(),
            Window::from_box(BoxN::interval(0.0, 1.0)),
        )
    }

    fn unit_box() -> InternalProfile {
        InternalProfile::indicator(BoxN::interval(0.0, 1.0)).unwrap()
    }

    fn c1(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn eta_hat_of_box_profile() {
        let (cps, _) = fib();
        let rho = eta_hat(&cps, &unit_box()).unwrap();
        assert!((rho.scale - 1.0 / libm::sqrt(5.0)).abs() < 1e-15);
        let MotifKind::AtomFiber(h) = &rho.motif[0].kind else {
            panic!()
        };
        assert!((h.transform(&[0.0]).re - 1.0).abs() < 1e-15);
        assert!((h.transform(&[0.5]).norm() - 2.0 / PI).abs() < 1e-15);
        assert_eq!(p_alpha(&rho, SpectralType::PurePoint), rho);
        assert!(p_alpha(&rho, SpectralType::AbsolutelyContinuous)
            .motif
            .is_empty());
    }

    #[test]
    fn profile_transforms_at_zero() {
        let t = InternalProfile::trapezoid(vec![
            Trapezoid::new(0.1, 0.3, 0.05).unwrap(),
            Trapezoid::new(-1.0, 1.0, 0.5).unwrap(),
        ])
        .unwrap();
        assert!((t.integral().re - 0.25 * 2.5).abs() < 1e-12);
        let a = InternalProfile::finite_atomic(
            1,
            vec![(vec![0.2], c1(2.0)), (vec![0.7], Complex64::new(0.0, -1.0))],
        )
        .unwrap();
        assert!((a.integral() - Complex64::new(2.0, -1.0)).norm() < 1e-12);
        let b = InternalProfile::indicator(BoxN::new(vec![0.0, -1.0], vec![0.5, 2.0]).unwrap())
            .unwrap();
        assert!((b.integral().re - 1.5).abs() < 1e-12);
    }

    #[test]
    fn cutoff_transform_normalisation() {
        // ∫ φ̌(ξ) e^{−πε²ξ²} dξ = (φ ∗ g_ε)(0), which equals φ(0) when φ is
        // affine on a neighbourhood of 0 much wider than ε
        let eps: f64 = 0.01;
        for (t, phi0) in [
            (Trapezoid::new(-0.4, 0.6, 0.1).unwrap(), 1.0),
            (Trapezoid::new(0.2, 0.9, 0.4).unwrap(), 0.5),
            (Trapezoid::new(0.3, 1.0, 0.1).unwrap(), 0.0),
        ] {
            let c = Cutoff::new(vec![t]).unwrap();
            assert_eq!(c.value(&[0.0]), phi0);
            let mut g = |x: f64| c.inverse_transform(&[x]) * libm::exp(-PI * eps * eps * x * x);
            let (v, _) = integrate_panels(&mut g, -900, 900);
            assert!((v.re - phi0).abs() < 1e-10 && v.im.abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn cutoff_plateau_and_admissibility() {
        let (_, w) = fib();
        let c = Cutoff::around(&w, &[0.1]).unwrap();
        assert!(c.covers(&w));
        for i in 0..=100 {
            assert_eq!(c.value(&[i as f64 / 100.0]), 1.0);
        }
        let grid = c.admissibility_grid(50.0, 1e-3);
        assert!(grid.is_finite() && grid <= c.admissibility_bound());
        assert!(Cutoff::new(vec![Trapezoid::interval(0.0, 1.0).unwrap()]).is_err());
    }

    /// Sign pinning: a non-even profile at three non-symmetric Bragg peaks.
    /// Recorded values (R = 2000):
    ///   k = 0.7236 (k* = 0.2764):  oracle 0.1438+0.1001i, σ=−1 0.1437+0.1000i, σ=+1 0.1437−0.1000i
    ///   k = 1.1708 (k* = −0.1708): oracle 0.1651−0.0652i, σ=−1 0.1651−0.0651i, σ=+1 0.1651+0.0651i
    ///   k = 1.8944 (k* = 0.1056):  oracle 0.1736+0.0411i, σ=−1 0.1735+0.0410i, σ=+1 0.1735−0.0410i
    #[test]
    fn sign_pinning_against_oracle() {
        let (cps, w) = fib();
        let h = InternalProfile::trapezoid(vec![Trapezoid::new(0.2, 0.5, 0.1).unwrap()]).unwrap();
        let dual = cps.dual_cps().unwrap();
        let mut pts = dual
            .strip_points(
                &BoxN::interval(0.5, 3.0),
                &BoxN::interval(-2.0, 2.0),
                DEFAULT_BUDGET,
            )
            .unwrap();
        let scale = cps.lattice().density();
        pts.sort_by(|a, b| {
            h.transform(&b.xstar)
                .norm()
                .total_cmp(&h.transform(&a.xstar).norm())
        });
        let mut chosen: Vec<&LatticePointRef> = pts.iter().take(3).collect();
        chosen.sort_by(|a, b| a.x[0].total_cmp(&b.x[0]));
        for p in chosen {
            let oracle = oracle_amplitude(&cps, &w, &h, &p.x, 2000.0, DEFAULT_BUDGET).unwrap();
            let minus = h.transform(&[-p.xstar[0]]) * scale;
            let plus = h.transform(&[p.xstar[0]]) * scale;
            assert!(
                (oracle - minus).norm() < 1e-3,
                "k={} oracle={oracle} minus={minus}",
                p.x[0]
            );
            assert!(
                (oracle - plus).norm() > 0.02,
                "k={} oracle={oracle} plus={plus}",
                p.x[0]
            );
            assert_eq!(closed_form_amplitude(scale, &h, &p.xstar), minus);
        }
    }

    #[test]
    fn diffraction_examples() {
        let (cps, w) = fib();
        let cut = Cutoff::around(&w, &[0.1]).unwrap();
        let s = diffraction(
            &cps,
            &w,
            &unit_box(),
            &BoxN::interval(-5.0, 5.0),
            0.01,
            &cut,
            DEFAULT_BUDGET,
        )
        .unwrap();
        let zero = s.peaks.iter().find(|p| p.k[0] == 0.0).unwrap();
        assert!((zero.amplitude.re - 1.0 / libm::sqrt(5.0)).abs() < 1e-15);
        assert!(s.peaks.iter().all(|p| p.amplitude.norm() >= 0.01));
        assert!(s.peaks.windows(2).all(|w| w[0].k[0] < w[1].k[0]));
        // every peak position is the physical part of a dual-lattice point
        let dual = cps.dual_cps().unwrap();
        for p in &s.peaks {
            assert_eq!(dual.physical(&p.z).unwrap(), p.k);
        }
        assert!(s.peaks.iter().all(|p| (p.k[0] - 0.1).abs() > 1e-3));
        // nothing above the maximal amplitude
        let s = diffraction(
            &cps,
            &w,
            &unit_box(),
            &BoxN::interval(-5.0, 5.0),
            0.5,
            &cut,
            DEFAULT_BUDGET,
        )
        .unwrap();
        assert!(s.peaks.is_empty());
        let narrow = Cutoff::new(vec![Trapezoid::new(0.1, 1.0, 0.1).unwrap()]).unwrap();
        assert_eq!(
            diffraction(
                &cps,
                &w,
                &unit_box(),
                &BoxN::interval(-5.0, 5.0),
                0.01,
                &narrow,
                DEFAULT_BUDGET
            ),
            Err(Error::PlateauTooSmall)
        );
        let atomic = InternalProfile::finite_atomic(1, vec![(vec![0.5], c1(1.0))]).unwrap();
        assert!(matches!(
            diffraction(
                &cps,
                &w,
                &atomic,
                &BoxN::interval(-5.0, 5.0),
                0.01,
                &cut,
                DEFAULT_BUDGET
            ),
            Err(Error::NoDecay(_))
        ));
    }

    #[test]
    fn oracle_examples() {
        let (cps, w) = fib();
        let h = unit_box();
        let a0 = oracle_amplitude(&cps, &w, &h, &[0.0], 500.0, DEFAULT_BUDGET).unwrap();
        let n = cps
            .model_set(&w, &BoxN::interval(-500.0, 500.0), DEFAULT_BUDGET)
            .unwrap()
            .len();
        assert!((a0.re - n as f64 / 1000.0).abs() < 1e-12);
        // k from the dual vector z = (1, 1): k = 1 + τ⁻¹... any small vector works
        let dual = cps.dual_cps().unwrap();
        let k = dual.physical(&[1, 1]).unwrap();
        let exact =
            closed_form_amplitude(cps.lattice().density(), &h, &dual.star(&[1, 1]).unwrap());
        let e500 =
            (oracle_amplitude(&cps, &w, &h, &k, 500.0, DEFAULT_BUDGET).unwrap() - exact).norm();
        let e2000 =
            (oracle_amplitude(&cps, &w, &h, &k, 2000.0, DEFAULT_BUDGET).unwrap() - exact).norm();
        assert!(e2000 < e500, "{e500} {e2000}");
        assert!(oracle_amplitude(&cps, &w, &h, &[0.0], 0.0, DEFAULT_BUDGET).is_err());
    }

    #[test]
    fn quadrature_route_matches_closed_form() {
        let (cps, w) = fib();
        let h = unit_box();
        let rho = eta_hat(&cps, &h).unwrap();
        let spec = TruncationSpec::default();
        let s = diffraction(
            &cps,
            &w,
            &h,
            &BoxN::interval(0.0, 3.0),
            0.05,
            &Cutoff::around(&w, &[0.1]).unwrap(),
            DEFAULT_BUDGET,
        )
        .unwrap();
        for p in s.peaks.iter().take(4) {
            let psi = WeightedComb::new(
                1,
                vec![Atom {
                    position: p.k.clone(),
                    weight: c1(1.0),
                }],
            )
            .unwrap();
            let mut vals = Vec::new();
            for delta in [0.1, 0.2] {
                let cut = Cutoff::around(&w, &[delta]).unwrap();
                let r = pair_fibered(&rho, &psi, &cut, &spec).unwrap();
                assert!(r.error_bound <= 1e-9 * r.value.norm(), "{r:?}");
                assert!(
                    (r.value - p.amplitude).norm() <= 1e-8 * p.amplitude.norm(),
                    "{} {}",
                    r.value,
                    p.amplitude
                );
                vals.push(r.value);
            }
            assert!((vals[0] - vals[1]).norm() < 1e-9);
        }
    }

    #[test]
    fn pairing_off_lattice() {
        let (cps, w) = fib();
        let rho = eta_hat(&cps, &unit_box()).unwrap();
        let cut = Cutoff::around(&w, &[0.1]).unwrap();
        let psi = WeightedComb::new(
            1,
            vec![Atom {
                position: vec![0.123],
                weight: c1(1.0),
            }],
        )
        .unwrap();
        let mut spec = TruncationSpec {
            search_radius: 50.0,
            ..TruncationSpec::default()
        };
        assert_eq!(
            pair_fibered(&rho, &psi, &cut, &spec),
            Err(Error::OffLattice { index: 0 })
        );
        spec.off_lattice_zero = true;
        assert_eq!(pair_fibered(&rho, &psi, &cut, &spec).unwrap().value, ZERO);
        spec.radius = Some(10.0);
        let psi = WeightedComb::new(
            1,
            vec![Atom {
                position: vec![0.0],
                weight: c1(1.0),
            }],
        )
        .unwrap();
        assert!(matches!(
            pair_fibered(&rho, &psi, &cut, &spec),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn projection_examples() {
        let (cps, w) = fib();
        let dual = cps.dual_cps().unwrap();
        let f = AdmissibleFunction::from_cutoff(
            Cutoff::new(vec![Trapezoid::new(-0.5, 0.5, 0.3).unwrap()]).unwrap(),
        );
        let comb = PeriodicMeasure::new(
            dual.clone(),
            1.0,
            vec![MotifComponent::at_origin(
                1,
                1,
                c1(1.0),
                MotifKind::AtomAtom,
            )],
        )
        .unwrap();
        let q = BoxN::interval(-3.0, 3.0);
        let p = project(
            &comb,
            &f,
            &q,
            &ProjectOptions {
                internal_radius: Some(vec![20.0]),
                min_weight: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let pts = dual
            .strip_points(&q, &BoxN::interval(-20.0, 20.0), DEFAULT_BUDGET)
            .unwrap();
        assert_eq!(
            p.atoms.len(),
            pts.iter().filter(|x| f.value(&x.xstar) != ZERO).count()
        );
        for a in &p.atoms {
            assert_eq!(a.weight, f.value(&a.kstar));
        }
        assert!(project(
            &comb,
            &AdmissibleFunction::zero(1),
            &q,
            &ProjectOptions::default()
        )
        .unwrap()
        .is_empty());

        // diffraction = project(η̂, φ̌) peak for peak
        let h = unit_box();
        let cut = Cutoff::around(&w, &[0.1]).unwrap();
        let thr = 0.01;
        let s = diffraction(
            &cps,
            &w,
            &h,
            &BoxN::interval(-5.0, 5.0),
            thr,
            &cut,
            DEFAULT_BUDGET,
        )
        .unwrap();
        let rho = eta_hat(&cps, &h).unwrap();
        let pr = project(
            &rho,
            &AdmissibleFunction::from_cutoff(cut),
            &BoxN::interval(-5.0, 5.0),
            &ProjectOptions {
                min_weight: thr,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(pr.atoms.len(), s.peaks.len());
        for (a, pk) in pr.atoms.iter().zip(&s.peaks) {
            assert_eq!(a.z, pk.z);
            assert!((a.weight - pk.amplitude).norm() < 1e-10);
        }
    }

    fn mixed() -> PeriodicMeasure {
        let (cps, _) = fib();
        let mut rho = eta_hat(
            &cps,
            &InternalProfile::trapezoid(vec![Trapezoid::new(0.2, 0.6, 0.1).unwrap()]).unwrap(),
        )
        .unwrap();
        rho.motif.push(MotifComponent {
            k: vec![0.25],
            kstar: vec![0.1],
            weight: Complex64::new(0.5, -0.25),
            kind: MotifKind::DensityFiber {
                shape: vec![Trapezoid::new(-0.2, 0.2, 0.1).unwrap()],
                fiber: InternalProfile::trapezoid(vec![Trapezoid::new(0.0, 0.5, 0.2).unwrap()])
                    .unwrap(),
            },
        });
        rho
    }

    #[test]
    fn projectors_partition_and_commute() {
        let rho = mixed();
        let pp = p_alpha(&rho, SpectralType::PurePoint);
        let ac = p_alpha(&rho, SpectralType::AbsolutelyContinuous);
        let sc = p_alpha(&rho, SpectralType::SingularContinuous);
        let mut parts = pp.motif.clone();
        parts.extend(ac.motif.iter().cloned());
        parts.extend(sc.motif.iter().cloned());
        assert_eq!(parts, rho.motif);
        let f = AdmissibleFunction::from_cutoff(
            Cutoff::new(vec![Trapezoid::new(0.0, 1.0, 0.2).unwrap()]).unwrap(),
        );
        let q = BoxN::interval(-4.0, 4.0);
        let opts = ProjectOptions {
            min_weight: 1e-9,
            ..Default::default()
        };
        let full = project(&rho, &f, &q, &opts).unwrap();
        let ppp = project(&pp, &f, &q, &opts).unwrap();
        let pac = project(&ac, &f, &q, &opts).unwrap();
        assert!(!full.atoms.is_empty() && !full.densities[0].terms.is_empty());
        assert_eq!(ppp.atoms, full.atomic().atoms);
        assert!(ppp.densities.is_empty() && pac.atoms.is_empty());
        for x in [-1.3, 0.0, 0.4, 2.2] {
            assert!((pac.density_at(&[x]) - full.density_at(&[x])).norm() < 1e-10);
        }
    }

    #[test]
    fn projection_is_linear() {
        let rho = mixed();
        let f = AdmissibleFunction::from_cutoff(
            Cutoff::new(vec![Trapezoid::new(0.0, 1.0, 0.2).unwrap()]).unwrap(),
        );
        let g = AdmissibleFunction::from_cutoff(
            Cutoff::new(vec![Trapezoid::new(-0.3, 0.1, 0.4).unwrap()]).unwrap(),
        );
        let a = Complex64::new(0.7, 0.2);
        let q = BoxN::interval(-3.0, 3.0);
        let opts = ProjectOptions {
            internal_radius: Some(vec![15.0]),
            min_weight: 0.0,
            ..Default::default()
        };
        let pf = project(&rho, &f, &q, &opts).unwrap();
        let pg = project(&rho, &g, &q, &opts).unwrap();
        let pfg = project(&rho, &f.scaled(a).plus(&g).unwrap(), &q, &opts).unwrap();
        assert_eq!(pf.atoms.len(), pfg.atoms.len());
        for ((x, y), s) in pf.atoms.iter().zip(&pg.atoms).zip(&pfg.atoms) {
            assert!((x.weight * a + y.weight - s.weight).norm() < 1e-12);
        }
        let mut rho2 = rho.clone();
        rho2.motif.iter_mut().for_each(|c| c.weight *= a);
        let p2 = project(&rho2, &f, &q, &opts).unwrap();
        for (x, y) in pf.atoms.iter().zip(&p2.atoms) {
            assert!((x.weight * a - y.weight).norm() < 1e-12);
        }
    }

    #[test]
    fn f2_constant_value() {
        let c = f2_constant(1, 1e-6).unwrap();
        let exact = 1.0 + PI * libm::tanh(PI);
        assert!(c.tail_bound < 1e-6);
        assert!(
            (c.value - exact).abs() < 1e-6 && c.value >= exact - 1e-12,
            "{}",
            c.value
        );
        let c2 = f2_constant(2, 1e-6).unwrap();
        assert!((c2.value - exact * exact).abs() < 1e-6);
    }

    #[test]
    fn norm_bound_examples() {
        let (cps, _) = fib();
        let h = InternalProfile::trapezoid(vec![Trapezoid::new(0.2, 0.6, 0.15).unwrap()]).unwrap();
        let rho = eta_hat(&cps, &h).unwrap();
        let f = AdmissibleFunction::from_cutoff(
            Cutoff::new(vec![Trapezoid::new(0.0, 1.0, 0.1).unwrap()]).unwrap(),
        );
        let opts = NormBoundOptions::new(vec![40.0], BoxN::interval(-10.0, 10.0));
        let r = norm_bound_check(
            &rho,
            &f,
            &BoxN::interval(0.0, 1.0),
            &BoxN::interval(-0.5, 1.5),
            &opts,
        )
        .unwrap();
        assert!(r.ok && r.left > 0.0, "{r:?}");
        let zero = PeriodicMeasure::new(rho.period.clone(), 0.0, rho.motif.clone()).unwrap();
        let r = norm_bound_check(
            &zero,
            &f,
            &BoxN::interval(0.0, 1.0),
            &BoxN::interval(-0.5, 1.5),
            &opts,
        )
        .unwrap();
        assert!(r.ok && r.left == 0.0);
        assert!(norm_bound_check(
            &rho,
            &f,
            &BoxN::interval(0.0, 1.0),
            &BoxN::interval(0.0, 1.5),
            &opts
        )
        .is_err());
    }

    #[test]
    fn golden_dual_points() {
        // k·ℓ + k*·ℓ* ∈ Z for the dual of the Fibonacci lattice
        let (cps, _) = fib();
        let dual = cps.dual_cps().unwrap();
        let k = dual.lattice().point(&[2, -1]);
        let l = cps.lattice().point(&[3, 5]);
        let s = k[0] * l[0] + k[1] * l[1];
        assert!((s - libm::round(s)).abs() < 1e-12);
        assert!(GOLDEN > 1.6);
    }
}
