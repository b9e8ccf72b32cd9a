//! One-dimensional trapezoid functions, products of two of them, and Fourier
//! integrals of the resulting piecewise quadratics.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::quad::gauss_legendre10;

/// `sin(πx)/(πx)` with the removable singularity filled in.
pub fn sinc_pi(x: f64) -> f64 {
    let t = PI * x;
    if t.abs() < 1e-4 {
        let t2 = t * t;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        libm::sin(t) / t
    }
}

pub fn cis(theta: f64) -> Complex64 {
    let (s, c) = libm::sincos(theta);
    Complex64::new(c, s)
}

/// Plateau `[a, b]` with value 1, linear ramps of width `delta` on both sides.
/// `delta = 0` is the indicator of `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trapezoid {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

impl Trapezoid {
    pub fn new(a: f64, b: f64, delta: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && delta.is_finite()) || b < a || delta < 0.0 {
            return invalid("trapezoid needs finite a ≤ b and delta ≥ 0");
        }
        if b - a + delta <= 0.0 {
            return invalid("trapezoid has empty support");
        }
        Ok(Self { a, b, delta })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, 0.0)
    }

    pub fn is_box(&self) -> bool {
        self.delta == 0.0
    }

    pub fn support(&self) -> (f64, f64) {
        (self.a - self.delta, self.b + self.delta)
    }

    /// `∫ t = b − a + delta`.
    pub fn integral(&self) -> f64 {
        self.b - self.a + self.delta
    }

    pub fn reflected(&self) -> Self {
        Self {
            a: -self.b,
            b: -self.a,
            delta: self.delta,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        let (a, b, d) = (self.a, self.b, self.delta);
        if d == 0.0 {
            return if s >= a && s <= b { 1.0 } else { 0.0 };
        }
        if s <= a - d || s >= b + d {
            0.0
        } else if s < a {
            (s - (a - d)) / d
        } else if s <= b {
            1.0
        } else {
            (b + d - s) / d
        }
    }

    fn side_value(&self, s: f64, right: bool) -> f64 {
        if self.delta > 0.0 {
            return self.value(s);
        }
        let inside = if right {
            s >= self.a && s < self.b
        } else {
            s > self.a && s <= self.b
        };
        if inside {
            1.0
        } else {
            0.0
        }
    }

    fn side_slope(&self, s: f64, right: bool) -> f64 {
        let (a, b, d) = (self.a, self.b, self.delta);
        if d == 0.0 {
            return 0.0;
        }
        let within = |lo: f64, hi: f64| {
            if right {
                s >= lo && s < hi
            } else {
                s > lo && s <= hi
            }
        };
        if within(a - d, a) {
            1.0 / d
        } else if within(b, b + d) {
            -1.0 / d
        } else {
            0.0
        }
    }

    fn breakpoints(&self) -> [f64; 4] {
        [self.a - self.delta, self.a, self.b, self.b + self.delta]
    }

    /// `∫ t(s) e^{−2πiξs} ds`.
    pub fn transform(&self, xi: f64) -> Complex64 {
        let l = self.integral();
        cis(-PI * (self.a + self.b) * xi) * (l * sinc_pi(l * xi) * sinc_pi(self.delta * xi))
    }

    /// `∫ t(s) e^{+2πiξs} ds`.
    pub fn inverse_transform(&self, xi: f64) -> Complex64 {
        self.transform(xi).conj()
    }

    /// Upper bound for `|transform(ξ)|`, nonincreasing in `|ξ|`.
    pub fn envelope(&self, xi: f64) -> f64 {
        let x = xi.abs();
        let l = self.integral();
        let mut e = if x > 0.0 { l.min(1.0 / (PI * x)) } else { l };
        if self.delta > 0.0 && x > 0.0 {
            e *= (1.0f64).min(1.0 / (PI * self.delta * x));
        }
        e
    }

    /// Coefficients `(A, p)` with `envelope(ξ) ≤ A/|ξ|^p` for all `ξ ≠ 0`.
    pub fn power_bounds(&self) -> Vec<(f64, i32)> {
        let mut v = alloc::vec![(self.integral(), 0), (1.0 / PI, 1)];
        if self.delta > 0.0 {
            v.push((1.0 / (PI * PI * self.delta), 2));
        }
        v
    }

    /// `sup_ξ (1 + ξ²)|transform(ξ)|`, analytic upper bound.
    pub fn admissibility_bound(&self) -> Option<f64> {
        if self.delta > 0.0 {
            Some(self.integral() + 1.0 / (PI * PI * self.delta))
        } else {
            None
        }
    }

    /// `∫_lo^hi |t|`, exact.
    pub fn mass_on(&self, lo: f64, hi: f64) -> f64 {
        let q = PiecewiseQuadratic::product(self, None);
        q.segs
            .iter()
            .map(|s| {
                let x0 = s.x0.max(lo);
                let x1 = s.x1.min(hi);
                if x1 <= x0 {
                    return 0.0;
                }
                let f = |x: f64| {
                    let u = x - s.x0;
                    s.c[0] * u + 0.5 * s.c[1] * u * u
                };
                f(x1) - f(x0)
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QSeg {
    x0: f64,
    x1: f64,
    /// `q(s) = c0 + c1 (s − x0) + c2 (s − x0)²`
    c: [f64; 3],
}

impl QSeg {
    fn len(&self) -> f64 {
        self.x1 - self.x0
    }

    fn at(&self, u: f64) -> f64 {
        self.c[0] + u * (self.c[1] + u * self.c[2])
    }
}

/// Product of one or two trapezoids, as quadratic pieces plus the jump data
/// needed for decay bounds of its Fourier transform.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseQuadratic {
    segs: Vec<QSeg>,
    jumps: f64,
    slope_jumps: f64,
    continuous: bool,
}

impl PiecewiseQuadratic {
    pub fn product(g: &Trapezoid, h: Option<&Trapezoid>) -> Self {
        let factors: Vec<&Trapezoid> = core::iter::once(g).chain(h).collect();
        let lo = factors
            .iter()
            .map(|t| t.support().0)
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = factors
            .iter()
            .map(|t| t.support().1)
            .fold(f64::INFINITY, f64::min);
        let mut bps: Vec<f64> = factors
            .iter()
            .flat_map(|t| t.breakpoints())
            .filter(|x| *x >= lo && *x <= hi)
            .collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        let side = |x: f64, right: bool| -> (f64, f64) {
            // value and derivative of the product
            let mut v = 1.0;
            let mut dv = 0.0;
            for t in &factors {
                let (tv, ts) = (t.side_value(x, right), t.side_slope(x, right));
                dv = dv * tv + v * ts;
                v *= tv;
            }
            (v, dv)
        };
        let mut segs = Vec::new();
        if hi > lo {
            for w in bps.windows(2) {
                let x0 = w[0];
                let mut c = [1.0, 0.0, 0.0];
                for t in &factors {
                    let (tv, ts) = (t.side_value(x0, true), t.side_slope(x0, true));
                    c = [c[0] * tv, c[1] * tv + c[0] * ts, c[2] * tv + c[1] * ts];
                }
                segs.push(QSeg { x0, x1: w[1], c });
            }
        }
        let (mut jumps, mut slope_jumps) = (0.0, 0.0);
        let mut continuous = true;
        for &x in &bps {
            let (vl, dl) = side(x, false);
            let (vr, dr) = side(x, true);
            if vr != vl {
                continuous = false;
            }
            jumps += (vr - vl).abs();
            slope_jumps += (dr - dl).abs();
        }
        Self {
            segs,
            jumps,
            slope_jumps,
            continuous,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.segs.iter().all(|s| s.c == [0.0; 3])
    }

    /// `∫ u(s) e^{iωs} ds`, exact up to rounding.
    pub fn fourier(&self, omega: f64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for s in &self.segs {
            let l = s.len();
            let part = if (omega * l).abs() <= 1.0 {
                let mut f = |u: f64| cis(omega * u) * s.at(u);
                gauss_legendre10(&mut f, 0.0, l)
            } else {
                let iw = Complex64::new(0.0, omega);
                let anti = |u: f64| {
                    let q = s.at(u);
                    let dq = s.c[1] + 2.0 * s.c[2] * u;
                    let ddq = 2.0 * s.c[2];
                    cis(omega * u) * (q / iw - dq / (iw * iw) + ddq / (iw * iw * iw))
                };
                anti(l) - anti(0.0)
            };
            total += cis(omega * s.x0) * part;
        }
        total
    }

    /// Upper bound for `∫|u|`.
    pub fn l1_bound(&self) -> f64 {
        self.segs
            .iter()
            .map(|s| {
                let l = s.len();
                let mut m = s.at(0.0).abs().max(s.at(l).abs());
                if s.c[2] != 0.0 {
                    let v = -s.c[1] / (2.0 * s.c[2]);
                    if v > 0.0 && v < l {
                        m = m.max(s.at(v).abs());
                    }
                }
                m * l
            })
            .sum()
    }

    /// Total variation of `u`, jumps included.
    pub fn total_variation(&self) -> f64 {
        let inner: f64 = self
            .segs
            .iter()
            .map(|s| {
                let l = s.len();
                let f = |u: f64| s.c[1] * u + s.c[2] * u * u;
                if s.c[2] != 0.0 {
                    let r = -s.c[1] / (2.0 * s.c[2]);
                    if r > 0.0 && r < l {
                        return (f(r) - f(0.0)).abs() + (f(l) - f(r)).abs();
                    }
                }
                (f(l) - f(0.0)).abs()
            })
            .sum();
        inner + self.jumps
    }

    /// Total variation of `u'` (meaningful when `u` is continuous).
    pub fn derivative_variation(&self) -> f64 {
        self.segs
            .iter()
            .map(|s| (2.0 * s.c[2]).abs() * s.len())
            .sum::<f64>()
            + self.slope_jumps
    }

    /// Upper bound for `|∫ u(s) e^{±2πiκs} ds|`, nonincreasing in `|κ|`.
    pub fn envelope(&self, kappa: f64) -> f64 {
        let x = kappa.abs();
        let mut e = self.l1_bound();
        if x > 0.0 {
            e = e.min(self.total_variation() / (2.0 * PI * x));
            if self.continuous {
                e = e.min(self.derivative_variation() / (4.0 * PI * PI * x * x));
            }
        }
        e
    }

    /// Radius beyond which `envelope < t`.
    pub fn radius(&self, t: f64) -> f64 {
        if self.l1_bound() < t {
            return 0.0;
        }
        let mut r = self.total_variation() / (2.0 * PI * t);
        if self.continuous {
            r = r.min(libm::sqrt(
                self.derivative_variation() / (4.0 * PI * PI * t),
            ));
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_at_zero_is_integral() {
        for t in [
            Trapezoid::new(0.2, 0.5, 0.1).unwrap(),
            Trapezoid::interval(-1.0, 3.0).unwrap(),
        ] {
            assert!((t.transform(0.0).re - t.integral()).abs() < 1e-12);
            assert_eq!(t.transform(0.0).im, 0.0);
            assert!((t.transform(1e-12) - t.transform(0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn box_transform_closed_form() {
        let t = Trapezoid::interval(0.0, 1.0).unwrap();
        assert!((t.transform(0.5).norm() - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn exact_fourier_matches_transform() {
        // independent check by brute trapezoid-rule integration
        let t = Trapezoid::new(-0.3, 0.4, 0.25).unwrap();
        let q = PiecewiseQuadratic::product(&t, None);
        for xi in [0.0, 0.03, 0.7, 3.3, -12.5] {
            let n = 200_000;
            let (lo, hi) = t.support();
            let hstep = (hi - lo) / n as f64;
            let mut brute = Complex64::new(0.0, 0.0);
            for i in 0..=n {
                let s = lo + hstep * i as f64;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                brute += cis(-2.0 * PI * xi * s) * (w * t.value(s) * hstep);
            }
            assert!((q.fourier(-2.0 * PI * xi) - brute).norm() < 1e-9, "{xi}");
            assert!((q.fourier(-2.0 * PI * xi) - t.transform(xi)).norm() < 1e-13);
        }
    }

    #[test]
    fn product_integral_and_envelope() {
        let g = Trapezoid::new(0.0, 1.0, 0.2).unwrap();
        let h = Trapezoid::new(0.5, 1.5, 0.1).unwrap();
        let q = PiecewiseQuadratic::product(&g, Some(&h));
        // overlap ∫ g·h by fine sampling
        let n = 400_000;
        let step = 2.0 / n as f64;
        let brute: f64 = (0..n)
            .map(|i| {
                let s = -0.2 + step * (i as f64 + 0.5);
                g.value(s) * h.value(s) * step
            })
            .sum();
        assert!((q.fourier(0.0).re - brute).abs() < 1e-9);
        assert!(q.continuous);
        for k in [0.3, 2.0, 17.0, 300.0] {
            assert!(q.fourier(2.0 * PI * k).norm() <= q.envelope(k) * (1.0 + 1e-12));
        }
        let b = PiecewiseQuadratic::product(&Trapezoid::interval(0.0, 1.0).unwrap(), None);
        assert!(!b.continuous);
        assert!((b.total_variation() - 2.0).abs() < 1e-15);
        assert!((b.radius(0.01) - 1.0 / (PI * 0.01)).abs() < 1e-9);
    }

    #[test]
    fn trapezoid_mass_on_interval() {
        let t = Trapezoid::new(0.0, 1.0, 0.5).unwrap();
        assert!((t.mass_on(-10.0, 10.0) - 1.5).abs() < 1e-14);
        assert!((t.mass_on(-0.5, 0.0) - 0.25).abs() < 1e-14);
        assert!((t.mass_on(0.25, 0.75) - 0.5).abs() < 1e-14);
    }
}
