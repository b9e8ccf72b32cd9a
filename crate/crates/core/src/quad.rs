//! Gauss–Kronrod and Gauss–Legendre rules on complex-valued integrands.

use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const XGL: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const WGL: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// One 15-point Kronrod panel: estimate and `|K15 − G7|`.
pub fn gk15<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += s * WGK[i];
        if i % 2 == 1 {
            g += s * WG[i / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Adaptive bisection on `[a, b]` until each panel's error estimate is below
/// `max(abs_tol, rel_tol·|panel|)` scaled by the panel's share of the interval.
pub fn adaptive<F: FnMut(f64) -> Complex64>(
    f: &mut F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> (Complex64, f64) {
    fn rec<F: FnMut(f64) -> Complex64>(
        f: &mut F,
        a: f64,
        b: f64,
        est: (Complex64, f64),
        abs_tol: f64,
        rel_tol: f64,
        depth: u32,
    ) -> (Complex64, f64) {
        let (v, e) = est;
        if e <= abs_tol.max(rel_tol * v.norm()) || depth >= 30 {
            return (v, e);
        }
        let m = 0.5 * (a + b);
        let l = gk15(f, a, m);
        let r = gk15(f, m, b);
        let (lv, le) = rec(f, a, m, l, 0.5 * abs_tol, rel_tol, depth + 1);
        let (rv, re) = rec(f, m, b, r, 0.5 * abs_tol, rel_tol, depth + 1);
        (lv + rv, le + re)
    }
    let est = gk15(f, a, b);
    rec(f, a, b, est, abs_tol, rel_tol, 0)
}

/// Ten-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre10<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> Complex64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..5 {
        s += (f(c - h * XGL[i]) + f(c + h * XGL[i])) * WGL[i];
    }
    s * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_and_oscillations() {
        let mut p = |x: f64| Complex64::new(x * x * x * x - 2.0 * x, 0.0);
        let exact = (32.0 / 5.0 - 4.0) - (-1.0 / 5.0 - 1.0);
        assert!((gk15(&mut p, -1.0, 2.0).0.re - exact).abs() < 1e-13);
        assert!((gauss_legendre10(&mut p, -1.0, 2.0).re - exact).abs() < 1e-13);
        let mut osc = |x: f64| Complex64::new(libm::cos(40.0 * x), libm::sin(40.0 * x));
        let (v, e) = adaptive(&mut osc, 0.0, 3.0, 1e-13, 1e-13);
        let ex = Complex64::new(libm::sin(120.0) / 40.0, (1.0 - libm::cos(120.0)) / 40.0);
        assert!((v - ex).norm() < 1e-12 && e < 1e-11);
    }
}
