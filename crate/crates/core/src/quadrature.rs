//! Globally adaptive Gauss–Kronrod (7/15) quadrature for real and complex
//! integrands on finite intervals and on the whole real line.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

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
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-12, rel_tol: 1e-12, max_intervals: 2000 }
    }
}

impl QuadOptions {
    pub fn abs(tol: f64) -> Self {
        QuadOptions { abs_tol: tol, rel_tol: 0.0, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Segment {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn gk15<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).norm())
}

/// Integrates a complex function over `[a, b]`.
pub fn integrate_complex<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult<Complex64>>
where
    F: FnMut(f64) -> Complex64,
{
    if a == b {
        return Ok(QuadResult { value: Complex64::default(), error: 0.0, evaluations: 0 });
    }
    let (value, error) = gk15(&mut f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.norm());
        if total_err <= tol {
            break;
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature { estimate: total_err, tolerance: tol });
        }
        let s = heap.pop().expect("nonempty");
        let m = 0.5 * (s.a + s.b);
        if !(m > s.a && m < s.b) {
            return Err(Error::Quadrature { estimate: total_err, tolerance: tol });
        }
        let (v1, e1) = gk15(&mut f, s.a, m);
        let (v2, e2) = gk15(&mut f, m, s.b);
        evaluations += 30;
        if !(v1.re.is_finite() && v1.im.is_finite() && v2.re.is_finite() && v2.im.is_finite()) {
            return Err(Error::Numerical("non-finite integrand value".into()));
        }
        total += v1 + v2 - s.value;
        total_err += e1 + e2 - s.error;
        heap.push(Segment { a: s.a, b: m, value: v1, error: e1 });
        heap.push(Segment { a: m, b: s.b, value: v2, error: e2 });
    }
    // Re-sum to remove accumulated cancellation in the running totals.
    let mut value = Complex64::default();
    let mut error = 0.0;
    for s in heap.iter() {
        value += s.value;
        error += s.error;
    }
    Ok(QuadResult { value, error, evaluations })
}

/// Integrates a real function over `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult<f64>>
where
    F: FnMut(f64) -> f64,
{
    let r = integrate_complex(|t| Complex64::new(f(t), 0.0), a, b, opts)?;
    Ok(QuadResult { value: r.value.re, error: r.error, evaluations: r.evaluations })
}

/// Integrates a real function over the whole line using `t = s / (1 - s^2)`.
pub fn integrate_real_line<F>(mut f: F, opts: QuadOptions) -> Result<QuadResult<f64>>
where
    F: FnMut(f64) -> f64,
{
    integrate(
        |s| {
            let d = 1.0 - s * s;
            let t = s / d;
            f(t) * (1.0 + s * s) / (d * d)
        },
        -1.0,
        1.0,
        opts,
    )
}

/// Integrates a real function over `[a, inf)` using `t = a + s / (1 - s)`.
pub fn integrate_half_line<F>(mut f: F, a: f64, opts: QuadOptions) -> Result<QuadResult<f64>>
where
    F: FnMut(f64) -> f64,
{
    integrate(
        |s| {
            let d = 1.0 - s;
            f(a + s / d) / (d * d)
        },
        0.0,
        1.0,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 2.0 * x * x + 1.0, -1.0, 2.0, QuadOptions::default()).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - 2.0 * (8.0 + 1.0) / 3.0 + 3.0;
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_complex() {
        let r = integrate_complex(
            |t| Complex64::from_polar(1.0, 20.0 * t),
            0.0,
            1.0,
            QuadOptions::abs(1e-13),
        )
        .unwrap();
        let exact = (Complex64::from_polar(1.0, 20.0) - 1.0) / Complex64::new(0.0, 20.0);
        assert!((r.value - exact).norm() < 1e-12);
    }

    #[test]
    fn lorentzian_on_line() {
        let r = integrate_real_line(|t| 1.0 / (1.0 + t * t), QuadOptions::default()).unwrap();
        assert!((r.value - PI).abs() < 1e-11);
        let h = integrate_half_line(|t| 1.0 / (1.0 + t * t), 0.0, QuadOptions::default()).unwrap();
        assert!((h.value - PI / 2.0).abs() < 1e-11);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 0.0, max_intervals: 3 };
        let r = integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, opts);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
