//! Shared numerical routines: the sine integral and Gauss-Legendre
//! panel quadrature.
//!
//! The sine integral is needed twice: for the analytic tail of the
//! sinc^2 spectral shape (whose 1/x^2 tails cannot be truncated at any
//! affordable width) and for the closed-form CDF used by the sampling
//! tests. Gauss-Legendre nodes are generated at runtime by Newton
//! iteration on the Legendre recurrence instead of a hardcoded table.

use std::sync::OnceLock;

/// Si(x) = integral of sin(t)/t from 0 to x.
///
/// Power series below `x = 4`, complex continued fraction for the
/// exponential integral E1(ix) above (modified Lentz), giving close to
/// machine precision over the whole axis. Odd in x.
pub fn sine_integral(x: f64) -> f64 {
    if x < 0.0 {
        return -sine_integral(-x);
    }
    if x == 0.0 {
        return 0.0;
    }
    if x <= 4.0 {
        si_series(x)
    } else {
        si_continued_fraction(x)
    }
}

fn si_series(x: f64) -> f64 {
    // Si(x) = sum_k (-1)^k x^(2k+1) / ((2k+1) (2k+1)!)
    // `term` tracks (-1)^k x^(2k+1) / (2k+1)!, the summand is term/(2k+1).
    let mut term = x;
    let mut sum = x;
    let mut k = 1u32;
    loop {
        let two_k = 2.0 * f64::from(k);
        term *= -x * x / (two_k * (two_k + 1.0));
        let delta = term / (two_k + 1.0);
        sum += delta;
        if delta.abs() < f64::EPSILON * sum.abs() || k > 60 {
            return sum;
        }
        k += 1;
    }
}

/// Si via E1(ix): Si(x) = pi/2 + Im E1(ix), E1 evaluated with the even
/// form of its continued fraction (modified Lentz in complex arithmetic).
fn si_continued_fraction(x: f64) -> f64 {
    // Complex helpers on (re, im) pairs.
    #[inline]
    fn cdiv(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        let d = b.0 * b.0 + b.1 * b.1;
        ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
    }
    #[inline]
    fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
    }

    const FPMIN: f64 = 1.0e-300;
    // E1(z) = e^{-z} / (z + 1 - 1^2/(z + 3 - 2^2/(z + 5 - ...)))
    let z = (0.0, x);
    let mut b = (z.0 + 1.0, z.1);
    let mut c = (1.0 / FPMIN, 0.0);
    let mut d = cdiv((1.0, 0.0), b);
    let mut h = d;
    for k in 1..=300u32 {
        let a = -f64::from(k) * f64::from(k);
        b.0 += 2.0;
        // d = 1 / (a*d + b)
        d = cdiv((1.0, 0.0), (a * d.0 + b.0, a * d.1 + b.1));
        // c = b + a/c
        let ac = cdiv((a, 0.0), c);
        c = (b.0 + ac.0, b.1 + ac.1);
        let del = cmul(c, d);
        h = cmul(h, del);
        if (del.0 - 1.0).abs() + del.1.abs() < 1.0e-16 {
            break;
        }
    }
    // e^{-ix} = cos x - i sin x
    let e1 = cmul((x.cos(), -x.sin()), h);
    std::f64::consts::FRAC_PI_2 + e1.1
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
fn gauss_legendre_raw(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess (Chebyshev-like), then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * x * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            pp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
            let dx = p0 / pp;
            x -= dx;
            if dx.abs() < 1.0e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CACHE.get_or_init(|| gauss_legendre_raw(16))
}

/// Integrate `f` over [a, b] with `panels` equal panels of 16-point
/// Gauss-Legendre each. Exact for smooth integrands with a few
/// oscillations per panel.
pub fn integrate_panels<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gl16();
    let step = (b - a) / panels as f64;
    let half = 0.5 * step;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * step;
        let mut acc = 0.0;
        for (&t, &w) in nodes.iter().zip(weights) {
            acc += w * f(mid + half * t);
        }
        total += acc * half;
    }
    total
}
