//! Standard normal distribution helpers and the bivariate normal upper
//! orthant probability.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `P(Z <= x)`
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `P(Z > x)`
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Inverse of [`cdf`]; `p = 0` and `p = 1` map to the infinities.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        let x = -SQRT_2 * erfc_inv(2.0 * p);
        // one Newton step against the more accurate cdf
        let d = pdf(x);
        if d > 0.0 {
            x - (cdf(x) - p) / d
        } else {
            x
        }
    }
}

/// `P(Z1 > x, Z2 > y)` for standard normals with correlation `rho`.
///
/// Integrates `phi(t) * P(Z2 > y | Z1 = t)` over `t > x` by adaptive Simpson
/// quadrature with absolute tolerance `tol`. `|rho| = 1` uses the closed forms.
pub fn bivariate_upper(x: f64, y: f64, rho: f64, tol: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return sf(y);
    }
    if y == f64::NEG_INFINITY {
        return sf(x);
    }
    if x == f64::INFINITY || y == f64::INFINITY {
        return 0.0;
    }
    if rho >= 1.0 {
        return sf(x.max(y));
    }
    if rho <= -1.0 {
        return (cdf(-y) - cdf(x)).max(0.0);
    }
    if rho == 0.0 {
        return sf(x) * sf(y);
    }
    let s = (1.0 - rho * rho).sqrt();
    let f = |t: f64| pdf(t) * sf((y - rho * t) / s);
    const HI: f64 = 9.0;
    let lo = x.max(-HI);
    if lo >= HI {
        return 0.0;
    }
    // mass of Z1 below -9 is ~1e-19
    adaptive_simpson(&f, lo, HI, tol, 50)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cdf_values() {
        assert_eq!(cdf(0.0), 0.5);
        assert_abs_diff_eq!(cdf(1.959963984540054), 0.975, epsilon = 1e-15);
        assert_abs_diff_eq!(sf(1.959963984540054), 0.025, epsilon = 1e-15);
        assert_abs_diff_eq!(cdf(-3.0), 0.0013498980316300946, epsilon = 1e-16);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [1e-8, 0.001, 0.025, 0.3, 0.5, 0.9, 0.975, 1.0 - 1e-9] {
            assert_abs_diff_eq!(cdf(quantile(p)), p, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(quantile(0.975), 1.959963984540054, epsilon = 1e-9);
    }

    #[test]
    fn bivariate_limits() {
        assert_abs_diff_eq!(bivariate_upper(0.0, 0.0, 0.0, 1e-10), 0.25, epsilon = 1e-12);
        // orthant probability 1/4 + asin(rho)/(2 pi)
        let rho: f64 = 0.5;
        let exact = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(bivariate_upper(0.0, 0.0, rho, 1e-12), exact, epsilon = 1e-10);
        let rho: f64 = -0.7;
        let exact = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(bivariate_upper(0.0, 0.0, rho, 1e-12), exact, epsilon = 1e-10);
        assert_abs_diff_eq!(bivariate_upper(0.3, -0.2, 1.0, 1e-10), sf(0.3));
        assert_abs_diff_eq!(bivariate_upper(-0.3, -0.2, -1.0, 1e-10), cdf(0.2) - cdf(-0.3));
        assert_eq!(bivariate_upper(0.3, -0.2, -1.0, 1e-10), 0.0);
        assert_eq!(bivariate_upper(f64::NEG_INFINITY, 0.4, 0.5, 1e-10), sf(0.4));
        // rho close to 1 approaches the comonotone limit
        assert_abs_diff_eq!(bivariate_upper(0.3, -0.2, 0.999999, 1e-11), sf(0.3), epsilon = 1e-3);
    }
}
