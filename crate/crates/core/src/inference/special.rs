//! Special functions backing the t and normal distributions.
//!
//! The t CDF is computed through the regularized incomplete beta function
//! (continued-fraction evaluation); the normal CDF through the regularized
//! incomplete gamma function. Quantiles are obtained by bisection on the
//! CDFs, which is plenty fast for the handful of calls per analysis.

const MAX_ITER: usize = 300;
const EPS: f64 = 3.0e-16;
const FPMIN: f64 = 1.0e-300;

/// Natural log of the gamma function (Lanczos approximation, g=5).
pub fn ln_gamma(x: f64) -> f64 {
    // Valid for x > 0, which is all we need (half-integer df arguments).
    debug_assert!(x > 0.0);
    const COF: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_7e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000_000_000_190_015;
    for c in COF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

/// Regularized lower incomplete gamma P(a, x) by series expansion.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let gln = ln_gamma(a);
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - gln).exp()
}

/// Regularized upper incomplete gamma Q(a, x) by continued fraction.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let gln = ln_gamma(a);
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - gln).exp() * h
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        1.0
    } else if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

/// Continued fraction for the incomplete beta function (Lentz's method).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0 && (0.0..=1.0).contains(&x));
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Standard normal CDF via the incomplete gamma route.
pub fn normal_cdf(z: f64) -> f64 {
    if z == 0.0 {
        return 0.5;
    }
    let half_tail = 0.5 * gamma_q(0.5, 0.5 * z * z);
    if z > 0.0 {
        1.0 - half_tail
    } else {
        half_tail
    }
}

/// Standard normal quantile by bisection on `normal_cdf`.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal quantile requires p in (0,1)");
    bisect(|z| normal_cdf(z) - p, -40.0, 40.0)
}

/// Student-t CDF with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    debug_assert!(df > 0.0);
    if t == 0.0 {
        return 0.5;
    }
    let t2 = t * t;
    // Two algebraically equal forms; pick the one whose beta argument stays
    // far from 1 so small |t| does not round x to exactly 1.
    let half_tail = if t2 < df {
        let y = t2 / (df + t2);
        0.5 * (1.0 - beta_inc(0.5, 0.5 * df, y))
    } else {
        let x = df / (df + t2);
        0.5 * beta_inc(0.5 * df, 0.5, x)
    };
    if t > 0.0 {
        1.0 - half_tail
    } else {
        half_tail
    }
}

/// Student-t quantile by bisection on `t_cdf`.
pub fn t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "t quantile requires p in (0,1)");
    // Bracket generously; heavy tails at small df need a wide interval.
    let hi = 1.0e6;
    bisect(|t| t_cdf(t, df) - p, -hi, hi)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    debug_assert!(flo <= 0.0 && f(hi) >= 0.0);
    let _ = flo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1.0e-13 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Simpson's-rule oracle: integrate the t density from 0 to `t`.
    fn t_cdf_by_quadrature(t: f64, df: f64) -> f64 {
        let log_norm = ln_gamma((df + 1.0) / 2.0)
            - ln_gamma(df / 2.0)
            - 0.5 * (df * std::f64::consts::PI).ln();
        let dens = |x: f64| (log_norm - 0.5 * (df + 1.0) * (1.0 + x * x / df).ln()).exp();
        let n = 20_000;
        let h = t / n as f64;
        let mut s = dens(0.0) + dens(t);
        for i in 1..n {
            let x = i as f64 * h;
            s += dens(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        0.5 + s * h / 3.0
    }

    #[test]
    fn t_cdf_matches_quadrature() {
        for &(t, df) in &[(1.0, 5.0), (2.0555, 26.0), (0.5, 26.0), (3.0, 2.0)] {
            assert_abs_diff_eq!(t_cdf(t, df), t_cdf_by_quadrature(t, df), epsilon = 1e-9);
        }
    }

    #[test]
    fn t_critical_value_df26() {
        let crit = t_quantile(0.975, 26.0);
        assert_abs_diff_eq!(crit, 2.0555, epsilon = 1e-3);
    }

    #[test]
    fn t_large_df_approaches_normal() {
        let crit = t_quantile(0.975, 1.0e6);
        assert_abs_diff_eq!(crit, 1.9600, epsilon = 2e-3);
        assert_abs_diff_eq!(normal_quantile(0.975), 1.959964, epsilon = 1e-5);
    }

    #[test]
    fn t_cdf_at_zero_is_exact_half() {
        assert_eq!(t_cdf(0.0, 26.0), 0.5);
    }

    #[test]
    fn normal_cdf_reference_values() {
        // Abramowitz & Stegun table values.
        assert_abs_diff_eq!(normal_cdf(1.0), 0.841344746, epsilon = 1e-8);
        assert_abs_diff_eq!(normal_cdf(-1.96), 0.024997895, epsilon = 1e-8);
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 0.0);
    }

    #[test]
    fn quantile_roundtrip() {
        for &p in &[0.025, 0.2, 0.5, 0.8, 0.95, 0.975] {
            assert_abs_diff_eq!(normal_cdf(normal_quantile(p)), p, epsilon = 1e-10);
            assert_abs_diff_eq!(t_cdf(t_quantile(p, 26.0), 26.0), p, epsilon = 1e-10);
        }
    }
}
