//! Student-t tail quantiles for least-squares confidence bands.
//!
//! The t distribution enters only through its CDF, evaluated via the
//! regularized incomplete beta function. Quantiles are obtained by
//! bisection, which is plenty fast for the handful of calls a fit makes.

#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the Lanczos series in its accurate range.
        let pi = core::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * core::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued-fraction core of the incomplete beta function, by the
/// modified Lentz method.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    const EPS: f64 = 1e-15;
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
    for m in 1..=300 {
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

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if a.is_nan() || a <= 0.0 || b.is_nan() || b <= 0.0 {
        return Err(Error::invalid("incomplete beta needs positive shape parameters"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid("incomplete beta argument outside [0, 1]"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
        + a * x.ln()
        + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // Use the expansion that converges fastest for this x.
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(a, b, x) / a)
    } else {
        Ok(1.0 - front * beta_cf(b, a, 1.0 - x) / b)
    }
}

/// CDF of the Student-t distribution with `dof` degrees of freedom.
pub fn t_cdf(t: f64, dof: f64) -> Result<f64> {
    if dof.is_nan() || dof <= 0.0 {
        return Err(Error::invalid("degrees of freedom must be positive"));
    }
    let x = dof / (dof + t * t);
    let tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x)?;
    Ok(if t >= 0.0 { 1.0 - tail } else { tail })
}

/// Quantile of the Student-t distribution, solved by bisection to 1e-12.
pub fn t_quantile(dof: f64, p: f64) -> Result<f64> {
    if dof.is_nan() || dof <= 0.0 {
        return Err(Error::invalid("degrees of freedom must be positive"));
    }
    if p.is_nan() || p <= 0.0 || p >= 1.0 {
        return Err(Error::invalid("quantile probability must lie in (0, 1)"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // The CDF is symmetric; solve in the upper tail and mirror.
    let (target, flip) = if p >= 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut hi = 1.0;
    while t_cdf(hi, dof)? < target {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NoConvergence(alloc::format!(
                "t quantile bracket failed for p = {p}, dof = {dof}"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, dof)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(flip * 0.5 * (lo + hi))
}
