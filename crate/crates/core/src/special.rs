//! Gamma-family helpers, the normal CDF, and the Kolmogorov distribution.

use std::f64::consts::PI;

/// ln Γ(x) for x > 0. Integer arguments go through the exact factorial path.
pub fn ln_gamma(x: f64) -> f64 {
    if x == x.floor() && x >= 1.0 && x <= 171.0 {
        return ln_factorial(x as u64 - 1);
    }
    libm::lgamma(x)
}

/// Γ(x); exact for small positive integers.
pub fn gamma(x: f64) -> f64 {
    if x == x.floor() && x >= 1.0 && x <= 171.0 {
        return factorial(x as u64 - 1);
    }
    libm::tgamma(x)
}

pub fn factorial(n: u64) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn ln_factorial(n: u64) -> f64 {
    if n <= 170 {
        factorial(n).ln()
    } else {
        libm::lgamma(n as f64 + 1.0)
    }
}

/// Surface area of the unit sphere S^{d-1} in R^d (2 for d = 1).
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// P(K > x) for the limiting Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // series converges poorly; use the theta-function form
        let s: f64 = (1..=20)
            .map(|k| {
                let k = (2 * k - 1) as f64;
                (-(k * k) * PI * PI / (8.0 * x * x)).exp()
            })
            .sum();
        return 1.0 - (2.0 * PI).sqrt() / x * s;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
/// The p-value uses the asymptotic law with the Stephens small-sample correction.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    let sn = nf.sqrt();
    let p = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
    KsResult {
        statistic: d,
        p_value: p,
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_factorial_path() {
        assert_eq!(gamma(3.0), 2.0);
        assert_eq!(gamma(1.0), 1.0);
        assert_eq!(factorial(5), 120.0);
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
        assert!((ln_gamma(0.5) - 0.5 * PI.ln()).abs() < 1e-14);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn kolmogorov_quantiles() {
        // classical critical values
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-3);
        // both branches agree near the switch point
        let a = kolmogorov_survival(0.3 - 1e-12);
        let b = kolmogorov_survival(0.3 + 1e-12);
        assert!((a - b).abs() < 1e-9);
    }
}
