//! Error function and Gauss–Hermite quadrature.

use crate::error::{Error, Result};

/// Error function (musl/fdlibm rational approximation, < 1 ulp).
#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub const MAX_HERMITE_ORDER: usize = 128;

/// Nodes and weights for `∫ p(x) exp(−x²) dx`, exact for polynomials of
/// degree ≤ 2·order − 1. Nodes are sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        let (nodes, weights) = gauss_hermite_nodes(order)?;
        Ok(GaussHermite { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `E[g(X)]` for `X ~ Normal(mean, var)`.
    pub fn expectation<F: FnMut(f64) -> f64>(&self, mean: f64, var: f64, mut g: F) -> f64 {
        let scale = (2.0 * var.max(0.0)).sqrt();
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(mean + scale * x))
            .sum();
        sum / std::f64::consts::PI.sqrt()
    }
}

/// Newton iteration on the orthonormal Hermite recurrence, seeded with the
/// usual asymptotic guesses for the largest roots.
pub fn gauss_hermite_nodes(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=MAX_HERMITE_ORDER).contains(&order) {
        return Err(Error::Parameter(format!(
            "Gauss-Hermite order must be in 1..={MAX_HERMITE_ORDER}, got {order}"
        )));
    }
    let n = order;
    let nf = n as f64;
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = (n + 1) / 2;
    let mut z = 0.0_f64;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    x.reverse();
    w.reverse();
    Ok((x, w))
}

/// Standard normal cumulative distribution function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, nodes ascending.
pub fn gauss_legendre_nodes(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=MAX_HERMITE_ORDER).contains(&order) {
        return Err(Error::Parameter(format!(
            "Gauss-Legendre order must be in 1..={MAX_HERMITE_ORDER}, got {order}"
        )));
    }
    let n = order;
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            dp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / dp;
            if (z - z1).abs() <= 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok((x, w))
}

struct LegendreRules {
    rules: [(Vec<f64>, Vec<f64>); 3],
}

fn legendre_rules() -> &'static LegendreRules {
    static RULES: std::sync::OnceLock<LegendreRules> = std::sync::OnceLock::new();
    RULES.get_or_init(|| LegendreRules {
        rules: [6, 12, 20].map(|n| gauss_legendre_nodes(n).expect("valid order")),
    })
}

/// `P(X ≤ h, Y ≤ k)` for standard normals with correlation `r` (Genz's
/// variant of the Drezner–Wesolowsky method; about 15 digits).
pub fn bivariate_normal_cdf(h: f64, k: f64, r: f64) -> f64 {
    upper_orthant(-h, -k, r.clamp(-1.0, 1.0))
}

// P(X > h, Y > k).
fn upper_orthant(h: f64, k: f64, r: f64) -> f64 {
    use std::f64::consts::PI;
    let two_pi = 2.0 * PI;
    let rules = &legendre_rules().rules;
    let (x, w) = if r.abs() < 0.3 {
        &rules[0]
    } else if r.abs() < 0.75 {
        &rules[1]
    } else {
        &rules[2]
    };
    let mut hk = h * k;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = r.asin();
        let mut sum = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            let sn = (0.5 * asr * (1.0 + xi)).sin();
            sum += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        return sum * asr / (2.0 * two_pi) + normal_cdf(-h) * normal_cdf(-k);
    }
    let mut kk = k;
    if r < 0.0 {
        kk = -k;
        hk = -hk;
    }
    let mut bvn = 0.0;
    if r.abs() < 1.0 {
        let a2 = (1.0 - r) * (1.0 + r);
        let mut a = a2.sqrt();
        let bs = (h - kk) * (h - kk);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a * (-(bs / a2 + hk) / 2.0).exp()
            * (1.0 - c * (bs - a2) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a2 * a2 / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp() * two_pi.sqrt() * normal_cdf(-b / a) * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (xi, wi) in x.iter().zip(w) {
            let xs = (a * (xi + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            bvn += a * wi
                * ((-bs / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                    - (-(bs / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
        }
        bvn = -bvn / two_pi;
    }
    if r > 0.0 {
        bvn + normal_cdf(-h.max(kk))
    } else {
        let mut out = -bvn;
        if kk > h {
            out += if h < 0.0 {
                normal_cdf(kk) - normal_cdf(h)
            } else {
                normal_cdf(-h) - normal_cdf(-kk)
            };
        }
        out
    }
}
