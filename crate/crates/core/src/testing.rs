//! Independent numerical oracles shared by unit tests.

use std::f64::consts::PI;

/// `E[g(X)]`, `X ~ Normal(mean, var)`, by composite Simpson on `z ∈ [−12, 12]`.
pub fn simpson_expectation(mean: f64, var: f64, g: impl Fn(f64) -> f64) -> f64 {
    let n = 40_000;
    let h = 24.0 / n as f64;
    let sd = var.max(0.0).sqrt();
    let f = |k: usize| {
        let z = -12.0 + h * k as f64;
        g(mean + sd * z) * (-0.5 * z * z).exp()
    };
    let mut s = f(0) + f(n);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k);
    }
    s * h / 3.0 / (2.0 * PI).sqrt()
}
