//! Gamma and Beta function helpers on top of `statrs`.

use statrs::function::gamma::ln_gamma;

pub use statrs::function::gamma::gamma;

/// Euler Beta function B(a, b) for a, b > 0, evaluated through log-gamma.
pub fn beta(a: f64, b: f64) -> f64 {
    ln_beta(a, b).exp()
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Normalisation of the physical exchange kernel, 2Γ(2α+7/2) / (√π Γ(α+1)²).
pub fn kernel_normalisation(alpha: f64) -> f64 {
    let ln = std::f64::consts::LN_2 + ln_gamma(2.0 * alpha + 3.5)
        - 0.5 * std::f64::consts::PI.ln()
        - 2.0 * ln_gamma(alpha + 1.0);
    ln.exp()
}
