//! Goodness-of-fit and trend tests, and ordinary least squares.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Pearson chi-square of observed counts against expected counts, `df = bins - 1 - fitted`.
pub fn chi_square(observed: &[f64], expected: &[f64], fitted: usize) -> Result<TestResult> {
    if observed.len() != expected.len() {
        return Err(domain("observed and expected lengths differ"));
    }
    if observed.len() < fitted + 2 {
        return Err(Error::Insufficient(format!("{} bins for {fitted} fitted parameters", observed.len())));
    }
    let mut stat = 0.0;
    for (o, e) in observed.iter().zip(expected) {
        if !(*e > 0.0) {
            return Err(domain("expected counts must be positive"));
        }
        stat += (o - e) * (o - e) / e;
    }
    let df = (observed.len() - 1 - fitted) as f64;
    let dist = ChiSquared::new(df).map_err(|e| domain(e.to_string()))?;
    Ok(TestResult {
        statistic: stat,
        p_value: dist.sf(stat),
    })
}

/// Chi-square test of samples against a continuous CDF, using `bins` equiprobable cells in `u = F(x)`.
pub fn chi_square_vs_cdf<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, bins: usize) -> Result<TestResult> {
    if bins < 2 {
        return Err(domain("need at least two bins"));
    }
    if samples.len() < 5 * bins {
        return Err(Error::Insufficient(format!("{} samples for {bins} bins", samples.len())));
    }
    let mut observed = vec![0.0; bins];
    for &x in samples {
        let u = cdf(x).clamp(0.0, 1.0);
        let idx = ((u * bins as f64) as usize).min(bins - 1);
        observed[idx] += 1.0;
    }
    let expected = vec![samples.len() as f64 / bins as f64; bins];
    chi_square(&observed, &expected, 0)
}

/// Kolmogorov distribution tail `P(K > λ) = 2 Σ (-1)^{j-1} exp(-2 j² λ²)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // series converges slowly; the tail is 1 to double precision here
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<TestResult> {
    if samples.is_empty() {
        return Err(Error::Insufficient("no samples".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(TestResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    })
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Insufficient("both samples must be non-empty".into()));
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|x, y| x.total_cmp(y));
    xb.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(TestResult {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MannKendall {
    pub s: f64,
    pub variance: f64,
    pub z: f64,
    /// One-sided p-value for a decreasing trend, `Φ(Z)`.
    pub p_decreasing: f64,
    /// One-sided p-value for an increasing trend, `1 - Φ(Z)`.
    pub p_increasing: f64,
}

/// Mann-Kendall trend test with tie correction and continuity correction.
pub fn mann_kendall(series: &[f64]) -> Result<MannKendall> {
    let n = series.len();
    if n < 3 {
        return Err(Error::Insufficient(format!("Mann-Kendall needs at least 3 points, got {n}")));
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += (series[j] - series[i]).signum() * f64::from(series[j] != series[i]);
        }
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut ties = 0.0;
    let mut k = 0;
    while k < n {
        let mut t = 1;
        while k + t < n && sorted[k + t] == sorted[k] {
            t += 1;
        }
        let tf = t as f64;
        ties += tf * (tf - 1.0) * (2.0 * tf + 5.0);
        k += t;
    }
    let nf = n as f64;
    let variance = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - ties) / 18.0;
    let z = if variance <= 0.0 {
        0.0
    } else if s > 0.0 {
        (s - 1.0) / variance.sqrt()
    } else if s < 0.0 {
        (s + 1.0) / variance.sqrt()
    } else {
        0.0
    };
    let normal = Normal::standard();
    let p_decreasing = normal.cdf(z);
    Ok(MannKendall {
        s,
        variance,
        z,
        p_decreasing,
        p_increasing: 1.0 - p_decreasing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope (0 for an exact fit or two points).
    pub slope_stderr: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(domain("x and y lengths differ"));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Insufficient(format!("regression needs at least 2 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if !(sxx > 0.0) {
        return Err(domain("regressor is constant"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    // a response that is constant up to rounding is fitted exactly
    let y_scale = y.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let noise = nf * (4.0 * f64::EPSILON * y_scale).powi(2);
    let r_squared = if ss_tot > noise { 1.0 - ss_res / ss_tot } else { 1.0 };
    let slope_stderr = if n > 2 { (ss_res / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
    })
}
