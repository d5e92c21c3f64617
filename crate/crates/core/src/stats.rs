//! Goodness-of-fit tests and sample-moment helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Normal, Poisson};

pub fn normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// Upper tail `P(Z > x)`.
pub fn normal_sf(x: f64) -> f64 {
    standard_normal().sf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

fn standard_normal() -> Normal {
    Normal::standard()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    /// Sup-distance between empirical and reference CDF.
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample Kolmogorov–Smirnov test with the asymptotic null distribution
/// (Stephens' small-sample correction on the scaled statistic).
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let n = samples.len();
    if n == 0 {
        return KsResult { statistic: 0.0, p_value: 1.0, n };
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / nf - f;
            let below = f - i as f64 / nf;
            above.max(below)
        })
        .fold(0.0f64, f64::max);
    let sqrt_n = nf.sqrt();
    let scaled = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
    KsResult { statistic, p_value: kolmogorov_sf(scaled), n }
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // P(K ≤ x) = √(2π)/x · Σ_{k≥1} exp(−(2k−1)²π²/(8x²))
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let mut cdf = 0.0;
        for k in 1..=50 {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * c).exp();
            cdf += term;
            if term < 1e-300 {
                break;
            }
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / x;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// `(first count in cell, observed, expected)`; the last cell is open-ended.
    pub cells: Vec<(u64, u64, f64)>,
}

/// Pearson chi-square fit of non-negative integer data to Poisson(`rate`),
/// merging adjacent cells until each expects at least 5 observations.
pub fn chi_square_poisson(data: &[u32], rate: f64) -> ChiSquareResult {
    let n = data.len() as f64;
    let max_obs = data.iter().copied().max().unwrap_or(0) as u64;
    let mut observed = vec![0u64; max_obs as usize + 1];
    for &x in data {
        observed[x as usize] += 1;
    }
    let poisson = Poisson::new(rate).expect("rate must be positive");
    let upper_k = max_obs.max((rate + 10.0 * rate.sqrt() + 10.0) as u64);

    let mut cells: Vec<(u64, u64, f64)> = Vec::new();
    let (mut start, mut obs, mut exp) = (0u64, 0u64, 0.0f64);
    let mut tail_mass = 1.0;
    for k in 0..=upper_k {
        let p = poisson.pmf(k);
        obs += observed.get(k as usize).copied().unwrap_or(0);
        exp += n * p;
        tail_mass -= p;
        if exp >= 5.0 && n * tail_mass >= 5.0 {
            cells.push((start, obs, exp));
            start = k + 1;
            obs = 0;
            exp = 0.0;
        }
    }
    // open upper cell collects whatever is left, including P(N > upper_k)
    obs += observed.iter().skip(upper_k as usize + 1).sum::<u64>();
    exp += n * tail_mass.max(0.0);
    cells.push((start, obs, exp));
    if cells.len() >= 2 && cells.last().is_some_and(|c| c.2 < 5.0) {
        let last = cells.pop().unwrap();
        let prev = cells.last_mut().unwrap();
        prev.1 += last.1;
        prev.2 += last.2;
    }

    let statistic: f64 = cells
        .iter()
        .map(|&(_, o, e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let dof = cells.len().saturating_sub(1).max(1);
    let p_value = ChiSquared::new(dof as f64).map_or(f64::NAN, |c| c.sf(statistic));
    ChiSquareResult { statistic, dof, p_value, cells }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample variance and its standard error `√((m₄ − s⁴)/n)`.
pub fn variance_with_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let v = variance(xs);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let se = ((m4 - v * v).max(0.0) / n).sqrt();
    (v, se)
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Linear-interpolated quantile of a sorted slice.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

/// Ordinary least squares slope and its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    (slope, se)
}
