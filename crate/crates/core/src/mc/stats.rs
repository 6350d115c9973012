use crate::error::{invalid, Result};
use crate::special::ln_gamma;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Summary {
    /// Number of standard errors separating the estimate from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.se
    }

    pub fn within(&self, target: f64, k_se: f64) -> bool {
        (self.mean - target).abs() <= k_se * self.se
    }
}

/// Mean and `sd / sqrt(n)`.
pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            mean: f64::NAN,
            se: f64::NAN,
            n,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Summary { mean, se: 0.0, n };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Summary {
        mean,
        se: (var / n as f64).sqrt(),
        n,
    }
}

/// Frequency of `true` with the binomial standard error.
pub fn binomial_summary(hits: impl IntoIterator<Item = bool>) -> Summary {
    let (mut k, mut n) = (0usize, 0usize);
    for h in hits {
        n += 1;
        k += h as usize;
    }
    let p = k as f64 / n as f64;
    Summary {
        mean: p,
        se: (p * (1.0 - p) / n as f64).sqrt(),
        n,
    }
}

/// Sample covariance of paired values; the error is the standard error of
/// the mean of the centered products.
pub fn covariance_summary(xs: &[f64], ys: &[f64]) -> Summary {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let products: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let mut s = summarize(&products);
    s.mean *= n / (n - 1.0);
    s
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples`
/// and a continuous reference CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("samples", "KS statistic needs at least one sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("samples", "KS statistic needs nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Regularized lower incomplete gamma function `P(shape, x)`.
///
/// Series expansion below `x = shape + 1`, Lentz continued fraction for the
/// upper tail above it.
pub fn gamma_cdf(shape: f64, x: f64) -> f64 {
    assert!(shape > 0.0, "gamma_cdf needs a positive shape");
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let log_prefactor = shape * x.ln() - x - ln_gamma(shape);
    if x < shape + 1.0 {
        let mut term = 1.0 / shape;
        let mut sum = term;
        let mut a = shape;
        for _ in 0..10_000 {
            a += 1.0;
            term *= x / a;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (sum * log_prefactor.exp()).min(1.0)
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - shape;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - shape);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (1.0 - log_prefactor.exp() * h).max(0.0)
    }
}

/// Weighted least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual-scaled standard error of the slope.
    pub slope_se: f64,
    /// Standard error implied by the weights alone, read as inverse
    /// variances of the ordinates.
    pub slope_se_weights: f64,
}

pub fn fit_slope(xs: &[f64], ys: &[f64], weights: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() != weights.len() {
        return Err(invalid("xs", "xs, ys and weights must have equal length"));
    }
    if xs.len() < 3 {
        return Err(invalid("xs", "a line fit needs at least 3 points"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(invalid("weights", "weights must be finite and positive"));
    }
    let sw: f64 = weights.iter().sum();
    let xbar = xs.iter().zip(weights).map(|(x, w)| w * x).sum::<f64>() / sw;
    let ybar = ys.iter().zip(weights).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(weights).map(|(x, w)| w * (x - xbar).powi(2)).sum();
    if sxx <= f64::EPSILON * sw * (1.0 + xbar * xbar) {
        return Err(invalid("xs", "abscissae are degenerate"));
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(weights)
        .map(|((x, y), w)| w * (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .zip(weights)
        .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let dof = (xs.len() - 2) as f64;
    Ok(LineFit {
        slope,
        intercept,
        slope_se: (rss / dof / sxx).sqrt(),
        slope_se_weights: (1.0 / sxx).sqrt(),
    })
}

/// Weighted least-squares line through `(x_k, ln p_k)` where `p_k` is the
/// frequency of event `k` over replicas (`hits[i][k]` for replica `i`).
///
/// Weights are the inverse delta-method variances `n p_k / (1 - p_k)`, so
/// the slope equals [`fit_slope`] applied to `ln p_k` with weights
/// `(p_k / se_k)^2` and binomial `se_k`. `slope_se_weights` is the
/// delta-method error computed with the empirical covariance of the
/// indicators, which stays valid when all events share the same replicas;
/// `slope_se` is the residual-scaled error.
pub fn fit_log_frequencies(hits: &[Vec<bool>], xs: &[f64]) -> Result<LineFit> {
    let k = xs.len();
    if k < 3 {
        return Err(invalid("xs", "a line fit needs at least 3 points"));
    }
    if hits.is_empty() || hits.iter().any(|h| h.len() != k) {
        return Err(invalid("hits", "every replica needs one indicator per abscissa"));
    }
    let n = hits.len() as f64;
    let mut p = vec![0.0; k];
    let mut joint = vec![vec![0.0; k]; k];
    for h in hits {
        for a in 0..k {
            if h[a] {
                p[a] += 1.0;
                for b in 0..k {
                    if h[b] {
                        joint[a][b] += 1.0;
                    }
                }
            }
        }
    }
    if p.iter().any(|&c| c == 0.0 || c == n) {
        return Err(invalid("hits", "every event needs a frequency strictly inside (0, 1)"));
    }
    for v in p.iter_mut() {
        *v /= n;
    }
    let ys: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    let weights: Vec<f64> = p.iter().map(|v| n * v / (1.0 - v)).collect();
    let mut fit = fit_slope(xs, &ys, &weights)?;
    let sw: f64 = weights.iter().sum();
    let xbar = xs.iter().zip(&weights).map(|(x, w)| w * x).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(&weights).map(|(x, w)| w * (x - xbar).powi(2)).sum();
    let c: Vec<f64> = xs.iter().zip(&weights).map(|(x, w)| w * (x - xbar) / sxx).collect();
    let mut var = 0.0;
    for a in 0..k {
        for b in 0..k {
            let cov = (joint[a][b] / n - p[a] * p[b]) / n;
            var += c[a] * c[b] * cov / (p[a] * p[b]);
        }
    }
    fit.slope_se_weights = var.max(0.0).sqrt();
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::replica_rng;
    use rand::Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn log_frequency_slope_matches_direct_fit() {
        // Nested events with known frequencies 0.8, 0.4, 0.2 on 10 replicas.
        let mut hits = Vec::new();
        for i in 0..10 {
            hits.push(vec![i < 8, i < 4, i < 2]);
        }
        let xs = [0.0, 1.0, 2.0];
        let fit = fit_log_frequencies(&hits, &xs).unwrap();
        let p = [0.8f64, 0.4, 0.2];
        let ys: Vec<f64> = p.iter().map(|v| v.ln()).collect();
        let w: Vec<f64> = p.iter().map(|v| 10.0 * v / (1.0 - v)).collect();
        let direct = fit_slope(&xs, &ys, &w).unwrap();
        assert!((fit.slope - direct.slope).abs() < 1e-12);
        assert!((fit.intercept - direct.intercept).abs() < 1e-12);
        assert!(fit.slope_se_weights > 0.0);
        assert!(fit_log_frequencies(&[vec![false, true, true]], &xs).is_err());
    }

    #[test]
    fn log_frequency_slope_error_is_calibrated() {
        // Independent events with p = 0.5 * 2^{-x}: compare the delta-method
        // error to the spread of slopes over repeated experiments.
        let xs = [0.0, 1.0, 2.0];
        let mut rng = replica_rng(1, 0);
        let mut slopes = Vec::new();
        let mut ses = Vec::new();
        for _ in 0..300 {
            let hits: Vec<Vec<bool>> = (0..2000)
                .map(|_| xs.iter().map(|x| rng.random::<f64>() < 0.5 * 2f64.powf(-x)).collect())
                .collect();
            let fit = fit_log_frequencies(&hits, &xs).unwrap();
            slopes.push(fit.slope);
            ses.push(fit.slope_se_weights);
        }
        let spread = summarize(&slopes).se * (slopes.len() as f64).sqrt();
        let mean_se = ses.iter().sum::<f64>() / ses.len() as f64;
        assert!((spread / mean_se - 1.0).abs() < 0.15, "{spread} vs {mean_se}");
        assert!(summarize(&slopes).within(-2f64.ln(), 3.0));
    }

    #[test]
    fn gamma_cdf_shape_one_is_exponential() {
        for &x in &[0.0, 1e-6, 0.3, 1.0, 2.5, 7.0, 30.0] {
            assert!((gamma_cdf(1.0, x) - (1.0 - (-x).exp())).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn gamma_cdf_half_matches_normal_cdf() {
        // chi-squared(1): P(1/2, z^2/2) = 2 Phi(z) - 1
        let normal = Normal::new(0.0, 1.0).unwrap();
        for i in 1..=60 {
            let z = 0.1 * i as f64;
            let expect = 2.0 * normal.cdf(z) - 1.0;
            assert!((gamma_cdf(0.5, z * z / 2.0) - expect).abs() < 1e-10, "z={z}");
        }
    }

    #[test]
    fn gamma_cdf_limits_and_monotonicity() {
        for &shape in &[0.05, 0.25, 0.5, 1.0, 3.7, 25.0] {
            assert_eq!(gamma_cdf(shape, 0.0), 0.0);
            let mut prev = 0.0;
            for i in 1..2000 {
                let p = gamma_cdf(shape, i as f64 * 0.05);
                assert!(p >= prev - 1e-15, "shape={shape}");
                prev = p;
            }
            assert!((gamma_cdf(shape, 1e4) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_cdf_against_statrs() {
        use statrs::distribution::Gamma;
        for &shape in &[0.25, 0.5, 1.5, 4.0] {
            let g = Gamma::new(shape, 1.0).unwrap();
            for i in 0..100 {
                let x = 0.07 * i as f64;
                assert!((gamma_cdf(shape, x) - g.cdf(x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ks_edge_cases() {
        assert!(ks_statistic(&[], |x| x).is_err());
        let d = ks_statistic(&[0.5], |x: f64| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        let d = ks_statistic(&[0.3; 100], |x: f64| x.clamp(0.0, 1.0)).unwrap();
        assert!(d >= 0.5);
    }

    #[test]
    fn ks_of_exact_samples_is_below_the_95_percent_quantile() {
        let n = 5000;
        let crit = 1.36 / (n as f64).sqrt();
        let runs = 100;
        let passes = (0..runs)
            .filter(|&run| {
                let mut rng = replica_rng(99, run);
                let xs: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                ks_statistic(&xs, |x| 1.0 - (-x).exp()).unwrap() < crit
            })
            .count();
        assert!(passes >= 90, "{passes} of {runs} below the 95% quantile");
    }

    #[test]
    fn two_sample_ks() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = (0..100).map(|i| i as f64 + 1000.0).collect();
        assert_eq!(ks_two_sample(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn exact_line_fit() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.25 * x).collect();
        let fit = fit_slope(&xs, &ys, &[1.0, 2.0, 1.0, 3.0]).unwrap();
        assert!((fit.slope + 0.25).abs() < 1e-14);
        assert!((fit.intercept - 1.5).abs() < 1e-14);
        assert!(fit.slope_se < 1e-12);
    }

    #[test]
    fn noisy_fit_matches_normal_equations() {
        let xs = [0.3, 1.1, 1.9, 3.2, 4.0];
        let ys = [2.1, 2.9, 4.2, 5.8, 7.3];
        let w = [1.0, 0.5, 2.0, 1.5, 0.8];
        // Normal equations [[S, Sx], [Sx, Sxx]] (a, b) = (Sy, Sxy).
        let s: f64 = w.iter().sum();
        let sx: f64 = (0..5).map(|i| w[i] * xs[i]).sum();
        let sy: f64 = (0..5).map(|i| w[i] * ys[i]).sum();
        let sxx: f64 = (0..5).map(|i| w[i] * xs[i] * xs[i]).sum();
        let sxy: f64 = (0..5).map(|i| w[i] * xs[i] * ys[i]).sum();
        let det = s * sxx - sx * sx;
        let b = (s * sxy - sx * sy) / det;
        let a = (sxx * sy - sx * sxy) / det;
        let fit = fit_slope(&xs, &ys, &w).unwrap();
        assert!((fit.slope - b).abs() < 1e-12);
        assert!((fit.intercept - a).abs() < 1e-12);
        assert!((fit.slope_se_weights - (s / det).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_slope(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(fit_slope(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], &[1.0; 3]).is_err());
    }

    #[test]
    fn covariance_of_independent_and_identical() {
        let mut rng = replica_rng(1, 1);
        let xs: Vec<f64> = (0..20000).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..20000).map(|_| rng.random::<f64>()).collect();
        assert!(covariance_summary(&xs, &ys).within(0.0, 4.0));
        let c = covariance_summary(&xs, &xs);
        assert!((c.mean - 1.0 / 12.0).abs() < 4.0 * c.se);
    }
}
