//! Squared Bessel processes of dimension `2 theta`, the signed field
//! `sigma R^{1-theta}` and the one-dimensional martingale and duality
//! checks.
//!
//! Transitions are exact: given `R_t = v`, `R_{t+dt} = 2 dt Y` with
//! `Y ~ Gamma(theta + K, 1)` and `K ~ Poisson(v / (2 dt))`. Started from 0
//! this gives `R_t ~ Gamma(theta, scale 2t)`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{invalid, Error, Result};
use crate::mc::{run_replicas, summarize, RunSpec, Summary};
use crate::special::{gamma, laguerre};

#[derive(Debug, Clone, PartialEq)]
pub struct BesqPath {
    pub theta: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// 0 at grid points below the zero threshold, `k >= 1` on the k-th
    /// excursion.
    pub excursion_id: Vec<u32>,
    /// Spin of excursion `k` at index `k - 1`.
    pub spins: Vec<i8>,
}

/// Threshold below which a grid value counts as a zero.
pub fn zero_threshold(dt: f64) -> f64 {
    dt.powf(0.9)
}

fn label_excursions(values: &[f64], eps: f64) -> (Vec<u32>, u32) {
    let mut ids = Vec::with_capacity(values.len());
    let mut count = 0u32;
    let mut inside = false;
    for &v in values {
        if v < eps {
            inside = false;
            ids.push(0);
        } else {
            if !inside {
                count += 1;
                inside = true;
            }
            ids.push(count);
        }
    }
    (ids, count)
}

/// One exact transition over a step `dt`.
fn step<R: Rng + ?Sized>(theta: f64, v: f64, dt: f64, rng: &mut R) -> Result<f64> {
    let k = if v > 0.0 {
        Poisson::new(v / (2.0 * dt))
            .map_err(|e| Error::Numerical(format!("BESQ Poisson law: {e}")))?
            .sample(rng)
    } else {
        0.0
    };
    let y: f64 = Gamma::new(theta + k, 1.0)
        .map_err(|e| Error::Numerical(format!("BESQ Gamma law: {e}")))?
        .sample(rng);
    Ok(2.0 * dt * y)
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid("theta", "must lie in (0, 1)"));
    }
    Ok(())
}

/// BESQ(`2 theta`) path on the grid `k dt`, `0 <= k dt <= horizon`, from 0.
pub fn sample_besq<R: Rng + ?Sized>(theta: f64, horizon: f64, dt: f64, rng: &mut R) -> Result<BesqPath> {
    check_theta(theta)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be positive"));
    }
    if !(dt > 0.0 && dt <= horizon / 50.0 * (1.0 + 1e-12)) {
        return Err(invalid("dt", "must lie in (0, horizon/50]"));
    }
    let steps = (horizon / dt).round() as usize;
    let mut values = Vec::with_capacity(steps + 1);
    values.push(0.0);
    let mut v = 0.0;
    for _ in 0..steps {
        v = step(theta, v, dt, rng)?;
        values.push(v);
    }
    let times = (0..=steps).map(|k| k as f64 * dt).collect();
    let (excursion_id, count) = label_excursions(&values, zero_threshold(dt));
    Ok(BesqPath {
        theta,
        times,
        values,
        excursion_id,
        spins: vec![1; count as usize],
    })
}

impl BesqPath {
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Grid index of time `t`.
    pub fn index(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt()).round();
        if !(k >= 0.0 && (k as usize) < self.values.len()) {
            return Err(invalid("t", format!("time {t} outside the path")));
        }
        Ok(k as usize)
    }

    /// Fraction of grid points (time 0 excluded) below the zero threshold.
    pub fn zero_fraction(&self) -> f64 {
        let zeros = self.excursion_id[1..].iter().filter(|&&e| e == 0).count();
        zeros as f64 / (self.values.len() - 1) as f64
    }

    /// Whether no grid point in `[a, b]` lies below `eps`.
    pub fn avoids_zero(&self, a: usize, b: usize, eps: f64) -> bool {
        self.values[a..=b].iter().all(|&v| v >= eps)
    }
}

/// Draws fair excursion spins into `path` and returns
/// `h(t) = sigma R_t^{1-theta}`. Points on the zero set get their own
/// independent sign.
pub fn signed_field<R: Rng + ?Sized>(path: &mut BesqPath, rng: &mut R) -> Vec<f64> {
    for s in &mut path.spins {
        *s = if rng.random::<bool>() { 1 } else { -1 };
    }
    let p = 1.0 - path.theta;
    path.values
        .iter()
        .zip(&path.excursion_id)
        .map(|(&v, &e)| {
            let sign = if e == 0 {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            } else {
                path.spins[e as usize - 1] as f64
            };
            sign * v.powf(p)
        })
        .collect()
}

/// Mean of `(2t)^n L_n^{(theta_poly - 1)}(R_t / 2t)` at each time, for
/// BESQ(`2 theta`) paths. With `theta_poly = theta` these are martingales
/// started at 0.
pub fn check_martingale_with(
    theta: f64,
    theta_poly: f64,
    n: usize,
    times: &[f64],
    spec: &RunSpec,
) -> Result<Vec<(f64, Summary)>> {
    if !(1..=3).contains(&n) {
        return Err(invalid("n", "degree must be 1, 2 or 3"));
    }
    if times.is_empty() || times.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid("times", "need positive times"));
    }
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let dt = horizon / 200.0;
    let rows = run_replicas(spec, |_, rng| {
        let path = sample_besq(theta, horizon, dt, rng)?;
        times
            .iter()
            .map(|&t| {
                let r = path.values[path.index(t)?];
                Ok((2.0 * t).powi(n as i32) * laguerre(n, theta_poly, r / (2.0 * t))?)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            (t, summarize(&col))
        })
        .collect())
}

pub fn check_martingale(theta: f64, n: usize, times: &[f64], spec: &RunSpec) -> Result<Vec<(f64, Summary)>> {
    check_martingale_with(theta, theta, n, times, spec)
}

/// Two-point duality estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    /// `E[R_x^{1-theta} R_y^{1-theta} 1{no zero in [x, y]}]`.
    pub lhs: Summary,
    /// `Gamma(2 - theta)/Gamma(theta) (2x)^{2(1-theta)}`.
    pub rhs: f64,
    /// Same estimate with the zero threshold divided and multiplied by 10.
    pub lhs_low_threshold: Summary,
    pub lhs_high_threshold: Summary,
    /// Mean fraction of grid points on the zero set.
    pub zero_fraction: f64,
}

impl DualityReport {
    pub fn relative_error(&self) -> f64 {
        (self.lhs.mean - self.rhs).abs() / self.rhs
    }
}

/// `Gamma(2 - theta)/Gamma(theta) (2x)^{2(1-theta)}`.
pub fn duality_rhs(theta: f64, x: f64) -> f64 {
    gamma(2.0 - theta) / gamma(theta) * (2.0 * x).powf(2.0 * (1.0 - theta))
}

pub fn check_duality(theta: f64, x: f64, y: f64, dt: f64, spec: &RunSpec) -> Result<DualityReport> {
    check_theta(theta)?;
    if !(x > 0.0) {
        return Err(invalid("x", "must be positive"));
    }
    if x > y {
        return Err(invalid("x", "need x <= y"));
    }
    let eps = zero_threshold(dt);
    let thresholds = [eps, eps / 10.0, eps * 10.0];
    let p = 1.0 - theta;
    let rows = run_replicas(spec, |_, rng| {
        let path = sample_besq(theta, y, dt, rng)?;
        let (a, b) = (path.index(x)?, path.index(y)?);
        let prod = (path.values[a] * path.values[b]).powf(p);
        let mut out = [0.0; 4];
        for (slot, &e) in thresholds.iter().enumerate() {
            if a == b || path.avoids_zero(a, b, e) {
                out[slot] = prod;
            }
        }
        out[3] = path.zero_fraction();
        Ok(out)
    })?;
    let col = |k: usize| summarize(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
    Ok(DualityReport {
        lhs: col(0),
        rhs: duality_rhs(theta, x),
        lhs_low_threshold: col(1),
        lhs_high_threshold: col(2),
        zero_fraction: col(3).mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{gamma_cdf, ks_statistic, McRng};
    use rand::SeedableRng;

    #[test]
    fn marginal_is_gamma_with_scale_two_t() {
        let mut rng = McRng::seed_from_u64(1);
        for &theta in &[0.3, 0.5] {
            let vals: Vec<f64> = (0..4000)
                .map(|_| sample_besq(theta, 1.0, 0.02, &mut rng).unwrap().values[50])
                .collect();
            let ks = ks_statistic(&vals, |r| gamma_cdf(theta, r / 2.0)).unwrap();
            assert!(ks < 1.63 / 4000f64.sqrt(), "theta={theta} ks={ks}");
            assert!(summarize(&vals).within(2.0 * theta, 3.0));
        }
    }

    #[test]
    fn path_invariants() {
        let mut rng = McRng::seed_from_u64(2);
        let path = sample_besq(0.4, 1.0, 0.001, &mut rng).unwrap();
        assert_eq!(path.values[0], 0.0);
        assert!(path.values.iter().all(|&v| v >= 0.0));
        assert_eq!(path.times.len(), 1001);
        let eps = zero_threshold(0.001);
        for k in 1..path.values.len() {
            let (a, b) = (path.excursion_id[k - 1], path.excursion_id[k]);
            if a != b {
                assert!(a == 0 || b == 0 || path.values[k] < eps);
            }
            assert_eq!(path.excursion_id[k] == 0, path.values[k] < eps);
        }
        assert_eq!(path.spins.len() as u32, *path.excursion_id.iter().max().unwrap());
    }

    #[test]
    fn parameter_bounds() {
        let mut rng = McRng::seed_from_u64(3);
        assert!(sample_besq(1.0, 1.0, 0.01, &mut rng).is_err());
        assert!(sample_besq(0.5, 1.0, 0.1, &mut rng).is_err());
        assert!(check_duality(0.3, 1.0, 0.5, 0.01, &RunSpec::new(1, 10)).is_err());
        assert!(check_martingale(0.3, 4, &[1.0], &RunSpec::new(1, 10)).is_err());
    }

    #[test]
    fn signed_field_modulus_and_symmetry() {
        let mut rng = McRng::seed_from_u64(4);
        let mut at_one = Vec::new();
        for _ in 0..2000 {
            let mut path = sample_besq(0.5, 1.0, 0.01, &mut rng).unwrap();
            let h = signed_field(&mut path, &mut rng);
            for (hv, v) in h.iter().zip(&path.values) {
                assert!((hv.abs() - v.sqrt()).abs() < 1e-15);
            }
            at_one.push(h[100]);
        }
        assert!(summarize(&at_one).within(0.0, 3.0));
    }

    #[test]
    fn zero_set_shrinks_as_theta_grows() {
        let frac = |theta: f64| {
            let mut rng = McRng::seed_from_u64(5);
            (0..300)
                .map(|_| sample_besq(theta, 1.0, 0.001, &mut rng).unwrap().zero_fraction())
                .sum::<f64>()
                / 300.0
        };
        let (low, mid, high) = (frac(0.2), frac(0.5), frac(0.9));
        assert!(low > mid && mid > high && high > 0.0, "{low} {mid} {high}");
    }

    #[test]
    fn independent_paths_add_dimensions() {
        let mut rng = McRng::seed_from_u64(6);
        let vals: Vec<f64> = (0..4000)
            .map(|_| {
                let a = sample_besq(0.3, 1.0, 0.02, &mut rng).unwrap();
                let b = sample_besq(0.4, 1.0, 0.02, &mut rng).unwrap();
                a.values[50] + b.values[50]
            })
            .collect();
        let ks = ks_statistic(&vals, |r| gamma_cdf(0.7, r / 2.0)).unwrap();
        assert!(ks < 0.03, "ks={ks}");
    }

    #[test]
    fn first_laguerre_martingale_is_centered() {
        let res = check_martingale(0.5, 1, &[0.5, 1.0], &RunSpec::new(7, 3000)).unwrap();
        for (_, s) in res {
            assert!(s.within(0.0, 3.0));
        }
    }

    #[test]
    fn duality_on_the_diagonal_is_the_moment() {
        let r = check_duality(0.5, 0.5, 0.5, 0.01, &RunSpec::new(8, 4000)).unwrap();
        // theta = 1/2: E[R_x] = 2 theta x = 0.5.
        assert!((r.rhs - 0.5).abs() < 1e-12);
        assert!(r.lhs.within(r.rhs, 3.0));
        let near_two = check_duality(0.99, 0.2, 0.4, 0.004, &RunSpec::new(8, 200)).unwrap();
        assert!(near_two.lhs.mean.is_finite());
    }
}
