//! Wick renormalized powers of the occupation field, the Gaussian free
//! field and the signed field.

use super::gamma::ln_gamma;
use super::polynomials::{hermite, laguerre};
use crate::error::{invalid, Result};
use crate::graph::{GreenTable, LatticeDomain};
use crate::loopsoup::LoopSoupSampler;
use crate::mc::{run_replicas, summarize, RunSpec, Summary};

fn check_variance(g: f64) -> Result<()> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(invalid("G", "Green diagonal must be positive"));
    }
    Ok(())
}

/// `:ell^n: = G^n L_n^{(theta-1)}(ell / G)`.
pub fn wick_local(ell: f64, g: f64, n: usize, theta: f64) -> Result<f64> {
    check_variance(g)?;
    Ok(g.powi(n as i32) * laguerre(n, theta, ell / g)?)
}

/// `:phi^n: = G^{n/2} H_n(phi / sqrt(G))`.
pub fn wick_gff(phi: f64, g: f64, n: usize) -> Result<f64> {
    check_variance(g)?;
    let s = g.sqrt();
    Ok(s.powi(n as i32) * hermite(n, phi / s)?)
}

/// `:h ell^n: = h G^n L_n^{(theta*-1)}(ell / G)` with the dual intensity
/// `theta* = 2 - theta`.
pub fn wick_mixed(h: f64, ell: f64, g: f64, n: usize, theta: f64) -> Result<f64> {
    check_variance(g)?;
    if !(theta > 0.0 && theta <= 0.5) {
        return Err(invalid("theta", "mixed Wick powers need theta in (0, 1/2]"));
    }
    Ok(h * g.powi(n as i32) * laguerre(n, 2.0 - theta, ell / g)?)
}

/// Monte Carlo estimate of `E[:l_z^n: :l_w^m:]` with its predicted value
/// `1{n=m} Gamma(theta+n) n! / Gamma(theta) G(z,w)^{2n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WickCovariance {
    pub estimate: Summary,
    pub predicted: f64,
    pub g_zw: f64,
}

/// `Gamma(theta+n) n! / Gamma(theta)`.
pub fn wick_norm(theta: f64, n: usize) -> f64 {
    (ln_gamma(theta + n as f64) + ln_gamma(n as f64 + 1.0) - ln_gamma(theta)).exp()
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_wick_covariance(
    domain: &LatticeDomain,
    green: &GreenTable,
    theta: f64,
    n: usize,
    m: usize,
    z: usize,
    w: usize,
    spec: &RunSpec,
) -> Result<WickCovariance> {
    if !(1..=3).contains(&n) || !(1..=3).contains(&m) {
        return Err(invalid("n", "Wick degrees must lie in 1..=3"));
    }
    if z == w || z >= domain.len() || w >= domain.len() {
        return Err(invalid("probe", "need two distinct vertices of the domain"));
    }
    let sampler = LoopSoupSampler::new(domain, green, theta)?;
    let (cz, cw) = (green.column(z), green.column(w));
    let (gzz, gww, gzw) = (cz[z], cw[w], cz[w]);
    let products = run_replicas(spec, |_, rng| {
        let s = sampler.sample(rng)?;
        Ok(wick_local(s.occupation[z], gzz, n, theta)? * wick_local(s.occupation[w], gww, m, theta)?)
    })?;
    let predicted = if n == m {
        wick_norm(theta, n) * gzw.powi(2 * n as i32)
    } else {
        0.0
    };
    Ok(WickCovariance {
        estimate: summarize(&products),
        predicted,
        g_zw: gzw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_wick_powers() {
        assert_eq!(wick_local(1.3, 0.7, 0, 0.4).unwrap(), 1.0);
        assert!((wick_local(1.3, 0.7, 1, 0.4).unwrap() - (1.3 - 0.4 * 0.7)).abs() < 1e-14);
        assert!((wick_gff(0.9, 0.6, 2).unwrap() - (0.81 - 0.6)).abs() < 1e-14);
        assert_eq!(wick_mixed(-0.8, 1.0, 0.5, 0, 0.3).unwrap(), -0.8);
    }

    #[test]
    fn mixed_power_is_odd_in_h() {
        for n in 0..5 {
            let a = wick_mixed(0.7, 1.1, 0.4, n, 0.25).unwrap();
            let b = wick_mixed(-0.7, 1.1, 0.4, n, 0.25).unwrap();
            assert_eq!(a, -b);
        }
        assert!(wick_mixed(1.0, 1.0, 1.0, 1, 0.7).is_err());
    }

    #[test]
    fn half_intensity_local_power_is_half_the_gff_square() {
        // With ell = phi^2 / 2 at theta = 1/2, :ell: = (1/2) :phi^2:.
        for &phi in &[-2.0, -0.3, 0.0, 0.8, 1.9] {
            for &g in &[0.3, 1.0, 2.2] {
                let ell = phi * phi / 2.0;
                let lhs = wick_local(ell, g, 1, 0.5).unwrap();
                let rhs = 0.5 * wick_gff(phi, g, 2).unwrap();
                assert!((lhs - rhs).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn wick_norms() {
        assert!((wick_norm(0.5, 1) - 0.5).abs() < 1e-14);
        assert!((wick_norm(0.3, 2) - 2.0 * 0.3 * 1.3).abs() < 1e-13);
    }

    #[test]
    fn covariance_estimate_on_small_disc() {
        use crate::graph::{build_domain, Shape};
        let d = build_domain(Shape::UnitDisc, 8).unwrap();
        let g = GreenTable::new(&d).unwrap();
        let z = d.origin();
        let w = d.index_of(1, 0).unwrap();
        let spec = RunSpec::new(12, 20_000);
        let one = estimate_wick_covariance(&d, &g, 0.5, 1, 1, z, w, &spec).unwrap();
        assert!((one.predicted - 0.5 * one.g_zw * one.g_zw).abs() < 1e-15);
        assert!(one.estimate.within(one.predicted, 3.0));
        let mixed = estimate_wick_covariance(&d, &g, 0.5, 1, 2, z, w, &spec).unwrap();
        assert_eq!(mixed.predicted, 0.0);
        assert!(mixed.estimate.within(0.0, 3.0));
        assert!(estimate_wick_covariance(&d, &g, 0.5, 1, 1, z, z, &spec).is_err());
        assert!(estimate_wick_covariance(&d, &g, 0.5, 4, 1, z, w, &spec).is_err());
    }

    #[test]
    fn rejects_nonpositive_variance() {
        assert!(wick_local(1.0, 0.0, 1, 0.5).is_err());
        assert!(wick_gff(1.0, -1.0, 1).is_err());
    }
}
