//! The signed-field constant `c_theta` and the density `m_gamma`.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::special::{gamma, identities::scaled_residual, ln_bessel_i, ln_gamma, scaled_bessel_k};
use crate::special::{wick_local, wick_mixed, MAX_DEGREE};

/// `c_theta = 2^{theta-1} Gamma(theta) / Gamma(2 - theta)`.
pub fn c_theta(theta: f64) -> f64 {
    2f64.powf(theta - 1.0) * gamma(theta) / gamma(2.0 - theta)
}

fn check(ell: f64, spin: i8, gamma_: f64, theta: f64, g: f64) -> Result<()> {
    if !(gamma_ > 0.0 && gamma_ < 2f64.sqrt()) {
        return Err(invalid("gamma", "must lie in (0, sqrt 2)"));
    }
    if !(theta > 0.0 && theta <= 0.5) {
        return Err(invalid("theta", "must lie in (0, 1/2]"));
    }
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(invalid("ell", "occupation must be positive"));
    }
    if !(g > 0.0 && g.is_finite()) {
        return Err(invalid("G", "Green diagonal must be positive"));
    }
    if spin != 1 && spin != -1 {
        return Err(invalid("spin", "must be +1 or -1"));
    }
    Ok(())
}

/// Closed form of `m_gamma` at a vertex with occupation `ell`, cluster spin
/// `spin` and Green diagonal `g`:
///
/// `Gamma(theta) (a 2 pi ell)^{(1-theta)/2} e^{-a 2 pi G}
///  [I_{theta-1}(z) + spin I_{1-theta}(z)]`, `a = gamma^2/2`,
/// `z = gamma sqrt(2 * 2 pi ell)`.
///
/// The difference of Bessel functions for `spin = -1` is evaluated through
/// `I_{-nu} - I_{nu} = (2/pi) sin(pi nu) K_nu`, which avoids cancellation.
pub fn m_gamma_density(ell: f64, spin: i8, gamma_: f64, theta: f64, g: f64) -> Result<f64> {
    check(ell, spin, gamma_, theta, g)?;
    let a = gamma_ * gamma_ / 2.0;
    let z = gamma_ * (4.0 * PI * ell).sqrt();
    let nu = 1.0 - theta;
    let mut log = ln_gamma(theta) + 0.5 * nu * (a * 2.0 * PI * ell).ln() - a * 2.0 * PI * g;
    if spin > 0 {
        let (lo, hi) = (ln_bessel_i(-nu, z), ln_bessel_i(nu, z));
        log += lo + (hi - lo).exp().ln_1p();
    } else {
        log += (2.0 / PI * (PI * nu).sin()).ln() + scaled_bessel_k(nu, z).ln() - z;
    }
    let value = log.exp();
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "m_gamma overflow at ell={ell}, gamma={gamma_}"
        )));
    }
    Ok(value)
}

/// Truncated double series of Wick powers defining `m_gamma`, summed up to
/// degree `terms`.
pub fn m_gamma_series(ell: f64, spin: i8, gamma_: f64, theta: f64, g: f64, terms: usize) -> Result<f64> {
    check(ell, spin, gamma_, theta, g)?;
    let dual = 2.0 - theta;
    let h = c_theta(theta) * spin as f64 * (2.0 * PI * ell).powf(1.0 - theta);
    let step = gamma_ * gamma_ / 2.0 * 2.0 * PI;
    let (mut even, mut odd) = (0.0, 0.0);
    for k in 0..=terms.min(MAX_DEGREE) {
        let kf = k as f64;
        let ln_pre = kf * step.ln() - ln_gamma(kf + 1.0);
        let pre_even = (ln_pre + ln_gamma(theta) - ln_gamma(kf + theta)).exp();
        let pre_odd = (ln_pre + ln_gamma(dual) - ln_gamma(kf + dual)).exp();
        even += pre_even * wick_local(ell, g, k, theta)?;
        odd += pre_odd * wick_mixed(h, ell, g, k, theta)?;
    }
    Ok(even + gamma_.powf(2.0 * (1.0 - theta)) * odd)
}

/// Scaled residual between the series (at maximal degree) and the closed
/// form.
pub fn m_gamma_series_residual(ell: f64, spin: i8, gamma_: f64, theta: f64, g: f64) -> Result<f64> {
    let series = m_gamma_series(ell, spin, gamma_, theta, g, MAX_DEGREE)?;
    let closed = m_gamma_density(ell, spin, gamma_, theta, g)?;
    Ok(scaled_residual(series, closed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_theta_at_half_is_sqrt_two() {
        assert!((c_theta(0.5) - 2f64.sqrt()).abs() < 1e-14);
        assert!((c_theta(1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn half_intensity_reduces_to_exponentials() {
        for &(ell, gam, g) in &[(0.3, 0.5, 0.4), (1.7, 1.2, 0.9), (5.0, 0.8, 1.5)] {
            let z = gam * (4.0 * PI * ell).sqrt();
            let damp = (-gam * gam / 2.0 * 2.0 * PI * g).exp();
            let plus = m_gamma_density(ell, 1, gam, 0.5, g).unwrap();
            let minus = m_gamma_density(ell, -1, gam, 0.5, g).unwrap();
            assert!(scaled_residual(plus, damp * z.exp()) < 1e-12);
            assert!((minus / (damp * (-z).exp()) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn negative_spin_vanishes_relative_to_positive() {
        let ratio = |ell: f64| {
            m_gamma_density(ell, -1, 1.0, 0.3, 0.5).unwrap() / m_gamma_density(ell, 1, 1.0, 0.3, 0.5).unwrap()
        };
        assert!(ratio(50.0) < ratio(5.0));
        assert!(ratio(50.0) < 1e-10);
        assert!(ratio(0.01) > 0.0);
    }

    #[test]
    fn negative_spin_matches_direct_bessel_difference() {
        use crate::special::bessel_i;
        let (ell, gam, theta, g) = (0.2, 0.7, 0.25, 0.3);
        let z = gam * (4.0 * PI * ell).sqrt();
        let a = gam * gam / 2.0;
        let direct = gamma(theta)
            * (a * 2.0 * PI * ell).powf((1.0 - theta) / 2.0)
            * (-a * 2.0 * PI * g).exp()
            * (bessel_i(theta - 1.0, z) - bessel_i(1.0 - theta, z));
        let closed = m_gamma_density(ell, -1, gam, theta, g).unwrap();
        assert!((closed / direct - 1.0).abs() < 1e-8);
    }

    #[test]
    fn series_matches_closed_form() {
        for &theta in &[0.1, 0.25, 0.5] {
            for &spin in &[1i8, -1] {
                let r = m_gamma_series_residual(0.8, spin, 1.0, theta, 0.4).unwrap();
                assert!(r < 1e-8, "theta={theta} spin={spin} r={r}");
            }
        }
    }

    #[test]
    fn preconditions() {
        assert!(m_gamma_density(1.0, 1, 1.5, 0.3, 1.0).is_err());
        assert!(m_gamma_density(1.0, 1, 1.0, 0.7, 1.0).is_err());
        assert!(m_gamma_density(1.0, 0, 1.0, 0.3, 1.0).is_err());
    }
}
