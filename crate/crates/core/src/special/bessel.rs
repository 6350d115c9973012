use super::gamma::{gamma, ln_gamma};

/// Above this argument the series is replaced by the large-argument
/// expansion; below double-precision `exp` overflow.
pub const ASYMPTOTIC_SWITCH: f64 = 650.0;

const SERIES_CAP: usize = 5_000;

/// Modified Bessel function of the first kind `I_nu(z)` for `nu > -1`,
/// `z >= 0`.
pub fn bessel_i(nu: f64, z: f64) -> f64 {
    assert!(nu > -1.0, "bessel_i needs nu > -1");
    assert!(z >= 0.0, "bessel_i needs z >= 0");
    if z == 0.0 {
        return if nu == 0.0 {
            1.0
        } else if nu > 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
    }
    if z > ASYMPTOTIC_SWITCH {
        return ln_bessel_i(nu, z).exp();
    }
    series_i(nu, z)
}

/// `ln I_nu(z)`, finite for arguments where `I_nu` itself overflows.
pub fn ln_bessel_i(nu: f64, z: f64) -> f64 {
    assert!(nu > -1.0 && z >= 0.0);
    if z == 0.0 {
        return bessel_i(nu, z).ln();
    }
    if z > ASYMPTOTIC_SWITCH {
        return z - 0.5 * (2.0 * std::f64::consts::PI * z).ln() + asymptotic_correction(nu, z).ln();
    }
    if z < 1e-100 {
        return nu * (z / 2.0).ln() - ln_gamma(nu + 1.0);
    }
    series_i(nu, z).ln()
}

fn series_i(nu: f64, z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = (0.5 * z).powf(nu) / gamma(nu + 1.0);
    let mut sum = term;
    for n in 1..SERIES_CAP {
        let n = n as f64;
        term *= q / (n * (n + nu));
        sum += term;
        if term < sum * 1e-17 && n > q.sqrt() {
            break;
        }
    }
    sum
}

/// `sum_k (-1)^k a_k(nu) / z^k` from the large-argument expansion of
/// `I_nu(z) sqrt(2 pi z) e^{-z}`.
fn asymptotic_correction(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..30 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * z);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    sum
}

/// `e^z K_nu(z)` for `z > 0`, from `K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt`
/// by the trapezoid rule, which converges geometrically for this integrand.
pub fn scaled_bessel_k(nu: f64, z: f64) -> f64 {
    assert!(z > 0.0, "bessel_k needs z > 0");
    let h = 0.02;
    let mut sum = 0.5; // t = 0 endpoint, cosh(0) = 1
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let expo = -z * (t.cosh() - 1.0);
        let f = (expo + nu.abs() * t).exp() * 0.5 * (1.0 + (-2.0 * nu.abs() * t).exp());
        sum += f;
        if expo < -745.0 || (f < 1e-18 * sum && expo < -40.0) {
            break;
        }
        k += 1;
    }
    sum * h
}

/// Modified Bessel function of the second kind `K_nu(z)`.
pub fn bessel_k(nu: f64, z: f64) -> f64 {
    scaled_bessel_k(nu, z) * (-z).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn half_integer_closed_forms() {
        for i in 0..=499 {
            let z = 0.1 + 0.1 * i as f64;
            let pref = (2.0 / (PI * z)).sqrt();
            let c = pref * z.cosh();
            let s = pref * z.sinh();
            assert!(((bessel_i(-0.5, z) - c) / c).abs() < 1e-10, "z={z}");
            assert!(((bessel_i(0.5, z) - s) / s).abs() < 1e-10, "z={z}");
        }
    }

    #[test]
    fn values_at_zero() {
        assert_eq!(bessel_i(0.0, 0.0), 1.0);
        assert_eq!(bessel_i(0.7, 0.0), 0.0);
        assert!(bessel_i(-0.3, 0.0).is_infinite());
    }

    #[test]
    fn known_integer_orders() {
        // I_0(1), I_1(1), I_0(10)
        assert!((bessel_i(0.0, 1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i(1.0, 1.0) - 0.565_159_103_992_485).abs() < 1e-14);
        assert!((bessel_i(0.0, 10.0) / 2_815.716_628_466_254 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn asymptotic_branch_is_continuous_at_the_switch() {
        for &nu in &[-0.75, -0.5, 0.0, 0.3, 0.75] {
            let z = ASYMPTOTIC_SWITCH;
            let series = series_i(nu, z).ln();
            let asymptotic = z - 0.5 * (2.0 * PI * z).ln() + asymptotic_correction(nu, z).ln();
            assert!((series - asymptotic).abs() < 1e-12, "nu={nu}");
        }
        let z = 2000.0;
        // I_{1/2}(z) = sqrt(2/(pi z)) sinh z, so the expansion terminates.
        let expect = z - 0.5 * (2.0 * PI * z).ln();
        assert!((ln_bessel_i(0.5, z) - expect).abs() < 1e-12);
        assert!(bessel_i(0.5, z).is_infinite());
    }

    #[test]
    fn k_matches_reflection_formula() {
        // K_nu = pi/2 (I_{-nu} - I_nu) / sin(nu pi)
        for &nu in &[0.25, 0.5, 0.7] {
            for &z in &[0.05, 0.5, 1.0, 3.0, 8.0] {
                let via_i = PI / 2.0 * (bessel_i(-nu, z) - bessel_i(nu, z)) / (nu * PI).sin();
                let k = bessel_k(nu, z);
                // The difference of I's loses about log10(I/K) ~ 2z/ln 10 digits.
                let tol = 1e-14 * (2.0 * z).exp().max(100.0);
                assert!(((k - via_i) / k).abs() < tol, "nu={nu} z={z}");
            }
        }
        let z = 40.0;
        let closed = (PI / (2.0 * z)).sqrt();
        assert!((scaled_bessel_k(0.5, z) / closed - 1.0).abs() < 1e-13);
    }
}
