use crate::error::{invalid, Result};

/// Largest degree accepted by the monic evaluators; the constant
/// coefficient of degree-60 Laguerre polynomials is near `(60!)^2`.
pub const MAX_DEGREE: usize = 60;

fn check_degree(n: usize) -> Result<()> {
    if n > MAX_DEGREE {
        return Err(invalid("n", format!("degree {n} exceeds {MAX_DEGREE}")));
    }
    Ok(())
}

/// Coefficients (constant term first) of the monic generalized Laguerre
/// polynomial orthogonal for the Gamma(`theta`) weight `u^{theta-1} e^{-u}`.
pub fn laguerre_coefficients(n: usize, theta: f64) -> Result<Vec<f64>> {
    check_degree(n)?;
    if !(theta > 0.0) {
        return Err(invalid("theta", "Laguerre parameter needs theta > 0"));
    }
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    // c_i = (-1)^{n-i} Gamma(n+theta) n! / ((n-i)! Gamma(theta+i) i!)
    for i in (0..n).rev() {
        let fi = i as f64;
        c[i] = -c[i + 1] * (theta + fi) * (fi + 1.0) / (n - i) as f64;
    }
    Ok(c)
}

/// Monic Laguerre polynomial `L_n^{(theta-1)}(u)`.
pub fn laguerre(n: usize, theta: f64, u: f64) -> Result<f64> {
    let c = laguerre_coefficients(n, theta)?;
    Ok(horner(&c, u))
}

/// Coefficients (constant term first) of the monic Hermite polynomial
/// orthogonal for `e^{-x^2/2}`.
pub fn hermite_coefficients(n: usize) -> Result<Vec<f64>> {
    check_degree(n)?;
    let mut c = vec![0.0; n + 1];
    // d_i multiplies x^{n-2i}: (-1)^i n! / (i! (n-2i)! 2^i)
    let mut d = 1.0;
    for i in 0..=n / 2 {
        c[n - 2 * i] = d;
        let k = (n - 2 * i) as f64;
        d *= -k * (k - 1.0) / (2.0 * (i + 1) as f64);
    }
    Ok(c)
}

/// Monic Hermite polynomial `H_n(x)`.
pub fn hermite(n: usize, x: f64) -> Result<f64> {
    let c = hermite_coefficients(n)?;
    Ok(horner(&c, x))
}

/// `s^n L_n^{(theta-1)}(u) / (n! Gamma(n + theta))` from the explicit sum,
/// regrouped so that no factor overflows for large `n`.
pub(crate) fn scaled_laguerre(n: usize, theta: f64, u: f64, s: f64) -> f64 {
    // sum_i (-1)^{n-i} [s^{n-i}/(n-i)!] [(s u)^i / (i! Gamma(theta+i))]
    let mut left = vec![1.0; n + 1]; // s^k / k!
    for k in 1..=n {
        left[k] = left[k - 1] * s / k as f64;
    }
    let mut right = 1.0 / super::gamma(theta); // (s u)^i / (i! Gamma(theta + i))
    let mut sum = 0.0;
    for i in 0..=n {
        let sign = if (n - i).is_multiple_of(2) { 1.0 } else { -1.0 };
        sum += sign * left[n - i] * right;
        right *= s * u / ((i + 1) as f64 * (theta + i as f64));
    }
    sum
}

pub(crate) fn horner(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}
