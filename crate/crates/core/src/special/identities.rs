//! Zero-variance identity checks between the polynomial, Bessel and
//! exponential forms, evaluated on fixed parameter grids.

use std::collections::BTreeMap;

use serde::Serialize;

use super::bessel::bessel_i;
use super::polynomials::{hermite, laguerre, scaled_laguerre};
use crate::error::{invalid, Result};

/// Largest `gamma^2 t / 2` accepted by the Laguerre–Bessel check.
pub const LAGUERRE_BESSEL_BUDGET: f64 = 30.0;

const MIN_TERMS: usize = 80;
const MAX_TERMS: usize = 400;

/// `|lhs - rhs| / max(1, |rhs|)`.
pub fn scaled_residual(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / rhs.abs().max(1.0)
}

/// Residual between the Laguerre generating series
/// `sum_n (gamma^2 t/2)^n L_n^{(theta-1)}(u^2/(2t)) / (n! Gamma(theta+n))`
/// and its closed form `e^{-gamma^2 t/2} (gamma u/2)^{1-theta} I_{theta-1}(gamma u)`.
pub fn identity_laguerre_bessel(t: f64, u: f64, gamma: f64, theta: f64) -> Result<f64> {
    for (name, v) in [("t", t), ("u", u), ("gamma", gamma), ("theta", theta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(name, "must be positive"));
        }
    }
    let s = gamma * gamma * t / 2.0;
    if s > LAGUERRE_BESSEL_BUDGET {
        return Err(invalid(
            "gamma",
            format!("gamma^2 t / 2 = {s} exceeds the series budget {LAGUERRE_BESSEL_BUDGET}"),
        ));
    }
    let lhs = laguerre_bessel_series(t, u, gamma, theta);
    let rhs = laguerre_bessel_closed_form(t, u, gamma, theta);
    Ok(scaled_residual(lhs, rhs))
}

pub(crate) fn laguerre_bessel_series(t: f64, u: f64, gamma: f64, theta: f64) -> f64 {
    let s = gamma * gamma * t / 2.0;
    let x = u * u / (2.0 * t);
    let mut sum = 0.0;
    let mut quiet = 0;
    for n in 0..MAX_TERMS {
        let term = scaled_laguerre(n, theta, x, s);
        sum += term;
        if n >= MIN_TERMS {
            quiet = if term.abs() < 1e-18 * sum.abs().max(1e-300) {
                quiet + 1
            } else {
                0
            };
            if quiet >= 3 {
                break;
            }
        }
    }
    sum
}

pub(crate) fn laguerre_bessel_closed_form(t: f64, u: f64, gamma: f64, theta: f64) -> f64 {
    let s = gamma * gamma * t / 2.0;
    (-s).exp() * (gamma * gamma * u * u / 4.0).powf((1.0 - theta) / 2.0) * bessel_i(theta - 1.0, gamma * u)
}

/// Residual of `2^{-n} G^{(2n+1)/2} H_{2n+1}(h/sqrt G) = h G^n L_n^{(1/2)}(h^2/(2G))`.
pub fn identity_hermite_laguerre(n: usize, h: f64, g: f64) -> Result<f64> {
    if !(g > 0.0) {
        return Err(invalid("G", "must be positive"));
    }
    let lhs = 0.5f64.powi(n as i32) * g.powf((2 * n + 1) as f64 / 2.0) * hermite(2 * n + 1, h / g.sqrt())?;
    let rhs = h * g.powi(n as i32) * laguerre(n, 1.5, h * h / (2.0 * g))?;
    Ok(scaled_residual(lhs, rhs))
}

/// Partial sums of `sum_n gamma^n t^{n/2} H_n(u/sqrt t) / n!` up to `n_max`.
pub fn hermite_exp_series(gamma: f64, t: f64, u: f64, n_max: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    let root = t.sqrt();
    let mut sum = 0.0;
    let mut scale = 1.0; // gamma^n t^{n/2} / n!
    for n in 0..=n_max {
        sum += scale * hermite(n, u / root)?;
        scale *= gamma * root / (n + 1) as f64;
    }
    Ok(sum)
}

/// Degree at which the Hermite generating series is truncated.
pub const HERMITE_EXP_TERMS: usize = 40;

/// Residual of the Hermite generating function against `e^{gamma u - gamma^2 t/2}`.
pub fn identity_hermite_exp(gamma: f64, t: f64, u: f64) -> Result<f64> {
    let lhs = hermite_exp_series(gamma, t, u, HERMITE_EXP_TERMS)?;
    let rhs = (gamma * u - gamma * gamma * t / 2.0).exp();
    Ok(scaled_residual(lhs, rhs))
}

/// The identity families checked by [`run_identity_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IdentityKind {
    LaguerreBessel,
    HermiteLaguerre,
    HermiteExp,
    /// Closed form of the signed density against its double series.
    MGamma,
}

impl IdentityKind {
    pub const ALL: [IdentityKind; 4] = [
        IdentityKind::LaguerreBessel,
        IdentityKind::HermiteLaguerre,
        IdentityKind::HermiteExp,
        IdentityKind::MGamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityKind::LaguerreBessel => "laguerre-bessel",
            IdentityKind::HermiteLaguerre => "hermite-laguerre",
            IdentityKind::HermiteExp => "hermite-exp",
            IdentityKind::MGamma => "m-gamma",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Tolerance the default grid must meet.
    pub fn tolerance(self) -> f64 {
        match self {
            IdentityKind::MGamma => 1e-8,
            _ => 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub params: BTreeMap<&'static str, f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub which: &'static str,
    pub tolerance: f64,
    pub max_residual: f64,
    pub passed: bool,
    pub points: Vec<GridPoint>,
}

/// Evaluates one identity family on its default grid.
pub fn run_identity_grid(kind: IdentityKind) -> Result<IdentityReport> {
    let mut points = Vec::new();
    let mut push = |params: &[(&'static str, f64)], residual: f64| {
        points.push(GridPoint {
            params: params.iter().copied().collect(),
            residual,
        });
    };
    let axis = [0.5, 1.0, 2.0];
    match kind {
        IdentityKind::LaguerreBessel => {
            for &theta in &[0.25, 0.5, 0.9] {
                for &t in &axis {
                    for &u in &axis {
                        for &gamma in &axis {
                            let r = identity_laguerre_bessel(t, u, gamma, theta)?;
                            push(&[("theta", theta), ("t", t), ("u", u), ("gamma", gamma)], r);
                        }
                    }
                }
            }
        }
        IdentityKind::HermiteLaguerre => {
            for n in 0..=8 {
                for &h in &[-2.0, -0.5, 0.3, 1.5] {
                    for &g in &axis {
                        let r = identity_hermite_laguerre(n, h, g)?;
                        push(&[("n", n as f64), ("h", h), ("G", g)], r);
                    }
                }
            }
        }
        IdentityKind::HermiteExp => {
            // Keeps gamma sqrt(t) <= 2 so forty terms reach double precision.
            let axis = [0.5, 1.0, 1.5];
            for &gamma in &axis {
                for &t in &axis {
                    for &u in &[-1.0, 0.5, 2.0] {
                        let r = identity_hermite_exp(gamma, t, u)?;
                        push(&[("gamma", gamma), ("t", t), ("u", u)], r);
                    }
                }
            }
        }
        IdentityKind::MGamma => {
            for &gamma in &[0.3, 0.8, 1.3] {
                for &theta in &[0.25, 0.5] {
                    for &ell in &[0.1, 0.5, 2.0] {
                        for &g in &[0.2, 0.6] {
                            for &spin in &[1i8, -1] {
                                let r = crate::fields::m_gamma_series_residual(ell, spin, gamma, theta, g)?;
                                push(
                                    &[
                                        ("gamma", gamma),
                                        ("theta", theta),
                                        ("ell", ell),
                                        ("G", g),
                                        ("spin", spin as f64),
                                    ],
                                    r,
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    let max_residual = points.iter().map(|p| p.residual).fold(0.0, f64::max);
    let tolerance = kind.tolerance();
    Ok(IdentityReport {
        which: kind.name(),
        tolerance,
        max_residual,
        passed: max_residual < tolerance,
        points,
    })
}
