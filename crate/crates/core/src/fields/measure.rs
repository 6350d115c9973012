//! Uniform measure on thick points, its positive-spin restriction and the
//! signed field `h_{theta,N}`.

use std::f64::consts::PI;

use super::density::c_theta;
use crate::clusters::VertexSpins;
use crate::error::{invalid, Result};
use crate::graph::{LatticeDomain, Shape};
use crate::special::gamma;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `c_*(a) = (2 sqrt 2)^a e^{a gamma_EM} / (2 a^{1-theta} Gamma(theta))`.
pub fn c_star(a: f64, theta: f64) -> f64 {
    (2.0 * 2f64.sqrt()).powf(a) * (a * EULER_GAMMA).exp() / (2.0 * a.powf(1.0 - theta) * gamma(theta))
}

/// Occupation level `a (log N)^2 / (2 pi)` above which a vertex is thick.
pub fn thick_threshold(a: f64, mesh: usize) -> f64 {
    let l = (mesh as f64).ln();
    a * l * l / (2.0 * PI)
}

/// Weighted point mass on thick points.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosMeasure {
    /// `(vertex, weight)` in increasing vertex order.
    pub atoms: Vec<(u32, f64)>,
    pub a: f64,
    pub theta: f64,
    pub normalization_constant: f64,
}

impl ChaosMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// `sum_x f(x) M({x})` for a per-vertex function `f`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.atoms.iter().map(|&(v, w)| f[v as usize] * w).sum()
    }

    fn filtered(&self, keep: impl Fn(u32) -> bool) -> Self {
        Self {
            atoms: self.atoms.iter().copied().filter(|&(v, _)| keep(v)).collect(),
            ..self.clone()
        }
    }
}

/// Thick-point measure `M_a^N` of an occupation field on the unit disc.
pub fn thick_point_measure(domain: &LatticeDomain, occupation: &[f64], theta: f64, a: f64) -> Result<ChaosMeasure> {
    if domain.shape() != Some(Shape::UnitDisc) {
        return Err(invalid("domain", "thick-point measures need the unit disc"));
    }
    if !(a > 0.0 && a < 2.0) {
        return Err(invalid("a", "thickness must lie in (0, 2)"));
    }
    if !(theta > 0.0) {
        return Err(invalid("theta", "intensity must be positive"));
    }
    if occupation.len() != domain.len() {
        return Err(invalid("occupation", "length differs from the vertex count"));
    }
    let n = domain.mesh() as f64;
    let cst = c_star(a, theta);
    let scale = n.ln().powf(1.0 - theta) / n.powf(2.0 - a) / cst;
    let level = thick_threshold(a, domain.mesh());
    let atoms = occupation
        .iter()
        .enumerate()
        .filter(|(_, &l)| l >= level)
        .map(|(v, _)| {
            let (x, y) = domain.position(v);
            let cr = 1.0 - (x * x + y * y);
            (v as u32, scale * cr.powf(-a))
        })
        .collect();
    Ok(ChaosMeasure {
        atoms,
        a,
        theta,
        normalization_constant: cst,
    })
}

/// Atoms carrying spin `+1`.
pub fn restrict_positive(measure: &ChaosMeasure, spins: &VertexSpins) -> ChaosMeasure {
    measure.filtered(|v| spins.spin[v as usize] > 0)
}

/// Atoms carrying spin `-1`.
pub fn restrict_negative(measure: &ChaosMeasure, spins: &VertexSpins) -> ChaosMeasure {
    measure.filtered(|v| spins.spin[v as usize] < 0)
}

/// Atoms whose spin was inherited from the nearest loop-visited vertex.
pub fn flagged_atoms(measure: &ChaosMeasure, spins: &VertexSpins) -> usize {
    measure
        .atoms
        .iter()
        .filter(|&&(v, _)| spins.flagged[v as usize])
        .count()
}

/// `(h_gamma, f) = (1/Z_gamma) [ (M_a^+, f) - (1/N^2) sum_x f(x) ]`.
pub fn h_gamma_functional(domain: &LatticeDomain, measure_plus: &ChaosMeasure, f: &[f64], zgamma: f64) -> Result<f64> {
    if !(zgamma > 0.0 && zgamma.is_finite()) {
        return Err(invalid("Zgamma", "must be positive"));
    }
    if f.len() != domain.len() {
        return Err(invalid("f", "length differs from the vertex count"));
    }
    let n2 = (domain.mesh() * domain.mesh()) as f64;
    let lebesgue = f.iter().sum::<f64>() / n2;
    Ok((measure_plus.integrate(f) - lebesgue) / zgamma)
}

/// Signed field `h(x) = c_theta sigma_x (2 pi ell_x)^{1-theta}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    pub values: Vec<f64>,
    pub theta: f64,
    pub c_theta: f64,
}

pub fn discrete_field(occupation: &[f64], spins: &VertexSpins, theta: f64) -> Result<DiscreteField> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(invalid("theta", "must lie in (0, 1]"));
    }
    if occupation.len() != spins.spin.len() {
        return Err(invalid("occupation", "length differs from the spin table"));
    }
    let c = c_theta(theta);
    let values = occupation
        .iter()
        .zip(&spins.spin)
        .map(|(&l, &s)| c * s as f64 * (2.0 * PI * l).powf(1.0 - theta))
        .collect();
    Ok(DiscreteField {
        values,
        theta,
        c_theta: c,
    })
}
