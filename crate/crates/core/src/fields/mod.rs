//! Thick-point chaos measures, the discrete signed field and `m_gamma`.

mod density;
mod measure;

pub use density::{c_theta, m_gamma_density, m_gamma_series, m_gamma_series_residual};
pub use measure::{
    c_star, discrete_field, flagged_atoms, h_gamma_functional, restrict_negative, restrict_positive,
    thick_point_measure, thick_threshold, ChaosMeasure, DiscreteField, EULER_GAMMA,
};
