//! Accuracy indices of one estimate against the truth.

use crate::{Error, Result};
use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Indices {
    /// `Σ|z_est − z_true|² / Σ|z_meas − z_true|²`
    pub xi_z: f64,
    /// `Σ|x_est − x_true|²`
    pub sigma_x2: f64,
}

fn sq_dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

pub fn perf_indices(
    z_meas: &[Complex64],
    z_est: &[Complex64],
    z_true: &[Complex64],
    x_est: &[Complex64],
    x_true: &[Complex64],
) -> Result<Indices> {
    if z_meas.len() != z_est.len() || z_meas.len() != z_true.len() || x_est.len() != x_true.len() {
        return Err(Error::Dimension("index inputs differ in length".into()));
    }
    let denom = sq_dist(z_meas, z_true);
    if denom == 0.0 {
        return Err(Error::UndefinedIndex("measurements equal the true values; ξ_z is undefined".into()));
    }
    Ok(Indices { xi_z: sq_dist(z_est, z_true) / denom, sigma_x2: sq_dist(x_est, x_true) })
}
