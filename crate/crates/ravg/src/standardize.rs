//! Standardization entirely in moment space: transform a [`MomentSet`] into
//! the moments of the zero-mean, unit-variance feature matrix and centered
//! response, keeping what is needed to map models back to the original scale.

use crate::error::{Error, Result};
use crate::mat::Matrix;
use crate::moments::MomentSet;

pub const DEFAULT_MIN_SIGMA: f64 = 1e-12;

/// Moments of the standardized data, derived without touching raw data:
///
/// ```text
/// sigma_j   = sqrt((S_xx)_jj - mu_j^2)
/// S_xy_std  = Pi (S_xy - mu_y mu_x)          Pi = diag(1/sigma_j)
/// S_xx_std  = Pi (S_xx - mu_x mu_x^T) Pi
/// var_y     = S_yy - mu_y^2
/// ```
///
/// Features whose sigma is (relatively) zero are listed in `dropped`, zeroed
/// out of the standardized moments, and excluded from all extractions.
#[derive(Debug, Clone)]
pub struct StandardizedMoments {
    p: usize,
    n: u64,
    n_effective: u64,
    s_xx_std: Matrix,
    s_xy_std: Vec<f64>,
    var_y: f64,
    sigma_x: Vec<f64>,
    mu_x: Vec<f64>,
    mu_y: f64,
    retained: Vec<usize>,
    dropped: Vec<usize>,
}

impl StandardizedMoments {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Effective sample size for solver decisions (capped under forgetting).
    pub fn n_effective(&self) -> u64 {
        self.n_effective
    }

    /// Standardized second-moment matrix, p-by-p with dropped rows/cols zero.
    pub fn s_xx_std(&self) -> &Matrix {
        &self.s_xx_std
    }

    pub fn s_xy_std(&self) -> &[f64] {
        &self.s_xy_std
    }

    pub fn var_y(&self) -> f64 {
        self.var_y
    }

    pub fn sigma_x(&self) -> &[f64] {
        &self.sigma_x
    }

    pub fn mu_x(&self) -> &[f64] {
        &self.mu_x
    }

    pub fn mu_y(&self) -> f64 {
        self.mu_y
    }

    /// Indices kept for modelling, ascending.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    /// Indices excluded for (near-)zero variance, ascending.
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }
}

pub fn standardize(m: &MomentSet, min_sigma: f64) -> Result<StandardizedMoments> {
    if m.n() < 2 {
        return Err(Error::InsufficientData { need: 2, have: m.n() });
    }
    let p = m.p();
    let mu_x = m.mu_x().to_vec();
    let mu_y = m.mu_y();
    let mut sigma_x = vec![0.0; p];
    for j in 0..p {
        // clamp: fp cancellation can leave a tiny negative variance
        let var = (m.s_xx().get(j, j) - mu_x[j] * mu_x[j]).max(0.0);
        sigma_x[j] = var.sqrt();
    }
    let sigma_max = sigma_x.iter().cloned().fold(0.0f64, f64::max);
    let threshold = min_sigma * sigma_max;
    let mut retained = Vec::with_capacity(p);
    let mut dropped = Vec::new();
    for j in 0..p {
        if sigma_x[j] <= threshold {
            dropped.push(j);
        } else {
            retained.push(j);
        }
    }
    if retained.is_empty() {
        return Err(Error::DegenerateMoments);
    }
    let inv_sigma: Vec<f64> = (0..p)
        .map(|j| if dropped.binary_search(&j).is_ok() { 0.0 } else { 1.0 / sigma_x[j] })
        .collect();
    let mut s_xy_std = vec![0.0; p];
    for j in 0..p {
        s_xy_std[j] = inv_sigma[j] * (m.s_xy()[j] - mu_y * mu_x[j]);
    }
    let mut s_xx_std = Matrix::zeros(p, p);
    for i in 0..p {
        let wi = inv_sigma[i];
        let row_in = m.s_xx().row(i);
        let row_out = s_xx_std.row_mut(i);
        if wi == 0.0 {
            continue;
        }
        for j in 0..p {
            row_out[j] = wi * inv_sigma[j] * (row_in[j] - mu_x[i] * mu_x[j]);
        }
    }
    let var_y = (m.s_yy() - mu_y * mu_y).max(0.0);
    Ok(StandardizedMoments {
        p,
        n: m.n(),
        n_effective: m.effective_n(),
        s_xx_std,
        s_xy_std,
        var_y,
        sigma_x,
        mu_x,
        mu_y,
        retained,
        dropped,
    })
}
