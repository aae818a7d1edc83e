//! Seedable generators for the synthetic experiment protocols: uniformly
//! correlated designs, sparse coefficient vectors, regression/classification
//! responses, sinusoidally drifting coefficients, dynamic pricing streams and
//! pairwise interaction expansion.
//!
//! Everything is driven by the deterministic [`Rng`](crate::rng::Rng); equal
//! seeds give bit-identical streams.

use std::io::Write;

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Regression,
    Classification,
}

/// Settings for one synthetic dataset.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub p: usize,
    pub n: usize,
    /// true support size; support sits at features 10, 20, ..., 10*k_star
    pub k_star: usize,
    /// signal strength of every true coefficient
    pub beta_strength: f64,
    /// design correlation parameter; pairwise correlation alpha^2/(1+alpha^2)
    pub alpha_corr: f64,
    pub task: Task,
    pub seed: u64,
    /// set false for the noiseless variant
    pub noise: bool,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidDimension("p must be >= 1".into()));
        }
        if self.k_star * 10 > self.p {
            return Err(Error::InvalidParameter(format!(
                "true support {{10j}} needs 10*k_star <= p, got k*={} p={}",
                self.k_star, self.p
            )));
        }
        if !(self.beta_strength > 0.0) {
            return Err(Error::InvalidParameter("signal strength must be positive".into()));
        }
        if self.alpha_corr < 0.0 {
            return Err(Error::InvalidParameter("correlation parameter must be >= 0".into()));
        }
        Ok(())
    }
}

/// Sparse truth with `strength` at features `10, 20, ..., 10k` (1-based),
/// zero elsewhere.
pub fn sparse_beta(p: usize, k_star: usize, strength: f64) -> Result<Vec<f64>> {
    sparse_beta_strided(p, k_star, strength, 10)
}

/// Same layout on an arbitrary stride, for settings where `10*k > p`.
pub fn sparse_beta_strided(p: usize, k: usize, strength: f64, stride: usize) -> Result<Vec<f64>> {
    if stride == 0 || k * stride > p {
        return Err(Error::InvalidParameter(format!(
            "support stride {stride} with k={k} does not fit p={p}"
        )));
    }
    let mut beta = vec![0.0; p];
    for j in 1..=k {
        beta[j * stride - 1] = strength;
    }
    Ok(beta)
}

/// Indices of the nonzero coefficients, ascending.
pub fn support_of(beta: &[f64]) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// One design row `x = alpha * z * 1 + u`, `z` scalar standard normal and `u`
/// i.i.d. standard normal.
pub fn fill_design_row(rng: &mut Rng, alpha_corr: f64, x: &mut [f64]) {
    let z = if alpha_corr != 0.0 { rng.next_normal() } else { 0.0 };
    let base = alpha_corr * z;
    for v in x.iter_mut() {
        *v = base + rng.next_normal();
    }
}

/// Response for a design row: `x^T beta + eta` for regression,
/// `sign(x^T beta + eta)` in {-1, +1} for classification (sign(0) = +1).
pub fn gen_response(
    x: &[f64],
    beta_star: &[f64],
    task: Task,
    rng: &mut Rng,
    noise: bool,
) -> f64 {
    debug_assert_eq!(x.len(), beta_star.len());
    let mut y = crate::mat::dot(x, beta_star);
    if noise {
        y += rng.next_normal();
    }
    match task {
        Task::Regression => y,
        Task::Classification => {
            if y >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
    }
}

/// Streaming generator over a [`GenConfig`].
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    cfg: GenConfig,
    beta_star: Vec<f64>,
    rng: Rng,
}

impl SyntheticStream {
    pub fn new(cfg: GenConfig, beta_star: Vec<f64>) -> Self {
        assert_eq!(beta_star.len(), cfg.p);
        let rng = Rng::new(cfg.seed);
        SyntheticStream { cfg, beta_star, rng }
    }

    pub fn from_config(cfg: GenConfig) -> Result<Self> {
        cfg.validate()?;
        let beta = sparse_beta(cfg.p, cfg.k_star, cfg.beta_strength)?;
        Ok(SyntheticStream::new(cfg, beta))
    }

    pub fn beta_star(&self) -> &[f64] {
        &self.beta_star
    }

    pub fn config(&self) -> &GenConfig {
        &self.cfg
    }

    /// Fill `x` with the next design row and return its response.
    pub fn next_into(&mut self, x: &mut [f64]) -> f64 {
        fill_design_row(&mut self.rng, self.cfg.alpha_corr, x);
        gen_response(x, &self.beta_star, self.cfg.task, &mut self.rng, self.cfg.noise)
    }
}

/// Drifting-coefficient stream settings: the j-th nonzero coefficient
/// (feature `10j`) follows `a * sin(2*pi*(t - 100j)/t_period) + b`.
#[derive(Debug, Clone)]
pub struct DriftConfig {
    pub p: usize,
    pub k: usize,
    pub amplitude: f64,
    pub offset: f64,
    pub t_period: f64,
    /// observations generated per time step
    pub batch: usize,
    pub steps: usize,
    pub alpha_corr: f64,
}

impl DriftConfig {
    /// Defaults of the drifting regression experiment: p=100, k=10, a=0.4,
    /// b=0.6, period 1000, 1000 observations per step, one full period.
    pub fn regression_defaults() -> Self {
        DriftConfig {
            p: 100,
            k: 10,
            amplitude: 0.4,
            offset: 0.6,
            t_period: 1000.0,
            batch: 1000,
            steps: 1000,
            alpha_corr: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_period > 0.0) {
            return Err(Error::InvalidParameter("period must be positive".into()));
        }
        if !self.amplitude.is_finite() || !self.offset.is_finite() {
            return Err(Error::InvalidParameter("amplitude/offset must be finite".into()));
        }
        if self.k * 10 > self.p {
            return Err(Error::InvalidParameter(format!(
                "drift support needs 10k <= p, got k={} p={}",
                self.k, self.p
            )));
        }
        Ok(())
    }
}

/// Coefficient vector at time step `t` (1-based).
pub fn gen_drift_coeffs(cfg: &DriftConfig, t: usize) -> Vec<f64> {
    let mut beta = vec![0.0; cfg.p];
    for j in 1..=cfg.k {
        let phase = 2.0 * std::f64::consts::PI * (t as f64 - 100.0 * j as f64) / cfg.t_period;
        beta[10 * j - 1] = cfg.amplitude * phase.sin() + cfg.offset;
    }
    beta
}

/// Dynamic pricing stream: demand is a linear response to a uniformly drawn
/// price (fixed negative coefficient) plus drifting covariate effects.
#[derive(Debug, Clone)]
pub struct PricingConfig {
    /// total feature count, price is feature 0
    pub p: usize,
    /// nonzero drifting covariates among features 1..p
    pub k: usize,
    pub gamma: f64,
    pub intercept: f64,
    pub price_lo: f64,
    pub price_hi: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub t_period: f64,
    pub batch: usize,
    pub steps: usize,
}

impl PricingConfig {
    pub fn defaults() -> Self {
        PricingConfig {
            p: 100,
            k: 9,
            gamma: -0.5,
            intercept: 0.0,
            price_lo: 10.0,
            price_hi: 20.0,
            amplitude: 0.2,
            offset: 0.4,
            t_period: 2000.0,
            batch: 200,
            steps: 2000,
        }
    }
}

/// One pricing observation at time step `t`: feature 0 is the price, the
/// drifting covariates are standard normal. Returns (x, demand).
pub fn gen_pricing_obs(cfg: &PricingConfig, t: usize, rng: &mut Rng, noise: bool, x: &mut [f64]) -> f64 {
    debug_assert_eq!(x.len(), cfg.p);
    x[0] = rng.next_uniform(cfg.price_lo, cfg.price_hi);
    for v in x[1..].iter_mut() {
        *v = rng.next_normal();
    }
    let mut demand = cfg.intercept + cfg.gamma * x[0];
    for j in 1..=cfg.k {
        let phase = 2.0 * std::f64::consts::PI * (t as f64 - 100.0 * j as f64) / cfg.t_period;
        let coeff = cfg.amplitude * phase.sin() + cfg.offset;
        demand += coeff * x[10 * j - 1 + 1];
    }
    if noise {
        demand += rng.next_normal();
    }
    demand
}

/// Append squares and ordered pairwise products:
/// `(x_1..x_p, x_1^2..x_p^2, x_i*x_j for i<j lexicographic)`.
/// Output length `p + p + p(p-1)/2`; for p=90 that is 4185.
pub fn expand_interactions(x: &[f64]) -> Vec<f64> {
    let p = x.len();
    let mut out = Vec::with_capacity(2 * p + p * (p - 1) / 2);
    out.extend_from_slice(x);
    for &v in x {
        out.push(v * v);
    }
    for i in 0..p {
        for j in i + 1..p {
            out.push(x[i] * x[j]);
        }
    }
    out
}

/// Write observations as CSV with header `x1,...,xp,y`. Values use shortest
/// round-trip formatting, so reading the file back reproduces every f64 bit
/// for bit.
pub fn write_csv<W: Write>(mut w: W, p: usize, rows: impl Iterator<Item = (Vec<f64>, f64)>) -> Result<()> {
    let header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    writeln!(w, "{},y", header.join(","))?;
    for (x, y) in rows {
        debug_assert_eq!(x.len(), p);
        let mut line = String::new();
        for v in &x {
            line.push_str(&format!("{v},"));
        }
        line.push_str(&format!("{y}"));
        writeln!(w, "{line}")?;
    }
    Ok(())
}
