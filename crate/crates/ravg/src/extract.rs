//! Sparse model extraction from standardized moments.
//!
//! Every extractor is a pure function of a [`StandardizedMoments`] snapshot:
//! plain least squares, least squares with hard thresholding and refit,
//! feature selection with an annealing schedule, and thresholded gradient
//! descent for the lasso / elastic net / MCP penalties, plus a grid search
//! that tunes the penalty weight to a requested sparsity.

use crate::error::{Error, Result};
use crate::linsolve::{max_eigenvalue_estimate, solve_ridge, solve_spd};
use crate::mat::{max_abs, Matrix};
use crate::model::SparseModel;
use crate::standardize::StandardizedMoments;

/// Iterations of the power method used for step-size estimates.
const POWER_ITERS: usize = 20;
/// Relative ridge weight used when the dense step must be regularized.
const RIDGE_FALLBACK_REL: f64 = 1e-3;
/// Penalty grid spans [eps * lambda_max, lambda_max].
const GRID_DECAY: f64 = 1e-3;
/// Early exit for thresholded gradient descent.
const GD_TOL: f64 = 1e-9;

/// Sparsity-inducing penalty family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Lasso,
    /// Lasso plus a quadratic term `l2_mix/2 * |beta|^2` folded into the
    /// gradient; the threshold step stays plain soft thresholding.
    ElasticNet { l2_mix: f64 },
    /// Minimax concave penalty with constant `b > 1`; large coefficients are
    /// left unshrunk.
    Mcp { b: f64 },
}

/// A penalty family with its weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    pub penalty: Penalty,
    pub lambda: f64,
}

impl PenaltySpec {
    pub fn new(penalty: Penalty, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "penalty weight must be positive, got {lambda}"
            )));
        }
        match penalty {
            Penalty::ElasticNet { l2_mix } if l2_mix < 0.0 => {
                return Err(Error::InvalidParameter(format!(
                    "elastic net quadratic weight must be non-negative, got {l2_mix}"
                )))
            }
            Penalty::Mcp { b } if b <= 1.0 => {
                return Err(Error::InvalidParameter(format!(
                    "mcp constant must exceed 1, got {b}"
                )))
            }
            _ => {}
        }
        Ok(PenaltySpec { penalty, lambda })
    }
}

/// Annealing plan for [`ofsa`]: the survivor count decays from the retained
/// feature count down to `k` over `t_max` iterations.
#[derive(Debug, Clone)]
pub struct FsaSchedule {
    pub k: usize,
    pub t_max: usize,
    pub mu: f64,
    /// Fixed learning rate; `None` re-estimates `0.9 / lambda_max` on the
    /// surviving submatrix as it shrinks.
    pub eta: Option<f64>,
}

impl FsaSchedule {
    pub fn for_sparsity(k: usize) -> Self {
        FsaSchedule { k, t_max: 500, mu: 10.0, eta: None }
    }

    /// Survivor count after iteration `t` (1-based), starting from `p` kept
    /// coordinates.
    pub fn survivors_at(&self, p: usize, t: usize) -> usize {
        let k = self.k.min(p);
        let frac = ((self.t_max as f64 - t as f64) / (t as f64 * self.mu + self.t_max as f64))
            .max(0.0);
        k + ((p - k) as f64 * frac).floor() as usize
    }
}

/// Scalar shrinkage applied elementwise after each gradient step.
/// `thr` must be non-negative (it is `eta * lambda` at call sites).
pub fn threshold_operator(t: f64, thr: f64, penalty: &Penalty) -> f64 {
    debug_assert!(thr >= 0.0);
    match *penalty {
        Penalty::Lasso | Penalty::ElasticNet { .. } => {
            // soft thresholding
            if t > thr {
                t - thr
            } else if t < -thr {
                t + thr
            } else {
                0.0
            }
        }
        Penalty::Mcp { b } => {
            let at = t.abs();
            if at <= thr {
                0.0
            } else if at <= b * thr {
                (t - thr * t.signum()) / (1.0 - 1.0 / b)
            } else {
                t
            }
        }
    }
}

/// Indices of the `k` largest entries of `vals` by absolute value, ascending;
/// ties break toward the lower index.
pub(crate) fn top_k_indices(vals: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| {
        vals[b]
            .abs()
            .total_cmp(&vals[a].abs())
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Compacted standardized system over the retained features.
struct RetainedSystem {
    a: Matrix,
    b: Vec<f64>,
    /// original feature index per compact slot
    index_map: Vec<usize>,
}

fn retained_system(sm: &StandardizedMoments) -> RetainedSystem {
    let idx = sm.retained().to_vec();
    let a = sm.s_xx_std().select_square(&idx);
    let b: Vec<f64> = idx.iter().map(|&j| sm.s_xy_std()[j]).collect();
    RetainedSystem { a, b, index_map: idx }
}

fn refit_on_support(
    sm: &StandardizedMoments,
    support: Vec<usize>,
    k: usize,
) -> Result<SparseModel> {
    if support.is_empty() {
        return Ok(SparseModel::from_standardized(sm, vec![], vec![], k));
    }
    let a = sm.s_xx_std().select_square(&support);
    let b: Vec<f64> = support.iter().map(|&j| sm.s_xy_std()[j]).collect();
    let beta = solve_spd(&a, &b)?;
    Ok(SparseModel::from_standardized(sm, support, beta, k))
}

/// Dense least squares on the retained features.
pub fn ols(sm: &StandardizedMoments) -> Result<SparseModel> {
    let sys = retained_system(sm);
    let beta = solve_spd(&sys.a, &sys.b)?;
    let k = sys.index_map.len();
    Ok(SparseModel::from_standardized(sm, sys.index_map, beta, k))
}

/// Ridge-regularized dense estimate; used directly and as the thresholding
/// fallback for `p > n` or singular systems.
pub fn ridge_beta(sm: &StandardizedMoments, lambda: f64) -> Result<SparseModel> {
    let sys = retained_system(sm);
    let beta = solve_ridge(&sys.a, &sys.b, lambda)?;
    let k = sys.index_map.len();
    Ok(SparseModel::from_standardized(sm, sys.index_map, beta, k))
}

fn default_ridge_lambda(a: &Matrix) -> f64 {
    RIDGE_FALLBACK_REL * a.trace() / a.rows() as f64
}

fn check_sparsity(k: usize, available: usize) -> Result<()> {
    if k == 0 || k > available {
        return Err(Error::InvalidSparsity { requested: k, available });
    }
    Ok(())
}

/// Least squares with hard thresholding: dense estimate, keep the `k`
/// largest-magnitude coefficients, refit on the survivors.
///
/// `ridge_lambda` forces a ridge first step; otherwise ridge kicks in
/// automatically when the system is singular or has fewer (effective)
/// observations than features.
pub fn ols_th(
    sm: &StandardizedMoments,
    k: usize,
    ridge_lambda: Option<f64>,
) -> Result<SparseModel> {
    let sys = retained_system(sm);
    let d = sys.index_map.len();
    check_sparsity(k, d)?;
    let dense = match ridge_lambda {
        Some(lam) => solve_ridge(&sys.a, &sys.b, lam)?,
        None => {
            if (d as u64) > sm.n_effective() {
                solve_ridge(&sys.a, &sys.b, default_ridge_lambda(&sys.a))?
            } else {
                match solve_spd(&sys.a, &sys.b) {
                    Ok(beta) => beta,
                    Err(Error::SingularSystem(_)) => {
                        solve_ridge(&sys.a, &sys.b, default_ridge_lambda(&sys.a))?
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    };
    let picked = top_k_indices(&dense, k);
    let support: Vec<usize> = picked.iter().map(|&slot| sys.index_map[slot]).collect();
    refit_on_support(sm, support, k)
}

/// Feature selection with annealing: gradient steps on the quadratic loss,
/// interleaved with pruning to the schedule's survivor count, then a final
/// least-squares refit on the surviving support.
pub fn ofsa(sm: &StandardizedMoments, sched: &FsaSchedule) -> Result<SparseModel> {
    let sys = retained_system(sm);
    let p0 = sys.index_map.len();
    check_sparsity(sched.k, p0)?;
    if sched.t_max == 0 {
        return Err(Error::InvalidParameter("schedule needs at least one iteration".into()));
    }
    if let Some(eta) = sched.eta {
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {eta}"
            )));
        }
    }

    let mut a_cur = sys.a;
    let mut b_cur = sys.b;
    let mut global: Vec<usize> = sys.index_map;
    let mut beta = vec![0.0; p0];

    let mut eta = match sched.eta {
        Some(e) => e,
        None => 0.9 / max_eigenvalue_estimate(&a_cur, POWER_ITERS).max(f64::MIN_POSITIVE),
    };
    let mut last_estimated_at = p0;

    let mut grad = vec![0.0; p0];
    for t in 1..=sched.t_max {
        let m = beta.len();
        // gradient step restricted to the survivors
        for i in 0..m {
            grad[i] = crate::mat::dot(a_cur.row(i), &beta) - b_cur[i];
        }
        for i in 0..m {
            beta[i] -= eta * grad[i];
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { eta });
        }
        let keep = sched.survivors_at(p0, t);
        if keep < m {
            let sel = top_k_indices(&beta, keep);
            beta = sel.iter().map(|&i| beta[i]).collect();
            b_cur = sel.iter().map(|&i| b_cur[i]).collect();
            global = sel.iter().map(|&i| global[i]).collect();
            a_cur = a_cur.select_square(&sel);
            // restriction can only lower lambda_max, so a stale estimate
            // stays stable; re-estimate once the set has shrunk enough
            if sched.eta.is_none() && keep * 4 <= last_estimated_at * 3 {
                eta = 0.9 / max_eigenvalue_estimate(&a_cur, POWER_ITERS).max(f64::MIN_POSITIVE);
                last_estimated_at = keep;
            }
        }
    }
    debug_assert_eq!(beta.len(), sched.k.min(p0));
    refit_on_support(sm, global, sched.k)
}

/// Thresholded gradient descent iterate, before the final refit. Returns the
/// compact coefficient vector over the retained features.
fn penalized_gd_iterate(
    a: &Matrix,
    b: &[f64],
    spec: &PenaltySpec,
    iters: usize,
    eta: f64,
    warm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let d = b.len();
    let l2 = match spec.penalty {
        Penalty::ElasticNet { l2_mix } => l2_mix,
        _ => 0.0,
    };
    let mut beta = match warm {
        Some(w) => w.to_vec(),
        None => vec![0.0; d],
    };
    let thr = eta * spec.lambda;
    let mut next = vec![0.0; d];
    for _ in 0..iters {
        let mut delta = 0.0f64;
        for i in 0..d {
            let g = crate::mat::dot(a.row(i), &beta) - b[i] + l2 * beta[i];
            next[i] = threshold_operator(beta[i] - eta * g, thr, &spec.penalty);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { eta });
        }
        for i in 0..d {
            delta = delta.max((next[i] - beta[i]).abs());
            beta[i] = next[i];
        }
        if delta < GD_TOL {
            break;
        }
    }
    Ok(beta)
}

fn default_gd_eta(a: &Matrix) -> f64 {
    0.9 / max_eigenvalue_estimate(a, POWER_ITERS).max(f64::MIN_POSITIVE)
}

/// Penalized regression by thresholded gradient descent, refit on the
/// selected support. `eta = None` uses `0.9 / lambda_max`.
pub fn penalized_gd(
    sm: &StandardizedMoments,
    spec: &PenaltySpec,
    iters: usize,
    eta: Option<f64>,
) -> Result<SparseModel> {
    if iters == 0 {
        return Err(Error::InvalidParameter("need at least one iteration".into()));
    }
    let sys = retained_system(sm);
    let eta = eta.unwrap_or_else(|| default_gd_eta(&sys.a));
    let beta = penalized_gd_iterate(&sys.a, &sys.b, spec, iters, eta, None)?;
    let support: Vec<usize> = beta
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| sys.index_map[i])
        .collect();
    let k = support.len();
    refit_on_support(sm, support, k)
}

/// Result of tuning the penalty weight to a sparsity target.
#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub lambda: f64,
    pub model: SparseModel,
    /// Nonzero count of the pre-refit iterate that was selected.
    pub nonzeros: usize,
    /// False when only the empty model fit the target (warning flag).
    pub target_met: bool,
}

/// Pick a penalty weight on an exponential grid from `lambda_max` (the
/// smallest weight giving an empty model, `max|S_xy_std|`) downward, keeping
/// the model whose pre-refit nonzero count is the largest value at most `k`.
/// The walk warm-starts each grid point from the previous iterate and is
/// fully deterministic.
pub fn tune_lambda_for_sparsity(
    sm: &StandardizedMoments,
    penalty: &Penalty,
    k: usize,
    grid_size: usize,
    iters: usize,
) -> Result<TuneOutcome> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter("grid needs at least two points".into()));
    }
    let sys = retained_system(sm);
    check_sparsity(k, sys.index_map.len())?;
    let eta = default_gd_eta(&sys.a);
    let lambda_max = max_abs(&sys.b).max(f64::MIN_POSITIVE);
    let mut warm: Option<Vec<f64>> = None;
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    for i in 0..grid_size {
        let lambda = lambda_max * GRID_DECAY.powf(i as f64 / (grid_size - 1) as f64);
        let spec = PenaltySpec::new(*penalty, lambda)?;
        let beta = penalized_gd_iterate(&sys.a, &sys.b, &spec, iters, eta, warm.as_deref())?;
        let nz = beta.iter().filter(|v| **v != 0.0).count();
        if nz <= k && best.as_ref().map_or(true, |(_, _, bz)| nz > *bz) {
            best = Some((lambda, beta.clone(), nz));
        }
        warm = Some(beta);
    }
    let (lambda, beta, nonzeros) =
        best.expect("grid always contains the empty model at lambda_max");
    let support: Vec<usize> = beta
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| sys.index_map[i])
        .collect();
    let model = refit_on_support(sm, support, k)?;
    Ok(TuneOutcome { lambda, model, nonzeros, target_met: nonzeros > 0 })
}
