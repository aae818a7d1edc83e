//! Metrics, the sequential regret harness, theoretical recovery-bound
//! calculators and the drift-adaptation experiment.

use crate::error::{Error, Result};
use crate::extract;
use crate::linsolve::{invert_spd, rank1_update_inverse, solve_spd};
use crate::mat::{dot, Matrix};
use crate::moments::{MomentSet, Observation, WeightMode};
use crate::rng::Rng;
use crate::simgen::{fill_design_row, gen_drift_coeffs, DriftConfig};
use crate::standardize::{standardize, DEFAULT_MIN_SIGMA};

/// Fraction of the true support present in the selected set.
pub fn detection_rate(selected: &[usize], truth: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::UndefinedMetric("detection rate needs a nonempty truth".into()));
    }
    let hits = truth.iter().filter(|t| selected.contains(t)).count();
    Ok(hits as f64 / truth.len() as f64)
}

pub fn rmse(yhat: &[f64], y: &[f64]) -> Result<f64> {
    if yhat.len() != y.len() {
        return Err(Error::InvalidDimension(format!(
            "prediction and target lengths differ: {} vs {}",
            yhat.len(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::UndefinedMetric("rmse of an empty sample".into()));
    }
    let mse = yhat
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64;
    Ok(mse.sqrt())
}

/// Area under the ROC curve as the Mann–Whitney rank statistic; tied scores
/// count one half. Labels are +1/-1 and both classes must be present.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidDimension(format!(
            "score and label lengths differ: {} vs {}",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|l| **l > 0.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("auc needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average ranks over tied groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0; // 1-based ranks
        for &idx in &order[i..=j] {
            if labels[idx] > 0.0 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Sequential regret record. `cumulative_loss` and `offline_loss` are summed
/// squared losses over the window `(n0, checkpoint]`; the offline term is the
/// minimum achievable on that window. `regret` is their difference divided by
/// the checkpoint sample size.
#[derive(Debug, Clone)]
pub struct RegretTrace {
    pub checkpoints: Vec<usize>,
    pub cumulative_loss: Vec<f64>,
    pub offline_loss: Vec<f64>,
    pub regret: Vec<f64>,
}

impl RegretTrace {
    /// Least-squares slope of log(regret) against log(n).
    pub fn loglog_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .checkpoints
            .iter()
            .zip(&self.regret)
            .filter(|(_, r)| **r > 0.0)
            .map(|(n, r)| ((*n as f64).ln(), r.ln()))
            .collect();
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (m * sxy - sx * sy) / (m * sxx - sx * sx)
    }
}

/// Configuration of the sequential harness.
#[derive(Debug, Clone)]
pub struct RegretConfig {
    pub p: usize,
    /// `Some(k)`: sparse mode, the deployed model is re-extracted by
    /// least-squares-with-thresholding at each checkpoint and the offline
    /// comparator is the same extraction on the prefix. `None`: dense
    /// sequential least squares via rank-1 inverse updates, exact comparator.
    pub sparsity: Option<usize>,
    /// warmup boundary n0; default max(p+1, ceil(400 ln n_total))
    pub warmup: Option<usize>,
    /// ridge weight used during warmup
    pub ridge_lambda: f64,
    /// strictly increasing; the last entry is the stream length
    pub checkpoints: Vec<usize>,
    /// full refactorization cadence of the rank-1 recursion
    pub refactor_interval: usize,
}

impl RegretConfig {
    pub fn dense(p: usize, checkpoints: Vec<usize>) -> Self {
        RegretConfig {
            p,
            sparsity: None,
            warmup: None,
            ridge_lambda: 1.0,
            checkpoints,
            refactor_interval: 1000,
        }
    }

    fn n0(&self, n_total: usize) -> usize {
        self.warmup
            .unwrap_or_else(|| (self.p + 1).max((400.0 * (n_total as f64).ln()).ceil() as usize))
    }
}

#[derive(Clone)]
struct RawSums {
    xtx: Matrix,
    xty: Vec<f64>,
    syy: f64,
    n: usize,
}

impl RawSums {
    fn new(p: usize) -> Self {
        RawSums { xtx: Matrix::zeros(p, p), xty: vec![0.0; p], syy: 0.0, n: 0 }
    }

    fn add(&mut self, x: &[f64], y: f64) {
        let p = self.xty.len();
        for i in 0..p {
            let xi = x[i];
            let row = self.xtx.row_mut(i);
            for j in 0..p {
                row[j] += xi * x[j];
            }
            self.xty[i] += y * x[i];
        }
        self.syy += y * y;
        self.n += 1;
    }

    /// Sums over `self` minus `base`, i.e. the window (base.n, self.n].
    fn window_since(&self, base: &RawSums) -> RawSums {
        let p = self.xty.len();
        let mut out = RawSums::new(p);
        for i in 0..p {
            let a = self.xtx.row(i);
            let b = base.xtx.row(i);
            let o = out.xtx.row_mut(i);
            for j in 0..p {
                o[j] = a[j] - b[j];
            }
            out.xty[i] = self.xty[i] - base.xty[i];
        }
        out.syy = self.syy - base.syy;
        out.n = self.n - base.n;
        out
    }

    /// Sum of squared residuals of `beta` over everything accumulated.
    fn sum_sq_loss(&self, beta: &[f64]) -> f64 {
        self.syy - 2.0 * dot(beta, &self.xty) + dot(beta, &self.xtx.mul_vec(beta))
    }

    fn solve_dense(&self, ridge: f64) -> Result<Vec<f64>> {
        match solve_spd(&self.xtx, &self.xty) {
            Ok(b) => Ok(b),
            Err(Error::SingularSystem(_)) => {
                let d = self.xtx.rows();
                let mut reg = self.xtx.clone();
                for i in 0..d {
                    reg.set(i, i, reg.get(i, i) + ridge);
                }
                solve_spd(&reg, &self.xty)
            }
            Err(e) => Err(e),
        }
    }

    /// Raw-scale least squares with thresholding (no intercept): dense
    /// estimate, keep the k largest, refit on the survivors.
    fn solve_sparse(&self, k: usize, ridge: f64) -> Result<Vec<f64>> {
        let dense = self.solve_dense(ridge)?;
        let mut idx: Vec<usize> = (0..dense.len()).collect();
        idx.sort_by(|&a, &b| dense[b].abs().total_cmp(&dense[a].abs()).then(a.cmp(&b)));
        idx.truncate(k);
        idx.sort_unstable();
        let a = self.xtx.select_square(&idx);
        let b: Vec<f64> = idx.iter().map(|&j| self.xty[j]).collect();
        let coef = match solve_spd(&a, &b) {
            Ok(c) => c,
            Err(Error::SingularSystem(_)) => {
                let mut reg = a.clone();
                for i in 0..reg.rows() {
                    reg.set(i, i, reg.get(i, i) + ridge);
                }
                solve_spd(&reg, &b)?
            }
            Err(e) => return Err(e),
        };
        let mut full = vec![0.0; dense.len()];
        for (slot, &j) in idx.iter().enumerate() {
            full[j] = coef[slot];
        }
        Ok(full)
    }
}

/// Run the sequential harness over a stream of raw (x, y) pairs (no intercept,
/// no standardization, matching the sequential least-squares analysis).
///
/// Before `n0` the deployed coefficients are online ridge estimates kept
/// current by Sherman–Morrison updates of `(X^T X + lambda I)^{-1}`. At `n0`
/// the harness refactorizes and switches to exact sequential least squares
/// maintained by the rank-1 recursion, re-anchored from scratch every
/// `refactor_interval` steps. Losses enter the regret only after `n0`, which
/// makes the offline comparator (prefix minimizer on the same window) a true
/// lower bound, so regret is non-negative by construction.
pub fn regret_harness<I>(stream: I, cfg: &RegretConfig) -> Result<RegretTrace>
where
    I: IntoIterator<Item = (Vec<f64>, f64)>,
{
    let p = cfg.p;
    if cfg.checkpoints.is_empty() {
        return Err(Error::InvalidParameter("need at least one checkpoint".into()));
    }
    if cfg.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("checkpoints must be strictly increasing".into()));
    }
    if !(cfg.ridge_lambda > 0.0) {
        return Err(Error::InvalidParameter("warmup ridge weight must be positive".into()));
    }
    if let Some(k) = cfg.sparsity {
        if k == 0 || k > p {
            return Err(Error::InvalidSparsity { requested: k, available: p });
        }
    }
    let n_total = *cfg.checkpoints.last().unwrap();
    let n0 = cfg.n0(n_total);
    if n_total <= n0 || n0 <= p {
        return Err(Error::InvalidParameter(format!(
            "need stream length > n0 > p, got n={n_total}, n0={n0}, p={p}"
        )));
    }

    let mut sums = RawSums::new(p);
    let mut warm_snapshot: Option<RawSums> = None;
    // warmup tracks (X^T X + lambda I)^{-1}
    let mut ainv = Matrix::identity(p);
    for i in 0..p {
        ainv.set(i, i, 1.0 / cfg.ridge_lambda);
    }
    let mut beta = vec![0.0; p];
    let mut window_loss = 0.0;
    let mut trace = RegretTrace {
        checkpoints: Vec::new(),
        cumulative_loss: Vec::new(),
        offline_loss: Vec::new(),
        regret: Vec::new(),
    };
    let mut check_iter = cfg.checkpoints.iter().copied().peekable();

    for (i, (x, y)) in stream.into_iter().enumerate() {
        let i = i + 1; // 1-based sample index
        if i > n_total {
            break;
        }
        if x.len() != p {
            return Err(Error::InvalidDimension(format!(
                "stream row {i} has {} features, expected {p}",
                x.len()
            )));
        }
        // loss of the deployed coefficients on the incoming observation
        let resid = y - dot(&x, &beta);
        if i > n0 {
            window_loss += resid * resid;
        }
        sums.add(&x, y);

        if i < n0 {
            // online ridge, exact via Sherman-Morrison
            if rank1_update_inverse(&mut ainv, &x, 1.0).is_err() {
                ainv = ridge_inverse(&sums.xtx, cfg.ridge_lambda)?;
            }
            beta = ainv.mul_vec(&sums.xty);
        } else if i == n0 {
            warm_snapshot = Some(sums.clone());
            // switch to exact sequential least squares
            match invert_spd(&sums.xtx) {
                Ok(inv) => ainv = inv,
                Err(Error::SingularSystem(_)) => {
                    ainv = ridge_inverse(&sums.xtx, cfg.ridge_lambda)?;
                }
                Err(e) => return Err(e),
            }
            beta = ainv.mul_vec(&sums.xty);
        } else if cfg.sparsity.is_none() {
            let refresh = (i - n0) % cfg.refactor_interval == 0;
            if refresh || rank1_update_inverse(&mut ainv, &x, 1.0).is_err() {
                match invert_spd(&sums.xtx) {
                    Ok(inv) => ainv = inv,
                    Err(Error::SingularSystem(_)) => {
                        ainv = ridge_inverse(&sums.xtx, cfg.ridge_lambda)?;
                    }
                    Err(e) => return Err(e),
                }
                beta = ainv.mul_vec(&sums.xty);
            } else {
                // beta_{i+1} = beta_i + (X^T X)_i^{-1} x_i (y_i - x_i^T beta_i)
                let gain = ainv.mul_vec(&x);
                for j in 0..p {
                    beta[j] += gain[j] * resid;
                }
            }
        }

        if check_iter.peek() == Some(&i) {
            check_iter.next();
            let offline = match &warm_snapshot {
                None => 0.0, // checkpoint inside the warmup window
                Some(base) => {
                    let window = sums.window_since(base);
                    let comparator = match cfg.sparsity {
                        Some(k) => window.solve_sparse(k, cfg.ridge_lambda)?,
                        None => window.solve_dense(cfg.ridge_lambda)?,
                    };
                    window.sum_sq_loss(&comparator).max(0.0)
                }
            };
            if let (Some(k), true) = (cfg.sparsity, i >= n0) {
                // sparse mode deploys the checkpoint extraction until the next one
                beta = sums.solve_sparse(k, cfg.ridge_lambda)?;
            }
            trace.checkpoints.push(i);
            trace.cumulative_loss.push(window_loss);
            trace.offline_loss.push(offline);
            trace.regret.push((window_loss - offline) / i as f64);
        }
    }
    if trace.checkpoints.len() != cfg.checkpoints.len() {
        return Err(Error::InvalidParameter(format!(
            "stream ended after {} observations, before the last checkpoint {}",
            sums.n, n_total
        )));
    }
    Ok(trace)
}

fn ridge_inverse(xtx: &Matrix, lambda: f64) -> Result<Matrix> {
    let d = xtx.rows();
    let mut reg = xtx.clone();
    for i in 0..d {
        reg.set(i, i, reg.get(i, i) + lambda);
    }
    invert_spd(&reg)
}

/// Smallest-true-coefficient bound guaranteeing support recovery, given an
/// eigenvalue floor `lambda` for the design Gram:
/// `(4 sigma / sqrt(lambda)) * sqrt(log(p) / n^alpha)`.
pub fn beta_min_bound_gram_floor(
    n: u64,
    p: usize,
    sigma: f64,
    lambda: f64,
    alpha_exp: f64,
) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter("n and p must be positive".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::BoundInapplicable(format!(
            "eigenvalue floor must be positive, got {lambda}"
        )));
    }
    Ok(4.0 * sigma / lambda.sqrt() * ((p as f64).ln() / (n as f64).powf(alpha_exp)).sqrt())
}

/// Population-covariance version: `lambda = 0.9 * lambda_min(sqrt(Sigma)) -
/// rho(Sigma) * sqrt(p/n)` (rho = largest diagonal entry), bound
/// `(4 sigma / lambda) * sqrt(log(p)/n^alpha)`. Errors with
/// `BoundInapplicable` when the corrected lambda is non-positive.
pub fn beta_min_bound_population(
    n: u64,
    p: usize,
    sigma: f64,
    lambda_min_sqrt_sigma: f64,
    rho: f64,
    alpha_exp: f64,
) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter("n and p must be positive".into()));
    }
    let lambda = 0.9 * lambda_min_sqrt_sigma - rho * (p as f64 / n as f64).sqrt();
    if lambda <= 0.0 {
        return Err(Error::BoundInapplicable(format!(
            "corrected eigenvalue {lambda:.4} is non-positive at n={n}, p={p}"
        )));
    }
    Ok(4.0 * sigma / lambda * ((p as f64).ln() / (n as f64).powf(alpha_exp)).sqrt())
}

/// Population covariance summary of the uniformly correlated design
/// `Sigma = I + alpha^2 J`: returns (lambda_min(sqrt(Sigma)), rho(Sigma),
/// lambda_min(Sigma)).
pub fn uniform_design_population(alpha_corr: f64) -> (f64, f64, f64) {
    (1.0, 1.0 + alpha_corr * alpha_corr, 1.0)
}

/// Per-step outcome of the drift-adaptation experiment.
#[derive(Debug, Clone)]
pub struct AdaptationOutcome {
    /// (step, rmse of the model deployed before seeing the step's batch)
    pub per_step_rmse: Vec<(usize, f64)>,
    /// (step, extracted original-scale coefficients on the true support)
    pub coefficient_paths: Vec<(usize, Vec<f64>)>,
}

impl AdaptationOutcome {
    /// Mean RMSE over the last `window` evaluated steps.
    pub fn tail_rmse(&self, window: usize) -> f64 {
        let tail = self.per_step_rmse.len().saturating_sub(window);
        let rows = &self.per_step_rmse[tail..];
        rows.iter().map(|(_, r)| r).sum::<f64>() / rows.len() as f64
    }
}

/// Track a drifting stream with exponentially forgetting moments and
/// per-step sparse extraction.
///
/// `rate` is the per-time-step adaptation rate (0 disables adaptation); it is
/// converted to the per-observation exponential rate `1 - (1-rate)^(1/batch)`
/// so a whole step's batch carries total weight `rate`. Each step draws a
/// fresh batch from the drifting model, evaluates the currently deployed
/// model on it, then folds it into the moments and re-extracts.
pub fn adaptation_experiment(
    drift: &DriftConfig,
    rate: f64,
    seed: u64,
) -> Result<AdaptationOutcome> {
    drift.validate()?;
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidParameter(format!(
            "adaptation rate must lie in [0,1), got {rate}"
        )));
    }
    let mode = if rate > 0.0 {
        WeightMode::Exponential { rate: 1.0 - (1.0 - rate).powf(1.0 / drift.batch as f64) }
    } else {
        WeightMode::Uniform
    };
    let p = drift.p;
    let truth: Vec<usize> = (1..=drift.k).map(|j| 10 * j - 1).collect();
    let mut moments = MomentSet::new(p, mode)?;
    let mut rng = Rng::new(seed);
    let mut xs: Vec<Vec<f64>> = vec![vec![0.0; p]; drift.batch];
    let mut ys = vec![0.0; drift.batch];
    let mut deployed: Option<crate::model::SparseModel> = None;
    let mut out = AdaptationOutcome { per_step_rmse: Vec::new(), coefficient_paths: Vec::new() };

    for t in 1..=drift.steps {
        let beta_t = gen_drift_coeffs(drift, t);
        for b in 0..drift.batch {
            fill_design_row(&mut rng, drift.alpha_corr, &mut xs[b]);
            ys[b] = dot(&xs[b], &beta_t) + rng.next_normal();
        }
        if let Some(model) = &deployed {
            let preds: Vec<f64> = xs.iter().map(|x| model.predict(x).unwrap()).collect();
            out.per_step_rmse.push((t, rmse(&preds, &ys)?));
        }
        for b in 0..drift.batch {
            moments.update(Observation { x: &xs[b], y: ys[b] })?;
        }
        // deploy: sparse extraction on the updated moments
        if moments.n() > (2 * p) as u64 {
            let sm = standardize(&moments, DEFAULT_MIN_SIGMA)?;
            let model = extract::ols_th(&sm, drift.k, None)?;
            let dense = model.dense_beta_orig();
            out.coefficient_paths
                .push((t, truth.iter().map(|&j| dense[j]).collect()));
            deployed = Some(model);
        }
    }
    Ok(out)
}
