//! Reproducible experiment runners: the regression/classification benchmark
//! tables, the drift-adaptation comparison, the sequential regret traces and
//! the recovery-bound sweep. Seeds fan out over a rayon pool; every run is a
//! pure function of (config, master seed).

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{
    adaptation_experiment, auc, beta_min_bound_gram_floor, beta_min_bound_population,
    detection_rate, regret_harness, rmse, uniform_design_population, RegretConfig, RegretTrace,
};
use crate::extract::{self, FsaSchedule, Penalty};
use crate::moments::{MomentSet, Observation, WeightMode};
use crate::rng::Rng;
use crate::simgen::{sparse_beta, sparse_beta_strided, support_of, DriftConfig, GenConfig, SyntheticStream, Task};
use crate::standardize::{standardize, StandardizedMoments, DEFAULT_MIN_SIGMA};

/// Experiment size: `Desk` finishes in CI time, `Paper` matches the reference
/// protocol dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    OlsTh,
    Ofsa,
    Lasso,
    ElasticNet,
    Mcp,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::OlsTh => "olsth",
            Method::Ofsa => "ofsa",
            Method::Lasso => "lasso",
            Method::ElasticNet => "elnet",
            Method::Mcp => "mcp",
        };
        f.write_str(s)
    }
}

/// One benchmark-table run: stream `n` observations into moments, extract
/// with each method, evaluate detection rate plus test RMSE (regression) or
/// test AUC (classification).
#[derive(Debug, Clone)]
pub struct TableConfig {
    pub p: usize,
    pub k_star: usize,
    pub beta_strength: f64,
    pub n: usize,
    pub n_test: usize,
    pub seeds: usize,
    pub task: Task,
    pub methods: Vec<Method>,
    pub elnet_l2_mix: f64,
    pub mcp_b: f64,
    pub tune_grid: usize,
    pub tune_iters: usize,
}

impl TableConfig {
    pub fn regression(scale: Scale) -> Self {
        match scale {
            Scale::Desk => TableConfig {
                p: 100,
                k_star: 10,
                beta_strength: 1.0,
                n: 10_000,
                n_test: 2_000,
                seeds: 50,
                task: Task::Regression,
                methods: vec![Method::OlsTh, Method::Ofsa, Method::Mcp, Method::Lasso, Method::ElasticNet],
                elnet_l2_mix: 0.5,
                mcp_b: 3.0,
                tune_grid: 200,
                tune_iters: 500,
            },
            Scale::Paper => TableConfig {
                p: 1000,
                k_star: 100,
                beta_strength: 1.0,
                n: 10_000,
                n_test: 2_000,
                seeds: 20,
                task: Task::Regression,
                methods: vec![Method::OlsTh, Method::Ofsa],
                elnet_l2_mix: 0.5,
                mcp_b: 3.0,
                tune_grid: 200,
                tune_iters: 500,
            },
        }
    }

    pub fn classification(scale: Scale) -> Self {
        let mut cfg = TableConfig::regression(scale);
        cfg.task = Task::Classification;
        match scale {
            Scale::Desk => {
                cfg.methods = vec![Method::OlsTh, Method::Ofsa, Method::Mcp];
                cfg.seeds = 20;
            }
            Scale::Paper => {
                cfg.n = 100_000;
                cfg.n_test = 10_000;
                cfg.seeds = 4;
                cfg.methods = vec![Method::OlsTh, Method::Ofsa];
            }
        }
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct SeedRow {
    pub seed_index: usize,
    pub method: Method,
    pub detection_rate: f64,
    /// test RMSE for regression, test AUC for classification
    pub metric: f64,
    pub extract_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub method: Method,
    pub detection_rate_mean: f64,
    pub detection_rate_se: f64,
    pub metric_mean: f64,
    pub metric_se: f64,
    pub extract_seconds_mean: f64,
}

#[derive(Debug, Clone)]
pub struct TableResult {
    pub rows: Vec<SeedRow>,
    pub summary: Vec<MethodSummary>,
    pub metric_name: &'static str,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn extract_with(
    method: Method,
    sm: &StandardizedMoments,
    cfg: &TableConfig,
) -> Result<crate::model::SparseModel> {
    let k = cfg.k_star;
    match method {
        Method::OlsTh => extract::ols_th(sm, k, None),
        Method::Ofsa => extract::ofsa(sm, &FsaSchedule::for_sparsity(k)),
        Method::Lasso => Ok(extract::tune_lambda_for_sparsity(sm, &Penalty::Lasso, k, cfg.tune_grid, cfg.tune_iters)?.model),
        Method::ElasticNet => Ok(extract::tune_lambda_for_sparsity(
            sm,
            &Penalty::ElasticNet { l2_mix: cfg.elnet_l2_mix },
            k,
            cfg.tune_grid,
            cfg.tune_iters,
        )?
        .model),
        Method::Mcp => Ok(extract::tune_lambda_for_sparsity(
            sm,
            &Penalty::Mcp { b: cfg.mcp_b },
            k,
            cfg.tune_grid,
            cfg.tune_iters,
        )?
        .model),
    }
}

/// Run one benchmark table. Seeds run in parallel; substream `s` of
/// `master_seed` drives seed `s` and nothing else.
pub fn run_table(cfg: &TableConfig, master_seed: u64) -> Result<TableResult> {
    let truth = support_of(&sparse_beta(cfg.p, cfg.k_star, cfg.beta_strength)?);
    let per_seed: Result<Vec<Vec<SeedRow>>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|s| {
            let gen_cfg = GenConfig {
                p: cfg.p,
                n: cfg.n,
                k_star: cfg.k_star,
                beta_strength: cfg.beta_strength,
                alpha_corr: 1.0,
                task: cfg.task,
                seed: Rng::substream(master_seed, s as u64).next_u64(),
                noise: true,
            };
            let mut stream = SyntheticStream::from_config(gen_cfg)?;
            let mut moments = MomentSet::new(cfg.p, WeightMode::Uniform)?;
            let mut x = vec![0.0; cfg.p];
            for _ in 0..cfg.n {
                let y = stream.next_into(&mut x);
                moments.update(Observation { x: &x, y })?;
            }
            let mut test_xs = Vec::with_capacity(cfg.n_test);
            let mut test_ys = Vec::with_capacity(cfg.n_test);
            for _ in 0..cfg.n_test {
                let y = stream.next_into(&mut x);
                test_xs.push(x.clone());
                test_ys.push(y);
            }
            let sm = standardize(&moments, DEFAULT_MIN_SIGMA)?;
            let mut rows = Vec::with_capacity(cfg.methods.len());
            for &method in &cfg.methods {
                let t0 = Instant::now();
                let model = extract_with(method, &sm, cfg)?;
                let secs = t0.elapsed().as_secs_f64();
                let dr = detection_rate(model.support(), &truth)?;
                let scores: Vec<f64> = test_xs
                    .iter()
                    .map(|x| model.predict(x))
                    .collect::<Result<_>>()?;
                let metric = match cfg.task {
                    Task::Regression => rmse(&scores, &test_ys)?,
                    Task::Classification => auc(&scores, &test_ys)?,
                };
                rows.push(SeedRow {
                    seed_index: s,
                    method,
                    detection_rate: dr,
                    metric,
                    extract_seconds: secs,
                });
            }
            Ok(rows)
        })
        .collect();
    let rows: Vec<SeedRow> = per_seed?.into_iter().flatten().collect();
    let mut summary = Vec::new();
    for &method in &cfg.methods {
        let drs: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.detection_rate)
            .collect();
        let metrics: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.metric)
            .collect();
        let secs: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.extract_seconds)
            .collect();
        let (dm, dse) = mean_se(&drs);
        let (mm, mse) = mean_se(&metrics);
        summary.push(MethodSummary {
            method,
            detection_rate_mean: dm,
            detection_rate_se: dse,
            metric_mean: mm,
            metric_se: mse,
            extract_seconds_mean: secs.iter().sum::<f64>() / secs.len().max(1) as f64,
        });
    }
    Ok(TableResult {
        rows,
        summary,
        metric_name: match cfg.task {
            Task::Regression => "rmse",
            Task::Classification => "auc",
        },
    })
}

impl TableResult {
    pub fn per_seed_csv(&self) -> String {
        let mut out = format!("seed,method,dr,{},seconds\n", self.metric_name);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.seed_index, r.method, r.detection_rate, r.metric, r.extract_seconds
            ));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = format!(
            "method,dr_mean,dr_se,{m}_mean,{m}_se,seconds_mean\n",
            m = self.metric_name
        );
        for s in &self.summary {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.method,
                s.detection_rate_mean,
                s.detection_rate_se,
                s.metric_mean,
                s.metric_se,
                s.extract_seconds_mean
            ));
        }
        out
    }

    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }
}

/// Drift-adaptation comparison (model tracking with and without forgetting).
#[derive(Debug, Clone)]
pub struct AdaptationTableConfig {
    pub drift: DriftConfig,
    pub rate: f64,
    pub seeds: usize,
    /// steps included in the reported tail RMSE
    pub tail_window: usize,
}

impl AdaptationTableConfig {
    pub fn defaults() -> Self {
        AdaptationTableConfig {
            drift: DriftConfig::regression_defaults(),
            rate: 0.01,
            seeds: 20,
            tail_window: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptationTableResult {
    /// per seed: (tail RMSE with adaptation, tail RMSE without)
    pub per_seed: Vec<(f64, f64)>,
    pub adaptive_mean: f64,
    pub non_adaptive_mean: f64,
}

pub fn run_adaptation_table(cfg: &AdaptationTableConfig, master_seed: u64) -> Result<AdaptationTableResult> {
    let per_seed: Result<Vec<(f64, f64)>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|s| {
            let seed = Rng::substream(master_seed, s as u64).next_u64();
            let adaptive = adaptation_experiment(&cfg.drift, cfg.rate, seed)?;
            let frozen = adaptation_experiment(&cfg.drift, 0.0, seed)?;
            Ok((adaptive.tail_rmse(cfg.tail_window), frozen.tail_rmse(cfg.tail_window)))
        })
        .collect();
    let per_seed = per_seed?;
    let adaptive_mean = per_seed.iter().map(|p| p.0).sum::<f64>() / per_seed.len() as f64;
    let non_adaptive_mean = per_seed.iter().map(|p| p.1).sum::<f64>() / per_seed.len() as f64;
    Ok(AdaptationTableResult { per_seed, adaptive_mean, non_adaptive_mean })
}

impl AdaptationTableResult {
    pub fn csv(&self) -> String {
        let mut out = String::from("seed,adaptive_rmse,non_adaptive_rmse\n");
        for (i, (a, b)) in self.per_seed.iter().enumerate() {
            out.push_str(&format!("{i},{a},{b}\n"));
        }
        out
    }
}

/// Sequential regret experiment configuration.
#[derive(Debug, Clone)]
pub struct RegretExperimentConfig {
    pub p: usize,
    pub k_star: usize,
    pub beta_strength: f64,
    pub n: usize,
    pub checkpoints: usize,
    pub first_checkpoint: usize,
    pub seeds: usize,
    /// loss-clock / ridge-switch boundary passed to the harness; the preset
    /// pins p+1 so the measured window spans the whole fit range
    pub warmup: Option<usize>,
}

impl RegretExperimentConfig {
    pub fn defaults() -> Self {
        RegretExperimentConfig {
            p: 10,
            k_star: 1,
            beta_strength: 1.0,
            n: 100_000,
            checkpoints: 24,
            first_checkpoint: 1_000,
            seeds: 5,
            warmup: Some(11),
        }
    }

    pub fn checkpoint_list(&self) -> Vec<usize> {
        let lo = (self.first_checkpoint as f64).ln();
        let hi = (self.n as f64).ln();
        let mut pts: Vec<usize> = (0..self.checkpoints)
            .map(|i| {
                (lo + (hi - lo) * i as f64 / (self.checkpoints - 1) as f64).exp().round() as usize
            })
            .collect();
        pts.dedup();
        pts
    }
}

#[derive(Debug, Clone)]
pub struct RegretExperimentResult {
    pub traces: Vec<RegretTrace>,
    pub checkpoints: Vec<usize>,
    pub mean_regret: Vec<f64>,
    pub slope: f64,
}

pub fn run_regret_experiment(cfg: &RegretExperimentConfig, master_seed: u64) -> Result<RegretExperimentResult> {
    let checkpoints = cfg.checkpoint_list();
    let traces: Result<Vec<RegretTrace>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|s| {
            let gen_cfg = GenConfig {
                p: cfg.p,
                n: cfg.n,
                k_star: cfg.k_star,
                beta_strength: cfg.beta_strength,
                alpha_corr: 1.0,
                task: Task::Regression,
                seed: Rng::substream(master_seed, s as u64).next_u64(),
                noise: true,
            };
            let mut stream = SyntheticStream::from_config(gen_cfg)?;
            let mut x = vec![0.0; cfg.p];
            let iter = (0..cfg.n).map(move |_| {
                let y = stream.next_into(&mut x);
                (x.clone(), y)
            });
            let mut harness_cfg = RegretConfig::dense(cfg.p, checkpoints.clone());
            harness_cfg.warmup = cfg.warmup;
            regret_harness(iter, &harness_cfg)
        })
        .collect();
    let traces = traces?;
    let mean_regret: Vec<f64> = (0..checkpoints.len())
        .map(|i| traces.iter().map(|t| t.regret[i]).sum::<f64>() / traces.len() as f64)
        .collect();
    let mean_trace = RegretTrace {
        checkpoints: checkpoints.clone(),
        cumulative_loss: vec![0.0; checkpoints.len()],
        offline_loss: vec![0.0; checkpoints.len()],
        regret: mean_regret.clone(),
    };
    Ok(RegretExperimentResult {
        slope: mean_trace.loglog_slope(),
        traces,
        checkpoints,
        mean_regret,
    })
}

impl RegretExperimentResult {
    /// Two-column CSV (n, mean regret) for plotting.
    pub fn csv(&self) -> String {
        let mut out = String::from("n,regret\n");
        for (n, r) in self.checkpoints.iter().zip(&self.mean_regret) {
            out.push_str(&format!("{n},{r}\n"));
        }
        out
    }
}

/// Recovery-bound sweep configuration (empirical threshold vs. the two
/// theoretical bounds).
#[derive(Debug, Clone)]
pub struct BoundsExperimentConfig {
    pub p: usize,
    pub k_sweep: Vec<usize>,
    /// sample sizes for the n-sweep, run at the last entry of `k_sweep`
    pub n_sweep: Vec<u64>,
    /// fixed n used for the k-sweep rows
    pub n_for_k_sweep: u64,
    pub seeds: usize,
    pub sigma: f64,
    pub alpha_corr: f64,
    /// recovery quantile, e.g. 0.99 for 99 out of 100 runs
    pub quantile: f64,
}

impl BoundsExperimentConfig {
    pub fn defaults() -> Self {
        BoundsExperimentConfig {
            p: 256,
            k_sweep: vec![8, 16, 32],
            n_sweep: vec![1024, 2048, 4096, 8192, 16384],
            n_for_k_sweep: 4096,
            seeds: 100,
            sigma: 1.0,
            alpha_corr: 1.0,
            quantile: 0.99,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundsRow {
    pub n: u64,
    pub k_star: usize,
    pub empirical: f64,
    pub gram_floor_bound: f64,
    /// None where the corrected eigenvalue is non-positive (bound vacuous)
    pub population_bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BoundsExperimentResult {
    /// n-sweep rows at the largest k in `k_sweep`
    pub n_rows: Vec<BoundsRow>,
    /// k-sweep rows at `n_for_k_sweep`
    pub k_rows: Vec<BoundsRow>,
}

impl BoundsExperimentResult {
    pub fn csv(&self) -> String {
        let mut out = String::from("sweep,n,k_star,empirical,gram_floor,population\n");
        for (tag, rows) in [("n", &self.n_rows), ("k", &self.k_rows)] {
            for r in rows {
                let pop = r.population_bound.map_or(String::from("inf"), |v| v.to_string());
                out.push_str(&format!(
                    "{tag},{},{},{},{},{pop}\n",
                    r.n, r.k_star, r.empirical, r.gram_floor_bound
                ));
            }
        }
        out
    }
}

/// Affine decomposition of the thresholding estimate for one simulated
/// stream: the dense standardized estimate at signal strength `beta` equals
/// `beta * signal_part + noise_part`, because the cross moments are affine in
/// the response while the design moments are fixed.
struct RecoveryRealization {
    signal_part: Vec<f64>,
    noise_part: Vec<f64>,
    support: Vec<usize>,
}

fn simulate_realization(
    p: usize,
    k_star: usize,
    n: u64,
    alpha_corr: f64,
    sigma: f64,
    seed: u64,
) -> Result<RecoveryRealization> {
    let stride = p / k_star;
    let pattern = sparse_beta_strided(p, k_star, 1.0, stride)?;
    let support = support_of(&pattern);
    let mut rng = Rng::new(seed);
    let mut x = vec![0.0; p];
    let mut m_signal = MomentSet::new(p, WeightMode::Uniform)?;
    // noise response channel shares the design stream
    let mut s_xy_noise = vec![0.0; p];
    let mut mu_noise = 0.0;
    let mut s_nn = 0.0;
    for i in 0..n {
        crate::simgen::fill_design_row(&mut rng, alpha_corr, &mut x);
        let y_sig = crate::mat::dot(&x, &pattern);
        let eps = sigma * rng.next_normal();
        m_signal.update(Observation { x: &x, y: y_sig })?;
        let w = 1.0 / (i as f64 + 1.0);
        for j in 0..p {
            s_xy_noise[j] += w * (eps * x[j] - s_xy_noise[j]);
        }
        mu_noise += w * (eps - mu_noise);
        s_nn += w * (eps * eps - s_nn);
    }
    let m_noise = MomentSet::from_parts(
        p,
        n,
        m_signal.mu_x().to_vec(),
        mu_noise,
        m_signal.s_xx().clone(),
        s_xy_noise,
        s_nn,
        WeightMode::Uniform,
    );
    let sm_sig = standardize(&m_signal, DEFAULT_MIN_SIGMA)?;
    let sm_noise = standardize(&m_noise, DEFAULT_MIN_SIGMA)?;
    let a = sm_sig.s_xx_std().clone();
    let u = crate::linsolve::solve_spd(&a, sm_sig.s_xy_std())?;
    let v = crate::linsolve::solve_spd(&a, sm_noise.s_xy_std())?;
    Ok(RecoveryRealization { signal_part: u, noise_part: v, support })
}

fn recovery_count(realizations: &[RecoveryRealization], beta: f64) -> usize {
    realizations
        .iter()
        .filter(|r| {
            let est: Vec<f64> = r
                .signal_part
                .iter()
                .zip(&r.noise_part)
                .map(|(u, v)| beta * u + v)
                .collect();
            extract::top_k_indices(&est, r.support.len()) == r.support
        })
        .count()
}

/// Smallest signal strength at which at least `quantile` of the cached
/// realizations recover the exact support, by bisection.
fn empirical_beta_min(realizations: &[RecoveryRealization], quantile: f64) -> f64 {
    let need = (quantile * realizations.len() as f64).ceil() as usize;
    let mut hi = 1.0f64;
    while recovery_count(realizations, hi) < need && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = 0.0f64;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if recovery_count(realizations, mid) >= need {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn run_bounds_experiment(cfg: &BoundsExperimentConfig, master_seed: u64) -> Result<BoundsExperimentResult> {
    let (lam_sqrt, rho, lam_min) = uniform_design_population(cfg.alpha_corr);
    let k_main = *cfg.k_sweep.last().expect("k sweep must be nonempty");
    let row_for = |n: u64, k: usize, seed_salt: u64| -> Result<BoundsRow> {
        let realizations: Result<Vec<RecoveryRealization>> = (0..cfg.seeds)
            .into_par_iter()
            .map(|s| {
                let seed = Rng::substream(master_seed ^ seed_salt, s as u64).next_u64();
                simulate_realization(cfg.p, k, n, cfg.alpha_corr, cfg.sigma, seed)
            })
            .collect();
        let realizations = realizations?;
        let empirical = empirical_beta_min(&realizations, cfg.quantile);
        let gram = beta_min_bound_gram_floor(n, cfg.p, cfg.sigma, lam_min, 1.0)?;
        let pop = match beta_min_bound_population(n, cfg.p, cfg.sigma, lam_sqrt, rho, 1.0) {
            Ok(v) => Some(v),
            Err(Error::BoundInapplicable(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(BoundsRow { n, k_star: k, empirical, gram_floor_bound: gram, population_bound: pop })
    };
    let mut n_rows = Vec::new();
    for &n in &cfg.n_sweep {
        n_rows.push(row_for(n, k_main, n)?);
    }
    let mut k_rows = Vec::new();
    for &k in &cfg.k_sweep {
        k_rows.push(row_for(cfg.n_for_k_sweep, k, 0xBEEF ^ k as u64)?);
    }
    Ok(BoundsExperimentResult { n_rows, k_rows })
}
