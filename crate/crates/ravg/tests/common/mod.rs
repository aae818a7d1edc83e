//! Independent oracles for the integration suites. Everything here works on
//! raw data matrices with its own arithmetic (Gauss–Jordan solves, raw
//! matrix-vector products), never through the moment pipeline it checks.

use ravg::rng::Rng;

pub struct RawData {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

impl RawData {
    pub fn p(&self) -> usize {
        self.xs[0].len()
    }

    pub fn n(&self) -> usize {
        self.xs.len()
    }
}

/// Uniformly correlated regression sample with a planted sparse truth.
pub fn correlated_sample(seed: u64, n: usize, p: usize, beta_star: &[f64]) -> RawData {
    let mut rng = Rng::new(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let z = rng.next_normal();
        let x: Vec<f64> = (0..p).map(|_| z + rng.next_normal()).collect();
        let y: f64 = x.iter().zip(beta_star).map(|(a, b)| a * b).sum::<f64>() + rng.next_normal();
        xs.push(x);
        ys.push(y);
    }
    RawData { xs, ys }
}

/// Gauss–Jordan with partial pivoting; panics on exactly singular systems.
pub fn gj_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let d = b.len();
    let mut aug: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut row = a[i].clone();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..d {
        let piv = (col..d)
            .max_by(|&r, &s| aug[r][col].abs().total_cmp(&aug[s][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let pv = aug[col][col];
        assert!(pv != 0.0, "oracle hit a singular system");
        for j in 0..=d {
            aug[col][j] /= pv;
        }
        for r in 0..d {
            if r != col {
                let f = aug[r][col];
                for j in 0..=d {
                    aug[r][j] -= f * aug[col][j];
                }
            }
        }
    }
    (0..d).map(|i| aug[i][d]).collect()
}

/// Explicitly standardized copy of the data: each feature centered and scaled
/// by its (1/n)-variance, response centered.
pub struct StandardizedRaw {
    pub xt: Vec<Vec<f64>>,
    pub yt: Vec<f64>,
    pub mu_x: Vec<f64>,
    pub sigma_x: Vec<f64>,
    pub mu_y: f64,
}

pub fn standardize_raw(data: &RawData) -> StandardizedRaw {
    let n = data.n();
    let p = data.p();
    let mut mu_x = vec![0.0; p];
    for x in &data.xs {
        for j in 0..p {
            mu_x[j] += x[j] / n as f64;
        }
    }
    let mut sigma_x = vec![0.0; p];
    for x in &data.xs {
        for j in 0..p {
            sigma_x[j] += (x[j] - mu_x[j]).powi(2) / n as f64;
        }
    }
    for s in sigma_x.iter_mut() {
        *s = s.sqrt();
    }
    let mu_y = data.ys.iter().sum::<f64>() / n as f64;
    let xt: Vec<Vec<f64>> = data
        .xs
        .iter()
        .map(|x| (0..p).map(|j| (x[j] - mu_x[j]) / sigma_x[j]).collect())
        .collect();
    let yt: Vec<f64> = data.ys.iter().map(|y| y - mu_y).collect();
    StandardizedRaw { xt, yt, mu_x, sigma_x, mu_y }
}

impl StandardizedRaw {
    pub fn p(&self) -> usize {
        self.xt[0].len()
    }

    pub fn n(&self) -> usize {
        self.xt.len()
    }

    /// (1/n) Xt^T Xt restricted to `idx`, via raw products.
    pub fn gram(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        let n = self.n() as f64;
        let m = idx.len();
        let mut a = vec![vec![0.0; m]; m];
        for row in &self.xt {
            for (ai, &i) in idx.iter().enumerate() {
                for (bj, &j) in idx.iter().enumerate() {
                    a[ai][bj] += row[i] * row[j] / n;
                }
            }
        }
        a
    }

    /// (1/n) Xt^T yt restricted to `idx`.
    pub fn cross(&self, idx: &[usize]) -> Vec<f64> {
        let n = self.n() as f64;
        let mut b = vec![0.0; idx.len()];
        for (row, &y) in self.xt.iter().zip(&self.yt) {
            for (slot, &j) in idx.iter().enumerate() {
                b[slot] += row[j] * y / n;
            }
        }
        b
    }

    /// Gradient of the quadratic loss at `beta` over `idx`, computed with raw
    /// matrix-vector products: (1/n) Xt_S^T (Xt_S beta) - (1/n) Xt_S^T yt.
    pub fn gradient(&self, idx: &[usize], beta: &[f64]) -> Vec<f64> {
        let n = self.n() as f64;
        let mut g = vec![0.0; idx.len()];
        for (row, &y) in self.xt.iter().zip(&self.yt) {
            let pred: f64 = idx.iter().zip(beta).map(|(&j, b)| row[j] * b).sum();
            let r = pred - y;
            for (slot, &j) in idx.iter().enumerate() {
                g[slot] += r * row[j] / n;
            }
        }
        g
    }
}

/// Same selection rule as the crate: top-k by |value|, ties to lower index,
/// result ascending.
pub fn top_k(vals: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Power-method estimate matching the crate's deterministic start vector.
pub fn power_lambda_max(a: &[Vec<f64>], iters: usize) -> f64 {
    let d = a.len();
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 1e-3 * i as f64).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
    for _ in 0..iters {
        let w: Vec<f64> = (0..d)
            .map(|i| a[i].iter().zip(&v).map(|(m, x)| m * x).sum())
            .collect();
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return 0.0;
        }
        for i in 0..d {
            v[i] = w[i] / n;
        }
    }
    let av: Vec<f64> = (0..d)
        .map(|i| a[i].iter().zip(&v).map(|(m, x)| m * x).sum())
        .collect();
    v.iter().zip(&av).map(|(a, b)| a * b).sum()
}

/// Offline least squares on the standardized raw matrix: dense coefficients
/// over all features.
pub fn offline_ols(sr: &StandardizedRaw) -> Vec<f64> {
    let idx: Vec<usize> = (0..sr.p()).collect();
    gj_solve(&sr.gram(&idx), &sr.cross(&idx))
}

/// Offline least squares with hard thresholding; returns the dense length-p
/// coefficient vector after the refit.
pub fn offline_ols_th(sr: &StandardizedRaw, k: usize) -> Vec<f64> {
    let dense = offline_ols(sr);
    let support = top_k(&dense, k);
    let coef = gj_solve(&sr.gram(&support), &sr.cross(&support));
    scatter(sr.p(), &support, &coef)
}

/// Offline annealing selection with the same schedule, adaptive step policy
/// and renumbering as the crate, but every product computed from raw data.
pub fn offline_ofsa(sr: &StandardizedRaw, k: usize, t_max: usize, mu: f64) -> Vec<f64> {
    let p = sr.p();
    let mut survivors: Vec<usize> = (0..p).collect();
    let mut beta = vec![0.0; p];
    let mut eta = 0.9 / power_lambda_max(&sr.gram(&survivors), 20);
    let mut last_estimated_at = p;
    for t in 1..=t_max {
        let g = sr.gradient(&survivors, &beta);
        for i in 0..beta.len() {
            beta[i] -= eta * g[i];
        }
        let frac = ((t_max as f64 - t as f64) / (t as f64 * mu + t_max as f64)).max(0.0);
        let keep = k + ((p - k) as f64 * frac).floor() as usize;
        if keep < survivors.len() {
            let sel = top_k(&beta, keep);
            beta = sel.iter().map(|&i| beta[i]).collect();
            survivors = sel.iter().map(|&i| survivors[i]).collect();
            if keep * 4 <= last_estimated_at * 3 {
                eta = 0.9 / power_lambda_max(&sr.gram(&survivors), 20);
                last_estimated_at = keep;
            }
        }
    }
    let coef = gj_solve(&sr.gram(&survivors), &sr.cross(&survivors));
    scatter(p, &survivors, &coef)
}

fn soft(t: f64, thr: f64) -> f64 {
    if t > thr {
        t - thr
    } else if t < -thr {
        t + thr
    } else {
        0.0
    }
}

fn mcp_theta(t: f64, thr: f64, b: f64) -> f64 {
    let at = t.abs();
    if at <= thr {
        0.0
    } else if at <= b * thr {
        (t - thr * t.signum()) / (1.0 - 1.0 / b)
    } else {
        t
    }
}

pub enum OraclePenalty {
    Lasso,
    ElasticNet { l2_mix: f64 },
    Mcp { b: f64 },
}

/// Offline thresholded gradient descent with raw-product gradients, same
/// iteration budget, early exit and final refit as the crate.
pub fn offline_penalized(
    sr: &StandardizedRaw,
    pen: &OraclePenalty,
    lambda: f64,
    iters: usize,
) -> Vec<f64> {
    let p = sr.p();
    let all: Vec<usize> = (0..p).collect();
    let eta = 0.9 / power_lambda_max(&sr.gram(&all), 20);
    let l2 = match pen {
        OraclePenalty::ElasticNet { l2_mix } => *l2_mix,
        _ => 0.0,
    };
    let mut beta = vec![0.0; p];
    for _ in 0..iters {
        let mut g = sr.gradient(&all, &beta);
        for i in 0..p {
            g[i] += l2 * beta[i];
        }
        let mut delta = 0.0f64;
        for i in 0..p {
            let t = beta[i] - eta * g[i];
            let nb = match pen {
                OraclePenalty::Mcp { b } => mcp_theta(t, eta * lambda, *b),
                _ => soft(t, eta * lambda),
            };
            delta = delta.max((nb - beta[i]).abs());
            beta[i] = nb;
        }
        if delta < 1e-9 {
            break;
        }
    }
    let support: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
    if support.is_empty() {
        return vec![0.0; p];
    }
    let coef = gj_solve(&sr.gram(&support), &sr.cross(&support));
    scatter(p, &support, &coef)
}

pub fn scatter(p: usize, idx: &[usize], coef: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p];
    for (slot, &j) in idx.iter().enumerate() {
        out[j] = coef[slot];
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max)
}
