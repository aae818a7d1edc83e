//! Running-average sufficient statistics over a stream of (x, y) observations.
//!
//! A [`MomentSet`] holds the feature mean, response mean, second moments and
//! cross moments of everything seen so far, in `O(p^2)` memory independent of
//! the stream length. Models of any sparsity can later be extracted from the
//! set alone, without revisiting data. Updates use the convex-combination form
//!
//! ```text
//! s <- (1 - a_n) * s + a_n * (per-observation value)
//! ```
//!
//! with `a_n = 1/(n+1)` for uniform weighting, or `max(alpha, 1/(n+1))` for
//! exponential forgetting at rate `alpha` (drift adaptation).

use crate::error::{Error, Result};
use crate::mat::Matrix;

/// Weighting applied to incoming observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightMode {
    /// Every observation weighted equally; statistics equal batch averages.
    Uniform,
    /// Exponential forgetting at `rate` in (0,1); recent data dominates.
    Exponential { rate: f64 },
}

/// One observation: a borrowed feature row and its response.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub x: &'a [f64],
    pub y: f64,
}

/// Running-average sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    p: usize,
    n: u64,
    mu_x: Vec<f64>,
    mu_y: f64,
    s_xx: Matrix,
    s_xy: Vec<f64>,
    s_yy: f64,
    mode: WeightMode,
}

impl MomentSet {
    pub fn new(p: usize, mode: WeightMode) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidDimension("feature count must be >= 1".into()));
        }
        if let WeightMode::Exponential { rate } = mode {
            if !(rate > 0.0 && rate < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "exponential rate must lie in (0,1), got {rate}"
                )));
            }
        }
        Ok(MomentSet {
            p,
            n: 0,
            mu_x: vec![0.0; p],
            mu_y: 0.0,
            s_xx: Matrix::zeros(p, p),
            s_xy: vec![0.0; p],
            s_yy: 0.0,
            mode,
        })
    }

    pub(crate) fn from_parts(
        p: usize,
        n: u64,
        mu_x: Vec<f64>,
        mu_y: f64,
        s_xx: Matrix,
        s_xy: Vec<f64>,
        s_yy: f64,
        mode: WeightMode,
    ) -> Self {
        debug_assert_eq!(mu_x.len(), p);
        debug_assert_eq!(s_xy.len(), p);
        debug_assert_eq!(s_xx.rows(), p);
        MomentSet { p, n, mu_x, mu_y, s_xx, s_xy, s_yy, mode }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Raw observation count (a plain counter even under forgetting).
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Sample size the solvers should trust. Under exponential forgetting the
    /// window holds the equivalent of about `1/rate` observations.
    pub fn effective_n(&self) -> u64 {
        match self.mode {
            WeightMode::Uniform => self.n,
            WeightMode::Exponential { rate } => self.n.min((1.0 / rate) as u64),
        }
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    pub fn mu_x(&self) -> &[f64] {
        &self.mu_x
    }

    pub fn mu_y(&self) -> f64 {
        self.mu_y
    }

    pub fn s_xx(&self) -> &Matrix {
        &self.s_xx
    }

    pub fn s_xy(&self) -> &[f64] {
        &self.s_xy
    }

    pub fn s_yy(&self) -> f64 {
        self.s_yy
    }

    fn step_weight(&self) -> f64 {
        let uniform = 1.0 / (self.n as f64 + 1.0);
        match self.mode {
            WeightMode::Uniform => uniform,
            // Early in the stream 1/(n+1) > alpha, so behaviour starts
            // uniform and switches to forgetting once enough data arrived.
            WeightMode::Exponential { rate } => rate.max(uniform),
        }
    }

    /// Fold one observation into every statistic.
    pub fn update(&mut self, obs: Observation<'_>) -> Result<()> {
        if obs.x.len() != self.p {
            return Err(Error::InvalidDimension(format!(
                "observation has {} features, moment set expects {}",
                obs.x.len(),
                self.p
            )));
        }
        if !obs.y.is_finite() || obs.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidObservation(
                "non-finite entry in observation".into(),
            ));
        }
        let a = self.step_weight();
        let x = obs.x;
        let y = obs.y;
        for j in 0..self.p {
            self.mu_x[j] += a * (x[j] - self.mu_x[j]);
            self.s_xy[j] += a * (y * x[j] - self.s_xy[j]);
        }
        self.mu_y += a * (y - self.mu_y);
        self.s_yy += a * (y * y - self.s_yy);
        // Full-square update: x[i]*x[j] and x[j]*x[i] round identically, so
        // symmetry is exact by induction without a mirroring pass.
        for i in 0..self.p {
            let xi = x[i];
            let row = self.s_xx.row_mut(i);
            for j in 0..self.p {
                row[j] += a * (xi * x[j] - row[j]);
            }
        }
        self.n += 1;
        Ok(())
    }

    /// Exact moments of the concatenated streams behind `a` and `b`.
    /// Only defined for uniform weighting, where averages are linear in the
    /// observations.
    pub fn merge(a: &MomentSet, b: &MomentSet) -> Result<MomentSet> {
        if a.p != b.p {
            return Err(Error::InvalidDimension(format!(
                "cannot merge p={} with p={}",
                a.p, b.p
            )));
        }
        match (a.mode, b.mode) {
            (WeightMode::Uniform, WeightMode::Uniform) => {}
            _ => {
                return Err(Error::UnsupportedMerge(
                    "merge requires both moment sets in uniform mode".into(),
                ))
            }
        }
        if a.n == 0 {
            return Ok(b.clone());
        }
        if b.n == 0 {
            return Ok(a.clone());
        }
        let n = a.n + b.n;
        let wa = a.n as f64 / n as f64;
        let wb = b.n as f64 / n as f64;
        let p = a.p;
        let mut out = MomentSet::new(p, WeightMode::Uniform)?;
        out.n = n;
        for j in 0..p {
            out.mu_x[j] = wa * a.mu_x[j] + wb * b.mu_x[j];
            out.s_xy[j] = wa * a.s_xy[j] + wb * b.s_xy[j];
        }
        out.mu_y = wa * a.mu_y + wb * b.mu_y;
        out.s_yy = wa * a.s_yy + wb * b.s_yy;
        for i in 0..p {
            let ra = a.s_xx.row(i);
            let rb = b.s_xx.row(i);
            let ro = out.s_xx.row_mut(i);
            for j in 0..p {
                ro[j] = wa * ra[j] + wb * rb[j];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn stream_moments(xs: &[Vec<f64>], ys: &[f64]) -> MomentSet {
        let p = xs[0].len();
        let mut m = MomentSet::new(p, WeightMode::Uniform).unwrap();
        for (x, &y) in xs.iter().zip(ys) {
            m.update(Observation { x, y }).unwrap();
        }
        m
    }

    /// Brute-force batch averages over the same data.
    fn batch_oracle(xs: &[Vec<f64>], ys: &[f64]) -> (Vec<f64>, f64, Vec<Vec<f64>>, Vec<f64>, f64) {
        let n = xs.len() as f64;
        let p = xs[0].len();
        let mut mu_x = vec![0.0; p];
        let mut s_xy = vec![0.0; p];
        let mut s_xx = vec![vec![0.0; p]; p];
        let (mut mu_y, mut s_yy) = (0.0, 0.0);
        for (x, &y) in xs.iter().zip(ys) {
            for j in 0..p {
                mu_x[j] += x[j];
                s_xy[j] += y * x[j];
                for i in 0..p {
                    s_xx[i][j] += x[i] * x[j];
                }
            }
            mu_y += y;
            s_yy += y * y;
        }
        for j in 0..p {
            mu_x[j] /= n;
            s_xy[j] /= n;
            for i in 0..p {
                s_xx[j][i] /= n;
            }
        }
        (mu_x, mu_y / n, s_xx, s_xy, s_yy / n)
    }

    fn random_data(seed: u64, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = Rng::new(seed);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.next_normal()).collect())
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        (xs, ys)
    }

    #[test]
    fn zero_initialization() {
        let m = MomentSet::new(2, WeightMode::Uniform).unwrap();
        assert_eq!(m.n(), 0);
        assert_eq!(m.mu_x(), &[0.0, 0.0]);
        assert_eq!(m.s_xx().as_slice(), &[0.0; 4]);
    }

    #[test]
    fn zero_features_rejected() {
        assert!(matches!(
            MomentSet::new(0, WeightMode::Uniform),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn exponential_rate_recorded() {
        let m = MomentSet::new(3, WeightMode::Exponential { rate: 0.01 }).unwrap();
        assert_eq!(m.mode(), WeightMode::Exponential { rate: 0.01 });
        assert_eq!(m.n(), 0);
    }

    #[test]
    fn first_observation_equals_itself() {
        let mut m = MomentSet::new(2, WeightMode::Uniform).unwrap();
        m.update(Observation { x: &[1.0, 2.0], y: 3.0 }).unwrap();
        assert_eq!(m.n(), 1);
        assert_eq!(m.mu_x(), &[1.0, 2.0]);
        assert_eq!(m.mu_y(), 3.0);
        assert_eq!(m.s_xx().as_slice(), &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(m.s_xy(), &[3.0, 6.0]);
        assert_eq!(m.s_yy(), 9.0);
    }

    #[test]
    fn second_observation_averages() {
        let mut m = MomentSet::new(2, WeightMode::Uniform).unwrap();
        m.update(Observation { x: &[1.0, 2.0], y: 0.0 }).unwrap();
        m.update(Observation { x: &[3.0, 4.0], y: 0.0 }).unwrap();
        assert_eq!(m.mu_x(), &[2.0, 3.0]);
    }

    #[test]
    fn five_random_observations_match_batch_oracle() {
        let (xs, ys) = random_data(11, 5, 3);
        let m = stream_moments(&xs, &ys);
        let (mu_x, mu_y, s_xx, s_xy, s_yy) = batch_oracle(&xs, &ys);
        for j in 0..3 {
            assert!((m.mu_x()[j] - mu_x[j]).abs() < 1e-12);
            assert!((m.s_xy()[j] - s_xy[j]).abs() < 1e-12);
            for i in 0..3 {
                assert!((m.s_xx().get(i, j) - s_xx[i][j]).abs() < 1e-12);
            }
        }
        assert!((m.mu_y() - mu_y).abs() < 1e-12);
        assert!((m.s_yy() - s_yy).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite_and_wrong_width() {
        let mut m = MomentSet::new(2, WeightMode::Uniform).unwrap();
        assert!(matches!(
            m.update(Observation { x: &[f64::NAN, 0.0], y: 1.0 }),
            Err(Error::InvalidObservation(_))
        ));
        assert!(matches!(
            m.update(Observation { x: &[1.0], y: 1.0 }),
            Err(Error::InvalidDimension(_))
        ));
        assert_eq!(m.n(), 0);
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let (xs, ys) = random_data(5, 4, 2);
        let m = stream_moments(&xs, &ys);
        let empty = MomentSet::new(2, WeightMode::Uniform).unwrap();
        let merged = MomentSet::merge(&m, &empty).unwrap();
        assert_eq!(merged, m);
    }

    #[test]
    fn merge_equals_single_stream() {
        let (xs, ys) = random_data(6, 6, 3);
        let a = stream_moments(&xs[..3].to_vec(), &ys[..3].to_vec());
        let b = stream_moments(&xs[3..].to_vec(), &ys[3..].to_vec());
        let merged = MomentSet::merge(&a, &b).unwrap();
        let single = stream_moments(&xs, &ys);
        for j in 0..3 {
            assert!((merged.mu_x()[j] - single.mu_x()[j]).abs() < 1e-12);
            for i in 0..3 {
                assert!((merged.s_xx().get(i, j) - single.s_xx().get(i, j)).abs() < 1e-12);
            }
        }
        assert_eq!(merged.n(), single.n());
    }

    #[test]
    fn merge_mode_mismatch_rejected() {
        let u = MomentSet::new(2, WeightMode::Uniform).unwrap();
        let e = MomentSet::new(2, WeightMode::Exponential { rate: 0.1 }).unwrap();
        assert!(matches!(
            MomentSet::merge(&u, &e),
            Err(Error::UnsupportedMerge(_))
        ));
    }

    #[test]
    fn exponential_with_tiny_rate_tracks_uniform_early() {
        // While 1/(n+1) > rate the exponential update is exactly the uniform one.
        let (xs, ys) = random_data(9, 8, 2);
        let mut u = MomentSet::new(2, WeightMode::Uniform).unwrap();
        let mut e = MomentSet::new(2, WeightMode::Exponential { rate: 0.05 }).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            u.update(Observation { x, y }).unwrap();
            e.update(Observation { x, y }).unwrap();
        }
        // first 19 updates identical; 8 < 19 so everything matches bitwise
        assert_eq!(u.mu_x(), e.mu_x());
        assert_eq!(u.s_xx().as_slice(), e.s_xx().as_slice());
    }

    #[test]
    fn effective_n_caps_under_forgetting() {
        let mut m = MomentSet::new(1, WeightMode::Exponential { rate: 0.1 }).unwrap();
        for i in 0..50 {
            m.update(Observation { x: &[i as f64], y: 0.0 }).unwrap();
        }
        assert_eq!(m.n(), 50);
        assert_eq!(m.effective_n(), 10);
    }

    #[test]
    fn memory_is_independent_of_stream_length() {
        let mut m = MomentSet::new(4, WeightMode::Uniform).unwrap();
        let size_of = |m: &MomentSet| {
            m.mu_x.capacity() + m.s_xy.capacity() + m.s_xx.as_slice().len()
        };
        let before = size_of(&m);
        for i in 0..1000 {
            let v = i as f64;
            m.update(Observation { x: &[v, v + 1.0, v + 2.0, v + 3.0], y: v }).unwrap();
        }
        assert_eq!(size_of(&m), before);
    }

    #[test]
    fn covariance_stays_psd() {
        let (xs, ys) = random_data(21, 40, 4);
        let m = stream_moments(&xs, &ys);
        // smallest eigenvalue of S_xx - mu mu^T via a few inverse iterations is
        // overkill; check x^T C x >= -tol for random probes instead
        let mut rng = Rng::new(3);
        let tol = 1e-8 * m.s_xx().trace();
        for _ in 0..50 {
            let v: Vec<f64> = (0..4).map(|_| rng.next_normal()).collect();
            let mut q = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    q += v[i] * (m.s_xx().get(i, j) - m.mu_x()[i] * m.mu_x()[j]) * v[j];
                }
            }
            assert!(q >= -tol, "covariance quadratic form {q} below -{tol}");
        }
        assert!(m.s_yy() - m.mu_y() * m.mu_y() >= -1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn order_invariance(seed in 0u64..1000) {
            let (mut xs, mut ys) = random_data(seed, 12, 3);
            let fwd = stream_moments(&xs, &ys);
            xs.reverse();
            ys.reverse();
            let rev = stream_moments(&xs, &ys);
            for j in 0..3 {
                let denom = fwd.mu_x()[j].abs().max(1.0);
                prop_assert!((fwd.mu_x()[j] - rev.mu_x()[j]).abs() / denom < 1e-9);
                for i in 0..3 {
                    let denom = fwd.s_xx().get(i, j).abs().max(1.0);
                    prop_assert!((fwd.s_xx().get(i, j) - rev.s_xx().get(i, j)).abs() / denom < 1e-9);
                }
            }
        }

        #[test]
        fn merge_associative_commutative(seed in 0u64..1000) {
            let (xs, ys) = random_data(seed, 9, 2);
            let a = stream_moments(&xs[0..3].to_vec(), &ys[0..3].to_vec());
            let b = stream_moments(&xs[3..6].to_vec(), &ys[3..6].to_vec());
            let c = stream_moments(&xs[6..9].to_vec(), &ys[6..9].to_vec());
            let left = MomentSet::merge(&MomentSet::merge(&a, &b).unwrap(), &c).unwrap();
            let right = MomentSet::merge(&a, &MomentSet::merge(&b, &c).unwrap()).unwrap();
            let ba = MomentSet::merge(&b, &a).unwrap();
            let ab = MomentSet::merge(&a, &b).unwrap();
            for j in 0..2 {
                prop_assert!((left.mu_x()[j] - right.mu_x()[j]).abs() < 1e-12);
                prop_assert!((ab.mu_x()[j] - ba.mu_x()[j]).abs() < 1e-12);
                for i in 0..2 {
                    prop_assert!((left.s_xx().get(i, j) - right.s_xx().get(i, j)).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn s_xx_exactly_symmetric(seed in 0u64..1000) {
            let (xs, ys) = random_data(seed, 7, 4);
            let m = stream_moments(&xs, &ys);
            prop_assert_eq!(m.s_xx().max_abs_asymmetry(), 0.0);
        }
    }
}
