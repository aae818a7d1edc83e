//! Extracted sparse linear models and their textual file format.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::standardize::StandardizedMoments;

/// A sparse linear model on both the standardized and the original scale.
///
/// `support` holds ascending original feature indices. Coefficients, means
/// and standard deviations are stored per support member. Predictions on the
/// original scale use
///
/// ```text
/// y_hat = intercept + sum_j beta_orig[j] * x[support[j]]
/// ```
///
/// which by construction equals the standardized form
/// `mu_y + sum_j beta_std[j] * (x[support[j]] - mu_x[j]) / sigma_x[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseModel {
    p: usize,
    k: usize,
    support: Vec<usize>,
    beta_std: Vec<f64>,
    beta_orig: Vec<f64>,
    mu_x: Vec<f64>,
    sigma_x: Vec<f64>,
    mu_y: f64,
    intercept: f64,
}

impl SparseModel {
    /// Build a model from standardized-scale coefficients on `support`
    /// (ascending original indices).
    pub(crate) fn from_standardized(
        sm: &StandardizedMoments,
        support: Vec<usize>,
        beta_std: Vec<f64>,
        k: usize,
    ) -> SparseModel {
        debug_assert_eq!(support.len(), beta_std.len());
        debug_assert!(support.windows(2).all(|w| w[0] < w[1]));
        let mu_y = sm.mu_y();
        let mu_x: Vec<f64> = support.iter().map(|&j| sm.mu_x()[j]).collect();
        let sigma_x: Vec<f64> = support.iter().map(|&j| sm.sigma_x()[j]).collect();
        let beta_orig: Vec<f64> = beta_std
            .iter()
            .zip(&sigma_x)
            .map(|(b, s)| b / s)
            .collect();
        let intercept = mu_y
            - beta_orig
                .iter()
                .zip(&mu_x)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        SparseModel {
            p: sm.p(),
            k,
            support,
            beta_std,
            beta_orig,
            mu_x,
            sigma_x,
            mu_y,
            intercept,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Requested sparsity level.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn beta_std(&self) -> &[f64] {
        &self.beta_std
    }

    pub fn beta_orig(&self) -> &[f64] {
        &self.beta_orig
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn mu_y(&self) -> f64 {
        self.mu_y
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Dense coefficient vector on the original scale, length `p`.
    pub fn dense_beta_orig(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for (slot, &j) in self.support.iter().enumerate() {
            out[j] = self.beta_orig[slot];
        }
        out
    }

    fn required_dim(&self) -> usize {
        self.support.last().map_or(0, |&j| j + 1)
    }

    /// Predict on the original feature scale. `x` must cover every support
    /// index; trailing features beyond the support carry zero weight and are
    /// ignored.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() < self.required_dim() {
            return Err(Error::InvalidDimension(format!(
                "input has {} features, model references index {}",
                x.len(),
                self.required_dim() - 1
            )));
        }
        let mut y = self.intercept;
        for (slot, &j) in self.support.iter().enumerate() {
            y += self.beta_orig[slot] * x[j];
        }
        Ok(y)
    }

    /// Equivalent prediction through the standardized parameterization;
    /// retained for verification.
    pub fn predict_standardized_form(&self, x: &[f64]) -> Result<f64> {
        if x.len() < self.required_dim() {
            return Err(Error::InvalidDimension("input too short".into()));
        }
        let mut y = self.mu_y;
        for (slot, &j) in self.support.iter().enumerate() {
            y += self.beta_std[slot] * (x[j] - self.mu_x[slot]) / self.sigma_x[slot];
        }
        Ok(y)
    }

    /// Classify as +1/-1 by the sign of the prediction; sign(0) is +1.
    pub fn predict_class(&self, x: &[f64]) -> Result<f64> {
        let y = self.predict(x)?;
        Ok(if y >= 0.0 { 1.0 } else { -1.0 })
    }

    /// Write the textual model format:
    ///
    /// ```text
    /// ravg-model v1
    /// k <k>
    /// intercept <value>
    /// <index> <beta_orig> <beta_std> <mu_x> <sigma_x>   (one per member)
    /// ```
    ///
    /// Floats use shortest round-trip formatting, so identical models always
    /// produce byte-identical files.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "ravg-model v1")?;
        writeln!(w, "k {}", self.k)?;
        writeln!(w, "intercept {}", self.intercept)?;
        for (slot, &j) in self.support.iter().enumerate() {
            writeln!(
                w,
                "{} {} {} {} {}",
                j, self.beta_orig[slot], self.beta_std[slot], self.mu_x[slot], self.sigma_x[slot]
            )?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<SparseModel> {
        let mut lines = r.lines().enumerate();
        let mut next_line = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((i, Err(e))) => Err(Error::Parse { line: i + 1, reason: e.to_string() }),
                None => Err(Error::Parse { line: 0, reason: format!("missing {what}") }),
            }
        };
        let (ln, header) = next_line("header")?;
        if header.trim() != "ravg-model v1" {
            return Err(Error::Parse { line: ln, reason: format!("bad header {header:?}") });
        }
        let (ln, kline) = next_line("k line")?;
        let k: usize = kline
            .strip_prefix("k ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse { line: ln, reason: "expected `k <int>`".into() })?;
        let (ln, iline) = next_line("intercept line")?;
        let intercept: f64 = iline
            .strip_prefix("intercept ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse { line: ln, reason: "expected `intercept <float>`".into() })?;
        let mut support = Vec::new();
        let mut beta_orig = Vec::new();
        let mut beta_std = Vec::new();
        let mut mu_x = Vec::new();
        let mut sigma_x = Vec::new();
        for (i, line) in lines {
            let ln = i + 1;
            let line = line.map_err(|e| Error::Parse { line: ln, reason: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(Error::Parse {
                    line: ln,
                    reason: format!("expected 5 fields, found {}", fields.len()),
                });
            }
            let idx: usize = fields[0]
                .parse()
                .map_err(|_| Error::Parse { line: ln, reason: "bad index".into() })?;
            let mut vals = [0.0f64; 4];
            for (slot, f) in fields[1..].iter().enumerate() {
                vals[slot] = f
                    .parse()
                    .map_err(|_| Error::Parse { line: ln, reason: format!("bad float {f:?}") })?;
            }
            if let Some(&last) = support.last() {
                if idx <= last {
                    return Err(Error::Parse {
                        line: ln,
                        reason: "support indices must be strictly ascending".into(),
                    });
                }
            }
            support.push(idx);
            beta_orig.push(vals[0]);
            beta_std.push(vals[1]);
            mu_x.push(vals[2]);
            sigma_x.push(vals[3]);
        }
        let p = support.last().map_or(0, |&j| j + 1);
        let mu_y = intercept
            + beta_orig
                .iter()
                .zip(&mu_x)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        Ok(SparseModel {
            p,
            k,
            support,
            beta_std,
            beta_orig,
            mu_x,
            sigma_x,
            mu_y,
            intercept,
        })
    }
}
