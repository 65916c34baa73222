//! Hypothesis tests and the experiments built on them.
//!
//! Every test returns a [`TestReport`]. `pass` always means "the null
//! hypothesis is not rejected at `level`", i.e. `statistic < threshold`.
//! Whether a rejection is the *expected* outcome is decided by the caller
//! (see the CLI's expected-fail mode).

mod experiments;

pub use experiments::*;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Significance level used throughout unless overridden.
pub const DEFAULT_LEVEL: f64 = 0.01;

/// Smallest sample accepted by the Kolmogorov–Smirnov tests.
pub const KS_MIN_SAMPLES: usize = 20;

/// Smallest expected cell count accepted by the chi-square tests.
pub const CHI_SQUARE_MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub level: f64,
    pub p_value: Option<f64>,
    pub pass: bool,
    pub replicas: usize,
    pub seed: Option<u64>,
}

impl TestReport {
    pub(crate) fn new(name: &str, statistic: f64, threshold: f64, level: f64, p_value: Option<f64>) -> Self {
        TestReport {
            name: name.to_string(),
            statistic,
            threshold,
            level,
            p_value,
            pass: statistic < threshold,
            replicas: 0,
            seed: None,
        }
    }

    pub fn with_run(mut self, replicas: usize, seed: Option<u64>) -> Self {
        self.replicas = replicas;
        self.seed = seed;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub const CSV_HEADER: &'static str = "name,statistic,threshold,level,p_value,pass,replicas,seed";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{},{},{},{}",
            self.name,
            self.statistic,
            self.threshold,
            self.level,
            self.p_value.map(|p| format!("{p:?}")).unwrap_or_default(),
            self.pass,
            self.replicas,
            self.seed.map(|s| s.to_string()).unwrap_or_default()
        )
    }
}

/// `c(α)` in the asymptotic Kolmogorov–Smirnov critical value `c(α)/√N`.
pub fn ks_coefficient(level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt()
}

/// Asymptotic Kolmogorov tail `Pr(K > λ) = 2 Σ (-1)^(k-1) exp(-2 k² λ²)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample Kolmogorov–Smirnov test against the uniform law on (0,1).
pub fn ks_uniform(values: &[f64], level: f64) -> Result<TestReport> {
    let n = values.len();
    if n < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: KS_MIN_SAMPLES, got: n });
    }
    let nf = n as f64;
    let statistic = sorted(values)
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / nf - cdf).max(cdf - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    let root = nf.sqrt();
    let p = kolmogorov_tail((root + 0.12 + 0.11 / root) * statistic);
    Ok(TestReport::new("ks_uniform", statistic, ks_coefficient(level) / root, level, Some(p)))
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<TestReport> {
    for s in [a, b] {
        if s.len() < KS_MIN_SAMPLES {
            return Err(Error::TooFewSamples { needed: KS_MIN_SAMPLES, got: s.len() });
        }
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut statistic) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        statistic = statistic.max((i as f64 / na - j as f64 / nb).abs());
    }
    let scale = (na * nb / (na + nb)).sqrt();
    let p = kolmogorov_tail((scale + 0.12 + 0.11 / scale) * statistic);
    Ok(TestReport::new("ks_two_sample", statistic, ks_coefficient(level) / scale, level, Some(p)))
}

pub(crate) fn chi_square_quantile(df: f64, level: f64) -> (ChiSquared, f64) {
    let dist = ChiSquared::new(df).expect("positive degrees of freedom");
    let threshold = dist.inverse_cdf(1.0 - level);
    (dist, threshold)
}

/// Pearson chi-square test of independence for paired categorical data.
pub fn chi_square_independence(
    x_bins: &[usize],
    y_bins: &[usize],
    r: usize,
    c: usize,
    level: f64,
) -> Result<TestReport> {
    if x_bins.len() != y_bins.len() {
        return Err(Error::BadParameter("paired lists differ in length".into()));
    }
    if r < 2 || c < 2 {
        return Err(Error::BadParameter("need at least a 2 × 2 table".into()));
    }
    let mut table = vec![vec![0usize; c]; r];
    for (&x, &y) in x_bins.iter().zip(y_bins) {
        if x >= r || y >= c {
            return Err(Error::BadParameter(format!("category ({x}, {y}) outside {r} × {c} table")));
        }
        table[x][y] += 1;
    }
    let n = x_bins.len() as f64;
    let rows: Vec<f64> = table.iter().map(|row| row.iter().sum::<usize>() as f64).collect();
    let cols: Vec<f64> = (0..c).map(|j| table.iter().map(|row| row[j]).sum::<usize>() as f64).collect();
    let mut statistic = 0.0;
    for i in 0..r {
        for j in 0..c {
            let expected = rows[i] * cols[j] / n.max(1.0);
            if expected < CHI_SQUARE_MIN_EXPECTED {
                return Err(Error::SparseTable { row: i, col: j, expected });
            }
            let diff = table[i][j] as f64 - expected;
            statistic += diff * diff / expected;
        }
    }
    let (dist, threshold) = chi_square_quantile(((r - 1) * (c - 1)) as f64, level);
    Ok(TestReport::new("chi_square_independence", statistic, threshold, level, Some(dist.sf(statistic))))
}

/// Pearson goodness of fit of category counts against the uniform law.
pub fn chi_square_uniform(counts: &[usize], level: f64) -> Result<TestReport> {
    if counts.len() < 2 {
        return Err(Error::BadParameter("need at least two categories".into()));
    }
    let n: usize = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    if expected < CHI_SQUARE_MIN_EXPECTED {
        return Err(Error::SparseTable { row: 0, col: 0, expected });
    }
    let statistic = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let (dist, threshold) = chi_square_quantile((counts.len() - 1) as f64, level);
    Ok(TestReport::new("chi_square_uniform", statistic, threshold, level, Some(dist.sf(statistic))))
}

/// Welch two-sample test for equal means, normal approximation, two-sided.
pub fn two_sample_mean_test(a: &[f64], b: &[f64], level: f64) -> Result<TestReport> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: s.len() });
        }
    }
    let moments = |s: &[f64]| {
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let var = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var / n)
    };
    let ((ma, va), (mb, vb)) = (moments(a), moments(b));
    let se = (va + vb).sqrt();
    let statistic = if se > 0.0 {
        (ma - mb).abs() / se
    } else if ma == mb {
        0.0
    } else {
        f64::INFINITY
    };
    let p = erfc(statistic / std::f64::consts::SQRT_2);
    // Two-sided normal quantile z with erfc(z/√2) = level, by bisection.
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erfc(mid / std::f64::consts::SQRT_2) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TestReport::new("two_sample_mean", statistic, hi, level, Some(p)))
}
