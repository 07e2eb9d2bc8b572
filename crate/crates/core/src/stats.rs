//! Streaming moments and the nonparametric tests used by the certification
//! checks (Kolmogorov–Smirnov, Wasserstein-1, distance correlation).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Running mean and variance (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let nf = n as f64;
        self.mean += delta * other.n as f64 / nf;
        self.m2 += other.m2 + delta * delta * self.n as f64 * other.n as f64 / nf;
        self.n = n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n == 0 {
            f64::INFINITY
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Joint moments of a pair, for ratio estimators and paired differences.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairMoments {
    pub n: u64,
    pub mean_x: f64,
    pub mean_y: f64,
    cxx: f64,
    cyy: f64,
    cxy: f64,
}

impl PairMoments {
    #[inline]
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let nf = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / nf;
        self.mean_y += dy / nf;
        self.cxx += dx * (x - self.mean_x);
        self.cyy += dy * (y - self.mean_y);
        self.cxy += dx * (y - self.mean_y);
    }

    pub fn merge(&mut self, o: &PairMoments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let (na, nb, nf) = (self.n as f64, o.n as f64, n as f64);
        let dx = o.mean_x - self.mean_x;
        let dy = o.mean_y - self.mean_y;
        self.cxx += o.cxx + dx * dx * na * nb / nf;
        self.cyy += o.cyy + dy * dy * na * nb / nf;
        self.cxy += o.cxy + dx * dy * na * nb / nf;
        self.mean_x += dx * nb / nf;
        self.mean_y += dy * nb / nf;
        self.n = n;
    }

    fn denom(&self) -> f64 {
        (self.n.max(2) - 1) as f64
    }

    pub fn var_x(&self) -> f64 {
        self.cxx / self.denom()
    }

    pub fn var_y(&self) -> f64 {
        self.cyy / self.denom()
    }

    pub fn cov(&self) -> f64 {
        self.cxy / self.denom()
    }

    pub fn se_x(&self) -> f64 {
        (self.var_x().max(0.0) / self.n as f64).sqrt()
    }

    pub fn se_y(&self) -> f64 {
        (self.var_y().max(0.0) / self.n as f64).sqrt()
    }

    /// Standard error of mean(x) - mean(y) for paired draws.
    pub fn se_diff(&self) -> f64 {
        ((self.var_x() + self.var_y() - 2.0 * self.cov()).max(0.0) / self.n as f64).sqrt()
    }

    /// mean(x) / mean(y) with a delta-method standard error.
    pub fn ratio(&self) -> (f64, f64) {
        let r = self.mean_x / self.mean_y;
        let v = (self.var_x() - 2.0 * r * self.cov() + r * r * self.var_y()).max(0.0);
        (r, (v / self.n as f64).sqrt() / self.mean_y.abs())
    }
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Survival function of the Kolmogorov distribution, P(K > x).
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // P(K <= x) = sqrt(2 pi)/x * sum exp(-(2k-1)^2 pi^2 / (8 x^2))
        let c = -std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let s: f64 = (1..=20)
            .map(|k| {
                let j = (2 * k - 1) as f64;
                (c * j * j).exp()
            })
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let kf = k as f64;
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * kf * kf * x * x).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Asymptotic critical value c with P(K > c) = level.
pub fn kolmogorov_critical(level: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical: f64,
    pub p_value: f64,
    pub rejected: bool,
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("NaN in sample"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// One-sample KS test of `xs` against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64, level: f64) -> Result<KsResult> {
    if xs.is_empty() {
        return Err(Error::TooFewSamples { found: 0, required: 1 });
    }
    let v = sorted(xs)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sqn = n.sqrt();
    let critical = kolmogorov_critical(level) / sqn;
    let p_value = kolmogorov_sf((sqn + 0.12 + 0.11 / sqn) * d);
    Ok(KsResult { statistic: d, critical, p_value, rejected: d > critical })
}

/// Two-sample KS statistic on pre-sorted samples.
fn ks_stat_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Two-sample KS test with the asymptotic critical value.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFewSamples { found: 0, required: 1 });
    }
    let (sa, sb) = (sorted(a)?, sorted(b)?);
    let d = ks_stat_sorted(&sa, &sb);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ne = (na * nb / (na + nb)).sqrt();
    let critical = kolmogorov_critical(level) / ne;
    let p_value = kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d);
    Ok(KsResult { statistic: d, critical, p_value, rejected: d > critical })
}

/// Wasserstein-1 distance between two empirical laws.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFewSamples { found: 0, required: 1 });
    }
    let (sa, sb) = (sorted(a)?, sorted(b)?);
    Ok(wasserstein_sorted(&sa, &sb))
}

fn wasserstein_sorted(a: &[f64], b: &[f64]) -> f64 {
    // integral of |F_a - F_b| over the merged support
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (x - prev);
        prev = x;
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
    }
    total
}

/// Two-sample statistic used by permutation tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoSampleMetric {
    Kolmogorov,
    Wasserstein,
}

impl TwoSampleMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            TwoSampleMetric::Kolmogorov => {
                let (sa, sb) = (sorted(a)?, sorted(b)?);
                Ok(ks_stat_sorted(&sa, &sb))
            }
            TwoSampleMetric::Wasserstein => wasserstein1(a, b),
        }
    }
}

/// Permutation p-value for a two-sample distance, `(1 + #{perm >= obs}) / (1 + perms)`.
pub fn permutation_p_value<R: Rng>(
    a: &[f64],
    b: &[f64],
    metric: TwoSampleMetric,
    permutations: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let observed = metric.distance(a, b)?;
    let mut pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let mut exceed = 0usize;
    for _ in 0..permutations {
        pooled.shuffle(rng);
        let (pa, pb) = pooled.split_at(a.len());
        if metric.distance(pa, pb)? >= observed - 1e-15 {
            exceed += 1;
        }
    }
    Ok((observed, (1 + exceed) as f64 / (1 + permutations) as f64))
}

/// Sample distance correlation (Székely–Rizzo), O(n^2).
pub fn distance_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len();
    if n != y.len() || n < 4 {
        return Err(Error::invalid("distance correlation needs paired samples of size >= 4"));
    }
    let centered = |v: &[f64]| -> Vec<f64> {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = (v[i] - v[j]).abs();
            }
        }
        let row: Vec<f64> = (0..n).map(|i| d[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
        let grand = row.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] += grand - row[i] - row[j];
            }
        }
        d
    };
    let a = centered(x);
    let b = centered(y);
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>() / (n * n) as f64;
    let vxy = dot(&a, &b);
    let vxx = dot(&a, &a);
    let vyy = dot(&b, &b);
    if vxx <= 0.0 || vyy <= 0.0 {
        return Ok(0.0);
    }
    Ok((vxy.max(0.0) / (vxx * vyy).sqrt()).sqrt())
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(xs: &[f64], q: f64) -> Result<f64> {
    if xs.is_empty() || !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid("quantile needs a nonempty sample and q in [0,1]"));
    }
    let mut v = xs.to_vec();
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let (_, &mut a, _) = v.select_nth_unstable_by(lo, f64::total_cmp);
    if hi == lo {
        return Ok(a);
    }
    let (_, &mut b, _) = v.select_nth_unstable_by(hi, f64::total_cmp);
    Ok(a + (pos - lo as f64) * (b - a))
}
