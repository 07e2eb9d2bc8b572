//! Empirical tail and spectral tail processes recovered from simulated
//! paths, and their distance to the generating model.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::ConeSpace;
use crate::error::{Error, Result};
use crate::particles::PathEnsemble;
use crate::rng::{stream, tag};
use crate::spectral::SpectralModel;
use crate::stats::{distance_correlation, permutation_p_value, quantile, TwoSampleMetric};
use crate::tail_measure::pareto_radius;

pub const DEFAULT_MIN_COUNT: usize = 500;
pub const DEFAULT_QUANTILE: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    /// `X / u` given `‖X_0‖ > u`
    Tail,
    /// `X / ‖X_0‖` given `‖X_0‖ > u`
    Spectral,
}

/// Windows `[-L', L']` around every exceedance of `u` at the conditioning lag.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTailLaw {
    pub kind: TailKind,
    pub space: ConeSpace,
    pub threshold: f64,
    pub half_width: i64,
    /// `‖X_t‖ / u` for each exceedance.
    radii: Vec<f64>,
    /// Exceedance-major, `(2L' + 1) · dim` values each.
    values: Vec<f64>,
    /// Runs of exceedances no more than `max(L', 1)` steps apart.
    clusters: usize,
}

impl EmpiricalTailLaw {
    fn empty(kind: TailKind, space: ConeSpace, threshold: f64, half_width: i64) -> Self {
        EmpiricalTailLaw { kind, space, threshold, half_width, radii: Vec::new(), values: Vec::new(), clusters: 0 }
    }

    /// `n` draws of `RΘ` (tail) or `Θ` (spectral) on `[-L', L']`, for null calibration.
    pub fn from_model(model: &SpectralModel, kind: TailKind, n: usize, half_width: i64, seed: u64) -> Result<Self> {
        if half_width < 0 || half_width > model.half_width() {
            return Err(Error::invalid(format!("window ±{half_width} exceeds the model window")));
        }
        let space = model.space();
        let mut out = EmpiricalTailLaw::empty(kind, space, 1.0, half_width);
        let mut rng = stream(seed, tag::LAW, 1, 0);
        for _ in 0..n {
            let theta = model.sample_theta(&mut rng);
            let radius = pareto_radius(&mut rng, model.alpha());
            let r = match kind {
                TailKind::Tail => radius,
                TailKind::Spectral => 1.0,
            };
            out.radii.push(radius);
            out.clusters += 1;
            for h in -half_width..=half_width {
                out.values.extend(theta.at(h).expect("inside the model window").iter().map(|v| v * r));
            }
        }
        Ok(out)
    }

    pub fn count(&self) -> usize {
        self.radii.len()
    }

    /// Number of exceedance clusters, which are close to independent.
    pub fn effective_sample_size(&self) -> usize {
        self.clusters
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    fn width(&self) -> usize {
        (2 * self.half_width + 1) as usize * self.space.dim()
    }

    fn offset(&self, lag: i64) -> Result<usize> {
        if lag.abs() > self.half_width {
            return Err(Error::invalid(format!("lag {lag} outside the collected window ±{}", self.half_width)));
        }
        Ok((lag + self.half_width) as usize * self.space.dim())
    }

    /// Value of exceedance `i` at `lag`.
    pub fn value(&self, i: usize, lag: i64) -> Result<&[f64]> {
        let o = self.offset(lag)?;
        let start = i * self.width() + o;
        Ok(&self.values[start..start + self.space.dim()])
    }

    /// `‖·_lag‖` across exceedances.
    pub fn norms_at(&self, lag: i64) -> Result<Vec<f64>> {
        let o = self.offset(lag)?;
        let d = self.space.dim();
        Ok(self.values.chunks_exact(self.width()).map(|w| self.space.norm_of(&w[o..o + d])).collect())
    }

    /// Append the exceedances of another collection at the same threshold.
    pub fn merge(&mut self, other: EmpiricalTailLaw) -> Result<()> {
        if other.kind != self.kind || other.space != self.space || other.half_width != self.half_width || other.threshold != self.threshold {
            return Err(Error::invalid("tail laws differ in kind, space, window or threshold"));
        }
        self.radii.extend(other.radii);
        self.values.extend(other.values);
        self.clusters += other.clusters;
        Ok(())
    }

    /// Require at least `min_count` exceedances.
    pub fn ensure_count(&self, min_count: usize) -> Result<()> {
        if self.count() < min_count {
            return Err(Error::InsufficientExceedances { found: self.count(), required: min_count });
        }
        Ok(())
    }

    /// CSV with columns `exceedance, lag, x0..x{d-1}, norm`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let d = self.space.dim();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["exceedance".to_string(), "lag".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        header.push("norm".into());
        out.write_record(&header)?;
        let mut row = Vec::with_capacity(d + 3);
        for (i, win) in self.values.chunks_exact(self.width()).enumerate() {
            for (j, x) in win.chunks_exact(d).enumerate() {
                row.clear();
                row.push(i.to_string());
                row.push((j as i64 - self.half_width).to_string());
                row.extend(x.iter().map(|v| format!("{v:e}")));
                row.push(format!("{:e}", self.space.norm_of(x)));
                out.write_record(&row)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `n` entries evenly spread over `xs`. Exceedances come in clusters, so a
/// strided subsample is far less dependent than a prefix.
fn strided(xs: &[f64], n: usize) -> Vec<f64> {
    let len = xs.len();
    (0..n.min(len)).map(|i| xs[i * len / n.min(len)]).collect()
}

/// Empirical `q`-quantile of all path norms.
pub fn quantile_threshold(ens: &PathEnsemble, q: f64) -> Result<f64> {
    quantile(ens.all_norms(), q)
}

fn collect(ens: &PathEnsemble, kind: TailKind, u: f64, half_width: i64) -> Result<EmpiricalTailLaw> {
    if !(u > 0.0) {
        return Err(Error::invalid("threshold must be positive"));
    }
    if half_width < 0 || (2 * half_width + 1) as usize > ens.horizon {
        return Err(Error::invalid(format!("window ±{half_width} does not fit the horizon {}", ens.horizon)));
    }
    let d = ens.space.dim();
    let l = half_width as usize;
    let parts: Vec<EmpiricalTailLaw> = (0..ens.replicates)
        .into_par_iter()
        .map(|r| {
            let x = ens.norms(r);
            let p = ens.path(r);
            let mut part = EmpiricalTailLaw::empty(kind, ens.space, u, half_width);
            let gap = l.max(1);
            let mut last: Option<usize> = None;
            for t in l..ens.horizon - l {
                if x[t] <= u {
                    continue;
                }
                if last.is_none_or(|s| t - s > gap) {
                    part.clusters += 1;
                }
                last = Some(t);
                let s = match kind {
                    TailKind::Tail => u,
                    TailKind::Spectral => x[t],
                };
                part.radii.push(x[t] / u);
                part.values.extend(p[(t - l) * d..(t + l + 1) * d].iter().map(|v| v / s));
            }
            part
        })
        .collect();
    let mut out = EmpiricalTailLaw::empty(kind, ens.space, u, half_width);
    for p in parts {
        out.merge(p)?;
    }
    Ok(out)
}

/// `X_{t-L'..t+L'} / u` over all `(replicate, t)` with `‖X_t‖ > u`.
pub fn empirical_tail_process(ens: &PathEnsemble, u: f64, half_width: i64, min_count: usize) -> Result<EmpiricalTailLaw> {
    let law = collect(ens, TailKind::Tail, u, half_width)?;
    law.ensure_count(min_count)?;
    Ok(law)
}

/// `X_{t-L'..t+L'} / ‖X_t‖` over all `(replicate, t)` with `‖X_t‖ > u`.
pub fn empirical_spectral_tail(ens: &PathEnsemble, u: f64, half_width: i64, min_count: usize) -> Result<EmpiricalTailLaw> {
    let law = collect(ens, TailKind::Spectral, u, half_width)?;
    law.ensure_count(min_count)?;
    Ok(law)
}

/// Collect without the count check, for merging batches.
pub fn collect_exceedances(ens: &PathEnsemble, kind: TailKind, u: f64, half_width: i64) -> Result<EmpiricalTailLaw> {
    collect(ens, kind, u, half_width)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillEstimate {
    pub alpha: f64,
    pub se: f64,
    pub k: usize,
}

/// Hill estimator on the top `k` order statistics, `SE = α̂ / √k`.
pub fn hill_alpha(sample: &[f64], k: usize) -> Result<HillEstimate> {
    if k < 10 {
        return Err(Error::invalid("the Hill estimator needs k >= 10"));
    }
    if 2 * k >= sample.len() {
        return Err(Error::invalid(format!("k = {k} must be below half the sample size {}", sample.len())));
    }
    let mut v = sample.to_vec();
    let pivot = v.len() - k - 1;
    v.select_nth_unstable_by(pivot, f64::total_cmp);
    let base = v[pivot];
    let top = &v[pivot + 1..];
    if !(base > 0.0) {
        return Err(Error::invalid("the top order statistics must be positive"));
    }
    let mut logs: Vec<f64> = top.iter().map(|x| (x / base).ln()).collect();
    logs.sort_by(f64::total_cmp);
    let gamma = crate::stats::pairwise_sum(&logs) / k as f64;
    if !(gamma > 0.0) {
        return Err(Error::Degenerate("tied top order statistics".into()));
    }
    let alpha = 1.0 / gamma;
    Ok(HillEstimate { alpha, se: alpha / (k as f64).sqrt(), k })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawRow {
    pub lag: i64,
    pub statistic: f64,
    pub p_value: f64,
    pub n_empirical: usize,
    pub n_model: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawDistance {
    pub metric: TwoSampleMetric,
    pub permutations: usize,
    pub rows: Vec<LawRow>,
}

impl LawDistance {
    /// Share of lags with `p >= level`.
    pub fn share_not_rejected(&self, level: f64) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.p_value >= level).count() as f64 / self.rows.len() as f64
    }
}

/// Settings for [`law_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawDistanceSpec {
    pub metric: TwoSampleMetric,
    pub permutations: usize,
    /// Cap on the empirical sample per lag; the model side matches it.
    pub max_samples: usize,
    pub seed: u64,
}

impl Default for LawDistanceSpec {
    fn default() -> Self {
        LawDistanceSpec { metric: TwoSampleMetric::Wasserstein, permutations: 199, max_samples: 4000, seed: 0 }
    }
}

/// Per-lag distance between the empirical norms `‖·_h‖` and the model's
/// `‖Θ_h‖` (spectral) or `‖Y_h‖` (tail), with permutation p-values.
pub fn law_distance(emp: &EmpiricalTailLaw, model: &SpectralModel, lags: &[i64], spec: &LawDistanceSpec) -> Result<LawDistance> {
    if emp.count() == 0 {
        return Err(Error::TooFewSamples { found: 0, required: 1 });
    }
    if let Some(h) = lags.iter().find(|&&h| h.abs() > emp.half_width || !model.lag_in_scope(h)) {
        return Err(Error::invalid(format!("lag {h} outside the empirical or model window")));
    }
    if emp.space != model.space() {
        return Err(Error::VariantMismatch);
    }
    let n = emp.count().min(spec.max_samples);
    let mut rng = stream(spec.seed, tag::LAW, 0, 0);
    let a = model.alpha();
    let model_side: Vec<Vec<f64>> = {
        let mut cols = vec![Vec::with_capacity(n); lags.len()];
        for _ in 0..n {
            let theta = model.sample_theta(&mut rng);
            let r = match emp.kind {
                TailKind::Tail => pareto_radius(&mut rng, a),
                TailKind::Spectral => 1.0,
            };
            for (c, &h) in cols.iter_mut().zip(lags) {
                c.push(r * theta.norm_at(h));
            }
        }
        cols
    };
    let rows = lags
        .par_iter()
        .zip(model_side)
        .enumerate()
        .map(|(i, (&h, ms))| {
            let es = strided(&emp.norms_at(h)?, n);
            let mut prng = stream(spec.seed, tag::PERMUTATION, i as u64, 0);
            let (statistic, p_value) = permutation_p_value(&es, &ms, spec.metric, spec.permutations, &mut prng)?;
            Ok(LawRow { lag: h, statistic, p_value, n_empirical: es.len(), n_model: ms.len() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LawDistance { metric: spec.metric, permutations: spec.permutations, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependenceTest {
    pub lag: i64,
    pub dcor: f64,
    /// `1 - level` quantile of the permutation null.
    pub null_quantile: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Distance correlation between the radius `‖X_t‖ / u` and `‖Θ̂_lag‖`,
/// against a permutation null.
pub fn radius_angle_dependence(emp: &EmpiricalTailLaw, lag: i64, max_samples: usize, permutations: usize, level: f64, seed: u64) -> Result<DependenceTest> {
    let n = emp.count().min(max_samples);
    let x = strided(&emp.radii, n);
    let mut y = strided(&emp.norms_at(lag)?, n);
    if let TailKind::Tail = emp.kind {
        // turn Y into its angular part
        y.iter_mut().zip(&x).for_each(|(v, r)| *v /= r);
    }
    let dcor = distance_correlation(&x, &y)?;
    let mut rng = stream(seed, tag::PERMUTATION, 1 << 32 | lag.unsigned_abs(), 0);
    let mut null = Vec::with_capacity(permutations);
    let mut yp = y.clone();
    for _ in 0..permutations {
        yp.shuffle(&mut rng);
        null.push(distance_correlation(&x, &yp)?);
    }
    let exceed = null.iter().filter(|&&d| d >= dcor).count();
    Ok(DependenceTest {
        lag,
        dcor,
        null_quantile: quantile(&null, 1.0 - level)?,
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::{simulate_ensemble, SimulationSpec};
    use crate::stats::ks_one_sample;
    use crate::tail_measure::make_tilde_z;
    use rand::Rng;

    fn ensemble(model: &SpectralModel, horizon: usize, replicates: usize, seed: u64) -> PathEnsemble {
        let tz = make_tilde_z(model).unwrap();
        let spec = SimulationSpec { horizon, replicates, n_per_shift: 16, u_min: 0.5, tolerance: 1.0, seed, m: None, first_replicate: 0 };
        simulate_ensemble(&tz, &spec).unwrap()
    }

    #[test]
    fn hill_recovers_pareto_and_frechet() {
        let mut rng = stream(1, 0, 0, 0);
        let p: Vec<f64> = (0..20_000).map(|_| pareto_radius(&mut rng, 1.0)).collect();
        let h = hill_alpha(&p, 2000).unwrap();
        assert!((h.alpha - 1.0).abs() < 3.0 * h.se, "{h:?}");
        let f: Vec<f64> = (0..200_000).map(|_| (-(rng.random::<f64>()).ln()).powf(-0.5)).collect();
        let h = hill_alpha(&f, 1000).unwrap();
        assert!((h.alpha - 2.0).abs() < 3.0 * h.se, "{h:?}");
        assert!(hill_alpha(&p[..100], 60).is_err());
        assert!(hill_alpha(&p, 5).is_err());
    }

    #[test]
    fn spectral_tail_from_moving_maxima_paths() {
        let mm = SpectralModel::moving_maxima(&[1.0, 1.0], 1.0).unwrap();
        let ens = ensemble(&mm, 20_000, 4, 3);
        let u = quantile_threshold(&ens, 0.99).unwrap();
        let law = empirical_spectral_tail(&ens, u, 2, 100).unwrap();
        assert!(law.norms_at(0).unwrap().iter().all(|&x| x == 1.0));
        let ones = law.norms_at(1).unwrap().iter().filter(|&&x| (x - 1.0).abs() < 0.05).count();
        let share = ones as f64 / law.count() as f64;
        assert!((share - 0.5).abs() < 0.05, "{share}");
        // exceedances arrive in pairs, so the runs estimate of θ is near 1/2
        let runs = law.effective_sample_size() as f64 / law.count() as f64;
        assert!((runs - 0.5).abs() < 0.05, "{runs}");
        let mut buf = Vec::new();
        law.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 5 * law.count());
        assert!(matches!(empirical_spectral_tail(&ens, u * 1e6, 2, 500), Err(Error::InsufficientExceedances { .. })));
    }

    #[test]
    fn tail_radius_is_pareto() {
        let iid = SpectralModel::iid(1.0).unwrap();
        let ens = ensemble(&iid, 50_000, 4, 5);
        let u = quantile_threshold(&ens, 0.99).unwrap();
        let law = empirical_tail_process(&ens, u, 1, 500).unwrap();
        let ks = ks_one_sample(law.radii(), |x| 1.0 - 1.0 / x, 0.01).unwrap();
        assert!(!ks.rejected, "{ks:?}");
        assert!(law.effective_sample_size() as f64 > 0.95 * law.count() as f64);
        let lag1 = law.norms_at(1).unwrap();
        assert!(lag1.iter().sum::<f64>() / (lag1.len() as f64) < 0.1);
    }

    #[test]
    fn law_distance_discriminates() {
        let iid = SpectralModel::iid(1.0).unwrap();
        let armax = SpectralModel::armax(0.5, 1.0).unwrap();
        let ens = ensemble(&iid, 50_000, 4, 7);
        let u = quantile_threshold(&ens, 0.99).unwrap();
        let law = empirical_spectral_tail(&ens, u, 1, 500).unwrap();
        let spec = LawDistanceSpec::default();
        let bad = law_distance(&law, &armax, &[1], &spec).unwrap();
        assert!(bad.rows[0].p_value < 0.01, "{bad:?}");
        assert!(law_distance(&law, &iid, &[3], &spec).is_err());
        let null = EmpiricalTailLaw::from_model(&armax, TailKind::Spectral, 2000, 10, 1).unwrap();
        let lags: Vec<i64> = (-10..=10).collect();
        let d = law_distance(&null, &armax, &lags, &spec).unwrap();
        assert!(d.share_not_rejected(0.01) >= 0.95, "{d:?}");
        let empty = EmpiricalTailLaw::from_model(&armax, TailKind::Spectral, 0, 1, 1).unwrap();
        assert!(law_distance(&empty, &armax, &[0], &spec).is_err());
    }

    #[test]
    fn radius_and_angle_look_independent() {
        let mm = SpectralModel::moving_maxima(&[1.0, 1.0], 1.0).unwrap();
        let ens = ensemble(&mm, 50_000, 4, 11);
        let u = quantile_threshold(&ens, 0.995).unwrap();
        let law = empirical_spectral_tail(&ens, u, 1, 500).unwrap();
        let dep = radius_angle_dependence(&law, 1, 500, 99, 0.01, 1).unwrap();
        assert!(dep.dcor <= dep.null_quantile, "{dep:?}");
    }
}
