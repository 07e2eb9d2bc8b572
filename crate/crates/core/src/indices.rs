//! Maximal and extremal indices: analytic forms, Monte Carlo over the
//! representations, and empirical estimates from simulated paths.

use std::collections::{BTreeMap, VecDeque};
use std::ops::AddAssign;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cone::{ConeSpace, SeqWindow, TauFunctional};
use crate::error::{Error, Result};
use crate::mc;
use crate::particles::PathEnsemble;
use crate::rng::{stream, tag};
use crate::spectral::{check_budget, SpectralModel, DEFAULT_Z, VERDICT_FLOOR};
use crate::stats::{Moments, PairMoments};
use crate::tail_measure::{
    alpha_mass, dissipativity_check, make_q_conditioned, normalize_tilde, DissipativityVerdict, RepKind, RepSampler,
    DEFAULT_MAX_REJECTS,
};

const DISSIPATIVITY_DRAWS: usize = 20_000;
const BOOTSTRAP_RESAMPLES: usize = 400;
/// Conditioning events required by the anti-clustering diagnostic.
pub const MIN_CONDITIONING_EVENTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexMethod {
    #[serde(rename = "def-limit")]
    DefLimit,
    #[serde(rename = "dissipative-tildeZ")]
    DissipativeTildeZ,
    #[serde(rename = "spectral-ratio")]
    SpectralRatio,
    #[serde(rename = "infargmax-Q")]
    InfargmaxQ,
    #[serde(rename = "candidate")]
    Candidate,
    #[serde(rename = "blocks-empirical")]
    BlocksEmpirical,
    #[serde(rename = "m-dep-ratio")]
    MDepRatio,
}

impl IndexMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            IndexMethod::DefLimit => "def-limit",
            IndexMethod::DissipativeTildeZ => "dissipative-tildeZ",
            IndexMethod::SpectralRatio => "spectral-ratio",
            IndexMethod::InfargmaxQ => "infargmax-Q",
            IndexMethod::Candidate => "candidate",
            IndexMethod::BlocksEmpirical => "blocks-empirical",
            IndexMethod::MDepRatio => "m-dep-ratio",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEstimate {
    pub value: f64,
    pub se: f64,
    pub n: u64,
    pub method: IndexMethod,
    pub params: BTreeMap<String, f64>,
}

impl IndexEstimate {
    /// Values outside `[0, 1]` by more than the noise allowance are refused, never clamped.
    pub fn new(method: IndexMethod, value: f64, se: f64, n: u64, params: BTreeMap<String, f64>) -> Result<Self> {
        let slack = DEFAULT_Z * se + VERDICT_FLOOR;
        if !value.is_finite() || value < -slack || value > 1.0 + slack {
            return Err(Error::Degenerate(format!("{} estimate {value} outside [0, 1]", method.as_str())));
        }
        Ok(IndexEstimate { value, se, n, method, params })
    }

    /// `|value - target| <= z se + floor`.
    pub fn agrees_with(&self, target: f64, z: f64) -> bool {
        (self.value - target).abs() <= z * self.se + VERDICT_FLOOR
    }

    pub fn record(&self, model: &str, functional: &str, seed: u64) -> IndexRecord {
        IndexRecord {
            method: self.method,
            model: model.to_string(),
            tau: functional.to_string(),
            value: self.value,
            se: self.se,
            n: self.n,
            params: self.params.clone(),
            seed,
        }
    }
}

/// One line of `indices.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub method: IndexMethod,
    pub model: String,
    pub tau: String,
    pub value: f64,
    pub se: f64,
    pub n: u64,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

fn params<const K: usize>(kv: [(&str, f64); K]) -> BTreeMap<String, f64> {
    kv.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// `τ / scale` with `ν(τ / scale > 1) = 1`.
#[derive(Debug, Clone)]
pub struct NormalizedTau {
    pub tau: TauFunctional,
    pub alpha: f64,
    pub scale: f64,
    pub scale_se: f64,
    pub n: u64,
    inv_scale_alpha: f64,
}

impl NormalizedTau {
    /// Estimate the scale from `E[Σ_t τ^α(B^t Z̃)] = ν(τ > 1)`.
    pub fn new(model: &SpectralModel, tau: TauFunctional, n: usize, seed: u64) -> Result<Self> {
        let a = model.alpha();
        if let TauFunctional::NormAtZero = tau {
            return Ok(Self::norm_at_zero(a));
        }
        check_budget(n)?;
        let m = mc::run(n, seed, tag::NORMALIZE, 0, Moments::new, |rng, m| {
            let mut w = model.sample_theta(rng);
            normalize_tilde(&mut w, a);
            let (lo, hi) = tau.active_shifts(&w);
            m.push((lo..=hi).map(|k| tau.eval_shifted(&w, k).powf(a)).sum());
            Ok(())
        })?;
        if !(m.mean > 0.0) {
            return Err(Error::Degenerate(format!("ν({} > 1) = 0", tau.name())));
        }
        let scale = m.mean.powf(1.0 / a);
        // delta method on x^{1/α}
        let scale_se = scale * m.se() / (a * m.mean);
        Ok(NormalizedTau { tau, alpha: a, scale, scale_se, n: m.n, inv_scale_alpha: 1.0 / m.mean })
    }

    /// `τ(x) = ‖x_0‖` already has `ν(τ > 1) = 1`.
    pub fn norm_at_zero(alpha: f64) -> Self {
        NormalizedTau { tau: TauFunctional::NormAtZero, alpha, scale: 1.0, scale_se: 0.0, n: 0, inv_scale_alpha: 1.0 }
    }

    pub fn name(&self) -> String {
        self.tau.name()
    }

    fn check_alpha(&self, alpha: f64) -> Result<()> {
        if self.alpha != alpha {
            return Err(Error::precondition(format!("τ normalized at α = {}, model has α = {alpha}", self.alpha)));
        }
        Ok(())
    }

    /// `sup_k τ^α(B^k w)` of the normalized functional.
    pub fn sup_alpha(&self, w: &SeqWindow) -> f64 {
        let a = self.alpha;
        let s = match &self.tau {
            TauFunctional::NormAtZero => w.max_norm(),
            // sup_k sup_h q_h ‖w_{h-k}‖ = max q · max ‖w‖
            TauFunctional::SupWeighted(q) => q.weights().iter().copied().fold(0.0, f64::max) * w.max_norm(),
            TauFunctional::Custom(_) => {
                let (lo, hi) = self.tau.active_shifts(w);
                (lo..=hi).map(|k| self.tau.eval_shifted(w, k)).fold(0.0, f64::max)
            }
        };
        s.powf(a) * self.inv_scale_alpha
    }

    /// `τ^α(B^m w)` over the active shifts `m`, in order.
    pub fn profile_into(&self, w: &SeqWindow, out: &mut Vec<f64>) {
        let a = self.alpha;
        out.clear();
        let (lo, hi) = self.tau.active_shifts(w);
        out.extend((lo..=hi).map(|k| self.tau.eval_shifted(w, k).powf(a) * self.inv_scale_alpha));
    }
}

fn require_dissipative(model: &SpectralModel, seed: u64) -> Result<()> {
    if model.finite_support() {
        return Ok(());
    }
    let report = dissipativity_check(model, DISSIPATIVITY_DRAWS, seed)?;
    match report.verdict {
        DissipativityVerdict::DissipativeAtWindow => Ok(()),
        DissipativityVerdict::Inconclusive => Err(Error::precondition(format!(
            "{} is not certified dissipative at half-width {} (edge mass {:.2e})",
            model.name(),
            report.half_width,
            report.edge_mass
        ))),
    }
}

/// `Σ_h max_{0<=k<n} u_{h+k}` over all `h`, with `u` zero outside the slice.
pub fn block_max_sum<T>(u: &[T], n: usize) -> T
where
    T: Copy + PartialOrd + Default + AddAssign,
{
    let mut total = T::default();
    if n == 0 || u.is_empty() {
        return total;
    }
    let pad = n - 1;
    let len = u.len() + 2 * pad;
    let at = |p: usize| if p >= pad && p - pad < u.len() { u[p - pad] } else { T::default() };
    let mut dq: VecDeque<usize> = VecDeque::with_capacity(n.min(len));
    for p in 0..len {
        let v = at(p);
        while dq.back().is_some_and(|&b| at(b) <= v) {
            dq.pop_back();
        }
        dq.push_back(p);
        if p >= pad {
            while dq.front().is_some_and(|&f| f + n <= p) {
                dq.pop_front();
            }
            total += at(*dq.front().expect("window is nonempty"));
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub n: usize,
    /// `u_n / n`
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub tau: String,
    pub samples: u64,
    pub rows: Vec<LimitRow>,
    /// `u_n / n` never increases along the requested `n` beyond noise.
    pub non_increasing: bool,
    /// Pairs `(m, n)` with `m + n` requested and `u_{m+n} > u_m + u_n`.
    pub subadditivity_violations: usize,
    /// `min_n u_n / n`: the Fekete bound from above on the limit.
    pub fekete_bound: f64,
}

/// `u_n / n` with `u_n = Σ_h E[max_{0<=k<n} τ^α(B^{h+k} Z̃)]`.
pub fn maximal_index_limit(
    model: &SpectralModel,
    tau: &NormalizedTau,
    n_values: &[usize],
    samples: usize,
    seed: u64,
) -> Result<LimitReport> {
    check_budget(samples)?;
    tau.check_alpha(model.alpha())?;
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(Error::invalid("block lengths must be positive"));
    }
    require_dissipative(model, seed)?;
    let a = model.alpha();
    let acc = mc::run(samples, seed, tag::INDEX, 5, || vec![Moments::new(); n_values.len()], |rng, m| {
        let mut w = model.sample_theta(rng);
        normalize_tilde(&mut w, a);
        let mut t = Vec::new();
        tau.profile_into(&w, &mut t);
        for (slot, &n) in m.iter_mut().zip(n_values) {
            slot.push(block_max_sum(&t, n));
        }
        Ok(())
    })?;
    let u: Vec<f64> = acc.iter().map(|m| m.mean).collect();
    let rows: Vec<LimitRow> = n_values
        .iter()
        .zip(&acc)
        .map(|(&n, m)| LimitRow { n, value: m.mean / n as f64, se: m.se() / n as f64 })
        .collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| rows[i].n);
    let non_increasing = order.windows(2).all(|p| {
        let (x, y) = (&rows[p[0]], &rows[p[1]]);
        y.value <= x.value + DEFAULT_Z * (x.se + y.se) + VERDICT_FLOOR
    });
    let mut violations = 0;
    for (i, &m) in n_values.iter().enumerate() {
        for (j, &n) in n_values.iter().enumerate() {
            if let Some(k) = n_values.iter().position(|&x| x == m + n) {
                // per-sample subadditivity makes this hold up to rounding
                if u[k] > u[i] + u[j] + 1e-9 * (1.0 + u[k]) {
                    violations += 1;
                }
            }
        }
    }
    Ok(LimitReport {
        tau: tau.name(),
        samples: samples as u64,
        fekete_bound: rows.iter().map(|r| r.value).fold(f64::INFINITY, f64::min),
        rows,
        non_increasing,
        subadditivity_violations: violations,
    })
}

/// `θ_τ = E[sup_h τ^α(B^h Z̃)]`.
pub fn maximal_index_dissipative(tz: &RepSampler, tau: &NormalizedTau, samples: usize, seed: u64) -> Result<IndexEstimate> {
    if tz.kind() != RepKind::TildeZ {
        return Err(Error::precondition("the moving-shift formula needs a moving-shift sampler"));
    }
    check_budget(samples)?;
    tau.check_alpha(tz.alpha())?;
    let m = mc::run(samples, seed, tag::INDEX, 1, Moments::new, |rng, m| {
        m.push(tau.sup_alpha(&tz.sample(rng)?));
        Ok(())
    })?;
    IndexEstimate::new(IndexMethod::DissipativeTildeZ, m.mean, m.se(), m.n, params([("tau_scale", tau.scale)]))
}

/// `θ_τ = E[sup_h τ^α(B^h Θ) / Σ_h ‖Θ_h‖^α]`.
pub fn maximal_index_spectral(model: &SpectralModel, tau: &NormalizedTau, samples: usize, seed: u64) -> Result<IndexEstimate> {
    check_budget(samples)?;
    tau.check_alpha(model.alpha())?;
    require_dissipative(model, seed)?;
    let a = model.alpha();
    let m = mc::run(samples, seed, tag::INDEX, 2, Moments::new, |rng, m| {
        let w = model.sample_theta(rng);
        m.push(tau.sup_alpha(&w) / alpha_mass(&w, a));
        Ok(())
    })?;
    IndexEstimate::new(IndexMethod::SpectralRatio, m.mean, m.se(), m.n, params([("tau_scale", tau.scale)]))
}

/// `θ_τ = P(I(Θ) = 0) E[sup_h τ^α(B^h Q)]`, as a ratio over rejection attempts.
pub fn maximal_index_infargmax(model: &SpectralModel, tau: &NormalizedTau, samples: usize, seed: u64) -> Result<IndexEstimate> {
    check_budget(samples)?;
    tau.check_alpha(model.alpha())?;
    let q = make_q_conditioned(model, DEFAULT_MAX_REJECTS)?;
    // Each accepted Q contributes (sup value, attempts); the estimate is Σ sup / Σ attempts.
    let pm = mc::run(samples, seed, tag::INDEX, 3, PairMoments::default, |rng, pm| {
        let (w, attempts) = q.sample_counted(rng)?;
        pm.push(tau.sup_alpha(&w), attempts as f64);
        Ok(())
    })?;
    let (value, se) = pm.ratio();
    IndexEstimate::new(
        IndexMethod::InfargmaxQ,
        value,
        se,
        pm.n,
        params([("p_infargmax_zero", 1.0 / pm.mean_y), ("tau_scale", tau.scale)]),
    )
}

/// `Σ_{i > L} E‖Θ_i‖^α` from the model's decay, infinite when unknown.
pub fn forward_residual_bound(model: &SpectralModel) -> f64 {
    let l = model.half_width();
    match (model.moment_exact(l + 1), model.forward_decay_rate()) {
        (Some(m), Some(r)) if r < 1.0 => m / (1.0 - r),
        _ => f64::INFINITY,
    }
}

/// `P(sup_{1<=i<=L} R ‖Θ_i‖ <= 1) = E[1 - min(1, M^α)]` with `M = max_{1<=i<=L} ‖Θ_i‖`.
pub fn candidate_extremal_index(model: &SpectralModel, samples: usize, seed: u64) -> Result<IndexEstimate> {
    check_budget(samples)?;
    let a = model.alpha();
    let l = model.half_width();
    let m = mc::run(samples, seed, tag::INDEX, 4, Moments::new, |rng, m| {
        let w = model.sample_theta(rng);
        let mx = (1..=l).map(|i| w.norm_at(i)).fold(0.0, f64::max);
        m.push(1.0 - mx.powf(a).min(1.0));
        Ok(())
    })?;
    IndexEstimate::new(
        IndexMethod::Candidate,
        m.mean,
        m.se(),
        m.n,
        params([("forward_lags", l as f64), ("residual_bound", forward_residual_bound(model))]),
    )
}

/// Values admissible in [`smith_weissman_check`].
pub trait SwValue: Copy + PartialOrd + Default + AddAssign + Serialize {
    fn to_f64(self) -> f64;
    fn admissible(self) -> bool;
}

impl SwValue for u64 {
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn admissible(self) -> bool {
        true
    }
}

impl SwValue for f64 {
    fn to_f64(self) -> f64 {
        self
    }
    fn admissible(self) -> bool {
        self.is_finite() && self >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwRow<T> {
    pub n: usize,
    /// `Σ_h max_{0<=k<n} u_{h+k}`, exact in `T`.
    pub block_sum: T,
    pub value: f64,
    pub sup: T,
    pub gap: f64,
    /// `(support width) · sup / n`
    pub gap_bound: f64,
    pub within_bound: bool,
}

/// `(1/n) Σ_h max_{0<=k<n} u_{h+k}` against `sup_h u_h`.
pub fn smith_weissman_check<T: SwValue>(u: &[T], n_values: &[usize]) -> Result<Vec<SwRow<T>>> {
    if let Some(bad) = u.iter().find(|x| !x.admissible()) {
        return Err(Error::Unbounded(format!("sequence entry {} is not a finite nonnegative number", bad.to_f64())));
    }
    if n_values.contains(&0) {
        return Err(Error::invalid("block lengths must be positive"));
    }
    let zero = T::default();
    let first = u.iter().position(|x| *x > zero);
    let last = u.iter().rposition(|x| *x > zero);
    let width = match (first, last) {
        (Some(a), Some(b)) => (b - a + 1) as f64,
        _ => 0.0,
    };
    let sup = u.iter().copied().fold(zero, |m, x| if x > m { x } else { m });
    Ok(n_values
        .iter()
        .map(|&n| {
            let s = block_max_sum(u, n);
            let value = s.to_f64() / n as f64;
            let gap = value - sup.to_f64();
            let gap_bound = width * sup.to_f64() / n as f64;
            SwRow { n, block_sum: s, value, sup, gap, gap_bound, within_bound: gap >= 0.0 && gap <= gap_bound }
        })
        .collect())
}

/// A 1-homogeneous map `H: E -> [0, ∞)` applied to path values.
#[derive(Clone)]
pub enum HMap {
    Norm,
    /// `max(x_i, 0)`
    Coordinate(usize),
    Custom { name: String, f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> },
}

impl std::fmt::Debug for HMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl HMap {
    pub fn name(&self) -> String {
        match self {
            HMap::Norm => "norm".into(),
            HMap::Coordinate(i) => format!("coordinate_{i}"),
            HMap::Custom { name, .. } => name.clone(),
        }
    }

    #[inline]
    pub fn apply(&self, space: &ConeSpace, x: &[f64]) -> f64 {
        match self {
            HMap::Norm => space.norm_of(x),
            HMap::Coordinate(i) => x[*i].max(0.0),
            HMap::Custom { f, .. } => f(x),
        }
    }

    fn check(&self, space: &ConeSpace) -> Result<()> {
        match self {
            HMap::Coordinate(i) if *i >= space.dim() => {
                Err(Error::DimensionMismatch { expected: space.dim(), found: i + 1 })
            }
            _ => Ok(()),
        }
    }
}

/// `E[max_{|h|<=m} H^α(Z̃_h)] / E[Σ_{|h|<=m} H^α(Z̃_h)]`.
pub fn m_dep_ratio_index(tz: &RepSampler, h_map: &HMap, m: i64, samples: usize, seed: u64) -> Result<IndexEstimate> {
    if tz.kind() != RepKind::TildeZ {
        return Err(Error::precondition("the ratio formula needs a moving-shift sampler"));
    }
    if m < 0 {
        return Err(Error::invalid("m must be nonnegative"));
    }
    check_budget(samples)?;
    let space = tz.model().space();
    h_map.check(&space)?;
    let a = tz.alpha();
    let reach = m.min(tz.model().half_width());
    let pm = mc::run(samples, seed, tag::INDEX, 6, PairMoments::default, |rng, pm| {
        let w = tz.sample(rng)?;
        let (mut mx, mut sum) = (0.0f64, 0.0);
        for h in -reach..=reach {
            let v = w.at(h).map_or(0.0, |x| h_map.apply(&space, x)).powf(a);
            mx = mx.max(v);
            sum += v;
        }
        pm.push(mx, sum);
        Ok(())
    })?;
    if !(pm.mean_y > 0.0) {
        return Err(Error::Degenerate(format!("{} vanishes on every moving-shift sample", h_map.name())));
    }
    let (value, se) = pm.ratio();
    IndexEstimate::new(IndexMethod::MDepRatio, value, se, pm.n, params([("m", m as f64)]))
}

#[derive(Debug, Clone, Copy, Default)]
struct BlockCounts {
    below: u64,
    obs: u64,
    blocks_below: u64,
    blocks: u64,
}

impl AddAssign for BlockCounts {
    fn add_assign(&mut self, o: Self) {
        self.below += o.below;
        self.obs += o.obs;
        self.blocks_below += o.blocks_below;
        self.blocks += o.blocks;
    }
}

fn blocks_theta(c: &BlockCounts, r: usize) -> Option<f64> {
    let p0 = c.below as f64 / c.obs as f64;
    let pm = c.blocks_below as f64 / c.blocks as f64;
    if c.obs == 0 || c.blocks == 0 || p0 >= 1.0 || pm <= 0.0 || pm >= 1.0 {
        return None;
    }
    Some(pm.ln() / (r as f64 * p0.ln()))
}

/// `ln P̂(max of a block <= a_r) / (r ln P̂(H(X_0) <= a_r))` with `a_r = r^{1/α}`,
/// over disjoint blocks of every replicate. The standard error comes from a
/// bootstrap over replicates.
pub fn blocks_extremal_index(ens: &PathEnsemble, alpha: f64, h_map: &HMap, r: usize, seed: u64) -> Result<IndexEstimate> {
    if r == 0 || r > ens.horizon {
        return Err(Error::invalid(format!("block length {r} must lie in [1, {}]", ens.horizon)));
    }
    if ens.replicates < 2 {
        return Err(Error::TooFewSamples { found: ens.replicates, required: 2 });
    }
    h_map.check(&ens.space)?;
    let level = (r as f64).powf(1.0 / alpha);
    let d = ens.space.dim();
    let per: Vec<BlockCounts> = (0..ens.replicates)
        .map(|rep| {
            let p = ens.path(rep);
            let mut c = BlockCounts::default();
            for block in p.chunks_exact(r * d) {
                let mut all_below = true;
                for x in block.chunks_exact(d) {
                    let below = h_map.apply(&ens.space, x) <= level;
                    c.below += below as u64;
                    all_below &= below;
                }
                c.obs += r as u64;
                c.blocks += 1;
                c.blocks_below += all_below as u64;
            }
            c
        })
        .collect();
    let mut total = BlockCounts::default();
    per.iter().for_each(|c| total += *c);
    let value = blocks_theta(&total, r).ok_or_else(|| {
        Error::Degenerate(format!(
            "blocks at level {level}: {} of {} observations and {} of {} blocks below",
            total.below, total.obs, total.blocks_below, total.blocks
        ))
    })?;
    let mut rng = stream(seed, tag::BOOTSTRAP, r as u64, 0);
    let mut boot = Moments::new();
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut c = BlockCounts::default();
        for _ in 0..per.len() {
            c += per[rng.random_range(0..per.len())];
        }
        if let Some(t) = blocks_theta(&c, r) {
            boot.push(t);
        }
    }
    let se = boot.variance().sqrt();
    IndexEstimate::new(
        IndexMethod::BlocksEmpirical,
        value,
        se,
        total.obs,
        params([("block_length", r as f64), ("threshold", level), ("blocks", total.blocks as f64)]),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntiClusteringRow {
    pub m: usize,
    /// `P̂(max_{m<=|h|<=r_n} ‖X_h‖ > u a_n | ‖X_0‖ > u a_n)`
    pub value: f64,
    pub se: f64,
    pub events: u64,
}

/// Anti-clustering curve in `m`, with `a_n = n^{1/α}` and `n` the horizon.
pub fn anti_clustering_diagnostic(ens: &PathEnsemble, alpha: f64, u: f64, m_values: &[usize], r_n: usize) -> Result<Vec<AntiClusteringRow>> {
    if !(u > 0.0) {
        return Err(Error::invalid("u must be positive"));
    }
    if 2 * r_n >= ens.horizon {
        return Err(Error::invalid(format!("r_n = {r_n} needs a horizon above {}", 2 * r_n)));
    }
    if let Some(m) = m_values.iter().find(|&&m| m > r_n) {
        return Err(Error::invalid(format!("m = {m} exceeds r_n = {r_n}: empty lag range")));
    }
    let level = u * (ens.horizon as f64).powf(1.0 / alpha);
    let mut rows: Vec<(u64, u64)> = vec![(0, 0); m_values.len()];
    for rep in 0..ens.replicates {
        let x = ens.norms(rep);
        for t in r_n..ens.horizon - r_n {
            if x[t] <= level {
                continue;
            }
            for (slot, &m) in rows.iter_mut().zip(m_values) {
                let lo = m.max(1);
                let hit = (lo..=r_n).any(|h| x[t - h] > level || x[t + h] > level) || m == 0;
                slot.0 += hit as u64;
                slot.1 += 1;
            }
        }
    }
    let events = rows.first().map_or(0, |r| r.1);
    if (events as usize) < MIN_CONDITIONING_EVENTS {
        return Err(Error::InsufficientExceedances { found: events as usize, required: MIN_CONDITIONING_EVENTS });
    }
    Ok(rows
        .into_iter()
        .zip(m_values)
        .map(|((hit, n), &m)| {
            let p = hit as f64 / n as f64;
            AntiClusteringRow { m, value: p, se: (p * (1.0 - p) / n as f64).sqrt(), events: n }
        })
        .collect())
}
