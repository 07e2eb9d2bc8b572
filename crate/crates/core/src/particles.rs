//! Truncated Poisson particle systems and the stationary series extracted
//! from them by the argmax construction.
//!
//! A moving-shift pool attaches to every integer shift `t` an independent
//! stack of `N` particles `(Γ_{t,i}^{-1/α}, Z̃^{(t,i)})`. Stacks are generated
//! lazily from their own keyed stream, so the first `k` particles of a stack
//! are the same whatever `N` is, and particles that provably cannot win at
//! any lag are never drawn. Both properties keep the argmax path an exact
//! function of the truncated pool.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{ConeElement, ConeSpace, SeqWindow};
use crate::error::{Error, Result};
use crate::rng::{stream, tag, SimRng};
use crate::stats::ks_two_sample;
use crate::tail_measure::{normalize_tilde, RepKind, RepSampler};

/// Default bound on the truncation certificate.
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-4;
const SHIFT_OFFSET: i64 = 1 << 40;

#[inline]
fn unit_exponential(rng: &mut SimRng) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

/// `E[(P - N)^+]` for `P ~ Poisson(s)`.
pub fn poisson_excess_mean(s: f64, n: u64) -> f64 {
    if !(s > 0.0) {
        return 0.0;
    }
    let k0 = n + 1;
    // log p_{k0} = k0 ln s - s - ln k0!
    let log_fact: f64 = (1..=k0).map(|j| (j as f64).ln()).sum();
    let mut p = (k0 as f64 * s.ln() - s - log_fact).exp();
    let mut total = 0.0;
    let mut k = k0;
    loop {
        let term = (k - n) as f64 * p;
        total += term;
        k += 1;
        p *= s / k as f64;
        if (k as f64) > s && (term < 1e-300 || term < total * 1e-17) {
            break;
        }
        if k > n + 10_000_000 {
            break;
        }
    }
    total
}

/// Conservative bound on the chance that a discarded particle exceeds
/// `u_min` somewhere, for `n_stacks` stacks of `n` particles whose
/// `sup_h ‖·‖^α` is at most `cap`.
pub fn truncation_series(n_stacks: u64, n: u64, cap: f64, u_min: f64, alpha: f64) -> f64 {
    let s = cap * u_min.powf(-alpha);
    (n_stacks as f64 * poisson_excess_mean(s, n)).min(1.0)
}

/// Smallest stack size whose certificate is at most `tol`.
pub fn particles_for_certificate(n_stacks: u64, cap: f64, u_min: f64, alpha: f64, tol: f64) -> u64 {
    let mut n = 1;
    while truncation_series(n_stacks, n, cap, u_min, alpha) > tol {
        n += if n < 64 { 1 } else { n / 8 };
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationCertificate {
    pub u_min: f64,
    pub bound: f64,
    pub n_stacks: u64,
    /// Expected number of points per stack above the level, `cap · u_min^{-α}`.
    pub expected_points: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Spectral,
    MovingShift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub gamma: f64,
    pub shift: i64,
    pub z: SeqWindow,
}

/// A truncated particle system `Π`.
#[derive(Debug, Clone)]
pub struct ParticlePool {
    kind: PoolKind,
    rep: RepSampler,
    n: usize,
    horizon: usize,
    seed: u64,
    replicate: u64,
    particles: Vec<Particle>,
    certificate: Option<TruncationCertificate>,
}

/// `Γ_i = E_1 + ... + E_i`, `Z^{(i)}` i.i.d. from a `Z` representation.
pub fn build_pool(rep: &RepSampler, n: usize, u_min: f64, seed: u64, replicate: u64) -> Result<ParticlePool> {
    if n == 0 {
        return Err(Error::invalid("a pool needs at least one particle"));
    }
    if !(rep.kind().is_z() || rep.kind() == RepKind::TildeZ) {
        return Err(Error::precondition("spectral pools take Z or moving-shift samples"));
    }
    let mut rng = stream(seed, tag::POOL, replicate, 0);
    let mut gamma = 0.0;
    let mut particles = Vec::with_capacity(n);
    for _ in 0..n {
        gamma += unit_exponential(&mut rng);
        let z = rep.sample(&mut rng)?;
        particles.push(Particle { gamma: gamma.powf(-1.0 / rep.alpha()), shift: 0, z });
    }
    let mut pool = ParticlePool {
        kind: PoolKind::Spectral,
        rep: rep.clone(),
        n,
        horizon: 0,
        seed,
        replicate,
        particles,
        certificate: None,
    };
    pool.certificate = pool.certify(u_min).ok();
    Ok(pool)
}

/// Independent stacks of `n_per_shift` particles at every shift whose window meets `[0, horizon)`.
pub fn build_pool_moving_shift(
    tz: &RepSampler,
    horizon: usize,
    n_per_shift: usize,
    u_min: f64,
    seed: u64,
    replicate: u64,
) -> Result<ParticlePool> {
    if tz.kind() != RepKind::TildeZ {
        return Err(Error::precondition("moving-shift pools need a moving-shift sampler"));
    }
    if n_per_shift == 0 || horizon == 0 {
        return Err(Error::invalid("pool size and horizon must be positive"));
    }
    let mut pool = ParticlePool {
        kind: PoolKind::MovingShift,
        rep: tz.clone(),
        n: n_per_shift,
        horizon,
        seed,
        replicate,
        particles: Vec::new(),
        certificate: None,
    };
    pool.certificate = pool.certify(u_min).ok();
    Ok(pool)
}

impl ParticlePool {
    pub fn kind(&self) -> PoolKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.rep.alpha()
    }

    /// Particles per pool (spectral) or per shift (moving shift).
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn certificate(&self) -> Option<&TruncationCertificate> {
        self.certificate.as_ref()
    }

    pub fn space(&self) -> ConeSpace {
        self.rep.model().space()
    }

    /// Shifts carrying a stack, `[-L, horizon - 1 + L]`.
    pub fn shift_range(&self) -> (i64, i64) {
        let l = self.rep.model().half_width();
        (-l, self.horizon as i64 - 1 + l)
    }

    pub fn shift_count(&self) -> usize {
        match self.kind {
            PoolKind::Spectral => 1,
            PoolKind::MovingShift => {
                let (a, b) = self.shift_range();
                (b - a + 1) as usize
            }
        }
    }

    fn certify(&self, u_min: f64) -> Result<TruncationCertificate> {
        if !(u_min > 0.0) {
            return Err(Error::invalid("u_min must be positive"));
        }
        let cap = self
            .rep
            .alpha_cap()
            .ok_or_else(|| Error::MomentsUnavailable(format!("no a.s. bound on {:?} samples", self.rep.kind())))?;
        let n_stacks = self.shift_count() as u64;
        Ok(TruncationCertificate {
            u_min,
            bound: truncation_series(n_stacks, self.n as u64, cap, u_min, self.alpha()),
            n_stacks,
            expected_points: cap * u_min.powf(-self.alpha()),
        })
    }

    fn slot_base(&self) -> SimRng {
        stream(self.seed, tag::SHIFT_SLOT, self.replicate, 0)
    }

    /// Materialize the stack at shift `t` (moving-shift pools).
    pub fn stack(&self, t: i64) -> Result<Vec<Particle>> {
        if self.kind != PoolKind::MovingShift {
            return Err(Error::precondition("stacks exist only in moving-shift pools"));
        }
        let base = self.slot_base();
        let mut rng = slot_rng(&base, t);
        let model = self.rep.model();
        let a = self.alpha();
        let mut gamma = 0.0;
        let mut out = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            gamma += unit_exponential(&mut rng);
            let mut z = model.empty_window();
            model.sample_theta_into(&mut rng, &mut z);
            normalize_tilde(&mut z, a);
            out.push(Particle { gamma: gamma.powf(-1.0 / a), shift: t, z });
        }
        Ok(out)
    }
}

fn slot_rng(base: &SimRng, t: i64) -> SimRng {
    let mut r = base.clone();
    r.set_stream((t + SHIFT_OFFSET) as u64);
    r
}

/// A path `X_0, ..., X_{n-1}` with the argmax bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub space: ConeSpace,
    /// `dim` components per lag.
    pub values: Vec<f64>,
    pub norms: Vec<f64>,
    /// Exact ties between distinct particles for the largest norm.
    pub ties: u64,
    /// Lags where no particle is nonzero.
    pub empty_lags: u64,
    /// Particles actually drawn.
    pub particles_used: u64,
}

impl Path {
    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn element(&self, h: usize) -> ConeElement {
        let d = self.space.dim();
        match self.space {
            ConeSpace::NonNeg => ConeElement::NonNeg(self.values[h]),
            ConeSpace::Real { .. } => ConeElement::Vector(self.values[h * d..(h + 1) * d].to_vec()),
        }
    }
}

fn check_certificate(pool: &ParticlePool, tolerance: f64) -> Result<()> {
    match pool.certificate() {
        Some(c) if c.bound <= tolerance => Ok(()),
        Some(c) => Err(Error::precondition(format!(
            "truncation certificate {:.3e} exceeds tolerance {tolerance:.0e} at u_min = {}",
            c.bound, c.u_min
        ))),
        None => Err(Error::precondition("pool carries no truncation certificate")),
    }
}

/// `X_h` = the particle value with the largest norm at lag `h`.
pub fn construct_x_argmax(pool: &ParticlePool, horizon: usize, tolerance: f64) -> Result<Path> {
    check_certificate(pool, tolerance)?;
    match pool.kind {
        PoolKind::Spectral => Ok(spectral_argmax(pool, horizon)),
        PoolKind::MovingShift => moving_shift_argmax(pool, horizon, None),
    }
}

/// `M_h = sup_i γ_i ‖Z^{(i)}_h‖`.
pub fn max_stable_path(pool: &ParticlePool, horizon: usize, tolerance: f64) -> Result<Vec<f64>> {
    construct_x_argmax(pool, horizon, tolerance).map(|p| p.norms)
}

/// Argmax construction restricted to particles with `|h - T_i| <= m`.
pub fn m_dependent_path(pool: &ParticlePool, m: i64, horizon: usize, tolerance: f64) -> Result<Path> {
    if m < 0 {
        return Err(Error::invalid("m must be nonnegative"));
    }
    if pool.kind != PoolKind::MovingShift {
        return Err(Error::precondition("m-dependent paths need a moving-shift pool"));
    }
    check_certificate(pool, tolerance)?;
    moving_shift_argmax(pool, horizon, Some(m))
}

fn spectral_argmax(pool: &ParticlePool, horizon: usize) -> Path {
    let space = pool.space();
    let d = space.dim();
    let cap = pool.rep.alpha_cap().map(|c| c.powf(1.0 / pool.alpha()));
    let mut values = vec![0.0; horizon * d];
    let mut norms = vec![0.0; horizon];
    let mut ties = 0;
    let mut empty = 0;
    let mut used = 0;
    for h in 0..horizon {
        let lag = h as i64;
        let mut best = 0.0;
        let mut arg = None;
        for (i, p) in pool.particles.iter().enumerate() {
            if let Some(c) = cap {
                if p.gamma * c < best {
                    break;
                }
            }
            used = used.max(i as u64 + 1);
            let v = p.gamma * p.z.norm_at(lag);
            if v > best {
                best = v;
                arg = Some(i);
            } else if v == best && v > 0.0 {
                ties += 1;
            }
        }
        match arg {
            Some(i) => {
                let p = &pool.particles[i];
                for (o, x) in values[h * d..(h + 1) * d].iter_mut().zip(p.z.at(lag).expect("nonzero lag")) {
                    *o = p.gamma * x;
                }
                norms[h] = best;
            }
            None => empty += 1,
        }
    }
    Path { space, values, norms, ties, empty_lags: empty, particles_used: used }
}

fn moving_shift_argmax(pool: &ParticlePool, horizon: usize, m: Option<i64>) -> Result<Path> {
    if horizon > pool.horizon {
        return Err(Error::HorizonMismatch(format!("pool covers {} lags, {horizon} requested", pool.horizon)));
    }
    let model = pool.rep.model();
    let space = model.space();
    let d = space.dim();
    let a = pool.alpha();
    let l = model.half_width();
    let reach = m.map_or(l, |m| m.min(l));
    let n = horizon as i64;
    let base = pool.slot_base();
    let mut values = vec![0.0; horizon * d];
    let mut norms = vec![0.0; horizon];
    let mut ties = 0;
    let mut used = 0;
    let mut z = model.empty_window();
    let inv = -1.0 / a;
    for t in -reach..=(n - 1 + reach) {
        let lo = (t - reach).max(0);
        let hi = (t + reach).min(n - 1);
        let mut rng = slot_rng(&base, t);
        let mut gamma_sum = 0.0;
        for _ in 0..pool.n {
            gamma_sum += unit_exponential(&mut rng);
            let gamma = gamma_sum.powf(inv);
            // Z̃ norms are at most 1, so this particle and all later ones lose everywhere.
            let floor = norms[lo as usize..=hi as usize].iter().copied().fold(f64::INFINITY, f64::min);
            if gamma < floor {
                break;
            }
            model.sample_theta_into(&mut rng, &mut z);
            normalize_tilde(&mut z, a);
            used += 1;
            for h in lo..=hi {
                let Some(src) = z.at(h - t) else { continue };
                let v = gamma * space.norm_of(src);
                let hu = h as usize;
                if v > norms[hu] {
                    norms[hu] = v;
                    for (o, x) in values[hu * d..(hu + 1) * d].iter_mut().zip(src) {
                        *o = gamma * x;
                    }
                } else if v == norms[hu] && v > 0.0 {
                    ties += 1;
                }
            }
        }
    }
    let empty = norms.iter().filter(|&&x| x == 0.0).count() as u64;
    Ok(Path { space, values, norms, ties, empty_lags: empty, particles_used: used })
}

/// `x ⊙ y`: the argument with the larger norm, `x` on ties.
pub fn odot(space: &ConeSpace, x: &ConeElement, y: &ConeElement) -> Result<ConeElement> {
    let nx = crate::cone::pseudonorm(space, x)?;
    let ny = crate::cone::pseudonorm(space, y)?;
    Ok(if nx >= ny { x.clone() } else { y.clone() })
}

/// `n^{-1/α} ⊙_i X^{(i)}` lag by lag, for flat paths of equal length.
pub fn odot_combine(space: &ConeSpace, paths: &[&[f64]], alpha: f64) -> Result<Vec<f64>> {
    let first = paths.first().ok_or_else(|| Error::invalid("no paths to combine"))?;
    if let Some(p) = paths.iter().find(|p| p.len() != first.len()) {
        return Err(Error::HorizonMismatch(format!("path lengths {} and {}", first.len(), p.len())));
    }
    let d = space.dim();
    let scale = (paths.len() as f64).powf(-1.0 / alpha);
    let mut out = first.to_vec();
    let mut best: Vec<f64> = out.chunks_exact(d).map(|v| space.norm_of(v)).collect();
    for p in &paths[1..] {
        for (h, v) in p.chunks_exact(d).enumerate() {
            let nv = space.norm_of(v);
            if nv > best[h] {
                best[h] = nv;
                out[h * d..(h + 1) * d].copy_from_slice(v);
            }
        }
    }
    out.iter_mut().for_each(|x| *x *= scale);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub model: String,
    pub alpha: f64,
    pub seed: u64,
    pub n_per_shift: usize,
    pub u_min: f64,
    /// Certificate per replicate.
    pub truncation_bound: f64,
    /// `Some(m)` for m-dependent approximations.
    pub m: Option<i64>,
    pub ties: u64,
    pub empty_lags: u64,
    pub particles_used: u64,
}

/// Replicated paths over a common horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub space: ConeSpace,
    pub horizon: usize,
    pub replicates: usize,
    /// Replicate-major, `dim` components per lag.
    values: Vec<f64>,
    norms: Vec<f64>,
    pub meta: EnsembleMeta,
}

impl PathEnsemble {
    pub fn from_paths(space: ConeSpace, paths: Vec<Path>, meta: EnsembleMeta) -> Result<Self> {
        let horizon = paths.first().map_or(0, |p| p.len());
        if paths.iter().any(|p| p.len() != horizon || p.space != space) {
            return Err(Error::HorizonMismatch("paths disagree in horizon or space".into()));
        }
        let replicates = paths.len();
        let mut values = Vec::with_capacity(replicates * horizon * space.dim());
        let mut norms = Vec::with_capacity(replicates * horizon);
        for p in paths {
            values.extend_from_slice(&p.values);
            norms.extend_from_slice(&p.norms);
        }
        Ok(PathEnsemble { space, horizon, replicates, values, norms, meta })
    }

    pub fn path(&self, r: usize) -> &[f64] {
        let w = self.horizon * self.space.dim();
        &self.values[r * w..(r + 1) * w]
    }

    pub fn norms(&self, r: usize) -> &[f64] {
        &self.norms[r * self.horizon..(r + 1) * self.horizon]
    }

    pub fn all_norms(&self) -> &[f64] {
        &self.norms
    }

    /// `‖X_h‖` across replicates.
    pub fn norms_at(&self, h: usize) -> Vec<f64> {
        (0..self.replicates).map(|r| self.norms[r * self.horizon + h]).collect()
    }

    /// CSV with columns `replicate, h, x0..x{d-1}, norm`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let d = self.space.dim();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["replicate".to_string(), "h".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        header.push("norm".into());
        out.write_record(&header)?;
        let mut row = Vec::with_capacity(d + 3);
        for r in 0..self.replicates {
            let p = self.path(r);
            for h in 0..self.horizon {
                row.clear();
                row.push(r.to_string());
                row.push(h.to_string());
                row.extend(p[h * d..(h + 1) * d].iter().map(|x| format!("{x:e}")));
                row.push(format!("{:e}", self.norms[r * self.horizon + h]));
                out.write_record(&row)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Settings for [`simulate_ensemble`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSpec {
    pub horizon: usize,
    pub replicates: usize,
    pub n_per_shift: usize,
    pub u_min: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Restrict to `|h - T_i| <= m`.
    pub m: Option<i64>,
    /// Stream index of the first replicate, for simulating an ensemble in batches.
    pub first_replicate: u64,
}

/// Simulate independent replicate paths from moving-shift pools.
pub fn simulate_ensemble(tz: &RepSampler, spec: &SimulationSpec) -> Result<PathEnsemble> {
    if spec.replicates == 0 {
        return Err(Error::invalid("at least one replicate is needed"));
    }
    let paths = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let rep = spec.first_replicate + r as u64;
            let pool = build_pool_moving_shift(tz, spec.horizon, spec.n_per_shift, spec.u_min, spec.seed, rep)?;
            match spec.m {
                Some(m) => m_dependent_path(&pool, m, spec.horizon, spec.tolerance),
                None => construct_x_argmax(&pool, spec.horizon, spec.tolerance),
            }
        })
        .collect::<Result<Vec<Path>>>()?;
    let cert = build_pool_moving_shift(tz, spec.horizon, spec.n_per_shift, spec.u_min, spec.seed, 0)?
        .certificate()
        .map_or(f64::NAN, |c| c.bound);
    let meta = EnsembleMeta {
        model: tz.model().name(),
        alpha: tz.alpha(),
        seed: spec.seed,
        n_per_shift: spec.n_per_shift,
        u_min: spec.u_min,
        truncation_bound: cert,
        m: spec.m,
        ties: paths.iter().map(|p| p.ties).sum(),
        empty_lags: paths.iter().map(|p| p.empty_lags).sum(),
        particles_used: paths.iter().map(|p| p.particles_used).sum(),
    };
    PathEnsemble::from_paths(tz.model().space(), paths, meta)
}

/// Bound on the chance that a particle beyond the truncation exceeds `u_min`
/// at some lag of the pool's horizon.
pub fn truncation_bound(pool: &ParticlePool, u_min: f64) -> Result<TruncationCertificate> {
    pool.certify(u_min)
}

/// Default stack size: certificate below `tol` at `u_min`.
pub fn default_n_per_shift(tz: &RepSampler, horizon: usize, u_min: f64, tol: f64) -> Result<usize> {
    let cap = tz.alpha_cap().ok_or_else(|| Error::MomentsUnavailable("sampler has no a.s. bound".into()))?;
    let n_stacks = horizon as u64 + 2 * tz.model().half_width() as u64;
    Ok(particles_for_certificate(n_stacks, cap, u_min, tz.alpha(), tol) as usize)
}

/// One per-lag two-sample KS test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagKs {
    pub h: usize,
    pub quantity: String,
    pub statistic: f64,
    pub critical: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagKsReport {
    pub check: String,
    pub level: f64,
    pub tests: Vec<LagKs>,
    pub share_not_rejected: f64,
    /// At least `required_share` of the tests are not rejected.
    pub pass: bool,
    pub required_share: f64,
}

/// Share of per-lag tests that must not reject.
pub const LAG_KS_SHARE: f64 = 0.95;

impl LagKsReport {
    fn new(check: &str, level: f64, tests: Vec<LagKs>) -> Self {
        let ok = tests.iter().filter(|t| !t.rejected).count();
        let share = if tests.is_empty() { 0.0 } else { ok as f64 / tests.len() as f64 };
        LagKsReport {
            check: check.into(),
            level,
            pass: !tests.is_empty() && share >= LAG_KS_SHARE,
            share_not_rejected: share,
            tests,
            required_share: LAG_KS_SHARE,
        }
    }
}

fn lag_ks(h: usize, quantity: &str, a: &[f64], b: &[f64], level: f64) -> Result<LagKs> {
    let ks = ks_two_sample(a, b, level)?;
    Ok(LagKs { h, quantity: quantity.into(), statistic: ks.statistic, critical: ks.critical, rejected: ks.rejected })
}

/// Up to `max_lags` lags spread evenly over `[0, last]`.
fn spread(last: usize, max_lags: usize) -> Vec<usize> {
    let k = (last + 1).min(max_lags.max(1));
    let mut v: Vec<usize> = (0..k).map(|i| if k == 1 { 0 } else { i * last / (k - 1) }).collect();
    v.dedup();
    v
}

/// `‖X_h‖` against `‖X_{h+1}‖` across replicates.
pub fn stationarity_check(ens: &PathEnsemble, max_lags: usize, level: f64) -> Result<LagKsReport> {
    if ens.horizon < 2 {
        return Err(Error::invalid("stationarity needs a horizon of at least 2"));
    }
    let tests = spread(ens.horizon - 2, max_lags)
        .into_iter()
        .map(|h| lag_ks(h, "norm", &ens.norms_at(h), &ens.norms_at(h + 1), level))
        .collect::<Result<Vec<_>>>()?;
    Ok(LagKsReport::new("stationarity", level, tests))
}

fn check_pair(singles: &PathEnsemble, pool: &PathEnsemble, group: usize) -> Result<usize> {
    if singles.horizon != pool.horizon || singles.space != pool.space {
        return Err(Error::HorizonMismatch("ensembles differ in horizon or space".into()));
    }
    if group == 0 || pool.replicates < group {
        return Err(Error::invalid(format!("need at least {group} pooled replicates")));
    }
    Ok(pool.replicates / group)
}

/// `n^{-1/α} max` of `group` norm paths against single norm paths, per lag.
pub fn max_stability_check(singles: &PathEnsemble, pool: &PathEnsemble, group: usize, alpha: f64, max_lags: usize, level: f64) -> Result<LagKsReport> {
    let groups = check_pair(singles, pool, group)?;
    let scale = (group as f64).powf(-1.0 / alpha);
    let tests = spread(pool.horizon - 1, max_lags)
        .into_iter()
        .map(|h| {
            let combined: Vec<f64> = (0..groups)
                .map(|g| (0..group).map(|i| pool.norms(g * group + i)[h]).fold(0.0, f64::max) * scale)
                .collect();
            lag_ks(h, "norm", &combined, &singles.norms_at(h), level)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LagKsReport::new("max_stability", level, tests))
}

/// [`odot_combine`] of `group` paths against single paths, per lag: norms, and
/// on vector cones the first direction coordinate of values with norm above 1.
pub fn odot_stability_check(singles: &PathEnsemble, pool: &PathEnsemble, group: usize, alpha: f64, max_lags: usize, level: f64) -> Result<LagKsReport> {
    let groups = check_pair(singles, pool, group)?;
    let space = pool.space;
    let d = space.dim();
    let combined: Vec<Vec<f64>> = (0..groups)
        .map(|g| {
            let paths: Vec<&[f64]> = (0..group).map(|i| pool.path(g * group + i)).collect();
            odot_combine(&space, &paths, alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    let single: Vec<&[f64]> = (0..singles.replicates).map(|r| singles.path(r)).collect();
    let mut tests = Vec::new();
    for h in spread(pool.horizon - 1, max_lags) {
        let at = |p: &[f64]| p[h * d..(h + 1) * d].to_vec();
        let a: Vec<Vec<f64>> = combined.iter().map(|p| at(p)).collect();
        let b: Vec<Vec<f64>> = single.iter().map(|p| at(p)).collect();
        let norms = |v: &[Vec<f64>]| v.iter().map(|x| space.norm_of(x)).collect::<Vec<_>>();
        tests.push(lag_ks(h, "norm", &norms(&a), &norms(&b), level)?);
        if d > 1 {
            let dir = |v: &[Vec<f64>]| {
                v.iter()
                    .filter_map(|x| {
                        let n = space.norm_of(x);
                        (n > 1.0).then(|| x[0] / n)
                    })
                    .collect::<Vec<_>>()
            };
            tests.push(lag_ks(h, "direction", &dir(&a), &dir(&b), level)?);
        }
    }
    Ok(LagKsReport::new("odot_stability", level, tests))
}
