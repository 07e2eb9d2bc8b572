//! Stochastic representations of a shift-invariant tail measure built from a
//! spectral model, and Monte Carlo evaluation of `ν`-integrals.
//!
//! `ν` itself is never materialized. Integrals over events of the form
//! `{F(x) > 1}` with `F` 1-homogeneous are computed as `E[F(W)^α]` for the
//! relevant representation `W`, and integrals over `{‖x_h‖ > 1}` through the
//! Pareto radius: `∫ H 1{‖x_h‖>1} dν = E[H(R B^h Θ)]`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cone::{infargmax, q_alpha_mass_shifted, shift, SeqWindow, WeightSeq, DEFAULT_GEOMETRIC_HALF_WIDTH};
use crate::error::{Error, Result};
use crate::mc;
use crate::rng::{stream, tag, SimRng};
use crate::spectral::{check_budget, check_family, SpectralModel, TcfReport, TestFunction, VERDICT_FLOOR};
use crate::stats::{ks_one_sample, KsResult, Moments, PairMoments};

/// Default cap on rejected draws per accepted `Q` sample.
pub const DEFAULT_MAX_REJECTS: usize = 10_000;
/// Tolerance on the `Z̃` mass at the window edges before a window counts as
/// decayed.
pub const EDGE_TOLERANCE: f64 = 1e-3;
const PILOT_DRAWS: usize = 20_000;
const PILOT_SEED: u64 = 0x7A11_D1A6;

/// `R = U^{-1/α}` with `U` uniform on `(0, 1]`, so `P(R > u) = u^{-α}`.
#[inline]
pub fn pareto_radius(rng: &mut SimRng, alpha: f64) -> f64 {
    let u = 1.0 - rng.random::<f64>();
    u.powf(-1.0 / alpha)
}

/// Probability law of the random shift `K` in the `Z̃ → Z` lift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftLaw {
    lo: i64,
    probs: Vec<f64>,
}

impl ShiftLaw {
    pub fn dirac() -> Self {
        ShiftLaw { lo: 0, probs: vec![1.0] }
    }

    /// Uniform on `lo..=hi`.
    pub fn uniform(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::invalid("empty shift range"));
        }
        let n = (hi - lo + 1) as usize;
        Ok(ShiftLaw { lo, probs: vec![1.0 / n as f64; n] })
    }

    /// Arbitrary probabilities on `lo, lo+1, ...`; every listed lag needs positive mass.
    pub fn new(lo: i64, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::invalid("zero-probability shift requested"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("shift probabilities sum to {total}")));
        }
        Ok(ShiftLaw { lo, probs })
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.probs.len() as i64 - 1
    }

    pub fn prob(&self, k: i64) -> f64 {
        if k < self.lo || k > self.hi() {
            0.0
        } else {
            self.probs[(k - self.lo) as usize]
        }
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn sample(&self, rng: &mut SimRng) -> i64 {
        let mut u: f64 = rng.random();
        for (i, p) in self.probs.iter().enumerate() {
            if u < *p {
                return self.lo + i as i64;
            }
            u -= p;
        }
        self.hi()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepKind {
    ZGeneral,
    ZFullySupported,
    TildeZ,
    QConditioned,
    ZFromTildeZ,
}

impl RepKind {
    /// Kinds satisfying `E‖Z_0‖^α = 1`, for which the tilt shift formula applies.
    pub fn is_z(self) -> bool {
        matches!(self, RepKind::ZGeneral | RepKind::ZFullySupported | RepKind::ZFromTildeZ)
    }
}

/// Sampler of one of the stochastic representations of `ν`.
#[derive(Clone)]
pub struct RepSampler {
    kind: RepKind,
    model: SpectralModel,
    q: Option<WeightSeq>,
    q_total: f64,
    shift: Option<ShiftLaw>,
    max_rejects: usize,
    acceptance: Option<(f64, f64)>,
}

impl fmt::Debug for RepSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RepSampler")
            .field("kind", &self.kind)
            .field("model", &self.model)
            .field("shift", &self.shift)
            .finish()
    }
}

/// `Z = (Σq)^{1/α} B^K Θ / ‖B^K Θ‖_{q,α}` with `K ~ q / Σq`.
///
/// The weights must be positive on the whole model window.
pub fn make_z_general(model: &SpectralModel, q: WeightSeq) -> Result<RepSampler> {
    let l = model.half_width();
    if q.lo() > -l || q.hi() < l || q.weights().iter().any(|w| !(*w > 0.0)) {
        return Err(Error::invalid("weights must be positive on the model window"));
    }
    let q_total = q.total();
    Ok(RepSampler {
        kind: RepKind::ZGeneral,
        model: model.clone(),
        q: Some(q),
        q_total,
        shift: None,
        max_rejects: 0,
        acceptance: None,
    })
}

/// Geometric weights wide enough to cover the model window.
pub fn default_weights(model: &SpectralModel) -> WeightSeq {
    WeightSeq::geometric(model.half_width().max(DEFAULT_GEOMETRIC_HALF_WIDTH))
}

/// `Z = Θ`, valid when `Θ` charges every lag of the window.
pub fn make_z_fully_supported(model: &SpectralModel) -> Result<RepSampler> {
    if !model.full_support() {
        return Err(Error::precondition(format!("{} is not certified fully supported", model.name())));
    }
    Ok(RepSampler {
        kind: RepKind::ZFullySupported,
        model: model.clone(),
        q: None,
        q_total: 1.0,
        shift: None,
        max_rejects: 0,
        acceptance: None,
    })
}

/// `Z̃ = Θ / ‖Θ‖_{1,α}`. Refuses windows whose `Z̃` mass has not decayed at the edges.
pub fn make_tilde_z(model: &SpectralModel) -> Result<RepSampler> {
    if !model.finite_support() {
        let edge = tilde_z_edge_mass(model, PILOT_DRAWS, PILOT_SEED)?;
        if edge.mean + 4.0 * edge.se() > EDGE_TOLERANCE {
            return Err(Error::precondition(format!(
                "moving-shift mass at the window edge is {:.3e} (> {EDGE_TOLERANCE:.0e}); widen the window",
                edge.mean
            )));
        }
    }
    Ok(RepSampler {
        kind: RepKind::TildeZ,
        model: model.clone(),
        q: None,
        q_total: 1.0,
        shift: None,
        max_rejects: 0,
        acceptance: None,
    })
}

/// `Q ~ L(Θ | I(Θ) = 0)` by rejection, with a pilot estimate of the acceptance rate.
pub fn make_q_conditioned(model: &SpectralModel, max_rejects: usize) -> Result<RepSampler> {
    if max_rejects == 0 {
        return Err(Error::invalid("max_rejects must be positive"));
    }
    let mut rng = stream(PILOT_SEED, tag::DIAGNOSTIC, 1, 0);
    let mut w = model.empty_window();
    let mut hits = Moments::new();
    for _ in 0..PILOT_DRAWS {
        model.sample_theta_into(&mut rng, &mut w);
        hits.push(if infargmax(&w) == Some(0) { 1.0 } else { 0.0 });
    }
    if hits.mean * (max_rejects as f64) < 1.0 {
        return Err(Error::RejectionExhausted {
            attempts: PILOT_DRAWS,
            rate_bound: hits.mean.max(3.0 / PILOT_DRAWS as f64),
        });
    }
    Ok(RepSampler {
        kind: RepKind::QConditioned,
        model: model.clone(),
        q: None,
        q_total: 1.0,
        shift: None,
        max_rejects,
        acceptance: Some((hits.mean, hits.se())),
    })
}

/// `Z = p_K^{-1/α} B^K Z̃` with `K ~ p` independent of `Z̃`.
pub fn make_z_from_tilde_z(tz: &RepSampler, p: ShiftLaw) -> Result<RepSampler> {
    if tz.kind != RepKind::TildeZ {
        return Err(Error::precondition("the shift lift needs a moving-shift sampler"));
    }
    if !(p.min_prob() > 0.0) {
        return Err(Error::invalid("zero-probability shift requested"));
    }
    Ok(RepSampler {
        kind: RepKind::ZFromTildeZ,
        model: tz.model.clone(),
        q: None,
        q_total: 1.0,
        shift: Some(p),
        max_rejects: 0,
        acceptance: None,
    })
}

impl RepSampler {
    pub fn kind(&self) -> RepKind {
        self.kind
    }

    pub fn model(&self) -> &SpectralModel {
        &self.model
    }

    pub fn alpha(&self) -> f64 {
        self.model.alpha()
    }

    pub fn weights(&self) -> Option<&WeightSeq> {
        self.q.as_ref()
    }

    pub fn shift_law(&self) -> Option<&ShiftLaw> {
        self.shift.as_ref()
    }

    /// Pilot estimate of `P(I(Θ) = 0)` and its standard error (`Q` kind only).
    pub fn acceptance(&self) -> Option<(f64, f64)> {
        self.acceptance
    }

    /// Almost-sure bound on `sup_h ‖W_h‖^α` for a sample `W`, when one is known.
    pub fn alpha_cap(&self) -> Option<f64> {
        match self.kind {
            RepKind::TildeZ | RepKind::QConditioned => Some(1.0),
            RepKind::ZFromTildeZ => self.shift.as_ref().map(|p| 1.0 / p.min_prob()),
            RepKind::ZGeneral => self.q.as_ref().map(|q| self.q_total / q.min_weight()),
            RepKind::ZFullySupported => None,
        }
    }

    /// Lags on which samples can be nonzero.
    pub fn span(&self) -> (i64, i64) {
        let l = self.model.half_width();
        match self.kind {
            RepKind::ZGeneral => {
                let q = self.q.as_ref().expect("weights");
                (-l + q.lo(), l + q.hi())
            }
            RepKind::ZFromTildeZ => {
                let p = self.shift.as_ref().expect("shift law");
                (-l + p.lo(), l + p.hi())
            }
            _ => (-l, l),
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> Result<SeqWindow> {
        self.sample_counted(rng).map(|(w, _)| w)
    }

    /// One draw together with the number of `Θ` draws it consumed.
    pub fn sample_counted(&self, rng: &mut SimRng) -> Result<(SeqWindow, usize)> {
        let a = self.alpha();
        match self.kind {
            RepKind::ZFullySupported => Ok((self.model.sample_theta(rng), 1)),
            RepKind::TildeZ => {
                let mut w = self.model.sample_theta(rng);
                normalize_tilde(&mut w, a);
                Ok((w, 1))
            }
            RepKind::ZGeneral => {
                let q = self.q.as_ref().expect("weights");
                let theta = self.model.sample_theta(rng);
                let mut u = rng.random::<f64>() * self.q_total;
                let mut k = q.hi();
                for (i, wk) in q.weights().iter().enumerate() {
                    if u < *wk {
                        k = q.lo() + i as i64;
                        break;
                    }
                    u -= wk;
                }
                let mass = q_alpha_mass_shifted(&theta, k, q, a);
                let mut z = shift(&theta, k);
                z.scale_in_place((self.q_total / mass).powf(1.0 / a));
                Ok((z, 1))
            }
            RepKind::QConditioned => {
                let mut w = self.model.empty_window();
                for attempt in 1..=self.max_rejects {
                    self.model.sample_theta_into(rng, &mut w);
                    if infargmax(&w) == Some(0) {
                        return Ok((w, attempt));
                    }
                }
                Err(Error::RejectionExhausted {
                    attempts: self.max_rejects,
                    rate_bound: 3.0 / self.max_rejects as f64,
                })
            }
            RepKind::ZFromTildeZ => {
                let p = self.shift.as_ref().expect("shift law");
                let mut w = self.model.sample_theta(rng);
                normalize_tilde(&mut w, a);
                let k = p.sample(rng);
                let mut z = shift(&w, k);
                z.scale_in_place(p.prob(k).powf(-1.0 / a));
                Ok((z, 1))
            }
        }
    }
}

/// `‖w‖_{1,α}^α` over the window.
#[inline]
pub(crate) fn alpha_mass(w: &SeqWindow, alpha: f64) -> f64 {
    w.norms().map(|(_, n)| if n > 0.0 { n.powf(alpha) } else { 0.0 }).sum()
}

pub(crate) fn normalize_tilde(w: &mut SeqWindow, alpha: f64) {
    let mass = alpha_mass(w, alpha);
    w.scale_in_place(mass.powf(-1.0 / alpha));
}

/// `E[‖Z̃_{-L}‖^α + ‖Z̃_L‖^α]` for `Z̃ = Θ/‖Θ‖_{1,α}`.
pub fn tilde_z_edge_mass(model: &SpectralModel, n: usize, seed: u64) -> Result<Moments> {
    let l = model.half_width();
    let a = model.alpha();
    mc::run(n, seed, tag::DIAGNOSTIC, 0, Moments::new, |rng, m| {
        let w = model.sample_theta(rng);
        let mass = alpha_mass(&w, a);
        let edge = if l == 0 { 0.0 } else { (w.norm_at(-l).powf(a) + w.norm_at(l).powf(a)) / mass };
        m.push(edge);
        Ok(())
    })
}

/// `Y^{(h)} = R B^h Θ` with `R` Pareto(α) independent of `Θ`.
pub fn sample_local_tail(model: &SpectralModel, h: i64, rng: &mut SimRng) -> Result<SeqWindow> {
    if h.abs() > model.half_width() {
        return Err(Error::invalid(format!("lag {h} outside the model window")));
    }
    let theta = model.sample_theta(rng);
    let r = pareto_radius(rng, model.alpha());
    let mut y = shift(&theta, h);
    y.scale_in_place(r);
    Ok(y)
}

/// One-sample KS test of radii against `P(R > r) = r^{-α}` on `[1, ∞)`.
pub fn pareto_ks(radii: &[f64], alpha: f64, level: f64) -> Result<KsResult> {
    ks_one_sample(radii, |r| if r <= 1.0 { 0.0 } else { 1.0 - r.powf(-alpha) }, level)
}

/// KS test of `‖Y_0‖` from [`sample_local_tail`] against the Pareto law.
pub fn local_tail_radius_check(model: &SpectralModel, n: usize, seed: u64, level: f64) -> Result<KsResult> {
    check_budget(n)?;
    let mut rng = stream(seed, tag::LOCAL_TAIL, 0, 0);
    let radii = (0..n)
        .map(|_| sample_local_tail(model, 0, &mut rng).map(|y| y.norm_at(0)))
        .collect::<Result<Vec<_>>>()?;
    pareto_ks(&radii, model.alpha(), level)
}

/// Monte Carlo value of a `ν`-integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuEstimate {
    pub value: f64,
    pub se: f64,
    pub n: u64,
    pub description: String,
}

impl NuEstimate {
    fn from_moments(m: &Moments, description: String) -> Self {
        NuEstimate { value: m.mean, se: m.se(), n: m.n, description }
    }
}

/// `∫ H(x) 1{‖x_h‖ > 1} ν(dx) = E[H(R B^h Θ)]`.
pub fn nu_integral_at(model: &SpectralModel, h: i64, f: &TestFunction, n: usize, seed: u64) -> Result<NuEstimate> {
    if !(f.bound.is_finite() && f.bound >= 0.0) {
        return Err(Error::Unbounded(f.name.clone()));
    }
    if h.abs() > model.half_width() {
        return Err(Error::invalid(format!("lag {h} outside the model window")));
    }
    let m = mc::run(n, seed, tag::NU, h as u64, Moments::new, |rng, m| {
        let y = sample_local_tail(model, h, rng)?;
        m.push(f.eval(&y));
        Ok(())
    })?;
    Ok(NuEstimate::from_moments(&m, format!("{} on {{|x_{h}| > 1}}", f.name)))
}

/// Monte Carlo check of `E[‖Z_0‖^α H_0(B^h Z)] = E[‖Z_h‖^α H_0(Z)]`.
pub fn check_tsf(
    rep: &RepSampler,
    fam: &[TestFunction],
    hs: &[i64],
    n: usize,
    seed: u64,
    z: f64,
) -> Result<TcfReport> {
    check_budget(n)?;
    check_family(fam)?;
    if !rep.kind().is_z() {
        return Err(Error::precondition("the tilt shift formula needs a Z representation"));
    }
    let a = rep.alpha();
    let cells = hs.len() * fam.len();
    let acc = mc::run(
        n,
        seed,
        tag::TSF,
        0,
        || vec![PairMoments::default(); cells],
        |rng, acc| {
            let w = rep.sample(rng)?;
            let z0 = w.norm_at(0).powf(a);
            for (hi, &h) in hs.iter().enumerate() {
                let zh = w.norm_at(h).powf(a);
                for (fi, f) in fam.iter().enumerate() {
                    let lhs = if z0 > 0.0 { z0 * f.eval_shifted(&w, h) } else { 0.0 };
                    let rhs = if zh > 0.0 { zh * f.eval(&w) } else { 0.0 };
                    acc[hi * fam.len() + fi].push(lhs, rhs);
                }
            }
            Ok(())
        },
    )?;
    Ok(TcfReport::from_pairs("tilt_shift", z, hs, fam, &acc))
}

type ProbeFn = dyn Fn(&SeqWindow, i64) -> f64 + Send + Sync;

/// Event `{F(x) > 1}` for a 1-homogeneous `F`, evaluated as `F(B^k w)`.
#[derive(Clone)]
pub struct ProbeEvent {
    pub name: String,
    /// Lags `[lo, hi]` read by `F`.
    pub reach: (i64, i64),
    f: Arc<ProbeFn>,
}

impl fmt::Debug for ProbeEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProbeEvent").field("name", &self.name).field("reach", &self.reach).finish()
    }
}

impl ProbeEvent {
    pub fn new(name: impl Into<String>, reach: (i64, i64), f: impl Fn(&SeqWindow, i64) -> f64 + Send + Sync + 'static) -> Self {
        ProbeEvent { name: name.into(), reach, f: Arc::new(f) }
    }

    #[inline]
    pub fn eval_shifted(&self, w: &SeqWindow, k: i64) -> f64 {
        (self.f)(w, k)
    }

    /// `Σ_k F(B^k w)^α` over all shifts that can be nonzero.
    pub fn shift_sum(&self, w: &SeqWindow, alpha: f64) -> f64 {
        let (a, b) = self.reach;
        let mut s = 0.0;
        for k in (a - w.hi())..=(b - w.lo()) {
            let v = self.eval_shifted(w, k);
            if v > 0.0 {
                s += v.powf(alpha);
            }
        }
        s
    }
}

/// `{‖x_0‖>1}`, `{‖x_0‖>2}`, `{‖x_0‖>1, ‖x_1‖>1}`, `{sup_{|h|<=L} ‖x_h‖ > 1}`.
pub fn default_probes(half_width: i64) -> Vec<ProbeEvent> {
    let l = half_width;
    vec![
        ProbeEvent::new("norm_x0_gt_1", (0, 0), |w, k| w.norm_at(-k)),
        ProbeEvent::new("norm_x0_gt_2", (0, 0), |w, k| 0.5 * w.norm_at(-k)),
        ProbeEvent::new("joint_x0_x1_gt_1", (0, 1), |w, k| w.norm_at(-k).min(w.norm_at(1 - k))),
        ProbeEvent::new("sup_window_gt_1", (-l, l), move |w, k| {
            let lo = (-l - k).max(w.lo());
            let hi = (l - k).min(w.hi());
            (lo..=hi).fold(0.0, |m, j| m.max(w.norm_at(j)))
        }),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionEstimate {
    pub construction: String,
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeAgreement {
    pub probe: String,
    pub estimates: Vec<ConstructionEstimate>,
    /// Largest `|a - b| / sqrt(se_a² + se_b²)` over pairs.
    pub max_z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossReport {
    pub n: u64,
    pub z: f64,
    pub probes: Vec<ProbeAgreement>,
    pub pass: bool,
}

/// `ν(F > 1)` under the `ν_q` construction, for every probe.
fn nu_q_probes(model: &SpectralModel, q: &WeightSeq, probes: &[ProbeEvent], n: usize, seed: u64, key: u64) -> Result<Vec<Moments>> {
    let rep = make_z_general(model, q.clone())?;
    let a = model.alpha();
    mc::run(
        n,
        seed,
        tag::CROSS,
        key,
        || vec![Moments::new(); probes.len()],
        |rng, acc| {
            let z = rep.sample(rng)?;
            for (m, p) in acc.iter_mut().zip(probes) {
                m.push(p.eval_shifted(&z, 0).powf(a));
            }
            Ok(())
        },
    )
}

/// `ν(F > 1) = E[1{I(Θ)=0} Σ_j F(B^j Θ)^α]`.
fn infargmax_probes(model: &SpectralModel, probes: &[ProbeEvent], n: usize, seed: u64, key: u64) -> Result<Vec<Moments>> {
    let a = model.alpha();
    mc::run(
        n,
        seed,
        tag::CROSS,
        key,
        || vec![Moments::new(); probes.len()],
        |rng, acc| {
            let w = model.sample_theta(rng);
            let hit = infargmax(&w) == Some(0);
            for (m, p) in acc.iter_mut().zip(probes) {
                m.push(if hit { p.shift_sum(&w, a) } else { 0.0 });
            }
            Ok(())
        },
    )
}

/// Compare `ν_{q1}`, `ν_{q2}` and the infargmax construction on probe events.
pub fn cross_construction_agreement(
    model: &SpectralModel,
    q1: &WeightSeq,
    q2: &WeightSeq,
    probes: &[ProbeEvent],
    n: usize,
    seed: u64,
    z: f64,
) -> Result<CrossReport> {
    check_budget(n)?;
    let est = [
        (format!("nu_q[{:?}]", q1.tag()).to_lowercase(), nu_q_probes(model, q1, probes, n, seed, 1)?),
        (format!("nu_q[{:?}]", q2.tag()).to_lowercase(), nu_q_probes(model, q2, probes, n, seed, 2)?),
        ("infargmax".to_string(), infargmax_probes(model, probes, n, seed, 3)?),
    ];
    let mut rows = Vec::with_capacity(probes.len());
    for (pi, p) in probes.iter().enumerate() {
        let estimates: Vec<ConstructionEstimate> = est
            .iter()
            .map(|(name, ms)| ConstructionEstimate { construction: name.clone(), value: ms[pi].mean, se: ms[pi].se() })
            .collect();
        let mut max_z: f64 = 0.0;
        let mut pass = true;
        for i in 0..estimates.len() {
            for j in i + 1..estimates.len() {
                let (a, b) = (&estimates[i], &estimates[j]);
                let se = (a.se * a.se + b.se * b.se).sqrt();
                let d = (a.value - b.value).abs();
                pass &= d <= z * se + VERDICT_FLOOR;
                if se > 0.0 {
                    max_z = max_z.max(d / se);
                }
            }
        }
        rows.push(ProbeAgreement { probe: p.name.clone(), estimates, max_z, pass });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(CrossReport { n: n as u64, z, probes: rows, pass })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipativityVerdict {
    DissipativeAtWindow,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipativityReport {
    pub half_width: i64,
    pub n: u64,
    /// `P(I(Θ) = 0)`
    pub p_infargmax_zero: f64,
    /// `P(I(Θ) ∈ {-L, L})`: the maximizer may lie outside the window.
    pub p_infargmax_at_edge: f64,
    pub forward_edge_moment: f64,
    pub backward_edge_moment: f64,
    /// `E[‖Z̃_{-L}‖^α + ‖Z̃_L‖^α]`
    pub edge_mass: f64,
    pub edge_mass_se: f64,
    /// Geometric extrapolation of `Σ_{|h|>L} E‖Z̃_h‖^α`; infinite when the profile is not decaying.
    pub tail_mass_extrapolated: f64,
    pub tolerance: f64,
    pub verdict: DissipativityVerdict,
}

fn geometric_tail(inner: f64, edge: f64) -> f64 {
    if edge <= 0.0 {
        return 0.0;
    }
    if inner <= 0.0 {
        return f64::INFINITY;
    }
    let r = edge / inner;
    if r >= 1.0 {
        f64::INFINITY
    } else {
        edge * r / (1.0 - r)
    }
}

/// Support diagnostics for dissipativity at the working window.
pub fn dissipativity_check(model: &SpectralModel, n: usize, seed: u64) -> Result<DissipativityReport> {
    check_budget(n)?;
    let l = model.half_width();
    let a = model.alpha();
    // slots: I=0, I at edge, Θ_L^α, Θ_{-L}^α, Z̃ mass at -L, -L+1, L-1, L
    let acc = mc::run(n, seed, tag::DISSIPATIVE, 0, || vec![Moments::new(); 8], |rng, m| {
        let w = model.sample_theta(rng);
        let i = infargmax(&w);
        let mass = alpha_mass(&w, a);
        let zt = |h: i64| if l == 0 { 0.0 } else { w.norm_at(h).powf(a) / mass };
        m[0].push(if i == Some(0) { 1.0 } else { 0.0 });
        m[1].push(if l > 0 && (i == Some(-l) || i == Some(l)) { 1.0 } else { 0.0 });
        m[2].push(w.norm_at(l).powf(a));
        m[3].push(w.norm_at(-l).powf(a));
        m[4].push(zt(-l));
        m[5].push(zt(-l + 1));
        m[6].push(zt(l - 1));
        m[7].push(zt(l));
        Ok(())
    })?;
    let edge_mass = acc[4].mean + acc[7].mean;
    let edge_mass_se = (acc[4].se().powi(2) + acc[7].se().powi(2)).sqrt();
    let tail = if model.finite_support() {
        0.0
    } else {
        geometric_tail(acc[5].mean, acc[4].mean) + geometric_tail(acc[6].mean, acc[7].mean)
    };
    let p_edge = acc[1].mean;
    // a finitely supported law is fully inside its window by construction
    let ok = model.finite_support()
        || edge_mass + 4.0 * edge_mass_se <= EDGE_TOLERANCE
        && p_edge + 4.0 * acc[1].se() <= EDGE_TOLERANCE
        && tail <= EDGE_TOLERANCE;
    Ok(DissipativityReport {
        half_width: l,
        n: n as u64,
        p_infargmax_zero: acc[0].mean,
        p_infargmax_at_edge: p_edge,
        forward_edge_moment: acc[2].mean,
        backward_edge_moment: acc[3].mean,
        edge_mass,
        edge_mass_se,
        tail_mass_extrapolated: tail,
        tolerance: EDGE_TOLERANCE,
        verdict: if ok { DissipativityVerdict::DissipativeAtWindow } else { DissipativityVerdict::Inconclusive },
    })
}
