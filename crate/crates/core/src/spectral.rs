//! Spectral tail process samplers with analytic ground truth, and the Monte
//! Carlo check of the time change formula.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cone::{infargmax, ConeSpace, SeqWindow, WeightSeq};
use crate::error::{Error, Result};
use crate::mc;
use crate::rng::{tag, SimRng};
use crate::stats::{Moments, PairMoments};

/// Truncation level used to size the default windows.
pub const WINDOW_EPS: f64 = 1e-6;
/// Default z-threshold for Monte Carlo verdicts.
pub const DEFAULT_Z: f64 = 4.0;
/// Absolute slack added to `z * se` so that identities holding sample by
/// sample are not failed by rounding.
pub const VERDICT_FLOOR: f64 = 1e-12;
const MAX_WINDOW: i64 = 4096;

/// Named built-in laws, as read from a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Iid,
    Armax { phi: f64 },
    MovingMaxima { c: Vec<f64> },
    /// `Θ_h = exp((σ W_h - σ²|h|/2) / α)` for a two-sided Gaussian random walk `W`.
    BrownResnick { sigma: f64 },
}

/// Law of the direction `S = Θ_0 / ‖Θ_0‖` on a vector cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngularLaw {
    /// Normalized standard Gaussian vector.
    Gaussian,
    Fixed(Vec<f64>),
}

impl Default for AngularLaw {
    fn default() -> Self {
        AngularLaw::Gaussian
    }
}

/// A user-supplied sampler of spectral tail windows.
pub trait ThetaSampler: Send + Sync {
    fn name(&self) -> String;
    fn half_width(&self) -> i64;
    /// Overwrite `out` (shaped `[-L, L]`) with one draw of `Θ`.
    fn sample_into(&self, rng: &mut SimRng, out: &mut SeqWindow);
    /// Whether `P(‖Θ_h‖ > 0) = 1` for every lag in the window.
    fn full_support(&self) -> bool {
        false
    }
}

#[derive(Clone)]
enum Kind {
    Iid,
    Armax { phi: f64, rho: f64, ln_rho: f64 },
    MovingMaxima { c: Vec<f64>, cdf: Vec<f64> },
    BrownResnick { sigma: f64 },
    Custom(Arc<dyn ThetaSampler>),
}

/// Sampler of `Θ` windows over `[-L, L]` with `‖Θ_0‖ = 1`.
#[derive(Clone)]
pub struct SpectralModel {
    kind: Kind,
    spec: Option<ModelSpec>,
    alpha: f64,
    half_width: i64,
    space: ConeSpace,
    angular: Vec<f64>,
    angular_random: bool,
}

impl fmt::Debug for SpectralModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralModel")
            .field("name", &self.name())
            .field("alpha", &self.alpha)
            .field("half_width", &self.half_width)
            .field("space", &self.space)
            .finish()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid("alpha must be positive"));
    }
    Ok(())
}

impl SpectralModel {
    pub fn iid(alpha: f64) -> Result<Self> {
        Self::from_spec(&ModelSpec::Iid, alpha, ConeSpace::NonNeg, AngularLaw::Gaussian, None)
    }

    pub fn armax(phi: f64, alpha: f64) -> Result<Self> {
        Self::from_spec(&ModelSpec::Armax { phi }, alpha, ConeSpace::NonNeg, AngularLaw::Gaussian, None)
    }

    pub fn moving_maxima(c: &[f64], alpha: f64) -> Result<Self> {
        Self::from_spec(&ModelSpec::MovingMaxima { c: c.to_vec() }, alpha, ConeSpace::NonNeg, AngularLaw::Gaussian, None)
    }

    pub fn brown_resnick(sigma: f64, alpha: f64) -> Result<Self> {
        Self::from_spec(&ModelSpec::BrownResnick { sigma }, alpha, ConeSpace::NonNeg, AngularLaw::Gaussian, None)
    }

    /// Build a named model. `half_width` overrides the default window.
    pub fn from_spec(
        spec: &ModelSpec,
        alpha: f64,
        space: ConeSpace,
        angular: AngularLaw,
        half_width: Option<i64>,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let (kind, default_l) = match spec {
            ModelSpec::Iid => (Kind::Iid, 2),
            ModelSpec::Armax { phi } => {
                if !(*phi > 0.0 && *phi < 1.0) {
                    return Err(Error::invalid(format!("armax needs 0 < phi < 1, got {phi}")));
                }
                let rho = phi.powf(alpha);
                let l = (WINDOW_EPS.ln() / (alpha * phi.ln())).ceil() as i64;
                (Kind::Armax { phi: *phi, rho, ln_rho: rho.ln() }, l.max(1))
            }
            ModelSpec::MovingMaxima { c } => {
                if c.is_empty() || c.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                    return Err(Error::invalid("moving maxima coefficients must be finite and nonnegative"));
                }
                let w: Vec<f64> = c.iter().map(|x| x.powf(alpha)).collect();
                let total: f64 = w.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::invalid("moving maxima coefficients are all zero"));
                }
                let mut acc = 0.0;
                let cdf = w
                    .iter()
                    .map(|x| {
                        acc += x / total;
                        acc
                    })
                    .collect();
                (Kind::MovingMaxima { c: c.clone(), cdf }, (c.len() as i64 - 1).max(0))
            }
            ModelSpec::BrownResnick { sigma } => {
                if !(*sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::invalid("brown_resnick needs sigma > 0"));
                }
                let l = (4.0 * (1.0 / WINDOW_EPS).ln() / (sigma * sigma)).ceil() as i64;
                (Kind::BrownResnick { sigma: *sigma }, l.clamp(3, 512))
            }
        };
        let half_width = half_width.unwrap_or(default_l);
        if !(0..=MAX_WINDOW).contains(&half_width) {
            return Err(Error::invalid(format!("window half-width must be in 0..={MAX_WINDOW}")));
        }
        let (angular, angular_random) = Self::angular_setup(space, angular)?;
        Ok(SpectralModel { kind, spec: Some(spec.clone()), alpha, half_width, space, angular, angular_random })
    }

    /// Wrap a user-supplied sampler.
    pub fn custom(sampler: Arc<dyn ThetaSampler>, alpha: f64, space: ConeSpace) -> Result<Self> {
        check_alpha(alpha)?;
        let half_width = sampler.half_width();
        if !(0..=MAX_WINDOW).contains(&half_width) {
            return Err(Error::invalid(format!("window half-width must be in 0..={MAX_WINDOW}")));
        }
        let (angular, angular_random) = Self::angular_setup(space, AngularLaw::Gaussian)?;
        Ok(SpectralModel { kind: Kind::Custom(sampler), spec: None, alpha, half_width, space, angular, angular_random })
    }

    fn angular_setup(space: ConeSpace, law: AngularLaw) -> Result<(Vec<f64>, bool)> {
        match (space, law) {
            (ConeSpace::NonNeg, _) => Ok((vec![1.0], false)),
            (ConeSpace::Real { dim, .. }, AngularLaw::Gaussian) => Ok((vec![0.0; dim], true)),
            (ConeSpace::Real { dim, .. }, AngularLaw::Fixed(v)) => {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
                }
                let n = space.norm_of(&v);
                if !(n > 0.0) || !n.is_finite() {
                    return Err(Error::invalid("fixed direction must be a nonzero finite vector"));
                }
                Ok((v.iter().map(|x| x / n).collect(), false))
            }
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn half_width(&self) -> i64 {
        self.half_width
    }

    pub fn space(&self) -> ConeSpace {
        self.space
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    pub fn name(&self) -> String {
        match &self.kind {
            Kind::Iid => "iid".into(),
            Kind::Armax { phi, .. } => format!("armax(phi={phi})"),
            Kind::MovingMaxima { c, .. } => format!("moving_maxima(c={c:?})"),
            Kind::BrownResnick { sigma } => format!("brown_resnick(sigma={sigma})"),
            Kind::Custom(s) => s.name(),
        }
    }

    /// `P(‖Θ_h‖ > 0) = 1` on the whole window.
    pub fn full_support(&self) -> bool {
        match &self.kind {
            Kind::Iid => self.half_width == 0,
            Kind::Armax { .. } => false,
            Kind::MovingMaxima { c, .. } => self.half_width == 0 && c.iter().all(|&x| x > 0.0),
            Kind::BrownResnick { .. } => true,
            Kind::Custom(s) => s.full_support(),
        }
    }

    /// Whether the law is known to put no mass outside a finite set of lags.
    pub fn finite_support(&self) -> bool {
        matches!(self.kind, Kind::Iid | Kind::MovingMaxima { .. })
    }

    /// Lags whose law is represented exactly: the window, or every lag for finitely supported laws.
    pub fn lag_in_scope(&self, h: i64) -> bool {
        self.finite_support() || h.abs() <= self.half_width
    }

    /// Exact `E[‖Θ_h‖^α]` for the built-in laws (ignoring window truncation).
    pub fn moment_exact(&self, h: i64) -> Option<f64> {
        let a = self.alpha;
        match &self.kind {
            Kind::Iid => Some(if h == 0 { 1.0 } else { 0.0 }),
            // h < 0: φ^{hα} P(K >= -h) = φ^{hα} ρ^{-h} = 1
            Kind::Armax { phi, .. } => Some(if h >= 0 { phi.powf(h as f64 * a) } else { 1.0 }),
            Kind::MovingMaxima { c, .. } => {
                let total: f64 = c.iter().map(|x| x.powf(a)).sum();
                let m = c.len() as i64;
                let s: f64 = (0..m).filter(|j| (0..m).contains(&(j + h))).map(|j| c[(j + h) as usize].powf(a)).sum();
                Some(s / total)
            }
            Kind::BrownResnick { .. } => Some(1.0),
            Kind::Custom(_) => None,
        }
    }

    /// Exact extremal index (maximal index for `τ(x) = ‖x_0‖`).
    pub fn extremal_index_exact(&self) -> Option<f64> {
        match &self.kind {
            Kind::Iid => Some(1.0),
            Kind::Armax { rho, .. } => Some(1.0 - rho),
            Kind::MovingMaxima { c, .. } => {
                let w: Vec<f64> = c.iter().map(|x| x.powf(self.alpha)).collect();
                Some(w.iter().copied().fold(0.0, f64::max) / w.iter().sum::<f64>())
            }
            _ => None,
        }
    }

    /// Exact `P(I(Θ) = 0)`.
    pub fn p_infargmax_zero_exact(&self) -> Option<f64> {
        match &self.kind {
            Kind::Iid => Some(1.0),
            Kind::Armax { rho, .. } => Some(1.0 - rho),
            Kind::MovingMaxima { c, .. } => {
                // I(Θ) = j* - J with j* the leftmost maximizing coefficient
                let best = c.iter().copied().fold(0.0, f64::max);
                let jstar = c.iter().position(|&x| x == best)?;
                let total: f64 = c.iter().map(|x| x.powf(self.alpha)).sum();
                Some(c[jstar].powf(self.alpha) / total)
            }
            _ => None,
        }
    }

    /// Geometric rate `r` with `E‖Θ_h‖^α <= C r^{|h|}` beyond the window, when known.
    pub fn forward_decay_rate(&self) -> Option<f64> {
        match &self.kind {
            Kind::Iid | Kind::MovingMaxima { .. } => Some(0.0),
            Kind::Armax { rho, .. } => Some(*rho),
            _ => None,
        }
    }

    pub fn empty_window(&self) -> SeqWindow {
        SeqWindow::zeros(self.space, -self.half_width, self.half_width)
    }

    pub fn sample_theta(&self, rng: &mut SimRng) -> SeqWindow {
        let mut w = self.empty_window();
        self.sample_theta_into(rng, &mut w);
        w
    }

    /// Overwrite `out`, which must come from [`Self::empty_window`].
    pub fn sample_theta_into(&self, rng: &mut SimRng, out: &mut SeqWindow) {
        let l = self.half_width;
        debug_assert_eq!((out.lo(), out.hi()), (-l, l));
        if let Kind::Custom(s) = &self.kind {
            s.sample_into(rng, out);
            debug_assert!((out.norm_at(0) - 1.0).abs() < 1e-12, "custom sampler must return ‖Θ_0‖ = 1");
            return;
        }
        let dim = self.space.dim();
        let mut dir = [0.0f64; crate::cone::MAX_DIM];
        if self.angular_random {
            loop {
                for x in dir[..dim].iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
                let n = self.space.norm_of(&dir[..dim]);
                if n > 0.0 {
                    dir[..dim].iter_mut().for_each(|x| *x /= n);
                    break;
                }
            }
        } else {
            dir[..dim].copy_from_slice(&self.angular);
        }
        let raw = out.raw_mut();
        let mut put = |h: i64, r: f64| {
            let i = (h + l) as usize * dim;
            for (o, s) in raw[i..i + dim].iter_mut().zip(&dir[..dim]) {
                *o = r * s;
            }
        };
        match &self.kind {
            Kind::Iid => {
                for h in -l..=l {
                    put(h, if h == 0 { 1.0 } else { 0.0 });
                }
            }
            Kind::Armax { phi, ln_rho, .. } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                let k = (u.ln() / ln_rho).floor();
                let k = if k > (l + 1) as f64 { l + 1 } else { k as i64 };
                for h in -l..=l {
                    put(h, if h >= -k { phi.powi(h as i32) } else { 0.0 });
                }
            }
            Kind::MovingMaxima { c, cdf } => {
                let u: f64 = rng.random();
                let j = cdf.iter().position(|&p| u < p).unwrap_or(cdf.len() - 1);
                let cj = c[j];
                for h in -l..=l {
                    let idx = j as i64 + h;
                    let v = if (0..c.len() as i64).contains(&idx) { c[idx as usize] / cj } else { 0.0 };
                    put(h, v);
                }
            }
            Kind::BrownResnick { sigma } => {
                let a = self.alpha;
                put(0, 1.0);
                for dir_sign in [1i64, -1] {
                    let mut w = 0.0;
                    for step in 1..=l {
                        let z: f64 = rng.sample(StandardNormal);
                        w += z;
                        let log = (sigma * w - 0.5 * sigma * sigma * step as f64) / a;
                        put(dir_sign * step, log.exp());
                    }
                }
            }
            Kind::Custom(_) => unreachable!(),
        }
    }
}

type TestFn = dyn Fn(&SeqWindow, i64) -> f64 + Send + Sync;

/// A bounded 0-homogeneous map `H_0` vanishing on `{‖x_0‖ = 0}`, evaluated
/// as `H_0(B^k w)` for a window `w` and shift `k`.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub bound: f64,
    f: Arc<TestFn>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("name", &self.name).field("bound", &self.bound).finish()
    }
}

impl TestFunction {
    pub fn new(name: impl Into<String>, bound: f64, f: impl Fn(&SeqWindow, i64) -> f64 + Send + Sync + 'static) -> Self {
        TestFunction { name: name.into(), bound, f: Arc::new(f) }
    }

    /// `H_0(B^k w)`.
    #[inline]
    pub fn eval_shifted(&self, w: &SeqWindow, k: i64) -> f64 {
        (self.f)(w, k)
    }

    pub fn eval(&self, w: &SeqWindow) -> f64 {
        (self.f)(w, 0)
    }
}

/// The default test family.
pub fn default_family() -> Vec<TestFunction> {
    let sup = crate::cone::TauFunctional::SupWeighted(WeightSeq::default());
    vec![
        TestFunction::new("ind_x0_pos", 1.0, |w, k| if w.norm_at(-k) > 0.0 { 1.0 } else { 0.0 }),
        TestFunction::new("ratio_x1_x0", 1.0, |w, k| {
            let n0 = w.norm_at(-k);
            if n0 > 0.0 {
                (w.norm_at(1 - k) / n0).min(1.0)
            } else {
                0.0
            }
        }),
        TestFunction::new("ind_infargmax_0", 1.0, |w, k| match infargmax(w) {
            Some(i) if i + k == 0 => 1.0,
            _ => 0.0,
        }),
        TestFunction::new("sup_weighted_over_x0", 10.0, move |w, k| {
            let n0 = w.norm_at(-k);
            if n0 > 0.0 {
                (sup.eval_shifted(w, k) / n0).min(10.0)
            } else {
                0.0
            }
        }),
    ]
}

/// One `(h, H_0)` cell of a two-sided identity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub h: i64,
    pub function: String,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// Standard error of `lhs - rhs` from paired draws.
    pub se: f64,
    pub n: u64,
    pub pass: bool,
}

/// Result of a TCF or TSF check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcfReport {
    pub identity: String,
    pub z: f64,
    pub n: u64,
    pub rows: Vec<CheckRow>,
    pub pass: bool,
}

impl TcfReport {
    pub(crate) fn from_pairs(identity: &str, z: f64, hs: &[i64], fam: &[TestFunction], acc: &[PairMoments]) -> Self {
        let mut rows = Vec::with_capacity(acc.len());
        for (hi, &h) in hs.iter().enumerate() {
            for (fi, f) in fam.iter().enumerate() {
                let m = &acc[hi * fam.len() + fi];
                let se = m.se_diff();
                let pass = (m.mean_x - m.mean_y).abs() <= z * se + VERDICT_FLOOR;
                rows.push(CheckRow {
                    h,
                    function: f.name.clone(),
                    lhs: m.mean_x,
                    lhs_se: m.se_x(),
                    rhs: m.mean_y,
                    rhs_se: m.se_y(),
                    se,
                    n: m.n,
                    pass,
                });
            }
        }
        let n = acc.first().map_or(0, |m| m.n);
        let pass = rows.iter().all(|r| r.pass);
        TcfReport { identity: identity.into(), z, n, rows, pass }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

pub(crate) fn check_budget(n: usize) -> Result<()> {
    if n < 100 {
        return Err(Error::TooFewSamples { found: n, required: 100 });
    }
    Ok(())
}

pub(crate) fn check_family(fam: &[TestFunction]) -> Result<()> {
    if fam.is_empty() {
        return Err(Error::invalid("empty test family"));
    }
    if let Some(f) = fam.iter().find(|f| !(f.bound.is_finite() && f.bound >= 0.0)) {
        return Err(Error::Unbounded(f.name.clone()));
    }
    Ok(())
}

/// Monte Carlo check of `E[H_0(B^hΘ) 1{‖Θ_{-h}‖>0}] = E[‖Θ_h‖^α H_0(Θ)]`.
pub fn check_tcf(
    model: &SpectralModel,
    fam: &[TestFunction],
    hs: &[i64],
    n: usize,
    seed: u64,
    z: f64,
) -> Result<TcfReport> {
    check_budget(n)?;
    check_family(fam)?;
    if let Some(h) = hs.iter().find(|&&h| !model.lag_in_scope(h)) {
        return Err(Error::invalid(format!("lag {h} outside the model window")));
    }
    let a = model.alpha();
    let cells = hs.len() * fam.len();
    let acc = mc::run(
        n,
        seed,
        tag::TCF,
        0,
        || vec![PairMoments::default(); cells],
        |rng, acc| {
            let w = model.sample_theta(rng);
            for (hi, &h) in hs.iter().enumerate() {
                let back = w.norm_at(-h) > 0.0;
                let fwd = w.norm_at(h).powf(a);
                for (fi, f) in fam.iter().enumerate() {
                    let lhs = if back { f.eval_shifted(&w, h) } else { 0.0 };
                    let rhs = if fwd > 0.0 { fwd * f.eval(&w) } else { 0.0 };
                    acc[hi * fam.len() + fi].push(lhs, rhs);
                }
            }
            Ok(())
        },
    )?;
    Ok(TcfReport::from_pairs("time_change", z, hs, fam, &acc))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub h: i64,
    pub estimate: f64,
    pub se: f64,
    pub exact: Option<f64>,
    /// `estimate <= 1 + 4 se`
    pub bounded: bool,
}

/// Monte Carlo `E[‖Θ_h‖^α]` per lag.
pub fn moment_profile(model: &SpectralModel, hs: &[i64], n: usize, seed: u64) -> Result<Vec<MomentRow>> {
    if let Some(h) = hs.iter().find(|&&h| !model.lag_in_scope(h)) {
        return Err(Error::invalid(format!("lag {h} outside the model window")));
    }
    let a = model.alpha();
    let acc = mc::run(
        n,
        seed,
        tag::MOMENTS,
        0,
        || vec![Moments::default(); hs.len()],
        |rng, acc| {
            let w = model.sample_theta(rng);
            for (m, &h) in acc.iter_mut().zip(hs) {
                m.push(w.norm_at(h).powf(a));
            }
            Ok(())
        },
    )?;
    Ok(hs
        .iter()
        .zip(acc)
        .map(|(&h, m)| MomentRow {
            h,
            estimate: m.mean,
            se: m.se(),
            exact: model.moment_exact(h),
            bounded: m.mean <= 1.0 + 4.0 * m.se() + VERDICT_FLOOR,
        })
        .collect())
}
