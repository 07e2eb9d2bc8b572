//! The cone `E`, finite windows of `E`-valued sequences, and the homogeneous
//! functionals evaluated on them.
//!
//! Two concrete cones are supported: `[0, ∞)` with `‖x‖ = x`, and `R^d`
//! (`1 <= d <= 8`) with either the Euclidean or the sup norm. A [`SeqWindow`]
//! stands for a sequence that is exactly zero outside `[lo, hi]`; every
//! "sup over all lags" is taken over the window.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorNorm {
    Euclidean,
    Sup,
}

/// The state space `E` of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConeSpace {
    NonNeg,
    Real { dim: usize, norm: VectorNorm },
}

impl Default for ConeSpace {
    fn default() -> Self {
        ConeSpace::NonNeg
    }
}

impl ConeSpace {
    pub fn real(dim: usize, norm: VectorNorm) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::invalid(format!("dimension must be in 1..={MAX_DIM}, got {dim}")));
        }
        Ok(ConeSpace::Real { dim, norm })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConeSpace::NonNeg => 1,
            ConeSpace::Real { dim, .. } => *dim,
        }
    }

    /// Norm of a raw component slice of length `dim`.
    #[inline]
    pub fn norm_of(&self, v: &[f64]) -> f64 {
        match self {
            ConeSpace::NonNeg => v[0],
            ConeSpace::Real { norm: VectorNorm::Euclidean, .. } => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            ConeSpace::Real { norm: VectorNorm::Sup, .. } => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// The metric `d_E(x, y) = ‖x - y‖` (so that `d_E(0, x) = ‖x‖`).
    #[inline]
    pub fn distance_of(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            ConeSpace::NonNeg => (a[0] - b[0]).abs(),
            ConeSpace::Real { norm: VectorNorm::Euclidean, .. } => {
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            }
            ConeSpace::Real { norm: VectorNorm::Sup, .. } => {
                a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
            }
        }
    }

    fn check(&self, x: &ConeElement) -> Result<()> {
        match (self, x) {
            (ConeSpace::NonNeg, ConeElement::NonNeg(_)) => Ok(()),
            (ConeSpace::Real { dim, .. }, ConeElement::Vector(v)) if v.len() == *dim => Ok(()),
            (ConeSpace::Real { dim, .. }, ConeElement::Vector(v)) => {
                Err(Error::DimensionMismatch { expected: *dim, found: v.len() })
            }
            _ => Err(Error::VariantMismatch),
        }
    }

    pub fn zero(&self) -> ConeElement {
        match self {
            ConeSpace::NonNeg => ConeElement::NonNeg(0.0),
            ConeSpace::Real { dim, .. } => ConeElement::Vector(vec![0.0; *dim]),
        }
    }
}

/// A point of `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConeElement {
    NonNeg(f64),
    Vector(Vec<f64>),
}

impl ConeElement {
    pub fn scalar(x: f64) -> Result<Self> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::invalid(format!("nonnegative scalar expected, got {x}")));
        }
        Ok(ConeElement::NonNeg(x))
    }

    pub fn components(&self) -> &[f64] {
        match self {
            ConeElement::NonNeg(x) => std::slice::from_ref(x),
            ConeElement::Vector(v) => v,
        }
    }

    pub fn scale(&self, u: f64) -> ConeElement {
        match self {
            ConeElement::NonNeg(x) => ConeElement::NonNeg(u * x),
            ConeElement::Vector(v) => ConeElement::Vector(v.iter().map(|x| u * x).collect()),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.components().iter().all(|&x| x == 0.0)
    }
}

/// `‖x‖_E` in the configured space.
pub fn pseudonorm(space: &ConeSpace, x: &ConeElement) -> Result<f64> {
    space.check(x)?;
    Ok(space.norm_of(x.components()))
}

/// Finite window `[lo, hi]` of an `E`-valued sequence, zero elsewhere.
#[derive(Clone, PartialEq)]
pub struct SeqWindow {
    space: ConeSpace,
    lo: i64,
    /// Components, `dim` per lag.
    values: Vec<f64>,
}

impl fmt::Debug for SeqWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeqWindow")
            .field("lo", &self.lo)
            .field("hi", &self.hi())
            .field("values", &self.values)
            .finish()
    }
}

impl SeqWindow {
    /// All-zero window over `[lo, hi]`.
    pub fn zeros(space: ConeSpace, lo: i64, hi: i64) -> Self {
        assert!(lo <= hi, "window bounds must satisfy lo <= hi");
        let len = (hi - lo + 1) as usize;
        SeqWindow { space, lo, values: vec![0.0; len * space.dim()] }
    }

    pub fn from_elements(space: ConeSpace, lo: i64, elems: &[ConeElement]) -> Result<Self> {
        if elems.is_empty() {
            return Err(Error::invalid("a window needs at least one lag"));
        }
        let mut values = Vec::with_capacity(elems.len() * space.dim());
        for e in elems {
            space.check(e)?;
            values.extend_from_slice(e.components());
        }
        Ok(SeqWindow { space, lo, values })
    }

    /// Scalar window on `[0, ∞)` from raw values.
    pub fn from_scalars(lo: i64, xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::invalid("a window needs at least one lag"));
        }
        if xs.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::invalid("scalar windows take nonnegative values"));
        }
        Ok(SeqWindow { space: ConeSpace::NonNeg, lo, values: xs.to_vec() })
    }

    #[cfg(test)]
    pub(crate) fn from_raw(space: ConeSpace, lo: i64, values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty() && values.len() % space.dim() == 0);
        SeqWindow { space, lo, values }
    }

    pub fn space(&self) -> ConeSpace {
        self.space
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.space.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn raw(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Components at `lag`, or `None` outside the window.
    #[inline]
    pub fn at(&self, lag: i64) -> Option<&[f64]> {
        if lag < self.lo || lag > self.hi() {
            return None;
        }
        let d = self.space.dim();
        let i = (lag - self.lo) as usize * d;
        Some(&self.values[i..i + d])
    }

    pub fn element(&self, lag: i64) -> ConeElement {
        match (self.space, self.at(lag)) {
            (ConeSpace::NonNeg, Some(v)) => ConeElement::NonNeg(v[0]),
            (ConeSpace::Real { .. }, Some(v)) => ConeElement::Vector(v.to_vec()),
            (space, None) => space.zero(),
        }
    }

    /// `‖x_lag‖`, zero outside the window.
    #[inline]
    pub fn norm_at(&self, lag: i64) -> f64 {
        match self.at(lag) {
            Some(v) => self.space.norm_of(v),
            None => 0.0,
        }
    }

    /// `(lag, ‖x_lag‖)` over the window.
    pub fn norms(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let d = self.space.dim();
        self.values
            .chunks_exact(d)
            .enumerate()
            .map(move |(i, v)| (self.lo + i as i64, self.space.norm_of(v)))
    }

    pub fn max_norm(&self) -> f64 {
        self.norms().fold(0.0, |m, (_, n)| m.max(n))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    pub fn scale(&self, u: f64) -> SeqWindow {
        SeqWindow { space: self.space, lo: self.lo, values: self.values.iter().map(|x| u * x).collect() }
    }

    pub(crate) fn scale_in_place(&mut self, u: f64) {
        self.values.iter_mut().for_each(|x| *x *= u);
    }

    /// Same sequence viewed on a larger or smaller window (zero-padded).
    pub fn restrict(&self, lo: i64, hi: i64) -> SeqWindow {
        let mut out = SeqWindow::zeros(self.space, lo, hi);
        let d = self.space.dim();
        for lag in lo.max(self.lo)..=hi.min(self.hi()) {
            let src = self.at(lag).expect("lag inside window");
            let i = (lag - lo) as usize * d;
            out.values[i..i + d].copy_from_slice(src);
        }
        out
    }
}

/// Backshift `B^k`: `(B^k w)_h = w_{h-k}`.
pub fn shift(w: &SeqWindow, k: i64) -> SeqWindow {
    SeqWindow { space: w.space, lo: w.lo + k, values: w.values.clone() }
}

/// Kinds of weight sequences `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightTag {
    Geometric,
    DiracAtZero,
    ConstantOne,
    Uniform,
    Custom,
}

/// A nonnegative weight sequence with finite declared support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSeq {
    tag: WeightTag,
    lo: i64,
    weights: Vec<f64>,
}

pub const DEFAULT_GEOMETRIC_HALF_WIDTH: i64 = 64;

impl WeightSeq {
    /// `q_k = c 2^{-|k|}` on `|k| <= half_width`, normalized to sum one.
    pub fn geometric(half_width: i64) -> Self {
        let hw = half_width.max(0);
        let raw: Vec<f64> = (-hw..=hw).map(|k| 0.5f64.powi(k.unsigned_abs() as i32)).collect();
        let total: f64 = raw.iter().sum();
        WeightSeq { tag: WeightTag::Geometric, lo: -hw, weights: raw.into_iter().map(|w| w / total).collect() }
    }

    pub fn dirac() -> Self {
        WeightSeq { tag: WeightTag::DiracAtZero, lo: 0, weights: vec![1.0] }
    }

    /// `q ≡ 1` on `|k| <= half_width`.
    pub fn constant_one(half_width: i64) -> Self {
        let hw = half_width.max(0);
        WeightSeq { tag: WeightTag::ConstantOne, lo: -hw, weights: vec![1.0; (2 * hw + 1) as usize] }
    }

    /// Uniform probability weights on `|k| <= half_width`.
    pub fn uniform(half_width: i64) -> Self {
        let hw = half_width.max(0);
        let n = (2 * hw + 1) as usize;
        WeightSeq { tag: WeightTag::Uniform, lo: -hw, weights: vec![1.0 / n as f64; n] }
    }

    pub fn custom(lo: i64, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("custom weights must be finite and strictly positive"));
        }
        Ok(WeightSeq { tag: WeightTag::Custom, lo, weights })
    }

    pub fn tag(&self) -> WeightTag {
        self.tag
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.weights.len() as i64 - 1
    }

    pub fn half_width(&self) -> i64 {
        self.lo.abs().max(self.hi().abs())
    }

    #[inline]
    pub fn weight(&self, k: i64) -> f64 {
        if k < self.lo || k > self.hi() {
            0.0
        } else {
            self.weights[(k - self.lo) as usize]
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl Default for WeightSeq {
    fn default() -> Self {
        WeightSeq::geometric(DEFAULT_GEOMETRIC_HALF_WIDTH)
    }
}

/// `‖w‖_{q,α} = (Σ_j q_j ‖w_j‖^α)^{1/α}`.
pub fn q_alpha_norm(w: &SeqWindow, q: &WeightSeq, alpha: f64) -> f64 {
    q_alpha_mass_shifted(w, 0, q, alpha).powf(1.0 / alpha)
}

/// `‖B^k w‖_{q,α}^α` without materializing the shift.
pub(crate) fn q_alpha_mass_shifted(w: &SeqWindow, k: i64, q: &WeightSeq, alpha: f64) -> f64 {
    // (B^k w)_j = w_{j-k}
    let lo = q.lo().max(w.lo() + k);
    let hi = q.hi().min(w.hi() + k);
    let mut s = 0.0;
    for j in lo..=hi {
        let n = w.norm_at(j - k);
        if n > 0.0 {
            s += q.weight(j) * n.powf(alpha);
        }
    }
    s
}

/// Leftmost lag achieving the largest norm; `None` for the zero window.
pub fn infargmax(w: &SeqWindow) -> Option<i64> {
    let mut best = 0.0;
    let mut arg = None;
    for (lag, n) in w.norms() {
        if n > best {
            best = n;
            arg = Some(lag);
        }
    }
    arg
}

/// `d_F(w1, w2) = Σ_j 2^{-|j|} (d_E(w1_j, w2_j) ∧ 1)`.
pub fn seq_distance(w1: &SeqWindow, w2: &SeqWindow) -> Result<f64> {
    if w1.space != w2.space {
        return Err(Error::VariantMismatch);
    }
    let space = w1.space;
    let zero = vec![0.0; space.dim()];
    let mut total = 0.0;
    for j in w1.lo().min(w2.lo())..=w1.hi().max(w2.hi()) {
        let a = w1.at(j).unwrap_or(&zero);
        let b = w2.at(j).unwrap_or(&zero);
        let d = space.distance_of(a, b).min(1.0);
        if d > 0.0 {
            total += d * 0.5f64.powi(j.unsigned_abs().min(1100) as i32);
        }
    }
    Ok(total)
}

/// A user-supplied 1-homogeneous functional.
#[derive(Clone)]
pub struct CustomTau {
    pub name: String,
    /// Half-width of the lags the functional reads.
    pub reach: i64,
    pub f: Arc<dyn Fn(&SeqWindow) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomTau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomTau").field("name", &self.name).field("reach", &self.reach).finish()
    }
}

/// 1-homogeneous functionals `τ` on sequences.
#[derive(Debug, Clone)]
pub enum TauFunctional {
    /// `τ(x) = ‖x_0‖`
    NormAtZero,
    /// `τ(x) = sup_h q_h ‖x_h‖`
    SupWeighted(WeightSeq),
    Custom(CustomTau),
}

impl TauFunctional {
    pub fn name(&self) -> String {
        match self {
            TauFunctional::NormAtZero => "norm_at_0".into(),
            TauFunctional::SupWeighted(q) => format!("sup_weighted_{:?}", q.tag()).to_lowercase(),
            TauFunctional::Custom(c) => c.name.clone(),
        }
    }

    /// Lags `[lo, hi]` that `τ` reads.
    pub fn reach(&self) -> (i64, i64) {
        match self {
            TauFunctional::NormAtZero => (0, 0),
            TauFunctional::SupWeighted(q) => (q.lo(), q.hi()),
            TauFunctional::Custom(c) => (-c.reach, c.reach),
        }
    }

    /// `τ(B^k w)` without materializing the shift.
    pub fn eval_shifted(&self, w: &SeqWindow, k: i64) -> f64 {
        match self {
            TauFunctional::NormAtZero => w.norm_at(-k),
            TauFunctional::SupWeighted(q) => {
                let lo = q.lo().max(w.lo() + k);
                let hi = q.hi().min(w.hi() + k);
                let mut m: f64 = 0.0;
                for j in lo..=hi {
                    m = m.max(q.weight(j) * w.norm_at(j - k));
                }
                m
            }
            TauFunctional::Custom(c) => (c.f)(&shift(w, k)),
        }
    }

    /// Shifts `k` for which `τ(B^k w)` can be nonzero.
    pub fn active_shifts(&self, w: &SeqWindow) -> (i64, i64) {
        let (a, b) = self.reach();
        // (B^k w)_i = w_{i-k} with i in [a, b] and i-k in [lo, hi]
        (a - w.hi(), b - w.lo())
    }
}

pub fn tau_eval(tau: &TauFunctional, w: &SeqWindow) -> f64 {
    tau.eval_shifted(w, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalars(lo: i64, xs: &[f64]) -> SeqWindow {
        SeqWindow::from_scalars(lo, xs).unwrap()
    }

    #[test]
    fn pseudonorm_examples() {
        let e2 = ConeSpace::real(2, VectorNorm::Euclidean).unwrap();
        assert_eq!(pseudonorm(&ConeSpace::NonNeg, &ConeElement::NonNeg(3.0)).unwrap(), 3.0);
        assert_eq!(pseudonorm(&e2, &ConeElement::Vector(vec![3.0, 4.0])).unwrap(), 5.0);
        assert_eq!(pseudonorm(&e2, &ConeElement::Vector(vec![0.0, 0.0])).unwrap(), 0.0);
        assert!(matches!(
            pseudonorm(&e2, &ConeElement::Vector(vec![1.0, 2.0, 3.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
        assert!(matches!(pseudonorm(&e2, &ConeElement::NonNeg(1.0)), Err(Error::VariantMismatch)));
        assert!(ConeSpace::real(9, VectorNorm::Sup).is_err());
    }

    #[test]
    fn shift_examples() {
        let w = scalars(0, &[1.0, 2.0]);
        assert_eq!(shift(&w, 0), w);
        let d = scalars(0, &[1.0]);
        let s = shift(&d, 2);
        assert_eq!(s.norm_at(2), 1.0);
        assert_eq!(s.norm_at(0), 0.0);
        assert_eq!(shift(&shift(&w, 1), -1), w);
    }

    #[test]
    fn q_alpha_norm_examples() {
        let q = WeightSeq::constant_one(3);
        assert_eq!(q_alpha_norm(&scalars(0, &[1.0]), &WeightSeq::dirac(), 2.0), 1.0);
        assert_eq!(q_alpha_norm(&scalars(0, &[1.0, 1.0]), &q, 1.0), 2.0);
    }

    #[test]
    fn infargmax_examples() {
        assert_eq!(infargmax(&scalars(0, &[1.0])), Some(0));
        assert_eq!(infargmax(&scalars(-1, &[2.0, 2.0, 1.0])), Some(-1));
        assert_eq!(infargmax(&scalars(-2, &[0.0, 0.0, 0.0])), None);
    }

    #[test]
    fn seq_distance_examples() {
        let a = scalars(0, &[1.0, 2.0]);
        assert_eq!(seq_distance(&a, &a).unwrap(), 0.0);
        assert!((seq_distance(&scalars(0, &[1.0]), &scalars(0, &[1.5])).unwrap() - 0.5).abs() < 1e-15);
        let b = scalars(0, &[0.0, 0.0, 0.0, 5.0]);
        let z = scalars(0, &[0.0]);
        assert!((seq_distance(&b, &z).unwrap() - 0.125).abs() < 1e-15);
        let v = SeqWindow::zeros(ConeSpace::real(2, VectorNorm::Sup).unwrap(), 0, 0);
        assert!(matches!(seq_distance(&a, &v), Err(Error::VariantMismatch)));
    }

    #[test]
    fn tau_examples() {
        let w = scalars(-1, &[1.0, 2.0, 3.0]);
        assert_eq!(tau_eval(&TauFunctional::NormAtZero, &w), 2.0);
        let sup1 = TauFunctional::SupWeighted(WeightSeq::constant_one(5));
        assert_eq!(tau_eval(&sup1, &scalars(0, &[1.0, 3.0, 2.0])), 3.0);
    }

    #[test]
    fn geometric_weights_sum_to_one() {
        let q = WeightSeq::geometric(40);
        assert!((q.total() - 1.0).abs() < 1e-14);
        assert!(q.weights().iter().all(|&w| w > 0.0));
        assert!((q.weight(1) / q.weight(0) - 0.5).abs() < 1e-15);
        assert!(WeightSeq::custom(0, vec![1.0, 0.0]).is_err());
    }

    fn window_strategy() -> impl Strategy<Value = SeqWindow> {
        (-5i64..5, prop::collection::vec(0.0f64..10.0, 1..12))
            .prop_map(|(lo, xs)| SeqWindow::from_scalars(lo, &xs).unwrap())
    }

    fn vector_window_strategy() -> impl Strategy<Value = SeqWindow> {
        (-4i64..4, prop::collection::vec(-5.0f64..5.0, 3..30)).prop_map(|(lo, mut xs)| {
            let space = ConeSpace::real(3, VectorNorm::Euclidean).unwrap();
            xs.truncate(xs.len() / 3 * 3);
            SeqWindow::from_raw(space, lo, xs)
        })
    }

    proptest! {
        #[test]
        fn functionals_are_one_homogeneous(w in window_strategy(), u in 0.01f64..100.0, alpha in 0.3f64..4.0) {
            let q = WeightSeq::geometric(10);
            let s = w.scale(u);
            let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-300);
            prop_assert!(rel(q_alpha_norm(&s, &q, alpha), u * q_alpha_norm(&w, &q, alpha)));
            prop_assert!(rel(tau_eval(&TauFunctional::NormAtZero, &s), u * tau_eval(&TauFunctional::NormAtZero, &w)));
            let sup = TauFunctional::SupWeighted(q.clone());
            prop_assert!(rel(tau_eval(&sup, &s), u * tau_eval(&sup, &w)));
        }

        #[test]
        fn vector_norm_is_homogeneous(w in vector_window_strategy(), u in 0.01f64..100.0) {
            let s = w.scale(u);
            for lag in w.lo()..=w.hi() {
                let a = s.norm_at(lag);
                let b = u * w.norm_at(lag);
                prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
                prop_assert_eq!(b == 0.0, w.element(lag).is_zero());
            }
        }

        #[test]
        fn shift_is_a_bijection(w in window_strategy(), k in -20i64..20) {
            prop_assert_eq!(shift(&shift(&w, k), -k), w);
        }

        #[test]
        fn infargmax_commutes_with_shift(w in window_strategy(), k in -20i64..20) {
            match infargmax(&w) {
                Some(i) => prop_assert_eq!(infargmax(&shift(&w, k)), Some(i + k)),
                None => prop_assert_eq!(infargmax(&shift(&w, k)), None),
            }
        }

        #[test]
        fn seq_distance_is_a_metric(a in window_strategy(), b in window_strategy(), c in window_strategy()) {
            let ab = seq_distance(&a, &b).unwrap();
            let ba = seq_distance(&b, &a).unwrap();
            let bc = seq_distance(&b, &c).unwrap();
            let ac = seq_distance(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() < 1e-15);
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
