//! Experiment configuration: a TOML file with one section per stage.
//!
//! Validation never stops at the first problem. Every schema violation is
//! collected with its field path and, when it can be located, its line.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tailproc::spectral::{AngularLaw, ModelSpec};
use tailproc::stats::TwoSampleMetric;
use tailproc::{ConeSpace, SpectralModel, VectorNorm};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Certify,
    Construct,
    Simulate,
    Indices,
    Estimate,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Certify, Stage::Construct, Stage::Simulate, Stage::Indices, Stage::Estimate];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Certify => "certify",
            Stage::Construct => "construct",
            Stage::Simulate => "simulate",
            Stage::Indices => "indices",
            Stage::Estimate => "estimate",
        }
    }

    /// Stages whose output this one consumes.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Indices | Stage::Estimate => &[Stage::Simulate],
            _ => &[],
        }
    }

    /// `self` and everything it depends on, in execution order.
    pub fn closure(self) -> Vec<Stage> {
        let mut v: Vec<Stage> = self.requires().to_vec();
        v.push(self);
        v.sort();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauChoice {
    NormAt0,
    SupWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub spec: ModelSpec,
    pub alpha: f64,
    pub half_width: Option<i64>,
    pub angular: AngularLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub samples: usize,
    pub lags: Vec<i64>,
    pub z: f64,
    pub dissipativity_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructConfig {
    pub samples: usize,
    /// Uniform shift law on `[-s, s]`; defaults to the model half-width.
    pub shift_half_width: Option<i64>,
    pub lags: Vec<i64>,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub horizon: usize,
    pub replicates: usize,
    pub n_per_shift: Option<usize>,
    /// `u_min = fraction · a_r` with `a_r = block_length^{1/α}`.
    pub u_min_fraction: f64,
    pub block_length: usize,
    pub tolerance: f64,
    pub m: Option<i64>,
    pub stationarity_lags: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicesConfig {
    pub samples: usize,
    pub tau: TauChoice,
    pub limit_n: Vec<usize>,
    pub tolerance: f64,
    pub blocks_tolerance: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub quantile: f64,
    pub window: i64,
    pub min_count: usize,
    pub permutations: usize,
    pub max_samples: usize,
    pub metric: TwoSampleMetric,
    pub hill_k: usize,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub stages: Vec<Stage>,
    pub space: ConeSpace,
    pub model: ModelConfig,
    pub certify: CertifyConfig,
    pub construct: ConstructConfig,
    pub simulate: SimulateConfig,
    pub indices: IndicesConfig,
    pub estimate: EstimateConfig,
}

impl ExperimentConfig {
    pub fn build_model(&self) -> tailproc::Result<SpectralModel> {
        let m = &self.model;
        SpectralModel::from_spec(&m.spec, m.alpha, self.space, m.angular.clone(), m.half_width)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

struct Reader<'a> {
    raw: &'a str,
    errors: Vec<ConfigError>,
}

fn path(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else if key.is_empty() {
        section.to_string()
    } else {
        format!("{section}.{key}")
    }
}

impl<'a> Reader<'a> {
    /// First line defining `key` inside `[section]`, 1-based.
    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = String::new();
        for (i, line) in self.raw.lines().enumerate() {
            let t = line.trim();
            if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                current = name.trim().to_string();
                if key.is_empty() && current == section {
                    return Some(i + 1);
                }
                continue;
            }
            if current == section && !key.is_empty() {
                if let Some(rest) = t.strip_prefix(key) {
                    if rest.trim_start().starts_with('=') {
                        return Some(i + 1);
                    }
                }
            }
        }
        None
    }

    fn error(&mut self, section: &str, key: &str, message: impl Into<String>) {
        let line = self.line_of(section, key);
        self.errors.push(ConfigError { line, field: path(section, key), message: message.into() });
    }

    fn unknown_keys(&mut self, t: &Table, section: &str, known: &[&str]) {
        for k in t.keys() {
            if !known.contains(&k.as_str()) {
                self.error(section, k, "unknown field");
            }
        }
    }

    fn section<'t>(&mut self, root: &'t Table, name: &str) -> Option<&'t Table> {
        match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.error("", name, "must be a table");
                None
            }
        }
    }

    fn float(&mut self, t: Option<&Table>, sec: &str, key: &str) -> Option<f64> {
        match t.and_then(|t| t.get(key))? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.error(sec, key, "must be a number");
                None
            }
        }
    }

    fn int(&mut self, t: Option<&Table>, sec: &str, key: &str) -> Option<i64> {
        match t.and_then(|t| t.get(key))? {
            Value::Integer(i) => Some(*i),
            _ => {
                self.error(sec, key, "must be an integer");
                None
            }
        }
    }

    fn count(&mut self, t: Option<&Table>, sec: &str, key: &str, default: usize) -> usize {
        match self.int(t, sec, key) {
            None => default,
            Some(i) if i > 0 => i as usize,
            Some(_) => {
                self.error(sec, key, "must be positive");
                default
            }
        }
    }

    fn string(&mut self, t: Option<&Table>, sec: &str, key: &str) -> Option<String> {
        match t.and_then(|t| t.get(key))? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.error(sec, key, "must be a string");
                None
            }
        }
    }

    fn array<T>(&mut self, t: Option<&Table>, sec: &str, key: &str, item: impl Fn(&Value) -> Option<T>, what: &str) -> Option<Vec<T>> {
        match t.and_then(|t| t.get(key))? {
            Value::Array(a) => {
                let v: Option<Vec<T>> = a.iter().map(&item).collect();
                if v.is_none() {
                    self.error(sec, key, format!("must be a list of {what}"));
                }
                v
            }
            _ => {
                self.error(sec, key, format!("must be a list of {what}"));
                None
            }
        }
    }

    fn positive(&mut self, v: Option<f64>, sec: &str, key: &str, default: f64) -> f64 {
        match v {
            None => default,
            Some(x) if x > 0.0 && x.is_finite() => x,
            Some(_) => {
                self.error(sec, key, format!("{key} must be positive"));
                default
            }
        }
    }

    fn probability(&mut self, v: Option<f64>, sec: &str, key: &str, default: f64) -> f64 {
        match v {
            None => default,
            Some(x) if x > 0.0 && x < 1.0 => x,
            Some(_) => {
                self.error(sec, key, format!("{key} must lie strictly between 0 and 1"));
                default
            }
        }
    }
}

fn as_int(v: &Value) -> Option<i64> {
    v.as_integer()
}

fn as_float(v: &Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

fn line_of_offset(raw: &str, offset: usize) -> usize {
    raw[..offset.min(raw.len())].matches('\n').count() + 1
}

/// Parse and schema-check a configuration, collecting every violation.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let root: Table = match raw.parse::<Table>() {
        Ok(t) => t,
        Err(e) => {
            let line = e.span().map(|s| line_of_offset(raw, s.start));
            return Err(vec![ConfigError { line, field: String::new(), message: e.message().trim().to_string() }]);
        }
    };
    let mut r = Reader { raw, errors: Vec::new() };
    let top = Some(&root);
    r.unknown_keys(&root, "", &["seed", "output_dir", "stages", "space", "model", "certify", "construct", "simulate", "indices", "estimate"]);

    let seed = match r.int(top, "", "seed") {
        Some(s) if s >= 0 => s as u64,
        Some(_) => {
            r.error("", "seed", "seed must be a nonnegative integer");
            0
        }
        None => {
            if !root.contains_key("seed") {
                r.error("", "seed", "seed is required");
            }
            0
        }
    };
    let output_dir = PathBuf::from(r.string(top, "", "output_dir").unwrap_or_else(|| "tailproc-out".into()));
    let stage_names = r
        .array(top, "", "stages", |v| v.as_str().map(str::to_string), "stage names")
        .unwrap_or_else(|| vec!["all".into()]);
    let mut stages = Vec::new();
    for s in &stage_names {
        match s.as_str() {
            "all" => stages.extend(Stage::ALL),
            other => match Stage::ALL.iter().find(|st| st.name() == other) {
                Some(st) => stages.push(*st),
                None => r.error("", "stages", format!("unknown stage '{other}'")),
            },
        }
    }
    stages.sort();
    stages.dedup();
    if stages.is_empty() {
        r.error("", "stages", "at least one stage is required");
    }
    for s in &stages {
        for dep in s.requires() {
            if !stages.contains(dep) {
                r.error("", "stages", format!("stage '{}' requires '{}'", s.name(), dep.name()));
            }
        }
    }

    // [space]
    let sp = r.section(&root, "space");
    if let Some(t) = sp {
        r.unknown_keys(t, "space", &["kind", "dim", "norm"]);
    }
    let kind = r.string(sp, "space", "kind").unwrap_or_else(|| "nonneg".into());
    let space = match kind.as_str() {
        "nonneg" => ConeSpace::NonNeg,
        "real" => {
            let dim = r.int(sp, "space", "dim");
            let norm = match r.string(sp, "space", "norm").as_deref() {
                None | Some("euclidean") => VectorNorm::Euclidean,
                Some("sup") => VectorNorm::Sup,
                Some(other) => {
                    r.error("space", "norm", format!("unknown norm '{other}' (euclidean or sup)"));
                    VectorNorm::Euclidean
                }
            };
            match dim {
                None => {
                    r.error("space", "dim", "dim is required for a real vector space");
                    ConeSpace::NonNeg
                }
                Some(d) => match ConeSpace::real(d.max(0) as usize, norm) {
                    Ok(s) if d > 0 => s,
                    _ => {
                        r.error("space", "dim", format!("dim must be between 1 and {}", tailproc::cone::MAX_DIM));
                        ConeSpace::NonNeg
                    }
                },
            }
        }
        other => {
            r.error("space", "kind", format!("unknown space '{other}' (nonneg or real)"));
            ConeSpace::NonNeg
        }
    };

    // [model]
    let md = r.section(&root, "model");
    if md.is_none() {
        r.error("", "model", "a [model] section is required");
    }
    if let Some(t) = md {
        r.unknown_keys(t, "model", &["kind", "phi", "c", "sigma", "alpha", "half_width", "angular"]);
    }
    let alpha = match r.float(md, "model", "alpha") {
        Some(a) if a > 0.0 && a.is_finite() => a,
        Some(_) => {
            r.error("model", "alpha", "alpha must be positive");
            1.0
        }
        None => {
            if md.is_some() {
                r.error("model", "alpha", "alpha is required");
            }
            1.0
        }
    };
    let mkind = r.string(md, "model", "kind");
    let spec = match mkind.as_deref() {
        Some("iid") => Some(ModelSpec::Iid),
        Some("armax") => match r.float(md, "model", "phi") {
            Some(phi) if phi > 0.0 && phi < 1.0 => Some(ModelSpec::Armax { phi }),
            Some(_) => {
                r.error("model", "phi", "phi must lie strictly between 0 and 1");
                None
            }
            None => {
                r.error("model", "phi", "phi is required for armax");
                None
            }
        },
        Some("moving_maxima") => match r.array(md, "model", "c", as_float, "numbers") {
            Some(c) if !c.is_empty() && c.iter().all(|x| *x >= 0.0 && x.is_finite()) && c.iter().any(|x| *x > 0.0) => {
                Some(ModelSpec::MovingMaxima { c })
            }
            Some(_) => {
                r.error("model", "c", "coefficients must be nonnegative, finite and not all zero");
                None
            }
            None => {
                if md.is_some_and(|t| !t.contains_key("c")) {
                    r.error("model", "c", "c is required for moving_maxima");
                }
                None
            }
        },
        Some("brown_resnick") => match r.float(md, "model", "sigma") {
            Some(sigma) if sigma > 0.0 && sigma.is_finite() => Some(ModelSpec::BrownResnick { sigma }),
            Some(_) => {
                r.error("model", "sigma", "sigma must be positive");
                None
            }
            None => {
                r.error("model", "sigma", "sigma is required for brown_resnick");
                None
            }
        },
        Some(other) => {
            r.error("model", "kind", format!("unknown model '{other}' (iid, armax, moving_maxima, brown_resnick)"));
            None
        }
        None => {
            if md.is_some() {
                r.error("model", "kind", "kind is required");
            }
            None
        }
    };
    let half_width = match r.int(md, "model", "half_width") {
        Some(l) if l >= 0 => Some(l),
        Some(_) => {
            r.error("model", "half_width", "half_width must be nonnegative");
            None
        }
        None => None,
    };
    let angular = match md.and_then(|t| t.get("angular")) {
        None => AngularLaw::Gaussian,
        Some(Value::String(s)) if s == "gaussian" => AngularLaw::Gaussian,
        Some(Value::Array(_)) => match r.array(md, "model", "angular", as_float, "numbers") {
            Some(v) => AngularLaw::Fixed(v),
            None => AngularLaw::Gaussian,
        },
        Some(_) => {
            r.error("model", "angular", "angular must be \"gaussian\" or a direction vector");
            AngularLaw::Gaussian
        }
    };

    // [certify]
    let ce = r.section(&root, "certify");
    if let Some(t) = ce {
        r.unknown_keys(t, "certify", &["samples", "lags", "z", "dissipativity_samples"]);
    }
    let default_lags: Vec<i64> = (-3..=3).collect();
    let certify = CertifyConfig {
        samples: r.count(ce, "certify", "samples", 100_000),
        lags: r.array(ce, "certify", "lags", as_int, "integers").unwrap_or_else(|| default_lags.clone()),
        z: {
            let z = r.float(ce, "certify", "z");
            r.positive(z, "certify", "z", tailproc::spectral::DEFAULT_Z)
        },
        dissipativity_samples: r.count(ce, "certify", "dissipativity_samples", 20_000),
    };

    // [construct]
    let co = r.section(&root, "construct");
    if let Some(t) = co {
        r.unknown_keys(t, "construct", &["samples", "shift_half_width", "lags", "z"]);
    }
    let construct = ConstructConfig {
        samples: r.count(co, "construct", "samples", 100_000),
        shift_half_width: match r.int(co, "construct", "shift_half_width") {
            Some(s) if s >= 0 => Some(s),
            Some(_) => {
                r.error("construct", "shift_half_width", "shift_half_width must be nonnegative");
                None
            }
            None => None,
        },
        lags: r.array(co, "construct", "lags", as_int, "integers").unwrap_or(default_lags),
        z: {
            let z = r.float(co, "construct", "z");
            r.positive(z, "construct", "z", tailproc::spectral::DEFAULT_Z)
        },
    };

    // [simulate]
    let si = r.section(&root, "simulate");
    if let Some(t) = si {
        r.unknown_keys(t, "simulate", &["horizon", "replicates", "n_per_shift", "u_min_fraction", "block_length", "tolerance", "m", "stationarity_lags"]);
    }
    let simulate = SimulateConfig {
        horizon: r.count(si, "simulate", "horizon", 50_000),
        replicates: r.count(si, "simulate", "replicates", 20),
        n_per_shift: r.int(si, "simulate", "n_per_shift").and_then(|n| {
            if n > 0 {
                Some(n as usize)
            } else {
                r.error("simulate", "n_per_shift", "n_per_shift must be positive");
                None
            }
        }),
        u_min_fraction: {
            let v = r.float(si, "simulate", "u_min_fraction");
            r.positive(v, "simulate", "u_min_fraction", 0.05)
        },
        block_length: r.count(si, "simulate", "block_length", 100),
        tolerance: {
            let v = r.float(si, "simulate", "tolerance");
            r.probability(v, "simulate", "tolerance", 1e-4)
        },
        m: match r.int(si, "simulate", "m") {
            Some(m) if m >= 0 => Some(m),
            Some(_) => {
                r.error("simulate", "m", "m must be nonnegative");
                None
            }
            None => None,
        },
        stationarity_lags: r.count(si, "simulate", "stationarity_lags", 40),
    };
    if simulate.block_length > simulate.horizon {
        r.error("simulate", "block_length", "block_length must not exceed the horizon");
    }

    // [indices]
    let ix = r.section(&root, "indices");
    if let Some(t) = ix {
        r.unknown_keys(t, "indices", &["samples", "tau", "limit_n", "tolerance", "blocks_tolerance", "z"]);
    }
    let indices = IndicesConfig {
        samples: r.count(ix, "indices", "samples", 200_000),
        tau: match r.string(ix, "indices", "tau").as_deref() {
            None | Some("norm_at_0") => TauChoice::NormAt0,
            Some("sup_weighted") => TauChoice::SupWeighted,
            Some(other) => {
                r.error("indices", "tau", format!("unknown tau '{other}' (norm_at_0 or sup_weighted)"));
                TauChoice::NormAt0
            }
        },
        limit_n: match r.array(ix, "indices", "limit_n", as_int, "integers") {
            None => vec![1, 2, 5, 10, 20],
            Some(v) if v.iter().all(|n| *n > 0) && !v.is_empty() => v.into_iter().map(|n| n as usize).collect(),
            Some(_) => {
                r.error("indices", "limit_n", "block lengths must be positive");
                vec![1]
            }
        },
        tolerance: {
            let v = r.float(ix, "indices", "tolerance");
            r.positive(v, "indices", "tolerance", 0.01)
        },
        blocks_tolerance: {
            let v = r.float(ix, "indices", "blocks_tolerance");
            r.positive(v, "indices", "blocks_tolerance", 0.05)
        },
        z: {
            let z = r.float(ix, "indices", "z");
            r.positive(z, "indices", "z", tailproc::spectral::DEFAULT_Z)
        },
    };

    // [estimate]
    let es = r.section(&root, "estimate");
    if let Some(t) = es {
        r.unknown_keys(t, "estimate", &["quantile", "window", "min_count", "permutations", "max_samples", "metric", "hill_k", "level"]);
    }
    let estimate = EstimateConfig {
        quantile: {
            let v = r.float(es, "estimate", "quantile");
            r.probability(v, "estimate", "quantile", tailproc::estimators::DEFAULT_QUANTILE)
        },
        window: match r.int(es, "estimate", "window") {
            Some(w) if w >= 0 => w,
            Some(_) => {
                r.error("estimate", "window", "window must be nonnegative");
                3
            }
            None => 3,
        },
        min_count: r.count(es, "estimate", "min_count", tailproc::estimators::DEFAULT_MIN_COUNT),
        permutations: r.count(es, "estimate", "permutations", 199),
        max_samples: r.count(es, "estimate", "max_samples", 4000),
        metric: match r.string(es, "estimate", "metric").as_deref() {
            None | Some("wasserstein") => TwoSampleMetric::Wasserstein,
            Some("kolmogorov") => TwoSampleMetric::Kolmogorov,
            Some(other) => {
                r.error("estimate", "metric", format!("unknown metric '{other}' (wasserstein or kolmogorov)"));
                TwoSampleMetric::Wasserstein
            }
        },
        hill_k: r.count(es, "estimate", "hill_k", 500),
        level: {
            let v = r.float(es, "estimate", "level");
            r.probability(v, "estimate", "level", 0.01)
        },
    };

    let config = spec.map(|spec| ExperimentConfig {
        seed,
        output_dir,
        stages,
        space,
        model: ModelConfig { spec, alpha, half_width, angular },
        certify,
        construct,
        simulate,
        indices,
        estimate,
    });

    // Cross-field checks that need the model.
    if let Some(cfg) = &config {
        if r.errors.is_empty() {
            match cfg.build_model() {
                Err(e) => r.error("model", "", e.to_string()),
                Ok(m) => {
                    for (sec, lags) in [("certify", &cfg.certify.lags), ("construct", &cfg.construct.lags)] {
                        if let Some(h) = lags.iter().find(|&&h| !m.lag_in_scope(h)) {
                            r.error(sec, "lags", format!("lag {h} lies outside the model window ±{}", m.half_width()));
                        }
                    }
                    if let Some(s) = cfg.construct.shift_half_width {
                        if s < m.half_width() && !m.finite_support() {
                            r.error(
                                "construct",
                                "shift_half_width",
                                format!("the shift law must cover the model window ±{}", m.half_width()),
                            );
                        }
                    }
                    let expected = (cfg.simulate.horizon * cfg.simulate.replicates) as f64 * (1.0 - cfg.estimate.quantile);
                    if cfg.stages.contains(&Stage::Estimate) && expected < cfg.estimate.min_count as f64 {
                        r.error(
                            "estimate",
                            "quantile",
                            format!("about {expected:.0} exceedances expected, below min_count {}", cfg.estimate.min_count),
                        );
                    }
                    if 2 * cfg.estimate.window + 1 > cfg.simulate.horizon as i64 {
                        r.error("estimate", "window", "window does not fit the horizon");
                    }
                    if cfg.estimate.window > m.half_width() && !m.finite_support() {
                        r.error("estimate", "window", format!("window exceeds the model window ±{}", m.half_width()));
                    }
                }
            }
        }
    }

    match config {
        Some(c) if r.errors.is_empty() => Ok(c),
        _ => Err(r.errors),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "seed = 7\n[model]\nkind = \"iid\"\nalpha = 1.0\n";

    #[test]
    fn minimal_config_parses() {
        let c = validate_config(MINIMAL).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.stages, Stage::ALL.to_vec());
        assert_eq!(c.certify.samples, 100_000);
        assert_eq!(c.space, ConeSpace::NonNeg);
    }

    #[test]
    fn negative_alpha_is_reported_with_its_line() {
        let errs = validate_config("seed = 1\n[model]\nkind = \"iid\"\nalpha = -1\n").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].to_string(), "line 4: model.alpha: alpha must be positive");
    }

    #[test]
    fn missing_seed_is_an_error() {
        let errs = validate_config("[model]\nkind = \"iid\"\nalpha = 1.0\n").unwrap_err();
        assert!(errs.iter().any(|e| e.field == "seed"), "{errs:?}");
    }

    #[test]
    fn all_violations_are_collected() {
        let raw = "seed = -3\nstages = [\"indices\"]\n[model]\nkind = \"armax\"\nphi = 1.5\nalpha = 0\n[simulate]\nhorizon = 0\ncolour = 1\n";
        let errs = validate_config(raw).unwrap_err();
        let fields: Vec<&str> = errs.iter().map(|e| e.field.as_str()).collect();
        for f in ["seed", "stages", "model.phi", "model.alpha", "simulate.horizon", "simulate.colour"] {
            assert!(fields.contains(&f), "{f} missing from {errs:?}");
        }
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let errs = validate_config("seed = 1\n[model\nkind = 2\n").unwrap_err();
        assert_eq!(errs[0].line, Some(2));
    }

    #[test]
    fn lags_must_fit_truncated_windows() {
        let raw = "seed = 1\n[model]\nkind = \"armax\"\nphi = 0.5\nalpha = 1.0\nhalf_width = 20\n[certify]\nlags = [0, 30]\n";
        let errs = validate_config(raw).unwrap_err();
        assert_eq!(errs[0].field, "certify.lags");
        assert_eq!(errs[0].line, Some(8));
    }

    #[test]
    fn stage_closure_orders_dependencies() {
        assert_eq!(Stage::Indices.closure(), vec![Stage::Simulate, Stage::Indices]);
        assert_eq!(Stage::Certify.closure(), vec![Stage::Certify]);
    }
}
