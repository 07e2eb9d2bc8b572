//! Stage orchestration and the machine-readable run report.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tailproc::cone::TauFunctional;
use tailproc::estimators::{
    empirical_spectral_tail, empirical_tail_process, hill_alpha, law_distance, quantile_threshold,
    radius_angle_dependence, DependenceTest, HillEstimate, LawDistance, LawDistanceSpec,
};
use tailproc::indices::{
    anti_clustering_diagnostic, blocks_extremal_index, candidate_extremal_index, m_dep_ratio_index,
    maximal_index_dissipative, maximal_index_infargmax, maximal_index_limit, maximal_index_spectral,
    AntiClusteringRow, IndexRecord, LimitReport,
};
use tailproc::particles::{default_n_per_shift, simulate_ensemble, stationarity_check, LagKsReport};
use tailproc::spectral::{check_tcf, default_family, WINDOW_EPS};
use tailproc::stats::{kolmogorov_critical, KsResult};
use tailproc::tail_measure::{
    cross_construction_agreement, default_probes, default_weights, dissipativity_check, local_tail_radius_check,
    make_tilde_z, make_z_from_tilde_z, pareto_ks, check_tsf, CrossReport, DissipativityReport,
};
use tailproc::{EmpiricalTailLaw, HMap, IndexEstimate, NormalizedTau, PathEnsemble, ShiftLaw, SimulationSpec, SpectralModel, TcfReport};
use tailproc::cone::WeightSeq;

use crate::config::{ExperimentConfig, Stage, TauChoice};

/// Significance level of every gating KS test.
pub const KS_LEVEL: f64 = 0.01;
/// Conditioning events targeted by the anti-clustering diagnostic.
const ANTI_CLUSTERING_EVENTS: f64 = 500.0;

#[derive(Debug)]
pub struct RunError {
    pub stage: Stage,
    pub source: tailproc::Error,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage.name(), self.source)
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

trait StageContext<T> {
    fn at(self, stage: Stage) -> Result<T, RunError>;
}

impl<T> StageContext<T> for tailproc::Result<T> {
    fn at(self, stage: Stage) -> Result<T, RunError> {
        self.map_err(|source| RunError { stage, source })
    }
}

/// One pass/fail verdict that enters the exit status.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub stage: Stage,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    pub tcf: TcfReport,
    pub pareto_radius: KsResult,
    pub pareto_radius_n: usize,
    pub dissipativity: DissipativityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructReport {
    pub shift_half_width: i64,
    pub tsf: TcfReport,
    pub cross: CrossReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub horizon: usize,
    pub replicates: usize,
    pub n_per_shift: usize,
    pub u_min: f64,
    pub truncation_bound: f64,
    pub tolerance: f64,
    pub m: Option<i64>,
    pub ties: u64,
    pub empty_lags: u64,
    pub particles_used: u64,
    pub stationarity: LagKsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicesReport {
    pub tau: String,
    pub tau_scale: f64,
    pub tau_scale_se: f64,
    pub tau_scale_n: u64,
    /// Estimates of the maximal index of `tau`.
    pub maximal: Vec<IndexEstimate>,
    /// Estimates of the extremal index.
    pub extremal: Vec<IndexEstimate>,
    pub extremal_index_exact: Option<f64>,
    pub limit: LimitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub quantile: f64,
    pub threshold: f64,
    pub window: i64,
    pub exceedances: usize,
    pub effective_sample_size: usize,
    /// Statistic over all exceedances; `critical` and `rejected` assume independence.
    pub pareto_radius: KsResult,
    pub pareto_radius_critical_clustered: f64,
    pub hill: HillEstimate,
    pub law_distance: LawDistance,
    pub dependence: Vec<DependenceTest>,
    /// `None` when too few conditioning events were observed.
    pub anti_clustering: Option<Vec<AntiClusteringRow>>,
    pub anti_clustering_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the canonical configuration, output directory excluded.
    pub config_hash: String,
    pub seed: u64,
    pub model: String,
    pub alpha: f64,
    pub half_width: i64,
    pub stages: Vec<Stage>,
    pub certify: Option<CertifyReport>,
    pub construct: Option<ConstructReport>,
    pub simulate: Option<SimulateReport>,
    pub indices: Option<IndicesReport>,
    pub estimate: Option<EstimateReport>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// The report plus the stage artifacts that go next to it.
pub struct RunOutput {
    pub report: RunReport,
    pub ensemble: Option<PathEnsemble>,
    pub tail_law: Option<EmpiricalTailLaw>,
    pub index_records: Vec<IndexRecord>,
}

impl RunOutput {
    /// Write `report.json` and whichever of `paths.csv`, `tail_law.csv` and
    /// `indices.json` the stages produced.
    pub fn write(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let report = dir.join("report.json");
        fs::write(&report, self.report.to_json())?;
        written.push(report);
        let to_io = |e: tailproc::Error| io::Error::other(e.to_string());
        if let Some(ens) = &self.ensemble {
            let p = dir.join("paths.csv");
            ens.write_csv(io::BufWriter::new(fs::File::create(&p)?)).map_err(to_io)?;
            written.push(p);
        }
        if let Some(law) = &self.tail_law {
            let p = dir.join("tail_law.csv");
            law.write_csv(io::BufWriter::new(fs::File::create(&p)?)).map_err(to_io)?;
            written.push(p);
        }
        if !self.index_records.is_empty() {
            let p = dir.join("indices.json");
            let mut s = serde_json::to_string_pretty(&self.index_records).expect("records serialize");
            s.push('\n');
            fs::write(&p, s)?;
            written.push(p);
        }
        Ok(written)
    }
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.output_dir = PathBuf::new();
    let bytes = serde_json::to_vec(&c).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn combined_se(a: &IndexEstimate, b: &IndexEstimate) -> f64 {
    (a.se * a.se + b.se * b.se).sqrt()
}

/// Every pair agrees within `z` combined standard errors, plus the window
/// truncation allowance.
fn pairwise_agreement(stage: Stage, name: &str, est: &[IndexEstimate], z: f64) -> Check {
    let mut worst = (0.0f64, String::new());
    let mut pass = true;
    for (i, a) in est.iter().enumerate() {
        for b in &est[i + 1..] {
            let gap = (a.value - b.value).abs();
            let allowed = z * combined_se(a, b) + WINDOW_EPS;
            pass &= gap <= allowed;
            if gap / allowed > worst.0 {
                worst = (gap / allowed, format!("{} vs {}: |{:.6} - {:.6}| vs {:.2e}", a.method.as_str(), b.method.as_str(), a.value, b.value, allowed));
            }
        }
    }
    Check { stage, name: name.into(), pass, detail: worst.1 }
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    model: &'a SpectralModel,
    checks: Vec<Check>,
}

impl Runner<'_> {
    fn check(&mut self, stage: Stage, name: &str, pass: bool, detail: String) {
        self.checks.push(Check { stage, name: name.into(), pass, detail });
    }

    fn certify(&mut self) -> Result<CertifyReport, RunError> {
        let st = Stage::Certify;
        let c = &self.cfg.certify;
        let seed = self.cfg.seed;
        let tcf = check_tcf(self.model, &default_family(), &c.lags, c.samples, seed, c.z).at(st)?;
        let worst = tcf.failures().count();
        self.check(st, "time_change_formula", tcf.pass, format!("{} of {} cells outside {}σ", worst, tcf.rows.len(), c.z));
        let ks = local_tail_radius_check(self.model, c.samples, seed, KS_LEVEL).at(st)?;
        self.check(st, "pareto_radius", !ks.rejected, format!("KS {:.5} vs critical {:.5}", ks.statistic, ks.critical));
        let dissipativity = dissipativity_check(self.model, c.dissipativity_samples, seed).at(st)?;
        Ok(CertifyReport { tcf, pareto_radius: ks, pareto_radius_n: c.samples, dissipativity })
    }

    fn construct(&mut self) -> Result<ConstructReport, RunError> {
        let st = Stage::Construct;
        let c = &self.cfg.construct;
        let seed = self.cfg.seed;
        let s = c.shift_half_width.unwrap_or(self.model.half_width());
        let tz = make_tilde_z(self.model).at(st)?;
        let z = make_z_from_tilde_z(&tz, ShiftLaw::uniform(-s, s).at(st)?).at(st)?;
        let tsf = check_tsf(&z, &default_family(), &c.lags, c.samples, seed, c.z).at(st)?;
        self.check(st, "tilt_shift_formula", tsf.pass, format!("{} of {} cells outside {}σ", tsf.failures().count(), tsf.rows.len(), c.z));
        let l = self.model.half_width();
        let cross = cross_construction_agreement(
            self.model,
            &default_weights(self.model),
            &WeightSeq::uniform(l),
            &default_probes(l),
            c.samples,
            seed,
            c.z,
        )
        .at(st)?;
        let max_z = cross.probes.iter().map(|p| p.max_z).fold(0.0, f64::max);
        self.check(st, "cross_construction", cross.pass, format!("largest pairwise gap {max_z:.2} combined SE"));
        Ok(ConstructReport { shift_half_width: s, tsf, cross })
    }

    fn simulate(&mut self) -> Result<(SimulateReport, PathEnsemble), RunError> {
        let st = Stage::Simulate;
        let c = &self.cfg.simulate;
        let a = self.model.alpha();
        let tz = make_tilde_z(self.model).at(st)?;
        let u_min = c.u_min_fraction * (c.block_length as f64).powf(1.0 / a);
        let n_per_shift = match c.n_per_shift {
            Some(n) => n,
            None => default_n_per_shift(&tz, c.horizon, u_min, c.tolerance).at(st)?,
        };
        let spec = SimulationSpec {
            horizon: c.horizon,
            replicates: c.replicates,
            n_per_shift,
            u_min,
            tolerance: c.tolerance,
            seed: self.cfg.seed,
            m: c.m,
            first_replicate: 0,
        };
        let ens = simulate_ensemble(&tz, &spec).at(st)?;
        let meta = &ens.meta;
        self.check(
            st,
            "truncation_certificate",
            meta.truncation_bound <= c.tolerance,
            format!("bound {:.3e} at u_min {:.4} vs tolerance {:.1e}", meta.truncation_bound, u_min, c.tolerance),
        );
        self.check(st, "no_ties", meta.ties == 0, format!("{} tied maxima", meta.ties));
        let stationarity = stationarity_check(&ens, c.stationarity_lags, KS_LEVEL).at(st)?;
        self.check(
            st,
            "stationarity",
            stationarity.pass,
            format!("{:.3} of {} lags not rejected", stationarity.share_not_rejected, stationarity.tests.len()),
        );
        let report = SimulateReport {
            horizon: c.horizon,
            replicates: c.replicates,
            n_per_shift,
            u_min,
            truncation_bound: meta.truncation_bound,
            tolerance: c.tolerance,
            m: c.m,
            ties: meta.ties,
            empty_lags: meta.empty_lags,
            particles_used: meta.particles_used,
            stationarity,
        };
        Ok((report, ens))
    }

    fn indices(&mut self, ens: &PathEnsemble) -> Result<IndicesReport, RunError> {
        let st = Stage::Indices;
        let c = &self.cfg.indices;
        let seed = self.cfg.seed;
        let model = self.model;
        let a = model.alpha();
        let tau_fn = match c.tau {
            TauChoice::NormAt0 => TauFunctional::NormAtZero,
            TauChoice::SupWeighted => TauFunctional::SupWeighted(default_weights(model)),
        };
        let tau = NormalizedTau::new(model, tau_fn, c.samples, seed).at(st)?;
        let tz = make_tilde_z(model).at(st)?;
        let maximal = vec![
            maximal_index_dissipative(&tz, &tau, c.samples, seed).at(st)?,
            maximal_index_spectral(model, &tau, c.samples, seed).at(st)?,
            maximal_index_infargmax(model, &tau, c.samples, seed).at(st)?,
        ];
        let candidate = candidate_extremal_index(model, c.samples, seed).at(st)?;
        let m = self.cfg.simulate.m.unwrap_or(model.half_width());
        let ratio = m_dep_ratio_index(&tz, &HMap::Norm, m, c.samples, seed).at(st)?;
        let blocks = blocks_extremal_index(ens, a, &HMap::Norm, self.cfg.simulate.block_length, seed).at(st)?;
        let norm_tau = c.tau == TauChoice::NormAt0;
        // the extremal index is the maximal index of the norm at lag 0
        let mut extremal = vec![candidate.clone()];
        if m >= model.half_width() {
            extremal.push(ratio.clone());
        }
        let mut agreeing = maximal.clone();
        if norm_tau {
            agreeing.extend(extremal.iter().cloned());
        }
        self.checks.push(pairwise_agreement(st, "index_agreement", &agreeing, c.z));
        if !norm_tau && extremal.len() > 1 {
            self.checks.push(pairwise_agreement(st, "extremal_index_agreement", &extremal, c.z));
        }
        let exact = model.extremal_index_exact();
        if let Some(theta) = exact {
            let targets = if norm_tau { &agreeing } else { &extremal };
            let worst = targets.iter().map(|e| (e.value - theta).abs()).fold(0.0, f64::max);
            self.check(st, "index_oracle", worst <= c.tolerance, format!("largest |θ̂ - {theta:.6}| = {worst:.5} vs {}", c.tolerance));
        }
        let reference = exact.unwrap_or(candidate.value);
        let gap = (blocks.value - reference).abs();
        self.check(
            st,
            "blocks_index",
            gap <= c.blocks_tolerance,
            format!("blocks {:.4} ± {:.4} vs {reference:.4}", blocks.value, blocks.se),
        );
        extremal.push(blocks);
        if m < model.half_width() {
            extremal.push(ratio);
        }
        let limit = maximal_index_limit(model, &tau, &c.limit_n, c.samples, seed).at(st)?;
        self.check(
            st,
            "maximal_index_subadditivity",
            limit.subadditivity_violations == 0,
            format!("{} violations", limit.subadditivity_violations),
        );
        Ok(IndicesReport {
            tau: tau.name(),
            tau_scale: tau.scale,
            tau_scale_se: tau.scale_se,
            tau_scale_n: tau.n,
            maximal,
            extremal,
            extremal_index_exact: exact,
            limit,
        })
    }

    fn estimate(&mut self, ens: &PathEnsemble) -> Result<(EstimateReport, EmpiricalTailLaw), RunError> {
        let st = Stage::Estimate;
        let c = &self.cfg.estimate;
        let seed = self.cfg.seed;
        let a = self.model.alpha();
        let u = quantile_threshold(ens, c.quantile).at(st)?;
        let tail = empirical_tail_process(ens, u, c.window, c.min_count).at(st)?;
        let ks = pareto_ks(tail.radii(), a, KS_LEVEL).at(st)?;
        // radii repeat within a cluster, so the critical value uses the cluster count
        let clusters = tail.effective_sample_size();
        let critical = kolmogorov_critical(KS_LEVEL) / (clusters as f64).sqrt();
        self.check(
            st,
            "pareto_radius",
            ks.statistic <= critical,
            format!("KS {:.5} vs critical {:.5} over {} exceedances in {clusters} clusters", ks.statistic, critical, tail.count()),
        );
        let spectral = empirical_spectral_tail(ens, u, c.window, c.min_count).at(st)?;
        let norms = ens.all_norms();
        let k = c.hill_k.min((norms.len() - 1) / 2);
        let hill = hill_alpha(norms, k).at(st)?;
        let lags: Vec<i64> = (-c.window..=c.window).collect();
        let spec = LawDistanceSpec { metric: c.metric, permutations: c.permutations, max_samples: c.max_samples, seed };
        let law = law_distance(&spectral, self.model, &lags, &spec).at(st)?;
        let dependence = lags
            .iter()
            .filter(|&&h| h != 0)
            .map(|&h| radius_angle_dependence(&spectral, h, c.max_samples.min(2000), c.permutations, c.level, seed))
            .collect::<tailproc::Result<Vec<_>>>()
            .at(st)?;
        let r_n = self.cfg.simulate.block_length.min((ens.horizon - 1) / 2);
        let m_values: Vec<usize> = [1, 2, 5, 10, 20, 50].into_iter().filter(|&m| m <= r_n).collect();
        let u_ac = (ens.replicates as f64 / ANTI_CLUSTERING_EVENTS).powf(1.0 / a);
        let anti_clustering = match anti_clustering_diagnostic(ens, a, u_ac, &m_values, r_n) {
            Ok(rows) => Some(rows),
            Err(tailproc::Error::InsufficientExceedances { .. }) => None,
            Err(e) => return Err(RunError { stage: st, source: e }),
        };
        let report = EstimateReport {
            quantile: c.quantile,
            threshold: u,
            window: c.window,
            exceedances: tail.count(),
            effective_sample_size: tail.effective_sample_size(),
            pareto_radius: ks,
            pareto_radius_critical_clustered: critical,
            hill,
            law_distance: law,
            dependence,
            anti_clustering,
            anti_clustering_u: u_ac,
        };
        Ok((report, tail))
    }
}

/// Run `stages` (closed under dependencies) in order.
pub fn run(config: &ExperimentConfig, stages: &[Stage]) -> Result<RunOutput, RunError> {
    let mut stages: Vec<Stage> = stages.iter().flat_map(|s| s.closure()).collect();
    stages.sort();
    stages.dedup();
    let first = stages.first().copied().unwrap_or(Stage::Certify);
    let model = config.build_model().at(first)?;
    let mut r = Runner { cfg: config, model: &model, checks: Vec::new() };
    let mut report = RunReport {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config_hash(config),
        seed: config.seed,
        model: r.model.name(),
        alpha: r.model.alpha(),
        half_width: r.model.half_width(),
        stages: stages.clone(),
        certify: None,
        construct: None,
        simulate: None,
        indices: None,
        estimate: None,
        checks: Vec::new(),
        pass: false,
    };
    let mut ensemble: Option<PathEnsemble> = None;
    let mut tail_law = None;
    let mut index_records = Vec::new();
    for stage in &stages {
        match stage {
            Stage::Certify => report.certify = Some(r.certify()?),
            Stage::Construct => report.construct = Some(r.construct()?),
            Stage::Simulate => {
                let (rep, ens) = r.simulate()?;
                report.simulate = Some(rep);
                ensemble = Some(ens);
            }
            Stage::Indices => {
                let rep = r.indices(ensemble.as_ref().expect("simulate precedes indices"))?;
                let name = r.model.name();
                index_records = rep
                    .maximal
                    .iter()
                    .map(|e| e.record(&name, &rep.tau, config.seed))
                    .chain(rep.extremal.iter().map(|e| e.record(&name, "norm_at_0", config.seed)))
                    .collect();
                report.indices = Some(rep);
            }
            Stage::Estimate => {
                let (rep, law) = r.estimate(ensemble.as_ref().expect("simulate precedes estimate"))?;
                report.estimate = Some(rep);
                tail_law = Some(law);
            }
        }
    }
    report.pass = r.checks.iter().all(|c| c.pass);
    report.checks = r.checks;
    Ok(RunOutput { report, ensemble, tail_law, index_records })
}
