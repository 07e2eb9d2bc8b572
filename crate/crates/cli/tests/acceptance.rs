//! Acceptance suite: one line per criterion.
//!
//! Runs as a plain binary so that every verdict is printed, whatever the
//! test filter. A criterion whose outcome differs from the expected one makes
//! the target fail.

use std::time::{Duration, Instant};

use tailproc::cone::{ConeSpace, VectorNorm, WeightSeq};
use tailproc::estimators::{collect_exceedances, TailKind};
use tailproc::indices::{
    blocks_extremal_index, candidate_extremal_index, maximal_index_dissipative, maximal_index_infargmax,
    maximal_index_spectral, smith_weissman_check,
};
use tailproc::particles::{
    default_n_per_shift, max_stability_check, odot_stability_check, simulate_ensemble, stationarity_check,
    LagKsReport,
};
use tailproc::spectral::{check_tcf, default_family, AngularLaw, DEFAULT_Z};
use tailproc::stats::{kolmogorov_critical, quantile};
use tailproc::tail_measure::{
    check_tsf, cross_construction_agreement, default_probes, default_weights, local_tail_radius_check,
    make_tilde_z, make_z_from_tilde_z, pareto_ks,
};
use tailproc::{HMap, IndexEstimate, ModelSpec, NormalizedTau, PathEnsemble, ShiftLaw, SimulationSpec, SpectralModel};
use tailproc_cli::{run, validate_config, Stage};

const SEED: u64 = 20_240_611;
const LAGS: [i64; 7] = [-3, -2, -1, 0, 1, 2, 3];
const KS_LEVEL: f64 = 0.01;
const CERT_TOLERANCE: f64 = 1e-4;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

fn built_in() -> Vec<SpectralModel> {
    vec![
        SpectralModel::iid(1.0).unwrap(),
        SpectralModel::armax(0.5, 1.0).unwrap(),
        SpectralModel::armax(0.5, 2.0).unwrap(),
        SpectralModel::moving_maxima(&[1.0, 1.0], 1.0).unwrap(),
        SpectralModel::moving_maxima(&[1.0, 0.5], 1.0).unwrap(),
    ]
}

fn label(m: &SpectralModel) -> String {
    format!("{} a={}", m.name(), m.alpha())
}

fn criterion_1() -> Verdict {
    let fam = default_family();
    let mut pass = true;
    let mut parts = Vec::new();
    for m in built_in() {
        let t = Instant::now();
        let r = check_tcf(&m, &fam, &LAGS, 100_000, SEED, DEFAULT_Z).unwrap();
        let dt = t.elapsed();
        pass &= r.pass && dt < Duration::from_secs(30);
        parts.push(format!("{} {} ({:.2}s)", label(&m), if r.pass { "ok" } else { "fails" }, dt.as_secs_f64()));
    }
    Verdict::new(pass, parts.join("; "))
}

fn tsf_with_shift(m: &SpectralModel, half: i64) -> bool {
    let tz = make_tilde_z(m).unwrap();
    let z = make_z_from_tilde_z(&tz, ShiftLaw::uniform(-half, half).unwrap()).unwrap();
    check_tsf(&z, &default_family(), &LAGS, 100_000, SEED, DEFAULT_Z).unwrap().pass
}

/// Uniform `p` on `[-2, 2]` as stated; a Z built this way only represents the
/// tail measure when `p` covers the model window, which ARMAX (L >= 10) breaks.
fn criterion_2() -> (Verdict, bool) {
    let mut pass = true;
    let mut expected = true;
    let mut parts = Vec::new();
    for m in built_in() {
        let ok = tsf_with_shift(&m, 2);
        let covered = m.half_width() <= 2;
        // p on [-L, L] must always work
        let wide = tsf_with_shift(&m, m.half_width());
        pass &= ok;
        expected &= ok == covered && wide;
        parts.push(format!("{} [-2,2] {} [-L,L] {}", label(&m), if ok { "ok" } else { "fails" }, if wide { "ok" } else { "fails" }));
    }
    (Verdict::new(pass, parts.join("; ")), expected)
}

fn criterion_3() -> Verdict {
    let n = 1_000_000;
    let mut pass = true;
    let mut parts = Vec::new();
    let cases = [
        (SpectralModel::armax(0.5, 1.0).unwrap(), 0.5, 0.01),
        (SpectralModel::moving_maxima(&[1.0, 1.0], 1.0).unwrap(), 0.5, 0.01),
        (SpectralModel::iid(1.0).unwrap(), 1.0, 0.005),
    ];
    for (m, theta, tol) in cases {
        let tau = NormalizedTau::norm_at_zero(m.alpha());
        let tz = make_tilde_z(&m).unwrap();
        let est: Vec<IndexEstimate> = vec![
            maximal_index_dissipative(&tz, &tau, n, SEED).unwrap(),
            maximal_index_spectral(&m, &tau, n, SEED).unwrap(),
            maximal_index_infargmax(&m, &tau, n, SEED).unwrap(),
            candidate_extremal_index(&m, n, SEED).unwrap(),
        ];
        let worst = est.iter().map(|e| (e.value - theta).abs()).fold(0.0, f64::max);
        pass &= worst <= tol;
        let values: Vec<String> = est.iter().map(|e| format!("{:.4}", e.value)).collect();
        parts.push(format!("{} [{}] max gap {worst:.4}", label(&m), values.join(", ")));
    }
    Verdict::new(pass, parts.join("; "))
}

struct ClosedLoop {
    model: SpectralModel,
    spec: SimulationSpec,
    ens: PathEnsemble,
    theta: IndexEstimate,
}

const BLOCK: usize = 100;

fn simulate_closed_loop(m: &SpectralModel, n_scale: usize) -> (SimulationSpec, PathEnsemble) {
    let tz = make_tilde_z(m).unwrap();
    let horizon = 100_000;
    let u_min = 0.05 * (BLOCK as f64).powf(1.0 / m.alpha());
    let n = default_n_per_shift(&tz, horizon, u_min, CERT_TOLERANCE).unwrap() * n_scale;
    let spec = SimulationSpec {
        horizon,
        replicates: 20,
        n_per_shift: n,
        u_min,
        tolerance: CERT_TOLERANCE,
        seed: SEED,
        m: None,
        first_replicate: 0,
    };
    let ens = simulate_ensemble(&tz, &spec).unwrap();
    (spec, ens)
}

fn criterion_4() -> (Verdict, Vec<ClosedLoop>) {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut runs = Vec::new();
    for m in [SpectralModel::armax(0.5, 1.0).unwrap(), SpectralModel::moving_maxima(&[1.0, 1.0], 1.0).unwrap()] {
        let t = Instant::now();
        let (spec, ens) = simulate_closed_loop(&m, 1);
        let theta = blocks_extremal_index(&ens, m.alpha(), &HMap::Norm, BLOCK, SEED).unwrap();
        let dt = t.elapsed();
        let exact = m.extremal_index_exact().unwrap();
        let ok = (theta.value - exact).abs() <= 0.05 && dt < Duration::from_secs(300);
        pass &= ok;
        parts.push(format!("{} {:.4} ± {:.4} vs {exact} ({:.1}s)", label(&m), theta.value, theta.se, dt.as_secs_f64()));
        runs.push(ClosedLoop { model: m, spec, ens, theta });
    }
    (Verdict::new(pass, parts.join("; ")), runs)
}

/// The path part uses the iid model: KS critical values assume independent
/// radii, and clustered exceedances repeat radii.
fn criterion_5() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in built_in() {
        let ks = local_tail_radius_check(&m, 100_000, SEED, KS_LEVEL).unwrap();
        pass &= !ks.rejected;
        parts.push(format!("local {} D={:.4}", label(&m), ks.statistic));
    }

    // 1e8 iid observations in batches, for about 1e5 exceedances of the 0.999 quantile
    let m = SpectralModel::iid(1.0).unwrap();
    let tz = make_tilde_z(&m).unwrap();
    let (horizon, per_batch, batches) = (1_000_000usize, 5usize, 20u64);
    let u_min = 0.05 * (BLOCK as f64).powf(1.0 / m.alpha());
    let n = default_n_per_shift(&tz, horizon, u_min, CERT_TOLERANCE).unwrap();
    // provisional threshold well below the Fréchet 0.999 quantile
    let q: f64 = 0.999;
    let provisional = 0.8 * (-q.ln()).powf(-1.0 / m.alpha());
    let mut law = None;
    let mut top: Vec<f64> = Vec::new();
    let mut total = 0usize;
    for b in 0..batches {
        let spec = SimulationSpec {
            horizon,
            replicates: per_batch,
            n_per_shift: n,
            u_min,
            tolerance: CERT_TOLERANCE,
            seed: SEED,
            m: None,
            first_replicate: b * per_batch as u64,
        };
        let ens = simulate_ensemble(&tz, &spec).unwrap();
        total += ens.all_norms().len();
        top.extend(ens.all_norms().iter().copied().filter(|&x| x > provisional));
        let part = collect_exceedances(&ens, TailKind::Tail, provisional, 0).unwrap();
        match law.as_mut() {
            None => law = Some(part),
            Some(l) => l.merge(part).unwrap(),
        }
    }
    // the q-quantile of all norms from the ones above the provisional level
    let below = total - top.len();
    let pos = q * (total - 1) as f64;
    assert!(pos.floor() as usize >= below, "provisional threshold too high");
    let shifted = (pos - below as f64) / (top.len() - 1) as f64;
    let u = quantile(&top, shifted).unwrap();
    let law = law.unwrap();
    let radii: Vec<f64> = law.radii().iter().map(|r| r * provisional / u).filter(|&r| r > 1.0).collect();
    let ks = pareto_ks(&radii, m.alpha(), KS_LEVEL).unwrap();
    pass &= !ks.rejected;
    parts.push(format!(
        "paths iid u={u:.1} over {} exceedances D={:.5} vs {:.5}",
        radii.len(),
        ks.statistic,
        kolmogorov_critical(KS_LEVEL) / (radii.len() as f64).sqrt()
    ));
    Verdict::new(pass, parts.join("; "))
}

fn short_ensemble(m: &SpectralModel, replicates: usize, first: u64) -> PathEnsemble {
    let tz = make_tilde_z(m).unwrap();
    let horizon = 100;
    let u_min = 0.05;
    let spec = SimulationSpec {
        horizon,
        replicates,
        n_per_shift: default_n_per_shift(&tz, horizon, u_min, CERT_TOLERANCE).unwrap(),
        u_min,
        tolerance: CERT_TOLERANCE,
        seed: SEED,
        m: None,
        first_replicate: first,
    };
    simulate_ensemble(&tz, &spec).unwrap()
}

fn criterion_6() -> Verdict {
    let group = 8;
    let lags = 40;
    let mut reports: Vec<(String, LagKsReport)> = Vec::new();
    let scalar = SpectralModel::armax(0.5, 1.0).unwrap();
    let vector = SpectralModel::from_spec(
        &ModelSpec::Armax { phi: 0.5 },
        1.0,
        ConeSpace::real(2, VectorNorm::Euclidean).unwrap(),
        AngularLaw::Gaussian,
        None,
    )
    .unwrap();
    for (m, singles_n, groups) in [(&scalar, 2000, 1000), (&vector, 1000, 500)] {
        let singles = short_ensemble(m, singles_n, 0);
        // disjoint replicate streams keep the pooled paths independent of the singles
        let pool = short_ensemble(m, group * groups, singles_n as u64);
        let a = m.alpha();
        let name = if m.space().dim() > 1 { "R^2" } else { "R+" };
        reports.push((format!("{name} stationarity"), stationarity_check(&singles, lags, KS_LEVEL).unwrap()));
        reports.push((format!("{name} max-stability"), max_stability_check(&singles, &pool, group, a, lags, KS_LEVEL).unwrap()));
        reports.push((format!("{name} odot"), odot_stability_check(&singles, &pool, group, a, lags, KS_LEVEL).unwrap()));
    }
    let pass = reports.iter().all(|(_, r)| r.pass);
    let parts: Vec<String> = reports
        .iter()
        .map(|(n, r)| format!("{n} {:.3} of {}", r.share_not_rejected, r.tests.len()))
        .collect();
    Verdict::new(pass, parts.join("; "))
}

fn criterion_7() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in built_in() {
        let l = m.half_width();
        let r = cross_construction_agreement(&m, &default_weights(&m), &WeightSeq::uniform(l), &default_probes(l), 100_000, SEED, DEFAULT_Z)
            .unwrap();
        pass &= r.pass && r.probes.len() == 4;
        let z = r.probes.iter().map(|p| p.max_z).fold(0.0, f64::max);
        parts.push(format!("{} max {z:.2} SE", label(&m)));
    }
    Verdict::new(pass, parts.join("; "))
}

fn criterion_8() -> Verdict {
    let ns: Vec<usize> = (1..=1000).collect();
    let rows = smith_weissman_check(&[1u64, 2], &ns).unwrap();
    let bad: Vec<usize> = rows.iter().filter(|r| r.block_sum != 2 * r.n as u64 + 1).map(|r| r.n).collect();
    Verdict::new(bad.is_empty() && rows.len() == 1000, format!("block sums equal 2n + 1 for n = 1..1000; {} mismatches", bad.len()))
}

/// Halve the particle count from twice the certified stack size to the
/// certified one. The index estimators of criterion 3 sample spectral
/// processes directly and have no particle count.
fn criterion_9(runs: &[ClosedLoop]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for run in runs {
        let m = &run.model;
        let tz = make_tilde_z(m).unwrap();
        let spec = SimulationSpec { n_per_shift: 2 * run.spec.n_per_shift, ..run.spec };
        let full = simulate_ensemble(&tz, &spec).unwrap();
        let theta = blocks_extremal_index(&full, m.alpha(), &HMap::Norm, BLOCK, SEED).unwrap();
        let drift = (theta.value - run.theta.value).abs();
        let certified = run.spec.replicates as f64 * (full.meta.truncation_bound + run.ens.meta.truncation_bound);
        let noise = DEFAULT_Z * (theta.se * theta.se + run.theta.se * run.theta.se).sqrt();
        // the certificate covers values above u_min; smaller ones may move with N
        let u_min = run.spec.u_min;
        let moved: usize = (0..full.replicates)
            .map(|r| {
                let (a, b) = (full.norms(r), run.ens.norms(r));
                a.iter().zip(b).filter(|(x, y)| x != y && x.max(**y) >= u_min).count()
            })
            .sum();
        pass &= drift <= certified + noise && (moved == 0 || certified >= 1.0);
        parts.push(format!(
            "{} N {}->{} drift {drift:.2e} vs {certified:.1e} + {noise:.1e}, {moved} values above u_min moved",
            label(m),
            spec.n_per_shift,
            run.spec.n_per_shift,
        ));
    }
    Verdict::new(pass, parts.join("; "))
}

fn criterion_10() -> Verdict {
    let cfg = validate_config("seed = 20240611\n[model]\nkind = \"armax\"\nphi = 0.5\nalpha = 1.0\n").unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut reports = Vec::new();
    for d in &dirs {
        let out = run(&cfg, &Stage::ALL).unwrap();
        out.write(d.path()).unwrap();
        reports.push(std::fs::read(d.path().join("report.json")).unwrap());
    }
    let same = reports[0] == reports[1];
    let artifacts = ["paths.csv", "tail_law.csv", "indices.json"]
        .iter()
        .all(|f| std::fs::read(dirs[0].path().join(f)).unwrap() == std::fs::read(dirs[1].path().join(f)).unwrap());
    Verdict::new(same && artifacts, format!("report.json {} bytes, identical: {same}; artifacts identical: {artifacts}", reports[0].len()))
}

struct Suite {
    filters: Vec<String>,
    unexpected: Vec<usize>,
}

impl Suite {
    fn wanted(&self, n: usize) -> bool {
        self.filters.is_empty() || self.filters.iter().any(|f| format!("criterion_{n}").contains(f.as_str()))
    }

    fn emit(&mut self, n: usize, v: Verdict, expected: bool, t: Instant) {
        let status = if v.pass { "PASS" } else { "FAIL" };
        let note = if v.pass == expected { "" } else { " [UNEXPECTED]" };
        println!("criterion {n}: {status}{note} ({:.1}s) {}", t.elapsed().as_secs_f64(), v.detail);
        if v.pass != expected {
            self.unexpected.push(n);
        }
    }

    fn run(&mut self, n: usize, f: impl FnOnce() -> Verdict) {
        if self.wanted(n) {
            let t = Instant::now();
            let v = f();
            self.emit(n, v, true, t);
        }
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let filters = args.into_iter().filter(|a| !a.starts_with('-')).collect();
    let mut suite = Suite { filters, unexpected: Vec::new() };

    suite.run(1, criterion_1);
    if suite.wanted(2) {
        let t = Instant::now();
        let (v, documented) = criterion_2();
        // the stated shift range covers the window of every model only if all L <= 2
        let covered = built_in().iter().all(|m| m.half_width() <= 2);
        let expected = if documented { covered } else { !v.pass };
        let detail = format!("{}; matches the window analysis: {documented}", v.detail);
        suite.emit(2, Verdict::new(v.pass, detail), expected, t);
    }
    suite.run(3, criterion_3);
    let mut runs = Vec::new();
    if suite.wanted(4) || suite.wanted(9) {
        let t = Instant::now();
        let (v, r) = criterion_4();
        runs = r;
        if suite.wanted(4) {
            suite.emit(4, v, true, t);
        }
    }
    suite.run(5, criterion_5);
    suite.run(6, criterion_6);
    suite.run(7, criterion_7);
    suite.run(8, criterion_8);
    suite.run(9, || criterion_9(&runs));
    suite.run(10, criterion_10);
    if !suite.unexpected.is_empty() {
        eprintln!("unexpected outcomes for criteria {:?}", suite.unexpected);
        std::process::exit(1);
    }
}
