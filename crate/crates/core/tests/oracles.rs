//! Monte Carlo estimators checked against values computed independently here:
//! enumeration over the finite randomness of ARMAX and moving maxima spectral
//! processes, closed forms, and high-precision constants.

use tailproc::cone::{TauFunctional, WeightSeq};
use tailproc::estimators::{radius_angle_dependence, EmpiricalTailLaw, TailKind};
use tailproc::indices::{
    anti_clustering_diagnostic, m_dep_ratio_index, maximal_index_limit, maximal_index_spectral, HMap, NormalizedTau,
};
use tailproc::particles::{
    build_pool_moving_shift, construct_x_argmax, default_n_per_shift, m_dependent_path, poisson_excess_mean,
    simulate_ensemble, truncation_bound, truncation_series, SimulationSpec,
};
use tailproc::spectral::{default_family, SpectralModel};
use tailproc::tail_measure::{
    check_tsf, cross_construction_agreement, default_probes, default_weights, make_tilde_z, make_z_from_tilde_z,
    ShiftLaw,
};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

/// Law of the backward run length `K` of an ARMAX spectral process as drawn on
/// a window of half-width `l`: geometric with ratio `rho`, lumped at `l + 1`.
fn armax_k_law(rho: f64, l: i64) -> Vec<(i64, f64)> {
    let mut law: Vec<(i64, f64)> = (0..=l).map(|k| (k, (1.0 - rho) * rho.powi(k as i32))).collect();
    law.push((l + 1, rho.powi(l as i32 + 1)));
    law
}

/// `Θ_h^α` for the ARMAX path with run length `k`, on lags `-l..=l`.
fn armax_theta_alpha(phi: f64, alpha: f64, k: i64, l: i64) -> Vec<f64> {
    (-l..=l).map(|h| if h >= -k { phi.powf(h as f64 * alpha) } else { 0.0 }).collect()
}

#[test]
fn certificate_matches_pinned_constants() {
    // reference values from 50-digit arithmetic
    assert!(close(truncation_series(10_040, 200, 1.0, 0.01, 1.0), 9.115_429_712_723_189_6e-15, 1e-9));
    assert!(close(truncation_series(10_040, 60, 1.0, 0.05, 1.0), 2.027_634_989_496_837_9e-9, 1e-9));
    // s = 400 points expected against 300 kept: the bound saturates
    assert_eq!(truncation_series(120, 300, 1.0, 1.0 / 400.0, 1.0), 1.0);
}

#[test]
fn poisson_excess_matches_complement_identity() {
    // E[(P - N)^+] = s - N + Σ_{k<N} (N - k) p_k, summed from the left
    for &(s, n) in &[(5.0, 3u64), (40.0, 30), (400.0, 300), (12.5, 12)] {
        let mut p = (-s as f64).exp();
        let mut left = 0.0;
        for k in 0..n {
            left += (n - k) as f64 * p;
            p *= s / (k + 1) as f64;
        }
        let expected = s - n as f64 + left;
        assert!(close(poisson_excess_mean(s, n), expected, 1e-10), "s={s} n={n}");
    }
}

#[test]
fn pool_certificate_uses_every_stack() {
    let model = SpectralModel::armax(0.5, 1.0).unwrap();
    let tz = make_tilde_z(&model).unwrap();
    let horizon = 10_000;
    let pool = build_pool_moving_shift(&tz, horizon, 200, 0.01, 7, 0).unwrap();
    let cert = truncation_bound(&pool, 0.01).unwrap();
    let stacks = (horizon as i64 + 2 * model.half_width()) as u64;
    assert_eq!(cert.n_stacks, stacks);
    assert!(close(cert.bound, truncation_series(stacks, 200, 1.0, 0.01, 1.0), 1e-12));
}

#[test]
fn armax_spectral_ratio_matches_enumeration() {
    let (phi, alpha) = (0.5, 2.0);
    let model = SpectralModel::armax(phi, alpha).unwrap();
    let l = model.half_width();
    let rho = phi.powf(alpha);
    // sup_h Θ_h^α / Σ_h Θ_h^α over the window
    let exact: f64 = armax_k_law(rho, l)
        .into_iter()
        .map(|(k, p)| {
            let t = armax_theta_alpha(phi, alpha, k, l);
            p * t.iter().copied().fold(0.0, f64::max) / t.iter().sum::<f64>()
        })
        .sum();
    assert!((exact - 0.75).abs() < 1e-5);
    let est = maximal_index_spectral(&model, &NormalizedTau::norm_at_zero(alpha), 200_000, 11).unwrap();
    assert!((est.value - exact).abs() <= 4.0 * est.se + 1e-12, "{} ± {} vs {exact}", est.value, est.se);
}

#[test]
fn armax_m_dependent_ratio_matches_enumeration() {
    let (phi, alpha) = (0.5, 2.0);
    let model = SpectralModel::armax(phi, alpha).unwrap();
    let tz = make_tilde_z(&model).unwrap();
    let l = model.half_width();
    let law = armax_k_law(phi.powf(alpha), l);
    for m in [0, 1, 3, l] {
        let (mut num, mut den) = (0.0, 0.0);
        for &(k, p) in &law {
            let t = armax_theta_alpha(phi, alpha, k, l);
            let mass: f64 = t.iter().sum();
            let inner = &t[(l - m) as usize..=(l + m) as usize];
            num += p * inner.iter().copied().fold(0.0, f64::max) / mass;
            den += p * inner.iter().sum::<f64>() / mass;
        }
        let exact = num / den;
        let est = m_dep_ratio_index(&tz, &HMap::Norm, m, 100_000, 3).unwrap();
        assert!((est.value - exact).abs() <= 4.0 * est.se + 1e-12, "m={m}: {} ± {} vs {exact}", est.value, est.se);
    }
}

#[test]
fn moving_maxima_block_sums_are_exact() {
    let c = [1.0, 0.5, 0.25];
    let alpha = 1.0;
    let model = SpectralModel::moving_maxima(&c, alpha).unwrap();
    let total: f64 = c.iter().map(|x: &f64| x.powf(alpha)).sum();
    let w: Vec<f64> = c.iter().map(|x| x.powf(alpha) / total).collect();
    let ns = [1, 2, 3, 5, 10];
    let report = maximal_index_limit(&model, &NormalizedTau::norm_at_zero(alpha), &ns, 2_000, 5).unwrap();
    for (row, &n) in report.rows.iter().zip(&ns) {
        // u_n = Σ_h max_{0<=k<n} w_{h+k}, the same for every draw of the anchor
        let len = w.len() as i64;
        let u: f64 = (-(n as i64)..len)
            .map(|h| {
                (0..n as i64)
                    .filter_map(|k| usize::try_from(h + k).ok().and_then(|i| w.get(i)))
                    .copied()
                    .fold(0.0, f64::max)
            })
            .sum();
        assert!(close(row.value, u / n as f64, 1e-12), "n={n}: {} vs {}", row.value, u / n as f64);
        assert!(row.se < 1e-12);
    }
    assert!(report.non_increasing);
    assert_eq!(report.subadditivity_violations, 0);
    assert!(close(model.extremal_index_exact().unwrap(), 1.0 / 1.75, 1e-15));
}

#[test]
fn tilt_shift_formula_holds_when_shifts_cover_the_window() {
    for model in [SpectralModel::armax(0.5, 2.0).unwrap(), SpectralModel::moving_maxima(&[1.0, 0.7, 0.2], 1.0).unwrap()] {
        let l = model.half_width();
        let tz = make_tilde_z(&model).unwrap();
        let z = make_z_from_tilde_z(&tz, ShiftLaw::uniform(-l, l).unwrap()).unwrap();
        let hs: Vec<i64> = (-3..=3).collect();
        let report = check_tsf(&z, &default_family(), &hs, 100_000, 13, 4.0).unwrap();
        assert!(report.pass, "{}", model.name());
    }
}

#[test]
fn cross_construction_probes_hit_closed_forms() {
    let (phi, alpha) = (0.5, 1.0);
    let model = SpectralModel::armax(phi, alpha).unwrap();
    let l = model.half_width();
    let rho = phi.powf(alpha);
    let report = cross_construction_agreement(
        &model,
        &default_weights(&model),
        &WeightSeq::uniform(l),
        &default_probes(l),
        100_000,
        17,
        4.0,
    )
    .unwrap();
    assert!(report.pass);
    // the first exceedance in the window sits at -L, or later with no earlier run
    let sup_window = 1.0 + 2.0 * l as f64 * (1.0 - rho);
    let exact = [1.0, 2f64.powf(-alpha), rho, sup_window];
    for (probe, want) in report.probes.iter().zip(exact) {
        for e in &probe.estimates {
            assert!(
                (e.value - want).abs() <= 4.0 * e.se + 1e-3 * want,
                "{} via {}: {} ± {} vs {want}",
                probe.probe,
                e.construction,
                e.value,
                e.se
            );
        }
    }
}

#[test]
fn local_tail_radius_is_independent_of_the_angle() {
    let model = SpectralModel::armax(0.6, 1.5).unwrap();
    let emp = EmpiricalTailLaw::from_model(&model, TailKind::Tail, 2_000, model.half_width(), 19).unwrap();
    for lag in [1, -1] {
        let t = radius_angle_dependence(&emp, lag, 2_000, 99, 0.01, 23).unwrap();
        assert!(t.dcor <= t.null_quantile, "lag {lag}: dcor {} > {}", t.dcor, t.null_quantile);
    }
}

#[test]
fn m_dependent_paths_increase_to_the_full_path() {
    let model = SpectralModel::armax(0.5, 1.0).unwrap();
    let tz = make_tilde_z(&model).unwrap();
    let (horizon, u_min, tol) = (2_000, 0.05, 1e-6);
    let n = default_n_per_shift(&tz, horizon, u_min, tol).unwrap();
    let l = model.half_width();
    let scale = horizon as f64; // a_n = n^{1/α}
    let mut previous_gap = usize::MAX;
    let mut gaps = Vec::new();
    for rep in 0..4 {
        let pool = build_pool_moving_shift(&tz, horizon, n, u_min, 29, rep).unwrap();
        let full = construct_x_argmax(&pool, horizon, tol).unwrap();
        let mut last = vec![0.0; horizon];
        for (i, m) in [0, 1, 2, 4, 8, l].into_iter().enumerate() {
            let xm = m_dependent_path(&pool, m, horizon, tol).unwrap();
            for t in 0..horizon {
                assert!(xm.values[t] <= full.values[t] + 1e-12 && xm.values[t] + 1e-12 >= last[t]);
            }
            last.clone_from(&xm.values);
            let gap = (0..horizon).filter(|&t| full.values[t] - xm.values[t] > 1e-3 * scale).count();
            if rep == 0 {
                gaps.push(gap);
            } else {
                gaps[i] += gap;
            }
            if m == l {
                assert_eq!(xm.values, full.values);
            }
        }
    }
    for g in &gaps {
        assert!(*g <= previous_gap);
        previous_gap = *g;
    }
    assert!(gaps[0] > 0, "{gaps:?}");
}

#[test]
fn armax_paths_have_frechet_margins_and_anti_cluster() {
    let alpha = 1.0;
    let model = SpectralModel::armax(0.5, alpha).unwrap();
    let tz = make_tilde_z(&model).unwrap();
    let (horizon, replicates) = (2_000, 1_000);
    let spec = SimulationSpec {
        horizon,
        replicates,
        n_per_shift: default_n_per_shift(&tz, horizon, 0.05, 1e-6).unwrap(),
        u_min: 0.05,
        tolerance: 1e-6,
        seed: 31,
        m: None,
        first_replicate: 0,
    };
    let ens = simulate_ensemble(&tz, &spec).unwrap();

    // P(‖X_0‖ > x) = 1 - exp(-x^{-α}); the SE comes from per-replicate frequencies
    for x in [0.5, 1.0, 2.0, 5.0, 20.0] {
        let freq: Vec<f64> = (0..replicates)
            .map(|r| ens.norms(r).iter().filter(|&&v| v > x).count() as f64 / horizon as f64)
            .collect();
        let mean = freq.iter().sum::<f64>() / replicates as f64;
        let var = freq.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (replicates - 1) as f64;
        let se = (var / replicates as f64).sqrt();
        let exact = 1.0 - (-x.powf(-alpha)).exp();
        assert!((mean - exact).abs() <= 4.0 * se, "x={x}: {mean} ± {se} vs {exact}");
    }

    let m_values = [1, 2, 4, 8, 16];
    let curve = anti_clustering_diagnostic(&ens, alpha, 1.0, &m_values, 20).unwrap();
    assert!(curve[0].events >= 300, "{}", curve[0].events);
    for pair in curve.windows(2) {
        assert!(pair[1].value <= pair[0].value);
    }
    // two-sided run probability near 2 φ^{mα}, plus unrelated hits in the 2 r_n lags
    assert!(curve[0].value > 0.5, "{curve:?}");
    assert!(curve[3].value < 0.05, "{curve:?}");
}

#[test]
fn sup_weighted_scale_is_exact_for_iid() {
    // an iid spectral process is the unit pulse, so Σ_t τ^α(B^t Θ) = Σ_k q_k^α
    let alpha = 1.5;
    let model = SpectralModel::iid(alpha).unwrap();
    let q = WeightSeq::geometric(4);
    let exact = q.weights().iter().map(|w| w.powf(alpha)).sum::<f64>().powf(1.0 / alpha);
    let tau = NormalizedTau::new(&model, TauFunctional::SupWeighted(q), 10_000, 37).unwrap();
    assert!(close(tau.scale, exact, 1e-12), "{} vs {exact}", tau.scale);
    assert!(tau.scale_se < 1e-12);
}
