mod common;

use semibayes::diagnostics::{GramSummary, RateConstants, SearchConfig};
use semibayes::lab::*;
use semibayes::rng::seeded;
use semibayes::sampler::{InitStrategy, McmcConfig};
use semibayes::Error;

fn scenario(n: usize, p: usize, s0: usize) -> Scenario {
    Scenario {
        n,
        p,
        s0,
        design: DesignFamily::Rademacher,
        eta0: Eta0Spec::Bimodal,
        magnitude: MagnitudeRule::Constant(2.0),
        l: 1.0,
    }
}

fn generate(sc: &Scenario, seed: u64) -> Generated {
    generate_scenario(
        sc,
        &RateConstants::default(),
        &SearchConfig::default(),
        &mut seeded(seed),
    )
    .unwrap()
}

#[test]
fn rademacher_gram_has_unit_diagonal() {
    let g = generate(&scenario(37, 9, 3), 1);
    let gram = GramSummary::from_design(g.data.x());
    for j in 0..9 {
        assert_eq!(gram.sigma()[(j, j)], 1.0);
    }
    assert_eq!(g.clip_rate, 0.0);
}

#[test]
fn constant_magnitudes_and_support() {
    let sc = Scenario {
        magnitude: MagnitudeRule::Constant(0.7),
        ..scenario(30, 12, 4)
    };
    let g = generate(&sc, 2);
    let t = &g.data.truth().unwrap().theta0;
    assert_eq!(t.len(), 4);
    assert_eq!(t.min_abs(), Some(0.7));
    assert!(t.values().iter().all(|v| v.abs() == 0.7));
    let zero = Scenario {
        magnitude: MagnitudeRule::Constant(0.0),
        ..sc
    };
    assert!(generate(&zero, 2).data.truth().unwrap().theta0.is_empty());
}

#[test]
fn residual_variance_matches_mixture_variance() {
    let sc = Scenario {
        design: DesignFamily::Uniform,
        l: 2.0,
        ..scenario(10_000, 3, 2)
    };
    let g = generate(&sc, 3);
    let truth = g.data.truth().unwrap();
    assert!(g.data.max_abs_x() <= 2.0);
    let r = g.data.residuals(&truth.theta0).unwrap();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // sum w (z^2 + sigma^2) and the fourth moment sum w (z^4 + 6 z^2 s^2 + 3 s^4)
    let (z, s): (f64, f64) = (2.0, 0.8);
    let v = z * z + s * s;
    let m4 = z.powi(4) + 6.0 * z * z * s * s + 3.0 * s.powi(4);
    let se = ((m4 - v * v) / n).sqrt();
    assert!((truth.eta0.variance() - v).abs() < 1e-12);
    assert!((var - v).abs() < 3.0 * se, "{var} vs {v} (se {se})");
}

#[test]
fn equicorrelated_design_is_clipped_and_reported() {
    let sc = Scenario {
        design: DesignFamily::Equicorrelated { rho: 0.5 },
        l: 1.5,
        ..scenario(200, 10, 2)
    };
    let g = generate(&sc, 4);
    assert!(g.data.max_abs_x() <= 1.5);
    // P(|N(0,1)| > 1.5) = 0.1336
    assert!(
        (g.clip_rate - 0.1336).abs() < 0.02,
        "clip rate {}",
        g.clip_rate
    );
    let gram = GramSummary::from_design(g.data.x());
    let off = (0..10)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| gram.sigma()[(i, j)])
        .sum::<f64>()
        / 45.0;
    assert!(off > 0.3, "mean correlation {off}");
}

#[test]
fn infeasible_scenarios_are_rejected() {
    let bad = scenario(10, 3, 4);
    let err = generate_scenario(
        &bad,
        &RateConstants::default(),
        &SearchConfig::default(),
        &mut seeded(1),
    )
    .unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)));
    let narrow = Scenario {
        l: 0.5,
        ..scenario(10, 3, 1)
    };
    assert!(narrow.validate().is_err());
}

#[test]
fn beta_min_multiple_sets_magnitudes_from_the_design() {
    let sc = Scenario {
        magnitude: MagnitudeRule::BetaMinMultiple(5.0),
        ..scenario(60, 12, 2)
    };
    let g = generate(&sc, 5);
    let (t, psi) = g.threshold.unwrap();
    assert!(psi.value > 0.0);
    let min = g.data.truth().unwrap().theta0.min_abs().unwrap();
    assert!((min - 5.0 * t).abs() < 1e-12);
}

#[test]
fn scenarios_are_deterministic_per_seed() {
    let sc = scenario(20, 6, 2);
    let a = generate(&sc, 9);
    let b = generate(&sc, 9);
    assert_eq!(a.data.x(), b.data.x());
    assert_eq!(a.data.y(), b.data.y());
    assert_ne!(generate(&sc, 10).data.y(), a.data.y());
}

fn tiny_grid(cells: Vec<Scenario>, replicates: usize) -> Grid {
    serde_json::from_value(serde_json::json!({
        "cells": cells,
        "replicates": replicates,
        "seed": 11,
        "mcmc": {"iters": 400, "burnin": 100},
        "prior": {"K": 8},
        "hellinger_draws": 20
    }))
    .unwrap()
}

#[test]
fn grid_json_shape() {
    let g: Grid = serde_json::from_str(
        r#"{"cells":[{"n":50,"p":20,"s0":2,"design":"rademacher","eta0":"gaussian"},
                     {"n":50,"p":20,"s0":2,"design":{"equicorrelated":{"rho":0.3}},"eta0":"bimodal","l":3.0,
                      "magnitude":{"beta_min_multiple":5.0}}],
            "replicates":2,"mcmc":{"iters":100,"burnin":10},"seed":3}"#,
    )
    .unwrap();
    assert_eq!(g.cells[1].design, DesignFamily::Equicorrelated { rho: 0.3 });
    assert_eq!(g.cells[1].magnitude, MagnitudeRule::BetaMinMultiple(5.0));
    assert_eq!(g.mcmc.iters, 100);
    assert!(serde_json::from_str::<Grid>(r#"{"cells":[],"replicates":1,"bogus":1}"#).is_err());
}

#[test]
fn dimension_report_histograms_and_determinism() {
    let grid = tiny_grid(vec![scenario(40, 16, 2)], 2);
    let a = run_dimension_experiment(&grid).unwrap();
    let b = run_dimension_experiment(&grid).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records.len(), 2);
    for r in &a.records {
        let total: f64 = r
            .metrics
            .iter()
            .filter(|(k, _)| k.starts_with("s_prob_"))
            .map(|(_, v)| v)
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (k, v) in &r.metrics {
            assert!(v.is_finite(), "{k}");
        }
        assert!(r.metrics["mass_s_gt_3s0"] <= r.metrics["mass_s_gt_1.5s0"]);
    }
}

#[test]
fn pure_noise_puts_mass_on_the_empty_model() {
    let sc = Scenario {
        magnitude: MagnitudeRule::Constant(0.0),
        eta0: Eta0Spec::Gaussian,
        ..scenario(300, 20, 2)
    };
    let mut grid = tiny_grid(vec![sc], 1);
    grid.mcmc.iters = 2000;
    grid.mcmc.burnin = 500;
    let rep = run_dimension_experiment(&grid).unwrap();
    let m = &rep.records[0].metrics;
    assert!(m["s_prob_000"] > 0.8, "{m:?}");
    let sel = run_selection_experiment(&grid).unwrap();
    // the target support is the empty model
    assert!((sel.records[0].metrics["post_s0"] - m["s_prob_000"]).abs() < 1e-12);
}

#[test]
fn contraction_metrics_are_consistent() {
    let grid = tiny_grid(vec![scenario(100, 30, 2), scenario(25, 30, 2)], 1);
    let rep = run_contraction_experiment(&grid).unwrap();
    let (a, b) = (&rep.records[0].metrics, &rep.records[1].metrics);
    assert!((b["env_l1"] / a["env_l1"] - 2.0).abs() < 1e-12);
    assert!((b["env_l2"] / a["env_l2"] - 2.0).abs() < 1e-12);
    for m in [a, b] {
        assert!(m["q90_l2"] <= m["q90_l1"] + 1e-12);
        assert!(m["q90_hellinger"] >= 0.0 && m["q90_hellinger"] <= 2f64.sqrt());
        assert!(m["psi_s0"] <= m["phi_s0"] + 1e-12);
        assert_eq!(m["certificates_exact"], 1.0);
    }
}

#[test]
fn selection_probabilities_are_probabilities() {
    let sc = Scenario {
        magnitude: MagnitudeRule::BetaMinMultiple(5.0),
        ..scenario(80, 20, 2)
    };
    let rep = run_selection_experiment(&tiny_grid(vec![sc], 2)).unwrap();
    for r in &rep.records {
        let m = &r.metrics;
        assert!((0.0..=1.0).contains(&m["post_s0"]));
        assert!(m["post_s0"] + m["post_strict_superset"] <= 1.0 + 1e-12);
        assert_eq!(m["beta_min_ok"], 1.0);
        assert!(m["magnitude"] > m["beta_min_threshold"]);
    }
}

#[test]
fn bvm_metrics_and_self_tv() {
    let sc = Scenario {
        eta0: Eta0Spec::Gaussian,
        ..scenario(100, 10, 2)
    };
    let rep = run_bvm_experiment(&tiny_grid(vec![sc], 1)).unwrap();
    let m = &rep.records[0].metrics;
    assert!(
        m["weight_tv"].abs() < 1e-12,
        "weights are copied from the chain"
    );
    assert!(m["tv_surrogate"] >= 0.0 && m["hat_w_tv"] <= 1.0);
    let fit = fit_replicate(&rep.grid, 0, 0).unwrap();
    let w = semibayes::sampler::merged_model_weights(&fit.chains).unwrap();
    assert_eq!(w.total_variation(&w), 0.0);
}

#[test]
fn evidence_collection_contents() {
    let c = evidence_collection(&[1, 3], 5, vec![vec![0, 1, 3, 4], vec![1], vec![2, 3]]);
    assert_eq!(
        c,
        vec![
            vec![0, 1, 3],
            vec![0, 1, 3, 4],
            vec![1, 2, 3],
            vec![1, 3],
            vec![1, 3, 4]
        ]
    );
}

#[test]
fn reports_round_trip() {
    let grid = tiny_grid(vec![scenario(30, 8, 1), scenario(40, 8, 1)], 2);
    let rep = run_dimension_experiment(&grid).unwrap();
    let mut json = Vec::new();
    write_report(&rep, &mut json, ReportFormat::Json).unwrap();
    let text = String::from_utf8(json.clone()).unwrap();
    assert!(text.contains("\"schema_version\": 1"));
    assert_eq!(read_report_json(json.as_slice()).unwrap(), rep);
    let mut csv = Vec::new();
    write_report(&rep, &mut csv, ReportFormat::Csv).unwrap();
    let text = String::from_utf8(csv.clone()).unwrap();
    assert_eq!(text.lines().count(), 1 + rep.metric_count());
    assert!(text.starts_with(
        "schema_version,experiment,cell,replicate,seed,n,p,s0,design,eta0,metric,value"
    ));
    assert_eq!(read_report_csv(csv.as_slice()).unwrap(), rep.records);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    emit_report(&rep, &path, ReportFormat::Json).unwrap();
    assert_eq!(
        read_report_json(std::fs::File::open(&path).unwrap()).unwrap(),
        rep
    );
}

#[test]
fn experiment_names_parse() {
    assert_eq!(
        "bvm".parse::<ExperimentKind>().unwrap(),
        ExperimentKind::Bvm
    );
    assert!("nonsense".parse::<ExperimentKind>().is_err());
    assert_eq!(quantile(&[3.0, 1.0, 2.0, 4.0], 0.5), 2.5);
    assert_eq!(median(&[5.0, 1.0, 3.0]), 3.0);
}

#[test]
fn empty_init_is_accepted_in_grids() {
    let mut grid = tiny_grid(vec![scenario(30, 8, 1)], 1);
    grid.mcmc = McmcConfig {
        init: InitStrategy::Empty,
        ..grid.mcmc
    };
    assert!(run_dimension_experiment(&grid).is_ok());
}

fn argmax(weights: &std::collections::BTreeMap<Vec<usize>, f64>) -> Vec<usize> {
    weights
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0
        .clone()
}

#[test]
fn joint_rescaling_leaves_the_selected_support_unchanged() {
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use semibayes::model::{Dataset, SymmetricNormalMixture};
    use semibayes::priors::PriorConfig;
    use semibayes::sampler::{model_weights, run_mcmc};

    let mut rng = seeded(41);
    let n = 30;
    let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..n)
        .map(|i| 0.9 * x[(i, 0)] + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let base = PriorConfig {
        dim_prior_a: 0.2,
        ..Default::default()
    };
    let fit = |c: f64| {
        let data = Dataset::new(x.clone(), y.iter().map(|v| c * v).collect()).unwrap();
        let prior = PriorConfig {
            lambda: base.lambda / c,
            ..base.clone()
        };
        let oracle = common::two_dim_oracle(data.x(), data.y(), c, &prior, 4.0 * c);
        let mcmc = McmcConfig {
            iters: 20_000,
            burnin: 500,
            init: InitStrategy::Empty,
            fixed_eta: Some(SymmetricNormalMixture::gaussian(c).unwrap()),
            ..Default::default()
        };
        let chain = run_mcmc(&data, &prior, &mcmc, &mut seeded(42), 42).unwrap();
        (oracle, model_weights(&chain).unwrap().entries().clone())
    };
    let (oracle1, mcmc1) = fit(1.0);
    for c in [0.25, 4.0] {
        let (oracle_c, mcmc_c) = fit(c);
        for (s, w) in &oracle1 {
            assert!((w - oracle_c[s]).abs() < 1e-9, "c = {c}, support {s:?}");
        }
        assert_eq!(argmax(&mcmc_c), argmax(&oracle1), "c = {c}");
    }
    assert_eq!(argmax(&mcmc1), argmax(&oracle1));
    assert_eq!(argmax(&oracle1), vec![0]);
}
