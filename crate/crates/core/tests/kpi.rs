use multiplex_core::kinetics::PopulationHyperparams;
use multiplex_core::kpi::{
    evaluate, sweep, write_kpi_csv, write_kpi_json, write_sweep_csv, EvaluationPlan, KpiError, Metric, SweepAxis,
    SweepGrid, KPI_COLUMNS,
};
use multiplex_core::outbreak::PathogenProfile;
use multiplex_core::strategies::StrategyKind::{self, *};
use multiplex_core::testmodels::{LfdModel, PcrModel};

fn hyper() -> PopulationHyperparams {
    PopulationHyperparams {
        mu_p: 9f64.ln(),
        sigma_p: 0.2,
        alpha_i2p: 5.0,
        beta_i2p: 1.25,
        alpha_p2c: 6.0,
        beta_p2c: 1.0,
        sigma_obs: 0.5,
    }
}

fn reference_lfd() -> LfdModel {
    LfdModel::new(-10.0, 2.0, 0.0).unwrap()
}

fn plan(strategies: Vec<StrategyKind>, draws: usize, reps: usize, seed: u64) -> EvaluationPlan {
    EvaluationPlan {
        strategies,
        n_posterior_draws: draws,
        n_replicates: reps,
        master_seed: seed,
        ..Default::default()
    }
}

// rho solves rho = 0.33 exp(1.5 (rho - 1)); computed independently.
const RHO: f64 = 0.083_451_908;

#[test]
fn certain_lfd_detects_all_but_silent_outbreaks() {
    // Long clearance keeps every case shedding at onset; LFD intercept 50 makes it certain.
    let long = PopulationHyperparams { alpha_p2c: 400.0, beta_p2c: 1.0, ..hyper() };
    let lfd = LfdModel::new(50.0, 1.0, 0.0).unwrap();
    let posterior = vec![long; 10];
    let table = evaluate(&plan(vec![AllLfd], 10, 10_000, 17), &posterior, &lfd, &PcrModel::default()).unwrap();
    let p = table.summary(AllLfd, Metric::DetectionProbability).unwrap();
    let silent = table.summary(AllLfd, Metric::AllAsymptomaticFraction).unwrap();
    // binomial se over 1e5 outbreaks ≈ 0.00087
    assert!((p.mean - (1.0 - RHO)).abs() < 0.004, "{}", p.mean);
    assert!((p.mean + silent.mean - 1.0).abs() < 1e-12);
    assert_eq!(table.summary(AllLfd, Metric::LfdTests).unwrap().mean, 1.0);
}

#[test]
fn bitwise_reproducible_and_independent_of_worker_count() {
    let posterior = vec![hyper(); 8];
    let p = plan(StrategyKind::ALL.to_vec(), 8, 1, 3);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| evaluate(&p, &posterior, &reference_lfd(), &PcrModel::default()).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_kpi_csv(&a, &mut ca).unwrap();
    write_kpi_csv(&run(3), &mut cb).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn pairing_gives_per_draw_dominance() {
    let posterior: Vec<_> = (0..20)
        .map(|i| PopulationHyperparams { mu_p: 1.5 + 0.05 * i as f64, ..hyper() })
        .collect();
    let table =
        evaluate(&plan(vec![AllLfd, Concurrent, LfdRetestPcrIfAllNeg], 20, 100, 5), &posterior, &reference_lfd(), &PcrModel::default())
            .unwrap();
    let base = table.strategy(AllLfd).unwrap().draw_level(Metric::DetectionProbability);
    for other in [Concurrent, LfdRetestPcrIfAllNeg] {
        let v = table.strategy(other).unwrap().draw_level(Metric::DetectionProbability);
        for (a, b) in base.iter().zip(&v) {
            assert!(b.unwrap() >= a.unwrap());
        }
    }
}

#[test]
fn standard_error_shrinks_with_replicates() {
    let posterior = vec![hyper(); 400];
    let sd = |reps: usize| {
        let t = evaluate(&plan(vec![AllLfd], 400, reps, 11), &posterior, &reference_lfd(), &PcrModel::default()).unwrap();
        let v: Vec<f64> = t.strategies[0].draw_level(Metric::DetectionProbability).into_iter().flatten().collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let ratio = sd(100) / sd(50);
    assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.2 * std::f64::consts::FRAC_1_SQRT_2, "{ratio}");
}

#[test]
fn metric_domains_and_conditioning() {
    let posterior = vec![hyper(); 5];
    let t = evaluate(&plan(StrategyKind::ALL.to_vec(), 5, 200, 1), &posterior, &reference_lfd(), &PcrModel::default())
        .unwrap();
    for s in &t.strategies {
        for m in [Metric::DetectionProbability, Metric::UndetectedGivenFiveSymptomatic, Metric::AllAsymptomaticFraction] {
            if let Some(x) = s.summary(m) {
                assert!((0.0..=1.0).contains(&x.lower) && (0.0..=1.0).contains(&x.upper));
            }
        }
        let confirm = s.summary(Metric::TimeConfirmation).is_some();
        assert_eq!(confirm, s.strategy == LfdConfirmPcr);
    }
    let fp = t.summary(LfdConfirmPcr, Metric::TimeFirstPositive).unwrap().mean;
    let tc = t.summary(LfdConfirmPcr, Metric::TimeConfirmation).unwrap().mean;
    assert!(tc >= fp);
}

#[test]
fn too_few_draws_is_an_error() {
    let err = evaluate(&plan(vec![AllLfd], 10, 1, 0), &[hyper(); 3], &reference_lfd(), &PcrModel::default()).unwrap_err();
    assert!(matches!(err, KpiError::NotEnoughDraws { requested: 10, available: 3 }));
}

#[test]
fn sweep_cells_and_long_csv() {
    let base = EvaluationPlan { pathogen: PathogenProfile::flu_a(), ..plan(vec![AllLfd, AllPcr], 4, 50, 9) };
    let res = sweep(&base, &SweepGrid::with_defaults(SweepAxis::LfdShift), &[hyper(); 4], &reference_lfd(), &PcrModel::default())
        .unwrap();
    assert_eq!(res.cells.len(), 3);
    let mut buf = Vec::new();
    write_sweep_csv(&res, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), KPI_COLUMNS.join(","));
    assert_eq!(lines.count(), 3 * 2 * Metric::ALL.len());
    assert!(text.contains("lfd_shift,-1,AllLfd,detection_probability"));
    // more sensitive LFD detects at least as often
    let p: Vec<f64> = res.cells.iter().map(|c| c.table.summary(AllLfd, Metric::DetectionProbability).unwrap().mean).collect();
    assert!(p[2] >= p[0]);

    let mut json = Vec::new();
    write_kpi_json(&res.cells[0].table, &mut json).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(v["schema_version"], 1);

    let bad = SweepGrid { axis: SweepAxis::R0, values: vec![] };
    assert!(sweep(&base, &bad, &[hyper(); 4], &reference_lfd(), &PcrModel::default()).is_err());
}
