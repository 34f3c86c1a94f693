use multiplex_core::kinetics::PopulationHyperparams;
use multiplex_core::outbreak::{simulate_tree, PathogenProfile, SimLimits};
use multiplex_core::seed::{stream, SimRng};
use multiplex_core::strategies::{run_paired, OutbreakView, StrategyKind, StrategyOutcome, TestDraws, PANEL_SIZE};
use multiplex_core::testmodels::{LfdModel, PcrModel};
use proptest::prelude::*;

use StrategyKind::*;

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

fn paired(
    profile: &PathogenProfile,
    seed: u64,
    lfd: &LfdModel,
    pcr: &PcrModel,
) -> (Vec<StrategyOutcome>, f64, usize) {
    let tree = simulate_tree(profile, &hyper(), SimLimits::default(), stream(seed, &[0])).unwrap();
    let draws = TestDraws::sample(&mut stream(seed, &[1]));
    let mut view: OutbreakView<SimRng> = OutbreakView::new(tree);
    let out = run_paired(&mut view, &StrategyKind::ALL, lfd, pcr, &draws);
    let panel = view.panel();
    let first_onset = panel.cases.first().map_or(f64::INFINITY, |c| c.t_onset);
    (out, first_onset, panel.cases.len())
}

/// Every coupling property; returns a description of the first violation.
fn check(out: &[StrategyOutcome], first_onset: f64, tested: usize, turnaround: f64) -> Result<(), String> {
    let get = |k: StrategyKind| out.iter().find(|o| o.kind == k).unwrap();
    let (lfd, pcr, conc, conf, retest) = (get(AllLfd), get(AllPcr), get(Concurrent), get(LfdConfirmPcr), get(LfdRetestPcrIfAllNeg));
    if tested > PANEL_SIZE {
        return Err(format!("{tested} individuals tested"));
    }
    for o in out {
        if o.detected != o.t_first_positive.is_some() {
            return Err(format!("{:?}: detected flag and time disagree", o.kind));
        }
        if o.n_lfd > PANEL_SIZE || o.n_pcr > PANEL_SIZE {
            return Err(format!("{:?}: too many tests", o.kind));
        }
        if o.kind != LfdConfirmPcr && o.confirmation.is_some() {
            return Err(format!("{:?}: confirmation outside LfdConfirmPcr", o.kind));
        }
    }
    if lfd.detected {
        for o in [conc, conf, retest] {
            if !o.detected {
                return Err(format!("AllLfd detected but {:?} did not", o.kind));
            }
        }
        if conf.t_first_positive != lfd.t_first_positive || retest.t_first_positive != lfd.t_first_positive {
            return Err("LFD-first timing differs from AllLfd".into());
        }
        if conc.t_first_positive.unwrap() > lfd.t_first_positive.unwrap() {
            return Err("Concurrent later than AllLfd".into());
        }
    }
    if let Some(c) = conf.confirmation {
        let t = conf.t_first_positive.ok_or("confirmation without detection")?;
        if c.time < t || c.infections < conf.infections_at_first_positive {
            return Err("confirmation precedes first positive".into());
        }
    }
    if let Some(t) = pcr.t_first_positive {
        if t < first_onset + turnaround {
            return Err(format!("AllPcr detection {t} before first onset {first_onset} + turnaround"));
        }
    }
    let five_negatives = !lfd.detected && lfd.had_five_symptomatic;
    if (retest.n_pcr > 0) != five_negatives {
        return Err("retest PCR dispatched without exactly five LFD negatives".into());
    }
    Ok(())
}

fn reference_lfd() -> LfdModel {
    LfdModel::new(-10.0, 2.0, 0.0).unwrap()
}

#[test]
fn coupling_holds_over_ten_thousand_paired_outbreaks() {
    let pcr = PcrModel::default();
    let mut strict_earlier = 0;
    for profile in [PathogenProfile::sars2(), PathogenProfile::flu_a()] {
        for seed in 0..5_000 {
            let (out, first, tested) = paired(&profile, seed, &reference_lfd(), &pcr);
            if let Err(e) = check(&out, first, tested, pcr.turnaround) {
                panic!("seed {seed}: {e}");
            }
            if out[0].detected && out[2].t_first_positive < out[0].t_first_positive {
                strict_earlier += 1;
            }
        }
    }
    // Concurrent can beat AllLfd via an earlier PCR arrival; equality is not an invariant.
    assert!(strict_earlier > 0);
}

#[test]
fn certain_lfd_detects_every_outbreak_with_a_symptomatic_case() {
    let lfd = LfdModel::new(50.0, 1.0, 0.0).unwrap();
    let profile = PathogenProfile { p_asymptomatic: 0.33, ..PathogenProfile::sars2() };
    let hyper_long = PopulationHyperparams { alpha_p2c: 400.0, beta_p2c: 1.0, ..hyper() };
    for seed in 0..2000 {
        let tree = simulate_tree(&profile, &hyper_long, SimLimits::default(), stream(seed, &[])).unwrap();
        let mut view = OutbreakView::new(tree);
        let o = run_paired(&mut view, &[AllLfd], &lfd, &PcrModel::default(), &TestDraws::sample(&mut stream(seed, &[9])))
            .remove(0);
        assert_eq!(o.detected, !o.all_asymptomatic, "seed {seed}");
        if o.detected {
            assert_eq!(o.n_lfd, 1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn coupling_holds_for_arbitrary_test_models(
        b0 in -20.0f64..0.0, b1 in 0.1f64..4.0, shift in -1.0f64..1.0,
        lod in 0.5f64..4.0, sens in 0.5f64..=1.0, turnaround in 0.0f64..4.0,
        r0 in 0.5f64..3.0, p_a in 0.0f64..=1.0, seed in 0u64..1_000_000,
    ) {
        let lfd = LfdModel::new(b0, b1, shift).unwrap();
        let pcr = PcrModel { lod, sensitivity: sens, turnaround };
        let profile = PathogenProfile { r0, p_asymptomatic: p_a, ..PathogenProfile::sars2() };
        for s in 0..20 {
            let (out, first, tested) = paired(&profile, seed * 100 + s, &lfd, &pcr);
            prop_assert!(check(&out, first, tested, turnaround).is_ok(), "{:?}", check(&out, first, tested, turnaround));
        }
    }
}
