//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use multiplex_core::inference::{
    fit, posterior_terms, simulate_dataset, AnchorMode, Dataset, FitConfig, Measurement, ObservationRecord, PriorSet,
    SyntheticDesign,
};
use multiplex_core::kinetics::{PopulationHyperparams, TrajectoryParams};
use multiplex_core::outbreak::{simulate_tree, PathogenProfile, SimLimits, Termination};
use multiplex_core::seed::{stream, SimRng};
use multiplex_core::strategies::{run_paired, OutbreakView, StrategyKind, TestDraws, PANEL_SIZE};
use multiplex_core::testmodels::{LfdModel, PcrModel};
use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

fn truth() -> PopulationHyperparams {
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

type Check = Result<String, String>;

fn trajectory_geometry() -> Check {
    let mut rng = stream(1, &[]);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let peak = rng.random_range(0.5..15.0);
        let rise = rng.random_range(0.1..15.0);
        let decay = rng.random_range(0.1..30.0);
        let f = TrajectoryParams::new(peak, rise, decay).map_err(|e| e.to_string())?;
        let eps = 1e-9 * rise.min(decay);
        let errs = [
            f.concentration(0.0).abs() / peak,
            (f.concentration(rise) - peak).abs() / peak,
            f.concentration(rise + decay).abs() / peak,
            (f.concentration(rise - eps) - f.concentration(rise + eps)).abs() / peak,
        ];
        for (i, e) in errs.iter().enumerate() {
            // the continuity probe moves by up to eps * slope, far below 1e-6
            let tol = if i == 3 { 1e-6 } else { 1e-12 };
            if *e > tol {
                return Err(format!("({peak}, {rise}, {decay}) check {i} error {e:e}"));
            }
            if i < 3 {
                worst = worst.max(*e);
            }
        }
    }
    Ok(format!("10^4 triples, worst relative error {worst:.1e}"))
}

fn moments(dist: &multiplex_core::dist::DelayDistribution, seed: u64) -> (f64, f64) {
    let n = 1_000_000;
    let mut rng = stream(seed, &[]);
    let s = dist.sampler();
    let xs: Vec<f64> = (0..n).map(|_| s.sample(&mut rng)).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var)
}

fn delay_moments() -> Check {
    let (g_mean, g_var) = moments(&PathogenProfile::sars2().generation_time, 2);
    let (i_mean, _) = moments(&PathogenProfile::sars2().incubation, 3);
    let (f_mean, _) = moments(&PathogenProfile::flu_a().generation_time, 4);
    let msg = format!(
        "sars2 generation {g_mean:.3} (var {g_var:.3}), incubation {i_mean:.3}; flu generation {f_mean:.3}"
    );
    let ok = (g_mean - 3.98).abs() <= 0.05
        && (g_var - 8.74).abs() <= 0.3
        && (i_mean - 5.53).abs() <= 0.05
        && (f_mean - 2.67).abs() <= 0.05;
    if ok { Ok(msg) } else { Err(msg) }
}

fn branching_oracles() -> Check {
    let profile = PathogenProfile::sars2();
    let limits = SimLimits { max_infections: 500, max_time: 365.0 };
    let n = 100_000u64;
    let (extinct, silent) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = simulate_tree(&profile, &truth(), limits, stream(3, &[i])).unwrap();
            let any_symptomatic = s.by_ref().fold(false, |acc, r| acc | r.symptomatic);
            let ext = s.termination() == Some(Termination::Extinct);
            (usize::from(ext), usize::from(ext && !any_symptomatic))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let q = extinct as f64 / n as f64;
    let rho = silent as f64 / n as f64;
    let msg = format!("extinct {q:.4} (oracle 0.4172), all-asymptomatic {rho:.4} (oracle 0.0835)");
    if (q - 0.417_188_356).abs() < 0.01 && (rho - 0.083_451_908).abs() < 0.005 { Ok(msg) } else { Err(msg) }
}

fn censored_term() -> Check {
    let traj = TrajectoryParams::new(8.0, 4.0, 8.0).map_err(|e| e.to_string())?;
    let threshold = traj.concentration(2.0);
    let rec = ObservationRecord { case_id: "a".into(), t_anchor: 2.0, measurement: Measurement::Censored };
    let ds = Dataset::new(AnchorMode::Infection, vec![rec], threshold).map_err(|e| e.to_string())?;
    let term = posterior_terms(&ds, &[traj], &[], &truth(), &PriorSet::sars2_mid_turbinate()).censored;
    let err = (term - 0.5f64.ln()).abs();
    let msg = format!("censored term {term} vs ln 0.5, error {err:.1e}");
    if err <= 1e-10 { Ok(msg) } else { Err(msg) }
}

fn mcmc_recovery() -> Check {
    let config = FitConfig { n_chains: 4, n_iterations: 20_000, ..Default::default() };
    let priors = PriorSet::sars2_mid_turbinate();
    let t = truth().to_array();
    // mu_p, alpha_i2p, beta_i2p
    let targets = [0usize, 2, 3];
    let results: Vec<Result<bool, String>> = (0..20u64)
        .into_par_iter()
        .map(|r| {
            let data = simulate_dataset(&truth(), &SyntheticDesign::default(), &mut stream(500 + r, &[0]))
                .map_err(|e| e.to_string())?;
            let post = fit(&data.dataset, &priors, &config, &mut stream(500 + r, &[1])).map_err(|e| e.to_string())?;
            Ok(targets.iter().all(|&i| {
                let col = post.column(i);
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                (mean - t[i]).abs() <= 3.0 * sd
            }))
        })
        .collect();
    let mut hits = 0;
    for r in results {
        hits += usize::from(r?);
    }
    let msg = format!("{hits}/20 replicates recover mu_p, alpha_i2p and beta_i2p within 3 sd");
    if hits >= 18 { Ok(msg) } else { Err(msg) }
}

fn coupling_dominance() -> Check {
    use StrategyKind::*;
    let lfd = LfdModel::new(-10.0, 2.0, 0.0).map_err(|e| e.to_string())?;
    let pcr = PcrModel::default();
    let profile = PathogenProfile::sars2();
    let violations: Vec<String> = (0..10_000u64)
        .into_par_iter()
        .filter_map(|seed| {
            let tree = simulate_tree(&profile, &truth(), SimLimits::default(), stream(seed, &[0])).unwrap();
            let draws = TestDraws::sample(&mut stream(seed, &[1]));
            let mut view: OutbreakView<SimRng> = OutbreakView::new(tree);
            let out = run_paired(&mut view, &StrategyKind::ALL, &lfd, &pcr, &draws);
            let panel = view.panel();
            let first_onset = panel.cases.first().map_or(f64::INFINITY, |c| c.t_onset);
            let get = |k| out.iter().find(|o| o.kind == k).unwrap();
            if get(AllLfd).detected && !get(Concurrent).detected {
                return Some(format!("seed {seed}: AllLfd detected, Concurrent did not"));
            }
            let conf = get(LfdConfirmPcr);
            if let (Some(c), Some(t)) = (conf.confirmation, conf.t_first_positive) {
                if c.time < t {
                    return Some(format!("seed {seed}: confirmation before first positive"));
                }
            }
            if panel.cases.len() > PANEL_SIZE || out.iter().any(|o| o.n_lfd.max(o.n_pcr) > PANEL_SIZE) {
                return Some(format!("seed {seed}: more than {PANEL_SIZE} tested"));
            }
            if let Some(t) = get(AllPcr).t_first_positive {
                if t < first_onset + pcr.turnaround {
                    return Some(format!("seed {seed}: AllPcr detected at {t}, first onset {first_onset}"));
                }
            }
            None
        })
        .collect();
    match violations.first() {
        None => Ok("0 violations over 10^4 paired outbreaks".into()),
        Some(v) => Err(format!("{} violations, first: {v}", violations.len())),
    }
}

fn reference_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reference.toml")
}

fn run_cli(args: &[&str], out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_multiplex"))
        .args(args)
        .arg("--config")
        .arg(reference_config())
        .arg("--out-dir")
        .arg(out)
        .arg("--prior-predictive")
        .env("RUST_LOG", "error")
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() { Ok(()) } else { Err(format!("multiplex {args:?} failed: {status}")) }
}

/// (axis_value, strategy, metric) -> mean, from a long KPI CSV.
fn read_means(path: &Path) -> Result<HashMap<(String, String, String), f64>, String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let mut out = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| e.to_string())?;
        if let Ok(mean) = row[5].parse::<f64>() {
            out.insert((row[2].to_string(), row[3].to_string(), row[4].to_string()), mean);
        }
    }
    Ok(out)
}

fn column(means: &HashMap<(String, String, String), f64>, strategy: &str, metric: &str) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = means
        .iter()
        .filter(|((_, s, m), _)| s == strategy && m == metric)
        .map(|((x, _, _), y)| (x.parse().unwrap(), *y))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

fn qualitative_orderings(dir: &Path) -> Check {
    let mut failures = Vec::new();
    let mut notes = Vec::new();

    run_cli(&["simulate"], dir)?;
    let kpi = read_means(&dir.join("kpi.csv"))?;
    let t = |s: &str| kpi[&(String::new(), s.to_string(), "time_first_positive".to_string())];
    let (pcr, conc) = (t("AllPcr"), t("Concurrent"));
    notes.push(format!("t_fp AllPcr {pcr:.2} vs Concurrent {conc:.2}"));
    if pcr <= conc {
        failures.push("AllPcr not slower than Concurrent");
    }

    run_cli(&["sweep", "--axis", "r0"], dir)?;
    let r0 = column(&read_means(&dir.join("sweep_r0.csv"))?, "Concurrent", "detection_probability");
    notes.push(format!("P(detect) over r0 {:?}", r0.iter().map(|p| (p.1 * 1000.0).round() / 1000.0).collect::<Vec<_>>()));
    if r0.len() != 3 || r0.windows(2).any(|w| w[1].1 < w[0].1) {
        failures.push("detection decreases with r0");
    }

    run_cli(&["sweep", "--axis", "p_asymptomatic"], dir)?;
    let pa = column(&read_means(&dir.join("sweep_p_asymptomatic.csv"))?, "Concurrent", "detection_probability");
    notes.push(format!("over p_asym {:?}", pa.iter().map(|p| (p.1 * 1000.0).round() / 1000.0).collect::<Vec<_>>()));
    if pa.len() != 3 || pa.windows(2).any(|w| w[1].1 >= w[0].1) {
        failures.push("detection not decreasing in p_asymptomatic");
    }

    let lods = format!("{},{}", 100f64.log10(), 1000f64.log10());
    run_cli(&["sweep", "--axis", "pcr_lod", "--values", &lods], dir)?;
    let lod = column(&read_means(&dir.join("sweep_pcr_lod.csv"))?, "Concurrent", "detection_probability");
    let delta = if lod.len() == 2 { (lod[1].1 - lod[0].1).abs() } else { f64::INFINITY };
    notes.push(format!("Concurrent LoD change {delta:.4}"));
    if delta >= 0.05 {
        failures.push("Concurrent sensitive to LoD");
    }

    let msg = notes.join("; ");
    if failures.is_empty() { Ok(msg) } else { Err(format!("{}: {msg}", failures.join(", "))) }
}

fn end_to_end_determinism(dir: &Path) -> Check {
    let (a, b) = (dir.join("a"), dir.join("b"));
    run_cli(&["simulate", "--workers", "1"], &a)?;
    run_cli(&["simulate", "--workers", "4"], &b)?;
    for f in ["kpi.csv", "kpi.json"] {
        let x = std::fs::read(a.join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(f)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{f} differs between runs"));
        }
    }
    Ok("kpi.csv and kpi.json byte-identical across runs with 1 and 4 workers".into())
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(&str, Duration, Box<dyn Fn() -> Check>)> = vec![
        ("trajectory geometry", Duration::from_secs(1), Box::new(trajectory_geometry)),
        ("delay distribution moments", Duration::from_secs(5), Box::new(delay_moments)),
        ("branching-process oracles", Duration::from_secs(60), Box::new(branching_oracles)),
        ("censored likelihood at threshold", Duration::from_secs(1), Box::new(censored_term)),
        ("MCMC synthetic recovery", Duration::from_secs(600), Box::new(mcmc_recovery)),
        ("coupling dominance", Duration::from_secs(60), Box::new(coupling_dominance)),
        ("qualitative orderings", Duration::from_secs(300), Box::new(|| qualitative_orderings(&tmp.path().join("c7")))),
        ("end-to-end determinism", Duration::from_secs(300), Box::new(|| end_to_end_determinism(&tmp.path().join("c8")))),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget {budget:?}")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {}: {} {name} ({:.2}s) {detail}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
