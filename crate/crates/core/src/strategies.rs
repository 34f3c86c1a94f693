//! The five testing strategies, run over a simulated outbreak.
//!
//! Only the first five symptomatic cases (by onset) are ever tested, each at
//! the moment of onset. LFD results are instantaneous; PCR results arrive
//! after the turnaround. Test outcomes are decided by pre-drawn uniforms
//! ([`TestDraws`]) indexed by panel position and test occasion, so running
//! several strategies on the same [`OutbreakView`] with the same draws
//! couples them: a test that two strategies both perform has the same result.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kinetics::TrajectoryParams;
use crate::outbreak::{InfectionRecord, InfectionStream};
use crate::testmodels::{result_from_uniform, LfdModel, PcrModel};

/// Number of symptomatic cases eligible for testing.
pub const PANEL_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategyKind {
    AllLfd,
    AllPcr,
    Concurrent,
    LfdConfirmPcr,
    LfdRetestPcrIfAllNeg,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        Self::AllLfd,
        Self::AllPcr,
        Self::Concurrent,
        Self::LfdConfirmPcr,
        Self::LfdRetestPcrIfAllNeg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::AllLfd => "AllLfd",
            Self::AllPcr => "AllPcr",
            Self::Concurrent => "Concurrent",
            Self::LfdConfirmPcr => "LfdConfirmPcr",
            Self::LfdRetestPcrIfAllNeg => "LfdRetestPcrIfAllNeg",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.map(Self::name).join(", ")
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown strategy `{0}`; valid strategies are {valid}", valid = StrategyKind::valid_names())]
pub struct UnknownStrategy(pub String);

impl FromStr for StrategyKind {
    type Err = UnknownStrategy;

    /// Accepts the canonical names and kebab/snake case, ignoring case.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .flat_map(char::to_lowercase)
            .collect();
        Self::ALL
            .into_iter()
            .find(|k| k.name().to_lowercase() == key)
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

impl TryFrom<String> for StrategyKind {
    type Error = UnknownStrategy;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<StrategyKind> for String {
    fn from(k: StrategyKind) -> String {
        k.name().to_string()
    }
}

/// Uniforms deciding every test a strategy might perform on the panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestDraws {
    /// LFD at onset.
    pub lfd: [f64; PANEL_SIZE],
    /// PCR swabbed at onset: the only test under AllPcr, the follow-up to a
    /// negative LFD under Concurrent, and the confirmatory test under
    /// LfdConfirmPcr.
    pub pcr_at_onset: [f64; PANEL_SIZE],
    /// PCR retest after five negative LFDs.
    pub pcr_retest: [f64; PANEL_SIZE],
}

impl TestDraws {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut d = Self {
            lfd: [0.0; PANEL_SIZE],
            pcr_at_onset: [0.0; PANEL_SIZE],
            pcr_retest: [0.0; PANEL_SIZE],
        };
        for arr in [&mut d.lfd, &mut d.pcr_at_onset, &mut d.pcr_retest] {
            arr.iter_mut().for_each(|u| *u = rng.random());
        }
        d
    }

    /// Every test positive when its probability is positive.
    pub fn all_zero() -> Self {
        Self {
            lfd: [0.0; PANEL_SIZE],
            pcr_at_onset: [0.0; PANEL_SIZE],
            pcr_retest: [0.0; PANEL_SIZE],
        }
    }
}

/// A tested individual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelCase {
    pub id: usize,
    pub t_infect: f64,
    pub t_onset: f64,
    pub trajectory: TrajectoryParams,
}

impl PanelCase {
    pub fn concentration_at(&self, t: f64) -> f64 {
        self.trajectory.concentration(t - self.t_infect)
    }
}

/// The eligible cases of an outbreak, in onset order.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub cases: Vec<PanelCase>,
    /// False if the stream hit a limit before the panel was settled.
    pub complete: bool,
    /// Cases with onset up to this time are known to be in the panel.
    pub certain_until: f64,
    /// The whole outbreak was realised and went extinct.
    pub extinct: bool,
    /// Symptomatic cases seen so far.
    pub n_symptomatic_seen: usize,
}

/// Buffers an infection stream so several strategies can query the same
/// outbreak. Records are pulled only as far as a query needs.
#[derive(Debug, Clone)]
pub struct OutbreakView<R> {
    stream: InfectionStream<R>,
    records: Vec<InfectionRecord>,
    /// Smallest onsets seen, sorted, at most `PANEL_SIZE`.
    first_onsets: Vec<(f64, usize)>,
    n_symptomatic: usize,
    panel: Option<Panel>,
}

impl<R: Rng> OutbreakView<R> {
    pub fn new(stream: InfectionStream<R>) -> Self {
        Self {
            stream,
            records: Vec::new(),
            first_onsets: Vec::with_capacity(PANEL_SIZE + 1),
            n_symptomatic: 0,
            panel: None,
        }
    }

    pub fn records(&self) -> &[InfectionRecord] {
        &self.records
    }

    /// Lower bound on the infection time of any record not yet pulled.
    fn frontier(&self) -> f64 {
        self.stream.peek_next_time().unwrap_or(f64::INFINITY)
    }

    fn pull(&mut self) -> bool {
        let Some(rec) = self.stream.next() else {
            return false;
        };
        if let Some(onset) = rec.t_onset {
            self.n_symptomatic += 1;
            let pos = self
                .first_onsets
                .partition_point(|&(o, id)| (o, id) < (onset, rec.id));
            if pos < PANEL_SIZE {
                self.first_onsets.insert(pos, (onset, rec.id));
                self.first_onsets.truncate(PANEL_SIZE);
            }
        }
        self.records.push(rec);
        true
    }

    fn settled(&self) -> bool {
        // Unseen infections have t_infect >= frontier, hence onset > frontier.
        let f = self.frontier();
        f.is_infinite() || (self.first_onsets.len() == PANEL_SIZE && self.first_onsets[PANEL_SIZE - 1].0 <= f)
    }

    /// Pull until the first five symptomatic cases are known.
    pub fn panel(&mut self) -> &Panel {
        if self.panel.is_none() {
            while !self.settled() && self.pull() {}
            let complete = self.settled();
            let certain_until = if complete { f64::INFINITY } else { self.frontier() };
            let cases = self
                .first_onsets
                .iter()
                .filter(|&&(o, _)| o <= certain_until)
                .map(|&(o, id)| {
                    let r = &self.records[id];
                    PanelCase { id, t_infect: r.t_infect, t_onset: o, trajectory: r.trajectory }
                })
                .collect();
            self.panel = Some(Panel {
                cases,
                complete,
                certain_until,
                extinct: self.frontier().is_infinite(),
                n_symptomatic_seen: self.n_symptomatic,
            });
        }
        self.panel.as_ref().expect("set above")
    }

    /// Number of infections with `t_infect <= t`, and whether that count is
    /// exact (false if a simulation limit cut the stream short).
    pub fn infections_by(&mut self, t: f64) -> (usize, bool) {
        while self.frontier() <= t && self.pull() {}
        let exact = self.frontier() > t;
        (self.records.partition_point(|r| r.t_infect <= t), exact)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confirmation {
    pub time: f64,
    pub infections: usize,
    /// Confirmatory PCRs dispatched after the first positive and up to
    /// confirmation.
    pub pcr_awaiting: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub kind: StrategyKind,
    pub detected: bool,
    pub t_first_positive: Option<f64>,
    /// Infections with `t_infect <= t_first_positive`; 0 if undetected.
    pub infections_at_first_positive: usize,
    /// Tests used up to the first positive, or in total if undetected.
    pub n_lfd: usize,
    pub n_pcr: usize,
    pub had_five_symptomatic: bool,
    /// The outbreak went extinct without a single symptomatic case.
    pub all_asymptomatic: bool,
    /// A simulation limit was hit before the outcome was resolved.
    pub truncated: bool,
    /// LfdConfirmPcr only.
    pub confirmation: Option<Confirmation>,
    /// LfdConfirmPcr detected but no confirmatory PCR came back positive.
    pub confirmation_failed: bool,
}

fn count_onsets(cases: &[PanelCase], upto: f64, filter: impl Fn(usize) -> bool) -> usize {
    cases
        .iter()
        .enumerate()
        .filter(|&(k, c)| c.t_onset <= upto && filter(k))
        .count()
}

fn min_time(times: impl Iterator<Item = f64>) -> Option<f64> {
    times.fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))))
}

/// Detection timing and test accounting of one strategy on a fixed panel,
/// before infection counts are attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelDecision {
    pub t_first_positive: Option<f64>,
    pub n_lfd: usize,
    pub n_pcr: usize,
    pub t_confirmation: Option<f64>,
    pub pcr_awaiting: usize,
}

/// Apply `kind` to panel cases sorted by onset (at most [`PANEL_SIZE`]).
pub fn decide(
    cases: &[PanelCase],
    kind: StrategyKind,
    lfd: &LfdModel,
    pcr: &PcrModel,
    draws: &TestDraws,
) -> PanelDecision {
    let n = cases.len().min(PANEL_SIZE);
    let cases = &cases[..n];
    let turnaround = pcr.turnaround;

    let lfd_pos: Vec<bool> = cases
        .iter()
        .enumerate()
        .map(|(k, c)| result_from_uniform(lfd.sensitivity(c.concentration_at(c.t_onset)), draws.lfd[k]))
        .collect();
    let pcr_pos: Vec<bool> = cases
        .iter()
        .enumerate()
        .map(|(k, c)| {
            result_from_uniform(pcr.positive_prob(c.concentration_at(c.t_onset)), draws.pcr_at_onset[k])
        })
        .collect();
    let first_lfd = min_time((0..n).filter(|&k| lfd_pos[k]).map(|k| cases[k].t_onset));

    let mut t_confirmation = None;
    let mut pcr_awaiting = 0;
    let (t_first_positive, n_lfd, n_pcr) = match kind {
        StrategyKind::AllLfd => {
            let t = first_lfd;
            (t, count_onsets(cases, t.unwrap_or(f64::INFINITY), |_| true), 0)
        }
        StrategyKind::AllPcr => {
            let t = min_time((0..n).filter(|&k| pcr_pos[k]).map(|k| cases[k].t_onset + turnaround));
            (t, 0, count_onsets(cases, t.unwrap_or(f64::INFINITY), |_| true))
        }
        StrategyKind::Concurrent => {
            let via_pcr =
                min_time((0..n).filter(|&k| !lfd_pos[k] && pcr_pos[k]).map(|k| cases[k].t_onset + turnaround));
            let t = min_time(first_lfd.into_iter().chain(via_pcr));
            let upto = t.unwrap_or(f64::INFINITY);
            (t, count_onsets(cases, upto, |_| true), count_onsets(cases, upto, |k| !lfd_pos[k]))
        }
        StrategyKind::LfdConfirmPcr => {
            let t = first_lfd;
            let upto = t.unwrap_or(f64::INFINITY);
            if let Some(t_fp) = t {
                t_confirmation = min_time(
                    (0..n).filter(|&k| lfd_pos[k] && pcr_pos[k]).map(|k| cases[k].t_onset + turnaround),
                );
                if let Some(tc) = t_confirmation {
                    pcr_awaiting = (0..n)
                        .filter(|&k| lfd_pos[k] && cases[k].t_onset > t_fp && cases[k].t_onset <= tc)
                        .count();
                }
            }
            (t, count_onsets(cases, upto, |_| true), count_onsets(cases, upto, |k| lfd_pos[k]))
        }
        StrategyKind::LfdRetestPcrIfAllNeg => {
            if let Some(t) = first_lfd {
                (first_lfd, count_onsets(cases, t, |_| true), 0)
            } else if n == PANEL_SIZE {
                // retest all five at the instant the fifth negative is seen
                let dispatch = cases[PANEL_SIZE - 1].t_onset;
                let any = cases.iter().enumerate().any(|(k, c)| {
                    result_from_uniform(pcr.positive_prob(c.concentration_at(dispatch)), draws.pcr_retest[k])
                });
                (any.then_some(dispatch + turnaround), PANEL_SIZE, PANEL_SIZE)
            } else {
                (None, n, 0)
            }
        }
    };
    PanelDecision { t_first_positive, n_lfd, n_pcr, t_confirmation, pcr_awaiting }
}

/// Run one strategy. Several strategies may share `view` and `draws`.
pub fn run_strategy<R: Rng>(
    view: &mut OutbreakView<R>,
    kind: StrategyKind,
    lfd: &LfdModel,
    pcr: &PcrModel,
    draws: &TestDraws,
) -> StrategyOutcome {
    let panel = view.panel().clone();
    let n = panel.cases.len();
    let PanelDecision { t_first_positive: t_det, n_lfd, n_pcr, t_confirmation: confirmation_time, pcr_awaiting } =
        decide(&panel.cases, kind, lfd, pcr, draws);

    let latest_needed = match (t_det, confirmation_time) {
        (None, _) => f64::INFINITY,
        (Some(t), None) => t,
        (Some(t), Some(c)) => t.max(c),
    };
    let mut truncated = !panel.complete && latest_needed > panel.certain_until;
    let infections_at_first_positive = match t_det {
        Some(t) => {
            let (count, exact) = view.infections_by(t);
            truncated |= !exact;
            count
        }
        None => 0,
    };
    let confirmation = confirmation_time.map(|time| {
        let (infections, exact) = view.infections_by(time);
        truncated |= !exact;
        Confirmation { time, infections, pcr_awaiting }
    });

    StrategyOutcome {
        kind,
        detected: t_det.is_some(),
        t_first_positive: t_det,
        infections_at_first_positive,
        n_lfd,
        n_pcr,
        had_five_symptomatic: n == PANEL_SIZE,
        all_asymptomatic: panel.extinct && panel.n_symptomatic_seen == 0,
        truncated,
        confirmation,
        confirmation_failed: kind == StrategyKind::LfdConfirmPcr && t_det.is_some() && confirmation.is_none(),
    }
}

/// Run several strategies on one outbreak under common random numbers.
pub fn run_paired<R: Rng>(
    view: &mut OutbreakView<R>,
    kinds: &[StrategyKind],
    lfd: &LfdModel,
    pcr: &PcrModel,
    draws: &TestDraws,
) -> Vec<StrategyOutcome> {
    kinds.iter().map(|&k| run_strategy(view, k, lfd, pcr, draws)).collect()
}
