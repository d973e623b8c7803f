//! Simulated users, the benchmark runner and T@K / S@K metrics.
//!
//! A benchmark derives one seed per session from the master seed, so the
//! report does not depend on how sessions are spread across threads.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{generate_synthetic, Catalog, CatalogError, Cell, ItemIdx, SyntheticSpec};
use crate::policy::{PolicyConfig, QueryAction};
use crate::scorer::{cold_start_scores, ScoreVector};
use crate::session::{run_session, Answer, AnswerSource, Limits, SessionError, Transcript};

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("target set is empty")]
    NoTargets,
    #[error("target {0} is not a catalog item")]
    UnknownTarget(usize),
    #[error("n_sessions must be at least 1")]
    NoSessions,
    #[error("transcript {session} ran with k_max {found}, expected {expected}")]
    KMaxMismatch {
        session: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid benchmark setup: {0}")]
    InvalidSetup(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// Answers queries on behalf of a user whose satisfying items are `targets`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulatedUser {
    targets: Vec<ItemIdx>,
    /// Targets consistent with every answer given so far.
    live: Vec<ItemIdx>,
    pub rng_seed: u64,
}

impl SimulatedUser {
    pub fn new(
        catalog: &Catalog,
        mut targets: Vec<ItemIdx>,
        rng_seed: u64,
    ) -> Result<Self, SimulatorError> {
        if targets.is_empty() {
            return Err(SimulatorError::NoTargets);
        }
        if let Some(bad) = targets.iter().find(|t| t.0 >= catalog.len()) {
            return Err(SimulatorError::UnknownTarget(bad.0));
        }
        targets.sort_unstable();
        targets.dedup();
        Ok(SimulatedUser {
            live: targets.clone(),
            targets,
            rng_seed,
        })
    }

    pub fn targets(&self) -> &[ItemIdx] {
        &self.targets
    }

    pub fn live_targets(&self) -> &[ItemIdx] {
        &self.live
    }

    /// Drops the targets that `answer` ruled out, so later answers stay
    /// consistent with at least one of them.
    pub fn observe(&mut self, action: &QueryAction, answer: Answer, catalog: &Catalog) {
        let keep = |t: ItemIdx| match (*action, answer) {
            (QueryAction::Item(i), Answer::No) => t != i,
            (QueryAction::Attribute(x), Answer::Value(w)) => catalog.value_of(t, x) == w,
            (QueryAction::Value(x, w), Answer::Yes | Answer::No) => {
                (catalog.value_of(t, x) == w) == (answer == Answer::Yes)
            }
            (QueryAction::Threshold(x, w), Answer::Yes | Answer::No) => {
                matches!(catalog.cell(t, x), Cell::Continuous(v) if v >= w)
                    == (answer == Answer::Yes)
            }
            _ => true,
        };
        let narrowed: Vec<ItemIdx> = self.live.iter().copied().filter(|&t| keep(t)).collect();
        if !narrowed.is_empty() {
            self.live = narrowed;
        }
    }

    pub fn simulate_answer(&self, action: &QueryAction, catalog: &Catalog) -> Answer {
        match *action {
            QueryAction::Item(i) => yes_if(self.live.contains(&i)),
            QueryAction::Attribute(x) => {
                let first = catalog.value_of(self.live[0], x);
                if self.live.iter().all(|&t| catalog.value_of(t, x) == first) {
                    Answer::Value(first)
                } else {
                    Answer::NotCare
                }
            }
            QueryAction::Value(x, w) => {
                yes_if(self.live.iter().any(|&t| catalog.value_of(t, x) == w))
            }
            QueryAction::Threshold(x, w) => yes_if(
                self.live
                    .iter()
                    .any(|&t| matches!(catalog.cell(t, x), Cell::Continuous(v) if v >= w)),
            ),
        }
    }
}

fn yes_if(b: bool) -> Answer {
    if b {
        Answer::Yes
    } else {
        Answer::No
    }
}

impl AnswerSource for SimulatedUser {
    fn answer(&mut self, catalog: &Catalog, action: &QueryAction) -> Answer {
        let answer = self.simulate_answer(action, catalog);
        self.observe(action, answer, catalog);
        answer
    }
}

/// One session's contribution to the metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub seed: u64,
    pub turns: usize,
    pub t: usize,
    pub s: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_turn: Option<usize>,
    pub forced: bool,
}

impl SessionRecord {
    /// Protocol: a hit within the budget counts its turn; otherwise the forced
    /// item query decides between `k_max + 1` (hit) and `k_max + 3` (miss).
    pub fn from_transcript(transcript: &Transcript) -> Self {
        let k = transcript.k_max;
        let outcome = &transcript.outcome;
        let (t, s) = match outcome.success_turn {
            Some(turn) if turn <= k && !outcome.forced => (turn, 1),
            Some(_) => (k + 1, 1),
            None => (k + 3, 0),
        };
        SessionRecord {
            session_id: transcript.session_id.clone(),
            seed: transcript.seed,
            turns: transcript.events.len(),
            t,
            s,
            success_turn: outcome.success_turn,
            forced: outcome.forced,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub policy: String,
    pub mode: String,
    pub k_max: usize,
    pub n_sessions: usize,
    pub t_at_k: f64,
    pub s_at_k: f64,
    pub sessions: Vec<SessionRecord>,
}

impl MetricsReport {
    pub fn to_json_string(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

/// Aggregates transcripts that all ran with budget `k_max`.
pub fn compute_metrics(
    transcripts: &[Transcript],
    k_max: usize,
) -> Result<MetricsReport, SimulatorError> {
    let first = transcripts.first().ok_or(SimulatorError::NoSessions)?;
    if let Some(bad) = transcripts.iter().find(|t| t.k_max != k_max) {
        return Err(SimulatorError::KMaxMismatch {
            session: bad.session_id.clone(),
            expected: k_max,
            found: bad.k_max,
        });
    }
    let sessions: Vec<SessionRecord> = transcripts
        .iter()
        .map(SessionRecord::from_transcript)
        .collect();
    let n = sessions.len() as f64;
    // integer sums keep the means independent of summation order
    let t_sum: usize = sessions.iter().map(|r| r.t).sum();
    let s_sum: usize = sessions.iter().map(|r| r.s as usize).sum();
    Ok(MetricsReport {
        policy: first.policy.clone(),
        mode: first.mode.clone(),
        k_max,
        n_sessions: sessions.len(),
        t_at_k: t_sum as f64 / n,
        s_at_k: s_sum as f64 / n,
        sessions,
    })
}

/// Plain-text table with one row per report.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:<9} {:>5} {:>9} {:>8} {:>8}",
        "policy", "mode", "K_MAX", "sessions", "T@K", "S@K"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<8} {:<9} {:>5} {:>9} {:>8.3} {:>8.3}",
            r.policy, r.mode, r.k_max, r.n_sessions, r.t_at_k, r.s_at_k
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum TargetChoice {
    Fixed(Vec<ItemIdx>),
    /// `count` distinct items drawn per session.
    Random {
        count: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum CatalogSource {
    Fixed {
        catalog: Arc<Catalog>,
        targets: TargetChoice,
    },
    /// A fresh synthetic catalog per session, seeded from the session seed,
    /// with between 1 and `max_targets` targets.
    Synthetic {
        spec: SyntheticSpec,
        max_targets: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScoreSource {
    Cold,
    /// Only meaningful with a fixed catalog.
    Fixed(Arc<ScoreVector>),
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub catalog: CatalogSource,
    pub scores: ScoreSource,
    pub policy: PolicyConfig,
    pub limits: Limits,
    pub n_sessions: usize,
    pub master_seed: u64,
    /// Worker threads; 0 picks the rayon default.
    pub jobs: usize,
    /// Multiplies every score before the session starts.
    pub score_scale: f64,
}

impl BenchConfig {
    pub fn new(
        catalog: CatalogSource,
        policy: PolicyConfig,
        k_max: usize,
        n_sessions: usize,
        master_seed: u64,
    ) -> Self {
        BenchConfig {
            catalog,
            scores: ScoreSource::Cold,
            policy,
            limits: Limits::new(k_max),
            n_sessions,
            master_seed,
            jobs: 1,
            score_scale: 1.0,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of session `index` under `master_seed`.
pub fn session_seed(master_seed: u64, index: usize) -> u64 {
    splitmix64(master_seed ^ splitmix64(index as u64))
}

fn run_one(cfg: &BenchConfig, index: usize) -> Result<Transcript, SimulatorError> {
    let seed = session_seed(cfg.master_seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (catalog, targets) = match &cfg.catalog {
        CatalogSource::Fixed { catalog, targets } => {
            let targets = match targets {
                TargetChoice::Fixed(t) => t.clone(),
                TargetChoice::Random { count } => {
                    if *count == 0 || *count > catalog.len() {
                        return Err(SimulatorError::InvalidSetup(format!(
                            "cannot draw {count} targets from {} items",
                            catalog.len()
                        )));
                    }
                    rand::seq::index::sample(&mut rng, catalog.len(), *count)
                        .into_iter()
                        .map(ItemIdx)
                        .collect()
                }
            };
            (catalog.clone(), targets)
        }
        CatalogSource::Synthetic { spec, max_targets } => {
            let mut spec = spec.clone();
            spec.seed = seed;
            spec.targets = rng.random_range(1..=(*max_targets).max(1)).min(spec.items);
            let (catalog, targets) = generate_synthetic(&spec)?;
            (Arc::new(catalog), targets)
        }
    };
    let scores = match &cfg.scores {
        ScoreSource::Cold => cold_start_scores(&catalog),
        ScoreSource::Fixed(s) if s.len() == catalog.len() => (**s).clone(),
        ScoreSource::Fixed(_) => {
            return Err(SimulatorError::InvalidSetup(
                "score vector does not match the catalog".into(),
            ))
        }
    };
    let scores = if cfg.score_scale == 1.0 {
        scores
    } else {
        scores.scaled(cfg.score_scale)
    };
    let mut user = SimulatedUser::new(&catalog, targets, seed)?;
    let session = run_session(
        catalog,
        Arc::new(scores),
        cfg.policy.clone(),
        cfg.limits,
        &mut user,
    )?;
    Ok(session.transcript(format!("s{index:06}"), seed))
}

/// Runs every session of the benchmark, in session order.
pub fn run_transcripts(cfg: &BenchConfig) -> Result<Vec<Transcript>, SimulatorError> {
    if cfg.n_sessions == 0 {
        return Err(SimulatorError::NoSessions);
    }
    let run = || {
        (0..cfg.n_sessions)
            .into_par_iter()
            .map(|i| run_one(cfg, i))
            .collect::<Result<Vec<_>, _>>()
    };
    if cfg.jobs == 0 {
        return run();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| SimulatorError::InvalidSetup(e.to_string()))?
        .install(run)
}

pub fn run_benchmark(cfg: &BenchConfig) -> Result<MetricsReport, SimulatorError> {
    compute_metrics(&run_transcripts(cfg)?, cfg.limits.k_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{AttrIdx, ValueIdx};
    use crate::policy::{Policy, QueryMode};
    use crate::session::{AnswerRecord, Event, Outcome, QueryRecord};

    fn s1() -> Catalog {
        Catalog::from_json_str(
            r#"{
            "attributes": [
                {"name": "level", "kind": "discrete", "values": [3, 5], "query_style": "value_query"},
                {"name": "price", "kind": "continuous", "query_style": "threshold_query"}
            ],
            "items": [
                {"id": "v1", "values": {"level": 3, "price": 100}},
                {"id": "v2", "values": {"level": 5, "price": 200}},
                {"id": "v3", "values": {"level": 3, "price": 300}},
                {"id": "v4", "values": {"level": 5, "price": 400}}
            ]}"#,
        )
        .unwrap()
    }

    const LEVEL: AttrIdx = AttrIdx(0);

    #[test]
    fn answers_follow_the_rules() {
        let c = s1();
        let one = SimulatedUser::new(&c, vec![ItemIdx(0)], 0).unwrap();
        assert_eq!(
            one.simulate_answer(&QueryAction::Attribute(LEVEL), &c),
            Answer::Value(ValueIdx(0))
        );
        assert_eq!(
            one.simulate_answer(&QueryAction::Value(LEVEL, ValueIdx(1)), &c),
            Answer::No
        );
        assert_eq!(
            one.simulate_answer(&QueryAction::Item(ItemIdx(0)), &c),
            Answer::Yes
        );
        assert_eq!(
            one.simulate_answer(&QueryAction::Item(ItemIdx(1)), &c),
            Answer::No
        );

        let two = SimulatedUser::new(&c, vec![ItemIdx(0), ItemIdx(1)], 0).unwrap();
        assert_eq!(
            two.simulate_answer(&QueryAction::Attribute(LEVEL), &c),
            Answer::NotCare
        );
        assert_eq!(
            two.simulate_answer(&QueryAction::Value(LEVEL, ValueIdx(1)), &c),
            Answer::Yes
        );
        let price = AttrIdx(1);
        assert_eq!(
            two.simulate_answer(&QueryAction::Threshold(price, 150.0), &c),
            Answer::Yes
        );
        assert_eq!(
            two.simulate_answer(&QueryAction::Threshold(price, 250.0), &c),
            Answer::No
        );
    }

    #[test]
    fn later_answers_follow_surviving_targets() {
        let c = s1();
        // v1 (level 3, price 100) and v4 (level 5, price 400)
        let mut user = SimulatedUser::new(&c, vec![ItemIdx(0), ItemIdx(3)], 0).unwrap();
        let level3 = QueryAction::Value(LEVEL, ValueIdx(0));
        assert_eq!(user.answer(&c, &level3), Answer::Yes);
        assert_eq!(user.live_targets(), [ItemIdx(0)]);
        // only the ruled-out v4 reaches 250
        assert_eq!(
            user.answer(&c, &QueryAction::Threshold(AttrIdx(1), 250.0)),
            Answer::No
        );
        assert_eq!(user.targets(), [ItemIdx(0), ItemIdx(3)]);
    }

    #[test]
    fn targets_are_validated() {
        let c = s1();
        assert!(matches!(
            SimulatedUser::new(&c, vec![], 0),
            Err(SimulatorError::NoTargets)
        ));
        assert!(matches!(
            SimulatedUser::new(&c, vec![ItemIdx(9)], 0),
            Err(SimulatorError::UnknownTarget(9))
        ));
    }

    fn transcript(id: &str, k_max: usize, success_turn: Option<usize>, forced: bool) -> Transcript {
        let event = Event {
            turn: 1,
            action: QueryRecord {
                kind: "item".into(),
                item: Some("x".into()),
                attr: None,
                value: None,
                threshold: None,
                gain: 0.5,
                forced: false,
            },
            answer: AnswerRecord {
                kind: "no".into(),
                value: None,
            },
            remaining: 1,
            uncertainty: 0.5,
        };
        Transcript {
            session_id: id.into(),
            seed: 0,
            policy: "core".into(),
            mode: "value".into(),
            k_max,
            events: vec![event],
            outcome: Outcome {
                status: if success_turn.is_some() {
                    "success"
                } else {
                    "exhausted"
                }
                .into(),
                success_turn,
                item: None,
                forced,
                reason: None,
            },
        }
    }

    #[test]
    fn metric_protocol_example() {
        let ts = [
            transcript("a", 3, Some(2), false),
            transcript("b", 3, Some(4), true),
            transcript("c", 3, None, false),
        ];
        let report = compute_metrics(&ts, 3).unwrap();
        assert_eq!(report.t_at_k, 4.0);
        assert_eq!(report.s_at_k, 2.0 / 3.0);
        assert_eq!(
            report.sessions.iter().map(|r| r.t).collect::<Vec<_>>(),
            [2, 4, 6]
        );
    }

    #[test]
    fn metric_extremes() {
        let hits = [
            transcript("a", 5, Some(1), false),
            transcript("b", 5, Some(1), false),
        ];
        let r = compute_metrics(&hits, 5).unwrap();
        assert_eq!((r.t_at_k, r.s_at_k), (1.0, 1.0));
        let misses = [transcript("a", 5, None, false)];
        let r = compute_metrics(&misses, 5).unwrap();
        assert_eq!((r.t_at_k, r.s_at_k), (8.0, 0.0));
    }

    #[test]
    fn k_max_mismatch_is_an_error() {
        let ts = [
            transcript("a", 3, Some(2), false),
            transcript("b", 4, None, false),
        ];
        assert!(matches!(
            compute_metrics(&ts, 3),
            Err(SimulatorError::KMaxMismatch { found: 4, .. })
        ));
        assert!(matches!(
            compute_metrics(&[], 3),
            Err(SimulatorError::NoSessions)
        ));
    }

    fn bench(policy: Policy, n: usize) -> BenchConfig {
        BenchConfig::new(
            CatalogSource::Synthetic {
                spec: SyntheticSpec::default(),
                max_targets: 3,
            },
            PolicyConfig::new(policy, QueryMode::Value),
            5,
            n,
            7,
        )
    }

    #[test]
    fn single_session_report_is_its_record() {
        let cfg = bench(Policy::Core, 1);
        let ts = run_transcripts(&cfg).unwrap();
        let report = run_benchmark(&cfg).unwrap();
        let record = SessionRecord::from_transcript(&ts[0]);
        assert_eq!(report.n_sessions, 1);
        assert_eq!(report.t_at_k, record.t as f64);
        assert_eq!(report.s_at_k, record.s as f64);
        assert_eq!(report.sessions, [record]);
    }

    #[test]
    fn jobs_do_not_change_the_report() {
        let mut cfg = bench(Policy::Core, 40);
        let one = run_benchmark(&cfg).unwrap().to_json_string();
        cfg.jobs = 4;
        assert_eq!(run_benchmark(&cfg).unwrap().to_json_string(), one);
    }

    #[test]
    fn session_seeds_differ() {
        let seeds: std::collections::HashSet<u64> =
            (0..1000).map(|i| session_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(session_seed(1, 0), session_seed(2, 0));
    }

    #[test]
    fn table_has_a_row_per_report() {
        let r = run_benchmark(&bench(Policy::Ag, 3)).unwrap();
        let table = render_table(&[r.clone(), r]);
        assert_eq!(table.lines().count(), 3);
        assert!(table.lines().nth(1).unwrap().starts_with("ag"));
    }
}
