//! One test per acceptance criterion; each prints a single PASS/FAIL line.

mod common;

use std::sync::Arc;
use std::time::Instant;

use certainty::gain::{attribute_gain, value_gain, GainContext};
use certainty::session::{AnswerRecord, Event, Outcome, QueryRecord};
use certainty::simulator::{
    compute_metrics, run_benchmark, run_transcripts, BenchConfig, CatalogSource, ScoreSource,
    TargetChoice,
};
use certainty::{
    AnswerSource, Policy, PolicyConfig, QueryMode, Session, SimulatedUser, SyntheticSpec,
    Transcript, ValueIdx,
};
use common::{attr, half_split_instance, Instance};

/// Outcome of one criterion.
struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(name: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { name, pass, detail }
}

fn main() {
    let criteria: [fn() -> Verdict; 8] = [
        gain_oracle_equivalence,
        attribute_question_dominates_value_questions,
        half_split_values_are_optimal,
        turn_bounds_on_perfect_split_catalog,
        metric_protocol_example,
        core_beats_baselines_on_synthetic_catalogs,
        determinism_and_scale_invariance,
        state_machine_invariants,
    ];
    let mut failed = 0;
    for criterion in criteria {
        let v = criterion();
        println!(
            "{} {}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn gain_oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..1000 {
        worst = worst.max(max_error(&Instance::random(seed)));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "gain oracle equivalence",
        worst <= 1e-9 && secs < 10.0,
        format!("1000 instances, max error {worst:.2e}, {secs:.2}s"),
    )
}

fn max_error(inst: &Instance) -> f64 {
    use certainty::gain::*;
    use certainty::scorer::estimate_dependence;
    let catalog = inst.catalog();
    let scores = inst.score_vector(&catalog);
    let frontier = inst.frontier(&catalog);
    let ctx = GainContext::new(&catalog, &scores, &frontier).unwrap();
    let dep = estimate_dependence(&catalog, &frontier.items);
    let mut worst: f64 = 0.0;
    let mut check = |a: f64, b: f64| worst = worst.max((a - b).abs());
    for v in inst.live() {
        check(
            item_gain(&ctx, certainty::ItemIdx(v)).unwrap(),
            inst.item_gain(v),
        );
    }
    for j in 0..inst.columns.len() {
        if let Some((arity, _)) = inst.discrete(j) {
            check(
                attribute_gain(&ctx, attr(j)).unwrap(),
                inst.attribute_gain(j),
            );
            check(
                dependence_gain(&ctx, &dep, attr(j)).unwrap(),
                inst.dependence_gain(j),
            );
            for w in 0..arity {
                check(
                    value_gain(&ctx, attr(j), ValueIdx(w)).unwrap(),
                    inst.value_gain(j, w),
                );
                check(
                    dependence_value_gain(&ctx, &dep, attr(j), ValueIdx(w)).unwrap(),
                    inst.dependence_value_gain(j, w),
                );
            }
        } else {
            let t = propose_threshold(&ctx, attr(j)).unwrap();
            for t in inst.continuous(j).unwrap().iter().copied().chain([t]) {
                check(
                    threshold_gain(&ctx, attr(j), t).unwrap(),
                    inst.threshold_gain(j, t),
                );
            }
        }
    }
    worst
}

fn attribute_question_dominates_value_questions() -> Verdict {
    let (mut violations, mut equalities, mut binary_cases) = (0, 0, 0);
    for seed in 0..1000 {
        let inst = Instance::random(seed);
        let catalog = inst.catalog();
        let scores = inst.score_vector(&catalog);
        let frontier = inst.frontier(&catalog);
        let ctx = GainContext::new(&catalog, &scores, &frontier).unwrap();
        for j in 0..inst.columns.len() {
            let Some((arity, values)) = inst.discrete(j) else {
                continue;
            };
            let a = attribute_gain(&ctx, attr(j)).unwrap();
            for w in 0..arity {
                let v = value_gain(&ctx, attr(j), ValueIdx(w)).unwrap();
                if a < v - 1e-12 {
                    violations += 1;
                }
                let present = inst.live().any(|i| values[i] == w);
                if inst.live_arity(j) <= 2 && present {
                    binary_cases += 1;
                    if (a - v).abs() <= 1e-12 {
                        equalities += 1;
                    }
                }
            }
        }
    }
    report(
        "attribute gain dominates value gain",
        violations == 0 && equalities == binary_cases,
        format!("{violations} violations, {equalities}/{binary_cases} binary equalities"),
    )
}

fn half_split_values_are_optimal() -> Verdict {
    let (mut off, mut dominated) = (0.0f64, 0);
    for seed in 0..1000 {
        let inst = half_split_instance(seed);
        let catalog = inst.catalog();
        let scores = inst.score_vector(&catalog);
        let frontier = inst.frontier(&catalog);
        let ctx = GainContext::new(&catalog, &scores, &frontier).unwrap();
        let r = ctx.total();
        let half = value_gain(&ctx, attr(0), ValueIdx(0)).unwrap();
        off = off.max((half - r / 2.0).abs() / r);
        let (arity, _) = inst.discrete(0).unwrap();
        for w in 1..arity {
            if value_gain(&ctx, attr(0), ValueIdx(w)).unwrap() > half + 4.0 * f64::EPSILON * r {
                dominated += 1;
            }
        }
    }
    report(
        "half split gains R/2 and dominates",
        off <= 4.0 * f64::EPSILON && dominated == 0,
        format!("max relative deviation {off:.2e}, {dominated} better values"),
    )
}

fn perfect_split(policy: Policy, k_max: usize, sessions: usize) -> BenchConfig {
    let (catalog, _) =
        certainty::catalog::generate_synthetic(&SyntheticSpec::perfect_split(42, 63, 6)).unwrap();
    BenchConfig::new(
        CatalogSource::Fixed {
            catalog: Arc::new(catalog),
            targets: TargetChoice::Random { count: 1 },
        },
        PolicyConfig::new(policy, QueryMode::Value),
        k_max,
        sessions,
        42,
    )
}

fn turn_bounds_on_perfect_split_catalog() -> Verdict {
    let start = Instant::now();
    let mut core = perfect_split(Policy::Core, 9, 10_000);
    core.jobs = 0;
    let core = run_benchmark(&core).unwrap();
    let mut ag = perfect_split(Policy::Ag, 63, 10_000);
    ag.jobs = 0;
    let ag = run_benchmark(&ag).unwrap();
    let secs = start.elapsed().as_secs_f64();
    report(
        "turn bounds on perfect-split catalog",
        core.t_at_k == 7.0 && core.s_at_k == 1.0 && (ag.t_at_k - 32.0).abs() <= 0.5 && secs < 60.0,
        format!(
            "core mean turns {:.4} (S {:.3}), ag mean turns {:.3}, {secs:.1}s",
            core.t_at_k, core.s_at_k, ag.t_at_k
        ),
    )
}

fn transcript(k_max: usize, success_turn: Option<usize>, forced: bool) -> Transcript {
    let events = (1..=success_turn.unwrap_or(k_max + 1))
        .map(|turn| Event {
            turn,
            action: QueryRecord {
                kind: "item".into(),
                item: Some(format!("v{turn}")),
                attr: None,
                value: None,
                threshold: None,
                gain: 0.0,
                forced: turn == k_max + 1,
            },
            answer: AnswerRecord {
                kind: if Some(turn) == success_turn {
                    "yes"
                } else {
                    "no"
                }
                .into(),
                value: None,
            },
            remaining: 1,
            uncertainty: 0.0,
        })
        .collect();
    Transcript {
        session_id: String::new(),
        seed: 0,
        policy: "core".into(),
        mode: "value".into(),
        k_max,
        events,
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

fn metric_protocol_example() -> Verdict {
    let ts = [
        transcript(3, Some(2), false),
        transcript(3, Some(4), true),
        transcript(3, None, false),
    ];
    let r = compute_metrics(&ts, 3).unwrap();
    report(
        "metric protocol example",
        r.t_at_k == 4.0 && r.s_at_k == 2.0 / 3.0,
        format!("T@3 = {}, S@3 = {}", r.t_at_k, r.s_at_k),
    )
}

fn synthetic(policy: Policy) -> f64 {
    let mut cfg = BenchConfig::new(
        CatalogSource::Synthetic {
            spec: SyntheticSpec::default(),
            max_targets: 3,
        },
        PolicyConfig::new(policy, QueryMode::Value),
        5,
        5000,
        2024,
    );
    cfg.jobs = 0;
    run_benchmark(&cfg).unwrap().s_at_k
}

fn core_beats_baselines_on_synthetic_catalogs() -> Verdict {
    let (core, ag, me) = (
        synthetic(Policy::Core),
        synthetic(Policy::Ag),
        synthetic(Policy::Me),
    );
    report(
        "core beats baselines on synthetic catalogs",
        core - ag >= 0.10 && core >= me,
        format!("S@5 core {core:.4}, ag {ag:.4}, me {me:.4}"),
    )
}

fn determinism_and_scale_invariance() -> Verdict {
    let mut cfg = BenchConfig::new(
        CatalogSource::Synthetic {
            spec: SyntheticSpec::default(),
            max_targets: 3,
        },
        PolicyConfig::new(Policy::Core, QueryMode::Value),
        5,
        500,
        42,
    );
    let reference = run_benchmark(&cfg).unwrap().to_json_string();
    let mut identical = true;
    for jobs in [0, 2, 3, 8] {
        cfg.jobs = jobs;
        identical &= run_benchmark(&cfg).unwrap().to_json_string() == reference;
    }

    // gains scale with the scores, so compare everything but the gain
    let actions = |t: &[Transcript]| -> Vec<Vec<String>> {
        t.iter()
            .map(|t| {
                t.events
                    .iter()
                    .map(|e| {
                        let a = &e.action;
                        let threshold = a.threshold.map(|x| format!("{x:.9}"));
                        format!(
                            "{} {:?} {:?} {:?} {threshold:?}",
                            a.kind, a.item, a.attr, a.value
                        )
                    })
                    .collect()
            })
            .collect()
    };
    let mut scaled_same = true;
    for policy in [Policy::Core, Policy::CoreD, Policy::Ag, Policy::Me] {
        let (catalog, _) = certainty::catalog::generate_synthetic(&SyntheticSpec {
            seed: 5,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let catalog = Arc::new(catalog);
        let raw: Vec<f64> = (0..catalog.len())
            .map(|i| 1.0 + (i * 37 % 11) as f64)
            .collect();
        let scores = Arc::new(certainty::ScoreVector::new(&catalog, raw).unwrap());
        let mut base = BenchConfig::new(
            CatalogSource::Fixed {
                catalog: catalog.clone(),
                targets: TargetChoice::Random { count: 2 },
            },
            PolicyConfig::new(policy, QueryMode::Value),
            5,
            300,
            9,
        );
        base.scores = ScoreSource::Fixed(scores);
        let reference = actions(&run_transcripts(&base).unwrap());
        for factor in [0.1, 10.0] {
            base.score_scale = factor;
            scaled_same &= actions(&run_transcripts(&base).unwrap()) == reference;
        }
    }
    report(
        "determinism and scale invariance",
        identical && scaled_same,
        format!("byte-identical across jobs: {identical}, actions unchanged under x0.1/x10: {scaled_same}"),
    )
}

fn state_machine_invariants() -> Verdict {
    let mut violations = Vec::new();
    let mut sessions = 0;
    for seed in 0..2000u64 {
        let spec = SyntheticSpec {
            seed,
            items: 1 + (seed % 30) as usize,
            discrete: (seed % 4) as usize,
            continuous: (seed / 4 % 3) as usize,
            values_per_attr: 2 + (seed % 3) as usize,
            targets: 1 + (seed % 3) as usize,
            perfect_split: false,
        };
        let spec = SyntheticSpec {
            targets: spec.targets.min(spec.items),
            ..spec
        };
        let (catalog, scores, targets) = common::synthetic(&spec);
        let policy = [Policy::Core, Policy::CoreD, Policy::Ag, Policy::Me][(seed % 4) as usize];
        let mode =
            [QueryMode::Declared, QueryMode::Attribute, QueryMode::Value][(seed % 3) as usize];
        let mut user = SimulatedUser::new(&catalog, targets.clone(), seed).unwrap();
        let mut session = Session::start(
            catalog.clone(),
            scores,
            PolicyConfig::new(policy, mode),
            certainty::session::Limits::new(1 + (seed % 7) as usize),
        )
        .unwrap();
        sessions += 1;
        let mut u_prev = session.uncertainty();
        while let Some(p) = session.pending().copied() {
            let before = session.state().clone();
            session
                .answer(user.answer(&catalog, &p.scored.action))
                .unwrap();
            let after = session.state();
            let u = session.uncertainty();
            let ok = after.frontier.items.is_subset(&before.frontier.items)
                && after.frontier.attrs.is_subset(&before.frontier.attrs)
                && after
                    .frontier
                    .values
                    .iter()
                    .zip(&before.frontier.values)
                    .all(|(a, b)| a.is_subset(b))
                && u <= u_prev + 1e-12
                && (matches!(after.status, certainty::Status::Success(t) if targets.contains(&t))
                    || targets.iter().any(|&t| after.frontier.items.contains(t)));
            if !ok {
                violations.push(seed);
                break;
            }
            u_prev = u;
        }
    }
    report(
        "state machine invariants",
        violations.is_empty(),
        format!(
            "{sessions} fuzzed sessions, {} violations {:?}",
            violations.len(),
            &violations[..violations.len().min(5)]
        ),
    )
}
