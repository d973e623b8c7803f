//! The online decision tree: unchecked sets, answer application and the
//! turn loop shared by the simulator and the HTTP service.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, Cell, ItemIdx, Symbol};
use crate::gain::{Frontier, GainContext, GainError};
use crate::policy::{
    ag_select, select_action, DependenceInput, DependenceRefresh, Policy, PolicyConfig,
    PolicyError, QueryAction, ScoredAction,
};
use crate::scorer::{estimate_dependence, DependenceModel, ScoreVector};

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("answer {answer} is not admissible for a {action} query")]
    Inadmissible {
        action: &'static str,
        answer: &'static str,
    },
    #[error("illegal action: {0}")]
    IllegalAction(String),
    #[error("session is not active")]
    NotActive,
    #[error("k_max must be at least 1")]
    InvalidKMax,
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Answer {
    Yes,
    No,
    Value(crate::catalog::ValueIdx),
    NotCare,
}

impl Answer {
    fn kind(&self) -> &'static str {
        match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Value(_) => "value",
            Answer::NotCare => "not_care",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailReason {
    /// The answers ruled out every item.
    InconsistentAnswers,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Active,
    Success(ItemIdx),
    /// Turn budget spent without a hit.
    Exhausted,
    Failed(FailReason),
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::Active => "active",
            Status::Success(_) => "success",
            Status::Exhausted => "exhausted",
            Status::Failed(_) => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionState {
    pub frontier: Frontier,
    pub turn: usize,
    pub status: Status,
}

impl SessionState {
    pub fn new(catalog: &Catalog) -> Self {
        SessionState {
            frontier: Frontier::full(catalog),
            turn: 0,
            status: Status::Active,
        }
    }
}

/// Unchecked score mass; zero once a target has been found.
pub fn uncertainty(state: &SessionState, scores: &ScoreVector) -> f64 {
    match state.status {
        Status::Success(_) => 0.0,
        _ => scores.mass(&state.frontier.items),
    }
}

fn action_kind(action: &QueryAction) -> &'static str {
    match action {
        QueryAction::Item(_) => "item",
        QueryAction::Attribute(_) => "attribute",
        QueryAction::Value(..) => "value",
        QueryAction::Threshold(..) => "threshold",
    }
}

fn check_legal(
    state: &SessionState,
    action: &QueryAction,
    catalog: &Catalog,
) -> Result<(), SessionError> {
    let f = &state.frontier;
    let illegal = |msg: String| Err(SessionError::IllegalAction(msg));
    match *action {
        QueryAction::Item(i) if !f.items.contains(i) => {
            illegal(format!("item {} is checked", catalog.item_id(i)))
        }
        QueryAction::Attribute(x) | QueryAction::Value(x, _) | QueryAction::Threshold(x, _)
            if !f.attrs.contains(&x) =>
        {
            illegal(format!(
                "attribute {} is checked",
                catalog.attribute(x).name
            ))
        }
        QueryAction::Attribute(x) if !catalog.attribute(x).is_discrete() => illegal(format!(
            "attribute {} is continuous",
            catalog.attribute(x).name
        )),
        QueryAction::Value(x, w) if !f.values[x.0].contains(&w) => illegal(format!(
            "value {} of {} is checked",
            catalog.symbol(x, w),
            catalog.attribute(x).name
        )),
        QueryAction::Threshold(x, _) if catalog.attribute(x).is_discrete() => illegal(format!(
            "attribute {} is discrete",
            catalog.attribute(x).name
        )),
        _ => Ok(()),
    }
}

/// Applies one query/answer exchange, returning the next state.
pub fn apply_answer(
    state: &SessionState,
    action: &QueryAction,
    answer: Answer,
    catalog: &Catalog,
) -> Result<SessionState, SessionError> {
    if state.status != Status::Active {
        return Err(SessionError::NotActive);
    }
    check_legal(state, action, catalog)?;
    let inadmissible = Err(SessionError::Inadmissible {
        action: action_kind(action),
        answer: answer.kind(),
    });
    let mut next = state.clone();
    next.turn += 1;
    let f = &mut next.frontier;
    match (*action, answer) {
        (QueryAction::Item(item), Answer::Yes) => {
            next.status = Status::Success(item);
            return Ok(next);
        }
        (QueryAction::Item(item), Answer::No) => {
            f.items.remove(item);
        }
        (QueryAction::Item(_), _) => return inadmissible,
        (QueryAction::Attribute(x), Answer::Value(w)) => {
            if w.0 >= catalog.attribute(x).values.len() {
                return Err(SessionError::IllegalAction(format!(
                    "attribute {} has no value #{}",
                    catalog.attribute(x).name,
                    w.0
                )));
            }
            f.items.retain(|&i| catalog.value_of(i, x) == w);
            f.attrs.remove(&x);
        }
        (QueryAction::Attribute(_), Answer::Yes | Answer::No) => return inadmissible,
        (QueryAction::Value(x, w), Answer::Yes | Answer::No) => {
            let keep_equal = answer == Answer::Yes;
            f.items
                .retain(|&i| (catalog.value_of(i, x) == w) == keep_equal);
            f.values[x.0].remove(&w);
            if f.values[x.0].is_empty() {
                f.attrs.remove(&x);
            }
        }
        (QueryAction::Threshold(x, t), Answer::Yes | Answer::No) => {
            let keep_at_least = answer == Answer::Yes;
            f.items.retain(|&i| match catalog.cell(i, x) {
                Cell::Continuous(v) => (v >= t) == keep_at_least,
                Cell::Discrete(_) => unreachable!("checked continuous"),
            });
        }
        (QueryAction::Value(..) | QueryAction::Threshold(..), Answer::Value(_)) => {
            return inadmissible
        }
        (
            QueryAction::Attribute(x) | QueryAction::Value(x, _) | QueryAction::Threshold(x, _),
            Answer::NotCare,
        ) => {
            f.attrs.remove(&x);
        }
    }
    if next.frontier.items.is_empty() {
        next.status = Status::Failed(FailReason::InconsistentAnswers);
    }
    Ok(next)
}

/// Anything that can answer the agent's questions.
pub trait AnswerSource {
    fn answer(&mut self, catalog: &Catalog, action: &QueryAction) -> Answer;
}

/// Replays a fixed answer list, then answers `No`.
pub struct ScriptedAnswers(std::collections::VecDeque<Answer>);

impl ScriptedAnswers {
    pub fn new(answers: impl IntoIterator<Item = Answer>) -> Self {
        ScriptedAnswers(answers.into_iter().collect())
    }
}

impl AnswerSource for ScriptedAnswers {
    fn answer(&mut self, _: &Catalog, _: &QueryAction) -> Answer {
        self.0.pop_front().unwrap_or(Answer::No)
    }
}

/// Wire form of a query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Symbol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub gain: f64,
    /// The final item query made after the turn budget.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub forced: bool,
}

impl QueryRecord {
    pub fn new(catalog: &Catalog, scored: &ScoredAction, forced: bool) -> Self {
        let mut record = QueryRecord {
            kind: action_kind(&scored.action).to_string(),
            item: None,
            attr: None,
            value: None,
            threshold: None,
            gain: scored.gain,
            forced,
        };
        match scored.action {
            QueryAction::Item(i) => record.item = Some(catalog.item_id(i).to_string()),
            QueryAction::Attribute(x) => record.attr = Some(catalog.attribute(x).name.clone()),
            QueryAction::Value(x, w) => {
                record.attr = Some(catalog.attribute(x).name.clone());
                record.value = Some(catalog.symbol(x, w).clone());
            }
            QueryAction::Threshold(x, t) => {
                record.attr = Some(catalog.attribute(x).name.clone());
                record.threshold = Some(t);
            }
        }
        record
    }
}

/// Wire form of an answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Symbol>,
}

impl AnswerRecord {
    pub fn new(catalog: &Catalog, action: &QueryAction, answer: Answer) -> Self {
        let value = match (action, answer) {
            (QueryAction::Attribute(x), Answer::Value(w)) => Some(catalog.symbol(*x, w).clone()),
            _ => None,
        };
        AnswerRecord {
            kind: answer.kind().to_string(),
            value,
        }
    }

    /// Resolves a wire answer against the pending action.
    pub fn resolve(&self, catalog: &Catalog, action: &QueryAction) -> Result<Answer, SessionError> {
        let inadmissible = |answer: &'static str| SessionError::Inadmissible {
            action: action_kind(action),
            answer,
        };
        match self.kind.as_str() {
            "yes" => Ok(Answer::Yes),
            "no" => Ok(Answer::No),
            "not_care" => Ok(Answer::NotCare),
            "value" => {
                let QueryAction::Attribute(x) = action else {
                    return Err(inadmissible("value"));
                };
                let symbol = self.value.as_ref().ok_or(inadmissible("value"))?;
                catalog
                    .attribute(*x)
                    .value_index(symbol)
                    .map(Answer::Value)
                    .ok_or(inadmissible("value"))
            }
            _ => Err(inadmissible("unknown")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub turn: usize,
    pub action: QueryRecord,
    pub answer: AnswerRecord,
    /// Unchecked items after the answer.
    pub remaining: usize,
    /// Unchecked score mass after the answer.
    pub uncertainty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_turn: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
    /// Whether the success came from the final forced item query.
    #[serde(default)]
    pub forced: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Per-session event log, one JSON object per line when persisted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub seed: u64,
    pub policy: String,
    pub mode: String,
    pub k_max: usize,
    pub events: Vec<Event>,
    pub outcome: Outcome,
}

impl Transcript {
    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }
}

/// Turn budget of a session.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub k_max: usize,
    /// After `k_max` unresolved turns, make one more item query (turn
    /// `k_max + 1`) with the greedy item policy.
    pub forced_final: bool,
}

impl Limits {
    pub fn new(k_max: usize) -> Self {
        Limits {
            k_max,
            forced_final: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendingQuery {
    pub scored: ScoredAction,
    pub forced: bool,
}

/// A live session: the state plus the query currently awaiting an answer.
#[derive(Clone, Debug)]
pub struct Session {
    catalog: Arc<Catalog>,
    scores: Arc<ScoreVector>,
    cfg: PolicyConfig,
    limits: Limits,
    state: SessionState,
    pending: Option<PendingQuery>,
    events: Vec<Event>,
    fixed_dependence: Option<Arc<DependenceModel>>,
    forced_success: bool,
}

impl Session {
    pub fn start(
        catalog: Arc<Catalog>,
        scores: Arc<ScoreVector>,
        cfg: PolicyConfig,
        limits: Limits,
    ) -> Result<Self, SessionError> {
        if limits.k_max == 0 {
            return Err(SessionError::InvalidKMax);
        }
        let fixed_dependence = match (&cfg.policy, &cfg.dependence, cfg.dependence_refresh) {
            (Policy::CoreD, DependenceInput::External(model), _) => Some(model.clone()),
            (Policy::CoreD, DependenceInput::Statistical, DependenceRefresh::Frozen) => Some(
                Arc::new(estimate_dependence(&catalog, &catalog.all_items())),
            ),
            _ => None,
        };
        let mut session = Session {
            state: SessionState::new(&catalog),
            catalog,
            scores,
            cfg,
            limits,
            pending: None,
            events: Vec::new(),
            fixed_dependence,
            forced_success: false,
        };
        session.prepare_next()?;
        Ok(session)
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn scores(&self) -> &Arc<ScoreVector> {
        &self.scores
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn pending(&self) -> Option<&PendingQuery> {
        self.pending.as_ref()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn uncertainty(&self) -> f64 {
        uncertainty(&self.state, &self.scores)
    }

    pub fn is_terminal(&self) -> bool {
        self.state.status != Status::Active
    }

    pub fn pending_record(&self) -> Option<QueryRecord> {
        self.pending
            .map(|p| QueryRecord::new(&self.catalog, &p.scored, p.forced))
    }

    /// The found item, or the best-scored surviving item once the session is over.
    pub fn recommendation(&self) -> Option<ItemIdx> {
        match self.state.status {
            Status::Success(item) => Some(item),
            Status::Active => None,
            _ => {
                let scores = &self.scores;
                self.state.frontier.items.iter().reduce(|best, i| {
                    if scores.get(i) > scores.get(best) {
                        i
                    } else {
                        best
                    }
                })
            }
        }
    }

    fn prepare_next(&mut self) -> Result<(), SessionError> {
        self.pending = None;
        if self.state.status != Status::Active {
            return Ok(());
        }
        let forced = if self.state.turn < self.limits.k_max {
            false
        } else if self.state.turn == self.limits.k_max && self.limits.forced_final {
            true
        } else {
            self.state.status = Status::Exhausted;
            return Ok(());
        };
        let scored = match GainContext::new(&self.catalog, &self.scores, &self.state.frontier) {
            Ok(ctx) if forced => ag_select(&ctx)?,
            Ok(ctx) => select_action(&ctx, &self.cfg, self.fixed_dependence.as_deref())?,
            // every surviving item scored zero: recommend them in id order
            Err(GainError::ZeroMass) => ScoredAction {
                action: QueryAction::Item(
                    self.state
                        .frontier
                        .items
                        .iter()
                        .min_by(|a, b| self.catalog.item_id(*a).cmp(self.catalog.item_id(*b)))
                        .expect("nonempty frontier"),
                ),
                gain: 0.0,
            },
            Err(e) => return Err(PolicyError::Gain(e).into()),
        };
        self.pending = Some(PendingQuery { scored, forced });
        Ok(())
    }

    /// Applies an answer to the pending query and prepares the next one.
    pub fn answer(&mut self, answer: Answer) -> Result<(), SessionError> {
        let pending = self.pending.ok_or(SessionError::NotActive)?;
        let action = pending.scored.action;
        let next = apply_answer(&self.state, &action, answer, &self.catalog)?;
        self.state = next;
        self.events.push(Event {
            turn: self.state.turn,
            action: QueryRecord::new(&self.catalog, &pending.scored, pending.forced),
            answer: AnswerRecord::new(&self.catalog, &action, answer),
            remaining: self.state.frontier.items.len(),
            uncertainty: uncertainty(&self.state, &self.scores),
        });
        if pending.forced {
            if let Status::Success(_) = self.state.status {
                self.forced_success = true;
            } else if self.state.status == Status::Active {
                self.state.status = Status::Exhausted;
            }
        }
        self.prepare_next()
    }

    pub fn outcome(&self) -> Outcome {
        let (success_turn, item) = match self.state.status {
            Status::Success(i) => (
                Some(self.state.turn),
                Some(self.catalog.item_id(i).to_string()),
            ),
            _ => (None, None),
        };
        Outcome {
            status: self.state.status.name().to_string(),
            success_turn,
            item,
            forced: self.forced_success,
            reason: match self.state.status {
                Status::Failed(FailReason::InconsistentAnswers) => {
                    Some("inconsistent_answers".to_string())
                }
                _ => None,
            },
        }
    }

    pub fn transcript(&self, session_id: impl Into<String>, seed: u64) -> Transcript {
        Transcript {
            session_id: session_id.into(),
            seed,
            policy: self.cfg.policy.name().to_string(),
            mode: self.cfg.mode.name().to_string(),
            k_max: self.limits.k_max,
            events: self.events.clone(),
            outcome: self.outcome(),
        }
    }
}

/// Runs a session to completion against an answer source.
pub fn run_session(
    catalog: Arc<Catalog>,
    scores: Arc<ScoreVector>,
    cfg: PolicyConfig,
    limits: Limits,
    source: &mut dyn AnswerSource,
) -> Result<Session, SessionError> {
    let mut session = Session::start(catalog, scores, cfg, limits)?;
    while let Some(pending) = session.pending {
        let answer = source.answer(&session.catalog, &pending.scored.action);
        session.answer(answer)?;
    }
    Ok(session)
}
