//! Query selection for conversational recommendation by expected certainty gain.
//!
//! A frozen recommender supplies a relevance score per item. Each turn the
//! engine asks the question (an item, an attribute, an attribute value or a
//! numeric threshold) whose answer is expected to eliminate the most unchecked
//! relevance mass, then narrows the candidate set from the answer.
//!
//! * [`catalog`] items, attributes, file loading and synthetic generation
//! * [`scorer`] relevance score vectors and attribute dependence estimates
//! * [`gain`] expected certainty gain of every query kind
//! * [`policy`] per-turn action selection (`core`, `core-d`, `ag`, `me`)
//! * [`session`] the online decision-tree state machine and transcripts
//! * [`simulator`] simulated users, benchmarks and turn/success metrics
//! * [`service`] HTTP session API
//! * [`cli`] command-line front end used by the `certainty` binary

pub mod catalog;
pub mod cli;
pub mod gain;
pub mod policy;
pub mod scorer;
pub mod service;
pub mod session;
pub mod simulator;

pub use catalog::{
    AttrIdx, AttributeKind, AttributeSchema, Catalog, CatalogError, Cell, Item, ItemIdx, ItemSet,
    Predicate, QueryStyle, Symbol, SyntheticSpec, ValueIdx,
};
pub use gain::{ExpectedGain, Frontier, GainContext, GainError};
pub use policy::{Policy, PolicyConfig, PolicyError, QueryAction, QueryMode, ScoredAction};
pub use scorer::{DependenceModel, DependenceSource, ScoreError, ScoreVector};
pub use session::{Answer, AnswerSource, Session, SessionError, SessionState, Status, Transcript};
pub use simulator::{MetricsReport, SimulatedUser};
