//! Turn-level action selection.
//!
//! `core` asks the candidate with the largest expected certainty gain, `core-d`
//! does the same with dependence-adjusted attribute gains, `ag` always
//! recommends the best-scored unchecked item and `me` asks the attribute with
//! the largest count entropy.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::catalog::{AttrIdx, Catalog, ItemIdx, QueryStyle, ValueIdx};
use crate::gain::{self, ExpectedGain, GainContext, GainError};
use crate::scorer::{estimate_dependence, DependenceModel};

/// Gains closer than this fraction of the unchecked mass count as tied.
const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("no candidate action: no unchecked items")]
    NoCandidates,
    #[error(transparent)]
    Gain(#[from] GainError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Policy {
    Core,
    CoreD,
    Ag,
    Me,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Core => "core",
            Policy::CoreD => "core-d",
            Policy::Ag => "ag",
            Policy::Me => "me",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown {kind} {value:?}")]
pub struct ParseNameError {
    kind: &'static str,
    value: String,
}

impl FromStr for Policy {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "core" => Ok(Policy::Core),
            "core-d" | "core_d" => Ok(Policy::CoreD),
            "ag" => Ok(Policy::Ag),
            "me" => Ok(Policy::Me),
            _ => Err(ParseNameError {
                kind: "policy",
                value: s.to_string(),
            }),
        }
    }
}

/// How discrete attributes are asked during a session.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum QueryMode {
    /// Use each attribute's declared query style.
    #[default]
    Declared,
    /// Ask every discrete attribute as an open question.
    Attribute,
    /// Ask every discrete attribute as yes/no value questions.
    Value,
}

impl QueryMode {
    pub fn name(self) -> &'static str {
        match self {
            QueryMode::Declared => "declared",
            QueryMode::Attribute => "attr",
            QueryMode::Value => "value",
        }
    }

    /// Effective style of `attr`; continuous attributes always use thresholds.
    pub fn style(self, catalog: &Catalog, attr: AttrIdx) -> QueryStyle {
        let schema = catalog.attribute(attr);
        if !schema.is_discrete() {
            return QueryStyle::ThresholdQuery;
        }
        match self {
            QueryMode::Declared => schema.query_style,
            QueryMode::Attribute => QueryStyle::IdQuery,
            QueryMode::Value => QueryStyle::ValueQuery,
        }
    }
}

impl fmt::Display for QueryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueryMode {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "declared" => Ok(QueryMode::Declared),
            "attr" | "attribute" => Ok(QueryMode::Attribute),
            "value" => Ok(QueryMode::Value),
            _ => Err(ParseNameError {
                kind: "mode",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DependenceRefresh {
    /// Re-estimate from the unchecked items every turn.
    #[default]
    PerTurn,
    /// Estimate once from the full catalog.
    Frozen,
}

/// Where `core-d` takes its dependence model from.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum DependenceInput {
    #[default]
    Statistical,
    External(Arc<DependenceModel>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyConfig {
    pub policy: Policy,
    pub mode: QueryMode,
    pub dependence_refresh: DependenceRefresh,
    pub dependence: DependenceInput,
}

impl PolicyConfig {
    pub fn new(policy: Policy, mode: QueryMode) -> Self {
        PolicyConfig {
            policy,
            mode,
            dependence_refresh: DependenceRefresh::default(),
            dependence: DependenceInput::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QueryAction {
    Item(ItemIdx),
    Attribute(AttrIdx),
    Value(AttrIdx, ValueIdx),
    Threshold(AttrIdx, f64),
}

impl QueryAction {
    fn rank(&self) -> u8 {
        match self {
            QueryAction::Item(_) => 0,
            QueryAction::Attribute(_) => 1,
            QueryAction::Value(..) => 2,
            QueryAction::Threshold(..) => 3,
        }
    }

    /// Tie-break order: kind, then item id or attribute name, then value.
    fn tie_order(&self, other: &QueryAction, catalog: &Catalog) -> Ordering {
        let name = |a: &QueryAction| match *a {
            QueryAction::Item(i) => catalog.item_id(i),
            QueryAction::Attribute(x) | QueryAction::Value(x, _) | QueryAction::Threshold(x, _) => {
                &catalog.attribute(x).name
            }
        };
        let sub = |a: &QueryAction| match *a {
            QueryAction::Value(_, w) => w.0 as f64,
            QueryAction::Threshold(_, t) => t,
            _ => 0.0,
        };
        self.rank()
            .cmp(&other.rank())
            .then_with(|| name(self).cmp(name(other)))
            .then_with(|| sub(self).total_cmp(&sub(other)))
    }

    /// Human-readable question, for logs and examples.
    pub fn describe(&self, catalog: &Catalog) -> String {
        match *self {
            QueryAction::Item(i) => format!("recommend {}?", catalog.item_id(i)),
            QueryAction::Attribute(x) => format!("which {}?", catalog.attribute(x).name),
            QueryAction::Value(x, w) => {
                format!("{} = {}?", catalog.attribute(x).name, catalog.symbol(x, w))
            }
            QueryAction::Threshold(x, t) => format!("{} >= {t}?", catalog.attribute(x).name),
        }
    }
}

/// An action together with its expected certainty gain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredAction {
    pub action: QueryAction,
    pub gain: ExpectedGain,
}

/// Picks the best-gain candidate; near-ties go to the first in tie-break order.
fn argmax(
    ctx: &GainContext<'_>,
    mut candidates: Vec<ScoredAction>,
) -> Result<ScoredAction, PolicyError> {
    let catalog = ctx.catalog();
    candidates.sort_by(|a, b| a.action.tie_order(&b.action, catalog));
    let eps = TIE_TOLERANCE * ctx.total();
    candidates
        .into_iter()
        .reduce(|best, c| if c.gain > best.gain + eps { c } else { best })
        .ok_or(PolicyError::NoCandidates)
}

/// Action selection for any configured policy.
///
/// `dep` overrides the dependence model for `core-d`; without it the model is
/// estimated from the context's unchecked items.
pub fn select_action(
    ctx: &GainContext<'_>,
    cfg: &PolicyConfig,
    dep: Option<&DependenceModel>,
) -> Result<ScoredAction, PolicyError> {
    match cfg.policy {
        Policy::Core => core_select(ctx, cfg.mode, None),
        Policy::CoreD => match dep {
            Some(dep) => core_select(ctx, cfg.mode, Some(dep)),
            None => {
                let estimated = estimate_dependence(ctx.catalog(), &ctx.frontier().items);
                core_select(ctx, cfg.mode, Some(&estimated))
            }
        },
        Policy::Ag => ag_select(ctx),
        Policy::Me => me_select(ctx, cfg.mode),
    }
}

/// Maximum expected certainty gain over items, attribute questions, value
/// questions and thresholds, each attribute contributing only candidates of
/// its effective style.
pub fn core_select(
    ctx: &GainContext<'_>,
    mode: QueryMode,
    dep: Option<&DependenceModel>,
) -> Result<ScoredAction, PolicyError> {
    let catalog = ctx.catalog();
    let frontier = ctx.frontier();
    let mut candidates = Vec::with_capacity(frontier.items.len() + frontier.attrs.len() * 4);
    for item in frontier.items.iter() {
        candidates.push(ScoredAction {
            action: QueryAction::Item(item),
            gain: gain::item_gain(ctx, item)?,
        });
    }
    for &attr in &frontier.attrs {
        match mode.style(catalog, attr) {
            QueryStyle::IdQuery => {
                let g = match dep {
                    Some(dep) => gain::dependence_gain(ctx, dep, attr)?,
                    None => gain::attribute_gain(ctx, attr)?,
                };
                candidates.push(ScoredAction {
                    action: QueryAction::Attribute(attr),
                    gain: g,
                });
            }
            QueryStyle::ValueQuery => {
                for &w in &frontier.values[attr.0] {
                    let g = match dep {
                        Some(dep) => gain::dependence_value_gain(ctx, dep, attr, w)?,
                        None => gain::value_gain(ctx, attr, w)?,
                    };
                    candidates.push(ScoredAction {
                        action: QueryAction::Value(attr, w),
                        gain: g,
                    });
                }
            }
            QueryStyle::ThresholdQuery => {
                let t = gain::propose_threshold(ctx, attr)?;
                candidates.push(ScoredAction {
                    action: QueryAction::Threshold(attr, t),
                    gain: gain::threshold_gain(ctx, attr, t)?,
                });
            }
        }
    }
    argmax(ctx, candidates)
}

/// Recommend the highest-scored unchecked item, lowest id on ties.
pub fn ag_select(ctx: &GainContext<'_>) -> Result<ScoredAction, PolicyError> {
    let catalog = ctx.catalog();
    let scores = ctx.scores();
    let best = ctx
        .frontier()
        .items
        .iter()
        .reduce(|best, i| match scores.get(i).total_cmp(&scores.get(best)) {
            Ordering::Greater => i,
            Ordering::Equal if catalog.item_id(i) < catalog.item_id(best) => i,
            _ => best,
        })
        .ok_or(PolicyError::NoCandidates)?;
    Ok(ScoredAction {
        action: QueryAction::Item(best),
        gain: gain::item_gain(ctx, best)?,
    })
}

/// Natural-log entropy of an attribute's value counts over unchecked items.
pub fn count_entropy(ctx: &GainContext<'_>, attr: AttrIdx) -> f64 {
    let counts = value_counts(ctx, attr);
    let n = ctx.frontier().items.len() as f64;
    -counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

fn value_counts(ctx: &GainContext<'_>, attr: AttrIdx) -> Vec<usize> {
    let catalog = ctx.catalog();
    let mut counts = vec![0usize; catalog.attribute(attr).values.len()];
    for item in ctx.frontier().items.iter() {
        counts[catalog.value_of(item, attr).0] += 1;
    }
    counts
}

/// Ask the unchecked discrete attribute of maximum count entropy; for
/// value-style attributes ask its most frequent unchecked value. Falls back to
/// [`ag_select`] once no discrete attribute is left.
pub fn me_select(ctx: &GainContext<'_>, mode: QueryMode) -> Result<ScoredAction, PolicyError> {
    let catalog = ctx.catalog();
    let frontier = ctx.frontier();
    let mut best: Option<(AttrIdx, f64)> = None;
    let mut attrs: Vec<AttrIdx> = frontier
        .attrs
        .iter()
        .copied()
        .filter(|&a| catalog.attribute(a).is_discrete())
        .filter(|&a| {
            mode.style(catalog, a) == QueryStyle::IdQuery || !frontier.values[a.0].is_empty()
        })
        .collect();
    attrs.sort_by(|a, b| catalog.attribute(*a).name.cmp(&catalog.attribute(*b).name));
    for attr in attrs {
        let h = count_entropy(ctx, attr);
        match best {
            Some((_, bh)) if h <= bh + 1e-12 => {}
            _ => best = Some((attr, h)),
        }
    }
    let Some((attr, _)) = best else {
        return ag_select(ctx);
    };
    match mode.style(catalog, attr) {
        QueryStyle::IdQuery => Ok(ScoredAction {
            action: QueryAction::Attribute(attr),
            gain: gain::attribute_gain(ctx, attr)?,
        }),
        _ => {
            let counts = value_counts(ctx, attr);
            let value = frontier.values[attr.0]
                .iter()
                .copied()
                .reduce(|best, w| {
                    if counts[w.0] > counts[best.0] {
                        w
                    } else {
                        best
                    }
                })
                .expect("value-style candidate has an unchecked value");
            Ok(ScoredAction {
                action: QueryAction::Value(attr, value),
                gain: gain::value_gain(ctx, attr, value)?,
            })
        }
    }
}
