//! Expected certainty gain of every query kind.
//!
//! All functions are pure over a [`GainContext`]: the catalog, the frozen
//! score vector, and the current unchecked sets. Let `R` be the unchecked score
//! mass and `m(S)` the mass of an unchecked subset `S`. Answer probabilities are
//! mass ratios, `Pr(S) = m(S) / R`, and the certainty gain of an answer is the
//! mass it rules out.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::catalog::{AttrIdx, Catalog, Cell, ItemIdx, ItemSet, ValueIdx};
use crate::scorer::{DependenceModel, ScoreVector};

/// Expected certainty gain, in units of score mass.
pub type ExpectedGain = f64;

#[derive(Debug, Error, PartialEq)]
pub enum GainError {
    #[error("no unchecked items")]
    EmptyFrontier,
    #[error("unchecked items carry zero score mass")]
    ZeroMass,
    #[error("item {0:?} is already checked")]
    ItemChecked(String),
    #[error("attribute {0:?} is already checked")]
    AttributeChecked(String),
    #[error("attribute {0:?} is not discrete")]
    NotDiscrete(String),
    #[error("attribute {0:?} is not continuous")]
    NotContinuous(String),
    #[error("value {value} of attribute {attr:?} is already checked")]
    ValueChecked { attr: String, value: String },
}

/// The unchecked sets after some number of turns.
#[derive(Clone, Debug, PartialEq)]
pub struct Frontier {
    pub items: ItemSet,
    pub attrs: BTreeSet<AttrIdx>,
    /// Unchecked values per attribute, indexed by attribute. Empty for
    /// continuous attributes.
    pub values: Vec<BTreeSet<ValueIdx>>,
}

impl Frontier {
    /// Nothing checked yet.
    pub fn full(catalog: &Catalog) -> Self {
        Frontier::with_items(catalog, catalog.all_items())
    }

    /// All attributes and values unchecked, restricted to `items`.
    pub fn with_items(catalog: &Catalog, items: ItemSet) -> Self {
        Frontier {
            items,
            attrs: catalog.attr_indices().collect(),
            values: catalog
                .attributes()
                .iter()
                .map(|a| (0..a.values.len()).map(ValueIdx).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GainContext<'a> {
    catalog: &'a Catalog,
    scores: &'a ScoreVector,
    frontier: &'a Frontier,
    total: f64,
}

impl<'a> GainContext<'a> {
    pub fn new(
        catalog: &'a Catalog,
        scores: &'a ScoreVector,
        frontier: &'a Frontier,
    ) -> Result<Self, GainError> {
        if frontier.items.is_empty() {
            return Err(GainError::EmptyFrontier);
        }
        let total = scores.mass(&frontier.items);
        if total <= 0.0 {
            return Err(GainError::ZeroMass);
        }
        Ok(GainContext {
            catalog,
            scores,
            frontier,
            total,
        })
    }

    pub fn catalog(&self) -> &'a Catalog {
        self.catalog
    }

    pub fn scores(&self) -> &'a ScoreVector {
        self.scores
    }

    pub fn frontier(&self) -> &'a Frontier {
        self.frontier
    }

    /// Unchecked score mass `R`.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Unchecked mass holding each declared value of a discrete attribute.
    pub fn value_masses(&self, attr: AttrIdx) -> Vec<f64> {
        let mut masses = vec![0.0; self.catalog.attribute(attr).values.len()];
        for item in self.frontier.items.iter() {
            masses[self.catalog.value_of(item, attr).0] += self.scores.get(item);
        }
        masses
    }

    fn check_item(&self, item: ItemIdx) -> Result<(), GainError> {
        if self.frontier.items.contains(item) {
            Ok(())
        } else {
            Err(GainError::ItemChecked(
                self.catalog.item_id(item).to_string(),
            ))
        }
    }

    fn check_discrete(&self, attr: AttrIdx) -> Result<(), GainError> {
        let schema = self.catalog.attribute(attr);
        if !schema.is_discrete() {
            return Err(GainError::NotDiscrete(schema.name.clone()));
        }
        if !self.frontier.attrs.contains(&attr) {
            return Err(GainError::AttributeChecked(schema.name.clone()));
        }
        Ok(())
    }

    fn check_value(&self, attr: AttrIdx, value: ValueIdx) -> Result<(), GainError> {
        self.check_discrete(attr)?;
        if self.frontier.values[attr.0].contains(&value) {
            Ok(())
        } else {
            Err(GainError::ValueChecked {
                attr: self.catalog.attribute(attr).name.clone(),
                value: self.catalog.symbol(attr, value).to_string(),
            })
        }
    }

    fn check_continuous(&self, attr: AttrIdx) -> Result<(), GainError> {
        let schema = self.catalog.attribute(attr);
        if schema.is_discrete() {
            return Err(GainError::NotContinuous(schema.name.clone()));
        }
        Ok(())
    }

    fn continuous_values(&self, attr: AttrIdx) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.frontier.items.iter().map(move |item| {
            let x = match self.catalog.cell(item, attr) {
                Cell::Continuous(x) => x,
                Cell::Discrete(_) => unreachable!("checked continuous"),
            };
            (self.scores.get(item), x)
        })
    }

    /// Unchecked discrete attributes, the range of the dependence sums.
    fn discrete_attrs(&self) -> impl Iterator<Item = AttrIdx> + '_ {
        self.frontier
            .attrs
            .iter()
            .copied()
            .filter(|&a| self.catalog.attribute(a).is_discrete())
    }
}

/// Gain of a yes/no question whose Yes side keeps mass `yes_mass`:
/// Yes rules out the rest, No rules out `yes_mass`.
fn binary_split(total: f64, yes_mass: f64) -> f64 {
    let no_mass = total - yes_mass;
    let p_yes = yes_mass / total;
    no_mass * p_yes + yes_mass * (1.0 - p_yes)
}

/// Recommending `item`: a hit settles everything, a miss checks only `item`.
pub fn item_gain(ctx: &GainContext<'_>, item: ItemIdx) -> Result<ExpectedGain, GainError> {
    ctx.check_item(item)?;
    let score = ctx.scores.get(item);
    let p_hit = score / ctx.total;
    Ok(ctx.total * p_hit + score * (1.0 - p_hit))
}

/// Asking for the user's value of a discrete attribute (open question).
pub fn attribute_gain(ctx: &GainContext<'_>, attr: AttrIdx) -> Result<ExpectedGain, GainError> {
    ctx.check_discrete(attr)?;
    let r = ctx.total;
    Ok(ctx
        .value_masses(attr)
        .into_iter()
        .map(|m| (r - m) * (m / r))
        .sum())
}

/// Asking whether the user wants `value` on `attr` (yes/no question).
pub fn value_gain(
    ctx: &GainContext<'_>,
    attr: AttrIdx,
    value: ValueIdx,
) -> Result<ExpectedGain, GainError> {
    ctx.check_value(attr, value)?;
    let held: f64 = ctx
        .frontier
        .items
        .iter()
        .filter(|&i| ctx.catalog.value_of(i, attr) == value)
        .map(|i| ctx.scores.get(i))
        .sum();
    Ok(binary_split(ctx.total, held))
}

/// Score-weighted mean of a continuous attribute over unchecked items.
pub fn propose_threshold(ctx: &GainContext<'_>, attr: AttrIdx) -> Result<f64, GainError> {
    ctx.check_continuous(attr)?;
    let weighted: f64 = ctx.continuous_values(attr).map(|(s, x)| s * x).sum();
    Ok(weighted / ctx.total)
}

/// Asking whether the user wants at least `threshold` on a continuous attribute.
/// Items equal to the threshold fall on the Yes side.
pub fn threshold_gain(
    ctx: &GainContext<'_>,
    attr: AttrIdx,
    threshold: f64,
) -> Result<ExpectedGain, GainError> {
    ctx.check_continuous(attr)?;
    let at_least: f64 = ctx
        .continuous_values(attr)
        .filter(|&(_, x)| x >= threshold)
        .map(|(s, _)| s)
        .sum();
    Ok(binary_split(ctx.total, at_least))
}

/// Attribute query gain that also credits what the answer reveals about the
/// other unchecked discrete attributes (the queried one included).
///
/// For each possible answer `w` on `attr`, weighted by its mass ratio, sums over
/// every unchecked discrete `b` and value `u` the mass ruled out by "user wants
/// `u`" times `cond_eq(attr, w, b, u)`.
pub fn dependence_gain(
    ctx: &GainContext<'_>,
    dep: &DependenceModel,
    attr: AttrIdx,
) -> Result<ExpectedGain, GainError> {
    ctx.check_discrete(attr)?;
    let r = ctx.total;
    let masses = masses_by_attr(ctx);
    let mut gain = 0.0;
    for (w, m) in ctx.value_masses(attr).into_iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let w = ValueIdx(w);
        let revealed: f64 = masses
            .iter()
            .map(|(b, bm)| {
                bm.iter()
                    .enumerate()
                    .map(|(u, &mu)| (r - mu) * dep.cond_eq(attr, w, *b, ValueIdx(u)))
                    .sum::<f64>()
            })
            .sum();
        gain += revealed * (m / r);
    }
    Ok(gain)
}

/// Value query gain crediting dependent attributes on both branches.
///
/// Yes expands with `cond_eq`, crediting the mass ruled out by "user wants `u`";
/// No expands with `cond_neq`, crediting the mass ruled out by "user rejects `u`".
pub fn dependence_value_gain(
    ctx: &GainContext<'_>,
    dep: &DependenceModel,
    attr: AttrIdx,
    value: ValueIdx,
) -> Result<ExpectedGain, GainError> {
    ctx.check_value(attr, value)?;
    let r = ctx.total;
    let masses = masses_by_attr(ctx);
    let (mut yes, mut no) = (0.0, 0.0);
    for (b, bm) in &masses {
        for (u, &mu) in bm.iter().enumerate() {
            let u = ValueIdx(u);
            yes += (r - mu) * dep.cond_eq(attr, value, *b, u);
            no += mu * dep.cond_neq(attr, value, *b, u);
        }
    }
    let held = masses
        .iter()
        .find(|(b, _)| *b == attr)
        .map(|(_, bm)| bm[value.0])
        .expect("queried attribute is unchecked");
    let p_yes = held / r;
    Ok(yes * p_yes + no * (1.0 - p_yes))
}

fn masses_by_attr(ctx: &GainContext<'_>) -> Vec<(AttrIdx, Vec<f64>)> {
    ctx.discrete_attrs()
        .map(|b| (b, ctx.value_masses(b)))
        .collect()
}
