//! Random instances and brute-force gain oracles shared by the integration tests.
//!
//! The oracles work on plain vectors and enumerate every admissible answer:
//! each answer keeps the items consistent with it, happens with probability
//! equal to their share of the unchecked mass, and rules out the rest (all of
//! it when the answer ends the session).
#![allow(dead_code)]

use std::sync::Arc;

use certainty::catalog::{
    AttributeSchema, Cell, Item, ItemIdx, ItemSet, QueryStyle, Symbol, ValueIdx,
};
use certainty::gain::Frontier;
use certainty::{AttrIdx, Catalog, ScoreVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub enum Column {
    Discrete { arity: usize, values: Vec<usize> },
    Continuous(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub columns: Vec<Column>,
    pub scores: Vec<f64>,
    pub unchecked: Vec<bool>,
}

impl Instance {
    /// Up to 12 items, up to 4 attributes with up to 4 values, positive scores
    /// and a random nonempty unchecked subset.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..=12);
        let n = rng.random_range(1..=4);
        let columns = (0..n)
            .map(|_| {
                if rng.random_bool(0.75) {
                    let arity = rng.random_range(1..=4);
                    Column::Discrete {
                        arity,
                        values: (0..m).map(|_| rng.random_range(0..arity)).collect(),
                    }
                } else {
                    // a coarse grid makes ties with the threshold likely
                    Column::Continuous(
                        (0..m)
                            .map(|_| rng.random_range(0..6) as f64 * 0.5)
                            .collect(),
                    )
                }
            })
            .collect();
        let scores = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
        let mut unchecked: Vec<bool> = (0..m).map(|_| rng.random_bool(0.7)).collect();
        let keep = rng.random_range(0..m);
        unchecked[keep] = true;
        Instance {
            columns,
            scores,
            unchecked,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn catalog(&self) -> Catalog {
        let attributes = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| match c {
                Column::Discrete { arity, .. } => AttributeSchema::discrete(
                    format!("a{j}"),
                    (0..*arity).map(|k| Symbol::text(format!("w{k}"))).collect(),
                    QueryStyle::ValueQuery,
                ),
                Column::Continuous(_) => AttributeSchema::continuous(format!("a{j}")),
            })
            .collect();
        let items = (0..self.len())
            .map(|i| Item {
                id: format!("v{i:02}"),
                cells: self
                    .columns
                    .iter()
                    .map(|c| match c {
                        Column::Discrete { values, .. } => Cell::Discrete(ValueIdx(values[i])),
                        Column::Continuous(xs) => Cell::Continuous(xs[i]),
                    })
                    .collect(),
            })
            .collect();
        Catalog::new(attributes, items).unwrap()
    }

    pub fn score_vector(&self, catalog: &Catalog) -> ScoreVector {
        ScoreVector::new(catalog, self.scores.clone()).unwrap()
    }

    pub fn frontier(&self, catalog: &Catalog) -> Frontier {
        let items: ItemSet = (0..self.len())
            .filter(|&i| self.unchecked[i])
            .map(ItemIdx)
            .collect();
        Frontier::with_items(catalog, items)
    }

    pub fn live(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.unchecked[i])
    }

    pub fn total(&self) -> f64 {
        self.live().map(|i| self.scores[i]).sum()
    }

    pub fn discrete(&self, j: usize) -> Option<(usize, &[usize])> {
        match &self.columns[j] {
            Column::Discrete { arity, values } => Some((*arity, values)),
            Column::Continuous(_) => None,
        }
    }

    pub fn continuous(&self, j: usize) -> Option<&[f64]> {
        match &self.columns[j] {
            Column::Continuous(xs) => Some(xs),
            Column::Discrete { .. } => None,
        }
    }

    /// Expected mass ruled out, given each answer as (consistent items, ends session).
    fn enumerate(&self, answers: Vec<(Vec<usize>, bool)>) -> f64 {
        let r = self.total();
        answers
            .into_iter()
            .map(|(consistent, ends)| {
                let kept: f64 = consistent.iter().map(|&i| self.scores[i]).sum();
                let ruled_out = if ends { r } else { r - kept };
                kept / r * ruled_out
            })
            .sum()
    }

    fn split(&self, pred: impl Fn(usize) -> bool) -> (Vec<usize>, Vec<usize>) {
        self.live().partition(|&i| pred(i))
    }

    pub fn item_gain(&self, v: usize) -> f64 {
        let (hit, miss) = self.split(|i| i == v);
        self.enumerate(vec![(hit, true), (miss, false)])
    }

    pub fn attribute_gain(&self, j: usize) -> f64 {
        let (arity, values) = self.discrete(j).unwrap();
        let answers = (0..arity)
            .map(|w| (self.live().filter(|&i| values[i] == w).collect(), false))
            .collect();
        self.enumerate(answers)
    }

    pub fn value_gain(&self, j: usize, w: usize) -> f64 {
        let (_, values) = self.discrete(j).unwrap();
        let (yes, no) = self.split(|i| values[i] == w);
        self.enumerate(vec![(yes, false), (no, false)])
    }

    pub fn threshold_gain(&self, j: usize, t: f64) -> f64 {
        let xs = self.continuous(j).unwrap();
        let (yes, no) = self.split(|i| xs[i] >= t);
        self.enumerate(vec![(yes, false), (no, false)])
    }

    /// Fraction of unchecked items satisfying `cond` that also satisfy `event`.
    fn ratio(&self, cond: impl Fn(usize) -> bool, event: impl Fn(usize) -> bool) -> f64 {
        let given: Vec<usize> = self.live().filter(|&i| cond(i)).collect();
        if given.is_empty() {
            return 0.0;
        }
        given.iter().filter(|&&i| event(i)).count() as f64 / given.len() as f64
    }

    fn mass_where(&self, pred: impl Fn(usize) -> bool) -> f64 {
        self.live()
            .filter(|&i| pred(i))
            .map(|i| self.scores[i])
            .sum()
    }

    /// Every (b, u) pair over discrete attributes, with the mass holding `u`.
    fn discrete_slots(&self) -> Vec<(usize, usize, f64)> {
        let mut slots = Vec::new();
        for b in 0..self.columns.len() {
            if let Some((arity, values)) = self.discrete(b) {
                for u in 0..arity {
                    slots.push((b, u, self.mass_where(|i| values[i] == u)));
                }
            }
        }
        slots
    }

    pub fn dependence_gain(&self, j: usize) -> f64 {
        let r = self.total();
        let (arity, aval) = self.discrete(j).unwrap();
        let mut gain = 0.0;
        for w in 0..arity {
            let p = self.mass_where(|i| aval[i] == w) / r;
            for (b, u, mu) in self.discrete_slots() {
                let (_, bval) = self.discrete(b).unwrap();
                gain += p * (r - mu) * self.ratio(|i| aval[i] == w, |i| bval[i] == u);
            }
        }
        gain
    }

    pub fn dependence_value_gain(&self, j: usize, w: usize) -> f64 {
        let r = self.total();
        let (_, aval) = self.discrete(j).unwrap();
        let p_yes = self.mass_where(|i| aval[i] == w) / r;
        let mut gain = 0.0;
        for (b, u, mu) in self.discrete_slots() {
            let (_, bval) = self.discrete(b).unwrap();
            gain += p_yes * (r - mu) * self.ratio(|i| aval[i] == w, |i| bval[i] == u);
            gain += (1.0 - p_yes) * mu * self.ratio(|i| aval[i] != w, |i| bval[i] != u);
        }
        gain
    }

    /// Number of distinct values of discrete attribute `j` among unchecked items.
    pub fn live_arity(&self, j: usize) -> usize {
        let (arity, values) = self.discrete(j).unwrap();
        (0..arity)
            .filter(|&w| self.live().any(|i| values[i] == w))
            .count()
    }
}

pub fn attr(j: usize) -> AttrIdx {
    AttrIdx(j)
}

/// Arc'd synthetic catalog with cold-start scores.
pub fn synthetic(
    spec: &certainty::SyntheticSpec,
) -> (Arc<Catalog>, Arc<ScoreVector>, Vec<ItemIdx>) {
    let (catalog, targets) = certainty::catalog::generate_synthetic(spec).unwrap();
    let scores = certainty::scorer::cold_start_scores(&catalog);
    (Arc::new(catalog), Arc::new(scores), targets)
}

/// One discrete attribute whose value `w0` holds exactly half the mass: every
/// score appears twice, once on `w0` and once on another value.
pub fn half_split_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = rng.random_range(1..=6);
    let arity = rng.random_range(2..=4);
    let mut values = Vec::new();
    let mut scores = Vec::new();
    for _ in 0..pairs {
        let s: f64 = rng.random_range(0.01..1.0);
        values.push(0);
        scores.push(s);
        values.push(rng.random_range(1..arity));
        scores.push(s);
    }
    let m = scores.len();
    Instance {
        columns: vec![Column::Discrete { arity, values }],
        scores,
        unchecked: vec![true; m],
    }
}
