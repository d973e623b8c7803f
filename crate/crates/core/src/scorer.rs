//! Relevance scores and attribute dependence estimates.
//!
//! Scores come from outside (a file, an interaction count, or the uniform
//! cold-start vector); nothing here trains a model. Scores need not sum to one,
//! every downstream formula is a ratio of score masses.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::catalog::{AttrIdx, Catalog, ItemIdx, ItemSet, ValueIdx};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing item {0:?}")]
    MissingItem(String),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("score for {item:?} must be finite and nonnegative, got {score}")]
    InvalidScore { item: String, score: f64 },
    #[error("negative count {count} for item {item:?}")]
    NegativeCount { item: String, count: f64 },
    #[error("smoothing must be finite and nonnegative, got {0}")]
    InvalidSmoothing(f64),
    #[error("all-zero vector")]
    AllZero,
    #[error("score vector has {got} entries for a catalog of {expected} items")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unknown attribute {0:?} in dependence file")]
    UnknownAttribute(String),
    #[error("attribute {attr:?} has no value {value:?}")]
    UnknownValue { attr: String, value: String },
    #[error("attribute {0:?} is continuous; dependence is defined on discrete attributes")]
    ContinuousAttribute(String),
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> ScoreError + '_ {
    move |source| ScoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Estimated relevance per catalog item, indexed by [`ItemIdx`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector {
    scores: Vec<f64>,
}

impl ScoreVector {
    pub fn new(catalog: &Catalog, scores: Vec<f64>) -> Result<Self, ScoreError> {
        if scores.len() != catalog.len() {
            return Err(ScoreError::LengthMismatch {
                expected: catalog.len(),
                got: scores.len(),
            });
        }
        for (i, &s) in scores.iter().enumerate() {
            if !s.is_finite() || s < 0.0 {
                return Err(ScoreError::InvalidScore {
                    item: catalog.item_id(ItemIdx(i)).to_string(),
                    score: s,
                });
            }
        }
        if scores.iter().all(|&s| s == 0.0) {
            return Err(ScoreError::AllZero);
        }
        Ok(ScoreVector { scores })
    }

    pub fn from_map(catalog: &Catalog, map: &HashMap<String, f64>) -> Result<Self, ScoreError> {
        if let Some(unknown) = map.keys().find(|id| catalog.item_index(id).is_none()) {
            return Err(ScoreError::UnknownItem(unknown.clone()));
        }
        let scores = catalog
            .items()
            .iter()
            .map(|item| {
                map.get(&item.id)
                    .copied()
                    .ok_or_else(|| ScoreError::MissingItem(item.id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        ScoreVector::new(catalog, scores)
    }

    pub fn get(&self, item: ItemIdx) -> f64 {
        self.scores[item.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Total score over a subset of items.
    pub fn mass(&self, items: &ItemSet) -> f64 {
        items.iter().map(|i| self.scores[i.0]).sum()
    }

    /// Every score multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> ScoreVector {
        assert!(
            factor > 0.0 && factor.is_finite(),
            "scale factor must be positive"
        );
        ScoreVector {
            scores: self.scores.iter().map(|s| s * factor).collect(),
        }
    }

    pub fn to_map(&self, catalog: &Catalog) -> BTreeMap<String, f64> {
        catalog
            .items()
            .iter()
            .zip(&self.scores)
            .map(|(item, &s)| (item.id.clone(), s))
            .collect()
    }
}

/// Uniform `1/M` scores: the recommender knows nothing about the user.
pub fn cold_start_scores(catalog: &Catalog) -> ScoreVector {
    let m = catalog.len();
    ScoreVector {
        scores: vec![1.0 / m as f64; m],
    }
}

/// Scores from a flat JSON map of item id to number.
pub fn load_scores(path: impl AsRef<Path>, catalog: &Catalog) -> Result<ScoreVector, ScoreError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    scores_from_json_str(&text, catalog)
}

pub fn scores_from_json_str(text: &str, catalog: &Catalog) -> Result<ScoreVector, ScoreError> {
    let map: HashMap<String, f64> = serde_json::from_str(text)?;
    ScoreVector::from_map(catalog, &map)
}

/// Normalized `count + smoothing` scores from an `item_id,count` CSV file.
pub fn frequency_scores(
    interactions: impl AsRef<Path>,
    catalog: &Catalog,
    smoothing: f64,
) -> Result<ScoreVector, ScoreError> {
    let path = interactions.as_ref();
    let file = std::fs::File::open(path).map_err(io_error(path))?;
    frequency_scores_from_reader(file, catalog, smoothing)
}

pub fn frequency_scores_from_reader(
    reader: impl std::io::Read,
    catalog: &Catalog,
    smoothing: f64,
) -> Result<ScoreVector, ScoreError> {
    #[derive(Deserialize)]
    struct Row {
        item_id: String,
        count: f64,
    }

    if !smoothing.is_finite() || smoothing < 0.0 {
        return Err(ScoreError::InvalidSmoothing(smoothing));
    }
    let mut counts = vec![smoothing; catalog.len()];
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        if !row.count.is_finite() || row.count < 0.0 {
            return Err(ScoreError::NegativeCount {
                item: row.item_id,
                count: row.count,
            });
        }
        let idx = catalog
            .item_index(&row.item_id)
            .ok_or_else(|| ScoreError::UnknownItem(row.item_id.clone()))?;
        counts[idx.0] += row.count;
    }
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        return Err(ScoreError::AllZero);
    }
    let scores = counts.into_iter().map(|c| c / total).collect();
    ScoreVector::new(catalog, scores)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DependenceSource {
    Statistical,
    ExternalFile,
}

/// Conditional answer probabilities between attribute values.
///
/// `cond_eq(a, w, b, u)` estimates Pr(user wants `u` on `b` | user wants `w` on `a`);
/// `cond_neq(a, w, b, u)` estimates Pr(user rejects `u` on `b` | user rejects `w` on `a`).
/// Both tables are dense over the catalog's discrete (attribute, value) slots.
#[derive(Clone, Debug, PartialEq)]
pub struct DependenceModel {
    source: DependenceSource,
    offsets: Vec<Option<usize>>,
    width: usize,
    eq: Vec<f64>,
    neq: Vec<f64>,
}

impl DependenceModel {
    fn zeroed(catalog: &Catalog, source: DependenceSource) -> Self {
        let mut offsets = Vec::with_capacity(catalog.attributes().len());
        let mut width = 0;
        for attr in catalog.attributes() {
            if attr.is_discrete() {
                offsets.push(Some(width));
                width += attr.values.len();
            } else {
                offsets.push(None);
            }
        }
        DependenceModel {
            source,
            offsets,
            width,
            eq: vec![0.0; width * width],
            neq: vec![0.0; width * width],
        }
    }

    fn slot(&self, attr: AttrIdx, value: ValueIdx) -> usize {
        self.offsets[attr.0].expect("dependence is defined on discrete attributes") + value.0
    }

    fn at(&self, a: AttrIdx, w: ValueIdx, b: AttrIdx, u: ValueIdx) -> usize {
        self.slot(a, w) * self.width + self.slot(b, u)
    }

    pub fn source(&self) -> DependenceSource {
        self.source
    }

    pub fn cond_eq(&self, a: AttrIdx, w: ValueIdx, b: AttrIdx, u: ValueIdx) -> f64 {
        self.eq[self.at(a, w, b, u)]
    }

    pub fn cond_neq(&self, a: AttrIdx, w: ValueIdx, b: AttrIdx, u: ValueIdx) -> f64 {
        self.neq[self.at(a, w, b, u)]
    }

    /// Reads the nested `a -> w_a -> a' -> w_a' -> weight` JSON map.
    ///
    /// Weights are clamped to `[0, 1]` and used for both the Yes and the No
    /// branch. Pairs absent from the file weigh 0. Within one attribute the
    /// tables are fixed to the identity (an answer determines itself).
    pub fn from_json_str(text: &str, catalog: &Catalog) -> Result<Self, ScoreError> {
        type Nested = BTreeMap<String, BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>>;
        let raw: Nested = serde_json::from_str(text)?;
        let mut model = DependenceModel::zeroed(catalog, DependenceSource::ExternalFile);
        let lookup = |attr: &str, value: &str| -> Result<(AttrIdx, ValueIdx), ScoreError> {
            let a = catalog
                .attr_index(attr)
                .ok_or_else(|| ScoreError::UnknownAttribute(attr.to_string()))?;
            let schema = catalog.attribute(a);
            if !schema.is_discrete() {
                return Err(ScoreError::ContinuousAttribute(attr.to_string()));
            }
            let w = schema
                .values
                .iter()
                .position(|s| s.key() == value)
                .ok_or_else(|| ScoreError::UnknownValue {
                    attr: attr.to_string(),
                    value: value.to_string(),
                })?;
            Ok((a, ValueIdx(w)))
        };
        for (a_name, by_value) in &raw {
            for (w_name, by_attr) in by_value {
                let (a, w) = lookup(a_name, w_name)?;
                for (b_name, by_b_value) in by_attr {
                    for (u_name, &weight) in by_b_value {
                        let (b, u) = lookup(b_name, u_name)?;
                        if a == b {
                            continue;
                        }
                        let clamped = if weight.is_nan() {
                            0.0
                        } else {
                            weight.clamp(0.0, 1.0)
                        };
                        let at = model.at(a, w, b, u);
                        model.eq[at] = clamped;
                        model.neq[at] = clamped;
                    }
                }
            }
        }
        model.fill_identity(catalog);
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>, catalog: &Catalog) -> Result<Self, ScoreError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        DependenceModel::from_json_str(&text, catalog)
    }

    fn fill_identity(&mut self, catalog: &Catalog) {
        for a in catalog.attr_indices() {
            let schema = catalog.attribute(a);
            if !schema.is_discrete() {
                continue;
            }
            for w in 0..schema.values.len() {
                for u in 0..schema.values.len() {
                    let at = self.at(a, ValueIdx(w), a, ValueIdx(u));
                    let same = if w == u { 1.0 } else { 0.0 };
                    self.eq[at] = same;
                    self.neq[at] = same;
                }
            }
        }
    }
}

/// Count-ratio conditional probabilities over the unchecked items.
///
/// A conditioning event with no supporting item yields 0.
pub fn estimate_dependence(catalog: &Catalog, unchecked: &ItemSet) -> DependenceModel {
    let mut model = DependenceModel::zeroed(catalog, DependenceSource::Statistical);
    let discrete: Vec<AttrIdx> = catalog
        .attr_indices()
        .filter(|&a| catalog.attribute(a).is_discrete())
        .collect();
    let n = unchecked.len() as f64;
    let width = model.width;
    // joint[s1 * width + s2] = items with slot s1 and slot s2 both set
    let mut joint = vec![0.0f64; width * width];
    let mut single = vec![0.0f64; width];
    let mut slots = Vec::with_capacity(discrete.len());
    for item in unchecked.iter() {
        slots.clear();
        slots.extend(
            discrete
                .iter()
                .map(|&a| model.slot(a, catalog.value_of(item, a))),
        );
        for &s in &slots {
            single[s] += 1.0;
            for &t in &slots {
                joint[s * width + t] += 1.0;
            }
        }
    }
    for &a in &discrete {
        for w in 0..catalog.attribute(a).values.len() {
            let s = model.slot(a, ValueIdx(w));
            let with = single[s];
            let without = n - with;
            for &b in &discrete {
                for u in 0..catalog.attribute(b).values.len() {
                    let t = model.slot(b, ValueIdx(u));
                    let both = joint[s * width + t];
                    // |a != w and b != u| = n - |a = w| - |b = u| + |a = w and b = u|
                    let neither = n - with - single[t] + both;
                    let at = s * width + t;
                    model.eq[at] = if with > 0.0 { both / with } else { 0.0 };
                    model.neq[at] = if without > 0.0 {
                        neither / without
                    } else {
                        0.0
                    };
                }
            }
        }
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn s3() -> Catalog {
        Catalog::from_json_str(
            r#"{
            "attributes": [
                {"name": "level", "kind": "discrete", "values": [3, 5], "query_style": "value_query"},
                {"name": "shower", "kind": "discrete", "values": ["N", "Y"], "query_style": "value_query"},
                {"name": "c", "kind": "discrete", "values": ["p", "q"], "query_style": "value_query"}
            ],
            "items": [
                {"id": "v1", "values": {"level": 3, "shower": "N", "c": "p"}},
                {"id": "v2", "values": {"level": 3, "shower": "N", "c": "q"}},
                {"id": "v3", "values": {"level": 5, "shower": "Y", "c": "p"}},
                {"id": "v4", "values": {"level": 5, "shower": "Y", "c": "q"}}
            ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn cold_start_is_uniform() {
        let catalog = s3();
        let scores = cold_start_scores(&catalog);
        assert!(scores.as_slice().iter().all(|&s| s == 0.25));
        assert_eq!(scores.mass(&catalog.all_items()), 1.0);
    }

    #[test]
    fn score_map_validation() {
        let catalog = s3();
        let scores =
            scores_from_json_str(r#"{"v1":0.4,"v2":0.3,"v3":0.2,"v4":0.1}"#, &catalog).unwrap();
        assert_eq!(scores.as_slice(), &[0.4, 0.3, 0.2, 0.1]);
        assert!(matches!(
            scores_from_json_str(r#"{"v1":0.4,"v2":0.3,"v3":0.2}"#, &catalog),
            Err(ScoreError::MissingItem(id)) if id == "v4"
        ));
        let zeros = scores_from_json_str(r#"{"v1":0,"v2":0,"v3":0,"v4":0}"#, &catalog).unwrap_err();
        assert!(matches!(zeros, ScoreError::AllZero));
        assert_eq!(zeros.to_string(), "all-zero vector");
        assert!(matches!(
            scores_from_json_str(r#"{"v1":-1,"v2":0,"v3":0,"v4":1}"#, &catalog),
            Err(ScoreError::InvalidScore { .. })
        ));
        assert!(matches!(
            scores_from_json_str(r#"{"v1":1,"v2":0,"v3":0,"v4":1,"v9":1}"#, &catalog),
            Err(ScoreError::UnknownItem(_))
        ));
    }

    fn two_items() -> Catalog {
        Catalog::from_json_str(
            r#"{"attributes": [], "items": [{"id": "v1", "values": {}}, {"id": "v2", "values": {}}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn frequency_normalizes_counts() {
        let catalog = two_items();
        let s =
            frequency_scores_from_reader("item_id,count\nv1,3\nv2,1\n".as_bytes(), &catalog, 0.0)
                .unwrap();
        assert_eq!(s.as_slice(), &[0.75, 0.25]);
        let s = frequency_scores_from_reader("item_id,count\n".as_bytes(), &catalog, 1.0).unwrap();
        assert_eq!(s.as_slice(), &[0.5, 0.5]);
        let s = frequency_scores_from_reader("item_id,count\nv1,1\n".as_bytes(), &catalog, 0.0)
            .unwrap();
        assert_eq!(s.as_slice(), &[1.0, 0.0]);
        assert!(matches!(
            frequency_scores_from_reader("item_id,count\nv1,-2\n".as_bytes(), &catalog, 0.0),
            Err(ScoreError::NegativeCount { .. })
        ));
        assert!(matches!(
            frequency_scores_from_reader("item_id,count\n".as_bytes(), &catalog, 0.0),
            Err(ScoreError::AllZero)
        ));
    }

    #[test]
    fn statistical_dependence_ratios() {
        let catalog = s3();
        let dep = estimate_dependence(&catalog, &catalog.all_items());
        let level = catalog.attr_index("level").unwrap();
        let shower = catalog.attr_index("shower").unwrap();
        let c = catalog.attr_index("c").unwrap();
        let (l3, l5) = (ValueIdx(0), ValueIdx(1));
        let (sn, sy) = (ValueIdx(0), ValueIdx(1));
        assert_eq!(dep.cond_eq(level, l5, shower, sy), 1.0);
        assert_eq!(dep.cond_eq(level, l3, shower, sy), 0.0);
        assert_eq!(dep.cond_eq(level, l3, c, ValueIdx(0)), 0.5);
        assert_eq!(dep.cond_eq(level, l3, level, l3), 1.0);
        assert_eq!(dep.cond_neq(level, l5, shower, sn), 0.0);
        assert_eq!(dep.cond_neq(level, l5, shower, sy), 1.0);
        assert_eq!(dep.source(), DependenceSource::Statistical);
    }

    #[test]
    fn statistical_conditionals_sum_to_one() {
        let catalog = s3();
        let subset: ItemSet = [ItemIdx(0), ItemIdx(1), ItemIdx(2)].into_iter().collect();
        let dep = estimate_dependence(&catalog, &subset);
        for a in catalog.attr_indices() {
            for w in 0..2 {
                let supported = subset.iter().any(|i| catalog.value_of(i, a) == ValueIdx(w));
                for b in catalog.attr_indices() {
                    let total: f64 = (0..2)
                        .map(|u| dep.cond_eq(a, ValueIdx(w), b, ValueIdx(u)))
                        .sum();
                    if supported {
                        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
                    } else {
                        assert_eq!(total, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn external_weights_are_clamped() {
        let catalog = s3();
        let dep = DependenceModel::from_json_str(
            r#"{"level": {"5": {"shower": {"Y": 1.7, "N": -0.2}}}}"#,
            &catalog,
        )
        .unwrap();
        let level = catalog.attr_index("level").unwrap();
        let shower = catalog.attr_index("shower").unwrap();
        assert_eq!(dep.cond_eq(level, ValueIdx(1), shower, ValueIdx(1)), 1.0);
        assert_eq!(dep.cond_eq(level, ValueIdx(1), shower, ValueIdx(0)), 0.0);
        assert_eq!(dep.cond_neq(level, ValueIdx(1), shower, ValueIdx(1)), 1.0);
        assert_eq!(dep.cond_eq(level, ValueIdx(1), level, ValueIdx(1)), 1.0);
        assert_eq!(dep.source(), DependenceSource::ExternalFile);
        assert!(matches!(
            DependenceModel::from_json_str(r#"{"level": {"4": {}}}"#, &catalog),
            Err(ScoreError::UnknownValue { .. })
        ));
    }
}
