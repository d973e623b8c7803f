//! Items, attributes and their value spaces.
//!
//! A [`Catalog`] is immutable once built. Items are addressed by [`ItemIdx`]
//! (position in the catalog), attributes by [`AttrIdx`] and the values of a
//! discrete attribute by [`ValueIdx`] (position in its declared value list).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("catalog has no items")]
    NoItems,
    #[error("duplicate item id {0:?}")]
    DuplicateItem(String),
    #[error("duplicate attribute {0:?}")]
    DuplicateAttribute(String),
    #[error("attribute {0:?} declares no values")]
    EmptyValueSet(String),
    #[error("attribute {attr:?} declares value {value} twice")]
    DuplicateValue { attr: String, value: Symbol },
    #[error("attribute {attr:?}: query style {style:?} is not allowed for {kind:?} attributes")]
    StyleMismatch {
        attr: String,
        kind: AttributeKind,
        style: QueryStyle,
    },
    #[error("continuous attribute {0:?} must not declare a value set")]
    ValuesOnContinuous(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("item {item:?} has no value for attribute {attr:?}")]
    MissingValue { item: String, attr: String },
    #[error("item {item:?}: value outside value set for attribute {attr:?}: {value}")]
    ValueOutsideSet {
        item: String,
        attr: String,
        value: String,
    },
    #[error("item {item:?}: continuous attribute {attr:?} needs a finite number, got {value}")]
    NonNumeric {
        item: String,
        attr: String,
        value: String,
    },
    #[error("predicate {predicate} does not apply to attribute {attr:?}")]
    PredicateMismatch { attr: String, predicate: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

macro_rules! index_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }
    };
}

index_newtype!(
    /// Position of an item in its catalog.
    ItemIdx
);
index_newtype!(
    /// Position of an attribute in its catalog.
    AttrIdx
);
index_newtype!(
    /// Position of a value in a discrete attribute's declared value list.
    ValueIdx
);

/// A discrete attribute value. Compared as an exact symbol.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Symbol {
    Bool(bool),
    Number(serde_json::Number),
    Text(String),
}

impl Symbol {
    pub fn text(s: impl Into<String>) -> Self {
        Symbol::Text(s.into())
    }

    pub fn int(n: i64) -> Self {
        Symbol::Number(n.into())
    }

    /// String form used as a map key in dependence files.
    pub fn key(&self) -> String {
        match self {
            Symbol::Bool(b) => b.to_string(),
            Symbol::Number(n) => n.to_string(),
            Symbol::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Symbol::Number(n) => n.as_f64(),
            _ => None,
        }
    }

    fn from_json(value: &serde_json::Value) -> Option<Self> {
        match value {
            serde_json::Value::Bool(b) => Some(Symbol::Bool(*b)),
            serde_json::Value::Number(n) => Some(Symbol::Number(n.clone())),
            serde_json::Value::String(s) => Some(Symbol::Text(s.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::text(s)
    }
}

impl From<i64> for Symbol {
    fn from(n: i64) -> Self {
        Symbol::int(n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Discrete,
    Continuous,
}

/// How an attribute is asked about. Each attribute has exactly one style, so
/// an attribute is never asked both as an open question and as yes/no values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStyle {
    IdQuery,
    ValueQuery,
    ThresholdQuery,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributeSchema {
    pub name: String,
    pub kind: AttributeKind,
    /// Declared value set; empty for continuous attributes.
    pub values: Vec<Symbol>,
    pub query_style: QueryStyle,
}

impl AttributeSchema {
    pub fn discrete(name: impl Into<String>, values: Vec<Symbol>, style: QueryStyle) -> Self {
        AttributeSchema {
            name: name.into(),
            kind: AttributeKind::Discrete,
            values,
            query_style: style,
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        AttributeSchema {
            name: name.into(),
            kind: AttributeKind::Continuous,
            values: Vec::new(),
            query_style: QueryStyle::ThresholdQuery,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.kind == AttributeKind::Discrete
    }

    pub fn value_index(&self, symbol: &Symbol) -> Option<ValueIdx> {
        self.values.iter().position(|v| v == symbol).map(ValueIdx)
    }

    fn validate(&self) -> Result<(), CatalogError> {
        match self.kind {
            AttributeKind::Discrete => {
                if self.values.is_empty() {
                    return Err(CatalogError::EmptyValueSet(self.name.clone()));
                }
                if self.query_style == QueryStyle::ThresholdQuery {
                    return Err(self.style_mismatch());
                }
                let mut seen = HashSet::new();
                for v in &self.values {
                    if !seen.insert(v) {
                        return Err(CatalogError::DuplicateValue {
                            attr: self.name.clone(),
                            value: v.clone(),
                        });
                    }
                }
            }
            AttributeKind::Continuous => {
                if !self.values.is_empty() {
                    return Err(CatalogError::ValuesOnContinuous(self.name.clone()));
                }
                if self.query_style != QueryStyle::ThresholdQuery {
                    return Err(self.style_mismatch());
                }
            }
        }
        Ok(())
    }

    fn style_mismatch(&self) -> CatalogError {
        CatalogError::StyleMismatch {
            attr: self.name.clone(),
            kind: self.kind,
            style: self.query_style,
        }
    }
}

/// One item's value for one attribute.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Discrete(ValueIdx),
    Continuous(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Item {
    pub id: String,
    /// One cell per catalog attribute, in attribute order.
    pub cells: Vec<Cell>,
}

/// A sorted, duplicate-free set of item positions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ItemSet(Vec<ItemIdx>);

impl ItemSet {
    pub fn empty() -> Self {
        ItemSet(Vec::new())
    }

    pub fn full(len: usize) -> Self {
        ItemSet((0..len).map(ItemIdx).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, item: ItemIdx) -> bool {
        self.0.binary_search(&item).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = ItemIdx> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[ItemIdx] {
        &self.0
    }

    pub fn remove(&mut self, item: ItemIdx) -> bool {
        match self.0.binary_search(&item) {
            Ok(pos) => {
                self.0.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn retain(&mut self, keep: impl FnMut(&ItemIdx) -> bool) {
        self.0.retain(keep);
    }

    pub fn filter(&self, keep: impl FnMut(&ItemIdx) -> bool) -> ItemSet {
        let mut out = self.clone();
        out.retain(keep);
        out
    }

    pub fn is_subset(&self, other: &ItemSet) -> bool {
        self.iter().all(|i| other.contains(i))
    }
}

impl FromIterator<ItemIdx> for ItemSet {
    fn from_iter<T: IntoIterator<Item = ItemIdx>>(iter: T) -> Self {
        let mut items: Vec<ItemIdx> = iter.into_iter().collect();
        items.sort_unstable();
        items.dedup();
        ItemSet(items)
    }
}

/// Selection predicate for [`items_with_value`].
#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    Eq(Symbol),
    Neq(Symbol),
    Geq(f64),
    Lt(f64),
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Eq(s) => write!(f, "eq({s})"),
            Predicate::Neq(s) => write!(f, "neq({s})"),
            Predicate::Geq(w) => write!(f, "geq({w})"),
            Predicate::Lt(w) => write!(f, "lt({w})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Catalog {
    attributes: Vec<AttributeSchema>,
    items: Vec<Item>,
    attr_by_name: HashMap<String, AttrIdx>,
    item_by_id: HashMap<String, ItemIdx>,
}

impl Catalog {
    /// Builds a catalog, checking every invariant of the data model.
    pub fn new(attributes: Vec<AttributeSchema>, items: Vec<Item>) -> Result<Self, CatalogError> {
        if items.is_empty() {
            return Err(CatalogError::NoItems);
        }
        let mut attr_by_name = HashMap::with_capacity(attributes.len());
        for (i, attr) in attributes.iter().enumerate() {
            attr.validate()?;
            if attr_by_name.insert(attr.name.clone(), AttrIdx(i)).is_some() {
                return Err(CatalogError::DuplicateAttribute(attr.name.clone()));
            }
        }
        let mut item_by_id = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if item_by_id.insert(item.id.clone(), ItemIdx(i)).is_some() {
                return Err(CatalogError::DuplicateItem(item.id.clone()));
            }
            if item.cells.len() != attributes.len() {
                let missing = attributes
                    .get(item.cells.len())
                    .map(|a| a.name.clone())
                    .unwrap_or_default();
                return Err(CatalogError::MissingValue {
                    item: item.id.clone(),
                    attr: missing,
                });
            }
            for (attr, cell) in attributes.iter().zip(&item.cells) {
                match (attr.kind, cell) {
                    (AttributeKind::Discrete, Cell::Discrete(v)) if v.0 < attr.values.len() => {}
                    (AttributeKind::Continuous, Cell::Continuous(x)) if x.is_finite() => {}
                    (AttributeKind::Discrete, _) => {
                        return Err(CatalogError::ValueOutsideSet {
                            item: item.id.clone(),
                            attr: attr.name.clone(),
                            value: format!("{cell:?}"),
                        })
                    }
                    (AttributeKind::Continuous, _) => {
                        return Err(CatalogError::NonNumeric {
                            item: item.id.clone(),
                            attr: attr.name.clone(),
                            value: format!("{cell:?}"),
                        })
                    }
                }
            }
        }
        Ok(Catalog {
            attributes,
            items,
            attr_by_name,
            item_by_id,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, CatalogError> {
        let raw: RawCatalog = serde_json::from_str(text)?;
        raw.into_catalog()
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self, CatalogError> {
        let raw: RawCatalog = serde_json::from_value(value)?;
        raw.into_catalog()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(RawCatalog::from_catalog(self)).expect("catalog serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&RawCatalog::from_catalog(self)).expect("catalog serializes")
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn attributes(&self) -> &[AttributeSchema] {
        &self.attributes
    }

    pub fn attr_indices(&self) -> impl Iterator<Item = AttrIdx> {
        (0..self.attributes.len()).map(AttrIdx)
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn all_items(&self) -> ItemSet {
        ItemSet::full(self.items.len())
    }

    pub fn attribute(&self, attr: AttrIdx) -> &AttributeSchema {
        &self.attributes[attr.0]
    }

    pub fn item(&self, item: ItemIdx) -> &Item {
        &self.items[item.0]
    }

    pub fn item_id(&self, item: ItemIdx) -> &str {
        &self.items[item.0].id
    }

    pub fn attr_index(&self, name: &str) -> Option<AttrIdx> {
        self.attr_by_name.get(name).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<ItemIdx> {
        self.item_by_id.get(id).copied()
    }

    pub fn cell(&self, item: ItemIdx, attr: AttrIdx) -> Cell {
        self.items[item.0].cells[attr.0]
    }

    /// Value index of a discrete cell. Panics on continuous attributes.
    pub fn value_of(&self, item: ItemIdx, attr: AttrIdx) -> ValueIdx {
        match self.cell(item, attr) {
            Cell::Discrete(v) => v,
            Cell::Continuous(_) => panic!("attribute {} is continuous", self.attribute(attr).name),
        }
    }

    /// Numeric reading of a cell: the number itself for continuous attributes,
    /// the symbol's number for numeric discrete values.
    pub fn numeric(&self, item: ItemIdx, attr: AttrIdx) -> Option<f64> {
        match self.cell(item, attr) {
            Cell::Continuous(x) => Some(x),
            Cell::Discrete(v) => self.attributes[attr.0].values[v.0].as_f64(),
        }
    }

    pub fn symbol(&self, attr: AttrIdx, value: ValueIdx) -> &Symbol {
        &self.attributes[attr.0].values[value.0]
    }
}

/// Reads and validates a catalog JSON file.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Catalog::from_json_str(&text)
}

pub fn save_catalog(catalog: &Catalog, path: impl AsRef<Path>) -> Result<(), CatalogError> {
    let path = path.as_ref();
    std::fs::write(path, catalog.to_json_string() + "\n").map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Items of `subset` whose value of `attr` satisfies `predicate`.
pub fn items_with_value(
    catalog: &Catalog,
    subset: &ItemSet,
    attr: &str,
    predicate: &Predicate,
) -> Result<ItemSet, CatalogError> {
    let a = catalog
        .attr_index(attr)
        .ok_or_else(|| CatalogError::UnknownAttribute(attr.to_string()))?;
    let schema = catalog.attribute(a);
    let mismatch = || CatalogError::PredicateMismatch {
        attr: attr.to_string(),
        predicate: predicate.to_string(),
    };
    match predicate {
        Predicate::Eq(sym) | Predicate::Neq(sym) => {
            if !schema.is_discrete() {
                return Err(mismatch());
            }
            let want_eq = matches!(predicate, Predicate::Eq(_));
            let target = schema.value_index(sym);
            Ok(subset.filter(|&i| (Some(catalog.value_of(i, a)) == target) == want_eq))
        }
        Predicate::Geq(w) | Predicate::Lt(w) => {
            let numeric =
                !schema.is_discrete() || schema.values.iter().all(|v| v.as_f64().is_some());
            if !numeric {
                return Err(mismatch());
            }
            let want_geq = matches!(predicate, Predicate::Geq(_));
            Ok(subset.filter(|&i| {
                let x = catalog.numeric(i, a).expect("numeric attribute");
                (x >= *w) == want_geq
            }))
        }
    }
}

/// Parameters of [`generate_synthetic`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub items: usize,
    pub discrete: usize,
    pub continuous: usize,
    pub values_per_attr: usize,
    pub targets: usize,
    /// Give every item a distinct binary code over the discrete attributes.
    pub perfect_split: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 0,
            items: 30,
            discrete: 3,
            continuous: 1,
            values_per_attr: 4,
            targets: 1,
            perfect_split: false,
        }
    }
}

impl SyntheticSpec {
    /// `items` items with distinct codes over `bits` binary attributes.
    pub fn perfect_split(seed: u64, items: usize, bits: usize) -> Self {
        SyntheticSpec {
            seed,
            items,
            discrete: bits,
            continuous: 0,
            values_per_attr: 2,
            targets: 1,
            perfect_split: true,
        }
    }
}

/// Deterministic random catalog plus a target set drawn without replacement.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Catalog, Vec<ItemIdx>), CatalogError> {
    let invalid = |msg: String| Err(CatalogError::InvalidSpec(msg));
    if spec.items == 0 {
        return invalid("items must be at least 1".into());
    }
    if spec.targets == 0 || spec.targets > spec.items {
        return invalid(format!(
            "targets must be in 1..={}, got {}",
            spec.items, spec.targets
        ));
    }
    if spec.values_per_attr < 2 {
        return invalid("values_per_attr must be at least 2".into());
    }
    if spec.perfect_split {
        if spec.values_per_attr != 2 || spec.continuous != 0 {
            return invalid("perfect split needs binary discrete attributes only".into());
        }
        if spec.discrete >= usize::BITS as usize || spec.items > 1usize << spec.discrete {
            return invalid(format!(
                "{} items do not fit in {} bits",
                spec.items, spec.discrete
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut attributes = Vec::with_capacity(spec.discrete + spec.continuous);
    for d in 0..spec.discrete {
        let values = (0..spec.values_per_attr)
            .map(|v| Symbol::text(format!("v{v}")))
            .collect();
        attributes.push(AttributeSchema::discrete(
            format!("d{d}"),
            values,
            QueryStyle::ValueQuery,
        ));
    }
    for c in 0..spec.continuous {
        attributes.push(AttributeSchema::continuous(format!("c{c}")));
    }

    let width = (spec.items - 1).to_string().len();
    let id = |i: usize| format!("i{i:0width$}");
    let items: Vec<Item> = if spec.perfect_split {
        let mut codes: Vec<usize> = (0..1usize << spec.discrete).collect();
        codes.shuffle(&mut rng);
        codes
            .into_iter()
            .take(spec.items)
            .enumerate()
            .map(|(i, code)| Item {
                id: id(i),
                cells: (0..spec.discrete)
                    .map(|bit| Cell::Discrete(ValueIdx((code >> bit) & 1)))
                    .collect(),
            })
            .collect()
    } else {
        (0..spec.items)
            .map(|i| {
                let mut cells = Vec::with_capacity(attributes.len());
                for _ in 0..spec.discrete {
                    cells.push(Cell::Discrete(ValueIdx(
                        rng.random_range(0..spec.values_per_attr),
                    )));
                }
                for _ in 0..spec.continuous {
                    cells.push(Cell::Continuous(rng.random::<f64>()));
                }
                Item { id: id(i), cells }
            })
            .collect()
    };

    let mut targets: Vec<ItemIdx> = rand::seq::index::sample(&mut rng, spec.items, spec.targets)
        .into_iter()
        .map(ItemIdx)
        .collect();
    targets.sort_unstable();
    Ok((Catalog::new(attributes, items)?, targets))
}

#[derive(Serialize, Deserialize)]
struct RawAttribute {
    name: String,
    kind: AttributeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<Symbol>>,
    query_style: QueryStyle,
}

#[derive(Serialize, Deserialize)]
struct RawItem {
    id: String,
    values: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct RawCatalog {
    attributes: Vec<RawAttribute>,
    items: Vec<RawItem>,
}

impl RawCatalog {
    fn into_catalog(self) -> Result<Catalog, CatalogError> {
        let attributes: Vec<AttributeSchema> = self
            .attributes
            .into_iter()
            .map(|a| AttributeSchema {
                name: a.name,
                kind: a.kind,
                values: a.values.unwrap_or_default(),
                query_style: a.query_style,
            })
            .collect();
        for attr in &attributes {
            attr.validate()?;
        }
        let mut items = Vec::with_capacity(self.items.len());
        for raw in self.items {
            if let Some(unknown) = raw
                .values
                .keys()
                .find(|k| !attributes.iter().any(|a| &a.name == *k))
            {
                return Err(CatalogError::UnknownAttribute(unknown.clone()));
            }
            let mut cells = Vec::with_capacity(attributes.len());
            for attr in &attributes {
                let value =
                    raw.values
                        .get(&attr.name)
                        .ok_or_else(|| CatalogError::MissingValue {
                            item: raw.id.clone(),
                            attr: attr.name.clone(),
                        })?;
                let cell = match attr.kind {
                    AttributeKind::Discrete => Symbol::from_json(value)
                        .and_then(|s| attr.value_index(&s))
                        .map(Cell::Discrete)
                        .ok_or_else(|| CatalogError::ValueOutsideSet {
                            item: raw.id.clone(),
                            attr: attr.name.clone(),
                            value: value.to_string(),
                        })?,
                    AttributeKind::Continuous => value
                        .as_f64()
                        .filter(|x| x.is_finite())
                        .map(Cell::Continuous)
                        .ok_or_else(|| CatalogError::NonNumeric {
                            item: raw.id.clone(),
                            attr: attr.name.clone(),
                            value: value.to_string(),
                        })?,
                };
                cells.push(cell);
            }
            items.push(Item { id: raw.id, cells });
        }
        Catalog::new(attributes, items)
    }

    fn from_catalog(catalog: &Catalog) -> Self {
        let attributes = catalog
            .attributes
            .iter()
            .map(|a| RawAttribute {
                name: a.name.clone(),
                kind: a.kind,
                values: a.is_discrete().then(|| a.values.clone()),
                query_style: a.query_style,
            })
            .collect();
        let items = catalog
            .items
            .iter()
            .map(|item| RawItem {
                id: item.id.clone(),
                values: catalog
                    .attributes
                    .iter()
                    .zip(&item.cells)
                    .map(|(attr, cell)| {
                        let value = match cell {
                            Cell::Discrete(v) => {
                                serde_json::to_value(&attr.values[v.0]).expect("symbol")
                            }
                            Cell::Continuous(x) => serde_json::Value::from(*x),
                        };
                        (attr.name.clone(), value)
                    })
                    .collect(),
            })
            .collect();
        RawCatalog { attributes, items }
    }
}
