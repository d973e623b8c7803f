//! Gains that account for correlated attributes, from counts or from a file.

use certainty::gain::{attribute_gain, dependence_gain, dependence_value_gain, Frontier};
use certainty::scorer::{cold_start_scores, estimate_dependence, DependenceModel};
use certainty::{Catalog, GainContext, ValueIdx};

const CATALOG: &str = r#"{
  "attributes": [
    {"name": "level", "kind": "discrete", "values": [3, 5], "query_style": "value_query"},
    {"name": "shower", "kind": "discrete", "values": ["N", "Y"], "query_style": "value_query"},
    {"name": "view", "kind": "discrete", "values": ["sea", "city"], "query_style": "value_query"}
  ],
  "items": [
    {"id": "v1", "values": {"level": 3, "shower": "N", "view": "sea"}},
    {"id": "v2", "values": {"level": 3, "shower": "N", "view": "city"}},
    {"id": "v3", "values": {"level": 5, "shower": "Y", "view": "sea"}},
    {"id": "v4", "values": {"level": 5, "shower": "Y", "view": "city"}}
  ]
}"#;

const WEIGHTS: &str = r#"{"level": {"5": {"shower": {"Y": 0.9, "N": 0.1}}}}"#;

fn main() -> anyhow::Result<()> {
    let catalog = Catalog::from_json_str(CATALOG)?;
    let scores = cold_start_scores(&catalog);
    let frontier = Frontier::full(&catalog);
    let ctx = GainContext::new(&catalog, &scores, &frontier)?;
    let counted = estimate_dependence(&catalog, &frontier.items);
    let external = DependenceModel::from_json_str(WEIGHTS, &catalog)?;

    println!(
        "{:<8} {:>8} {:>10} {:>10}",
        "attr", "plain", "counted", "external"
    );
    for attr in catalog.attr_indices() {
        println!(
            "{:<8} {:>8.3} {:>10.3} {:>10.3}",
            catalog.attribute(attr).name,
            attribute_gain(&ctx, attr)?,
            dependence_gain(&ctx, &counted, attr)?,
            dependence_gain(&ctx, &external, attr)?
        );
    }
    let level = catalog.attr_index("level").unwrap();
    println!(
        "level = 5?  counted {:.3}",
        dependence_value_gain(&ctx, &counted, level, ValueIdx(1))?
    );
    println!(
        "shower|level=5=Y  {:.2}",
        counted.cond_eq(
            level,
            ValueIdx(1),
            catalog.attr_index("shower").unwrap(),
            ValueIdx(1)
        )
    );
    Ok(())
}
