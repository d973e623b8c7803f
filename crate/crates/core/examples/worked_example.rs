//! Every gain on a four-hotel catalog with hand-checkable scores.

use certainty::gain::{
    attribute_gain, item_gain, propose_threshold, threshold_gain, value_gain, Frontier,
};
use certainty::policy::select_action;
use certainty::service::{HOTELS_CATALOG, HOTELS_SCORES};
use certainty::{Catalog, GainContext, Policy, PolicyConfig, QueryMode};

fn main() -> anyhow::Result<()> {
    let catalog = Catalog::from_json_str(HOTELS_CATALOG)?;
    let scores = certainty::scorer::scores_from_json_str(HOTELS_SCORES, &catalog)?;
    let frontier = Frontier::full(&catalog);
    let ctx = GainContext::new(&catalog, &scores, &frontier)?;

    for item in catalog.all_items().iter() {
        println!(
            "recommend {:<3} {:.4}",
            catalog.item_id(item),
            item_gain(&ctx, item)?
        );
    }
    let level = catalog.attr_index("level").unwrap();
    println!("which level   {:.4}", attribute_gain(&ctx, level)?);
    for (w, symbol) in catalog.attribute(level).values.iter().enumerate() {
        println!(
            "level = {symbol}?    {:.4}",
            value_gain(&ctx, level, certainty::ValueIdx(w))?
        );
    }
    let price = catalog.attr_index("price").unwrap();
    let t = propose_threshold(&ctx, price)?;
    println!("price >= {t:.0}? {:.4}", threshold_gain(&ctx, price, t)?);

    for policy in [Policy::Core, Policy::Ag, Policy::Me] {
        let pick = select_action(&ctx, &PolicyConfig::new(policy, QueryMode::Value), None)?;
        println!("{policy:<5} asks: {}", pick.action.describe(&catalog));
    }
    Ok(())
}
