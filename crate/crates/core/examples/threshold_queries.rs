//! Numeric attributes asked as "at least w?" questions.

use certainty::gain::{propose_threshold, threshold_gain, Frontier};
use certainty::scorer::cold_start_scores;
use certainty::session::{apply_answer, SessionState};
use certainty::{Answer, Catalog, GainContext, QueryAction};

const CATALOG: &str = r#"{
  "attributes": [{"name": "price", "kind": "continuous", "query_style": "threshold_query"}],
  "items": [
    {"id": "a", "values": {"price": 40}},
    {"id": "b", "values": {"price": 90}},
    {"id": "c", "values": {"price": 120}},
    {"id": "d", "values": {"price": 300}},
    {"id": "e", "values": {"price": 310}}
  ]
}"#;

fn main() -> anyhow::Result<()> {
    let catalog = Catalog::from_json_str(CATALOG)?;
    let scores = cold_start_scores(&catalog);
    let price = catalog.attr_index("price").unwrap();
    let mut state = SessionState::new(&catalog);
    for answer in [Answer::No, Answer::Yes] {
        let ctx = GainContext::new(&catalog, &scores, &state.frontier)?;
        let t = propose_threshold(&ctx, price)?;
        println!(
            "price >= {t:.1}? gain {:.3} -> {answer:?}",
            threshold_gain(&ctx, price, t)?
        );
        state = apply_answer(&state, &QueryAction::Threshold(price, t), answer, &catalog)?;
        let left: Vec<_> = state
            .frontier
            .items
            .iter()
            .map(|i| catalog.item_id(i))
            .collect();
        println!("  left {left:?}");
    }

    let full = Frontier::full(&catalog);
    let ctx = GainContext::new(&catalog, &scores, &full)?;
    for t in [40.0, 100.0, 200.0, 305.0] {
        println!("price >= {t:>5}? {:.3}", threshold_gain(&ctx, price, t)?);
    }
    Ok(())
}
