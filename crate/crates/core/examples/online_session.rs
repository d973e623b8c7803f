//! A session driven turn by turn, with a simulated user standing in for a person.

use std::sync::Arc;

use certainty::catalog::{generate_synthetic, SyntheticSpec};
use certainty::scorer::cold_start_scores;
use certainty::session::Limits;
use certainty::{AnswerSource, Policy, PolicyConfig, QueryMode, Session, SimulatedUser};

fn main() -> anyhow::Result<()> {
    let spec = SyntheticSpec {
        seed: 7,
        items: 40,
        targets: 2,
        ..SyntheticSpec::default()
    };
    let (catalog, targets) = generate_synthetic(&spec)?;
    let catalog = Arc::new(catalog);
    let scores = Arc::new(cold_start_scores(&catalog));
    let mut user = SimulatedUser::new(&catalog, targets, 0)?;
    let names: Vec<_> = user.targets().iter().map(|&t| catalog.item_id(t)).collect();
    println!("user wants any of {names:?}");

    let cfg = PolicyConfig::new(Policy::Core, QueryMode::Declared);
    let mut session = Session::start(catalog.clone(), scores, cfg, Limits::new(6))?;
    while let Some(pending) = session.pending().copied() {
        let answer = user.answer(&catalog, &pending.scored.action);
        println!(
            "{:>2}. {:<22} gain {:.3} -> {answer:?}",
            session.state().turn + 1,
            pending.scored.action.describe(&catalog),
            pending.scored.gain
        );
        session.answer(answer)?;
        println!(
            "    {} items left, uncertainty {:.3}",
            session.state().frontier.items.len(),
            session.uncertainty()
        );
    }
    println!("{}", session.transcript("example", spec.seed).to_jsonl());
    Ok(())
}
