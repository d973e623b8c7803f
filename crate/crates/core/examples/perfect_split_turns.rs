//! Turn counts on a catalog where every item has a distinct binary code.
//!
//! Halving questions find a target in about log2(M + 1) turns, while
//! recommending items one by one takes (M + 1) / 2 on average.

use std::sync::Arc;

use certainty::catalog::generate_synthetic;
use certainty::simulator::{run_benchmark, BenchConfig, CatalogSource, TargetChoice};
use certainty::{Policy, PolicyConfig, QueryMode, SyntheticSpec};

fn main() -> anyhow::Result<()> {
    let (catalog, _) = generate_synthetic(&SyntheticSpec::perfect_split(42, 63, 6))?;
    let catalog = Arc::new(catalog);
    for (policy, k_max) in [(Policy::Core, 9), (Policy::Me, 9), (Policy::Ag, 63)] {
        let source = CatalogSource::Fixed {
            catalog: catalog.clone(),
            targets: TargetChoice::Random { count: 1 },
        };
        let mut cfg = BenchConfig::new(
            source,
            PolicyConfig::new(policy, QueryMode::Value),
            k_max,
            10_000,
            42,
        );
        cfg.jobs = 0;
        let r = run_benchmark(&cfg)?;
        let mut hist = [0usize; 12];
        for s in &r.sessions {
            hist[s.t.min(11)] += 1;
        }
        println!(
            "{:<4} K_MAX {:>2}: mean turns {:.4}, success {:.3}",
            r.policy, k_max, r.t_at_k, r.s_at_k
        );
        if policy != Policy::Ag {
            println!("     turns histogram {:?}", &hist[1..]);
        }
    }
    Ok(())
}
