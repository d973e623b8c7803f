//! T@K and S@K of every policy on fresh synthetic catalogs.

use certainty::simulator::{render_table, run_benchmark, BenchConfig, CatalogSource};
use certainty::{Policy, PolicyConfig, QueryMode, SyntheticSpec};

fn main() -> anyhow::Result<()> {
    let mut reports = Vec::new();
    for mode in [QueryMode::Value, QueryMode::Attribute] {
        for policy in [Policy::Ag, Policy::Me, Policy::Core, Policy::CoreD] {
            let source = CatalogSource::Synthetic {
                spec: SyntheticSpec::default(),
                max_targets: 3,
            };
            let mut cfg = BenchConfig::new(source, PolicyConfig::new(policy, mode), 5, 2000, 42);
            cfg.jobs = 0;
            reports.push(run_benchmark(&cfg)?);
        }
    }
    print!("{}", render_table(&reports));
    Ok(())
}
