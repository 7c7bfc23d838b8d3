//! Load the bundled three-strategy model document and analyze it in code.
//!
//! Everything the `ceasim` binary does is plain library calls: the same
//! document drives the base run, the deterministic and probabilistic
//! sensitivity analyses, and the population update.

use std::path::Path;

use ceasim::analysis::{efficiency_frontier, nmb, strategy_totals, summary};
use ceasim::document::load_model;
use ceasim::engine::run_model;
use ceasim::uncertainty::{ceac, psa_summary, run_dsa, run_psa, update_heterogeneity};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("models/shame/model.cfg");
    let loaded = load_model(&path)?;
    let lifetable = loaded.lifetable.as_ref();

    let totals = strategy_totals(&run_model(&loaded.spec, lifetable)?);
    let frontier = efficiency_frontier(&totals)?;
    let benefit = nmb(&totals, &[1000.0, 5000.0, 15_000.0])?;
    print!("{}", summary(&totals, &frontier, &benefit));

    let dsa = run_dsa(&loaded.spec, loaded.dsa.as_ref().expect("document has [dsa]"), lifetable)?;
    let worst = dsa
        .rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|t| (r, t[0].cost)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("some bound succeeded");
    println!(
        "\ncostliest DSA bound: {} = {} (base-strategy cost {:.0})",
        worst.0.parameter, worst.0.value, worst.1
    );

    let psa = run_psa(&loaded.spec, loaded.psa.as_ref().expect("document has [psa]"), 200, 42, lifetable)?;
    let means = psa_summary(&psa)?;
    println!("\nPSA means over {} draws", psa.draws.len());
    for t in &means.means {
        println!("  {:<5} cost {:>9.0}  effect {:>7.1}", t.strategy, t.cost, t.effect);
    }
    let curve = ceac(&psa, &[5000.0]);
    println!("acceptability at lambda 5000:");
    for (s, p) in curve.strategies.iter().zip(&curve.probabilities[0]) {
        println!("  {s:<5} {p:.2}");
    }

    let pop = update_heterogeneity(
        &loaded.spec,
        loaded.population.as_ref().expect("document has [population]"),
        lifetable,
    )?;
    println!("\npopulation-weighted cost/effect");
    for t in &pop.means {
        println!("  {:<5} cost {:>9.0}  effect {:>7.1}", t.strategy, t.cost, t.effect);
    }
    Ok(())
}
