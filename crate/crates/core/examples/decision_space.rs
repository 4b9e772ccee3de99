//! Grid sizes of the built-in spaces and how universes get their ids and seeds.

use multiverse::decision_space::{enumerate, presets, sample};
use multiverse::fairness::enumerate_eval_strategies;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let design = presets::design_space();
    let eval = presets::eval_space();
    let strategies = enumerate_eval_strategies(&eval)?;
    println!("design decisions:");
    for d in design.decisions() {
        println!("  {:<20} {}", d.name, d.options.join(", "));
    }
    println!("universes:  {}", design.grid_size());
    println!("strategies: {}", strategies.len());
    println!("values:     {}", design.grid_size() * strategies.len() as u128);

    let universes = enumerate(&design, 42)?;
    let first = &universes[0];
    println!("\nfirst universe {} (seed {}):", first.id, first.seed);
    for (k, v) in &first.assignments {
        println!("  {k} = {v}");
    }

    let picked = sample(&design, 0.001, 7, 42)?;
    println!("\n0.1% sample: {} universes, e.g. {}", picked.len(), picked[0].id);
    Ok(())
}
