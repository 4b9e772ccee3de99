//! Which decisions drive the fairness metric: exact decomposition on a full
//! grid, and the forest estimate on a sample of it.

use multiverse::importance::{exact_fanova, forest_fanova, rank, ForestConfig, ResponseTable};
use multiverse::robustness::compare_reports;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a stand-in multiverse: model and cutoff matter, and interact
    let levels = [4, 3, 2, 2, 3];
    let table = ResponseTable::from_fn(&levels, |ix| {
        let model = [0.05, 0.12, 0.2, 0.08][ix[0]];
        let cutoff = [0.0, 0.06, 0.1][ix[1]];
        let both = if ix[0] == 2 && ix[1] == 2 { 0.15 } else { 0.0 };
        model + cutoff + both + 0.01 * ix[2] as f64
    });

    let exact = exact_fanova(&table, Some(2))?;
    println!("exact, {} effects up to order {}:", exact.effect_count, exact.max_order);
    for e in rank(&exact, 5) {
        println!("  {:<12} {:<12} {:.4}", e.label(), e.effect_type(), e.importance);
    }

    let rows: Vec<usize> = (0..table.len()).step_by(2).collect();
    let config = ForestConfig { trees: 100, max_order: Some(2), seed: 1, ..ForestConfig::default() };
    let forest = forest_fanova(&table.take(&rows), &config)?;
    println!("forest on half the grid:");
    for e in rank(&forest, 5) {
        println!("  {:<12} {:<12} {:.4} ± {:.4}", e.label(), e.effect_type(), e.importance, e.std_dev);
    }
    let agreement = compare_reports(&exact, &forest);
    println!("pearson {:?}, spearman {:?}", agreement.pearson, agreement.spearman);
    Ok(())
}
