//! Do importances from a fraction of the universes agree with the full run?

use multiverse::importance::{ForestConfig, ResponseTable};
use multiverse::robustness::{subsample_stability, StabilityConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = ResponseTable::from_fn(&[4, 4, 4, 4, 4], |ix| {
        let wobble = ((ix[1] * 7 + ix[2] * 3 + ix[3] * 5 + ix[4]) % 11) as f64 / 11.0;
        ix[0] as f64 + 0.4 * wobble
    });
    let config = StabilityConfig {
        fractions: vec![0.05, 0.1, 0.2],
        repetitions: 10,
        seed: 3,
        forest: ForestConfig { trees: 50, max_order: Some(2), ..ForestConfig::default() },
    };
    let report = subsample_stability(&table, &config)?;
    print!("{}", report.to_csv());
    Ok(())
}
