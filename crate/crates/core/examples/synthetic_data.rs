//! Generate the example population and look at its groups.

use multiverse::data::{synthesize, GeneratorSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let frame = synthesize(&GeneratorSpec::example(2000), 1)?;
    let (levels, codes) = frame.groups();
    let target = frame.target();
    println!("{} rows, protected column `{}`", frame.n_rows(), frame.protected_name());
    for (g, name) in levels.iter().enumerate() {
        let rows: Vec<usize> = (0..codes.len()).filter(|&i| codes[i] as usize == g).collect();
        let positives = rows.iter().filter(|&&i| target[i] == 1).count();
        println!("  {name:<6} {:>5} rows, base rate {:.3}", rows.len(), positives as f64 / rows.len() as f64);
    }
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("population.csv");
    frame.write_csv(&path)?;
    let header = std::fs::read_to_string(&path)?.lines().next().unwrap_or_default().to_string();
    println!("csv columns: {header}");
    Ok(())
}
