//! How far one trained model's fairness moves across evaluation strategies.

use multiverse::decision_space::enumerate;
use multiverse::fairness::{spread_stats, Grouping};
use multiverse::runner::{run_universe, RunContext, RunManifest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ctx = RunContext::new(RunManifest::example(4000))?;
    let universes = enumerate(&ctx.design, 0)?;
    let mut widest: Option<(f64, String)> = None;
    for u in universes.iter().step_by(6143).take(10) {
        let result = run_universe(&ctx, u);
        let Ok(spread) = spread_stats(&result.strategy_values()) else {
            println!("{}  {}", u.id, result.status.token());
            continue;
        };
        println!("{}  delta {:.3}  ({:.3} .. {:.3})", u.id, spread.delta, spread.min, spread.max);
        if widest.as_ref().is_none_or(|(d, _)| spread.delta > *d) {
            widest = Some((spread.delta, u.id.clone()));
        }

        let by = |g: Grouping| -> Vec<f64> {
            ctx.strategies
                .iter()
                .zip(&result.evals)
                .filter(|(s, _)| s.grouping == g)
                .filter_map(|(_, e)| e.eq_odds_diff)
                .collect()
        };
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        println!(
            "    separate groups mean {:.3}, majority-minority mean {:.3}",
            mean(&by(Grouping::Separate)),
            mean(&by(Grouping::MajorityMinority))
        );
    }
    if let Some((delta, id)) = widest {
        println!("widest spread: {id} ({delta:.3})");
    }
    Ok(())
}
