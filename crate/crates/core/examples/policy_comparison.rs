//! Study-item selection policies on a simulated learner: suitability-based,
//! uniform random and easiest-first.

use agq::eval::{default_study_bank, run_policy_comparison, Policy, PolicyConfig};

fn main() -> anyhow::Result<()> {
    let bank = default_study_bank(0)?;
    let cfg = PolicyConfig::default();
    let cmp = run_policy_comparison(&bank, &Policy::ALL, &cfg)?;

    for policy in Policy::ALL {
        let runs: Vec<_> = cmp.runs.iter().filter(|r| r.policy == policy).collect();
        let mean = runs.iter().map(|r| r.final_mean_theta()).sum::<f64>() / runs.len() as f64;
        let acc = runs
            .iter()
            .map(|r| r.accuracy.last().copied().unwrap_or(0.0))
            .sum::<f64>()
            / runs.len() as f64;
        println!("{policy:<15} final mean theta* {mean:.3}  holdout accuracy {acc:.3}");
    }
    let (w, n) = cmp.wins(Policy::Suitability, Policy::UniformRandom);
    println!("suitability ahead of uniform_random on {w}/{n} seeds");
    Ok(())
}
