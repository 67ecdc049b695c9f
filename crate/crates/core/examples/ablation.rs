//! Sweep the offset between text difficulty and the learner's true state
//! and see where simulated learning peaks.

use agq::eval::{expected_gain, run_ablation, AblationConfig, SimulatedLearner};

fn main() -> anyhow::Result<()> {
    let learner = SimulatedLearner::new(vec![0.0; 5], 1.0)?;
    let cfg = AblationConfig::grid(0.0, 3.0, 0.25, 20, 20)?;
    let result = run_ablation(&learner, &cfg)?;

    // Gain is cumulative over all rounds; the gap is held fixed, so the
    // expectation is rounds times the per-round value.
    println!("{:>5} {:>9} {:>7} {:>9}", "gap", "gain", "se", "expected");
    for p in &result.points {
        println!(
            "{:>5.2} {:>9.3} {:>7.3} {:>9.3}",
            p.gap,
            p.mean_gain,
            p.std_err,
            cfg.rounds as f64 * expected_gain(p.gap, 1.0)
        );
    }
    println!("peak at gap {:.2}", result.peak_gap);
    Ok(())
}
