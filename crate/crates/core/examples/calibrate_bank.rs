//! Fit item parameters to the logged responses in the fixture bank.
//!
//! ```bash
//! cargo run --example calibrate_bank
//! ```

use agq::ceirt::{calibrate_item_bank, OptimizerConfig};
use agq::corpus::load_item_bank;

fn main() -> anyhow::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/bank.json");
    let mut bank = load_item_bank(path.as_ref())?;
    let data = bank.response_matrix()?;
    println!(
        "{} users x {} items, {} responses, K = {}",
        data.users.len(),
        data.items.len(),
        data.observations.len(),
        data.k
    );

    let fit = calibrate_item_bank(&data, &OptimizerConfig::calibration().with_seed(7))?;
    println!(
        "loss {:.4} -> {:.4} over {} epochs",
        fit.report.initial_loss,
        fit.report.final_loss,
        fit.report.loss_history.len()
    );

    for (item, p) in bank.items.iter().zip(&fit.params).take(5) {
        let j = bank.tagged_indices(item)[0];
        println!("{:<10} a = {:.3}  b = {:+.3}", item.item_id, p.a[j], p.b[j]);
    }
    for id in &fit.report.flat_items {
        println!("warning: {id} ended with zero discrimination");
    }
    bank.set_params(fit.params)?;
    Ok(())
}
