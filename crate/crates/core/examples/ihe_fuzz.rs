//! Fuzzes the information-heat-engine bound over Haar-random protocols.

use coherent_szilard::ihe::{fuzz, IheConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = IheConfig { trials: 2000, seed: 11, random_memory: true, ..IheConfig::default() };
    let s = fuzz(&cfg)?;
    println!("trials            {}", s.trials);
    println!("min slack         {:.6} (trial {})", s.min_slack, s.min_slack_trial);
    println!("max W_ext         {:.6}", s.max_w_ext);
    println!("near saturation   {}", s.near_saturation_count);
    for c in &s.min_chain_residuals {
        println!("  {:<18} min residual {:+.3e}{}", c.name, c.min_residual, if c.skipped > 0 { " (some skipped)" } else { "" });
    }
    Ok(())
}
