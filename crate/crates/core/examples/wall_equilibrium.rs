//! Partition sums, wall forces and the force-balance wall position.

use coherent_szilard::szilard::{
    equilibrium_wall_position, insertion_probabilities, log_partition_function, wall_force, WellConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = WellConfig::default();
    for width in [0.1, 0.25, 0.5, 1.0] {
        let z = log_partition_function(width, cfg.temperature, &cfg)?;
        println!(
            "width {width:.2}: ln Z = {:+.6}, levels = {}, tail = {:.1e}, force = {:.6}",
            z.ln_z,
            z.levels,
            z.relative_tail,
            wall_force(width, cfg.temperature, &cfg)?
        );
    }
    let (p_l, p_r) = insertion_probabilities(&cfg)?;
    println!("insertion at l = {}: P_L = {p_l:.6}, P_R = {p_r:.6}", cfg.insertion);
    for weights in [(0.5, 0.5), (0.8, 0.2), (0.95, 0.05)] {
        println!("weights {weights:?}: wall at {:.6}", equilibrium_wall_position(&cfg, weights)?);
    }
    Ok(())
}
