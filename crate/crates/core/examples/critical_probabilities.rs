//! Critical P_R values where the efficiency reaches Carnot and where the work vanishes.

use coherent_szilard::szilard::{critical_probability, thermal_demon, zero_work_probability, WellConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = WellConfig::default();
    for factor in [0.0, 0.5, 0.7, 0.9, 1.0] {
        let d = thermal_demon(&cfg, factor, 0.0)?;
        let cri = critical_probability(&cfg, &d).map_or_else(|e| format!("none ({e})"), |p| format!("{p:.8}"));
        let zero = zero_work_probability(&cfg, &d).map_or_else(|e| format!("none ({e})"), |p| format!("{p:.8}"));
        println!("factor {factor:.1}: p_r_cri = {cri}, p_r_zero_work = {zero}");
    }
    Ok(())
}
