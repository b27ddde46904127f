//! Efficiency against P_R for a few demon coherence factors.

use coherent_szilard::szilard::{cycle_report_at, thermal_demon, WellConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = WellConfig::default();
    println!("Carnot bound: {:.4}", cfg.carnot_efficiency());
    println!("{:>6} {:>10} {:>10} {:>10}", "p_r", "f=0", "f=0.7", "f=1");
    for i in 1..20 {
        let p_r = i as f64 * 0.05;
        let mut row = format!("{p_r:>6.2}");
        for factor in [0.0, 0.7, 1.0] {
            let d = thermal_demon(&cfg, factor, 0.0)?;
            match cycle_report_at(&cfg, &d, p_r).eta {
                Some(eta) => row += &format!(" {eta:>10.4}"),
                None => row += &format!(" {:>10}", "-"),
            }
        }
        println!("{row}");
    }
    Ok(())
}
