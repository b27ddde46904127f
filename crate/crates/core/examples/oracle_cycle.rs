//! Runs the truncated-Hilbert-space cycle and compares it with the closed form.

use coherent_szilard::szilard::{oracle_run_cycle, thermal_demon, WellConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = WellConfig { n_max: 40, ..WellConfig::default() };
    let d = thermal_demon(&cfg, 1.0, 0.0)?;
    let run = oracle_run_cycle(&cfg, &d, None)?;
    println!("expansion endpoints: l_g = {:.6}, l_e = {:.6}", run.l_g, run.l_e);
    for (name, closed) in run.closed_form.numeric_fields() {
        let truncated = run.report.numeric_fields().into_iter().find(|(n, _)| *n == name).unwrap().1;
        println!("{name:>16}  closed {closed:>+.12e}  truncated {truncated:>+.12e}");
    }
    println!("max |diff| = {:.3e} ({})", run.max_abs_diff, run.worst_field);
    println!("final demon diff = {:.3e}", run.demon_final_diff);
    Ok(())
}
