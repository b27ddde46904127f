//! A discretised protocol that dephases a qubit while lowering its gap.

use coherent_szilard::matrixcore::{ComplexMatrix, DensityMatrix, Tolerances};
use coherent_szilard::pathtools::{path_report, PathNode, PathSchedule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerances::default();
    for steps in [10, 100, 1000] {
        let nodes = (0..=steps)
            .map(|k| {
                let s = k as f64 / steps as f64;
                let gap = 1.0 - 0.5 * s * s;
                let p_e = 0.2 + 0.1 * s.sqrt();
                PathNode::new(vec![0.0, gap], vec![1.0 - p_e, p_e], &tol)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let c = (0.2f64 * 0.8).sqrt();
        let rho_i = DensityMatrix::try_from_matrix(ComplexMatrix::from_real_rows(&[vec![0.8, c], vec![c, 0.2]])?)?;
        let rho_f = DensityMatrix::try_from_matrix(ComplexMatrix::diagonal_from(&[0.7, 0.3]))?;
        let path = PathSchedule::new(nodes, 1.0)?.with_endpoints(rho_i, rho_f)?;
        let r = path_report(&path)?;
        println!(
            "N = {steps:>4}: dE = {:+.6}, Q = {:+.6} (coh {:+.6}), W = {:+.6}, residual {:.1e}",
            r.delta_e, r.q, r.q_coh, r.w, r.first_law_residual
        );
    }
    Ok(())
}
