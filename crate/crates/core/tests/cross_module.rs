//! The demon's side of a Szilard cycle, recast as a two-level path.

use coherent_szilard::matrixcore::Tolerances;
use coherent_szilard::pathtools::{path_report, PathNode, PathSchedule};
use coherent_szilard::szilard::{cycle_report_at, thermal_demon, DemonState, WellConfig};
use num_complex::Complex64;

fn demon_path(cfg: &WellConfig, d: &DemonState, p_r: f64) -> PathSchedule {
    let tol = Tolerances::default();
    let r = cycle_report_at(cfg, d, p_r);
    let (i, f) = (r.demon_initial, r.demon_final);
    let spectrum = vec![cfg.ground_energy, cfg.ground_energy + cfg.gap];
    let nodes = vec![
        PathNode::new(spectrum.clone(), vec![i.p_g, i.p_e()], &tol).unwrap(),
        PathNode::new(spectrum, vec![f.p_g, f.p_e()], &tol).unwrap(),
    ];
    PathSchedule::new(nodes, cfg.temperature)
        .unwrap()
        .with_k_b(cfg.k_b)
        .with_endpoints(i.density(&tol).unwrap(), f.density(&tol).unwrap())
        .unwrap()
}

#[test]
fn coherent_heat_matches_cycle() {
    let base = WellConfig::default();
    for (factor, phase, p_r) in [(1.0, 0.0, 0.05), (0.7, 0.0, 0.3), (0.4, 1.3, 0.6), (0.9, -2.2, 0.85)] {
        let d = thermal_demon(&base, factor, phase).unwrap();
        let cycle = cycle_report_at(&base, &d, p_r);
        let path = path_report(&demon_path(&base, &d, p_r)).unwrap();
        assert!((path.q_coh - cycle.q_coh).abs() <= 1e-12, "{factor} {phase}: {} vs {}", path.q_coh, cycle.q_coh);
        assert!((path.delta_cr - cycle.delta_cr).abs() <= 1e-12);
        // on a static spectrum the demon's energy change is the incoherent heat
        assert!((path.delta_e - path.q_incoh).abs() <= 1e-15);
        assert_eq!(path.w_incoh, 0.0);
    }
}

#[test]
fn hotter_bath_scales_coherent_heat() {
    let cfg = WellConfig { temperature: 2.5, k_b: 0.7, ..WellConfig::default() };
    let d = DemonState::new(0.8, Complex64::new(0.1, 0.3), &cfg.tolerances).unwrap();
    let cycle = cycle_report_at(&cfg, &d, 0.4);
    let path = path_report(&demon_path(&cfg, &d, 0.4)).unwrap();
    assert!((path.q_coh - cycle.q_coh).abs() <= 1e-12);
}
