use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Result, SzilardError, WellConfig};
use crate::matrixcore::{binary_entropy, qubit_eigenvalues, ComplexMatrix, DensityMatrix, Tolerances};

/// Demon qubit `p_g|g⟩⟨g| + p_e|e⟩⟨e| + F|g⟩⟨e| + F*|e⟩⟨g|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemonState {
    pub p_g: f64,
    #[serde(with = "complex_parts")]
    pub f: Complex64,
}

mod complex_parts {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Parts {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        Parts { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let p = Parts::deserialize(d)?;
        Ok(Complex64::new(p.re, p.im))
    }
}

impl DemonState {
    /// Checks `0 ≤ p_g ≤ 1` and the Bloch-ball condition `|F|² ≤ p_g p_e`.
    pub fn new(p_g: f64, f: Complex64, tol: &Tolerances) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_g) {
            return Err(SzilardError::InvalidDemon(format!("p_g = {p_g} outside [0, 1]")));
        }
        if !(f.re.is_finite() && f.im.is_finite()) {
            return Err(SzilardError::InvalidDemon("F is not finite".into()));
        }
        let bound = p_g * (1.0 - p_g);
        if f.norm_sqr() > bound + tol.psd {
            return Err(SzilardError::InvalidDemon(format!(
                "|F|² = {} exceeds p_g p_e = {bound}",
                f.norm_sqr()
            )));
        }
        Ok(Self { p_g, f })
    }

    pub fn p_e(&self) -> f64 {
        1.0 - self.p_g
    }

    pub fn matrix(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(self.p_g, 0.0);
        m[(1, 1)] = Complex64::new(self.p_e(), 0.0);
        m[(0, 1)] = self.f;
        m[(1, 0)] = self.f.conj();
        m
    }

    pub fn density(&self, tol: &Tolerances) -> Result<DensityMatrix> {
        Ok(DensityMatrix::new(self.matrix(), tol)?)
    }

    /// `(λ+, λ−)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        qubit_eigenvalues(self.p_g, self.f)
    }

    /// von Neumann entropy `H(λ+)`.
    pub fn entropy(&self) -> f64 {
        if self.f == Complex64::new(0.0, 0.0) {
            return binary_entropy(self.p_g);
        }
        binary_entropy(self.eigenvalues().0.min(1.0))
    }

    /// Infer `(p_g, F)` from a validated 2×2 density matrix.
    pub fn from_density(rho: &DensityMatrix, tol: &Tolerances) -> Result<Self> {
        if rho.dim() != 2 {
            return Err(SzilardError::InvalidDemon(format!("demon must be a qubit, got dim {}", rho.dim())));
        }
        let m = rho.matrix();
        Self::new(m[(0, 0)].re.clamp(0.0, 1.0), m[(0, 1)], tol)
    }
}

/// Thermal demon populations with coherence `F = factor · sqrt(p_g p_e) · e^{iφ}`.
pub fn thermal_demon(cfg: &WellConfig, coherence_factor: f64, phase: f64) -> Result<DemonState> {
    if !(0.0..=1.0).contains(&coherence_factor) {
        return Err(SzilardError::InvalidDemon(format!("coherence factor {coherence_factor} outside [0, 1]")));
    }
    let p_g = 1.0 / (1.0 + (-cfg.gap / (cfg.k_b * cfg.demon_temperature)).exp());
    let magnitude = coherence_factor * (p_g * (1.0 - p_g)).sqrt();
    DemonState::new(p_g, Complex64::from_polar(magnitude, phase), &cfg.tolerances)
}

/// Relative entropy of coherence of the demon, `H(p_g) − H(λ+)`.
pub fn demon_coherence(d: &DemonState) -> f64 {
    if d.f == Complex64::new(0.0, 0.0) {
        return 0.0;
    }
    (binary_entropy(d.p_g) - d.entropy()).max(0.0)
}

/// Demon after the cycle: the mixture `P_L ρ + P_R XρX`.
pub fn final_demon(d: &DemonState, p_l: f64) -> DemonState {
    let p_r = 1.0 - p_l;
    DemonState {
        p_g: d.p_g * p_l + d.p_e() * p_r,
        f: d.f * p_l + d.f.conj() * p_r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::relative_entropy_of_coherence;

    fn fig3() -> WellConfig {
        WellConfig { temperature: 1.0, demon_temperature: 0.5, gap: 0.5, ..WellConfig::default() }
    }

    #[test]
    fn incoherent_thermal_demon() {
        let d = thermal_demon(&fig3(), 0.0, 0.0).unwrap();
        assert!((d.p_g - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(d.f, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn pure_demon_coherence_is_population_entropy() {
        let d = thermal_demon(&fig3(), 1.0, 0.0).unwrap();
        assert!((demon_coherence(&d) - binary_entropy(d.p_g)).abs() < 1e-7);
        assert!(d.entropy() < 1e-7);
    }

    #[test]
    fn blue_curve_demon_is_real() {
        let d = thermal_demon(&fig3(), 0.7, 0.0).unwrap();
        assert_eq!(d.f.im, 0.0);
        assert!((d.f.re - 0.7 * (d.p_g * d.p_e()).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn coherence_closed_form_vs_matrix_pipeline() {
        let tol = Tolerances::default();
        for &(p_g, factor, phase) in &[(0.7311, 0.7, 0.0), (0.5, 1.0, 0.0), (0.2, 0.3, 1.1), (0.9, 0.95, -2.0)] {
            let f = Complex64::from_polar(factor * (p_g * (1.0f64 - p_g)).sqrt(), phase);
            let d = DemonState::new(p_g, f, &tol).unwrap();
            let generic = relative_entropy_of_coherence(&d.density(&tol).unwrap()).unwrap();
            assert!((demon_coherence(&d) - generic).abs() < 1e-12, "{p_g} {factor}");
        }
        let half = DemonState::new(0.5, Complex64::new(0.5, 0.0), &tol).unwrap();
        assert!((demon_coherence(&half) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn final_demon_limits() {
        let tol = Tolerances::default();
        let d = DemonState::new(0.7, Complex64::new(0.3, 0.1), &tol).unwrap();
        assert_eq!(final_demon(&d, 1.0), d);
        let real = DemonState::new(0.7, Complex64::new(0.3, 0.0), &tol).unwrap();
        let half = final_demon(&real, 0.5);
        assert!((half.p_g - 0.5).abs() < 1e-15 && (half.f - real.f).norm() < 1e-15);
        let imag = DemonState::new(0.7, Complex64::new(0.0, 0.3), &tol).unwrap();
        assert!(final_demon(&imag, 0.5).f.norm() < 1e-16);
    }

    #[test]
    fn bloch_ball_rejection() {
        let tol = Tolerances::default();
        assert!(DemonState::new(0.7311, Complex64::new(0.46, 0.0), &tol).is_err());
        assert!(DemonState::new(1.2, Complex64::new(0.0, 0.0), &tol).is_err());
        assert!(thermal_demon(&fig3(), 1.5, 0.0).is_err());
    }
}
