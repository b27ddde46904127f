//! Entropies, coherence and partial traces on small states.

use coherent_szilard::matrixcore::{
    dephase, haar_unitary, partial_trace, relative_entropy_of_coherence, tensor, von_neumann_entropy, ComplexMatrix,
    DensityMatrix, Keep,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plus = DensityMatrix::try_from_matrix(ComplexMatrix::from_real_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]])?)?;
    println!("S(|+><+|)          = {:.6}", von_neumann_entropy(&plus)?);
    println!("C_r(|+><+|)        = {:.6} (ln 2 = {:.6})", relative_entropy_of_coherence(&plus)?, 2f64.ln());
    println!("S(dephased |+>)    = {:.6}", von_neumann_entropy(&dephase(&plus))?);

    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mixed = DensityMatrix::try_from_matrix(ComplexMatrix::diagonal_from(&[0.7, 0.2, 0.1]))?;
    let u = haar_unitary(3, &mut rng);
    let rotated = DensityMatrix::try_from_matrix(u.sandwich(mixed.matrix())?)?;
    println!("S before/after U   = {:.6} / {:.6}", von_neumann_entropy(&mixed)?, von_neumann_entropy(&rotated)?);
    println!("C_r(U rho U^dag)   = {:.6}", relative_entropy_of_coherence(&rotated)?);

    let joint = tensor(&plus, &rotated);
    let back = partial_trace(&joint, (2, 3), Keep::B)?;
    println!("Tr_A(A (x) B) == B : max diff {:.2e}", back.matrix().max_abs_diff(rotated.matrix()));
    Ok(())
}
