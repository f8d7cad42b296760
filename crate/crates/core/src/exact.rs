//! Exact ground-state energies by diagonalization, used to verify fixtures.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::PauliSum;
use crate::simulator::{apply_sum, inner};

/// Largest register accepted for exact diagonalization.
pub const MAX_EXACT_QUBITS: usize = 12;

/// Largest dimension handled by a dense eigendecomposition; bigger spaces
/// use Lanczos.
const DENSE_DIMENSION: usize = 1024;

const LANCZOS_STEPS: usize = 400;

/// Lowest eigenvalue of a Hermitian `hamiltonian`, optionally restricted to
/// basis states with `n_electrons` set bits.
pub fn ground_state_energy(hamiltonian: &PauliSum, n_electrons: Option<usize>) -> Result<f64> {
    let n = hamiltonian.n_qubits();
    if n > MAX_EXACT_QUBITS {
        return Err(Error::TooManyQubits {
            n_qubits: n,
            limit: MAX_EXACT_QUBITS,
        });
    }
    if !hamiltonian.is_hermitian() {
        return Err(Error::NotHermitian(hamiltonian.max_abs_imag()));
    }
    let basis: Vec<usize> = match n_electrons {
        Some(ne) if ne > n => {
            return Err(Error::ElectronCount {
                n_electrons: ne,
                n_qubits: n,
            })
        }
        Some(ne) => (0..1usize << n).filter(|b| b.count_ones() as usize == ne).collect(),
        None => (0..1usize << n).collect(),
    };
    if basis.len() <= DENSE_DIMENSION {
        Ok(dense_ground(hamiltonian, &basis))
    } else if n_electrons.is_none() {
        Ok(lanczos_ground(hamiltonian))
    } else {
        Err(Error::Dimension(format!(
            "sector of dimension {} exceeds the dense limit {DENSE_DIMENSION}",
            basis.len()
        )))
    }
}

fn dense_ground(hamiltonian: &PauliSum, basis: &[usize]) -> f64 {
    let position = |b: usize| basis.binary_search(&b).ok();
    let d = basis.len();
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for (col, &b) in basis.iter().enumerate() {
        for (p, c) in hamiltonian.iter() {
            let (phase, out) = p.apply_to_basis(b);
            // Terms leaving the sector contribute nothing to the restriction.
            if let Some(row) = position(out) {
                m[(row, col)] += c * phase;
            }
        }
    }
    let eig = m.symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn lanczos_ground(hamiltonian: &PauliSum) -> f64 {
    let d = 1usize << hamiltonian.n_qubits();
    // A generic start vector; symmetric ones can be eigenvectors of the model.
    let mut v: Vec<Complex64> = (0..d)
        .map(|i| Complex64::new(1.5 + (0.7 * i as f64 + 0.3).sin(), 0.0))
        .collect();
    normalize(&mut v);
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut previous = f64::INFINITY;
    for step in 0..LANCZOS_STEPS.min(d) {
        let mut w = apply_sum(hamiltonian, &v);
        let a = inner(&v, &w).re;
        alphas.push(a);
        basis.push(v);
        // Full reorthogonalization keeps the Krylov basis orthonormal.
        for _ in 0..2 {
            for q in &basis {
                let overlap = inner(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= overlap * qi;
                }
            }
        }
        let b = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let lowest = tridiagonal_min(&alphas, &betas);
        if b < 1e-12 || (step % 10 == 9 && (previous - lowest).abs() < 1e-13) {
            return lowest;
        }
        previous = lowest;
        betas.push(b);
        v = w.into_iter().map(|z| z / b).collect();
    }
    tridiagonal_min(&alphas, &betas[..alphas.len() - 1])
}

fn normalize(v: &mut [Complex64]) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v {
        *z /= n;
    }
}

fn tridiagonal_min(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    let mut t = DMatrix::<f64>::from_diagonal(&DVector::from_column_slice(alphas));
    for (i, &b) in betas.iter().take(k - 1).enumerate() {
        t[(i, i + 1)] = b;
        t[(i + 1, i)] = b;
    }
    t.symmetric_eigen().eigenvalues.min()
}
