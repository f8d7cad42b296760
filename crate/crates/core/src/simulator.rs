//! Dense statevector engine for product-of-exponentials ansätze.
//!
//! Basis index bit `i` is the occupation of qubit `i`. Generators are
//! anti-Hermitian Pauli sums `A = sum_j i r_j P_j`; when the strings commute,
//! `exp(theta A)` is applied one string at a time as
//! `cos(theta r) I + i sin(theta r) P`. Otherwise the exponential is formed
//! densely on the generator's support.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::driver::CostLedger;
use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};

/// Hard limit on register size for dense vectors.
pub const MAX_SIM_QUBITS: usize = 20;

/// Largest support handled by the dense exponential fallback.
const MAX_DENSE_SUPPORT: usize = 10;

const NORM_TOLERANCE: f64 = 1e-10;
const IMAG_RESIDUE_TOLERANCE: f64 = 1e-10;

fn check_qubits(n_qubits: usize) -> Result<()> {
    if n_qubits > MAX_SIM_QUBITS {
        return Err(Error::TooManyQubits {
            n_qubits,
            limit: MAX_SIM_QUBITS,
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, len: dim });
        }
        let mut amplitudes = vec![Complex64::default(); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if amplitudes.len() != 1usize << n_qubits {
            return Err(Error::Dimension(format!(
                "{} amplitudes for {n_qubits} qubits",
                amplitudes.len()
            )));
        }
        let s = Self {
            n_qubits,
            amplitudes,
        };
        if (s.norm() - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Dimension(format!("state norm {} is not 1", s.norm())));
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// `P|self>` for a single Pauli string.
    pub fn apply_pauli(&self, p: &PauliString) -> Result<StateVector> {
        self.check_register(p.n_qubits())?;
        let mut out = vec![Complex64::default(); self.amplitudes.len()];
        for (b, &a) in self.amplitudes.iter().enumerate() {
            let (phase, b2) = p.apply_to_basis(b);
            out[b2] = phase * a;
        }
        Ok(StateVector {
            n_qubits: self.n_qubits,
            amplitudes: out,
        })
    }

    fn check_register(&self, n: usize) -> Result<()> {
        if n != self.n_qubits {
            return Err(Error::QubitMismatch {
                left: self.n_qubits,
                right: n,
            });
        }
        Ok(())
    }
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `O|psi>` as a raw amplitude vector (no normalization).
pub(crate) fn apply_sum(op: &PauliSum, psi: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); psi.len()];
    for (p, c) in op.iter() {
        for (b, &a) in psi.iter().enumerate() {
            let (phase, b2) = p.apply_to_basis(b);
            out[b2] += c * phase * a;
        }
    }
    out
}

/// `<psi|P|psi>` for one string without materializing `P|psi>`.
fn pauli_expectation(p: &PauliString, psi: &[Complex64]) -> Complex64 {
    psi.iter()
        .enumerate()
        .map(|(b, &a)| {
            let (phase, b2) = p.apply_to_basis(b);
            psi[b2].conj() * phase * a
        })
        .sum()
}

/// Real expectation value of a Hermitian observable.
pub fn expectation(state: &StateVector, observable: &PauliSum) -> Result<f64> {
    state.check_register(observable.n_qubits())?;
    if !observable.is_hermitian() {
        return Err(Error::NotHermitian(observable.max_abs_imag()));
    }
    expectation_raw(observable, &state.amplitudes)
}

pub(crate) fn expectation_raw(observable: &PauliSum, psi: &[Complex64]) -> Result<f64> {
    let mut total = Complex64::default();
    let mut scale = 1.0f64;
    for (p, c) in observable.iter() {
        total += c * pauli_expectation(p, psi);
        scale += c.norm();
    }
    if total.im.abs() > IMAG_RESIDUE_TOLERANCE * scale {
        return Err(Error::ComplexExpectation(total.im));
    }
    Ok(total.re)
}

/// Dense matrix of a generator restricted to its support qubits.
#[derive(Clone, Debug)]
struct DenseSupport {
    qubits: Vec<usize>,
    matrix: DMatrix<Complex64>,
}

/// Scatters the low bits of `local` onto the positions in `qubits`.
fn deposit(local: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .enumerate()
        .filter(|(j, _)| local >> j & 1 == 1)
        .fold(0, |acc, (_, &q)| acc | 1 << q)
}

/// Gathers the bits of `mask` selected by `qubits` into a dense local index.
fn extract(mask: u64, qubits: &[usize]) -> u64 {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &q)| acc | ((mask >> q) & 1) << j)
}

impl DenseSupport {
    fn new(sum: &PauliSum) -> Result<Self> {
        let support = sum.support();
        let qubits: Vec<usize> = (0..sum.n_qubits()).filter(|q| support >> q & 1 == 1).collect();
        let k = qubits.len();
        if k > MAX_DENSE_SUPPORT {
            return Err(Error::Config(format!(
                "non-commuting generator on {k} qubits exceeds the dense fallback limit of {MAX_DENSE_SUPPORT}"
            )));
        }
        let dim = 1usize << k;
        let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
        for (p, c) in sum.iter() {
            let local = PauliString::from_masks(
                k.max(1),
                extract(p.x_mask(), &qubits),
                extract(p.z_mask(), &qubits),
            )?;
            for col in 0..dim {
                let (phase, row) = local.apply_to_basis(col);
                matrix[(row, col)] += c * phase;
            }
        }
        Ok(Self { qubits, matrix })
    }

    fn apply_exp(&self, theta: f64, psi: &mut [Complex64]) {
        let u = expm(&(&self.matrix * Complex64::new(theta, 0.0)));
        let dim = 1usize << self.qubits.len();
        let support = deposit(dim - 1, &self.qubits);
        let offsets: Vec<usize> = (0..dim).map(|l| deposit(l, &self.qubits)).collect();
        let mut buf = vec![Complex64::default(); dim];
        for base in 0..psi.len() {
            if base & support != 0 {
                continue;
            }
            for (l, &o) in offsets.iter().enumerate() {
                buf[l] = psi[base | o];
            }
            for (r, &o) in offsets.iter().enumerate() {
                psi[base | o] = (0..dim).map(|c| u[(r, c)] * buf[c]).sum();
            }
        }
    }
}

/// Matrix exponential by scaling and squaring with a Taylor series.
pub(crate) fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|c| (0..n).map(|r| a[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / Complex64::new(2f64.powi(squarings as i32), 0.0);
    let mut result = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / Complex64::new(k as f64, 0.0);
        result += &term;
        if term.iter().map(|x| x.norm()).fold(0.0, f64::max) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// An anti-Hermitian generator prepared for repeated exponentiation.
#[derive(Clone, Debug)]
pub struct Generator {
    sum: PauliSum,
    // A = sum_j i * rates[j] * strings[j]
    strings: Vec<PauliString>,
    rates: Vec<f64>,
    dense: Option<DenseSupport>,
}

impl Generator {
    pub fn new(sum: PauliSum) -> Result<Self> {
        check_qubits(sum.n_qubits())?;
        if !sum.is_anti_hermitian() {
            return Err(Error::NotAntiHermitian(sum.max_abs_real()));
        }
        let (strings, rates) = sum.iter().map(|(p, c)| (*p, c.im)).unzip();
        let dense = if sum.terms_commute() {
            None
        } else {
            Some(DenseSupport::new(&sum)?)
        };
        Ok(Self {
            sum,
            strings,
            rates,
            dense,
        })
    }

    pub fn sum(&self) -> &PauliSum {
        &self.sum
    }

    pub fn n_qubits(&self) -> usize {
        self.sum.n_qubits()
    }

    /// Whether `exp(theta A)` is applied string by string.
    pub fn is_split(&self) -> bool {
        self.dense.is_none()
    }

    /// In-place `psi <- exp(theta A) psi`.
    pub(crate) fn apply_exp(&self, theta: f64, psi: &mut [Complex64]) {
        match &self.dense {
            Some(d) => d.apply_exp(theta, psi),
            None => {
                for (p, &r) in self.strings.iter().zip(&self.rates) {
                    apply_pauli_rotation(p, theta * r, psi);
                }
            }
        }
    }

    /// In-place exponential applying the commuting strings in a given order.
    /// Only meaningful for split generators.
    #[cfg(test)]
    pub(crate) fn apply_exp_ordered(&self, theta: f64, order: &[usize], psi: &mut [Complex64]) {
        for &j in order {
            apply_pauli_rotation(&self.strings[j], theta * self.rates[j], psi);
        }
    }

    #[cfg(test)]
    pub(crate) fn n_strings(&self) -> usize {
        self.strings.len()
    }

    /// `A|psi>`.
    pub(crate) fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        apply_sum(&self.sum, psi)
    }
}

/// `psi <- (cos(phi) I + i sin(phi) P) psi`.
fn apply_pauli_rotation(p: &PauliString, phi: f64, psi: &mut [Complex64]) {
    let (s, c) = phi.sin_cos();
    let is = Complex64::new(0.0, s);
    let x = p.x_mask() as usize;
    if x == 0 {
        for (b, a) in psi.iter_mut().enumerate() {
            let (phase, _) = p.apply_to_basis(b);
            *a *= c + is * phase;
        }
        return;
    }
    for b in 0..psi.len() {
        let b2 = b ^ x;
        if b2 < b {
            continue;
        }
        let (ph_b, _) = p.apply_to_basis(b);
        let (ph_b2, _) = p.apply_to_basis(b2);
        let (a, a2) = (psi[b], psi[b2]);
        psi[b] = c * a + is * ph_b2 * a2;
        psi[b2] = c * a2 + is * ph_b * a;
    }
}

/// Reference determinant plus an ordered list of `(generator, angle)` pairs.
///
/// The prepared state is `exp(theta_n A_n) ... exp(theta_1 A_1) |ref>`.
#[derive(Clone, Debug)]
pub struct AnsatzState {
    n_qubits: usize,
    reference: usize,
    elements: Vec<(Generator, f64)>,
}

impl AnsatzState {
    pub fn new(n_qubits: usize, reference: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        if n_qubits == 0 || reference >= 1usize << n_qubits {
            return Err(Error::IndexOutOfRange {
                index: reference,
                len: 1usize << n_qubits,
            });
        }
        Ok(Self {
            n_qubits,
            reference,
            elements: Vec::new(),
        })
    }

    pub fn push(&mut self, generator: Generator, theta: f64) -> Result<()> {
        if generator.n_qubits() != self.n_qubits {
            return Err(Error::QubitMismatch {
                left: self.n_qubits,
                right: generator.n_qubits(),
            });
        }
        self.elements.push((generator, theta));
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn generators(&self) -> impl Iterator<Item = &Generator> {
        self.elements.iter().map(|(g, _)| g)
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.elements.iter().map(|(_, t)| *t).collect()
    }

    pub fn set_parameters(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.elements.len() {
            return Err(Error::Dimension(format!(
                "{} parameters for {} ansatz elements",
                x.len(),
                self.elements.len()
            )));
        }
        for ((_, t), &v) in self.elements.iter_mut().zip(x) {
            *t = v;
        }
        Ok(())
    }

    /// Copy with the given parameters substituted.
    pub fn with_parameters(&self, x: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.set_parameters(x)?;
        Ok(out)
    }

    fn check_finite(&self) -> Result<()> {
        if let Some((i, _)) = self
            .elements
            .iter()
            .enumerate()
            .find(|(_, (_, t))| !t.is_finite())
        {
            return Err(Error::NonFinite(format!("ansatz parameter {i}")));
        }
        Ok(())
    }
}

pub fn prepare(ansatz: &AnsatzState) -> Result<StateVector> {
    ansatz.check_finite()?;
    let mut state = StateVector::basis(ansatz.n_qubits, ansatz.reference)?;
    for (g, theta) in &ansatz.elements {
        g.apply_exp(*theta, &mut state.amplitudes);
    }
    Ok(state)
}

fn check_observable(ansatz: &AnsatzState, hamiltonian: &PauliSum) -> Result<()> {
    if hamiltonian.n_qubits() != ansatz.n_qubits {
        return Err(Error::QubitMismatch {
            left: ansatz.n_qubits,
            right: hamiltonian.n_qubits(),
        });
    }
    if !hamiltonian.is_hermitian() {
        return Err(Error::NotHermitian(hamiltonian.max_abs_imag()));
    }
    Ok(())
}

/// Energy of the prepared state; charges one function evaluation.
pub fn energy(ansatz: &AnsatzState, hamiltonian: &PauliSum, ledger: &mut CostLedger) -> Result<f64> {
    check_observable(ansatz, hamiltonian)?;
    let state = prepare(ansatz)?;
    ledger.charge_energy();
    expectation_raw(hamiltonian, &state.amplitudes)
}

/// Energy and full analytic gradient; charges `1 + 2n` function evaluations.
pub fn energy_and_gradient(
    ansatz: &AnsatzState,
    hamiltonian: &PauliSum,
    ledger: &mut CostLedger,
) -> Result<(f64, Vec<f64>)> {
    let out = energy_and_gradient_uncharged(ansatz, hamiltonian)?;
    ledger.charge_energy();
    ledger.charge_gradient_components(ansatz.len());
    Ok(out)
}

/// One reverse sweep: with `phi_j = U_j..U_1|ref>` and
/// `lambda_j = U_{j+1}^dag..U_n^dag H|psi>`, `dE/dtheta_j = 2 Re <lambda_j|A_j|phi_j>`.
pub(crate) fn energy_and_gradient_uncharged(
    ansatz: &AnsatzState,
    hamiltonian: &PauliSum,
) -> Result<(f64, Vec<f64>)> {
    check_observable(ansatz, hamiltonian)?;
    let state = prepare(ansatz)?;
    let mut phi = state.amplitudes;
    let mut lambda = apply_sum(hamiltonian, &phi);
    let energy = inner(&phi, &lambda);
    if energy.im.abs() > IMAG_RESIDUE_TOLERANCE * (1.0 + energy.re.abs()) {
        return Err(Error::ComplexExpectation(energy.im));
    }
    let mut grad = vec![0.0; ansatz.len()];
    for (j, (g, theta)) in ansatz.elements.iter().enumerate().rev() {
        let a_phi = g.apply(&phi);
        grad[j] = 2.0 * inner(&lambda, &a_phi).re;
        if j > 0 {
            g.apply_exp(-theta, &mut phi);
            g.apply_exp(-theta, &mut lambda);
        }
    }
    Ok((energy.re, grad))
}

/// Single partial derivative `dE/dtheta_index`; charges 2 function evaluations.
pub fn partial_derivative(
    ansatz: &AnsatzState,
    hamiltonian: &PauliSum,
    index: usize,
    ledger: &mut CostLedger,
) -> Result<f64> {
    if index >= ansatz.len() {
        return Err(Error::IndexOutOfRange {
            index,
            len: ansatz.len(),
        });
    }
    check_observable(ansatz, hamiltonian)?;
    // phi = U_index..U_1|ref>, lambda = U_{index+1}^dag..U_n^dag H|psi>
    let mut phi = StateVector::basis(ansatz.n_qubits, ansatz.reference)?.amplitudes;
    for (g, theta) in &ansatz.elements[..=index] {
        g.apply_exp(*theta, &mut phi);
    }
    let mut psi = phi.clone();
    for (g, theta) in &ansatz.elements[index + 1..] {
        g.apply_exp(*theta, &mut psi);
    }
    let mut lambda = apply_sum(hamiltonian, &psi);
    for (g, theta) in ansatz.elements[index + 1..].iter().rev() {
        g.apply_exp(-theta, &mut lambda);
    }
    let a_phi = ansatz.elements[index].0.apply(&phi);
    ledger.charge_gradient_components(1);
    Ok(2.0 * inner(&lambda, &a_phi).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pools::qe_double;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gen(labels: &[(&str, f64)]) -> Generator {
        let terms: Vec<(&str, Complex64)> = labels.iter().map(|(l, r)| (*l, c(0.0, *r))).collect();
        Generator::new(PauliSum::from_labels(&terms).unwrap()).unwrap()
    }

    // Dense full-space matrix of a Pauli sum, built by Kronecker products.
    fn dense(sum: &PauliSum) -> DMatrix<Complex64> {
        let n = sum.n_qubits();
        let d = 1usize << n;
        let mut m = DMatrix::zeros(d, d);
        for (p, coeff) in sum.iter() {
            let mut k = DMatrix::from_element(1, 1, c(1.0, 0.0));
            for site in (0..n).rev() {
                let s = match p.letter(site) {
                    crate::pauli::Pauli::I => DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]),
                    crate::pauli::Pauli::X => DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
                    crate::pauli::Pauli::Y => DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
                    crate::pauli::Pauli::Z => DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
                };
                k = k.kronecker(&s);
            }
            m += k * *coeff;
        }
        m
    }

    // exp(theta A) through the Hermitian eigendecomposition of iA.
    fn eig_exp(a: &DMatrix<Complex64>, theta: f64) -> DMatrix<Complex64> {
        let k = a * c(0.0, 1.0);
        let eig = k.symmetric_eigen();
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (c(0.0, -theta * l)).exp()));
        &eig.eigenvectors * d * eig.eigenvectors.adjoint()
    }

    #[test]
    fn empty_ansatz_is_reference() {
        let a = AnsatzState::new(4, 0b0011).unwrap();
        let s = prepare(&a).unwrap();
        assert_eq!(s.amplitudes()[0b0011], c(1.0, 0.0));
        assert!((s.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_qubit_rotation() {
        let mut a = AnsatzState::new(1, 0).unwrap();
        a.push(gen(&[("Y", 1.0)]), std::f64::consts::FRAC_PI_2).unwrap();
        let s = prepare(&a).unwrap();
        assert!((s.amplitudes()[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qe_double_matches_dense_exponential() {
        let g = qe_double(4, 0, 1, 2, 3).unwrap();
        assert_eq!(g.len(), 8);
        let mut a = AnsatzState::new(4, 0b0011).unwrap();
        a.push(Generator::new(g.clone()).unwrap(), 0.3).unwrap();
        let s = prepare(&a).unwrap();
        let u = eig_exp(&dense(&g), 0.3);
        let expected = u.column(0b0011);
        let overlap: Complex64 = expected.iter().zip(s.amplitudes()).map(|(e, a)| e.conj() * a).sum();
        assert!(overlap.norm_sqr() >= 1.0 - 1e-10);
    }

    #[test]
    fn non_commuting_generator_uses_dense_fallback() {
        let g = gen(&[("XI", 0.7), ("ZY", -0.4), ("YZ", 0.2)]);
        assert!(!g.is_split());
        let mut a = AnsatzState::new(2, 0b01).unwrap();
        a.push(g.clone(), 0.9).unwrap();
        let s = prepare(&a).unwrap();
        let u = eig_exp(&dense(g.sum()), 0.9);
        for (b, amp) in s.amplitudes().iter().enumerate() {
            assert!((u[(b, 0b01)] - amp).norm() < 1e-12);
        }
    }

    #[test]
    fn dense_fallback_on_partial_support() {
        // Support {0, 2} of three qubits; qubit 1 is a spectator.
        let g = gen(&[("XIY", 0.3), ("ZIY", 0.5)]);
        assert!(!g.is_split());
        let mut a = AnsatzState::new(3, 0b010).unwrap();
        a.push(g.clone(), 1.3).unwrap();
        let s = prepare(&a).unwrap();
        let u = eig_exp(&dense(g.sum()), 1.3);
        for (b, amp) in s.amplitudes().iter().enumerate() {
            assert!((u[(b, 0b010)] - amp).norm() < 1e-12);
        }
    }

    #[test]
    fn expectation_basics() {
        let z = PauliSum::from_labels(&[("Z", c(1.0, 0.0))]).unwrap();
        let x = PauliSum::from_labels(&[("X", c(1.0, 0.0))]).unwrap();
        let zero = StateVector::basis(1, 0).unwrap();
        assert_eq!(expectation(&zero, &z).unwrap(), 1.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::from_amplitudes(1, vec![c(h, 0.0), c(h, 0.0)]).unwrap();
        assert!((expectation(&plus, &x).unwrap() - 1.0).abs() < 1e-15);
        let iy = PauliSum::from_labels(&[("Y", c(0.0, 1.0))]).unwrap();
        assert!(matches!(expectation(&plus, &iy), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn rejects_bad_inputs() {
        let herm = PauliSum::from_labels(&[("X", c(1.0, 0.0))]).unwrap();
        assert!(matches!(Generator::new(herm), Err(Error::NotAntiHermitian(_))));
        assert!(matches!(
            StateVector::basis(21, 0),
            Err(Error::TooManyQubits { .. })
        ));
        let mut a = AnsatzState::new(2, 0).unwrap();
        assert!(a.push(gen(&[("X", 1.0)]), 0.1).is_err());
        a.push(gen(&[("XY", 1.0)]), f64::NAN).unwrap();
        assert!(matches!(prepare(&a), Err(Error::NonFinite(_))));
    }

    #[test]
    fn empty_ansatz_gradient_charges_one() {
        let h = PauliSum::from_labels(&[("ZI", c(0.5, 0.0)), ("IZ", c(0.25, 0.0))]).unwrap();
        let a = AnsatzState::new(2, 0b01).unwrap();
        let mut ledger = CostLedger::new();
        let (e, g) = energy_and_gradient(&a, &h, &mut ledger).unwrap();
        assert!((e - (-0.5 + 0.25)).abs() < 1e-15);
        assert!(g.is_empty());
        assert_eq!(ledger.function_evaluations(), 1);
    }

    fn random_ansatz(rng: &mut ChaCha8Rng, n: usize, len: usize) -> AnsatzState {
        let mut a = AnsatzState::new(n, rng.gen_range(0..1usize << n)).unwrap();
        for _ in 0..len {
            let nterms = rng.gen_range(1..4);
            let mut s = PauliSum::zero(n).unwrap();
            for _ in 0..nterms {
                let p = PauliString::from_masks(n, rng.gen_range(0..1u64 << n), rng.gen_range(0..1u64 << n)).unwrap();
                s.add_term(p, c(0.0, rng.gen_range(-1.0..1.0))).unwrap();
            }
            if s.is_empty() {
                continue;
            }
            a.push(Generator::new(s).unwrap(), rng.gen_range(-1.5..1.5)).unwrap();
        }
        a
    }

    fn random_hamiltonian(rng: &mut ChaCha8Rng, n: usize) -> PauliSum {
        let mut h = PauliSum::zero(n).unwrap();
        for _ in 0..(3 * n) {
            let p = PauliString::from_masks(n, rng.gen_range(0..1u64 << n), rng.gen_range(0..1u64 << n)).unwrap();
            h.add_term(p, c(rng.gen_range(-1.0..1.0), 0.0)).unwrap();
        }
        h
    }

    #[test]
    fn unitarity_over_many_applications() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_ansatz(&mut rng, 5, 100);
        let s = prepare(&a).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn commuting_split_is_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Generator::new(qe_double(6, 0, 3, 1, 4).unwrap()).unwrap();
        assert!(g.is_split());
        let mut base = vec![c(0.0, 0.0); 64];
        base[0b001011] = c(1.0, 0.0);
        let mut reference = base.clone();
        g.apply_exp(0.77, &mut reference);
        for _ in 0..10 {
            let mut order: Vec<usize> = (0..g.n_strings()).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            let mut psi = base.clone();
            g.apply_exp_ordered(0.77, &order, &mut psi);
            assert!(inner(&reference, &psi).norm_sqr() >= 1.0 - 1e-10);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 4, 6, 8] {
            let a = random_ansatz(&mut rng, n, 10);
            let h = random_hamiltonian(&mut rng, n);
            let (_, g) = energy_and_gradient_uncharged(&a, &h).unwrap();
            let x = a.parameters();
            for j in 0..x.len() {
                let step = 1e-5;
                let mut xp = x.clone();
                xp[j] += step;
                let mut xm = x.clone();
                xm[j] -= step;
                let ep = energy_and_gradient_uncharged(&a.with_parameters(&xp).unwrap(), &h).unwrap().0;
                let em = energy_and_gradient_uncharged(&a.with_parameters(&xm).unwrap(), &h).unwrap().0;
                let fd = (ep - em) / (2.0 * step);
                let err = (g[j] - fd).abs() / g[j].abs().max(1e-3);
                assert!(err < 1e-6, "n={n} j={j}: {} vs {fd}", g[j]);
            }
        }
    }

    #[test]
    fn partial_derivative_matches_full_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_ansatz(&mut rng, 4, 6);
        let h = random_hamiltonian(&mut rng, 4);
        let (_, g) = energy_and_gradient_uncharged(&a, &h).unwrap();
        let mut ledger = CostLedger::new();
        for j in 0..a.len() {
            let d = partial_derivative(&a, &h, j, &mut ledger).unwrap();
            assert!((d - g[j]).abs() < 1e-12);
        }
        assert_eq!(ledger.function_evaluations(), 2 * a.len() as u64);
    }

    #[test]
    fn last_parameter_gradient_is_commutator_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut a = random_ansatz(&mut rng, 4, 4);
        let h = random_hamiltonian(&mut rng, 4);
        let prev = prepare(&a).unwrap();
        let new_gen = qe_double(4, 0, 1, 2, 3).unwrap();
        a.push(Generator::new(new_gen.clone()).unwrap(), 0.0).unwrap();
        let (_, g) = energy_and_gradient_uncharged(&a, &h).unwrap();
        let comm = h.commutator(&new_gen).unwrap();
        let expected = expectation(&prev, &comm).unwrap();
        assert!((g[g.len() - 1] - expected).abs() < 1e-10);
    }
}
