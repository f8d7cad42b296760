//! Operator pools: qubit excitations (QE) and single Pauli strings.
//!
//! Spin orbitals are interleaved: even qubits are alpha, odd qubits beta.
//! Every generator has coefficients `+/- i * scale` on its strings.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Qe,
    Qubit,
}

impl fmt::Display for PoolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolKind::Qe => write!(f, "qe"),
            PoolKind::Qubit => write!(f, "qubit"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OperatorPool {
    kind: PoolKind,
    operators: Vec<PauliSum>,
    labels: Vec<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct QePoolOptions {
    pub include_singles: bool,
    /// Uniform factor applied to every generator.
    pub scale: f64,
}

impl Default for QePoolOptions {
    fn default() -> Self {
        Self {
            include_singles: true,
            scale: 1.0,
        }
    }
}

impl OperatorPool {
    /// Assembles a pool after checking anti-Hermiticity, non-emptiness and
    /// uniqueness of every operator.
    pub fn new(kind: PoolKind, operators: Vec<PauliSum>, labels: Vec<String>) -> Result<Self> {
        if operators.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} operators with {} labels",
                operators.len(),
                labels.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for (op, label) in operators.iter().zip(&labels) {
            if op.is_empty() {
                return Err(Error::Config(format!("pool operator {label} is zero")));
            }
            if !op.is_anti_hermitian() {
                return Err(Error::NotAntiHermitian(op.max_abs_real()));
            }
            let key: Vec<(PauliString, u64, u64)> = op
                .iter()
                .map(|(p, c)| (*p, c.re.to_bits(), c.im.to_bits()))
                .collect();
            if !seen.insert(key) {
                return Err(Error::Config(format!("duplicate pool operator {label}")));
            }
        }
        Ok(Self {
            kind,
            operators,
            labels,
        })
    }

    pub fn kind(&self) -> PoolKind {
        self.kind
    }

    pub fn operators(&self) -> &[PauliSum] {
        &self.operators
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn n_qubits(&self) -> Option<usize> {
        self.operators.first().map(|o| o.n_qubits())
    }
}

fn spin(q: usize) -> i32 {
    if q % 2 == 0 {
        1
    } else {
        -1
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Qubit raising `(X - iY)/2` (`creation`) or lowering `(X + iY)/2` on one site.
fn qubit_ladder(n_qubits: usize, site: usize, creation: bool) -> Result<PauliSum> {
    let y = if creation { -0.5 } else { 0.5 };
    PauliSum::from_terms(
        n_qubits,
        [
            (PauliString::from_sites(n_qubits, &[(site, Pauli::X)])?, c(0.5, 0.0)),
            (PauliString::from_sites(n_qubits, &[(site, Pauli::Y)])?, c(0.0, y)),
        ],
    )
}

fn check_distinct(n_qubits: usize, idx: &[usize]) -> Result<()> {
    for (i, &a) in idx.iter().enumerate() {
        if a >= n_qubits {
            return Err(Error::IndexOutOfRange { index: a, len: n_qubits });
        }
        if idx[..i].contains(&a) {
            return Err(Error::Config(format!("repeated orbital index {a}")));
        }
    }
    Ok(())
}

/// Single qubit excitation `i (X_p Y_q - Y_p X_q)`.
pub fn qe_single(n_qubits: usize, p: usize, q: usize) -> Result<PauliSum> {
    check_distinct(n_qubits, &[p, q])?;
    PauliSum::from_terms(
        n_qubits,
        [
            (
                PauliString::from_sites(n_qubits, &[(p, Pauli::X), (q, Pauli::Y)])?,
                c(0.0, 1.0),
            ),
            (
                PauliString::from_sites(n_qubits, &[(p, Pauli::Y), (q, Pauli::X)])?,
                c(0.0, -1.0),
            ),
        ],
    )
}

/// Double qubit excitation moving `p, q` to `r, s`:
/// `8 (Q+_r Q+_s Q_p Q_q - h.c.)` with qubit ladder operators `Q`. This gives
/// eight strings with coefficients `+/- i`.
pub fn qe_double(n_qubits: usize, p: usize, q: usize, r: usize, s: usize) -> Result<PauliSum> {
    check_distinct(n_qubits, &[p, q, r, s])?;
    let forward = qubit_ladder(n_qubits, r, true)?
        .mul(&qubit_ladder(n_qubits, s, true)?)?
        .mul(&qubit_ladder(n_qubits, p, false)?)?
        .mul(&qubit_ladder(n_qubits, q, false)?)?;
    forward
        .add(&forward.adjoint().scale(c(-1.0, 0.0)))
        .map(|a| a.scale(c(8.0, 0.0)))
}

/// All spin-preserving single and double qubit excitations, singles first,
/// each block in lexicographic index order.
pub fn build_qe_pool(n_qubits: usize, n_electrons: usize, options: QePoolOptions) -> Result<OperatorPool> {
    if n_electrons == 0 || n_electrons >= n_qubits {
        return Err(Error::ElectronCount {
            n_electrons,
            n_qubits,
        });
    }
    let scale = c(options.scale, 0.0);
    let mut operators = Vec::new();
    let mut labels = Vec::new();
    let pairs: Vec<(usize, usize)> = (0..n_qubits)
        .flat_map(|p| (p + 1..n_qubits).map(move |q| (p, q)))
        .collect();
    if options.include_singles {
        for &(p, q) in &pairs {
            if spin(p) == spin(q) {
                operators.push(qe_single(n_qubits, p, q)?.scale(scale));
                labels.push(format!("single {p}->{q}"));
            }
        }
    }
    for (i, &(p, q)) in pairs.iter().enumerate() {
        for &(r, s) in &pairs[i + 1..] {
            if r == p || r == q || s == p || s == q {
                continue;
            }
            if spin(p) + spin(q) != spin(r) + spin(s) {
                continue;
            }
            operators.push(qe_double(n_qubits, p, q, r, s)?.scale(scale));
            labels.push(format!("double {p},{q}->{r},{s}"));
        }
    }
    OperatorPool::new(PoolKind::Qe, operators, labels)
}

fn string_label(p: &PauliString) -> String {
    let sites: Vec<String> = (0..p.n_qubits())
        .filter(|q| p.support() >> q & 1 == 1)
        .map(|q| q.to_string())
        .collect();
    let letters: String = (0..p.n_qubits())
        .filter(|q| p.support() >> q & 1 == 1)
        .map(|q| p.letter(q).as_char())
        .collect();
    format!("string {letters} on ({})", sites.join(","))
}

/// The distinct Pauli strings of a QE pool, each as the generator `i P`, in
/// order of first appearance.
pub fn build_qubit_pool(qe_pool: &OperatorPool) -> Result<OperatorPool> {
    if qe_pool.kind != PoolKind::Qe {
        return Err(Error::PoolKind {
            expected: PoolKind::Qe.to_string(),
            found: qe_pool.kind.to_string(),
        });
    }
    let mut seen = BTreeSet::new();
    let mut operators = Vec::new();
    let mut labels = Vec::new();
    for op in &qe_pool.operators {
        for (p, _) in op.iter() {
            if seen.insert(*p) {
                operators.push(PauliSum::from_string(*p, c(0.0, 1.0)));
                labels.push(string_label(p));
            }
        }
    }
    OperatorPool::new(PoolKind::Qubit, operators, labels)
}

/// Qubit pool for lattice models: every weight-1 string and every
/// nearest-neighbour weight-2 string on an open chain, each as `i P`.
pub fn nearest_neighbor_pool(n_qubits: usize) -> Result<OperatorPool> {
    const LETTERS: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
    let mut strings = Vec::new();
    for q in 0..n_qubits {
        for l in LETTERS {
            strings.push(PauliString::from_sites(n_qubits, &[(q, l)])?);
        }
    }
    for q in 0..n_qubits.saturating_sub(1) {
        for a in LETTERS {
            for b in LETTERS {
                strings.push(PauliString::from_sites(n_qubits, &[(q, a), (q + 1, b)])?);
            }
        }
    }
    let labels = strings.iter().map(string_label).collect();
    let operators = strings
        .into_iter()
        .map(|p| PauliSum::from_string(p, c(0.0, 1.0)))
        .collect();
    OperatorPool::new(PoolKind::Qubit, operators, labels)
}
