//! Hamiltonian and pool files, and the built-in lattice models.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::driver::Problem;
use crate::error::{Error, Result};
use crate::exact::{ground_state_energy, MAX_EXACT_QUBITS};
use crate::pauli::{PauliString, PauliSum};
use crate::pools::OperatorPool;

/// Imaginary parts up to this size are treated as rounding noise.
pub const HERMITICITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub pauli: String,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Hartree,
    Dimensionless,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_electrons: Option<usize>,
    /// Occupation of each qubit, qubit 0 first.
    pub reference_bitstring: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_ground_energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hf_energy: Option<f64>,
    pub units: Units,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<String>,
}

/// On-disk Hamiltonian schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianFile {
    pub n_qubits: usize,
    pub terms: Vec<TermRecord>,
    pub metadata: Metadata,
}

/// A validated Hamiltonian with its metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedHamiltonian {
    pub hamiltonian: PauliSum,
    pub metadata: Metadata,
}

impl LoadedHamiltonian {
    /// Basis index of the reference bitstring.
    pub fn reference_index(&self) -> usize {
        bitstring_index(&self.metadata.reference_bitstring)
    }

    pub fn problem(&self) -> Problem {
        Problem {
            hamiltonian: self.hamiltonian.clone(),
            reference: self.reference_index(),
            exact_energy: self.metadata.exact_ground_energy,
        }
    }

    pub fn to_file(&self) -> HamiltonianFile {
        HamiltonianFile {
            n_qubits: self.hamiltonian.n_qubits(),
            terms: self
                .hamiltonian
                .iter()
                .map(|(p, c)| TermRecord {
                    pauli: p.to_string(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
            metadata: self.metadata.clone(),
        }
    }

    /// Canonical JSON text: terms in canonical string order, real
    /// coefficients, trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_file())?;
        s.push('\n');
        Ok(s)
    }

    /// Recomputes the exact ground energy (in the electron-number sector when
    /// the metadata gives one) and returns `(computed, recorded)`.
    pub fn verify(&self) -> Result<(f64, Option<f64>)> {
        let e = ground_state_energy(&self.hamiltonian, self.metadata.n_electrons)?;
        Ok((e, self.metadata.exact_ground_energy))
    }
}

fn bitstring_index(bits: &str) -> usize {
    bits.chars()
        .enumerate()
        .filter(|(_, ch)| *ch == '1')
        .fold(0, |acc, (i, _)| acc | 1 << i)
}

impl TryFrom<HamiltonianFile> for LoadedHamiltonian {
    type Error = String;

    fn try_from(file: HamiltonianFile) -> std::result::Result<Self, String> {
        let n = file.n_qubits;
        let mut sum = PauliSum::zero(n).map_err(|e| format!("n_qubits: {e}"))?;
        for (i, t) in file.terms.iter().enumerate() {
            if t.pauli.len() != n {
                return Err(format!(
                    "terms[{i}].pauli: {:?} has length {}, expected {n}",
                    t.pauli,
                    t.pauli.len()
                ));
            }
            let p: PauliString = t.pauli.parse().map_err(|e| format!("terms[{i}].pauli: {e}"))?;
            if !(t.re.is_finite() && t.im.is_finite()) {
                return Err(format!("terms[{i}]: non-finite coefficient"));
            }
            sum.add_term(p, Complex64::new(t.re, t.im))
                .map_err(|e| format!("terms[{i}]: {e}"))?;
        }
        let imag = sum.max_abs_imag();
        if imag > HERMITICITY_TOLERANCE {
            return Err(format!("{}", Error::NotHermitian(imag)));
        }
        let real = PauliSum::from_terms(n, sum.iter().map(|(p, c)| (*p, Complex64::new(c.re, 0.0))))
            .map_err(|e| e.to_string())?;
        let bits = &file.metadata.reference_bitstring;
        if bits.len() != n || bits.chars().any(|ch| ch != '0' && ch != '1') {
            return Err(format!(
                "metadata.reference_bitstring: {bits:?} is not a 0/1 string of length {n}"
            ));
        }
        if let Some(ne) = file.metadata.n_electrons {
            let ones = bits.chars().filter(|&ch| ch == '1').count();
            if ne != ones {
                return Err(format!(
                    "metadata.n_electrons: {ne} does not match the {ones} occupied reference orbitals"
                ));
            }
        }
        Ok(Self {
            hamiltonian: real,
            metadata: file.metadata,
        })
    }
}

/// Parses Hamiltonian JSON text; `origin` names the source in errors.
pub fn parse_hamiltonian(text: &str, origin: &str) -> Result<LoadedHamiltonian> {
    let parse_error = |message: String| Error::Parse {
        path: origin.into(),
        message,
    };
    let file: HamiltonianFile = serde_json::from_str(text).map_err(|e| parse_error(e.to_string()))?;
    LoadedHamiltonian::try_from(file).map_err(parse_error)
}

pub fn load_hamiltonian(path: impl AsRef<Path>) -> Result<LoadedHamiltonian> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_hamiltonian(&text, &path.display().to_string())
}

pub fn save_hamiltonian(path: impl AsRef<Path>, hamiltonian: &LoadedHamiltonian) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, hamiltonian.to_json()?).map_err(|e| Error::io(path, e))
}

/// Pool export entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub label: String,
    pub terms: Vec<TermRecord>,
}

pub fn pool_records(pool: &OperatorPool) -> Vec<PoolRecord> {
    pool.operators()
        .iter()
        .zip(pool.labels())
        .map(|(op, label)| PoolRecord {
            label: label.clone(),
            terms: op
                .iter()
                .map(|(p, c)| TermRecord {
                    pauli: p.to_string(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        })
        .collect()
}

pub fn pool_to_json(pool: &OperatorPool) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&pool_records(pool))?;
    s.push('\n');
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tfim,
    Heisenberg,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Tfim => write!(f, "tfim"),
            ModelKind::Heisenberg => write!(f, "heisenberg"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tfim" => Ok(ModelKind::Tfim),
            "heisenberg" => Ok(ModelKind::Heisenberg),
            _ => Err(Error::Config(format!("unknown model {s:?}"))),
        }
    }
}

/// Open-chain lattice model.
///
/// TFIM: `-J sum Z_i Z_{i+1} - h sum X_i`.
/// Heisenberg: `J sum (X_i X_{i+1} + Y_i Y_{i+1} + Z_i Z_{i+1}) - h sum Z_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n_qubits: usize,
    pub coupling: f64,
    pub field: f64,
}

impl ModelSpec {
    pub fn name(&self) -> String {
        format!("{}_n{}_j{}_h{}", self.kind, self.n_qubits, self.coupling, self.field)
    }
}

fn bond(n: usize, i: usize, letter: char) -> String {
    (0..n).map(|q| if q == i || q == i + 1 { letter } else { 'I' }).collect()
}

fn site(n: usize, i: usize, letter: char) -> String {
    (0..n).map(|q| if q == i { letter } else { 'I' }).collect()
}

/// Builds a lattice model with the all-zeros reference; the exact ground
/// energy is filled in when `with_exact` is set.
pub fn builtin_model(spec: &ModelSpec, with_exact: bool) -> Result<LoadedHamiltonian> {
    let n = spec.n_qubits;
    if n < 2 {
        return Err(Error::Config("lattice models need at least 2 qubits".into()));
    }
    if !(spec.coupling.is_finite() && spec.field.is_finite()) {
        return Err(Error::Config("model parameters must be finite".into()));
    }
    let mut terms: Vec<(String, f64)> = Vec::new();
    match spec.kind {
        ModelKind::Tfim => {
            for i in 0..n - 1 {
                terms.push((bond(n, i, 'Z'), -spec.coupling));
            }
            for i in 0..n {
                terms.push((site(n, i, 'X'), -spec.field));
            }
        }
        ModelKind::Heisenberg => {
            for i in 0..n - 1 {
                for l in ['X', 'Y', 'Z'] {
                    terms.push((bond(n, i, l), spec.coupling));
                }
            }
            for i in 0..n {
                terms.push((site(n, i, 'Z'), -spec.field));
            }
        }
    }
    let mut hamiltonian = PauliSum::zero(n)?;
    for (label, v) in &terms {
        hamiltonian.add_term(label.parse()?, Complex64::new(*v, 0.0))?;
    }
    let exact_ground_energy = if with_exact {
        if n > MAX_EXACT_QUBITS {
            return Err(Error::TooManyQubits {
                n_qubits: n,
                limit: MAX_EXACT_QUBITS,
            });
        }
        Some(ground_state_energy(&hamiltonian, None)?)
    } else {
        None
    };
    Ok(LoadedHamiltonian {
        hamiltonian,
        metadata: Metadata {
            name: spec.name(),
            n_electrons: None,
            reference_bitstring: "0".repeat(n),
            exact_ground_energy,
            hf_energy: None,
            units: Units::Dimensionless,
            generation: Some(format!(
                "builtin {} open chain, coupling {}, field {}",
                spec.kind, spec.coupling, spec.field
            )),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TERMS: &str = r#"{
        "n_qubits": 2,
        "terms": [{"pauli": "IZ", "re": 0.5, "im": 0.0}, {"pauli": "ZI", "re": 0.5, "im": 0.0}],
        "metadata": {"name": "toy", "reference_bitstring": "00", "units": "dimensionless"}
    }"#;

    #[test]
    fn parses_two_terms() {
        let h = parse_hamiltonian(TWO_TERMS, "toy").unwrap();
        assert_eq!(h.hamiltonian.n_qubits(), 2);
        assert_eq!(h.hamiltonian.len(), 2);
        assert_eq!(h.reference_index(), 0);
    }

    #[test]
    fn rejects_imaginary_coefficient() {
        let text = TWO_TERMS.replace(r#""re": 0.5, "im": 0.0}]"#, r#""re": 0.5, "im": 1e-3}]"#);
        let err = parse_hamiltonian(&text, "toy").unwrap_err().to_string();
        assert!(err.contains("Hermitian"), "{err}");
    }

    #[test]
    fn rejects_bad_bitstring_and_labels() {
        let bad_bits = TWO_TERMS.replace(r#""00""#, r#""001""#);
        assert!(parse_hamiltonian(&bad_bits, "toy").unwrap_err().to_string().contains("reference_bitstring"));
        let bad_label = TWO_TERMS.replace(r#""IZ""#, r#""IQ""#);
        assert!(parse_hamiltonian(&bad_label, "toy").unwrap_err().to_string().contains("terms[0]"));
        let short = TWO_TERMS.replace(r#""IZ""#, r#""Z""#);
        assert!(parse_hamiltonian(&short, "toy").is_err());
        let syntax = parse_hamiltonian("{\n\"n_qubits\": 2,,}", "toy").unwrap_err().to_string();
        assert!(syntax.contains("line 2"), "{syntax}");
    }

    #[test]
    fn reference_bit_order() {
        assert_eq!(bitstring_index("1100"), 0b0011);
        assert_eq!(bitstring_index("0001"), 0b1000);
    }

    #[test]
    fn tfim_small_cases() {
        let spec = |j: f64, h: f64| ModelSpec {
            kind: ModelKind::Tfim,
            n_qubits: 2,
            coupling: j,
            field: h,
        };
        let e = builtin_model(&spec(0.0, 1.0), true).unwrap().metadata.exact_ground_energy.unwrap();
        assert!((e + 2.0).abs() < 1e-12);
        let e = builtin_model(&spec(1.0, 0.0), true).unwrap().metadata.exact_ground_energy.unwrap();
        assert!((e + 1.0).abs() < 1e-12);
    }

    #[test]
    fn heisenberg_four_sites() {
        let spec = ModelSpec {
            kind: ModelKind::Heisenberg,
            n_qubits: 4,
            coupling: 1.0,
            field: 0.0,
        };
        let m = builtin_model(&spec, true).unwrap();
        // Open four-site chain: E = -3 - 2 sqrt(3).
        let e = m.metadata.exact_ground_energy.unwrap();
        assert!((e - (-3.0 - 2.0 * 3f64.sqrt())).abs() < 1e-10, "{e}");
        assert_eq!(m.hamiltonian.len(), 9);
    }

    #[test]
    fn model_size_cap() {
        let spec = ModelSpec {
            kind: ModelKind::Tfim,
            n_qubits: 14,
            coupling: 1.0,
            field: 1.0,
        };
        assert!(builtin_model(&spec, true).is_err());
        assert!(builtin_model(&spec, false).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let h = parse_hamiltonian(TWO_TERMS, "toy").unwrap();
        let text = h.to_json().unwrap();
        let again = parse_hamiltonian(&text, "toy").unwrap();
        assert_eq!(again, h);
        assert_eq!(again.to_json().unwrap(), text);
    }
}
