//! Pauli strings, sparse Pauli sums and the Jordan-Wigner ladder map.
//!
//! A [`PauliString`] on `n` qubits is stored as an X-support mask and a
//! Z-support mask; a site with both bits set carries `Y`. Qubit 0 is the
//! least-significant bit of both masks and of every basis-state index used by
//! the simulator. In text form site 0 is written leftmost, so `"XYIZ"` has `X`
//! on qubit 0 and `Z` on qubit 3.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register the bit-mask encoding can hold.
pub const MAX_PAULI_QUBITS: usize = 64;

/// Default magnitude below which coefficients are dropped from a [`PauliSum`].
pub const DEFAULT_PRUNE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// `i^k` for `k` taken mod 4.
pub(crate) fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// A tensor product of single-qubit Paulis, without a phase.
///
/// Field order gives the canonical ordering: lexicographic on
/// `(x_mask, z_mask)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    x: u64,
    z: u64,
    n_qubits: usize,
}

fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_PAULI_QUBITS {
        return Err(Error::InvalidPauli(format!(
            "register of {n_qubits} qubits (must be 1..={MAX_PAULI_QUBITS})"
        )));
    }
    Ok(())
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        Ok(Self { x: 0, z: 0, n_qubits })
    }

    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Result<Self> {
        check_register(n_qubits)?;
        let m = low_mask(n_qubits);
        if x & !m != 0 || z & !m != 0 {
            return Err(Error::InvalidPauli(format!(
                "masks ({x:#x}, {z:#x}) exceed {n_qubits} qubits"
            )));
        }
        Ok(Self { x, z, n_qubits })
    }

    /// Builds a string from `(site, letter)` pairs; unspecified sites are `I`.
    pub fn from_sites(n_qubits: usize, sites: &[(usize, Pauli)]) -> Result<Self> {
        let mut s = Self::identity(n_qubits)?;
        for &(site, p) in sites {
            if site >= n_qubits {
                return Err(Error::IndexOutOfRange { index: site, len: n_qubits });
            }
            s.set(site, p);
        }
        Ok(s)
    }

    fn set(&mut self, site: usize, p: Pauli) {
        let bit = 1u64 << site;
        let (xb, zb) = p.bits();
        self.x = if xb { self.x | bit } else { self.x & !bit };
        self.z = if zb { self.z | bit } else { self.z & !bit };
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> u32 {
        self.support().count_ones()
    }

    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn letter(&self, site: usize) -> Pauli {
        let bit = 1u64 << site;
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    /// True iff the two strings commute: the number of sites where both act
    /// non-trivially with different letters is even.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Operator product `self * other` as `(phase, string)`.
    pub fn multiply(&self, other: &PauliString) -> Result<(Complex64, PauliString)> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(self.multiply_unchecked(other))
    }

    pub(crate) fn multiply_unchecked(&self, other: &PauliString) -> (Complex64, PauliString) {
        // Each string is i^{#Y} X^x Z^z; moving Z^{z_a} past X^{x_b} costs (-1)^{|z_a & x_b|}.
        let product = PauliString {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            n_qubits: self.n_qubits,
        };
        let k = self.y_count() + other.y_count() + 2 * (self.z & other.x).count_ones() + 4
            - product.y_count() % 4;
        (i_pow(k), product)
    }

    /// Action on a computational basis state: `P|b> = phase |b'>`.
    #[inline]
    pub fn apply_to_basis(&self, b: usize) -> (Complex64, usize) {
        let sign = ((b as u64) & self.z).count_ones() % 2;
        (i_pow(self.y_count() + 2 * sign), b ^ self.x as usize)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for site in 0..self.n_qubits {
            write!(f, "{}", self.letter(site).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        let mut out = Self::identity(n).map_err(|_| Error::InvalidPauli(s.to_string()))?;
        for (site, c) in s.chars().enumerate() {
            let p = match c {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                _ => return Err(Error::InvalidPauli(s.to_string())),
            };
            out.set(site, p);
        }
        Ok(out)
    }
}

/// Sparse linear combination of Pauli strings with complex coefficients.
///
/// Terms are kept in canonical order and coefficients smaller than the prune
/// tolerance are never stored, so structural equality is operator equality.
#[derive(Clone, Debug)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<PauliString, Complex64>,
    tolerance: f64,
}

impl PartialEq for PauliSum {
    fn eq(&self, other: &Self) -> bool {
        self.n_qubits == other.n_qubits && self.terms == other.terms
    }
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        Ok(Self {
            n_qubits,
            terms: BTreeMap::new(),
            tolerance: DEFAULT_PRUNE_TOLERANCE,
        })
    }

    pub fn from_string(p: PauliString, coeff: Complex64) -> Self {
        let mut s = Self {
            n_qubits: p.n_qubits,
            terms: BTreeMap::new(),
            tolerance: DEFAULT_PRUNE_TOLERANCE,
        };
        s.accumulate(p, coeff);
        s
    }

    pub fn from_terms<I>(n_qubits: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, Complex64)>,
    {
        let mut s = Self::zero(n_qubits)?;
        for (p, c) in terms {
            s.add_term(p, c)?;
        }
        Ok(s)
    }

    /// Parses `(text, coefficient)` pairs, e.g. `[("XZ", c)]`.
    pub fn from_labels(terms: &[(&str, Complex64)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidPauli("empty term list".into()))?;
        let n = first.0.len();
        let mut s = Self::zero(n)?;
        for (label, c) in terms {
            s.add_term(label.parse()?, *c)?;
        }
        Ok(s)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.prune();
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, p: &PauliString) -> Complex64 {
        self.terms.get(p).copied().unwrap_or_default()
    }

    pub fn add_term(&mut self, p: PauliString, coeff: Complex64) -> Result<()> {
        if p.n_qubits != self.n_qubits {
            return Err(Error::QubitMismatch {
                left: self.n_qubits,
                right: p.n_qubits,
            });
        }
        self.accumulate(p, coeff);
        Ok(())
    }

    fn accumulate(&mut self, p: PauliString, coeff: Complex64) {
        let entry = self.terms.entry(p).or_default();
        *entry += coeff;
        if entry.norm() < self.tolerance {
            self.terms.remove(&p);
        }
    }

    fn prune(&mut self) {
        let tol = self.tolerance;
        self.terms.retain(|_, c| c.norm() >= tol);
    }

    fn check_same(&self, other: &PauliSum) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.accumulate(*p, *c);
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> PauliSum {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|c| *c *= factor);
        out.prune();
        out
    }

    pub fn mul(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_same(other)?;
        let mut acc: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let (phase, p) = a.multiply_unchecked(b);
                *acc.entry(p).or_default() += phase * ca * cb;
            }
        }
        let mut out = PauliSum {
            n_qubits: self.n_qubits,
            terms: acc,
            tolerance: self.tolerance,
        };
        out.prune();
        Ok(out)
    }

    /// `[self, other] = self*other - other*self`.
    ///
    /// Only anticommuting term pairs contribute, each with twice the product.
    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_same(other)?;
        let mut acc: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                if a.commutes_with(b) {
                    continue;
                }
                let (phase, p) = a.multiply_unchecked(b);
                *acc.entry(p).or_default() += 2.0 * phase * ca * cb;
            }
        }
        let mut out = PauliSum {
            n_qubits: self.n_qubits,
            terms: acc,
            tolerance: self.tolerance,
        };
        out.prune();
        Ok(out)
    }

    pub fn adjoint(&self) -> PauliSum {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|c| *c = c.conj());
        out
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_real(&self) -> f64 {
        self.terms.values().map(|c| c.re.abs()).fold(0.0, f64::max)
    }

    /// All coefficients real within the prune tolerance.
    pub fn is_hermitian(&self) -> bool {
        self.max_abs_imag() <= self.tolerance
    }

    /// All coefficients purely imaginary within the prune tolerance.
    pub fn is_anti_hermitian(&self) -> bool {
        self.max_abs_real() <= self.tolerance
    }

    /// True when every pair of terms commutes.
    pub fn terms_commute(&self) -> bool {
        let strings: Vec<_> = self.terms.keys().collect();
        strings
            .iter()
            .enumerate()
            .all(|(i, a)| strings[i + 1..].iter().all(|b| a.commutes_with(b)))
    }

    /// Union of all term supports as a qubit mask.
    pub fn support(&self) -> u64 {
        self.terms.keys().fold(0, |m, p| m | p.support())
    }

    /// Total particle number `sum_i (I - Z_i)/2`.
    pub fn number_operator(n_qubits: usize) -> Result<PauliSum> {
        let mut s = PauliSum::zero(n_qubits)?;
        for i in 0..n_qubits {
            s.add_term(PauliString::identity(n_qubits)?, Complex64::new(0.5, 0.0))?;
            s.add_term(
                PauliString::from_sites(n_qubits, &[(i, Pauli::Z)])?,
                Complex64::new(-0.5, 0.0),
            )?;
        }
        Ok(s)
    }

    /// Total `S_z` with even qubits spin-up and odd qubits spin-down:
    /// `sum_i s_i (I - Z_i)/4` with `s_i = +1` (even) or `-1` (odd).
    pub fn spin_z_operator(n_qubits: usize) -> Result<PauliSum> {
        let mut s = PauliSum::zero(n_qubits)?;
        for i in 0..n_qubits {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            s.add_term(PauliString::identity(n_qubits)?, Complex64::new(0.25 * sign, 0.0))?;
            s.add_term(
                PauliString::from_sites(n_qubits, &[(i, Pauli::Z)])?,
                Complex64::new(-0.25 * sign, 0.0),
            )?;
        }
        Ok(s)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (p, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i) {}", c.re, c.im, p)?;
        }
        Ok(())
    }
}

/// Jordan-Wigner image of a fermionic ladder operator:
/// `1/2 Z_0..Z_{index-1} (X_index -/+ i Y_index)`, minus for creation.
pub fn jordan_wigner_ladder(index: usize, creation: bool, n_qubits: usize) -> Result<PauliSum> {
    check_register(n_qubits)?;
    if index >= n_qubits {
        return Err(Error::IndexOutOfRange { index, len: n_qubits });
    }
    let parity: Vec<(usize, Pauli)> = (0..index).map(|k| (k, Pauli::Z)).collect();
    let mut x_sites = parity.clone();
    x_sites.push((index, Pauli::X));
    let mut y_sites = parity;
    y_sites.push((index, Pauli::Y));
    let y_sign = if creation { -1.0 } else { 1.0 };
    PauliSum::from_terms(
        n_qubits,
        [
            (PauliString::from_sites(n_qubits, &x_sites)?, Complex64::new(0.5, 0.0)),
            (
                PauliString::from_sites(n_qubits, &y_sites)?,
                Complex64::new(0.0, 0.5 * y_sign),
            ),
        ],
    )
}
