//! Pauli strings and weighted Pauli-sum operators.
//!
//! Qubit 0 is the least significant bit of a basis-state index everywhere in
//! this crate. A [`PauliString`] keeps one letter per qubit (identities are
//! stored positionally, nothing is compressed away), and a [`QubitOperator`]
//! is a map from strings to complex coefficients. Hermitian operators (the
//! molecular Hamiltonian after Jordan-Wigner) have real coefficients;
//! anti-Hermitian generators for circuit exponentials have purely imaginary
//! ones.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

/// Coefficients with magnitude below this are dropped when an operator is
/// normalized; below the double-precision noise floor of integral sums.
pub const COEFF_PRUNE_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Single-letter product `self * other`, returned as a power of i and the
    /// resulting letter: `self * other = i^phase * letter`.
    fn mul(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) => (0, p),
            (p, I) => (0, p),
            (X, X) | (Y, Y) | (Z, Z) => (0, I),
            (X, Y) => (1, Z),
            (Y, X) => (3, Z),
            (Y, Z) => (1, X),
            (Z, Y) => (3, X),
            (Z, X) => (1, Y),
            (X, Z) => (3, Y),
        }
    }
}

/// A tensor product of Pauli letters over a fixed qubit count.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        Self {
            letters: vec![Pauli::I; n_qubits],
        }
    }

    /// A string with a single non-identity letter at `qubit`.
    pub fn single(n_qubits: usize, qubit: usize, letter: Pauli) -> Self {
        assert!(qubit < n_qubits, "qubit index out of range");
        let mut letters = vec![Pauli::I; n_qubits];
        letters[qubit] = letter;
        Self { letters }
    }

    pub fn from_letters(letters: Vec<Pauli>) -> Self {
        Self { letters }
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letter(&self, qubit: usize) -> Pauli {
        self.letters[qubit]
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    pub fn set(&mut self, qubit: usize, letter: Pauli) {
        self.letters[qubit] = letter;
    }

    /// Product of two strings on the same qubit count: `self * other =
    /// phase * string`.
    pub fn mul(&self, other: &PauliString) -> (Complex64, PauliString) {
        assert_eq!(self.n_qubits(), other.n_qubits(), "qubit count mismatch");
        let mut phase_power: u8 = 0;
        let letters = self
            .letters
            .iter()
            .zip(other.letters.iter())
            .map(|(&a, &b)| {
                let (k, p) = a.mul(b);
                phase_power = (phase_power + k) % 4;
                p
            })
            .collect();
        let phase = match phase_power {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        (phase, PauliString { letters })
    }

    /// Action on a computational basis state: `P |index⟩ = phase |out⟩`.
    pub fn act_on_basis(&self, index: usize) -> (usize, Complex64) {
        let mut out = index;
        let mut phase = Complex64::new(1.0, 0.0);
        for (q, &p) in self.letters.iter().enumerate() {
            let bit = (index >> q) & 1;
            match p {
                Pauli::I => {}
                Pauli::X => out ^= 1 << q,
                Pauli::Y => {
                    out ^= 1 << q;
                    phase *= if bit == 1 {
                        Complex64::new(0.0, -1.0)
                    } else {
                        Complex64::new(0.0, 1.0)
                    };
                }
                Pauli::Z => {
                    if bit == 1 {
                        phase = -phase;
                    }
                }
            }
        }
        (out, phase)
    }

    /// Bit mask of qubits carrying X or Y (the letters that move basis states).
    pub fn flip_mask(&self) -> u64 {
        let mut mask = 0u64;
        for (q, &p) in self.letters.iter().enumerate() {
            if matches!(p, Pauli::X | Pauli::Y) {
                mask |= 1 << q;
            }
        }
        mask
    }

    /// Bit mask of qubits carrying Z.
    pub fn z_mask(&self) -> u64 {
        let mut mask = 0u64;
        for (q, &p) in self.letters.iter().enumerate() {
            if p == Pauli::Z {
                mask |= 1 << q;
            }
        }
        mask
    }

    /// Re-index the string into a wider register, letters shifted up by `offset`.
    pub fn embedded(&self, n_total: usize, offset: usize) -> PauliString {
        assert!(offset + self.n_qubits() <= n_total, "embedding out of range");
        let mut letters = vec![Pauli::I; n_total];
        letters[offset..offset + self.n_qubits()].copy_from_slice(&self.letters);
        PauliString { letters }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

/// A weighted sum of Pauli strings on a fixed qubit count.
///
/// Terms live in a `BTreeMap` so iteration order is deterministic; every
/// floating-point reduction over terms is therefore reproducible run to run.
#[derive(Clone, PartialEq, Debug)]
pub struct QubitOperator {
    n_qubits: usize,
    terms: BTreeMap<PauliString, Complex64>,
}

impl QubitOperator {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(n_qubits: usize, coeff: Complex64) -> Self {
        let mut op = Self::new(n_qubits);
        op.add_term(PauliString::identity(n_qubits), coeff);
        op
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

    /// Accumulate `coeff * string`. Tiny residuals are kept until an explicit
    /// [`prune`](Self::prune) so that repeated small contributions can still
    /// add up.
    pub fn add_term(&mut self, string: PauliString, coeff: Complex64) {
        assert_eq!(string.n_qubits(), self.n_qubits, "qubit count mismatch");
        *self.terms.entry(string).or_insert(Complex64::new(0.0, 0.0)) += coeff;
    }

    /// Drop every coefficient below the prune threshold.
    pub fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() >= COEFF_PRUNE_THRESHOLD);
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, Complex64)> {
        self.terms.iter().map(|(s, &c)| (s, c))
    }

    pub fn coefficient(&self, string: &PauliString) -> Complex64 {
        self.terms
            .get(string)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn identity_coefficient(&self) -> Complex64 {
        self.coefficient(&PauliString::identity(self.n_qubits))
    }

    /// Sum of |coefficient| over all non-identity terms.
    pub fn one_norm(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(s, _)| !s.is_identity())
            .map(|(_, c)| c.norm())
            .sum()
    }

    pub fn scaled(&self, factor: Complex64) -> QubitOperator {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= factor;
        }
        out.prune();
        out
    }

    pub fn add(&self, other: &QubitOperator) -> QubitOperator {
        assert_eq!(self.n_qubits, other.n_qubits, "qubit count mismatch");
        let mut out = self.clone();
        for (s, c) in other.terms() {
            out.add_term(s.clone(), c);
        }
        out.prune();
        out
    }

    /// Hermitian adjoint: Pauli strings are self-adjoint, so this conjugates
    /// the coefficients.
    pub fn adjoint(&self) -> QubitOperator {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.conj();
        }
        out
    }

    pub fn mul(&self, other: &QubitOperator) -> QubitOperator {
        assert_eq!(self.n_qubits, other.n_qubits, "qubit count mismatch");
        let mut out = QubitOperator::new(self.n_qubits);
        for (sa, ca) in self.terms() {
            for (sb, cb) in other.terms() {
                let (phase, s) = sa.mul(sb);
                out.add_term(s, ca * cb * phase);
            }
        }
        out.prune();
        out
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    pub fn is_anti_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.re.abs() <= tol)
    }

    /// Sorted qubit indices where any term carries an X or Y letter.
    pub fn xy_support(&self) -> Vec<usize> {
        let mut mask = 0u64;
        for (s, _) in self.terms() {
            mask |= s.flip_mask();
        }
        (0..self.n_qubits).filter(|q| mask >> q & 1 == 1).collect()
    }

    /// Re-index into a wider register with the qubits shifted up by `offset`.
    pub fn embedded(&self, n_total: usize, offset: usize) -> QubitOperator {
        let mut out = QubitOperator::new(n_total);
        for (s, c) in self.terms() {
            out.add_term(s.embedded(n_total, offset), c);
        }
        out
    }

    /// Dense matrix in the computational basis. Test and FCI oracle use only;
    /// refuses more than 12 qubits.
    pub fn dense(&self) -> nalgebra::DMatrix<Complex64> {
        assert!(self.n_qubits <= 12, "dense matrix limited to 12 qubits");
        let dim = 1usize << self.n_qubits;
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        for (s, c) in self.terms() {
            for col in 0..dim {
                let (row, phase) = s.act_on_basis(col);
                m[(row, col)] += c * phase;
            }
        }
        m
    }
}
