//! Exact statevector simulation of number-conserving circuits.
//!
//! Conventions, fixed globally:
//! - little-endian bit order: qubit 0 is the least significant bit of a
//!   basis-state index;
//! - `GivensRotation(θ)` on qubits `(p, q)` maps `|01⟩ → cosθ|01⟩ − sinθ|10⟩`
//!   and `|10⟩ → sinθ|01⟩ + cosθ|10⟩`, where `|ab⟩` means bit `p = a`,
//!   bit `q = b`; it is the identity on `|00⟩` and `|11⟩`;
//! - `GeneratorExponential(θ, G)` applies `exp(θ·G)` for an anti-Hermitian
//!   generator `G`, evaluated exactly on the subspace of qubits the generator
//!   moves (its X/Y support); pure-Z qubits only contribute parity signs and
//!   stay outside the exponentiated block.
//!
//! Gates act by direct sparse application on amplitude groups; no 2^n
//! matrices are ever built. Registers up to 25 qubits are supported.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::hamiltonian::QubitOperator;

/// Largest X/Y support a generator may have; the exponentiated block is dense
/// of dimension `2^support`.
pub const GENERATOR_SUPPORT_LIMIT: usize = 8;

pub const MAX_QUBITS: usize = 25;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    IndexOutOfRange { index: usize, n_qubits: usize },
    #[error("gate targets must be distinct")]
    DuplicateTarget,
    #[error("register size mismatch: {left} vs {right} qubits")]
    SizeMismatch { left: usize, right: usize },
    #[error("register count {0} exceeds the {MAX_QUBITS}-qubit ceiling")]
    TooManyQubits(usize),
    #[error("register layout ranges overlap or have unequal widths")]
    BadLayout,
    #[error("generator must be anti-Hermitian (purely imaginary Pauli coefficients)")]
    NotAntiHermitian,
    #[error("generator X/Y support {0} exceeds limit {GENERATOR_SUPPORT_LIMIT}")]
    GeneratorTooWide(usize),
    #[error("generator Z-chain structure too complex (more than 64 distinct masks)")]
    GeneratorTooComplex,
    #[error("expectation value requires a Hermitian operator")]
    NotHermitian,
}

/// Dense complex amplitude vector over `2^n_qubits` basis states.
///
/// The norm is 1 within 1e-10 after every gate application (checked by a
/// debug assertion); raw operator application ([`apply_operator`]) returns
/// unnormalized vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Computational basis state with 1-bits at `occupied`.
    pub fn prepare_basis(n_qubits: usize, occupied: &[usize]) -> Result<Self, SimError> {
        if n_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(n_qubits));
        }
        let mut index = 0usize;
        for &q in occupied {
            if q >= n_qubits {
                return Err(SimError::IndexOutOfRange {
                    index: q,
                    n_qubits,
                });
            }
            index |= 1 << q;
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self, SimError> {
        if amps.len() != 1 << n_qubits {
            return Err(SimError::SizeMismatch {
                left: amps.len(),
                right: 1 << n_qubits,
            });
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let inv = Complex64::new(1.0 / n, 0.0);
            for a in &mut self.amps {
                *a *= inv;
            }
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner_product(&self, other: &StateVector) -> Result<Complex64, SimError> {
        if self.n_qubits != other.n_qubits {
            return Err(SimError::SizeMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64, SimError> {
        Ok(self.inner_product(other)?.norm_sqr())
    }

    /// Apply a gate in place.
    pub fn apply(&mut self, gate: &GateOp) -> Result<(), SimError> {
        gate.validate(self.n_qubits)?;
        match gate {
            GateOp::PauliX { target } => self.apply_one_qubit(
                *target,
                [
                    Complex64::new(0.0, 0.0),
                    Complex64::new(1.0, 0.0),
                    Complex64::new(1.0, 0.0),
                    Complex64::new(0.0, 0.0),
                ],
            ),
            GateOp::Hadamard { target } => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                self.apply_one_qubit(
                    *target,
                    [
                        Complex64::new(h, 0.0),
                        Complex64::new(h, 0.0),
                        Complex64::new(h, 0.0),
                        Complex64::new(-h, 0.0),
                    ],
                )
            }
            GateOp::PhaseZ { theta, target } => {
                let phase = Complex64::new(theta.cos(), theta.sin());
                let mask = 1usize << target;
                for (idx, amp) in self.amps.iter_mut().enumerate() {
                    if idx & mask != 0 {
                        *amp *= phase;
                    }
                }
            }
            GateOp::GivensRotation { theta, p, q } => {
                self.apply_rotation_between(1 << q, 1 << p, *theta)
            }
            GateOp::PairExchange { theta, pair_p, pair_q } => {
                let mask_p = (1usize << pair_p.0) | (1 << pair_p.1);
                let mask_q = (1usize << pair_q.0) | (1 << pair_q.1);
                self.apply_rotation_between(mask_q, mask_p, *theta)
            }
            GateOp::ControlledSwap { control, a, b } => {
                let cm = 1usize << control;
                let am = 1usize << a;
                let bm = 1usize << b;
                for idx in 0..self.amps.len() {
                    // visit each swapped pair once via the (a=1, b=0) member
                    if idx & cm != 0 && idx & am != 0 && idx & bm == 0 {
                        let partner = idx ^ am ^ bm;
                        self.amps.swap(idx, partner);
                    }
                }
            }
            GateOp::GeneratorExponential { theta, generator } => {
                CompiledGenerator::new(generator)?.apply(*theta, self)?
            }
        }
        debug_assert!(
            (self.norm() - 1.0).abs() < 1e-10,
            "gate application must preserve the norm"
        );
        Ok(())
    }

    fn apply_one_qubit(&mut self, target: usize, u: [Complex64; 4]) {
        let mask = 1usize << target;
        for idx in 0..self.amps.len() {
            if idx & mask == 0 {
                let a0 = self.amps[idx];
                let a1 = self.amps[idx | mask];
                self.amps[idx] = u[0] * a0 + u[1] * a1;
                self.amps[idx | mask] = u[2] * a0 + u[3] * a1;
            }
        }
    }

    /// Plane rotation between the configurations `occupied_mask` set /
    /// `empty_mask` clear (the `|01⟩` member) and the flipped partner.
    fn apply_rotation_between(&mut self, occupied_mask: usize, empty_mask: usize, theta: f64) {
        let (sin, cos) = theta.sin_cos();
        let flip = occupied_mask | empty_mask;
        for idx in 0..self.amps.len() {
            if idx & occupied_mask == occupied_mask && idx & empty_mask == 0 {
                let partner = idx ^ flip;
                let a01 = self.amps[idx];
                let a10 = self.amps[partner];
                self.amps[idx] = Complex64::new(cos, 0.0) * a01 + Complex64::new(sin, 0.0) * a10;
                self.amps[partner] =
                    Complex64::new(-sin, 0.0) * a01 + Complex64::new(cos, 0.0) * a10;
            }
        }
    }

}

/// A generator exponential prepared for repeated application: the X/Y
/// support, the per-outer-configuration sign pattern, and one Hermitian
/// eigendecomposition per pattern. The decompositions are independent of the
/// rotation angle, so re-applying with new angles costs only two small
/// matrix products per pattern plus the amplitude sweep.
#[derive(Clone, Debug)]
pub struct CompiledGenerator {
    n_qubits: usize,
    dim: usize,
    /// full-index offset of each support configuration
    sub_offsets: Vec<usize>,
    outer_positions: Vec<usize>,
    /// pattern index for every outer configuration
    pattern_of_outer: Vec<u8>,
    /// per pattern: eigenvectors V and real eigenvalues of i·B, so that
    /// exp(θ·B) = V · diag(exp(−iθλ)) · V†
    eigens: Vec<(DMatrix<Complex64>, Vec<f64>)>,
}

impl CompiledGenerator {
    pub fn new(generator: &QubitOperator) -> Result<Self, SimError> {
        if !generator.is_anti_hermitian(1e-10) {
            return Err(SimError::NotAntiHermitian);
        }
        let n_qubits = generator.n_qubits();
        let support = generator.xy_support();
        let s = support.len();
        if s > GENERATOR_SUPPORT_LIMIT {
            return Err(SimError::GeneratorTooWide(s));
        }
        let dim = 1usize << s;
        let support_mask: u64 = support.iter().map(|&q| 1u64 << q).sum();

        // Restrict each term to the support; Z letters on outer qubits only
        // flip the term's sign depending on the outer bits.
        struct BlockTerm {
            sub_row_of_col: Vec<(usize, Complex64)>,
            outer_mask: u64,
        }
        let mut terms = Vec::with_capacity(generator.len());
        let mut distinct_masks: Vec<u64> = Vec::new();
        for (string, coeff) in generator.terms() {
            let outer_mask = string.z_mask() & !support_mask;
            if !distinct_masks.contains(&outer_mask) {
                distinct_masks.push(outer_mask);
            }
            let mut sub_letters = Vec::with_capacity(s);
            for &q in &support {
                sub_letters.push(string.letter(q));
            }
            let sub = crate::hamiltonian::PauliString::from_letters(sub_letters);
            let sub_row_of_col = (0..dim)
                .map(|col| {
                    let (row, phase) = sub.act_on_basis(col);
                    (row, coeff * phase)
                })
                .collect();
            terms.push(BlockTerm {
                sub_row_of_col,
                outer_mask,
            });
        }
        if distinct_masks.len() > 64 {
            return Err(SimError::GeneratorTooComplex);
        }

        let sub_offsets: Vec<usize> = (0..dim)
            .map(|v| {
                (0..s)
                    .filter(|&i| v >> i & 1 == 1)
                    .map(|i| 1usize << support[i])
                    .sum()
            })
            .collect();
        let outer_positions: Vec<usize> = (0..n_qubits)
            .filter(|q| support_mask >> q & 1 == 0)
            .collect();
        let n_outer = outer_positions.len();

        let mut key_to_pattern: HashMap<u64, u8> = HashMap::new();
        let mut pattern_of_outer = vec![0u8; 1 << n_outer];
        let mut pattern_bases: Vec<usize> = Vec::new();
        for outer in 0..1usize << n_outer {
            let mut base = 0usize;
            for (i, &pos) in outer_positions.iter().enumerate() {
                if outer >> i & 1 == 1 {
                    base |= 1 << pos;
                }
            }
            let mut key = 0u64;
            for (bit, mask) in distinct_masks.iter().enumerate() {
                if (base as u64 & mask).count_ones() & 1 == 1 {
                    key |= 1 << bit;
                }
            }
            let next = key_to_pattern.len() as u8;
            let pattern = *key_to_pattern.entry(key).or_insert_with(|| {
                pattern_bases.push(base);
                next
            });
            pattern_of_outer[outer] = pattern;
        }

        // one Hermitian eigendecomposition per sign pattern
        let eigens = pattern_bases
            .iter()
            .map(|&base| {
                let mut block: DMatrix<Complex64> = DMatrix::zeros(dim, dim);
                for term in &terms {
                    let sign = if (base as u64 & term.outer_mask).count_ones() & 1 == 1 {
                        -1.0
                    } else {
                        1.0
                    };
                    for (col, &(row, value)) in term.sub_row_of_col.iter().enumerate() {
                        block[(row, col)] += value * sign;
                    }
                }
                // i·B is Hermitian with real eigenvalues
                let herm = block.map(|z| z * Complex64::new(0.0, 1.0));
                let eig = nalgebra::SymmetricEigen::new(herm);
                (eig.eigenvectors, eig.eigenvalues.iter().copied().collect())
            })
            .collect();

        Ok(Self {
            n_qubits,
            dim,
            sub_offsets,
            outer_positions,
            pattern_of_outer,
            eigens,
        })
    }

    /// Apply `exp(θ·B)` in place.
    pub fn apply(&self, theta: f64, state: &mut StateVector) -> Result<(), SimError> {
        if state.n_qubits != self.n_qubits {
            return Err(SimError::SizeMismatch {
                left: state.n_qubits,
                right: self.n_qubits,
            });
        }
        let dim = self.dim;
        // exp(θB) = V diag(exp(-iθλ)) V† per pattern. Entries below 1e-15
        // are rounding residue of structural zeros (number-conserving blocks
        // cannot couple particle sectors); snapping them keeps the state's
        // zero amplitudes exactly zero so sparsity-aware sweeps stay cheap.
        let zero = Complex64::new(0.0, 0.0);
        let unitaries: Vec<DMatrix<Complex64>> = self
            .eigens
            .iter()
            .map(|(v, lambdas)| {
                let mut scaled = v.clone();
                for (col, &lambda) in lambdas.iter().enumerate() {
                    let phase = Complex64::new(0.0, -theta * lambda).exp();
                    for row in 0..dim {
                        scaled[(row, col)] *= phase;
                    }
                }
                let mut unitary = scaled * v.adjoint();
                for entry in unitary.iter_mut() {
                    if entry.norm_sqr() < 1e-30 {
                        *entry = zero;
                    }
                }
                unitary
            })
            .collect();

        let mut gathered = vec![zero; dim];
        for outer in 0..self.pattern_of_outer.len() {
            let mut base = 0usize;
            for (i, &pos) in self.outer_positions.iter().enumerate() {
                if outer >> i & 1 == 1 {
                    base |= 1 << pos;
                }
            }
            let mut occupied = false;
            for (v, slot) in gathered.iter_mut().enumerate() {
                *slot = state.amps[base | self.sub_offsets[v]];
                occupied |= *slot != zero;
            }
            if !occupied {
                continue;
            }
            let unitary = &unitaries[self.pattern_of_outer[outer] as usize];
            for (row, offset) in self.sub_offsets.iter().enumerate() {
                let mut acc = zero;
                for (col, amp) in gathered.iter().enumerate() {
                    if amp != &zero {
                        acc += unitary[(row, col)] * amp;
                    }
                }
                state.amps[base | offset] = acc;
            }
        }
        debug_assert!(
            (state.norm() - 1.0).abs() < 1e-10,
            "generator exponential must preserve the norm"
        );
        Ok(())
    }
}

/// Matrix exponential by scaling and squaring with a Taylor series; intended
/// for the small dense blocks of [`GateOp::GeneratorExponential`].
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let dim = a.nrows();
    // 1-norm (max column absolute sum) bounds the series argument
    let norm = (0..dim)
        .map(|col| (0..dim).map(|row| a[(row, col)].norm()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = Complex64::new(0.5f64.powi(squarings as i32), 0.0);
    let scaled = a * scale;
    let mut sum: DMatrix<Complex64> = DMatrix::identity(dim, dim);
    let mut term: DMatrix<Complex64> = DMatrix::identity(dim, dim);
    for k in 1..=40 {
        term = (&term * &scaled) / Complex64::new(k as f64, 0.0);
        sum += &term;
        if term.norm() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// A single gate operation. All variants are norm-preserving; the
/// number-conserving ones (Givens, pair exchange, number-conserving
/// generators) leave Hamming-weight sectors invariant.
#[derive(Clone, Debug)]
pub enum GateOp {
    PauliX { target: usize },
    Hadamard { target: usize },
    PhaseZ { theta: f64, target: usize },
    GivensRotation { theta: f64, p: usize, q: usize },
    /// Rotation moving a fermion pair between the qubit pairs `pair_p` and
    /// `pair_q`, acting only where one pair is full and the other empty.
    PairExchange {
        theta: f64,
        pair_p: (usize, usize),
        pair_q: (usize, usize),
    },
    ControlledSwap { control: usize, a: usize, b: usize },
    /// `exp(θ·G)` for an anti-Hermitian generator `G`.
    GeneratorExponential { theta: f64, generator: Arc<QubitOperator> },
}

impl GateOp {
    pub fn targets(&self) -> Vec<usize> {
        match self {
            GateOp::PauliX { target }
            | GateOp::Hadamard { target }
            | GateOp::PhaseZ { target, .. } => vec![*target],
            GateOp::GivensRotation { p, q, .. } => vec![*p, *q],
            GateOp::PairExchange { pair_p, pair_q, .. } => {
                vec![pair_p.0, pair_p.1, pair_q.0, pair_q.1]
            }
            GateOp::ControlledSwap { control, a, b } => vec![*control, *a, *b],
            GateOp::GeneratorExponential { generator, .. } => generator.xy_support(),
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<(), SimError> {
        let targets = self.targets();
        for &t in &targets {
            if t >= n_qubits {
                return Err(SimError::IndexOutOfRange {
                    index: t,
                    n_qubits,
                });
            }
        }
        for (i, &a) in targets.iter().enumerate() {
            if targets[i + 1..].contains(&a) {
                return Err(SimError::DuplicateTarget);
            }
        }
        if let GateOp::GeneratorExponential { generator, .. } = self {
            if generator.n_qubits() != n_qubits {
                return Err(SimError::SizeMismatch {
                    left: generator.n_qubits(),
                    right: n_qubits,
                });
            }
            if !generator.is_anti_hermitian(1e-10) {
                return Err(SimError::NotAntiHermitian);
            }
            let s = generator.xy_support().len();
            if s > GENERATOR_SUPPORT_LIMIT {
                return Err(SimError::GeneratorTooWide(s));
            }
        }
        Ok(())
    }

    /// The inverse gate: negated angle for rotations, self-inverse otherwise.
    pub fn inverse(&self) -> GateOp {
        match self {
            GateOp::PauliX { .. } | GateOp::Hadamard { .. } | GateOp::ControlledSwap { .. } => {
                self.clone()
            }
            GateOp::PhaseZ { theta, target } => GateOp::PhaseZ {
                theta: -theta,
                target: *target,
            },
            GateOp::GivensRotation { theta, p, q } => GateOp::GivensRotation {
                theta: -theta,
                p: *p,
                q: *q,
            },
            GateOp::PairExchange { theta, pair_p, pair_q } => GateOp::PairExchange {
                theta: -theta,
                pair_p: *pair_p,
                pair_q: *pair_q,
            },
            GateOp::GeneratorExponential { theta, generator } => GateOp::GeneratorExponential {
                theta: -theta,
                generator: generator.clone(),
            },
        }
    }

    /// Re-index the gate into a wider register with targets shifted by
    /// `offset`.
    pub fn shifted(&self, offset: usize, n_total: usize) -> GateOp {
        match self {
            GateOp::PauliX { target } => GateOp::PauliX {
                target: target + offset,
            },
            GateOp::Hadamard { target } => GateOp::Hadamard {
                target: target + offset,
            },
            GateOp::PhaseZ { theta, target } => GateOp::PhaseZ {
                theta: *theta,
                target: target + offset,
            },
            GateOp::GivensRotation { theta, p, q } => GateOp::GivensRotation {
                theta: *theta,
                p: p + offset,
                q: q + offset,
            },
            GateOp::PairExchange { theta, pair_p, pair_q } => GateOp::PairExchange {
                theta: *theta,
                pair_p: (pair_p.0 + offset, pair_p.1 + offset),
                pair_q: (pair_q.0 + offset, pair_q.1 + offset),
            },
            GateOp::ControlledSwap { control, a, b } => GateOp::ControlledSwap {
                control: control + offset,
                a: a + offset,
                b: b + offset,
            },
            GateOp::GeneratorExponential { theta, generator } => GateOp::GeneratorExponential {
                theta: *theta,
                generator: Arc::new(generator.embedded(n_total, offset)),
            },
        }
    }
}

/// Placement of the doubled-register layout: two equal-width system registers
/// and one ancilla qubit, pairwise disjoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    pub system1: Range<usize>,
    pub system2: Range<usize>,
    pub ancilla: usize,
}

impl RegisterLayout {
    /// The standard layout: system 1 on `0..n`, system 2 on `n..2n`, ancilla
    /// as the top qubit.
    pub fn doubled(n_system: usize) -> Self {
        Self {
            system1: 0..n_system,
            system2: n_system..2 * n_system,
            ancilla: 2 * n_system,
        }
    }

    pub fn total_qubits(&self) -> usize {
        self.system1
            .end
            .max(self.system2.end)
            .max(self.ancilla + 1)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.system1.len() != self.system2.len() || self.system1.is_empty() {
            return Err(SimError::BadLayout);
        }
        let overlap = self.system1.start < self.system2.end && self.system2.start < self.system1.end;
        let anc_inside = self.system1.contains(&self.ancilla) || self.system2.contains(&self.ancilla);
        if overlap || anc_inside {
            return Err(SimError::BadLayout);
        }
        Ok(())
    }

    pub fn system2_bit_mask(&self) -> usize {
        self.system2.clone().map(|q| 1usize << q).sum()
    }
}

/// Embed a system state into the doubled-register layout as a product state:
/// the state on system 1, vacuum on system 2, `|0⟩` on the ancilla.
pub fn tensor_embed(state: &StateVector, layout: &RegisterLayout) -> Result<StateVector, SimError> {
    layout.validate()?;
    if state.n_qubits() != layout.system1.len() {
        return Err(SimError::SizeMismatch {
            left: state.n_qubits(),
            right: layout.system1.len(),
        });
    }
    let total = layout.total_qubits();
    if total > MAX_QUBITS {
        return Err(SimError::TooManyQubits(total));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << total];
    for (idx, &amp) in state.amplitudes().iter().enumerate() {
        let mut target = 0usize;
        for bit in 0..state.n_qubits() {
            if idx >> bit & 1 == 1 {
                target |= 1 << (layout.system1.start + bit);
            }
        }
        amps[target] = amp;
    }
    StateVector::from_amplitudes(total, amps)
}

struct CompiledTerm {
    flip: u64,
    sign_mask: u64,
    base: Complex64,
}

fn compile_terms(op: &QubitOperator) -> Vec<CompiledTerm> {
    op.terms()
        .map(|(string, coeff)| {
            let flip = string.flip_mask();
            let mut y_count = 0u32;
            let mut y_mask = 0u64;
            let mut z_mask = string.z_mask();
            for (q, &letter) in string.letters().iter().enumerate() {
                if letter == crate::hamiltonian::Pauli::Y {
                    y_count += 1;
                    y_mask |= 1 << q;
                }
            }
            z_mask |= y_mask;
            let i_power = match y_count % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            };
            CompiledTerm {
                flip,
                sign_mask: z_mask,
                base: coeff * i_power,
            }
        })
        .collect()
}

/// `op |ψ⟩` as a raw (generally unnormalized) vector.
///
/// Number-conserving circuits leave most amplitudes exactly zero, so the
/// sweep runs over the nonzero support only.
pub fn apply_operator(state: &StateVector, op: &QubitOperator) -> Result<StateVector, SimError> {
    if op.n_qubits() != state.n_qubits() {
        return Err(SimError::SizeMismatch {
            left: op.n_qubits(),
            right: state.n_qubits(),
        });
    }
    let terms = compile_terms(op);
    let zero = Complex64::new(0.0, 0.0);
    let support: Vec<(usize, Complex64)> = state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, &amp)| amp != zero)
        .map(|(idx, &amp)| (idx, amp))
        .collect();
    let mut out = vec![zero; state.amplitudes().len()];
    for term in &terms {
        let flip = term.flip as usize;
        for &(idx, amp) in &support {
            let sign = if (idx as u64 & term.sign_mask).count_ones() & 1 == 1 {
                -1.0
            } else {
                1.0
            };
            out[idx ^ flip] += term.base * sign * amp;
        }
    }
    StateVector::from_amplitudes(state.n_qubits(), out)
}

/// Real expectation value `⟨ψ|op|ψ⟩` of a Hermitian operator.
pub fn expectation(state: &StateVector, op: &QubitOperator) -> Result<f64, SimError> {
    if !op.is_hermitian(1e-10) {
        return Err(SimError::NotHermitian);
    }
    let applied = apply_operator(state, op)?;
    let value = state.inner_product(&applied)?;
    assert!(
        value.im.abs() < 1e-10,
        "Hermitian expectation must be real, got imaginary part {}",
        value.im
    );
    Ok(value.re)
}
