//! k-UpCCGSD circuits: k repeated blocks of generalized paired-double and
//! spin-summed single excitation exponentials acting on a Hartree-Fock
//! reference, one Trotter step per block.
//!
//! Amplitudes are indexed by unordered spatial pairs `p < q` and applied in a
//! fixed order (per block: all paired doubles, then all singles, each
//! lexicographic in `(p, q)`), which makes the circuit a deterministic
//! function of the parameter vector.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::hamiltonian::{alpha_qubit, beta_qubit, ladder_product, QubitOperator};
use crate::simulator::{CompiledGenerator, GateOp, SimError, StateVector};

#[derive(Debug, Error)]
pub enum AnsatzError {
    #[error("occupation exceeds orbital count: {n_electrons} electrons of one spin in {n_spatial} orbitals")]
    OverOccupied {
        n_electrons: usize,
        n_spatial: usize,
    },
    #[error("parameter vector length {got} does not match k={k}, n_spatial={n_spatial} (expected {expected})")]
    BadParameterLength {
        got: usize,
        expected: usize,
        k: usize,
        n_spatial: usize,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Ordered spatial-orbital pairs `(p, q)` with `p < q`, lexicographic.
pub fn orbital_pairs(n_spatial: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n_spatial * (n_spatial - 1) / 2);
    for p in 0..n_spatial {
        for q in p + 1..n_spatial {
            pairs.push((p, q));
        }
    }
    pairs
}

/// The amplitude vector of one k-UpCCGSD state: per block, one paired-double
/// and one spin-summed single amplitude for every unordered orbital pair.
#[derive(Clone, Debug, PartialEq)]
pub struct KUpCCGSDParameters {
    k: usize,
    n_spatial: usize,
    /// block-major storage: for each block, doubles then singles,
    /// each lexicographic in (p, q)
    values: Vec<f64>,
}

impl KUpCCGSDParameters {
    pub fn parameter_count(k: usize, n_spatial: usize) -> usize {
        k * 2 * (n_spatial * (n_spatial - 1) / 2)
    }

    pub fn zeros(k: usize, n_spatial: usize) -> Self {
        Self {
            k,
            n_spatial,
            values: vec![0.0; Self::parameter_count(k, n_spatial)],
        }
    }

    /// Amplitudes drawn from N(0, std_dev²), the random initialization used
    /// when a new state joins the subspace.
    pub fn random<R: Rng>(k: usize, n_spatial: usize, std_dev: f64, rng: &mut R) -> Self {
        let values = (0..Self::parameter_count(k, n_spatial))
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                std_dev * z
            })
            .collect();
        Self { k, n_spatial, values }
    }

    pub fn from_flat(k: usize, n_spatial: usize, values: &[f64]) -> Result<Self, AnsatzError> {
        let expected = Self::parameter_count(k, n_spatial);
        if values.len() != expected {
            return Err(AnsatzError::BadParameterLength {
                got: values.len(),
                expected,
                k,
                n_spatial,
            });
        }
        Ok(Self {
            k,
            n_spatial,
            values: values.to_vec(),
        })
    }

    /// Flat view in the serialization order (block-major, doubles then
    /// singles, lexicographic pairs).
    pub fn flatten(&self) -> &[f64] {
        &self.values
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    fn n_pairs(&self) -> usize {
        self.n_spatial * (self.n_spatial - 1) / 2
    }

    pub fn double(&self, block: usize, pair: usize) -> f64 {
        self.values[block * 2 * self.n_pairs() + pair]
    }

    pub fn single(&self, block: usize, pair: usize) -> f64 {
        self.values[block * 2 * self.n_pairs() + self.n_pairs() + pair]
    }
}

/// Gate sequence preparing one ansatz state from a basis-state reference.
#[derive(Clone, Debug)]
pub struct AnsatzCircuit {
    pub n_qubits: usize,
    pub gates: Vec<GateOp>,
}

impl AnsatzCircuit {
    pub fn identity(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn apply_to(&self, state: &mut StateVector) -> Result<(), SimError> {
        for gate in &self.gates {
            state.apply(gate)?;
        }
        Ok(())
    }
}

/// Aufbau-filled Hartree-Fock occupation in the interleaved layout: the
/// lowest `n_alpha` even qubits and lowest `n_beta` odd qubits.
pub fn hf_reference(
    n_spatial: usize,
    n_alpha: usize,
    n_beta: usize,
) -> Result<Vec<usize>, AnsatzError> {
    if n_alpha > n_spatial || n_beta > n_spatial {
        return Err(AnsatzError::OverOccupied {
            n_electrons: n_alpha.max(n_beta),
            n_spatial,
        });
    }
    let mut occ: Vec<usize> = (0..n_alpha).map(alpha_qubit).collect();
    occ.extend((0..n_beta).map(beta_qubit));
    occ.sort_unstable();
    Ok(occ)
}

/// Anti-Hermitian generator moving an alpha-beta pair from spatial orbital
/// `p` to `q`: `a†_{qα} a†_{qβ} a_{pβ} a_{pα} − h.c.` at unit amplitude.
pub fn paired_double_generator(n_spatial: usize, p: usize, q: usize) -> QubitOperator {
    let n_qubits = 2 * n_spatial;
    let forward = ladder_product(
        n_qubits,
        &[
            (alpha_qubit(q), true),
            (beta_qubit(q), true),
            (beta_qubit(p), false),
            (alpha_qubit(p), false),
        ],
    );
    let mut generator = forward.add(&forward.adjoint().scaled(Complex64::new(-1.0, 0.0)));
    generator.prune();
    generator
}

/// Anti-Hermitian spin-summed single-excitation generator
/// `a†_{qα} a_{pα} + a†_{qβ} a_{pβ} − h.c.` at unit amplitude.
pub fn single_excitation_generator(n_spatial: usize, p: usize, q: usize) -> QubitOperator {
    let n_qubits = 2 * n_spatial;
    let forward = ladder_product(n_qubits, &[(alpha_qubit(q), true), (alpha_qubit(p), false)])
        .add(&ladder_product(
            n_qubits,
            &[(beta_qubit(q), true), (beta_qubit(p), false)],
        ));
    let mut generator = forward.add(&forward.adjoint().scaled(Complex64::new(-1.0, 0.0)));
    generator.prune();
    generator
}

/// The fixed gate structure of a `(k, n_spatial)` ansatz with the unit
/// generators built once; binding a parameter vector only sets the angles.
/// Reusing a template across many preparations (optimizer evaluations, Monte
/// Carlo batches) skips the repeated generator construction.
#[derive(Clone, Debug)]
pub struct AnsatzTemplate {
    k: usize,
    n_spatial: usize,
    /// Unit generators in gate order: per block, doubles then singles.
    generators: Vec<Arc<QubitOperator>>,
    /// Angle-independent compiled form of each generator.
    plans: Vec<CompiledGenerator>,
}

impl AnsatzTemplate {
    pub fn new(k: usize, n_spatial: usize) -> Self {
        let pairs = orbital_pairs(n_spatial);
        let mut generators = Vec::with_capacity(k * 2 * pairs.len());
        for _ in 0..k {
            for &(p, q) in &pairs {
                generators.push(Arc::new(paired_double_generator(n_spatial, p, q)));
            }
            for &(p, q) in &pairs {
                generators.push(Arc::new(single_excitation_generator(n_spatial, p, q)));
            }
        }
        let plans = generators
            .iter()
            .map(|g| CompiledGenerator::new(g).expect("ansatz generators are valid"))
            .collect();
        Self {
            k,
            n_spatial,
            generators,
            plans,
        }
    }

    fn angle(&self, params: &KUpCCGSDParameters, slot: usize) -> f64 {
        let n_pairs = self.n_spatial * (self.n_spatial - 1) / 2;
        let block = slot / (2 * n_pairs);
        let offset = slot % (2 * n_pairs);
        if offset < n_pairs {
            params.double(block, offset)
        } else {
            params.single(block, offset - n_pairs)
        }
    }

    pub fn compile(&self, params: &KUpCCGSDParameters) -> AnsatzCircuit {
        assert_eq!(params.k(), self.k, "block count mismatch");
        assert_eq!(params.n_spatial(), self.n_spatial, "orbital count mismatch");
        let gates = self
            .generators
            .iter()
            .enumerate()
            .map(|(slot, generator)| GateOp::GeneratorExponential {
                theta: self.angle(params, slot),
                generator: Arc::clone(generator),
            })
            .collect();
        AnsatzCircuit {
            n_qubits: 2 * self.n_spatial,
            gates,
        }
    }

    /// Prepare the state through the precompiled plans; numerically identical
    /// to compiling and applying gate by gate.
    pub fn prepare(
        &self,
        params: &KUpCCGSDParameters,
        reference: &[usize],
    ) -> Result<StateVector, AnsatzError> {
        assert_eq!(params.k(), self.k, "block count mismatch");
        assert_eq!(params.n_spatial(), self.n_spatial, "orbital count mismatch");
        let mut state = StateVector::prepare_basis(2 * self.n_spatial, reference)?;
        for (slot, plan) in self.plans.iter().enumerate() {
            plan.apply(self.angle(params, slot), &mut state)?;
        }
        Ok(state)
    }
}

/// Compile the parameter vector into its gate sequence. Exactly
/// `k · 2 · C(n_spatial, 2)` generator exponentials are emitted, zero-angle
/// gates included, so the circuit shape depends only on `(k, n_spatial)`.
pub fn compile(params: &KUpCCGSDParameters) -> AnsatzCircuit {
    AnsatzTemplate::new(params.k(), params.n_spatial()).compile(params)
}

/// Prepare the ansatz state: compile and run on the basis-state reference.
pub fn prepare(
    params: &KUpCCGSDParameters,
    reference: &[usize],
) -> Result<StateVector, AnsatzError> {
    let circuit = compile(params);
    let mut state = StateVector::prepare_basis(circuit.n_qubits, reference)?;
    circuit.apply_to(&mut state)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{number_operator, sz_operator};
    use crate::simulator::expectation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn hf_reference_examples() {
        assert_eq!(hf_reference(4, 2, 2).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(hf_reference(6, 3, 3).unwrap(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(hf_reference(1, 1, 0).unwrap(), vec![0]);
        assert!(hf_reference(2, 3, 0).is_err());
    }

    #[test]
    fn parameter_count_and_round_trip() {
        let params = KUpCCGSDParameters::zeros(3, 4);
        assert_eq!(params.flatten().len(), 3 * 2 * 6);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let random = KUpCCGSDParameters::random(2, 3, 0.1, &mut rng);
        let rebuilt =
            KUpCCGSDParameters::from_flat(2, 3, random.flatten()).unwrap();
        assert_eq!(random, rebuilt);
        assert!(KUpCCGSDParameters::from_flat(2, 3, &[0.0]).is_err());
    }

    #[test]
    fn gate_count_is_exact() {
        for (k, n) in [(1, 2), (2, 4), (3, 3)] {
            let circuit = compile(&KUpCCGSDParameters::zeros(k, n));
            assert_eq!(circuit.gates.len(), k * 2 * (n * (n - 1) / 2));
        }
    }

    #[test]
    fn zero_parameters_act_as_identity() {
        let reference = hf_reference(3, 2, 1).unwrap();
        let state = prepare(&KUpCCGSDParameters::zeros(2, 3), &reference).unwrap();
        let hf = StateVector::prepare_basis(6, &reference).unwrap();
        assert!(state.fidelity(&hf).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn single_pair_system_has_two_gates() {
        let circuit = compile(&KUpCCGSDParameters::zeros(1, 2));
        assert_eq!(circuit.gates.len(), 2);
    }

    #[test]
    fn generators_are_anti_hermitian_and_number_conserving() {
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            for generator in [
                paired_double_generator(3, p, q),
                single_excitation_generator(3, p, q),
            ] {
                assert!(generator.is_anti_hermitian(1e-12));
                let dense = generator.dense();
                let n_dense = number_operator(6).dense();
                assert!((&dense * &n_dense - &n_dense * &dense).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn paired_double_generator_is_four_local() {
        // interleaved spin-orbital layout keeps pair hops free of Z chains
        let generator = paired_double_generator(4, 0, 3);
        assert_eq!(generator.xy_support(), vec![0, 1, 6, 7]);
        for (string, _) in generator.terms() {
            assert_eq!(string.z_mask() & !string.flip_mask(), 0);
        }
    }

    #[test]
    fn number_and_sz_conserved_for_random_parameters() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for trial in 0..1000 {
            let n_spatial = 2 + trial % 3; // 2..=4
            let n_alpha = 1 + trial % 2;
            let n_beta = 1;
            let reference = hf_reference(n_spatial, n_alpha, n_beta).unwrap();
            let params = KUpCCGSDParameters::random(1, n_spatial, 0.5, &mut rng);
            let state = prepare(&params, &reference).unwrap();
            let n_qubits = 2 * n_spatial;
            let n_value = expectation(&state, &number_operator(n_qubits)).unwrap();
            let sz_value = expectation(&state, &sz_operator(n_qubits)).unwrap();
            assert!((n_value - (n_alpha + n_beta) as f64).abs() < 1e-10, "trial {trial}");
            let sz_expected = (n_alpha as f64 - n_beta as f64) / 2.0;
            assert!((sz_value - sz_expected).abs() < 1e-10, "trial {trial}");
        }
    }

    #[test]
    fn reversed_circuit_returns_reference() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..10 {
            let reference = hf_reference(3, 2, 2).unwrap();
            let params = KUpCCGSDParameters::random(2, 3, 0.8, &mut rng);
            let circuit = compile(&params);
            let mut state = StateVector::prepare_basis(6, &reference).unwrap();
            circuit.apply_to(&mut state).unwrap();
            for gate in circuit.gates.iter().rev() {
                state.apply(&gate.inverse()).unwrap();
            }
            let hf = StateVector::prepare_basis(6, &reference).unwrap();
            assert!(state.fidelity(&hf).unwrap() > 1.0 - 1e-10);
        }
    }

    #[test]
    fn amplitudes_stay_real_for_real_parameters() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..50 {
            let params = KUpCCGSDParameters::random(2, 3, 1.0, &mut rng);
            let state = prepare(&params, &hf_reference(3, 2, 1).unwrap()).unwrap();
            for amp in state.amplitudes() {
                assert!(amp.im.abs() < 1e-10);
            }
        }
    }
}
