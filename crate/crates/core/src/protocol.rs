//! Measurement of Hamiltonian and overlap matrix elements between circuit
//! states, and the Gaussian shot-noise model used by the experiments.
//!
//! Off-diagonal elements are not observables; they are read out through a
//! Hadamard test on `|+_ij⟩ = (|φ_i⟩|0⟩ + |φ_j⟩|1⟩)/√2`. That state is built
//! without controlled ansatz circuits: adjoin a vacuum register, controlled-
//! SWAP the two system registers on the ancilla, run both circuits
//! uncontrolled, controlled-SWAP back, and verify the second register has
//! returned to the vacuum. The construction requires the circuits to conserve
//! particle number and the reference to hold at least one particle.
//!
//! Shot noise is modeled at the matrix-element level: one Gaussian estimator
//! per element with intrinsic sigma taken from the worst-case Hamiltonian
//! averaging bound (the coefficient 1-norm) and 1 for overlaps.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::ansatz::AnsatzCircuit;
use crate::hamiltonian::QubitOperator;
#[cfg(test)]
use crate::hamiltonian::Pauli;
use crate::simulator::{
    apply_operator, tensor_embed, GateOp, RegisterLayout, SimError, StateVector,
};

/// Branch probabilities below this are treated as an empty measurement branch.
const EMPTY_BRANCH_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("reference state must hold at least one particle")]
    VacuumReference,
    #[error("circuit register sizes differ: {left} vs {right}")]
    CircuitSizeMismatch { left: usize, right: usize },
    #[error(
        "ancilla register failed to disentangle (vacuum fidelity deficit {leak:.3e}); \
         a circuit does not conserve particle number"
    )]
    DisentanglementFailed { leak: f64 },
    #[error("estimate requires at least one shot")]
    ZeroShots,
    #[error("cannot pool estimates with different intrinsic sigmas ({left} vs {right})")]
    SigmaMismatch { left: f64, right: f64 },
    #[error("matrix elements need at least one state")]
    NoStates,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// A shot-averaged estimate of one matrix element: the variance of `mean` is
/// `intrinsic_sigma² / shots`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixElementEstimate {
    pub mean: f64,
    pub intrinsic_sigma: f64,
    pub shots: u64,
}

impl MatrixElementEstimate {
    pub fn variance(&self) -> Option<f64> {
        (self.shots > 0).then(|| self.intrinsic_sigma.powi(2) / self.shots as f64)
    }

    /// Shot-weighted combination of two estimates of the same element.
    pub fn pooled(&self, other: &MatrixElementEstimate) -> Result<Self, ProtocolError> {
        if (self.intrinsic_sigma - other.intrinsic_sigma).abs() > 1e-12 {
            return Err(ProtocolError::SigmaMismatch {
                left: self.intrinsic_sigma,
                right: other.intrinsic_sigma,
            });
        }
        let shots = self.shots + other.shots;
        if shots == 0 {
            return Err(ProtocolError::ZeroShots);
        }
        let mean = (self.mean * self.shots as f64 + other.mean * other.shots as f64) / shots as f64;
        Ok(Self {
            mean,
            intrinsic_sigma: self.intrinsic_sigma,
            shots,
        })
    }
}

/// Draw a shot-averaged estimate: the true value plus Gaussian noise of
/// standard deviation `intrinsic_sigma / √shots`.
pub fn emulate_shots<R: Rng>(
    true_value: f64,
    intrinsic_sigma: f64,
    shots: u64,
    rng: &mut R,
) -> Result<MatrixElementEstimate, ProtocolError> {
    if shots == 0 {
        return Err(ProtocolError::ZeroShots);
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(MatrixElementEstimate {
        mean: true_value + intrinsic_sigma / (shots as f64).sqrt() * z,
        intrinsic_sigma,
        shots,
    })
}

/// Worst-case intrinsic sigmas for the two measurement channels:
/// the Hamiltonian coefficient 1-norm, and 1 for overlaps.
pub fn variance_bounds(ham: &QubitOperator) -> (f64, f64) {
    (ham.one_norm(), 1.0)
}

/// The doubled-register protocol state before ancilla readout.
#[derive(Clone, Debug)]
pub struct PairedRegisters {
    pub layout: RegisterLayout,
    pub state: StateVector,
}

/// Build `(|φ_i⟩|0⟩ + |φ_j⟩|1⟩)/√2` on system register 1 (times the vacuum on
/// register 2) by the controlled-SWAP construction. With `imaginary` set, the
/// ancilla phase is shifted so the subsequent readout yields imaginary parts:
/// the prepared state is `(|φ_i⟩|0⟩ − i|φ_j⟩|1⟩)/√2`.
pub fn prepare_plus_state(
    circ_i: &AnsatzCircuit,
    circ_j: &AnsatzCircuit,
    reference: &[usize],
    imaginary: bool,
) -> Result<PairedRegisters, ProtocolError> {
    if circ_i.n_qubits != circ_j.n_qubits {
        return Err(ProtocolError::CircuitSizeMismatch {
            left: circ_i.n_qubits,
            right: circ_j.n_qubits,
        });
    }
    if reference.is_empty() {
        return Err(ProtocolError::VacuumReference);
    }
    let n = circ_i.n_qubits;
    let layout = RegisterLayout::doubled(n);
    let total = layout.total_qubits();
    let ancilla = layout.ancilla;

    // reference on system 1, vacuum on system 2, |0⟩ ancilla
    let reference_state = StateVector::prepare_basis(n, reference)?;
    let mut state = tensor_embed(&reference_state, &layout)?;

    state.apply(&GateOp::Hadamard { target: ancilla })?;
    if imaginary {
        // S† on the ancilla: |1⟩ → −i|1⟩
        state.apply(&GateOp::PhaseZ {
            theta: -std::f64::consts::FRAC_PI_2,
            target: ancilla,
        })?;
    }

    let controlled_swaps: Vec<GateOp> = (0..n)
        .map(|q| GateOp::ControlledSwap {
            control: ancilla,
            a: layout.system1.start + q,
            b: layout.system2.start + q,
        })
        .collect();

    for gate in &controlled_swaps {
        state.apply(gate)?;
    }
    for gate in &circ_i.gates {
        state.apply(&gate.shifted(layout.system1.start, total))?;
    }
    for gate in &circ_j.gates {
        state.apply(&gate.shifted(layout.system2.start, total))?;
    }
    for gate in &controlled_swaps {
        state.apply(gate)?;
    }

    // the second register must now be unentangled vacuum
    let sys2_mask = layout.system2_bit_mask();
    let leak: f64 = state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(idx, _)| idx & sys2_mask != 0)
        .map(|(_, amp)| amp.norm_sqr())
        .sum();
    if leak > 1e-10 {
        return Err(ProtocolError::DisentanglementFailed { leak });
    }

    Ok(PairedRegisters { layout, state })
}

/// Readout record of one Hadamard-test preparation: the ancilla expectation,
/// the `⟨Ĥ·Ẑ_anc⟩` combination, and the conditional energies of the two
/// post-measurement branches with their `+1` branch probability. Empty
/// branches report `None`.
#[derive(Clone, Copy, Debug)]
pub struct HadamardTestReadout {
    pub z_anc: f64,
    pub hz: f64,
    pub h_plus: Option<f64>,
    pub h_minus: Option<f64>,
    pub p_plus: f64,
}

/// Apply the final ancilla Hadamard and read out the test.
///
/// For the real-variant preparation these are `⟨Ẑ_anc⟩ = Re⟨φ_i|φ_j⟩` and
/// `⟨ĤẐ_anc⟩ = Re⟨φ_i|Ĥ|φ_j⟩`; the imaginary variant delivers the imaginary
/// parts through the same record. The conditional energies satisfy
/// `hz = p₊·h₊ − (1−p₊)·h₋` whenever both branches are populated.
pub fn hadamard_test_readout(
    regs: &PairedRegisters,
    ham: &QubitOperator,
) -> Result<HadamardTestReadout, ProtocolError> {
    if !ham.is_hermitian(1e-10) {
        return Err(ProtocolError::Sim(SimError::NotHermitian));
    }
    let total = regs.layout.total_qubits();
    let ancilla = regs.layout.ancilla;
    let anc_mask = 1usize << ancilla;
    let mut state = regs.state.clone();
    state.apply(&GateOp::Hadamard { target: ancilla })?;

    // the embedded Hamiltonian leaves the ancilla alone, so one application
    // serves ⟨ĤẐ_anc⟩ and both conditional energies
    let ham_embedded = ham.embedded(total, regs.layout.system1.start);
    let h_psi = apply_operator(&state, &ham_embedded)?;

    let mut p_plus = 0.0;
    let mut p_minus = 0.0;
    let mut h_raw_plus = Complex64::new(0.0, 0.0);
    let mut h_raw_minus = Complex64::new(0.0, 0.0);
    for (idx, amp) in state.amplitudes().iter().enumerate() {
        let overlap = amp.conj() * h_psi.amplitude(idx);
        if idx & anc_mask == 0 {
            p_plus += amp.norm_sqr();
            h_raw_plus += overlap;
        } else {
            p_minus += amp.norm_sqr();
            h_raw_minus += overlap;
        }
    }
    let z_anc = p_plus - p_minus;
    let hz = h_raw_plus.re - h_raw_minus.re;
    debug_assert!(h_raw_plus.im.abs() + h_raw_minus.im.abs() < 1e-9);
    debug_assert!((p_plus + p_minus - 1.0).abs() < 1e-10);

    let h_plus = (p_plus >= EMPTY_BRANCH_EPS).then(|| h_raw_plus.re / p_plus);
    let h_minus = (p_minus >= EMPTY_BRANCH_EPS).then(|| h_raw_minus.re / p_minus);
    if let (Some(hp), Some(hm)) = (h_plus, h_minus) {
        debug_assert!(
            (hz - (p_plus * hp - (1.0 - p_plus) * hm)).abs() < 1e-12,
            "conditional-energy identity violated"
        );
    }

    Ok(HadamardTestReadout {
        z_anc,
        hz,
        h_plus,
        h_minus,
        p_plus,
    })
}

/// All Hamiltonian and overlap matrix elements by direct inner products:
/// `H_ij = ⟨φ_i|Ĥ|φ_j⟩`, `S_ij = ⟨φ_i|φ_j⟩`. The reference path the protocol
/// is checked against, and the source of exact matrices for experiments.
pub fn matrix_elements_exact(
    states: &[StateVector],
    ham: &QubitOperator,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>), ProtocolError> {
    if states.is_empty() {
        return Err(ProtocolError::NoStates);
    }
    let m = states.len();
    let mut h = DMatrix::zeros(m, m);
    let mut s = DMatrix::zeros(m, m);
    for j in 0..m {
        let h_phi = apply_operator(&states[j], ham)?;
        for i in 0..=j {
            let hij = states[i].inner_product(&h_phi)?;
            let sij = states[i].inner_product(&states[j])?;
            h[(i, j)] = hij;
            s[(i, j)] = sij;
            if i != j {
                h[(j, i)] = hij.conj();
                s[(j, i)] = sij.conj();
            }
        }
    }
    Ok((h, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{compile, hf_reference, prepare, KUpCCGSDParameters};
    use crate::hamiltonian::{jordan_wigner, synthetic_hamiltonian};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn identical_circuits_give_unit_overlap() {
        let reference = hf_reference(2, 1, 1).unwrap();
        let circ = AnsatzCircuit::identity(4);
        let regs = prepare_plus_state(&circ, &circ, &reference, false).unwrap();
        let ham = jordan_wigner(&synthetic_hamiltonian(2, 1));
        let readout = hadamard_test_readout(&regs, &ham).unwrap();
        assert!((readout.z_anc - 1.0).abs() < 1e-10);
        assert!((readout.p_plus - 1.0).abs() < 1e-10);
        let hf_state = StateVector::prepare_basis(4, &reference).unwrap();
        let diag = crate::simulator::expectation(&hf_state, &ham).unwrap();
        assert!((readout.h_plus.unwrap() - diag).abs() < 1e-10);
        assert!(readout.h_minus.is_none());
        // identity checked on the defined branch
        assert!((readout.hz - readout.p_plus * readout.h_plus.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn orthogonal_pair_gives_zero_overlap() {
        // a π/2 spin-summed single moves the pair to the other orbital
        let reference = hf_reference(2, 1, 1).unwrap();
        let circ_i = AnsatzCircuit::identity(4);
        let mut params = vec![0.0; KUpCCGSDParameters::parameter_count(1, 2)];
        params[1] = std::f64::consts::FRAC_PI_2; // the single amplitude
        let circ_j = compile(&KUpCCGSDParameters::from_flat(1, 2, &params).unwrap());
        let regs = prepare_plus_state(&circ_i, &circ_j, &reference, false).unwrap();
        let ham = jordan_wigner(&synthetic_hamiltonian(2, 2));
        let readout = hadamard_test_readout(&regs, &ham).unwrap();
        assert!(readout.z_anc.abs() < 1e-10);
        assert!((readout.p_plus - 0.5).abs() < 1e-10);
        // at S_ij = 0 the denominator-free average reproduces hz
        let (hp, hm) = (readout.h_plus.unwrap(), readout.h_minus.unwrap());
        assert!((readout.hz - 0.5 * (hp - hm)).abs() < 1e-10);
    }

    fn random_circuit_pair(
        n_spatial: usize,
        rng: &mut ChaCha12Rng,
        with_phases: bool,
    ) -> (AnsatzCircuit, AnsatzCircuit) {
        let mut make = |seed_shift: u64| {
            let mut local = ChaCha12Rng::seed_from_u64(rng.random::<u64>() ^ seed_shift);
            let params = KUpCCGSDParameters::random(1, n_spatial, 0.6, &mut local);
            let mut circ = compile(&params);
            if with_phases {
                circ.gates.push(GateOp::PhaseZ {
                    theta: local.random_range(-1.0..1.0),
                    target: local.random_range(0..2 * n_spatial),
                });
            }
            circ
        };
        (make(0x9e37), make(0x85eb))
    }

    #[test]
    fn protocol_matches_direct_matrix_elements() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for trial in 0..20 {
            let n_spatial = 2 + trial % 2;
            let reference = hf_reference(n_spatial, 1, 1).unwrap();
            let ham = jordan_wigner(&synthetic_hamiltonian(n_spatial, trial as u64));
            let (circ_i, circ_j) = random_circuit_pair(n_spatial, &mut rng, true);

            let mut phi_i = StateVector::prepare_basis(2 * n_spatial, &reference).unwrap();
            circ_i.apply_to(&mut phi_i).unwrap();
            let mut phi_j = StateVector::prepare_basis(2 * n_spatial, &reference).unwrap();
            circ_j.apply_to(&mut phi_j).unwrap();

            let h_direct = phi_i
                .inner_product(&apply_operator(&phi_j, &ham).unwrap())
                .unwrap();
            let s_direct = phi_i.inner_product(&phi_j).unwrap();

            let real = hadamard_test_readout(
                &prepare_plus_state(&circ_i, &circ_j, &reference, false).unwrap(),
                &ham,
            )
            .unwrap();
            let imag = hadamard_test_readout(
                &prepare_plus_state(&circ_i, &circ_j, &reference, true).unwrap(),
                &ham,
            )
            .unwrap();

            assert!((real.z_anc - s_direct.re).abs() < 1e-10, "trial {trial}");
            assert!((real.hz - h_direct.re).abs() < 1e-10, "trial {trial}");
            assert!((imag.z_anc - s_direct.im).abs() < 1e-10, "trial {trial}");
            assert!((imag.hz - h_direct.im).abs() < 1e-10, "trial {trial}");
        }
    }

    #[test]
    fn number_violating_circuit_fails_disentanglement() {
        let reference = hf_reference(2, 1, 1).unwrap();
        let mut broken = AnsatzCircuit::identity(4);
        broken.gates.push(GateOp::PauliX { target: 2 });
        let err = prepare_plus_state(&broken, &AnsatzCircuit::identity(4), &reference, false);
        assert!(matches!(
            err,
            Err(ProtocolError::DisentanglementFailed { .. })
        ));
    }

    #[test]
    fn vacuum_reference_rejected() {
        let circ = AnsatzCircuit::identity(2);
        assert!(matches!(
            prepare_plus_state(&circ, &circ, &[], false),
            Err(ProtocolError::VacuumReference)
        ));
    }

    #[test]
    fn matrix_elements_exact_examples() {
        let ham = jordan_wigner(&synthetic_hamiltonian(2, 9));
        let reference = hf_reference(2, 1, 1).unwrap();
        let state = prepare(
            &KUpCCGSDParameters::random(1, 2, 0.4, &mut ChaCha12Rng::seed_from_u64(4)),
            &reference,
        )
        .unwrap();

        let (h, s) = matrix_elements_exact(std::slice::from_ref(&state), &ham).unwrap();
        assert_eq!(h.nrows(), 1);
        let diag = crate::simulator::expectation(&state, &ham).unwrap();
        assert!((h[(0, 0)].re - diag).abs() < 1e-12);
        assert!((s[(0, 0)].re - 1.0).abs() < 1e-12);

        let (h2, s2) = matrix_elements_exact(&[state.clone(), state.clone()], &ham).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((s2[(i, j)].re - 1.0).abs() < 1e-12);
                assert!((h2[(i, j)] - h2[(j, i)].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn emulate_shots_zero_sigma_is_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let est = emulate_shots(-1.25, 0.0, 10, &mut rng).unwrap();
        assert_eq!(est.mean, -1.25);
        assert!(matches!(
            emulate_shots(0.0, 1.0, 0, &mut rng),
            Err(ProtocolError::ZeroShots)
        ));
    }

    #[test]
    fn pooling_is_shot_weighted() {
        let a = MatrixElementEstimate {
            mean: 1.0,
            intrinsic_sigma: 2.0,
            shots: 100,
        };
        let b = MatrixElementEstimate {
            mean: 3.0,
            intrinsic_sigma: 2.0,
            shots: 100,
        };
        let pooled = a.pooled(&b).unwrap();
        assert!((pooled.mean - 2.0).abs() < 1e-15);
        assert_eq!(pooled.shots, 200);
        let c = MatrixElementEstimate {
            mean: 0.0,
            intrinsic_sigma: 1.0,
            shots: 1,
        };
        assert!(a.pooled(&c).is_err());
    }

    #[test]
    fn emulated_shot_noise_has_the_modeled_variance() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let (sigma, shots) = (2.0, 4u64);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let est = emulate_shots(0.0, sigma, shots, &mut rng).unwrap();
            sum += est.mean;
            sum_sq += est.mean * est.mean;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let expected = sigma * sigma / shots as f64; // = 1
        assert!((var - expected).abs() / expected < 0.03);
        // unbiasedness: the mean of n draws has std σ/√(m·n)
        assert!(mean.abs() < 4.0 * sigma / ((shots as f64) * n as f64).sqrt());
    }

    #[test]
    fn variance_bound_examples() {
        let mut op = QubitOperator::new(1);
        op.add_term(
            crate::hamiltonian::PauliString::single(1, 0, Pauli::Z),
            Complex64::new(0.5, 0.0),
        );
        assert_eq!(variance_bounds(&op), (0.5, 1.0));
        let identity_only = QubitOperator::identity(2, Complex64::new(3.0, 0.0));
        assert_eq!(variance_bounds(&identity_only), (0.0, 1.0));
    }
}
