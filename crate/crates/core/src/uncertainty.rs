//! Monte Carlo estimation of the subspace ground-energy uncertainty and the
//! derivative-based adaptive measurement scheduler.
//!
//! Measured matrix elements are modeled as Gaussians centered on the current
//! estimates with standard deviation `σ/√m`. Sampling matrix pairs from those
//! distributions and solving each generalized eigenvalue problem yields an
//! energy distribution whose sample standard deviation `σ_MC` is the
//! uncertainty proxy. Holding the standard-normal draws fixed
//! (reparameterization) makes `σ_MC` a smooth function of the shot counts, so
//! its derivative with respect to each element's count can be evaluated
//! analytically through first-order eigenvalue perturbation; the scheduler
//! spends each measurement batch on the element with the most negative
//! derivative.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::eigensolver::{
    energy_sensitivity, solve_gevp, SolveError, SubspaceProblem, SubspaceSolution,
};
use crate::protocol::{emulate_shots, MatrixElementEstimate, ProtocolError};

#[derive(Debug, Error)]
pub enum UncertaintyError {
    #[error("ledger needs at least one element (subspace size {0})")]
    EmptyLedger(usize),
    #[error("element ({i}, {j}) of channel {channel} is not tracked by the ledger")]
    UnknownElement { channel: Channel, i: usize, j: usize },
    #[error("all {0} Monte Carlo samples had degenerate subspaces; uncertainty undefined")]
    AllSamplesDegenerate(usize),
    #[error("sample standard deviation needs at least 2 energies, got {0}")]
    NotEnoughSamples(usize),
    #[error("sigma_mc is zero; shot-count derivatives are undefined")]
    ZeroSigma,
    #[error("a Monte Carlo sample has a degenerate minimal eigenvalue; falling back is required")]
    DegenerateSensitivity,
    #[error("draws cover subspace size {draws} but the ledger has size {ledger}")]
    DrawSizeMismatch { draws: usize, ledger: usize },
    #[error("fit window [{0}, {1}] holds fewer than 3 trajectory points")]
    WindowTooSmall(f64, f64),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Which matrix a measurement belongs to. `Hamiltonian` orders before
/// `Overlap`, matching the scheduler's lexicographic tie-break.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Hamiltonian,
    Overlap,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Hamiltonian => write!(f, "H"),
            Channel::Overlap => write!(f, "S"),
        }
    }
}

/// One tracked matrix element, upper triangle: `i ≤ j` for the Hamiltonian,
/// `i < j` for the overlap (diagonal overlaps are fixed at 1 and never
/// measured).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementKey {
    pub channel: Channel,
    pub i: usize,
    pub j: usize,
}

impl fmt::Display for ElementKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{},{}]", self.channel, self.i, self.j)
    }
}

fn tri_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < m);
    i * m - i * (i + 1) / 2 + j
}

fn strict_tri_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < m);
    i * m - i * (i + 1) / 2 + j - (i + 1)
}

/// The exact matrices a measurement emulation draws against.
#[derive(Clone, Debug)]
pub struct TrueMatrices {
    pub h: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

impl TrueMatrices {
    pub fn value(&self, key: ElementKey) -> f64 {
        match key.channel {
            Channel::Hamiltonian => self.h[(key.i, key.j)],
            Channel::Overlap => self.s[(key.i, key.j)],
        }
    }
}

/// Per-element measurement state for one subspace: estimates, intrinsic
/// sigmas and shot counts for the `H̃` and `S̃` matrices.
#[derive(Clone, Debug)]
pub struct MeasurementLedger {
    m: usize,
    sigma_h: f64,
    sigma_s: f64,
    h_elems: Vec<MatrixElementEstimate>,
    s_elems: Vec<MatrixElementEstimate>,
}

impl MeasurementLedger {
    /// Initialize by measuring every element `pilot_shots` times against the
    /// true matrices, in element order.
    pub fn new_pilot<R: Rng>(
        truth: &TrueMatrices,
        sigma_h: f64,
        sigma_s: f64,
        pilot_shots: u64,
        rng: &mut R,
    ) -> Result<Self, UncertaintyError> {
        let m = truth.h.nrows();
        if m == 0 {
            return Err(UncertaintyError::EmptyLedger(0));
        }
        let mut h_elems = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in i..m {
                h_elems.push(emulate_shots(truth.h[(i, j)], sigma_h, pilot_shots, rng)?);
            }
        }
        let mut s_elems = Vec::with_capacity(m * (m - 1) / 2);
        for i in 0..m {
            for j in i + 1..m {
                s_elems.push(emulate_shots(truth.s[(i, j)], sigma_s, pilot_shots, rng)?);
            }
        }
        Ok(Self {
            m,
            sigma_h,
            sigma_s,
            h_elems,
            s_elems,
        })
    }

    /// Build a ledger from explicit per-element estimates (test harness and
    /// replay paths). `h_elems` is the packed upper triangle including the
    /// diagonal, `s_elems` excludes it.
    pub fn from_estimates(
        m: usize,
        sigma_h: f64,
        sigma_s: f64,
        h_elems: Vec<MatrixElementEstimate>,
        s_elems: Vec<MatrixElementEstimate>,
    ) -> Result<Self, UncertaintyError> {
        if m == 0 || h_elems.len() != m * (m + 1) / 2 || s_elems.len() != m * (m - 1) / 2 {
            return Err(UncertaintyError::EmptyLedger(m));
        }
        Ok(Self {
            m,
            sigma_h,
            sigma_s,
            h_elems,
            s_elems,
        })
    }

    pub fn subspace_size(&self) -> usize {
        self.m
    }

    pub fn sigma_h(&self) -> f64 {
        self.sigma_h
    }

    pub fn sigma_s(&self) -> f64 {
        self.sigma_s
    }

    /// All tracked elements: Hamiltonian upper triangle row-major, then
    /// overlap strict upper triangle, both lexicographic in `(i, j)`.
    pub fn element_keys(&self) -> Vec<ElementKey> {
        let mut keys = Vec::with_capacity(self.h_elems.len() + self.s_elems.len());
        for i in 0..self.m {
            for j in i..self.m {
                keys.push(ElementKey {
                    channel: Channel::Hamiltonian,
                    i,
                    j,
                });
            }
        }
        for i in 0..self.m {
            for j in i + 1..self.m {
                keys.push(ElementKey {
                    channel: Channel::Overlap,
                    i,
                    j,
                });
            }
        }
        keys
    }

    fn slot(&self, key: ElementKey) -> Result<usize, UncertaintyError> {
        let valid = match key.channel {
            Channel::Hamiltonian => key.i <= key.j && key.j < self.m,
            Channel::Overlap => key.i < key.j && key.j < self.m,
        };
        if !valid {
            return Err(UncertaintyError::UnknownElement {
                channel: key.channel,
                i: key.i,
                j: key.j,
            });
        }
        Ok(match key.channel {
            Channel::Hamiltonian => tri_index(self.m, key.i, key.j),
            Channel::Overlap => strict_tri_index(self.m, key.i, key.j),
        })
    }

    pub fn estimate(&self, key: ElementKey) -> Result<&MatrixElementEstimate, UncertaintyError> {
        let slot = self.slot(key)?;
        Ok(match key.channel {
            Channel::Hamiltonian => &self.h_elems[slot],
            Channel::Overlap => &self.s_elems[slot],
        })
    }

    /// Pool a fresh estimate into an element.
    pub fn record(
        &mut self,
        key: ElementKey,
        estimate: MatrixElementEstimate,
    ) -> Result<(), UncertaintyError> {
        let slot = self.slot(key)?;
        let target = match key.channel {
            Channel::Hamiltonian => &mut self.h_elems[slot],
            Channel::Overlap => &mut self.s_elems[slot],
        };
        *target = target.pooled(&estimate)?;
        Ok(())
    }

    pub fn intrinsic_sigma(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Hamiltonian => self.sigma_h,
            Channel::Overlap => self.sigma_s,
        }
    }

    /// Current noise amplitude `σ/√m` of one element.
    pub fn noise_amplitude(&self, key: ElementKey) -> Result<f64, UncertaintyError> {
        let est = self.estimate(key)?;
        Ok(est.intrinsic_sigma / (est.shots as f64).sqrt())
    }

    pub fn total_shots(&self) -> u64 {
        self.h_elems
            .iter()
            .chain(self.s_elems.iter())
            .map(|e| e.shots)
            .sum()
    }

    /// Symmetric mean matrices; the overlap diagonal is fixed at 1.
    pub fn mean_matrices(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = self.m;
        let mut h = DMatrix::zeros(m, m);
        let mut s = DMatrix::identity(m, m);
        for i in 0..m {
            for j in i..m {
                let value = self.h_elems[tri_index(m, i, j)].mean;
                h[(i, j)] = value;
                h[(j, i)] = value;
            }
            for j in i + 1..m {
                let value = self.s_elems[strict_tri_index(m, i, j)].mean;
                s[(i, j)] = value;
                s[(j, i)] = value;
            }
        }
        (h, s)
    }
}

/// Fixed standard-normal draws shared by every evaluation inside one
/// scheduling step; regenerated only by explicit reseeding.
#[derive(Clone, Debug)]
pub struct NoiseDraws {
    n_samples: usize,
    m: usize,
    z_h: Vec<f64>,
    z_s: Vec<f64>,
}

impl NoiseDraws {
    pub fn generate(m: usize, n_samples: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let h_len = m * (m + 1) / 2;
        let s_len = m * (m - 1) / 2;
        let mut z_h = Vec::with_capacity(n_samples * h_len);
        let mut z_s = Vec::with_capacity(n_samples * s_len);
        for _ in 0..n_samples {
            for _ in 0..h_len {
                z_h.push(rng.sample(StandardNormal));
            }
            for _ in 0..s_len {
                z_s.push(rng.sample(StandardNormal));
            }
        }
        Self {
            n_samples,
            m,
            z_h,
            z_s,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn subspace_size(&self) -> usize {
        self.m
    }

    fn z(&self, sample: usize, key: ElementKey) -> f64 {
        match key.channel {
            Channel::Hamiltonian => {
                self.z_h[sample * (self.m * (self.m + 1) / 2) + tri_index(self.m, key.i, key.j)]
            }
            Channel::Overlap => {
                self.z_s
                    [sample * (self.m * (self.m - 1) / 2) + strict_tri_index(self.m, key.i, key.j)]
            }
        }
    }
}

/// One sampled matrix pair: estimates plus `σ/√m`-scaled noise, mirrored so
/// the matrices stay symmetric; the overlap diagonal stays exactly 1.
fn sampled_matrices(
    ledger: &MeasurementLedger,
    draws: &NoiseDraws,
    sample: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = ledger.m;
    let (mut h, mut s) = ledger.mean_matrices();
    for i in 0..m {
        for j in i..m {
            let key = ElementKey {
                channel: Channel::Hamiltonian,
                i,
                j,
            };
            let amp = ledger.noise_amplitude(key).expect("tracked element");
            let value = h[(i, j)] + amp * draws.z(sample, key);
            h[(i, j)] = value;
            h[(j, i)] = value;
        }
        for j in i + 1..m {
            let key = ElementKey {
                channel: Channel::Overlap,
                i,
                j,
            };
            let amp = ledger.noise_amplitude(key).expect("tracked element");
            let value = s[(i, j)] + amp * draws.z(sample, key);
            s[(i, j)] = value;
            s[(j, i)] = value;
        }
    }
    (h, s)
}

fn solve_sample(
    ledger: &MeasurementLedger,
    draws: &NoiseDraws,
    sample: usize,
    cutoff: f64,
) -> Option<SubspaceSolution> {
    let (h, s) = sampled_matrices(ledger, draws, sample);
    let prob = SubspaceProblem::from_real(&h, &s, cutoff).ok()?;
    solve_gevp(&prob).ok()
}

/// Monte Carlo energies from one set of fixed draws.
#[derive(Clone, Debug)]
pub struct EnergySamples {
    pub energies: Vec<f64>,
    /// Samples dropped because the sampled overlap lost all rank.
    pub dropped: usize,
}

/// Solve the generalized eigenvalue problem for every sampled matrix pair.
pub fn sample_energies(
    ledger: &MeasurementLedger,
    draws: &NoiseDraws,
    cutoff: f64,
) -> Result<EnergySamples, UncertaintyError> {
    if draws.subspace_size() != ledger.m {
        return Err(UncertaintyError::DrawSizeMismatch {
            draws: draws.subspace_size(),
            ledger: ledger.m,
        });
    }
    let solved: Vec<Option<f64>> = (0..draws.n_samples())
        .into_par_iter()
        .map(|k| solve_sample(ledger, draws, k, cutoff).map(|sol| sol.energy))
        .collect();
    let energies: Vec<f64> = solved.iter().filter_map(|e| *e).collect();
    let dropped = solved.len() - energies.len();
    if energies.is_empty() {
        return Err(UncertaintyError::AllSamplesDegenerate(draws.n_samples()));
    }
    Ok(EnergySamples { energies, dropped })
}

/// Bessel-corrected sample standard deviation.
pub fn sigma_mc(energies: &[f64]) -> Result<f64, UncertaintyError> {
    if energies.len() < 2 {
        return Err(UncertaintyError::NotEnoughSamples(energies.len()));
    }
    let n = energies.len() as f64;
    let mean = energies.iter().sum::<f64>() / n;
    let var = energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt())
}

/// Analytic derivative of `σ_MC` with respect to every element's shot count,
/// at fixed draws. The shot count is relaxed to a continuous variable; the
/// chain rule runs through the first-order eigenvalue sensitivities, with
/// off-diagonal elements accumulating both mirrored entries.
pub fn d_sigma_dm(
    ledger: &MeasurementLedger,
    draws: &NoiseDraws,
    cutoff: f64,
) -> Result<BTreeMap<ElementKey, f64>, UncertaintyError> {
    if draws.subspace_size() != ledger.m {
        return Err(UncertaintyError::DrawSizeMismatch {
            draws: draws.subspace_size(),
            ledger: ledger.m,
        });
    }
    let solved: Vec<Option<SubspaceSolution>> = (0..draws.n_samples())
        .into_par_iter()
        .map(|k| solve_sample(ledger, draws, k, cutoff))
        .collect();
    let retained: Vec<(usize, &SubspaceSolution)> = solved
        .iter()
        .enumerate()
        .filter_map(|(k, sol)| sol.as_ref().map(|s| (k, s)))
        .collect();
    if retained.is_empty() {
        return Err(UncertaintyError::AllSamplesDegenerate(draws.n_samples()));
    }
    if retained.len() < 2 {
        return Err(UncertaintyError::NotEnoughSamples(retained.len()));
    }
    let energies: Vec<f64> = retained.iter().map(|(_, sol)| sol.energy).collect();
    let sigma = sigma_mc(&energies)?;
    // identical sampled energies leave only summation-rounding residue
    let sigma_floor = 1e-14 * energies.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    if sigma <= sigma_floor {
        return Err(UncertaintyError::ZeroSigma);
    }

    // per-sample sensitivities; a degenerate minimal eigenvalue anywhere
    // makes the derivative unreliable and trips the round-robin fallback
    let mut sensitivities = Vec::with_capacity(retained.len());
    for (_, sol) in &retained {
        match energy_sensitivity(sol) {
            Ok(pair) => sensitivities.push(pair),
            Err(SolveError::DegenerateEigenvalue { .. }) => {
                return Err(UncertaintyError::DegenerateSensitivity)
            }
            Err(e) => return Err(e.into()),
        }
    }

    let k_eff = retained.len() as f64;
    let e_mean = energies.iter().sum::<f64>() / k_eff;
    let keys = ledger.element_keys();
    let mut out = BTreeMap::new();
    for key in keys {
        let est = ledger.estimate(key)?;
        let m_shots = est.shots as f64;
        let sigma_elem = est.intrinsic_sigma;
        // dX/dm for X = mean + σ·m^{-1/2}·z
        let mut g: Vec<f64> = Vec::with_capacity(retained.len());
        for ((sample, _), (d_h, d_s)) in retained.iter().zip(&sensitivities) {
            let z = draws.z(*sample, key);
            let d_value_dm = -0.5 * sigma_elem * z * m_shots.powf(-1.5);
            let sensitivity = match key.channel {
                Channel::Hamiltonian => {
                    let mut v = d_h[(key.i, key.j)].re;
                    if key.i != key.j {
                        v += d_h[(key.j, key.i)].re;
                    }
                    v
                }
                Channel::Overlap => d_s[(key.i, key.j)].re + d_s[(key.j, key.i)].re,
            };
            g.push(sensitivity * d_value_dm);
        }
        let g_mean = g.iter().sum::<f64>() / k_eff;
        let mut accum = 0.0;
        for ((_, sol), gk) in retained.iter().zip(&g) {
            accum += (sol.energy - e_mean) * (gk - g_mean);
        }
        out.insert(key, accum / ((k_eff - 1.0) * sigma));
    }
    Ok(out)
}

/// Round-robin fallback: the tracked element with the fewest shots, ties
/// broken lexicographic in `(channel, i, j)`.
fn fewest_shots_element(ledger: &MeasurementLedger) -> ElementKey {
    ledger
        .element_keys()
        .into_iter()
        .min_by_key(|&key| (ledger.estimate(key).expect("tracked element").shots, key))
        .expect("non-empty ledger")
}

/// One adaptive scheduling step: pick the element whose shot-count derivative
/// of `σ_MC` is most negative, measure one batch of it against the truth, and
/// pool the result. Falls back to round-robin when the derivative signal is
/// unavailable (zero `σ_MC` or a degenerate sample).
pub fn adaptive_step<R: Rng>(
    ledger: &mut MeasurementLedger,
    draws: &NoiseDraws,
    batch: u64,
    truth: &TrueMatrices,
    cutoff: f64,
    rng: &mut R,
) -> Result<ElementKey, UncertaintyError> {
    let chosen = match d_sigma_dm(ledger, draws, cutoff) {
        Ok(derivatives) => {
            derivatives
                .iter()
                // BTreeMap iterates keys in ascending order, so strict `<`
                // keeps the lexicographically first among ties
                .fold(None::<(ElementKey, f64)>, |best, (&key, &value)| match best {
                    Some((_, best_value)) if value >= best_value => best,
                    _ => Some((key, value)),
                })
                .map(|(key, _)| key)
                .expect("non-empty ledger")
        }
        Err(UncertaintyError::ZeroSigma) | Err(UncertaintyError::DegenerateSensitivity) => {
            fewest_shots_element(ledger)
        }
        Err(e) => return Err(e),
    };
    let estimate = emulate_shots(
        truth.value(chosen),
        ledger.intrinsic_sigma(chosen.channel),
        batch,
        rng,
    )?;
    ledger.record(chosen, estimate)?;
    Ok(chosen)
}

/// One non-adaptive step: a full round-robin cycle measuring every element
/// once with the same batch size.
pub fn nonadaptive_step<R: Rng>(
    ledger: &mut MeasurementLedger,
    batch: u64,
    truth: &TrueMatrices,
    rng: &mut R,
) -> Result<(), UncertaintyError> {
    for key in ledger.element_keys() {
        let estimate = emulate_shots(
            truth.value(key),
            ledger.intrinsic_sigma(key.channel),
            batch,
            rng,
        )?;
        ledger.record(key, estimate)?;
    }
    Ok(())
}

/// Mean and 2σ error bar of the sampled energy distribution, from `n_boot`
/// fresh draws seeded by `boot_seed`.
pub fn bootstrap_errorbar(
    ledger: &MeasurementLedger,
    boot_seed: u64,
    n_boot: usize,
    cutoff: f64,
) -> Result<(f64, f64), UncertaintyError> {
    if n_boot < 2 {
        return Err(UncertaintyError::NotEnoughSamples(n_boot));
    }
    let draws = NoiseDraws::generate(ledger.subspace_size(), n_boot, boot_seed);
    let samples = sample_energies(ledger, &draws, cutoff)?;
    let mean = samples.energies.iter().sum::<f64>() / samples.energies.len() as f64;
    let two_sigma = 2.0 * sigma_mc(&samples.energies)?;
    Ok((mean, two_sigma))
}

/// Result of fitting `σ²(N) ≈ κ/N` over a trajectory window.
#[derive(Clone, Copy, Debug)]
pub struct ConvergenceFit {
    /// Intrinsic variance constant (hartree² · measurements).
    pub kappa: f64,
    pub window: (f64, f64),
    /// Root-mean-square misfit of `σ²` inside the window.
    pub residual: f64,
}

/// Zero-intercept least squares of `σ²` against `1/N` over the points whose
/// `N` lies inside the window.
pub fn fit_kappa(
    trajectory: &[(f64, f64)],
    window: (f64, f64),
) -> Result<ConvergenceFit, UncertaintyError> {
    let points: Vec<(f64, f64)> = trajectory
        .iter()
        .copied()
        .filter(|(n, _)| *n >= window.0 && *n <= window.1)
        .collect();
    if points.len() < 3 {
        return Err(UncertaintyError::WindowTooSmall(window.0, window.1));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(n, var) in &points {
        let x = 1.0 / n;
        num += var * x;
        den += x * x;
    }
    let kappa = num / den;
    let residual = (points
        .iter()
        .map(|&(n, var)| (var - kappa / n).powi(2))
        .sum::<f64>()
        / points.len() as f64)
        .sqrt();
    Ok(ConvergenceFit {
        kappa,
        window,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_element_ledger(mean: f64, sigma: f64, shots: u64) -> MeasurementLedger {
        MeasurementLedger::from_estimates(
            1,
            sigma,
            1.0,
            vec![MatrixElementEstimate {
                mean,
                intrinsic_sigma: sigma,
                shots,
            }],
            vec![],
        )
        .unwrap()
    }

    fn toy_truth(m: usize) -> TrueMatrices {
        let h = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                -1.0 - i as f64 * 0.3
            } else {
                -0.2 / (1.0 + (i as f64 - j as f64).abs())
            }
        });
        let s = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                1.0
            } else {
                0.25 / (1.0 + (i as f64 - j as f64).abs())
            }
        });
        TrueMatrices { h, s }
    }

    fn pilot_ledger(m: usize, sigma_h: f64, shots: u64, seed: u64) -> MeasurementLedger {
        let truth = toy_truth(m);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        MeasurementLedger::new_pilot(&truth, sigma_h, 1.0, shots, &mut rng).unwrap()
    }

    #[test]
    fn zero_noise_samples_collapse_to_noiseless_solve() {
        let truth = toy_truth(3);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let ledger = MeasurementLedger::new_pilot(&truth, 0.0, 0.0, 100, &mut rng).unwrap();
        let draws = NoiseDraws::generate(3, 16, 7);
        let samples = sample_energies(&ledger, &draws, 1e-6).unwrap();
        let (h, s) = ledger.mean_matrices();
        let noiseless = solve_gevp(&SubspaceProblem::from_real(&h, &s, 1e-6).unwrap())
            .unwrap()
            .energy;
        for e in &samples.energies {
            assert!((e - noiseless).abs() < 1e-12);
        }
        assert_eq!(samples.dropped, 0);
    }

    #[test]
    fn one_by_one_samples_follow_the_draws_exactly() {
        let (mean, sigma, shots) = (-1.5, 2.0, 400u64);
        let ledger = single_element_ledger(mean, sigma, shots);
        let draws = NoiseDraws::generate(1, 64, 3);
        let samples = sample_energies(&ledger, &draws, 1e-8).unwrap();
        for (k, e) in samples.energies.iter().enumerate() {
            let z = draws.z(
                k,
                ElementKey {
                    channel: Channel::Hamiltonian,
                    i: 0,
                    j: 0,
                },
            );
            let expected = mean + sigma / (shots as f64).sqrt() * z;
            assert!((e - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn sample_std_matches_the_noise_scale() {
        let (sigma, shots) = (2.0, 16u64);
        let ledger = single_element_ledger(0.0, sigma, shots);
        let draws = NoiseDraws::generate(1, 10_000, 11);
        let samples = sample_energies(&ledger, &draws, 1e-8).unwrap();
        let std = sigma_mc(&samples.energies).unwrap();
        let expected = sigma / (shots as f64).sqrt();
        assert!((std - expected).abs() / expected < 0.03);
    }

    #[test]
    fn sigma_mc_examples() {
        assert_eq!(sigma_mc(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((sigma_mc(&[0.0, 2.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            sigma_mc(&[1.0]),
            Err(UncertaintyError::NotEnoughSamples(1))
        ));
        // two-pass reference on a random list
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        let reference = (data.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
            / (data.len() as f64 - 1.0))
            .sqrt();
        assert!((sigma_mc(&data).unwrap() - reference).abs() < 1e-12);
    }

    #[test]
    fn one_by_one_derivative_closed_form() {
        // σ_MC = (σ/√m)·std(z) and dσ/dm = −σ_MC/(2m)
        let (sigma, shots) = (1.5, 2500u64);
        let ledger = single_element_ledger(-1.0, sigma, shots);
        let draws = NoiseDraws::generate(1, 256, 21);
        let samples = sample_energies(&ledger, &draws, 1e-8).unwrap();
        let sigma_now = sigma_mc(&samples.energies).unwrap();
        let derivative = d_sigma_dm(&ledger, &draws, 1e-8).unwrap();
        let key = ElementKey {
            channel: Channel::Hamiltonian,
            i: 0,
            j: 0,
        };
        let expected = -sigma_now / (2.0 * shots as f64);
        assert!((derivative[&key] - expected).abs() < 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn zero_sigma_channel_has_zero_derivative() {
        let truth = toy_truth(2);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        // overlap channel noiseless, Hamiltonian noisy
        let ledger = MeasurementLedger::new_pilot(&truth, 1.0, 0.0, 100, &mut rng).unwrap();
        let draws = NoiseDraws::generate(2, 128, 3);
        let derivatives = d_sigma_dm(&ledger, &draws, 1e-8).unwrap();
        let s_key = ElementKey {
            channel: Channel::Overlap,
            i: 0,
            j: 1,
        };
        assert_eq!(derivatives[&s_key], 0.0);
        let h_key = ElementKey {
            channel: Channel::Hamiltonian,
            i: 0,
            j: 0,
        };
        assert!(derivatives[&h_key] < 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        // integer shot steps keep the ledger exact while approximating the
        // continuous-m derivative
        let ledger = pilot_ledger(3, 2.0, 100_000, 40);
        let draws = NoiseDraws::generate(3, 96, 17);
        let cutoff = 1e-8;
        let analytic = d_sigma_dm(&ledger, &draws, cutoff).unwrap();
        for key in ledger.element_keys() {
            let base = ledger.estimate(key).unwrap();
            let step = (base.shots as f64 * 1e-3) as u64;
            let mut plus = ledger.clone();
            let mut minus = ledger.clone();
            let perturb = |l: &mut MeasurementLedger, shots: u64| {
                let mut est = *l.estimate(key).unwrap();
                est.shots = shots;
                let slot_est = est;
                // rebuild via from_estimates to keep means identical
                let mut h = Vec::new();
                let mut s = Vec::new();
                for k in l.element_keys() {
                    let e = if k == key {
                        slot_est
                    } else {
                        *l.estimate(k).unwrap()
                    };
                    match k.channel {
                        Channel::Hamiltonian => h.push(e),
                        Channel::Overlap => s.push(e),
                    }
                }
                *l = MeasurementLedger::from_estimates(3, l.sigma_h(), l.sigma_s(), h, s)
                    .unwrap();
            };
            perturb(&mut plus, base.shots + step);
            perturb(&mut minus, base.shots - step);
            let sigma_plus =
                sigma_mc(&sample_energies(&plus, &draws, cutoff).unwrap().energies).unwrap();
            let sigma_minus =
                sigma_mc(&sample_energies(&minus, &draws, cutoff).unwrap().energies).unwrap();
            let fd = (sigma_plus - sigma_minus) / (2.0 * step as f64);
            let scale = analytic[&key].abs().max(1e-12);
            assert!(
                (fd - analytic[&key]).abs() / scale < 1e-4,
                "{key}: fd {fd:.6e} vs analytic {:.6e}",
                analytic[&key]
            );
        }
    }

    #[test]
    fn adaptive_step_prefers_the_starved_element() {
        let truth = toy_truth(2);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let mut ledger = MeasurementLedger::new_pilot(&truth, 1.0, 1.0, 1_000_000, &mut rng)
            .unwrap();
        // starve one element: comparable sensitivities, so the m^{-3/2}
        // factor makes its derivative dominate
        let starved = ElementKey {
            channel: Channel::Hamiltonian,
            i: 0,
            j: 1,
        };
        let mut h = Vec::new();
        let mut s = Vec::new();
        for k in ledger.element_keys() {
            let mut e = *ledger.estimate(k).unwrap();
            if k == starved {
                e.shots = 100;
            }
            match k.channel {
                Channel::Hamiltonian => h.push(e),
                Channel::Overlap => s.push(e),
            }
        }
        ledger = MeasurementLedger::from_estimates(2, 1.0, 1.0, h, s).unwrap();
        let draws = NoiseDraws::generate(2, 200, 33);
        let chosen = adaptive_step(&mut ledger, &draws, 1000, &truth, 1e-8, &mut rng).unwrap();
        assert_eq!(chosen, starved);
        assert_eq!(ledger.estimate(starved).unwrap().shots, 1100);
    }

    #[test]
    fn zero_sigma_ledger_falls_back_to_round_robin() {
        let truth = toy_truth(2);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let mut ledger = MeasurementLedger::new_pilot(&truth, 0.0, 0.0, 100, &mut rng).unwrap();
        let draws = NoiseDraws::generate(2, 64, 5);
        // all elements equal shots: lexicographically first key is chosen
        let chosen = adaptive_step(&mut ledger, &draws, 100, &truth, 1e-8, &mut rng).unwrap();
        assert_eq!(
            chosen,
            ElementKey {
                channel: Channel::Hamiltonian,
                i: 0,
                j: 0
            }
        );
        // the next fallback choice moves on to the next element
        let chosen = adaptive_step(&mut ledger, &draws, 100, &truth, 1e-8, &mut rng).unwrap();
        assert_eq!(
            chosen,
            ElementKey {
                channel: Channel::Hamiltonian,
                i: 0,
                j: 1
            }
        );
    }

    #[test]
    fn nonadaptive_cycle_keeps_shots_equal() {
        let truth = toy_truth(3);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let mut ledger = MeasurementLedger::new_pilot(&truth, 1.0, 1.0, 500, &mut rng).unwrap();
        let n_elements = ledger.element_keys().len() as u64;
        let before = ledger.total_shots();
        assert_eq!(before, 500 * n_elements);
        nonadaptive_step(&mut ledger, 500, &truth, &mut rng).unwrap();
        for key in ledger.element_keys() {
            assert_eq!(ledger.estimate(key).unwrap().shots, 1000);
        }
        assert_eq!(ledger.total_shots(), before + 500 * n_elements);
    }

    #[test]
    fn pilot_shots_are_never_lost() {
        let truth = toy_truth(2);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut ledger = MeasurementLedger::new_pilot(&truth, 1.0, 1.0, 300, &mut rng).unwrap();
        let draws = NoiseDraws::generate(2, 64, 2);
        for _ in 0..20 {
            adaptive_step(&mut ledger, &draws, 300, &truth, 1e-8, &mut rng).unwrap();
        }
        for key in ledger.element_keys() {
            assert!(ledger.estimate(key).unwrap().shots >= 300);
        }
    }

    #[test]
    fn bootstrap_error_bar_zero_noise_and_scaling() {
        let truth = toy_truth(2);
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let noiseless = MeasurementLedger::new_pilot(&truth, 0.0, 0.0, 100, &mut rng).unwrap();
        let (_, two_sigma) = bootstrap_errorbar(&noiseless, 77, 200, 1e-8).unwrap();
        // zero up to the rounding residue of averaging identical energies
        assert!(two_sigma < 1e-12);

        // one-element ledger: two_sigma ≈ 2σ/√m within bootstrap variability
        let (sigma, shots) = (1.0, 10_000u64);
        let single = single_element_ledger(0.5, sigma, shots);
        let (mean, two_sigma) = bootstrap_errorbar(&single, 123, 200, 1e-8).unwrap();
        let expected = 2.0 * sigma / (shots as f64).sqrt();
        assert!((two_sigma - expected).abs() / expected < 0.3);
        assert!((mean - 0.5).abs() < 5.0 * sigma / (shots as f64).sqrt());
    }

    #[test]
    fn kappa_fit_recovers_exact_model() {
        let trajectory: Vec<(f64, f64)> = (1..=20)
            .map(|i| {
                let n = 1e6 * i as f64;
                (n, 40.0 / n)
            })
            .collect();
        let fit = fit_kappa(&trajectory, (0.0, f64::INFINITY)).unwrap();
        assert!((fit.kappa - 40.0).abs() < 1e-9);
        assert!(fit.residual < 1e-15);
        assert!(matches!(
            fit_kappa(&trajectory[..2], (0.0, f64::INFINITY)),
            Err(UncertaintyError::WindowTooSmall(..))
        ));
        // window filtering
        let fit = fit_kappa(&trajectory, (5e6, 1e7)).unwrap();
        assert!((fit.kappa - 40.0).abs() < 1e-9);
    }

    #[test]
    fn reparameterized_sampling_is_bit_deterministic() {
        let ledger = pilot_ledger(3, 1.5, 1000, 50);
        let draws = NoiseDraws::generate(3, 128, 99);
        let a = sample_energies(&ledger, &draws, 1e-6).unwrap();
        let b = sample_energies(&ledger, &draws, 1e-6).unwrap();
        assert_eq!(a.energies, b.energies);
        let da = d_sigma_dm(&ledger, &draws, 1e-6).unwrap();
        let db = d_sigma_dm(&ledger, &draws, 1e-6).unwrap();
        assert_eq!(da, db);
    }

    #[test]
    fn infinite_shots_recover_the_noiseless_energy() {
        let base = pilot_ledger(3, 2.0, 1000, 60);
        // scale every element's shots by 1e6
        let mut h = Vec::new();
        let mut s = Vec::new();
        for k in base.element_keys() {
            let mut e = *base.estimate(k).unwrap();
            e.shots *= 1_000_000;
            match k.channel {
                Channel::Hamiltonian => h.push(e),
                Channel::Overlap => s.push(e),
            }
        }
        let scaled = MeasurementLedger::from_estimates(3, 2.0, 1.0, h, s).unwrap();
        let draws = NoiseDraws::generate(3, 512, 8);
        let samples = sample_energies(&scaled, &draws, 1e-8).unwrap();
        let std = sigma_mc(&samples.energies).unwrap();
        let (hm, sm) = scaled.mean_matrices();
        let noiseless = solve_gevp(&SubspaceProblem::from_real(&hm, &sm, 1e-8).unwrap())
            .unwrap()
            .energy;
        let mean = samples.energies.iter().sum::<f64>() / samples.energies.len() as f64;
        let standard_error = std / (samples.energies.len() as f64).sqrt();
        assert!(std < 1e-3);
        assert!((mean - noiseless).abs() < 3.0 * standard_error.max(1e-12));
    }
}
