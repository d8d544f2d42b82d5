//! Experiment orchestration: exact-matrix subspace growth and the
//! adaptive/non-adaptive measurement trajectory runs.
//!
//! Everything is deterministic in the configured seed: state initializations
//! come from a master stream, and the per-step Monte Carlo draws and shot
//! emulations use seeds derived from `(seed, step, purpose)`.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use novqe_core::ansatz::{hf_reference, prepare, AnsatzTemplate, KUpCCGSDParameters};
use novqe_core::eigensolver::{solve_gevp, SubspaceProblem};
use novqe_core::hamiltonian::{
    fci_oracle, jordan_wigner, parse_fcidump, FermionIntegrals, QubitOperator, Sector,
};
use novqe_core::protocol::{matrix_elements_exact, variance_bounds};
use novqe_core::simulator::{apply_operator, expectation, StateVector};
use novqe_core::uncertainty::{
    adaptive_step, bootstrap_errorbar, fit_kappa, nonadaptive_step, sample_energies, sigma_mc,
    ConvergenceFit, MeasurementLedger, NoiseDraws, TrueMatrices,
};

use crate::config::{ExperimentConfig, Mode};
use crate::optimize::{minimize, OptimizeOptions};

/// Parsed fixture plus the derived quantities every experiment needs.
pub struct FixtureContext {
    pub integrals: FermionIntegrals,
    pub hamiltonian: QubitOperator,
    pub reference: Vec<usize>,
    pub sector: Sector,
}

pub fn load_fixture(path: &Path) -> Result<FixtureContext> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read fixture {}", path.display()))?;
    let integrals =
        parse_fcidump(&text).with_context(|| format!("parsing {}", path.display()))?;
    integrals.validate()?;
    let hamiltonian = jordan_wigner(&integrals);
    let reference = hf_reference(
        integrals.n_spatial(),
        integrals.n_alpha(),
        integrals.n_beta(),
    )?;
    let sector = Sector::new(
        integrals.n_electrons(),
        integrals.n_alpha() as i64 - integrals.n_beta() as i64,
    );
    Ok(FixtureContext {
        integrals,
        hamiltonian,
        reference,
        sector,
    })
}

/// Stable per-purpose seed derivation (splitmix64 over the mixed inputs).
pub fn derive_seed(base: u64, step: u64, purpose: u64) -> u64 {
    let mut z = base
        .wrapping_add(step.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(purpose.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A frozen collection of optimized states: enough to re-prepare every state
/// and reproduce the recorded subspace energy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubspaceCheckpoint {
    pub fixture: String,
    pub k: usize,
    pub n_spatial: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub cutoff: f64,
    /// Per-state flat parameter vectors (block-major, doubles then singles,
    /// lexicographic pairs).
    pub theta: Vec<Vec<f64>>,
    /// Subspace ground energy after each state was added.
    pub state_energies: Vec<f64>,
    pub final_energy: f64,
    /// Per-state count of optimizer restarts (0 or 1).
    pub retries: Vec<u8>,
}

impl SubspaceCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read checkpoint {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn states(&self) -> Result<Vec<StateVector>> {
        let reference = hf_reference(self.n_spatial, self.n_alpha, self.n_beta)?;
        self.theta
            .iter()
            .map(|flat| {
                let params = KUpCCGSDParameters::from_flat(self.k, self.n_spatial, flat)?;
                Ok(prepare(&params, &reference)?)
            })
            .collect()
    }

    /// Re-prepare every state and recompute the subspace energy; must equal
    /// `final_energy` to 1e-9 for a healthy checkpoint.
    pub fn replay(&self, hamiltonian: &QubitOperator) -> Result<f64> {
        let states = self.states()?;
        let (h, s) = matrix_elements_exact(&states, hamiltonian)?;
        let problem = SubspaceProblem::new(h, s, self.cutoff)?;
        Ok(solve_gevp(&problem)?.energy)
    }
}

pub struct GrowOutcome {
    pub checkpoint: SubspaceCheckpoint,
    pub fci_energy: f64,
    pub hf_energy: f64,
    pub total_calls: usize,
}

struct GrowthObjective<'a> {
    hamiltonian: &'a QubitOperator,
    reference: &'a [usize],
    template: &'a AnsatzTemplate,
    k: usize,
    n_spatial: usize,
    cutoff: f64,
    frozen: &'a [StateVector],
    h_block: &'a DMatrix<f64>,
    s_block: &'a DMatrix<f64>,
}

impl GrowthObjective<'_> {
    /// Subspace ground energy with the frozen states' matrix block reused and
    /// only the new state's row/column recomputed.
    fn energy(&self, flat: &[f64]) -> f64 {
        let Ok(params) = KUpCCGSDParameters::from_flat(self.k, self.n_spatial, flat) else {
            return f64::INFINITY;
        };
        let Ok(psi) = self.template.prepare(&params, self.reference) else {
            return f64::INFINITY;
        };
        let Ok(h_psi) = apply_operator(&psi, self.hamiltonian) else {
            return f64::INFINITY;
        };
        let m_new = self.frozen.len() + 1;
        let mut h = DMatrix::zeros(m_new, m_new);
        let mut s = DMatrix::zeros(m_new, m_new);
        h.view_mut((0, 0), (m_new - 1, m_new - 1))
            .copy_from(self.h_block);
        s.view_mut((0, 0), (m_new - 1, m_new - 1))
            .copy_from(self.s_block);
        for (i, frozen_state) in self.frozen.iter().enumerate() {
            let h_cross = frozen_state.inner_product(&h_psi).expect("sizes match").re;
            let s_cross = frozen_state.inner_product(&psi).expect("sizes match").re;
            h[(i, m_new - 1)] = h_cross;
            h[(m_new - 1, i)] = h_cross;
            s[(i, m_new - 1)] = s_cross;
            s[(m_new - 1, i)] = s_cross;
        }
        h[(m_new - 1, m_new - 1)] = psi.inner_product(&h_psi).expect("sizes match").re;
        s[(m_new - 1, m_new - 1)] = 1.0;
        let Ok(problem) = SubspaceProblem::from_real(&h, &s, self.cutoff) else {
            return f64::INFINITY;
        };
        match solve_gevp(&problem) {
            Ok(solution) => solution.energy,
            Err(_) => f64::INFINITY,
        }
    }
}

/// Grow the subspace one optimized state at a time: draw a random start,
/// minimize the subspace ground energy over the newest state's parameters
/// (all earlier states frozen), and append.
pub fn grow_subspace(config: &ExperimentConfig) -> Result<GrowOutcome> {
    if config.mode != Mode::ExactGrowth {
        bail!("grow_subspace requires exact-growth mode, got {}", config.mode);
    }
    let ctx = load_fixture(&config.fixture)?;
    let n_spatial = ctx.integrals.n_spatial();
    let init_std = config.init_sigma2.sqrt();
    let opts = OptimizeOptions {
        history: 10,
        grad_tol: 1e-6,
        max_calls: config.max_calls,
        fd_step: config.fd_step,
    };

    let hf_state = StateVector::prepare_basis(ctx.hamiltonian.n_qubits(), &ctx.reference)?;
    let hf_energy = expectation(&hf_state, &ctx.hamiltonian)?;
    let fci_energy = fci_oracle(&ctx.hamiltonian, Some(ctx.sector))?;

    let template = AnsatzTemplate::new(config.k, n_spatial);
    let mut master = ChaCha12Rng::seed_from_u64(config.seed);
    let mut frozen: Vec<StateVector> = Vec::new();
    let mut h_block: DMatrix<f64> = DMatrix::zeros(0, 0);
    let mut s_block: DMatrix<f64> = DMatrix::zeros(0, 0);
    let mut theta = Vec::new();
    let mut state_energies = Vec::new();
    let mut retries = Vec::new();
    let mut total_calls = 0;

    for m in 1..=config.m_max {
        let objective = GrowthObjective {
            hamiltonian: &ctx.hamiltonian,
            reference: &ctx.reference,
            template: &template,
            k: config.k,
            n_spatial,
            cutoff: config.cutoff,
            frozen: &frozen,
            h_block: &h_block,
            s_block: &s_block,
        };
        let mut retried = 0u8;
        let mut outcome = None;
        for attempt in 0..2 {
            let state_seed = master.random::<u64>();
            let mut state_rng = ChaCha12Rng::seed_from_u64(state_seed);
            let start =
                KUpCCGSDParameters::random(config.k, n_spatial, init_std, &mut state_rng);
            let result = minimize(&|x: &[f64]| objective.energy(x), start.flatten(), &opts);
            total_calls += result.calls;
            if !result.failed || attempt == 1 {
                // a failed retry is accepted as-is and recorded
                retried = attempt as u8;
                outcome = Some(result);
                break;
            }
            retried = 1;
        }
        let outcome = outcome.expect("optimizer ran");
        let energy = objective.energy(&outcome.x);
        let params = KUpCCGSDParameters::from_flat(config.k, n_spatial, &outcome.x)?;
        let psi = prepare(&params, &ctx.reference)?;
        let h_psi = apply_operator(&psi, &ctx.hamiltonian)?;

        // extend the frozen blocks with the accepted state's row/column
        let mut h_new = DMatrix::zeros(m, m);
        let mut s_new = DMatrix::zeros(m, m);
        h_new.view_mut((0, 0), (m - 1, m - 1)).copy_from(&h_block);
        s_new.view_mut((0, 0), (m - 1, m - 1)).copy_from(&s_block);
        for (i, frozen_state) in frozen.iter().enumerate() {
            let h_cross = frozen_state.inner_product(&h_psi)?.re;
            let s_cross = frozen_state.inner_product(&psi)?.re;
            h_new[(i, m - 1)] = h_cross;
            h_new[(m - 1, i)] = h_cross;
            s_new[(i, m - 1)] = s_cross;
            s_new[(m - 1, i)] = s_cross;
        }
        h_new[(m - 1, m - 1)] = psi.inner_product(&h_psi)?.re;
        s_new[(m - 1, m - 1)] = 1.0;
        h_block = h_new;
        s_block = s_new;
        frozen.push(psi);
        theta.push(outcome.x);
        state_energies.push(energy);
        retries.push(retried);
    }

    let final_energy = *state_energies.last().expect("m_max >= 1");
    let checkpoint = SubspaceCheckpoint {
        fixture: config.fixture.display().to_string(),
        k: config.k,
        n_spatial,
        n_alpha: ctx.integrals.n_alpha(),
        n_beta: ctx.integrals.n_beta(),
        cutoff: config.cutoff,
        theta,
        state_energies,
        final_energy,
        retries,
    };
    Ok(GrowOutcome {
        checkpoint,
        fci_energy,
        hf_energy,
        total_calls,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub total_shots: u64,
    pub channel: String,
    pub i: i64,
    pub j: i64,
    pub estimate_energy: f64,
    pub two_sigma: f64,
    pub sigma_mc: f64,
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from("step,total_shots,channel,i,j,estimate_energy,two_sigma,sigma_mc\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.step,
            row.total_shots,
            row.channel,
            row.i,
            row.j,
            row.estimate_energy,
            row.two_sigma,
            row.sigma_mc
        ));
    }
    out
}

#[derive(Debug)]
pub struct MeasurementOutcome {
    pub rows: Vec<TrajectoryRow>,
    pub fit: Option<ConvergenceFit>,
    pub checkpoint_energy: f64,
    pub final_estimate: f64,
    pub final_two_sigma: f64,
    /// κ of a standard single-state measurement under the same bound.
    pub kappa_vqe_reference: f64,
    pub warnings: Vec<String>,
}

/// Replay a checkpoint's states, then spend the shot budget on its matrix
/// elements with the configured scheduler, recording one trajectory row per
/// step.
pub fn run_measurement_experiment(
    config: &ExperimentConfig,
    checkpoint: &SubspaceCheckpoint,
) -> Result<MeasurementOutcome> {
    if !config.mode.is_measurement() {
        bail!(
            "run_measurement_experiment requires a measurement mode, got {}",
            config.mode
        );
    }
    let ctx = load_fixture(&config.fixture)?;
    let states = checkpoint.states()?;
    let subspace = states.len();
    let (h_c, s_c) = matrix_elements_exact(&states, &ctx.hamiltonian)?;
    let max_imag = h_c
        .iter()
        .chain(s_c.iter())
        .fold(0.0f64, |m, z| m.max(z.im.abs()));
    if max_imag > 1e-9 {
        bail!("checkpoint states produced complex matrix elements ({max_imag:.2e})");
    }
    let truth = TrueMatrices {
        h: h_c.map(|z| z.re),
        s: s_c.map(|z| z.re),
    };

    let mut warnings = Vec::new();
    for i in 0..subspace {
        for j in i + 1..subspace {
            if truth.s[(i, j)].abs() > config.max_overlap_warn {
                warnings.push(format!(
                    "overlap S[{i},{j}] = {:.6} exceeds {}; the subspace is nearly degenerate",
                    truth.s[(i, j)],
                    config.max_overlap_warn
                ));
            }
        }
    }

    let (mut sigma_h, mut sigma_s) = variance_bounds(&ctx.hamiltonian);
    if config.zero_noise {
        sigma_h = 0.0;
        sigma_s = 0.0;
    }
    let kappa_vqe_reference = sigma_h * sigma_h;
    let checkpoint_energy = solve_gevp(&SubspaceProblem::from_real(
        &truth.h,
        &truth.s,
        config.cutoff,
    )?)?
    .energy;

    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(config.seed, 0, 0));
    let mut ledger =
        MeasurementLedger::new_pilot(&truth, sigma_h, sigma_s, config.batch, &mut rng)?;
    let n_elements = ledger.element_keys().len() as u64;
    if ledger.total_shots() > config.budget {
        bail!(
            "budget {} is smaller than the pilot cost {} ({} elements x batch {})",
            config.budget,
            ledger.total_shots(),
            n_elements,
            config.batch
        );
    }

    let mut rows = Vec::new();
    let record_row = |ledger: &MeasurementLedger,
                          step: usize,
                          channel: String,
                          i: i64,
                          j: i64|
     -> Result<TrajectoryRow> {
        let (h_mean, s_mean) = ledger.mean_matrices();
        let estimate_energy = solve_gevp(&SubspaceProblem::from_real(
            &h_mean,
            &s_mean,
            config.cutoff,
        )?)?
        .energy;
        let (_, two_sigma) = bootstrap_errorbar(
            ledger,
            derive_seed(config.seed, step as u64, 1),
            config.n_boot,
            config.cutoff,
        )?;
        let draws = NoiseDraws::generate(
            subspace,
            config.mc_samples,
            derive_seed(config.seed, step as u64, 2),
        );
        let samples = sample_energies(ledger, &draws, config.cutoff)?;
        let sigma = sigma_mc(&samples.energies)?;
        Ok(TrajectoryRow {
            step,
            total_shots: ledger.total_shots(),
            channel,
            i,
            j,
            estimate_energy,
            two_sigma,
            sigma_mc: sigma,
        })
    };

    rows.push(record_row(&ledger, 0, "pilot".into(), -1, -1)?);
    let mut step = 0usize;
    loop {
        let step_cost = match config.mode {
            Mode::MeasurementAdaptive => config.batch,
            Mode::MeasurementNonadaptive => n_elements * config.batch,
            Mode::ExactGrowth => unreachable!(),
        };
        if ledger.total_shots() + step_cost > config.budget {
            break;
        }
        step += 1;
        let row = match config.mode {
            Mode::MeasurementAdaptive => {
                let draws = NoiseDraws::generate(
                    subspace,
                    config.mc_samples,
                    derive_seed(config.seed, step as u64, 3),
                );
                let chosen = adaptive_step(
                    &mut ledger,
                    &draws,
                    config.batch,
                    &truth,
                    config.cutoff,
                    &mut rng,
                )?;
                record_row(
                    &ledger,
                    step,
                    chosen.channel.to_string(),
                    chosen.i as i64,
                    chosen.j as i64,
                )?
            }
            Mode::MeasurementNonadaptive => {
                nonadaptive_step(&mut ledger, config.batch, &truth, &mut rng)?;
                record_row(&ledger, step, "all".into(), -1, -1)?
            }
            Mode::ExactGrowth => unreachable!(),
        };
        rows.push(row);
    }

    // κ/N fit over the last half of the trajectory
    let fit = if rows.len() >= 7 {
        let mid = rows[rows.len() / 2].total_shots as f64;
        let end = rows.last().expect("nonempty").total_shots as f64;
        let points: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (r.total_shots as f64, r.sigma_mc * r.sigma_mc))
            .collect();
        fit_kappa(&points, (mid, end)).ok()
    } else {
        None
    };

    let last = rows.last().expect("at least the pilot row");
    Ok(MeasurementOutcome {
        checkpoint_energy,
        final_estimate: last.estimate_energy,
        final_two_sigma: last.two_sigma,
        kappa_vqe_reference,
        rows,
        fit,
        warnings,
    })
}

/// Ground energy of the fixture's particle/Sz sector (the `fci` subcommand).
pub fn fci_command(path: &Path, sector_override: Option<Sector>) -> Result<f64> {
    let ctx = load_fixture(path)?;
    let sector = sector_override.unwrap_or(ctx.sector);
    fci_oracle(&ctx.hamiltonian, Some(sector)).map_err(|e| anyhow!(e))
}
