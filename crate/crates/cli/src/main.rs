//! `novqe` — subspace-expansion eigensolver experiments from the command
//! line. Subcommands: `grow` (optimize a growing subspace on a fixture),
//! `measure` (replay a checkpoint and run a measurement-scheduling
//! trajectory), `fci` (exact sector ground energy), `info` (fixture facts).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use novqe_cli::config::{ConfigOverlay, ExperimentConfig, Mode};
use novqe_cli::experiment::{
    fci_command, grow_subspace, load_fixture, run_measurement_experiment, SubspaceCheckpoint,
};
use novqe_cli::output::{write_grow_outputs, write_measure_outputs};
use novqe_core::hamiltonian::Sector;
use novqe_core::simulator::{expectation, StateVector};

#[derive(Parser)]
#[command(name = "novqe", version, about = "Non-orthogonal subspace VQE simulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a growing collection of ansatz states and write a checkpoint
    Grow(RunArgs),
    /// Replay a checkpoint and run an adaptive or non-adaptive measurement
    /// trajectory against its exact matrix elements
    Measure(RunArgs),
    /// Print the exact ground energy of a fixture's particle/Sz sector
    Fci {
        fixture: PathBuf,
        /// Override the electron count (defaults to the fixture header)
        #[arg(long)]
        n_electrons: Option<usize>,
        /// Override twice the Sz value (defaults to the fixture header)
        #[arg(long)]
        sz2: Option<i64>,
    },
    /// Print fixture facts: sizes, norms and reference energies
    Info { fixture: PathBuf },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// key = value configuration file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for checkpoint.json / trajectory.csv / summary.json
    #[arg(long)]
    out: PathBuf,
    /// RNG seed (required, possibly via the config file)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// grow | adaptive | nonadaptive (long forms accepted)
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "m-max")]
    m_max: Option<usize>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    batch: Option<u64>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long = "init-sigma2")]
    init_sigma2: Option<f64>,
    #[arg(long = "fd-step")]
    fd_step: Option<f64>,
    #[arg(long = "max-calls")]
    max_calls: Option<usize>,
    #[arg(long = "n-boot")]
    n_boot: Option<usize>,
    #[arg(long = "mc-samples")]
    mc_samples: Option<usize>,
    /// Force both intrinsic sigmas to zero
    #[arg(long = "zero-noise")]
    zero_noise: bool,
}

impl RunArgs {
    fn resolve(&self, default_mode: Mode) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(path) => ConfigOverlay::from_file(path)?,
            None => ConfigOverlay::default(),
        };
        let mut flags = ConfigOverlay {
            fixture: self.fixture.clone(),
            seed: self.seed,
            k: self.k,
            m_max: self.m_max,
            budget: self.budget,
            batch: self.batch,
            cutoff: self.cutoff,
            checkpoint: self.checkpoint.clone(),
            init_sigma2: self.init_sigma2,
            fd_step: self.fd_step,
            max_calls: self.max_calls,
            n_boot: self.n_boot,
            mc_samples: self.mc_samples,
            zero_noise: if self.zero_noise { Some(true) } else { None },
            ..Default::default()
        };
        if let Some(mode) = &self.mode {
            flags.mode = Some(Mode::parse(mode)?);
        }
        let mut merged = flags.over(file);
        if merged.mode.is_none() {
            merged.mode = Some(default_mode);
        }
        merged.finalize()
    }
}

fn run_grow(args: &RunArgs) -> Result<()> {
    let config = args.resolve(Mode::ExactGrowth).map_err(usage)?;
    if config.mode != Mode::ExactGrowth {
        return Err(usage(anyhow::anyhow!(
            "the grow subcommand requires mode exact-growth, got {}",
            config.mode
        )));
    }
    let outcome = grow_subspace(&config)?;
    write_grow_outputs(&args.out, &config, &outcome)?;
    println!(
        "grow: M = {} states, final energy = {:.9} Ha, FCI = {:.9} Ha, error = {:.3e} Ha",
        outcome.checkpoint.theta.len(),
        outcome.checkpoint.final_energy,
        outcome.fci_energy,
        outcome.checkpoint.final_energy - outcome.fci_energy
    );
    println!("outputs in {}", args.out.display());
    Ok(())
}

fn run_measure(args: &RunArgs) -> Result<()> {
    let config = args.resolve(Mode::MeasurementAdaptive).map_err(usage)?;
    if !config.mode.is_measurement() {
        return Err(usage(anyhow::anyhow!(
            "the measure subcommand requires a measurement mode, got {}",
            config.mode
        )));
    }
    let checkpoint_path = config.checkpoint.clone().expect("validated by finalize()");
    let checkpoint = SubspaceCheckpoint::load(&checkpoint_path)?;
    let outcome = run_measurement_experiment(&config, &checkpoint)?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    write_measure_outputs(&args.out, &config, &outcome)?;
    println!(
        "measure ({}): {} steps, final estimate = {:.9} ± {:.3e} Ha (checkpoint {:.9} Ha)",
        config.mode,
        outcome.rows.len() - 1,
        outcome.final_estimate,
        outcome.final_two_sigma,
        outcome.checkpoint_energy
    );
    if let Some(fit) = &outcome.fit {
        println!(
            "kappa = {:.6e} Eh^2 (residual {:.3e}, window {:.3e}..{:.3e} shots)",
            fit.kappa, fit.residual, fit.window.0, fit.window.1
        );
    }
    println!("outputs in {}", args.out.display());
    Ok(())
}

fn run_fci(fixture: &PathBuf, n_electrons: Option<usize>, sz2: Option<i64>) -> Result<()> {
    let sector = match (n_electrons, sz2) {
        (None, None) => None,
        (n, s) => {
            let ctx = load_fixture(fixture)?;
            let base = ctx.sector;
            Some(Sector {
                n_electrons: n.unwrap_or(base.n_electrons),
                sz_twice: Some(s.unwrap_or(base.sz_twice.unwrap_or(0))),
            })
        }
    };
    let energy = fci_command(fixture, sector)?;
    println!("{energy:.12}");
    Ok(())
}

fn run_info(fixture: &PathBuf) -> Result<()> {
    let ctx = load_fixture(fixture)?;
    let ints = &ctx.integrals;
    let hf_state = StateVector::prepare_basis(ctx.hamiltonian.n_qubits(), &ctx.reference)?;
    let hf_energy = expectation(&hf_state, &ctx.hamiltonian)?;
    println!("fixture: {}", fixture.display());
    println!("spatial orbitals: {}", ints.n_spatial());
    println!("electrons: {} alpha, {} beta", ints.n_alpha(), ints.n_beta());
    println!("qubits: {}", ctx.hamiltonian.n_qubits());
    println!("nuclear repulsion: {:.12} Ha", ints.e_nuclear());
    println!("pauli terms: {}", ctx.hamiltonian.len());
    println!("coefficient 1-norm: {:.12} Ha", ctx.hamiltonian.one_norm());
    println!("reference occupation: {:?}", ctx.reference);
    println!("reference energy: {:.12} Ha", hf_energy);
    Ok(())
}

/// Marker for configuration/usage failures (exit code 2).
#[derive(Debug)]
struct UsageError(anyhow::Error);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(UsageError(e))
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Grow(args) => run_grow(args),
        Command::Measure(args) => run_measure(args),
        Command::Fci {
            fixture,
            n_electrons,
            sz2,
        } => run_fci(fixture, *n_electrons, *sz2),
        Command::Info { fixture } => run_info(fixture),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // usage errors exit with code 2
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
