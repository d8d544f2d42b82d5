//! Experiment output files: `checkpoint.json`, `trajectory.csv` and
//! `summary.json` under the chosen output directory. Identical configs and
//! seeds reproduce the checkpoint and trajectory byte-for-byte; the summary
//! additionally carries a wall-clock timestamp.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::experiment::{trajectory_csv, GrowOutcome, MeasurementOutcome};

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    config: &'a ExperimentConfig,
    results: serde_json::Value,
    generated_at_unix: u64,
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_summary(
    out_dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    results: serde_json::Value,
) -> Result<()> {
    let summary = Summary {
        command,
        config,
        results,
        generated_at_unix: timestamp(),
    };
    let path = out_dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_grow_outputs(
    out_dir: &Path,
    config: &ExperimentConfig,
    outcome: &GrowOutcome,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    outcome.checkpoint.save(&out_dir.join("checkpoint.json"))?;
    let results = json!({
        "final_energy": outcome.checkpoint.final_energy,
        "state_energies": outcome.checkpoint.state_energies,
        "hf_energy": outcome.hf_energy,
        "fci_energy": outcome.fci_energy,
        "error_vs_fci": outcome.checkpoint.final_energy - outcome.fci_energy,
        "objective_calls": outcome.total_calls,
        "retries": outcome.checkpoint.retries,
    });
    write_summary(out_dir, "grow", config, results)
}

pub fn write_measure_outputs(
    out_dir: &Path,
    config: &ExperimentConfig,
    outcome: &MeasurementOutcome,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let csv_path = out_dir.join("trajectory.csv");
    std::fs::write(&csv_path, trajectory_csv(&outcome.rows))
        .with_context(|| format!("writing {}", csv_path.display()))?;
    let results = json!({
        "checkpoint_energy": outcome.checkpoint_energy,
        "final_estimate": outcome.final_estimate,
        "final_two_sigma": outcome.final_two_sigma,
        "steps": outcome.rows.len() - 1,
        "total_shots": outcome.rows.last().map(|r| r.total_shots).unwrap_or(0),
        "kappa": outcome.fit.as_ref().map(|f| f.kappa),
        "kappa_fit_window": outcome.fit.as_ref().map(|f| f.window),
        "kappa_fit_residual": outcome.fit.as_ref().map(|f| f.residual),
        "kappa_vqe_reference": outcome.kappa_vqe_reference,
        "warnings": outcome.warnings,
    });
    write_summary(out_dir, "measure", config, results)
}
