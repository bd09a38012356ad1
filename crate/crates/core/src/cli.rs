//! Command-line front end: config loading, `run`, `sweep` and `verify`.
//!
//! Exit codes: 0 on success, 1 for invalid input (config, flags, I/O),
//! 2 when an internal check fails (energy causality, allocator feasibility,
//! or an exact/exhaustive solver mismatch).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::allocator::{self, random_problem};
use crate::config::{ConfigError, ConfigFile, NetworkConfig, Scheme};
use crate::sim::{self, SimError, SimResult, SweepParam, SweepRow};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Significant digits written for real-valued CSV fields.
const SIGNIFICANT_DIGITS: i32 = 12;

#[derive(Debug, Parser)]
#[command(name = "ehs-secrecy", version, about = "Secure slot allocation for energy-harvesting sensors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scheme and write per-frame and summary CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scheme named in the config.
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Sweep the rate or the eavesdropper scale for several schemes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `rate` or `sigma_beta`.
        #[arg(long)]
        param: String,
        /// Comma-separated grid values.
        #[arg(long)]
        grid: String,
        /// Comma-separated schemes.
        #[arg(long, default_value = "proposed,fpas,fpfs,apfs")]
        schemes: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the exact allocator against exhaustive search on random instances.
    Verify {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Args(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{mismatches} of {instances} verify instances disagree; first failing instance seed {first_seed}")]
    OracleMismatch {
        instances: usize,
        mismatches: usize,
        first_seed: u64,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Sim(e) if e.is_internal() => 2,
            CliError::OracleMismatch { .. } => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads, unit-converts and validates a JSON config file.
pub fn load_config(path: &Path) -> Result<NetworkConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    NetworkConfig::from_json(&text)
}

/// Decimal rendering with [`SIGNIFICANT_DIGITS`] significant digits.
pub fn format_decimal(x: f64) -> String {
    let magnitude = if x == 0.0 || !x.is_finite() {
        0
    } else {
        x.abs().log10().floor() as i32
    };
    let decimals = (SIGNIFICANT_DIGITS - 1 - magnitude).clamp(1, 60) as usize;
    format!("{x:.decimals$}")
}

/// Everything needed to reproduce an output directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub master_seed: u64,
    pub config: ConfigFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    pub wall_clock_s: f64,
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct SweepSpec {
    pub param: String,
    pub grid: Vec<f64>,
    pub schemes: Vec<Scheme>,
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<PathBuf, CliError> {
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(path)
}

pub fn write_per_frame_csv(path: &Path, result: &SimResult) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["frame", "sensor", "packets", "battery_j"])?;
    for (f, record) in result.frames.iter().enumerate() {
        for (k, &battery) in record.end_battery.iter().enumerate() {
            w.write_record([
                (f + 1).to_string(),
                (k + 1).to_string(),
                result.per_frame_packets[f][k].to_string(),
                format_decimal(battery),
            ])?;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, results: &[&SimResult]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scheme", "avg_sum_throughput_bps_hz"])?;
    for r in results {
        w.write_record([r.scheme.to_string(), format_decimal(r.avg_sum_throughput)])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scheme", "param", "value", "avg_sum_throughput_bps_hz"])?;
    for row in rows {
        w.write_record([
            row.scheme.to_string(),
            row.param.to_string(),
            format_decimal(row.value),
            format_decimal(row.avg_sum_throughput),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn parse_list<T, E: std::fmt::Display>(
    flag: &str,
    list: &str,
    parse: impl Fn(&str) -> Result<T, E>,
) -> Result<Vec<T>, CliError> {
    let items = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).map_err(|e| CliError::Args(format!("--{flag}: `{s}`: {e}"))))
        .collect::<Result<Vec<T>, _>>()?;
    if items.is_empty() {
        return Err(CliError::Args(format!("--{flag} is empty")));
    }
    Ok(items)
}

fn prepare_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io_err(out))
}

#[derive(Debug)]
pub struct RunReport {
    pub result: SimResult,
    pub outputs: Vec<PathBuf>,
}

pub fn cmd_run(config_path: &Path, out: &Path, scheme: Option<&str>) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let mut config = load_config(config_path)?;
    if let Some(name) = scheme {
        let scheme: Scheme = name.parse()?;
        config.validate_scheme(scheme)?;
        config.scheme = scheme;
    }
    let result = sim::run(&config)?;
    prepare_out(out)?;
    let per_frame = out.join("per_frame.csv");
    let summary = out.join("summary.csv");
    write_per_frame_csv(&per_frame, &result)?;
    write_summary_csv(&summary, &[&result])?;
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        command: "run".into(),
        master_seed: config.master_seed,
        config: config.to_file(),
        sweep: None,
        wall_clock_s: started.elapsed().as_secs_f64(),
        outputs: vec![per_frame.display().to_string(), summary.display().to_string()],
    };
    let manifest_path = write_manifest(out, &manifest)?;
    Ok(RunReport {
        result,
        outputs: vec![per_frame, summary, manifest_path],
    })
}

#[derive(Debug)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub outputs: Vec<PathBuf>,
}

pub fn cmd_sweep(config_path: &Path, param: &str, grid: &str, schemes: &str, out: &Path) -> Result<SweepReport, CliError> {
    let started = Instant::now();
    let config = load_config(config_path)?;
    let param: SweepParam = param.parse()?;
    let grid = parse_list("grid", grid, str::parse::<f64>)?;
    let schemes = parse_list("schemes", schemes, str::parse::<Scheme>)?;
    for &s in &schemes {
        config.validate_scheme(s)?;
    }
    for &v in &grid {
        param.apply(&config, v).validate()?;
    }
    let rows = sim::run_sweep(&config, param, &grid, &schemes)?;
    prepare_out(out)?;
    let sweep = out.join("sweep.csv");
    write_sweep_csv(&sweep, &rows)?;
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        command: "sweep".into(),
        master_seed: config.master_seed,
        config: config.to_file(),
        sweep: Some(SweepSpec {
            param: param.to_string(),
            grid,
            schemes,
        }),
        wall_clock_s: started.elapsed().as_secs_f64(),
        outputs: vec![sweep.display().to_string()],
    };
    let manifest_path = write_manifest(out, &manifest)?;
    Ok(SweepReport {
        rows,
        outputs: vec![sweep, manifest_path],
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyFailure {
    /// Replays this instance alone: `verify --instances 1 --seed <seed>`.
    pub seed: u64,
    pub n_sensors: usize,
    pub n_slots: usize,
    pub exact: u32,
    pub bruteforce: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub instances: usize,
    pub failures: Vec<VerifyFailure>,
}

/// Instance `i` is drawn from seed `seed + i`, with 1..=3 sensors and
/// 1..=6 slots.
pub fn cmd_verify(instances: usize, seed: u64) -> VerifyReport {
    let mut failures = Vec::new();
    for i in 0..instances as u64 {
        let instance_seed = seed.wrapping_add(i);
        let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
        let n_sensors = rng.gen_range(1..=3);
        let n_slots = rng.gen_range(1..=6);
        let problem = random_problem(&mut rng, n_sensors, n_slots);
        let exact = allocator::solve_exact(&problem);
        let brute = allocator::solve_bruteforce(&problem).expect("instance within enumeration bound");
        let feasible = allocator::validate(&problem, &exact).is_ok() && allocator::validate(&problem, &brute).is_ok();
        if !feasible || exact != brute {
            failures.push(VerifyFailure {
                seed: instance_seed,
                n_sensors,
                n_slots,
                exact: exact.objective_slots(),
                bruteforce: brute.objective_slots(),
            });
        }
    }
    VerifyReport { instances, failures }
}

/// Dispatches a parsed command line; returns the lines to print.
pub fn execute(cli: &Cli) -> Result<Vec<String>, CliError> {
    match &cli.command {
        Command::Run { config, out, scheme } => {
            let report = cmd_run(config, out, scheme.as_deref())?;
            let mut lines = vec![format!(
                "{}: avg secrecy sum-throughput {} bits/s/Hz over {} frames",
                report.result.scheme,
                format_decimal(report.result.avg_sum_throughput),
                report.result.per_frame_packets.len()
            )];
            lines.extend(report.outputs.iter().map(|p| format!("wrote {}", p.display())));
            Ok(lines)
        }
        Command::Sweep {
            config,
            param,
            grid,
            schemes,
            out,
        } => {
            let report = cmd_sweep(config, param, grid, schemes, out)?;
            let mut lines: Vec<String> = report
                .rows
                .iter()
                .map(|r| format!("{:<8} {}={:<8} {}", r.scheme, r.param, r.value, format_decimal(r.avg_sum_throughput)))
                .collect();
            lines.extend(report.outputs.iter().map(|p| format!("wrote {}", p.display())));
            Ok(lines)
        }
        Command::Verify { instances, seed } => {
            let report = cmd_verify(*instances, *seed);
            let mut lines: Vec<String> = report
                .failures
                .iter()
                .map(|f| {
                    format!(
                        "MISMATCH seed {} ({}x{}): exact {} vs exhaustive {}",
                        f.seed, f.n_sensors, f.n_slots, f.exact, f.bruteforce
                    )
                })
                .collect();
            if let Some(first) = report.failures.first() {
                for line in &lines {
                    eprintln!("{line}");
                }
                return Err(CliError::OracleMismatch {
                    instances: report.instances,
                    mismatches: report.failures.len(),
                    first_seed: first.seed,
                });
            }
            lines.push(format!("verify: {} instances, exact allocator matches exhaustive search", report.instances));
            Ok(lines)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_formatting() {
        assert_eq!(format_decimal(0.5), "0.500000000000");
        assert_eq!(format_decimal(3.0), "3.00000000000");
        assert_eq!(format_decimal(0.0), "0.00000000000");
        assert_eq!(format_decimal(0.0123), "0.0123000000000");
        assert_eq!(format_decimal(1234.5), "1234.50000000");
    }

    #[test]
    fn verify_passes() {
        let report = cmd_verify(50, 11);
        assert_eq!(report.instances, 50);
        assert!(report.failures.is_empty());
    }

    #[test]
    fn list_parsing() {
        let grid = parse_list("grid", "1, 2.5,3", str::parse::<f64>).unwrap();
        assert_eq!(grid, vec![1.0, 2.5, 3.0]);
        assert!(parse_list("grid", "1,x", str::parse::<f64>).is_err());
        assert!(parse_list("grid", "", str::parse::<f64>).is_err());
    }
}
