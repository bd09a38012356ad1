//! Frame-by-frame Monte Carlo simulation.
//!
//! Each frame draws fresh channels, prices and constrains the slot problem
//! for the scheme in force, allocates, and runs the battery recursion. The
//! battery left at the end of a frame opens the next one. Channel draws
//! depend only on `(master_seed, frame)`, so runs of different schemes or
//! parameter values with one seed see identical fading.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::allocator::{self, AllocError, Assignment};
use crate::channel::{draw_channels, LinkModel};
use crate::config::{ConfigError, NetworkConfig, Scheme};
use crate::energy::{self, build_schedule, EnergyError, EnergyState};
use crate::rng::{self, Link, Purpose};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("frame {frame} ({scheme}): {source}")]
    Energy {
        frame: u64,
        scheme: Scheme,
        #[source]
        source: EnergyError,
    },
    #[error("frame {frame} ({scheme}): infeasible assignment: {source}")]
    Alloc {
        frame: u64,
        scheme: Scheme,
        #[source]
        source: AllocError,
    },
    #[error("unknown sweep parameter `{0}` (expected rate or sigma_beta)")]
    UnknownParam(String),
    #[error("sweep grid is empty")]
    EmptyGrid,
}

impl SimError {
    /// Errors that point at a bug rather than at the input.
    pub fn is_internal(&self) -> bool {
        matches!(self, SimError::Energy { .. } | SimError::Alloc { .. })
    }
}

/// What happened in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub start_battery: Vec<f64>,
    /// CSI/beacon eligibility (`delta`).
    pub delta: Vec<bool>,
    /// Slot eligibility: `delta`, secrecy feasibility and a non-empty battery.
    pub eligible: Vec<bool>,
    pub per_slot_cost: Vec<f64>,
    pub assignment: Assignment,
    pub end_battery: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub scheme: Scheme,
    /// `packets[frame][sensor]`.
    pub per_frame_packets: Vec<Vec<u32>>,
    /// `(R / T_f) * sum_k packets`, bits/sec/Hz.
    pub per_frame_throughput: Vec<f64>,
    /// `(R / (T_f F)) * sum over frames and sensors of packets`.
    pub avg_sum_throughput: f64,
    pub final_batteries: Vec<f64>,
    pub frames: Vec<FrameRecord>,
}

impl SimResult {
    pub fn total_packets(&self) -> u64 {
        self.per_frame_packets.iter().flatten().map(|&p| p as u64).sum()
    }
}

/// Runs `config.scheme` for `config.n_frames` frames.
pub fn run(config: &NetworkConfig) -> Result<SimResult, SimError> {
    run_with_link(config, LinkModel::Wiretap)
}

pub fn run_with_link(config: &NetworkConfig, link: LinkModel) -> Result<SimResult, SimError> {
    config.validate()?;
    let scheme = config.scheme;
    let schedule = build_schedule(config).map_err(|source| SimError::Energy {
        frame: 0,
        scheme,
        source,
    })?;
    let n_sensors = config.n_sensors;
    let slot_rate = config.rate / config.frame_duration_s();

    let mut battery = vec![config.initial_battery_j; n_sensors];
    let mut per_frame_packets = Vec::with_capacity(config.n_frames);
    let mut per_frame_throughput = Vec::with_capacity(config.n_frames);
    let mut frames = Vec::with_capacity(config.n_frames);
    let mut total_packets: u64 = 0;

    for frame in 1..=config.n_frames as u64 {
        let channels = draw_channels(config, frame);
        let state = EnergyState::open_frame(battery.clone(), &schedule, &config.comm_energy_j);
        let problem = allocator::build_problem_with(&channels, &state, &schedule, config, scheme, link);
        let assignment = match scheme {
            Scheme::Proposed => allocator::solve_exact(&problem),
            Scheme::Fpas => {
                let lottery = rng::stream(config.master_seed, Purpose::SlotLottery, frame, 0, Link::Legitimate);
                allocator::assign_probabilistic(&problem, lottery)
            }
            Scheme::Fpfs | Scheme::Apfs => {
                let slot_map = config
                    .fixed_slots
                    .as_deref()
                    .expect("validated config carries fixed_slots");
                allocator::assign_fixed_slots(&problem, slot_map)
                    .map_err(|source| SimError::Alloc { frame, scheme, source })?
            }
        };
        allocator::validate(&problem, &assignment).map_err(|source| SimError::Alloc { frame, scheme, source })?;

        let priced = state.clone().with_costs(problem.per_slot_cost.clone());
        let outcome =
            energy::step_frame(&priced, &schedule, &assignment).map_err(|source| SimError::Energy { frame, scheme, source })?;

        let packets: Vec<u32> = (0..n_sensors).map(|k| assignment.packets(k)).collect();
        let frame_total = assignment.objective_slots();
        total_packets += frame_total as u64;
        per_frame_throughput.push(slot_rate * frame_total as f64);
        per_frame_packets.push(packets);
        frames.push(FrameRecord {
            start_battery: battery,
            delta: state.eligible,
            eligible: problem.eligible,
            per_slot_cost: problem.per_slot_cost,
            assignment,
            end_battery: outcome.next_battery.clone(),
        });
        battery = outcome.next_battery;
    }

    let avg_sum_throughput = config.rate * total_packets as f64 / (config.frame_duration_s() * config.n_frames as f64);
    Ok(SimResult {
        scheme,
        per_frame_packets,
        per_frame_throughput,
        avg_sum_throughput,
        final_batteries: battery,
        frames,
    })
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Rate,
    SigmaBeta,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Rate => "rate",
            SweepParam::SigmaBeta => "sigma_beta",
        }
    }

    pub fn apply(self, config: &NetworkConfig, value: f64) -> NetworkConfig {
        let mut out = config.clone();
        match self {
            SweepParam::Rate => out.rate = value,
            SweepParam::SigmaBeta => out.sigma_beta = value,
        }
        out
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "rate" => Ok(SweepParam::Rate),
            "sigma_beta" => Ok(SweepParam::SigmaBeta),
            other => Err(SimError::UnknownParam(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub param: SweepParam,
    pub value: f64,
    pub avg_sum_throughput: f64,
}

/// One [`run`] per `(scheme, value)`, all on `config.master_seed`. Rows are
/// ordered by scheme (as given), then grid value. Runs execute in parallel;
/// the result does not depend on scheduling.
pub fn run_sweep(
    config: &NetworkConfig,
    param: SweepParam,
    grid: &[f64],
    schemes: &[Scheme],
) -> Result<Vec<SweepRow>, SimError> {
    if grid.is_empty() {
        return Err(SimError::EmptyGrid);
    }
    let points: Vec<(Scheme, f64)> = schemes
        .iter()
        .flat_map(|&s| grid.iter().map(move |&v| (s, v)))
        .collect();
    points
        .par_iter()
        .map(|&(scheme, value)| {
            let point = param.apply(&config.with_scheme(scheme), value);
            run(&point).map(|r| SweepRow {
                scheme,
                param,
                value,
                avg_sum_throughput: r.avg_sum_throughput,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(scheme: Scheme) -> NetworkConfig {
        NetworkConfig {
            n_frames: 200,
            scheme,
            ..NetworkConfig::reference()
        }
    }

    #[test]
    fn throughput_bookkeeping() {
        for scheme in Scheme::ALL {
            let config = short(scheme);
            let r = run(&config).unwrap();
            let mean = r.per_frame_throughput.iter().sum::<f64>() / r.per_frame_throughput.len() as f64;
            assert!((mean - r.avg_sum_throughput).abs() <= 1e-12 * r.avg_sum_throughput.max(1e-300));
            let ceiling = config.rate * config.n_slots as f64 / config.frame_duration_s();
            assert!(r.per_frame_throughput.iter().all(|&t| (0.0..=ceiling).contains(&t)));
            assert!(r.final_batteries.iter().all(|&b| b >= 0.0));
        }
    }

    #[test]
    fn vanishing_legitimate_gain_gives_zero_throughput() {
        let config = NetworkConfig {
            sigma_alpha: 1e-200,
            ..short(Scheme::Proposed)
        };
        assert_eq!(run(&config).unwrap().avg_sum_throughput, 0.0);
    }

    #[test]
    fn runs_are_deterministic() {
        let config = short(Scheme::Fpas);
        assert_eq!(run(&config).unwrap(), run(&config).unwrap());
    }

    #[test]
    fn batteries_carry_over() {
        let r = run(&short(Scheme::Proposed)).unwrap();
        for pair in r.frames.windows(2) {
            assert_eq!(pair[0].end_battery, pair[1].start_battery);
        }
        assert_eq!(r.frames[0].start_battery, vec![0.11; 3]);
    }

    #[test]
    fn single_point_sweep_matches_run() {
        let config = short(Scheme::Proposed);
        let rows = run_sweep(&config, SweepParam::Rate, &[3.0], &Scheme::ALL).unwrap();
        assert_eq!(rows.len(), 4);
        for row in rows {
            let direct = run(&SweepParam::Rate.apply(&config.with_scheme(row.scheme), 3.0)).unwrap();
            assert_eq!(row.avg_sum_throughput, direct.avg_sum_throughput);
        }
    }

    #[test]
    fn sweep_rejects_bad_input() {
        assert!(matches!("power".parse::<SweepParam>(), Err(SimError::UnknownParam(_))));
        let config = short(Scheme::Proposed);
        assert!(matches!(run_sweep(&config, SweepParam::Rate, &[], &[Scheme::Proposed]), Err(SimError::EmptyGrid)));
    }

    #[test]
    fn no_eavesdropper_equals_outage_only() {
        let config = NetworkConfig {
            sigma_beta: 0.0,
            rate: 3.0,
            ..short(Scheme::Proposed)
        };
        for scheme in Scheme::ALL {
            let c = config.with_scheme(scheme);
            let wiretap = run(&c).unwrap();
            let outage = run_with_link(&c, LinkModel::OutageOnly).unwrap();
            assert_eq!(wiretap.per_frame_packets, outage.per_frame_packets);
            assert!((wiretap.avg_sum_throughput - outage.avg_sum_throughput).abs() <= 1e-12);
        }
    }
}
