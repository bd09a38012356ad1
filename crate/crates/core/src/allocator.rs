//! Per-frame slot assignment.
//!
//! Every frame the destination picks a binary sensor-by-slot matrix `Gamma`
//! maximizing the number of secure packets, subject to one sensor per slot,
//! energy causality (as integer prefix quotas) and eligibility. All packets
//! carry the same `R` bits, so this is a maximum-cardinality assignment
//! under nested prefix caps, which [`solve_exact`] solves as a max-flow:
//!
//! ```text
//! source -> u[k][T] -> u[k][T-1] -> ... -> u[k][1]      (edge into u[k][l] has capacity quota[k][l])
//!           u[k][l] -> slot l -> sink                    (capacity 1)
//! ```
//!
//! Flow reaching slots `1..=l` from sensor `k` must cross the edge into
//! `u[k][l]`, so the prefix caps hold exactly.
//!
//! Among optimal matrices the solvers return the lexicographically greatest
//! in row-major order: lowest sensor index first, then earliest slot.

use rand::Rng;
use thiserror::Error;

use crate::channel::{ChannelRealization, LinkModel};
use crate::config::{NetworkConfig, Scheme};
use crate::energy::{slot_quotas, EnergyState, HarvestSchedule};
use crate::flow::FlowGraph;

/// Largest `M * T` accepted by [`solve_bruteforce`].
pub const BRUTEFORCE_LIMIT: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AllocError {
    #[error("instance too large for exhaustive search: {n_sensors} x {n_slots} > {BRUTEFORCE_LIMIT}")]
    TooLarge { n_sensors: usize, n_slots: usize },
    #[error("assignment is {got_sensors}x{got_slots}, problem is {n_sensors}x{n_slots}")]
    Shape {
        n_sensors: usize,
        n_slots: usize,
        got_sensors: usize,
        got_slots: usize,
    },
    #[error("slot {slot} is assigned to more than one sensor")]
    Exclusivity { slot: usize },
    #[error("sensor {sensor} is ineligible but holds slots")]
    Ineligible { sensor: usize },
    #[error("sensor {sensor} uses {used} slots up to slot {slot}, quota is {quota}")]
    Quota {
        sensor: usize,
        slot: usize,
        used: u32,
        quota: u32,
    },
    #[error("fixed slot map: {0}")]
    SlotMap(String),
}

/// Binary sensor-by-slot assignment for one frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    gamma: Vec<Vec<bool>>,
    objective_slots: u32,
}

impl Assignment {
    pub fn empty(n_sensors: usize, n_slots: usize) -> Self {
        Assignment {
            gamma: vec![vec![false; n_slots]; n_sensors],
            objective_slots: 0,
        }
    }

    pub fn from_gamma(gamma: Vec<Vec<bool>>) -> Self {
        let objective_slots = gamma.iter().flatten().filter(|&&g| g).count() as u32;
        Assignment {
            gamma,
            objective_slots,
        }
    }

    fn set(&mut self, sensor: usize, slot: usize) {
        if !std::mem::replace(&mut self.gamma[sensor][slot], true) {
            self.objective_slots += 1;
        }
    }

    pub fn gamma(&self) -> &[Vec<bool>] {
        &self.gamma
    }

    pub fn row(&self, sensor: usize) -> &[bool] {
        &self.gamma[sensor]
    }

    pub fn is_active(&self, sensor: usize, slot: usize) -> bool {
        self.gamma[sensor][slot]
    }

    /// Total packets sent this frame.
    pub fn objective_slots(&self) -> u32 {
        self.objective_slots
    }

    /// Packets sent by `sensor` this frame.
    pub fn packets(&self, sensor: usize) -> u32 {
        self.gamma[sensor].iter().filter(|&&g| g).count() as u32
    }

    pub fn slot_owner(&self, slot: usize) -> Option<usize> {
        self.gamma.iter().position(|row| row[slot])
    }

    /// Row-major flattening; the tie-break order compares these.
    fn flat(&self) -> Vec<bool> {
        self.gamma.iter().flatten().copied().collect()
    }
}

/// Constraints of one frame's assignment problem.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameProblem {
    /// Secrecy-feasible, `delta = 1` and `B + E_o > 0`.
    pub eligible: Vec<bool>,
    /// `quotas[k][l]`: most transmissions sensor `k` can afford in slots `0..=l`.
    pub quotas: Vec<Vec<u32>>,
    /// `P + E_p` per sensor, J; infinite for ineligible sensors.
    pub per_slot_cost: Vec<f64>,
    /// Transmit power per sensor, W; zero for ineligible sensors.
    pub power: Vec<f64>,
}

impl FrameProblem {
    pub fn n_sensors(&self) -> usize {
        self.eligible.len()
    }

    pub fn n_slots(&self) -> usize {
        self.quotas.first().map_or(0, Vec::len)
    }

    /// Builds a problem directly from eligibility and quotas.
    pub fn from_quotas(eligible: Vec<bool>, mut quotas: Vec<Vec<u32>>) -> Self {
        assert_eq!(eligible.len(), quotas.len());
        for (row, &ok) in quotas.iter_mut().zip(&eligible) {
            if !ok {
                row.iter_mut().for_each(|q| *q = 0);
            }
        }
        let n = eligible.len();
        FrameProblem {
            eligible,
            quotas,
            per_slot_cost: vec![1.0; n],
            power: vec![0.0; n],
        }
    }

    /// `caps[k][j] = min_{l >= j} quota[k][l]`: the most slots sensor `k`
    /// may have used through slot `j` without breaking any later prefix.
    fn suffix_caps(&self) -> Vec<Vec<u32>> {
        self.quotas
            .iter()
            .map(|row| {
                let mut caps = row.clone();
                for j in (0..caps.len().saturating_sub(1)).rev() {
                    caps[j] = caps[j].min(caps[j + 1]);
                }
                caps
            })
            .collect()
    }
}

/// Eligibility, prices and quotas for `scheme` under the wiretap link model.
pub fn build_problem(
    channels: &ChannelRealization,
    state: &EnergyState,
    schedule: &HarvestSchedule,
    config: &NetworkConfig,
    scheme: Scheme,
) -> FrameProblem {
    build_problem_with(channels, state, schedule, config, scheme, LinkModel::Wiretap)
}

/// [`build_problem`] with an explicit link model.
///
/// Adaptive-power schemes price a slot at the minimum power the link model
/// requires; fixed-power schemes use the configured power and are eligible
/// only when that power strictly supports the rate. A sensor that cannot
/// transmit securely stays silent and spends nothing.
pub fn build_problem_with(
    channels: &ChannelRealization,
    state: &EnergyState,
    schedule: &HarvestSchedule,
    config: &NetworkConfig,
    scheme: Scheme,
    link: LinkModel,
) -> FrameProblem {
    let n_sensors = state.n_sensors();
    assert_eq!(channels.n_sensors(), n_sensors, "channel/state size mismatch");
    let mut eligible = Vec::with_capacity(n_sensors);
    let mut power = Vec::with_capacity(n_sensors);
    let mut per_slot_cost = Vec::with_capacity(n_sensors);
    for k in 0..n_sensors {
        let (an, bn) = (channels.alpha_norm[k], channels.beta_norm[k]);
        let required = link.required_power(config.rate, an, bn);
        let chosen = if scheme.uses_fixed_power() {
            let fixed = config
                .fixed_power_w
                .expect("fixed-power scheme without fixed_power_w");
            (required.is_some() && link.supports(fixed, config.rate, an, bn)).then_some(fixed)
        } else {
            required
        };
        let has_energy = state.battery[k] + schedule.frame_start_harvest > 0.0;
        match chosen {
            Some(p) if state.eligible[k] && has_energy => {
                eligible.push(true);
                power.push(p);
                per_slot_cost.push(p + config.proc_energy_j);
            }
            _ => {
                eligible.push(false);
                power.push(0.0);
                per_slot_cost.push(f64::INFINITY);
            }
        }
    }
    let priced = state.clone().with_costs(per_slot_cost.clone());
    let quotas = (0..n_sensors)
        .map(|k| {
            if eligible[k] {
                slot_quotas(&priced, schedule, k)
            } else {
                vec![0; schedule.n_slots()]
            }
        })
        .collect();
    FrameProblem {
        eligible,
        quotas,
        per_slot_cost,
        power,
    }
}

/// Checks exclusivity, eligibility and prefix quotas.
pub fn validate(problem: &FrameProblem, assignment: &Assignment) -> Result<(), AllocError> {
    let (n_sensors, n_slots) = (problem.n_sensors(), problem.n_slots());
    let gamma = assignment.gamma();
    if gamma.len() != n_sensors || gamma.iter().any(|r| r.len() != n_slots) {
        return Err(AllocError::Shape {
            n_sensors,
            n_slots,
            got_sensors: gamma.len(),
            got_slots: gamma.first().map_or(0, Vec::len),
        });
    }
    for slot in 0..n_slots {
        if gamma.iter().filter(|row| row[slot]).count() > 1 {
            return Err(AllocError::Exclusivity { slot });
        }
    }
    for (sensor, row) in gamma.iter().enumerate() {
        if !problem.eligible[sensor] && row.iter().any(|&g| g) {
            return Err(AllocError::Ineligible { sensor });
        }
        let mut used = 0;
        for (slot, &active) in row.iter().enumerate() {
            used += active as u32;
            let quota = problem.quotas[sensor][slot];
            if used > quota {
                return Err(AllocError::Quota {
                    sensor,
                    slot,
                    used,
                    quota,
                });
            }
        }
    }
    debug_assert_eq!(
        assignment.objective_slots(),
        gamma.iter().flatten().filter(|&&g| g).count() as u32
    );
    Ok(())
}

/// Optimal value given some pinned entries, or `None` if the pins alone
/// already break a constraint.
fn best_completion(problem: &FrameProblem, pinned: &[Vec<Option<bool>>]) -> Option<u32> {
    let (n_sensors, n_slots) = (problem.n_sensors(), problem.n_slots());
    let mut slot_taken = vec![false; n_slots];
    let mut pinned_count = 0;
    let mut residual = problem.quotas.clone();
    for k in 0..n_sensors {
        let mut used = 0;
        for j in 0..n_slots {
            if pinned[k][j] == Some(true) {
                if slot_taken[j] || !problem.eligible[k] {
                    return None;
                }
                slot_taken[j] = true;
                used += 1;
                pinned_count += 1;
            }
            if used > problem.quotas[k][j] {
                return None;
            }
            residual[k][j] -= used;
        }
    }

    // nodes: source, sink, chain u[k][j], slot j
    let source = 0;
    let sink = 1;
    let chain = |k: usize, j: usize| 2 + k * n_slots + j;
    let slot_node = |j: usize| 2 + n_sensors * n_slots + j;
    let mut graph = FlowGraph::new(2 + n_sensors * n_slots + n_slots);
    for k in 0..n_sensors {
        if !problem.eligible[k] || n_slots == 0 {
            continue;
        }
        graph.add_edge(source, chain(k, n_slots - 1), residual[k][n_slots - 1]);
        for j in (1..n_slots).rev() {
            graph.add_edge(chain(k, j), chain(k, j - 1), residual[k][j - 1]);
        }
        for j in 0..n_slots {
            if pinned[k][j].is_none() && !slot_taken[j] {
                graph.add_edge(chain(k, j), slot_node(j), 1);
            }
        }
    }
    for j in 0..n_slots {
        if !slot_taken[j] {
            graph.add_edge(slot_node(j), sink, 1);
        }
    }
    Some(pinned_count + graph.max_flow(source, sink))
}

/// Maximum-packet assignment, ties broken toward the lowest sensor index,
/// then the earliest slot.
pub fn solve_exact(problem: &FrameProblem) -> Assignment {
    let (n_sensors, n_slots) = (problem.n_sensors(), problem.n_slots());
    let mut pinned = vec![vec![None; n_slots]; n_sensors];
    let optimum = best_completion(problem, &pinned).expect("unpinned problem is feasible");
    let caps = problem.suffix_caps();
    let mut assignment = Assignment::empty(n_sensors, n_slots);
    let mut slot_taken = vec![false; n_slots];
    for k in 0..n_sensors {
        let mut used = 0;
        for j in 0..n_slots {
            let candidate = problem.eligible[k] && !slot_taken[j] && used < caps[k][j];
            if candidate {
                pinned[k][j] = Some(true);
                if best_completion(problem, &pinned) == Some(optimum) {
                    assignment.set(k, j);
                    slot_taken[j] = true;
                    used += 1;
                    continue;
                }
            }
            pinned[k][j] = Some(false);
        }
    }
    debug_assert_eq!(assignment.objective_slots(), optimum);
    assignment
}

/// Exhaustive search over every slot-to-sensor map. Same tie-breaking as
/// [`solve_exact`]. Rejects instances with `M * T > BRUTEFORCE_LIMIT`.
pub fn solve_bruteforce(problem: &FrameProblem) -> Result<Assignment, AllocError> {
    let (n_sensors, n_slots) = (problem.n_sensors(), problem.n_slots());
    if n_sensors * n_slots > BRUTEFORCE_LIMIT {
        return Err(AllocError::TooLarge { n_sensors, n_slots });
    }
    // choice[j] == 0: slot idle; otherwise owner is eligible[choice[j] - 1]
    let owners: Vec<usize> = (0..n_sensors).filter(|&k| problem.eligible[k]).collect();
    let radix = owners.len() + 1;
    let mut choice = vec![0usize; n_slots];
    let mut best = Assignment::empty(n_sensors, n_slots);
    let mut best_flat = best.flat();
    loop {
        let mut candidate = Assignment::empty(n_sensors, n_slots);
        for (j, &c) in choice.iter().enumerate() {
            if c > 0 {
                candidate.set(owners[c - 1], j);
            }
        }
        if validate(problem, &candidate).is_ok() {
            let better = candidate.objective_slots() > best.objective_slots()
                || (candidate.objective_slots() == best.objective_slots() && candidate.flat() > best_flat);
            if better {
                best_flat = candidate.flat();
                best = candidate;
            }
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == n_slots {
                return Ok(best);
            }
            choice[pos] += 1;
            if choice[pos] < radix {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

/// Checks that `slot_map` lists each slot at most once and within range.
pub fn check_slot_map(slot_map: &[Vec<usize>], n_sensors: usize, n_slots: usize) -> Result<(), AllocError> {
    if slot_map.len() != n_sensors {
        return Err(AllocError::SlotMap(format!(
            "{} slot lists for {n_sensors} sensors",
            slot_map.len()
        )));
    }
    let mut seen = vec![false; n_slots];
    for slots in slot_map {
        for &j in slots {
            if j >= n_slots {
                return Err(AllocError::SlotMap(format!("slot {j} out of range")));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(AllocError::SlotMap(format!("slot {j} listed twice")));
            }
        }
    }
    Ok(())
}

/// Fixed slot ownership: sensor `k` sends in each of its own slots, in
/// order, as long as it is eligible and the send keeps every prefix quota.
pub fn assign_fixed_slots(problem: &FrameProblem, slot_map: &[Vec<usize>]) -> Result<Assignment, AllocError> {
    let (n_sensors, n_slots) = (problem.n_sensors(), problem.n_slots());
    check_slot_map(slot_map, n_sensors, n_slots)?;
    let caps = problem.suffix_caps();
    let mut assignment = Assignment::empty(n_sensors, n_slots);
    for (k, slots) in slot_map.iter().enumerate() {
        if !problem.eligible[k] {
            continue;
        }
        let mut owned = slots.clone();
        owned.sort_unstable();
        let mut used = 0;
        for j in owned {
            if used < caps[k][j] {
                assignment.set(k, j);
                used += 1;
            }
        }
    }
    Ok(assignment)
}

/// Randomized allocation: each slot in turn goes to a sensor drawn
/// uniformly among the eligible sensors that can still afford it; the slot
/// stays idle only when no sensor qualifies.
pub fn assign_probabilistic<R: Rng>(problem: &FrameProblem, mut rng: R) -> Assignment {
    let (n_sensors, n_slots) = (problem.n_sensors(), problem.n_slots());
    let caps = problem.suffix_caps();
    let mut used = vec![0u32; n_sensors];
    let mut assignment = Assignment::empty(n_sensors, n_slots);
    let mut candidates = Vec::with_capacity(n_sensors);
    for j in 0..n_slots {
        candidates.clear();
        candidates.extend((0..n_sensors).filter(|&k| problem.eligible[k] && used[k] < caps[k][j]));
        if candidates.is_empty() {
            continue;
        }
        let k = candidates[rng.gen_range(0..candidates.len())];
        assignment.set(k, j);
        used[k] += 1;
    }
    assignment
}

/// A random small problem with energy-shaped quotas, for oracle checks.
pub fn random_problem<R: Rng>(rng: &mut R, n_sensors: usize, n_slots: usize) -> FrameProblem {
    let mut eligible = Vec::with_capacity(n_sensors);
    let mut quotas = Vec::with_capacity(n_sensors);
    for _ in 0..n_sensors {
        eligible.push(rng.gen_bool(0.8));
        // budget in units of the per-slot cost
        let mut budget: f64 = rng.gen_range(0.0..2.5);
        let row = (0..n_slots)
            .map(|l| {
                budget += if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1.2) };
                (budget.floor() as u32).min(l as u32 + 1)
            })
            .collect();
        quotas.push(row);
    }
    FrameProblem::from_quotas(eligible, quotas)
}
