//! Battery bookkeeping under deterministic harvesting.
//!
//! A frame starts with the carried-over battery `B`, the frame-start harvest
//! `E_o` and, for sensors that can afford it (`delta = 1`), the
//! CSI/beacon cost. Slot `j` then adds `E_j` before the sensor spends `P + E_p`
//! if it transmits. Because the per-slot cost is constant over a frame, the
//! energy-causality constraint reduces to integer caps on the number of
//! transmissions in every slot prefix ([`slot_quotas`]).

use thiserror::Error;

use crate::allocator::Assignment;
use crate::config::NetworkConfig;

/// Absolute tolerance, in joules, at energy comparison boundaries.
pub const ENERGY_EPS: f64 = 1e-12;

/// Slack granted when converting an energy budget into a slot count. Kept
/// below [`ENERGY_EPS`] so a quota-respecting assignment always clears the
/// causality check despite summation rounding.
const QUOTA_SLACK: f64 = 0.5 * ENERGY_EPS;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("explicit harvest schedule has {got} entries, expected {expected}")]
    ScheduleLength { expected: usize, got: usize },
    #[error(
        "energy causality violated: sensor {sensor}, slot {slot}: queue {queue_j:.15} J < spend {spend_j:.15} J"
    )]
    Causality {
        sensor: usize,
        slot: usize,
        queue_j: f64,
        spend_j: f64,
    },
    #[error("sensor {sensor} is not eligible this frame but has slots assigned")]
    IneligibleActive { sensor: usize },
}

/// Energy harvested during one frame, identical for every sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvestSchedule {
    /// Harvested before the CSI/beacon interval, J.
    pub frame_start_harvest: f64,
    /// Harvested at the beginning of each data slot, J.
    pub slot_harvest: Vec<f64>,
}

impl HarvestSchedule {
    pub fn n_slots(&self) -> usize {
        self.slot_harvest.len()
    }

    pub fn total(&self) -> f64 {
        self.frame_start_harvest + self.slot_harvest.iter().sum::<f64>()
    }
}

/// `E_o = P_h T_s`, `E_1 = P_h T_c` and `E_j = P_h T_s` for later slots,
/// unless the config carries an explicit per-slot schedule.
pub fn build_schedule(config: &NetworkConfig) -> Result<HarvestSchedule, EnergyError> {
    let rate = config.harvest_rate_w;
    let frame_start_harvest = rate * config.slot_duration_s;
    let slot_harvest = match &config.harvest_schedule_j {
        Some(explicit) => {
            if explicit.len() != config.n_slots {
                return Err(EnergyError::ScheduleLength {
                    expected: config.n_slots,
                    got: explicit.len(),
                });
            }
            explicit.clone()
        }
        None => (0..config.n_slots)
            .map(|j| {
                if j == 0 {
                    rate * config.comm_duration_s
                } else {
                    rate * config.slot_duration_s
                }
            })
            .collect(),
    };
    Ok(HarvestSchedule {
        frame_start_harvest,
        slot_harvest,
    })
}

/// Per-sensor battery state at the start of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyState {
    /// Carried-over battery `B`, J.
    pub battery: Vec<f64>,
    /// `delta`: battery plus frame-start harvest covers the CSI/beacon cost.
    pub eligible: Vec<bool>,
    /// CSI/beacon energy charged to eligible sensors, J.
    pub comm_energy: Vec<f64>,
    /// Energy of one transmission, `P + E_p`, J. Set per scheme.
    pub per_slot_cost: Vec<f64>,
}

impl EnergyState {
    /// Opens a frame: computes `delta` from the batteries. Slot costs start
    /// at infinity until a scheme prices them with [`EnergyState::with_costs`].
    pub fn open_frame(battery: Vec<f64>, schedule: &HarvestSchedule, comm_energy: &[f64]) -> Self {
        assert_eq!(battery.len(), comm_energy.len());
        let eligible = battery
            .iter()
            .zip(comm_energy)
            .map(|(b, e)| b + schedule.frame_start_harvest >= e - ENERGY_EPS)
            .collect();
        let per_slot_cost = vec![f64::INFINITY; battery.len()];
        EnergyState {
            battery,
            eligible,
            comm_energy: comm_energy.to_vec(),
            per_slot_cost,
        }
    }

    pub fn with_costs(mut self, per_slot_cost: Vec<f64>) -> Self {
        assert_eq!(per_slot_cost.len(), self.battery.len());
        self.per_slot_cost = per_slot_cost;
        self
    }

    pub fn n_sensors(&self) -> usize {
        self.battery.len()
    }

    /// Energy available after the frame-start charges, before any slot:
    /// `B + E_o - delta * E_comm`.
    pub fn opening_balance(&self, schedule: &HarvestSchedule, sensor: usize) -> f64 {
        let charge = if self.eligible[sensor] {
            self.comm_energy[sensor]
        } else {
            0.0
        };
        self.battery[sensor] + schedule.frame_start_harvest - charge
    }
}

/// Maximum number of transmissions `sensor` can afford within each slot
/// prefix: `quota[l] = floor((B + E_o - delta E_comm + sum_{j<=l} E_j) / cost)`,
/// clamped to `[0, l]`. All zeros for ineligible sensors.
pub fn slot_quotas(state: &EnergyState, schedule: &HarvestSchedule, sensor: usize) -> Vec<u32> {
    let n_slots = schedule.n_slots();
    if !state.eligible[sensor] {
        return vec![0; n_slots];
    }
    let cost = state.per_slot_cost[sensor];
    if !(cost > 0.0) || !cost.is_finite() {
        return vec![0; n_slots];
    }
    let mut available = state.opening_balance(schedule, sensor);
    schedule
        .slot_harvest
        .iter()
        .enumerate()
        .map(|(idx, harvest)| {
            available += harvest;
            affordable(available, cost).min(idx as u32 + 1)
        })
        .collect()
}

/// Largest `n` with `n * cost <= available` (up to [`QUOTA_SLACK`]).
fn affordable(available: f64, cost: f64) -> u32 {
    if available + QUOTA_SLACK < cost {
        return 0;
    }
    let mut n = (available / cost).floor().max(0.0);
    // `floor` may land one off when the ratio is an integer up to rounding.
    if (n + 1.0) * cost <= available + QUOTA_SLACK {
        n += 1.0;
    } else if n * cost > available + QUOTA_SLACK {
        n -= 1.0;
    }
    n.min(u32::MAX as f64) as u32
}

/// Energy trajectory of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEnergy {
    /// Battery carried into the next frame, `Q_T - o_T`.
    pub next_battery: Vec<f64>,
    /// Queue level `Q_j` at the start of each slot, per sensor.
    pub queue: Vec<Vec<f64>>,
    /// Total transmission spend this frame, per sensor.
    pub spent: Vec<f64>,
}

/// Runs the slot-by-slot queue recursion for one frame,
/// `Q_1 = B + E_o - delta E_comm + E_1`, `Q_j = Q_{j-1} - o_{j-1} + E_j`,
/// with `o_j = Gamma_j (P + E_p)`, and returns the next-frame batteries.
///
/// Fails if any slot spends more than its queue holds; a quota-respecting
/// assignment never does.
pub fn step_frame(
    state: &EnergyState,
    schedule: &HarvestSchedule,
    assignment: &Assignment,
) -> Result<FrameEnergy, EnergyError> {
    let n_sensors = state.n_sensors();
    let mut next_battery = Vec::with_capacity(n_sensors);
    let mut queue = Vec::with_capacity(n_sensors);
    let mut spent = Vec::with_capacity(n_sensors);
    for sensor in 0..n_sensors {
        let row = assignment.row(sensor);
        if !state.eligible[sensor] && row.iter().any(|&g| g) {
            return Err(EnergyError::IneligibleActive { sensor });
        }
        let cost = state.per_slot_cost[sensor];
        let mut level = state.opening_balance(schedule, sensor);
        let mut levels = Vec::with_capacity(schedule.n_slots());
        let mut total = 0.0;
        for (slot, (&harvest, &active)) in schedule.slot_harvest.iter().zip(row).enumerate() {
            level += harvest;
            levels.push(level);
            if active {
                if level + ENERGY_EPS < cost {
                    return Err(EnergyError::Causality {
                        sensor,
                        slot,
                        queue_j: level,
                        spend_j: cost,
                    });
                }
                level -= cost;
                total += cost;
            }
        }
        // Rounding can leave a sub-epsilon negative residue.
        next_battery.push(level.max(0.0));
        queue.push(levels);
        spent.push(total);
    }
    Ok(FrameEnergy {
        next_battery,
        queue,
        spent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MJ: f64 = 1e-3;

    fn reference_schedule() -> HarvestSchedule {
        build_schedule(&NetworkConfig::reference()).unwrap()
    }

    /// Reference-scenario sensor at the first frame, priced at 30 mJ/slot.
    fn first_frame_state(cost: f64) -> EnergyState {
        EnergyState::open_frame(vec![0.11], &reference_schedule(), &[0.1]).with_costs(vec![cost])
    }

    fn assignment(rows: Vec<Vec<bool>>) -> Assignment {
        Assignment::from_gamma(rows)
    }

    fn slots(n_slots: usize, active: &[usize]) -> Vec<bool> {
        (0..n_slots).map(|j| active.contains(&j)).collect()
    }

    #[test]
    fn reference_schedule_values() {
        let s = reference_schedule();
        assert!((s.frame_start_harvest - 10.0 * MJ).abs() < 1e-15);
        let expected = [20.0, 10.0, 10.0, 10.0, 10.0, 10.0];
        for (got, want) in s.slot_harvest.iter().zip(expected) {
            assert!((got - want * MJ).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_harvest_rate_gives_zero_schedule() {
        let config = NetworkConfig {
            harvest_rate_w: 0.0,
            ..NetworkConfig::reference()
        };
        let s = build_schedule(&config).unwrap();
        assert_eq!(s.frame_start_harvest, 0.0);
        assert!(s.slot_harvest.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn explicit_schedule_passes_through() {
        let explicit = vec![5.0 * MJ; 6];
        let config = NetworkConfig {
            harvest_schedule_j: Some(explicit.clone()),
            ..NetworkConfig::reference()
        };
        assert_eq!(build_schedule(&config).unwrap().slot_harvest, explicit);
        let bad = NetworkConfig {
            harvest_schedule_j: Some(vec![5.0 * MJ; 4]),
            ..NetworkConfig::reference()
        };
        assert_eq!(
            build_schedule(&bad),
            Err(EnergyError::ScheduleLength { expected: 6, got: 4 })
        );
    }

    #[test]
    fn reference_quota_trace() {
        let state = first_frame_state(30.0 * MJ);
        assert_eq!(slot_quotas(&state, &reference_schedule(), 0), vec![1, 1, 2, 2, 2, 3]);
    }

    #[test]
    fn ineligible_sensor_gets_no_quota() {
        let schedule = reference_schedule();
        // 0.05 + 0.01 < 0.1
        let state = EnergyState::open_frame(vec![0.05], &schedule, &[0.1]).with_costs(vec![30.0 * MJ]);
        assert!(!state.eligible[0]);
        assert_eq!(slot_quotas(&state, &schedule, 0), vec![0; 6]);
    }

    #[test]
    fn unaffordable_cost_gives_no_quota() {
        let state = first_frame_state(1.0);
        assert_eq!(slot_quotas(&state, &reference_schedule(), 0), vec![0; 6]);
    }

    #[test]
    fn eligibility_boundary_is_inclusive() {
        // 0.09 + 0.01 rounds just below 0.1 in binary floating point.
        let state = EnergyState::open_frame(vec![0.09], &reference_schedule(), &[0.1]);
        assert!(state.eligible[0]);
    }

    #[test]
    fn idle_frame_accumulates() {
        let schedule = reference_schedule();
        let state = first_frame_state(30.0 * MJ);
        let out = step_frame(&state, &schedule, &assignment(vec![vec![false; 6]])).unwrap();
        let expected = 0.11 + 0.01 - 0.1 + 0.07;
        assert!((out.next_battery[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn saturated_quota_drains_battery() {
        let schedule = reference_schedule();
        let state = first_frame_state(30.0 * MJ);
        let out = step_frame(&state, &schedule, &assignment(vec![slots(6, &[0, 2, 5])])).unwrap();
        assert!(out.next_battery[0].abs() < 1e-12);
        let expected_queue = [40.0, 20.0, 30.0, 10.0, 20.0, 30.0];
        for (q, want) in out.queue[0].iter().zip(expected_queue) {
            assert!((q - want * MJ).abs() < 1e-12);
        }
    }

    #[test]
    fn over_quota_assignment_is_rejected() {
        let schedule = reference_schedule();
        let state = first_frame_state(30.0 * MJ);
        // quota at slot 4 is 2; three sends by then
        let err = step_frame(&state, &schedule, &assignment(vec![slots(6, &[0, 2, 3])])).unwrap_err();
        assert!(matches!(err, EnergyError::Causality { sensor: 0, slot: 3, .. }));
    }

    #[test]
    fn ineligible_sensor_only_harvests() {
        let schedule = reference_schedule();
        let state = EnergyState::open_frame(vec![0.05], &schedule, &[0.1]).with_costs(vec![30.0 * MJ]);
        let out = step_frame(&state, &schedule, &assignment(vec![vec![false; 6]])).unwrap();
        assert!((out.next_battery[0] - (0.05 + 0.08)).abs() < 1e-12);
        let err = step_frame(&state, &schedule, &assignment(vec![slots(6, &[5])])).unwrap_err();
        assert_eq!(err, EnergyError::IneligibleActive { sensor: 0 });
    }

    fn harvest_case() -> impl Strategy<Value = (f64, f64, Vec<f64>, f64, f64)> {
        (
            0.0f64..0.3,
            0.0f64..0.05,
            prop::collection::vec(0.0f64..0.05, 1..8),
            0.0f64..0.15,
            0.001f64..0.08,
        )
    }

    fn quota_respecting(quota: &[u32], picks: &[bool]) -> Vec<bool> {
        let mut used = 0;
        quota
            .iter()
            .zip(picks)
            .map(|(&q, &want)| {
                let take = want && used < q;
                if take {
                    used += 1;
                }
                take
            })
            .collect()
    }

    proptest! {
        #[test]
        fn quotas_monotone((battery, e0, slots_h, comm, cost) in harvest_case(), bump_slot in 0usize..8, bump in 0.0f64..0.05) {
            let schedule = HarvestSchedule { frame_start_harvest: e0, slot_harvest: slots_h.clone() };
            let state = EnergyState::open_frame(vec![battery], &schedule, &[comm]).with_costs(vec![cost]);
            let q = slot_quotas(&state, &schedule, 0);
            for l in 1..q.len() {
                prop_assert!(q[l] >= q[l - 1]);
            }
            for (l, &v) in q.iter().enumerate() {
                prop_assert!(v as usize <= l + 1);
            }
            let mut richer = schedule.clone();
            let idx = bump_slot % richer.slot_harvest.len();
            richer.slot_harvest[idx] += bump;
            let q2 = slot_quotas(&state, &richer, 0);
            for (a, b) in q.iter().zip(&q2) {
                prop_assert!(b >= a);
            }
        }

        #[test]
        fn quota_soundness((battery, e0, slots_h, comm, cost) in harvest_case(), picks in prop::collection::vec(any::<bool>(), 8)) {
            let n = slots_h.len();
            let schedule = HarvestSchedule { frame_start_harvest: e0, slot_harvest: slots_h };
            let state = EnergyState::open_frame(vec![battery], &schedule, &[comm]).with_costs(vec![cost]);
            let q = slot_quotas(&state, &schedule, 0);
            let row = quota_respecting(&q, &picks[..n]);
            let out = step_frame(&state, &schedule, &assignment(vec![row.clone()]));
            prop_assert!(out.is_ok(), "{:?}", out);
            let out = out.unwrap();
            // conservation
            let sends = row.iter().filter(|&&g| g).count() as f64;
            let charge = if state.eligible[0] { comm } else { 0.0 };
            let expected = battery + schedule.total() - charge - sends * cost;
            prop_assert!((out.next_battery[0] - expected).abs() < 1e-12);
            prop_assert!(out.next_battery[0] >= 0.0);

            // one extra send at the first prefix with slack left is infeasible
            if state.eligible[0] {
                let mut used = 0u32;
                for l in 0..n {
                    if row[l] { used += 1; }
                    if !row[l] && used + 1 > q[l] {
                        let mut over = row.clone();
                        over[l] = true;
                        prop_assert!(step_frame(&state, &schedule, &assignment(vec![over])).is_err());
                        break;
                    }
                }
            }
        }
    }
}
