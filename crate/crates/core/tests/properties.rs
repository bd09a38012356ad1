use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ehs_secrecy::allocator::{assign_probabilistic, build_problem, solve_exact};
use ehs_secrecy::channel::draw_channels;
use ehs_secrecy::config::{ConfigFile, PerSensor};
use ehs_secrecy::energy::{build_schedule, EnergyState};
use ehs_secrecy::sim;
use ehs_secrecy::{NetworkConfig, Scheme};

fn config_file() -> impl Strategy<Value = ConfigFile> {
    (
        (1usize..5, 1usize..8, 1usize..2000, 0.01f64..10.0, 0.1f64..3.0, 0.0f64..5.0),
        (1e-3f64..10.0, 1e-3f64..10.0, 0.01f64..3.0, 0.0f64..2.0),
        (0.0f64..100.0, 0.0f64..500.0, 0.0f64..500.0, 0.0f64..50.0, any::<bool>()),
        (0usize..4, proptest::option::of(0.0f64..100.0), any::<u64>()),
    )
        .prop_map(
            |(
                (m, t, f, rate, ts, tc),
                (nd, ne, sa, sb),
                (proc, comm, battery, harvest, per_sensor),
                (scheme, fixed_power, seed),
            )| {
                let comm_energy_mj = if per_sensor {
                    PerSensor::Each((0..m).map(|k| comm + k as f64 * 1.7).collect())
                } else {
                    PerSensor::Shared(comm)
                };
                let fixed_slots = Some((0..m).map(|k| ((1..=t).filter(|j| j % m == k)).collect()).collect());
                ConfigFile {
                    n_sensors: m,
                    n_slots: t,
                    n_frames: f,
                    rate_bps_hz: rate,
                    slot_duration_s: ts,
                    comm_duration_s: tc,
                    noise_dest_mw: nd,
                    noise_eve_mw: ne,
                    sigma_alpha: sa,
                    sigma_beta: sb,
                    proc_energy_mj: proc,
                    comm_energy_mj,
                    initial_battery_mj: battery,
                    harvest_rate_mw: harvest,
                    harvest_schedule_mj: None,
                    scheme: [Scheme::Proposed, Scheme::Fpas, Scheme::Fpfs, Scheme::Apfs][scheme],
                    fixed_power_mw: Some(fixed_power.unwrap_or(10.0)),
                    fixed_slots,
                    master_seed: seed,
                }
            },
        )
}

proptest! {
    #[test]
    fn config_round_trip(file in config_file()) {
        let text = serde_json::to_string_pretty(&file).unwrap();
        let config = NetworkConfig::from_json(&text).unwrap();
        let again = NetworkConfig::from_json(&config.to_json()).unwrap();
        prop_assert_eq!(again, config);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn runs_are_deterministic_and_bounded(seed in any::<u64>(), rate in 0.5f64..8.0, scheme in 0usize..4) {
        let config = NetworkConfig {
            n_frames: 60,
            rate,
            master_seed: seed,
            scheme: Scheme::ALL[scheme],
            ..NetworkConfig::reference()
        };
        let a = sim::run(&config).unwrap();
        let b = sim::run(&config).unwrap();
        prop_assert_eq!(&a, &b);
        let ceiling = rate * config.n_slots as f64 / config.frame_duration_s();
        prop_assert!(a.avg_sum_throughput <= ceiling);
    }
}

/// Replays every frame of an optimal-scheme run and checks that a random
/// allocation on the same frame problem never beats the exact one.
#[test]
fn exact_dominates_random_allocation_frame_by_frame() {
    let config = NetworkConfig {
        n_frames: 300,
        ..NetworkConfig::reference()
    };
    let result = sim::run(&config).unwrap();
    let schedule = build_schedule(&config).unwrap();
    for (f, record) in result.frames.iter().enumerate() {
        let frame = f as u64 + 1;
        let channels = draw_channels(&config, frame);
        let state = EnergyState::open_frame(record.start_battery.clone(), &schedule, &config.comm_energy_j);
        let problem = build_problem(&channels, &state, &schedule, &config, Scheme::Proposed);
        let exact = solve_exact(&problem);
        assert_eq!(exact, record.assignment);
        for trial in 0..5 {
            let lottery = assign_probabilistic(&problem, ChaCha8Rng::seed_from_u64(frame * 31 + trial));
            assert!(lottery.objective_slots() <= exact.objective_slots());
        }
    }
}

#[test]
fn zero_legitimate_gain_means_zero_throughput() {
    for scheme in Scheme::ALL {
        let config = NetworkConfig {
            n_frames: 100,
            sigma_alpha: f64::MIN_POSITIVE,
            scheme,
            ..NetworkConfig::reference()
        };
        assert_eq!(sim::run(&config).unwrap().avg_sum_throughput, 0.0, "{scheme}");
    }
}
