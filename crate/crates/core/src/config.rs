//! Scenario configuration.
//!
//! [`NetworkConfig`] holds every static parameter of a scenario in SI base
//! units (Watts, Joules, seconds). The on-disk form, [`ConfigFile`], is a flat
//! JSON object whose keys carry unit suffixes (`_mw`, `_mj`, `_s`), so the
//! mixed milliwatt/millijoule/joule values of a scenario are unambiguous.
//! Conversion between the two happens only in [`NetworkConfig::from_file`]
//! and [`NetworkConfig::to_file`].
//!
//! Gain convention: `sigma_alpha` and `sigma_beta` scale the complex fading
//! coefficient, so the mean channel *gain* is `sigma²`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slot-allocation scheme simulated for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Minimum secure power with optimal slot assignment.
    Proposed,
    /// Fixed power, probabilistic slot assignment.
    Fpas,
    /// Fixed power, fixed slot assignment.
    Fpfs,
    /// Adaptive (minimum secure) power, fixed slot assignment.
    Apfs,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::Fpas, Scheme::Fpfs, Scheme::Apfs];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Fpas => "fpas",
            Scheme::Fpfs => "fpfs",
            Scheme::Apfs => "apfs",
        }
    }

    /// Whether the scheme transmits at the configured fixed power.
    pub fn uses_fixed_power(self) -> bool {
        matches!(self, Scheme::Fpas | Scheme::Fpfs)
    }

    /// Whether the scheme uses the configured per-sensor slot map.
    pub fn uses_fixed_slots(self) -> bool {
        matches!(self, Scheme::Fpfs | Scheme::Apfs)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "proposed" => Ok(Scheme::Proposed),
            "fpas" => Ok(Scheme::Fpas),
            "fpfs" => Ok(Scheme::Fpfs),
            "apfs" => Ok(Scheme::Apfs),
            other => Err(ConfigError::UnknownScheme(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid value for `{key}`{}: {reason}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Invalid {
        key: &'static str,
        line: Option<usize>,
        reason: String,
    },
    #[error("unknown scheme `{0}` (expected proposed, fpas, fpfs or apfs)")]
    UnknownScheme(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    fn invalid(key: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key,
            line: None,
            reason: reason.into(),
        }
    }

    /// Attaches the line of `key` in `source` to an `Invalid` error.
    fn locate(self, source: &str) -> Self {
        match self {
            ConfigError::Invalid { key, reason, .. } => {
                let needle = format!("\"{key}\"");
                let line = source
                    .lines()
                    .position(|l| l.contains(&needle))
                    .map(|i| i + 1);
                ConfigError::Invalid { key, line, reason }
            }
            other => other,
        }
    }
}

/// Static scenario parameters, SI units throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub n_sensors: usize,
    pub n_slots: usize,
    pub n_frames: usize,
    /// Fixed transmission rate, bits/sec/Hz.
    pub rate: f64,
    pub slot_duration_s: f64,
    pub comm_duration_s: f64,
    /// Noise-plus-interference power at the destination, W.
    pub noise_dest_w: f64,
    /// Noise-plus-interference power at the eavesdropper, W.
    pub noise_eve_w: f64,
    pub sigma_alpha: f64,
    pub sigma_beta: f64,
    /// Processing/circuit energy per active slot, J.
    pub proc_energy_j: f64,
    /// CSI exchange and beacon energy per frame, J, one entry per sensor.
    pub comm_energy_j: Vec<f64>,
    pub initial_battery_j: f64,
    pub harvest_rate_w: f64,
    /// Explicit per-slot harvest amounts, J; overrides the rate-derived schedule.
    pub harvest_schedule_j: Option<Vec<f64>>,
    pub scheme: Scheme,
    pub fixed_power_w: Option<f64>,
    /// Zero-based slot indices per sensor.
    pub fixed_slots: Option<Vec<Vec<usize>>>,
    pub master_seed: u64,
}

impl NetworkConfig {
    /// The three-sensor, six-slot reference scenario used for the throughput
    /// figures: N_d = 0.1 mW, N_e = 1 mW, E_p = 20 mJ, comm energy 0.1 J,
    /// B_0 = 0.11 J, P_h = 10 mW, T_c = 2 s, 1000 frames, R = 4.
    pub fn reference() -> Self {
        NetworkConfig {
            n_sensors: 3,
            n_slots: 6,
            n_frames: 1000,
            rate: 4.0,
            slot_duration_s: 1.0,
            comm_duration_s: 2.0,
            noise_dest_w: 0.1 / 1e3,
            noise_eve_w: 1.0 / 1e3,
            sigma_alpha: 1.0,
            sigma_beta: 0.5,
            proc_energy_j: 20.0 / 1e3,
            comm_energy_j: vec![100.0 / 1e3; 3],
            initial_battery_j: 110.0 / 1e3,
            harvest_rate_w: 10.0 / 1e3,
            harvest_schedule_j: None,
            scheme: Scheme::Proposed,
            fixed_power_w: Some(10.0 / 1e3),
            fixed_slots: Some(vec![vec![0, 1], vec![2, 3], vec![4, 5]]),
            master_seed: 1,
        }
    }

    /// T_f = T_c + T·T_s.
    pub fn frame_duration_s(&self) -> f64 {
        self.comm_duration_s + self.n_slots as f64 * self.slot_duration_s
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        NetworkConfig {
            scheme,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_sensors == 0 {
            return Err(ConfigError::invalid("n_sensors", "must be at least 1"));
        }
        if self.n_slots == 0 {
            return Err(ConfigError::invalid("n_slots", "must be at least 1"));
        }
        if self.n_frames == 0 {
            return Err(ConfigError::invalid("n_frames", "must be at least 1"));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(ConfigError::invalid("rate_bps_hz", "must be positive"));
        }
        let non_negative: [(&'static str, f64); 10] = [
            ("slot_duration_s", self.slot_duration_s),
            ("comm_duration_s", self.comm_duration_s),
            ("noise_dest_mw", self.noise_dest_w),
            ("noise_eve_mw", self.noise_eve_w),
            ("sigma_alpha", self.sigma_alpha),
            ("sigma_beta", self.sigma_beta),
            ("proc_energy_mj", self.proc_energy_j),
            ("initial_battery_mj", self.initial_battery_j),
            ("harvest_rate_mw", self.harvest_rate_w),
            ("fixed_power_mw", self.fixed_power_w.unwrap_or(0.0)),
        ];
        for (key, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ConfigError::invalid(key, format!("must be finite and >= 0, got {value}")));
            }
        }
        if self.noise_dest_w == 0.0 {
            return Err(ConfigError::invalid("noise_dest_mw", "must be positive"));
        }
        if self.noise_eve_w == 0.0 {
            return Err(ConfigError::invalid("noise_eve_mw", "must be positive"));
        }
        if self.sigma_alpha == 0.0 {
            return Err(ConfigError::invalid("sigma_alpha", "must be positive"));
        }
        if self.comm_energy_j.len() != self.n_sensors {
            return Err(ConfigError::invalid(
                "comm_energy_mj",
                format!("expected {} entries, got {}", self.n_sensors, self.comm_energy_j.len()),
            ));
        }
        if self.comm_energy_j.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(ConfigError::invalid("comm_energy_mj", "entries must be finite and >= 0"));
        }
        if let Some(schedule) = &self.harvest_schedule_j {
            if schedule.len() != self.n_slots {
                return Err(ConfigError::invalid(
                    "harvest_schedule_mj",
                    format!("expected {} entries, got {}", self.n_slots, schedule.len()),
                ));
            }
            if schedule.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
                return Err(ConfigError::invalid("harvest_schedule_mj", "entries must be finite and >= 0"));
            }
        }
        if let Some(slots) = &self.fixed_slots {
            validate_slot_map(slots, self.n_sensors, self.n_slots)?;
        }
        self.validate_scheme(self.scheme)
    }

    /// Checks that the baseline parameters `scheme` needs are present.
    pub fn validate_scheme(&self, scheme: Scheme) -> Result<(), ConfigError> {
        if scheme.uses_fixed_power() && self.fixed_power_w.is_none() {
            return Err(ConfigError::invalid(
                "fixed_power_mw",
                format!("required by scheme `{scheme}`"),
            ));
        }
        if scheme.uses_fixed_slots() && self.fixed_slots.is_none() {
            return Err(ConfigError::invalid(
                "fixed_slots",
                format!("required by scheme `{scheme}`"),
            ));
        }
        Ok(())
    }

    pub fn from_file(file: ConfigFile) -> Result<Self, ConfigError> {
        let comm_energy_j = match file.comm_energy_mj {
            PerSensor::Shared(v) => vec![from_milli(v); file.n_sensors],
            PerSensor::Each(v) => v.into_iter().map(from_milli).collect(),
        };
        let fixed_slots = match file.fixed_slots {
            None => None,
            Some(map) => {
                let mut zero_based = Vec::with_capacity(map.len());
                for slots in map {
                    let mut row = Vec::with_capacity(slots.len());
                    for s in slots {
                        if s == 0 {
                            return Err(ConfigError::invalid("fixed_slots", "slot numbers start at 1"));
                        }
                        row.push(s - 1);
                    }
                    zero_based.push(row);
                }
                Some(zero_based)
            }
        };
        let config = NetworkConfig {
            n_sensors: file.n_sensors,
            n_slots: file.n_slots,
            n_frames: file.n_frames,
            rate: file.rate_bps_hz,
            slot_duration_s: file.slot_duration_s,
            comm_duration_s: file.comm_duration_s,
            noise_dest_w: from_milli(file.noise_dest_mw),
            noise_eve_w: from_milli(file.noise_eve_mw),
            sigma_alpha: file.sigma_alpha,
            sigma_beta: file.sigma_beta,
            proc_energy_j: from_milli(file.proc_energy_mj),
            comm_energy_j,
            initial_battery_j: from_milli(file.initial_battery_mj),
            harvest_rate_w: from_milli(file.harvest_rate_mw),
            harvest_schedule_j: file
                .harvest_schedule_mj
                .map(|v| v.into_iter().map(from_milli).collect()),
            scheme: file.scheme,
            fixed_power_w: file.fixed_power_mw.map(from_milli),
            fixed_slots,
            master_seed: file.master_seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_file(&self) -> ConfigFile {
        let comm_energy_mj = match self.comm_energy_j.first() {
            Some(first) if self.comm_energy_j.iter().all(|e| e == first) => {
                PerSensor::Shared(to_milli(*first))
            }
            _ => PerSensor::Each(self.comm_energy_j.iter().copied().map(to_milli).collect()),
        };
        ConfigFile {
            n_sensors: self.n_sensors,
            n_slots: self.n_slots,
            n_frames: self.n_frames,
            rate_bps_hz: self.rate,
            slot_duration_s: self.slot_duration_s,
            comm_duration_s: self.comm_duration_s,
            noise_dest_mw: to_milli(self.noise_dest_w),
            noise_eve_mw: to_milli(self.noise_eve_w),
            sigma_alpha: self.sigma_alpha,
            sigma_beta: self.sigma_beta,
            proc_energy_mj: to_milli(self.proc_energy_j),
            comm_energy_mj,
            initial_battery_mj: to_milli(self.initial_battery_j),
            harvest_rate_mw: to_milli(self.harvest_rate_w),
            harvest_schedule_mj: self
                .harvest_schedule_j
                .as_ref()
                .map(|v| v.iter().copied().map(to_milli).collect()),
            scheme: self.scheme,
            fixed_power_mw: self.fixed_power_w.map(to_milli),
            fixed_slots: self
                .fixed_slots
                .as_ref()
                .map(|map| map.iter().map(|row| row.iter().map(|s| s + 1).collect()).collect()),
            master_seed: self.master_seed,
        }
    }

    /// Parses and validates a JSON config document.
    pub fn from_json(source: &str) -> Result<Self, ConfigError> {
        // An empty document is treated as an empty object so the error names
        // the first missing key.
        let text = if source.trim().is_empty() { "{}" } else { source };
        let mut de = serde_json::Deserializer::from_str(text);
        let file: ConfigFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::Parse {
                path,
                source: e.into_inner(),
            }
        })?;
        de.end().map_err(|source| ConfigError::Parse {
            path: ".".into(),
            source,
        })?;
        Self::from_file(file).map_err(|e| e.locate(text))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("config serializes")
    }
}

fn validate_slot_map(map: &[Vec<usize>], n_sensors: usize, n_slots: usize) -> Result<(), ConfigError> {
    if map.len() != n_sensors {
        return Err(ConfigError::invalid(
            "fixed_slots",
            format!("expected one slot list per sensor ({n_sensors}), got {}", map.len()),
        ));
    }
    let mut taken = vec![false; n_slots];
    for (sensor, slots) in map.iter().enumerate() {
        for &slot in slots {
            if slot >= n_slots {
                return Err(ConfigError::invalid(
                    "fixed_slots",
                    format!("sensor {} lists slot {} beyond n_slots = {n_slots}", sensor + 1, slot + 1),
                ));
            }
            if std::mem::replace(&mut taken[slot], true) {
                return Err(ConfigError::invalid(
                    "fixed_slots",
                    format!("slot {} is assigned more than once", slot + 1),
                ));
            }
        }
    }
    Ok(())
}

/// A scalar shared by all sensors, or one value per sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSensor {
    Shared(f64),
    Each(Vec<f64>),
}

/// On-disk config layout. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_sensors: usize,
    pub n_slots: usize,
    pub n_frames: usize,
    pub rate_bps_hz: f64,
    pub slot_duration_s: f64,
    pub comm_duration_s: f64,
    pub noise_dest_mw: f64,
    pub noise_eve_mw: f64,
    pub sigma_alpha: f64,
    pub sigma_beta: f64,
    pub proc_energy_mj: f64,
    pub comm_energy_mj: PerSensor,
    pub initial_battery_mj: f64,
    pub harvest_rate_mw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harvest_schedule_mj: Option<Vec<f64>>,
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_power_mw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_slots: Option<Vec<Vec<usize>>>,
    pub master_seed: u64,
}

fn from_milli(v: f64) -> f64 {
    v / 1e3
}

/// Inverse of [`from_milli`] that lands exactly on a value mapping back to
/// `v`, when one exists within a few ulps of `v * 1e3`.
fn to_milli(v: f64) -> f64 {
    let guess = v * 1e3;
    if !guess.is_finite() || from_milli(guess) == v {
        return guess;
    }
    let (mut up, mut down) = (guess, guess);
    for _ in 0..8 {
        up = up.next_up();
        down = down.next_down();
        if from_milli(up) == v {
            return up;
        }
        if from_milli(down) == v {
            return down;
        }
    }
    guess
}
