//! Block-fading channels, secrecy capacity and minimum secure power.
//!
//! Gains are squared magnitudes of zero-mean circularly-symmetric complex
//! Gaussian coefficients, i.e. exponential with mean `sigma²`. A gain is
//! constant over a frame and independent across frames and sensors.
//! Normalized gains divide by the receiver's noise-plus-interference power,
//! so `P · alpha_norm` is the receive SNR at transmit power `P`.

use rand::Rng;
use rand_distr::Exp1;

use crate::config::NetworkConfig;
use crate::rng::{self, Link, Purpose};

/// Per-sensor channel gains for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub frame_index: u64,
    /// Legitimate-link gains.
    pub alpha: Vec<f64>,
    /// Eavesdropper-link gains.
    pub beta: Vec<f64>,
    /// `alpha / N_d`, 1/W.
    pub alpha_norm: Vec<f64>,
    /// `beta / N_e`, 1/W.
    pub beta_norm: Vec<f64>,
}

impl ChannelRealization {
    pub fn from_gains(frame_index: u64, alpha: Vec<f64>, beta: Vec<f64>, noise_dest_w: f64, noise_eve_w: f64) -> Self {
        assert_eq!(alpha.len(), beta.len(), "gain arrays differ in length");
        let alpha_norm = alpha.iter().map(|a| a / noise_dest_w).collect();
        let beta_norm = beta.iter().map(|b| b / noise_eve_w).collect();
        ChannelRealization {
            frame_index,
            alpha,
            beta,
            alpha_norm,
            beta_norm,
        }
    }

    pub fn n_sensors(&self) -> usize {
        self.alpha.len()
    }
}

/// Draws the gains of frame `frame_index` (1-based).
///
/// Each (frame, sensor, link) has its own stream, so the realization is a
/// pure function of `(config.master_seed, frame_index)` and the unit-mean
/// exponential variates are shared across every `sigma` value.
pub fn draw_channels(config: &NetworkConfig, frame_index: u64) -> ChannelRealization {
    let gain = |sensor: usize, link: Link, sigma: f64| -> f64 {
        let mut rng = rng::stream(config.master_seed, Purpose::Channel, frame_index, sensor, link);
        let unit: f64 = rng.sample(Exp1);
        sigma * sigma * unit
    };
    let alpha = (0..config.n_sensors)
        .map(|k| gain(k, Link::Legitimate, config.sigma_alpha))
        .collect();
    let beta = (0..config.n_sensors)
        .map(|k| gain(k, Link::Eavesdropper, config.sigma_beta))
        .collect();
    ChannelRealization::from_gains(frame_index, alpha, beta, config.noise_dest_w, config.noise_eve_w)
}

/// Shannon capacity `log2(1 + P·g)` of a link with normalized gain `g`.
pub fn link_capacity(power: f64, gain_norm: f64) -> f64 {
    (power * gain_norm).ln_1p() / std::f64::consts::LN_2
}

/// Secrecy capacity in bits/sec/Hz: legitimate minus eavesdropper capacity
/// when the legitimate link is the stronger one, zero otherwise.
pub fn secrecy_capacity(power: f64, alpha_norm: f64, beta_norm: f64) -> f64 {
    if alpha_norm > beta_norm {
        (link_capacity(power, alpha_norm) - link_capacity(power, beta_norm)).max(0.0)
    } else {
        0.0
    }
}

/// Smallest transmit power at which `rate` is both decodable at the
/// destination and secret from the eavesdropper:
/// `(2^R - 1) / (alpha_norm - 2^R beta_norm)`.
///
/// Returns `None` when `alpha_norm <= 2^R beta_norm`; no power achieves
/// secrecy at that rate.
pub fn min_secure_power(rate: f64, alpha_norm: f64, beta_norm: f64) -> Option<f64> {
    debug_assert!(rate > 0.0);
    let growth = rate.exp2();
    let margin = alpha_norm - growth * beta_norm;
    (margin > 0.0).then(|| rate.exp_m1_base2() / margin)
}

/// Outage-only power `(2^R - 1) / alpha_norm`, ignoring any eavesdropper.
pub fn min_outage_power(rate: f64, alpha_norm: f64) -> Option<f64> {
    (alpha_norm > 0.0).then(|| rate.exp_m1_base2() / alpha_norm)
}

trait ExpM1Base2 {
    fn exp_m1_base2(self) -> f64;
}

impl ExpM1Base2 for f64 {
    /// `2^x - 1` without cancellation for small `x`.
    fn exp_m1_base2(self) -> f64 {
        (self * std::f64::consts::LN_2).exp_m1()
    }
}

/// Which condition a transmission must satisfy to count as delivered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkModel {
    /// Decodable at the destination and secret from the eavesdropper.
    #[default]
    Wiretap,
    /// Decodable at the destination; the eavesdropper is ignored.
    OutageOnly,
}

impl LinkModel {
    /// Minimum power needed at `rate`, or `None` if unreachable.
    pub fn required_power(self, rate: f64, alpha_norm: f64, beta_norm: f64) -> Option<f64> {
        match self {
            LinkModel::Wiretap => min_secure_power(rate, alpha_norm, beta_norm),
            LinkModel::OutageOnly => min_outage_power(rate, alpha_norm),
        }
    }

    /// Whether transmitting at `power` strictly supports `rate`.
    pub fn supports(self, power: f64, rate: f64, alpha_norm: f64, beta_norm: f64) -> bool {
        match self {
            LinkModel::Wiretap => secrecy_capacity(power, alpha_norm, beta_norm) > rate,
            LinkModel::OutageOnly => link_capacity(power, alpha_norm) > rate,
        }
    }
}
