//! Pilot-level signal chain of the access steps: uplink correlation, idle
//! detection, the precoded downlink response seen by each UE, and the
//! strongest-user decision.
//!
//! Pilots are mutually orthogonal with squared norm `L`, so correlating the
//! received block with pilot `t` leaves `sum_k sqrt(rho L) h_k + n_t` over the
//! UEs that chose `t`. The block itself is never formed.
//!
//! Inner products conjugate their second argument.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{PhyMode, SystemConfig};
use crate::error::PhyError;

/// Parameters the PHY transforms need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhyParams {
    pub mode: PhyMode,
    pub antennas: usize,
    pub pilot_length: usize,
    pub ul_power: f64,
    pub dl_power: f64,
    pub noise_var: f64,
    pub decision_bias: f64,
    pub idle_threshold: f64,
}

impl From<&SystemConfig> for PhyParams {
    fn from(cfg: &SystemConfig) -> Self {
        Self {
            mode: cfg.phy_mode,
            antennas: cfg.antennas,
            pilot_length: cfg.pilot_length,
            ul_power: cfg.ul_power,
            dl_power: cfg.dl_power,
            noise_var: cfg.noise_var,
            decision_bias: cfg.decision_bias,
            idle_threshold: cfg.idle_threshold,
        }
    }
}

impl PhyParams {
    /// `a_k = rho L beta_k`, the pilot energy a UE contributes after correlation.
    pub fn own_gain(&self, large_scale_gain: f64) -> f64 {
        self.ul_power * self.pilot_length as f64 * large_scale_gain
    }
}

/// Circularly-symmetric complex Gaussian vector with per-coordinate variance `var`.
pub fn draw_cn<R: Rng + ?Sized>(var: f64, len: usize, rng: &mut R) -> Vec<Complex64> {
    let s = (var / 2.0).sqrt();
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(s * re, s * im)
        })
        .collect()
}

/// Uncorrelated Rayleigh channel `h ~ CN(0, beta I_M)`.
pub fn draw_channel<R: Rng + ?Sized>(large_scale_gain: f64, antennas: usize, rng: &mut R) -> Vec<Complex64> {
    draw_cn(large_scale_gain, antennas, rng)
}

/// `sum_i a_i conj(b_i)`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(Complex64::norm_sqr).sum()
}

/// The BS-side view of one pilot after correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    /// Correlated signal `y_t`; empty in asymptotic mode.
    pub signal: Vec<Complex64>,
    /// `||y_t||² / M`, or its exact limit `alpha_t` in asymptotic mode.
    pub statistic: f64,
    pub contenders: usize,
}

/// What a contending UE learns from the broadcast response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownlinkObservation {
    pub z: Complex64,
    pub own_gain: f64,
}

/// Correlates with pilot `t` given the contenders' channels and an explicit
/// post-correlation noise vector.
pub fn correlate_with_noise(
    params: &PhyParams,
    channels: &[&[Complex64]],
    noise: &[Complex64],
) -> PilotObservation {
    let amp = (params.ul_power * params.pilot_length as f64).sqrt();
    let mut y = noise.to_vec();
    for h in channels {
        for (yi, hi) in y.iter_mut().zip(h.iter()) {
            *yi += hi * amp;
        }
    }
    let statistic = if y.is_empty() { 0.0 } else { norm_sqr(&y) / y.len() as f64 };
    PilotObservation {
        signal: y,
        statistic,
        contenders: channels.len(),
    }
}

/// Finite-M correlation: draws `n_t ~ CN(0, sigma2 I_M)` and adds the
/// contenders' scaled channels.
pub fn correlate_pilot<R: Rng + ?Sized>(
    params: &PhyParams,
    channels: &[&[Complex64]],
    rng: &mut R,
) -> PilotObservation {
    let noise = draw_cn(params.noise_var, params.antennas, rng);
    correlate_with_noise(params, channels, &noise)
}

/// Asymptotic correlation: `alpha_t = sum_k a_k + sigma2`.
pub fn asymptotic_observation(params: &PhyParams, large_scale_gains: &[f64]) -> PilotObservation {
    PilotObservation {
        signal: Vec::new(),
        statistic: large_scale_gains.iter().map(|&b| params.own_gain(b)).sum::<f64>() + params.noise_var,
        contenders: large_scale_gains.len(),
    }
}

/// Whether the BS declares the pilot idle.
pub fn detect_idle(params: &PhyParams, obs: &PilotObservation) -> bool {
    match params.mode {
        PhyMode::Asymptotic => obs.contenders == 0,
        PhyMode::FiniteM => obs.statistic < params.idle_threshold,
    }
}

/// UE-side correlation of the precoded response with the downlink pilot:
/// `z = sqrt(qL) <h_k, y_t / ||y_t||> + nu`, `nu ~ CN(0, sigma2)`.
pub fn ue_downlink_observe<R: Rng + ?Sized>(
    params: &PhyParams,
    channel: &[Complex64],
    large_scale_gain: f64,
    obs: &PilotObservation,
    rng: &mut R,
) -> Result<DownlinkObservation, PhyError> {
    let norm = norm_sqr(&obs.signal).sqrt();
    if norm == 0.0 {
        return Err(PhyError::DegenerateObservation);
    }
    let amp = (params.dl_power * params.pilot_length as f64).sqrt();
    let nu = draw_cn(params.noise_var, 1, rng)[0];
    Ok(DownlinkObservation {
        z: inner(channel, &obs.signal) * (amp / norm) + nu,
        own_gain: params.own_gain(large_scale_gain),
    })
}

/// What the strongest-user rule compares against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionInput {
    /// Exact summed gain `alpha_t` on the pilot.
    Exact { alpha: f64 },
    /// Downlink observation in finite-M mode.
    Observed { z: Complex64 },
}

/// Repeat the pilot iff the UE's own gain exceeds half the (estimated) summed
/// gain plus the bias.
pub fn sucr_decide(params: &PhyParams, large_scale_gain: f64, input: DecisionInput) -> bool {
    let own = params.own_gain(large_scale_gain);
    let alpha = match input {
        DecisionInput::Exact { alpha } => alpha,
        DecisionInput::Observed { z } => {
            if z.re <= 0.0 {
                return false;
            }
            let est = params.dl_power
                * params.pilot_length as f64
                * params.antennas as f64
                * own
                * large_scale_gain
                / (z.re * z.re);
            est.max(own + params.noise_var)
        }
    };
    own > alpha / 2.0 + params.decision_bias
}

/// Outcome of Steps 1-3 on a single pilot.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotOutcome {
    pub idle: bool,
    pub statistic: f64,
    /// Per contender, in input order: does it repeat its pilot?
    pub repeats: Vec<bool>,
}

impl PilotOutcome {
    pub fn repeaters(&self) -> usize {
        self.repeats.iter().filter(|&&r| r).count()
    }
}

/// Runs correlation, idle detection and every contender's decision for one
/// pilot. In finite-M mode all draws (channels in contender order, uplink
/// noise, then downlink noise in contender order) come from `rng`.
pub fn resolve_pilot<R: Rng + ?Sized>(params: &PhyParams, large_scale_gains: &[f64], rng: &mut R) -> PilotOutcome {
    match params.mode {
        PhyMode::Asymptotic => {
            let obs = asymptotic_observation(params, large_scale_gains);
            let repeats = large_scale_gains
                .iter()
                .map(|&b| sucr_decide(params, b, DecisionInput::Exact { alpha: obs.statistic }))
                .collect();
            PilotOutcome {
                idle: detect_idle(params, &obs),
                statistic: obs.statistic,
                repeats,
            }
        }
        PhyMode::FiniteM => {
            let channels: Vec<Vec<Complex64>> = large_scale_gains
                .iter()
                .map(|&b| draw_channel(b, params.antennas, rng))
                .collect();
            let refs: Vec<&[Complex64]> = channels.iter().map(Vec::as_slice).collect();
            let obs = correlate_pilot(params, &refs, rng);
            let repeats = channels
                .iter()
                .zip(large_scale_gains)
                .map(|(h, &b)| match ue_downlink_observe(params, h, b, &obs, rng) {
                    Ok(dl) => sucr_decide(params, b, DecisionInput::Observed { z: dl.z }),
                    Err(PhyError::DegenerateObservation) => false,
                })
                .collect();
            PilotOutcome {
                idle: detect_idle(params, &obs),
                statistic: obs.statistic,
                repeats,
            }
        }
    }
}
