//! Expected-value flow model.
//!
//! Per slot, the expected throughput follows from the binomial pilot
//! occupancy and the resolution table; failed mass is pushed into the next
//! slots through the backoff distribution. Aggregates give the access
//! success probability and the attempt-count CDF.

use std::fmt::Write as _;

use crate::collision::{acb_factor, expected_idle_pilots, expected_nonrepeaters, expected_pilots_with_u, ResolutionTable};
use crate::config::{Protocol, SystemConfig};
use crate::error::DomainError;
use crate::traffic::ArrivalSchedule;

/// The two terms of the per-slot throughput together with the BS-side
/// quantities they depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputTerms {
    /// Expected pilots with exactly one repeater.
    pub repeat: f64,
    /// Expected idle pilots won by exactly one reselecting UE.
    pub idle: f64,
    pub nonrepeaters: f64,
    pub idle_pilots: f64,
    pub acb: f64,
}

impl ThroughputTerms {
    pub fn total(&self, protocol: Protocol) -> f64 {
        match protocol {
            Protocol::Sucr => self.repeat,
            Protocol::SucrIpa => self.repeat + self.idle,
        }
    }
}

/// Evaluates both throughput terms for `z` active UEs (rounded to the
/// nearest integer).
pub fn throughput_terms(z: f64, table: &ResolutionTable, pilots: usize) -> Result<ThroughputTerms, DomainError> {
    if !(z >= 0.0 && z.is_finite()) {
        return Err(DomainError {
            what: "active UEs",
            value: z,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let n = z.round() as u64;
    let idle_pilots = expected_idle_pilots(n as f64, pilots);
    if n == 0 {
        return Ok(ThroughputTerms {
            repeat: 0.0,
            idle: 0.0,
            nonrepeaters: 0.0,
            idle_pilots,
            acb: 1.0,
        });
    }
    let repeat: f64 = (1..=n)
        .map(|u| table.prob(u as usize, 1) * expected_pilots_with_u(n, u, pilots))
        .sum();
    let f = expected_nonrepeaters(n, table, pilots);
    let acb = acb_factor(f, idle_pilots);
    let idle = if f > 0.0 && idle_pilots > 0.0 {
        let exponent = (f.round().max(1.0) - 1.0) as i32;
        let miss = (1.0 - acb / idle_pilots).clamp(0.0, 1.0);
        f * acb * miss.powi(exponent)
    } else {
        0.0
    };
    Ok(ThroughputTerms {
        repeat,
        idle,
        nonrepeaters: f,
        idle_pilots,
        acb,
    })
}

/// Expected number of UEs granted a pilot in a slot with `z` active UEs.
pub fn analytic_throughput(
    z: f64,
    table: &ResolutionTable,
    pilots: usize,
    protocol: Protocol,
) -> Result<f64, DomainError> {
    Ok(throughput_terms(z, table, pilots)?.total(protocol))
}

/// `Z_s / Z` clamped to `[0, 1]`; an empty slot counts as fully successful.
pub fn slot_success_prob(z: f64, z_success: f64) -> f64 {
    if z <= 0.0 {
        1.0
    } else {
        (z_success / z).clamp(0.0, 1.0)
    }
}

/// Probability that a backoff of `B ~ U{1..=window}` ms lands `k` slots
/// ahead, for `k = 1..`. Index 0 of the result is `k = 1`.
pub fn backoff_slot_offsets(window_ms: u32, slot_interval: f64) -> Vec<f64> {
    let mut hits: Vec<u32> = Vec::new();
    for b in 1..=window_ms {
        let k = (b as f64 / slot_interval).ceil().max(1.0) as usize;
        if hits.len() < k {
            hits.resize(k, 0);
        }
        hits[k - 1] += 1;
    }
    hits.into_iter().map(|h| h as f64 / window_ms as f64).collect()
}

/// Real-valued UE mass by slot and attempt number.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    /// `mass[i][n]`: expected UEs making attempt `n + 1` in slot `i` (0-based).
    pub mass: Vec<Vec<f64>>,
    pub backoff: Vec<f64>,
    /// Mass that failed its last allowed attempt.
    pub dropped: f64,
    /// Mass whose next attempt falls after the last modeled slot.
    pub beyond_horizon: f64,
}

impl FlowState {
    pub fn new(slots: usize, max_attempts: usize, backoff: Vec<f64>) -> Self {
        Self {
            mass: vec![vec![0.0; max_attempts]; slots],
            backoff,
            dropped: 0.0,
            beyond_horizon: 0.0,
        }
    }

    pub fn active(&self, slot: usize) -> f64 {
        self.mass[slot].iter().sum()
    }

    /// Pushes the failed share of slot `slot` into later slots. Mass on the
    /// final attempt is dropped.
    pub fn propagate_failures(&mut self, slot: usize, p_fail: f64) {
        let w = self.mass[slot].len();
        for n in 0..w {
            let failed = self.mass[slot][n] * p_fail;
            if failed == 0.0 {
                continue;
            }
            if n + 1 == w {
                self.dropped += failed;
                continue;
            }
            for (k, &p) in self.backoff.iter().enumerate() {
                let target = slot + k + 1;
                let share = failed * p;
                match self.mass.get_mut(target) {
                    Some(row) => row[n + 1] += share,
                    None => self.beyond_horizon += share,
                }
            }
        }
    }
}

/// Expected per-slot quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotAnalysis {
    /// 1-based slot index.
    pub slot: usize,
    pub new_arrivals: f64,
    pub active: f64,
    pub success: f64,
    pub success_prob: f64,
    pub idle_pilots: f64,
    pub acb: f64,
    pub nonrepeaters: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub protocol: Protocol,
    pub slots: Vec<SlotAnalysis>,
    pub success_probability: f64,
    /// `cdf[r - 1] = F_p(r)`.
    pub attempts_cdf: Vec<f64>,
    pub successes_by_attempt: Vec<f64>,
    pub dropped: f64,
    pub beyond_horizon: f64,
}

impl AnalysisReport {
    pub fn total_success(&self) -> f64 {
        self.slots.iter().map(|s| s.success).sum()
    }

    /// CSV body: per-slot rows followed by a `#`-prefixed summary block.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot,Z_new,Z_active,Z_success,G_idle,acb\n");
        for s in &self.slots {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.slot, s.new_arrivals, s.active, s.success, s.idle_pilots, s.acb
            );
        }
        let _ = writeln!(out, "# protocol={}", self.protocol);
        let _ = writeln!(out, "# P_s={}", self.success_probability);
        for (r, f) in self.attempts_cdf.iter().enumerate() {
            let _ = writeln!(out, "# F_p({})={}", r + 1, f);
        }
        out
    }
}

/// Forward pass over the arrival slots plus the retry tail.
pub fn run_flow_model(
    cfg: &SystemConfig,
    schedule: &ArrivalSchedule,
    table: &ResolutionTable,
    protocol: Protocol,
) -> AnalysisReport {
    let horizon = cfg.slots.max(schedule.counts.len()) + cfg.tail_slots();
    let w = cfg.max_attempts as usize;
    let mut state = FlowState::new(horizon, w, backoff_slot_offsets(cfg.backoff_window, cfg.slot_interval));
    for (i, &c) in schedule.counts.iter().enumerate() {
        state.mass[i][0] = c as f64;
    }
    let mut slots = Vec::with_capacity(horizon);
    let mut by_attempt = vec![0.0; w];
    for i in 0..horizon {
        let active = state.active(i);
        let (p, terms) = if active > 0.0 {
            let n_eff = active.round().max(1.0);
            let terms = throughput_terms(n_eff, table, cfg.pilots).expect("active mass is finite");
            (slot_success_prob(n_eff, terms.total(protocol)), Some(terms))
        } else {
            (1.0, None)
        };
        for (acc, m) in by_attempt.iter_mut().zip(&state.mass[i]) {
            *acc += m * p;
        }
        slots.push(SlotAnalysis {
            slot: i + 1,
            new_arrivals: schedule.counts.get(i).copied().unwrap_or(0) as f64,
            active,
            success: active * p,
            success_prob: p,
            idle_pilots: terms.map_or(cfg.pilots as f64, |t| t.idle_pilots),
            acb: terms.map_or(1.0, |t| if protocol == Protocol::SucrIpa { t.acb } else { 1.0 }),
            nonrepeaters: terms.map_or(0.0, |t| t.nonrepeaters),
        });
        state.propagate_failures(i, 1.0 - p);
    }
    let total_active: f64 = slots.iter().map(|s| s.active).sum();
    let total_success: f64 = slots.iter().map(|s| s.success).sum();
    let success_probability = if total_active > 0.0 {
        total_success / total_active
    } else {
        1.0
    };
    let attempts_cdf = cdf_from_counts(&by_attempt);
    AnalysisReport {
        protocol,
        slots,
        success_probability,
        attempts_cdf,
        successes_by_attempt: by_attempt,
        dropped: state.dropped,
        beyond_horizon: state.beyond_horizon,
    }
}

/// Normalized running sum; empty when the total is zero.
pub fn cdf_from_counts(counts: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = counts
        .iter()
        .map(|c| {
            acc += c;
            acc / total
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}
