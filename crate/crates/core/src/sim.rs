//! Slot-level Monte Carlo of the four-step access procedure with per-UE
//! state: pilot choice, BS correlation and idle detection, strongest-user
//! decisions with optional ACB-gated idle-pilot contention, and pilot
//! allocation with uniform backoff for the losers.

use std::fmt::Write as _;

use rand::Rng;

use crate::analysis::cdf_from_counts;
use crate::collision::{acb_factor, expected_nonrepeaters, ResolutionTable};
use crate::config::{Protocol, SystemConfig};
use crate::exec::Exec;
use crate::geometry::{CellGeometry, UeRecord};
use crate::phy::{resolve_pilot, PhyParams};
use crate::rng::{substream, Tag};
use crate::traffic::ArrivalSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UeStatus {
    Waiting,
    Active,
    Backlogged { until_slot: usize },
    Succeeded { slot: usize, attempts: u32 },
    Dropped,
}

impl UeStatus {
    pub fn is_terminal(&self) -> bool {
        matches!(self, UeStatus::Succeeded { .. } | UeStatus::Dropped)
    }
}

/// One UE's lifecycle. Slots are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct UeSession {
    pub id: usize,
    pub ue: UeRecord,
    pub arrival_slot: usize,
    pub attempts_used: u32,
    pub status: UeStatus,
    pub current_pilot: Option<usize>,
}

/// A UE taking part in a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contender {
    pub id: usize,
    pub large_scale_gain: f64,
    /// 1-based number of this attempt.
    pub attempt: u32,
}

/// Observables of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotMetrics {
    /// 1-based slot index.
    pub slot: usize,
    pub z_new: usize,
    pub z_active: usize,
    pub z_success: usize,
    pub g_idle: usize,
    pub acb: f64,
    /// `successes_by_attempt[n - 1]`: successes on attempt `n`.
    pub successes_by_attempt: Vec<usize>,
    pub step3_repeat_count: usize,
    pub step3_reselect_count: usize,
}

impl SlotMetrics {
    pub fn csv_header(max_attempts: usize) -> String {
        let mut h = String::from("slot,Z_new,Z_active,Z_success,G_idle,acb_T");
        for n in 1..=max_attempts {
            let _ = write!(h, ",success_attempt_{n}");
        }
        h.push_str(",step3_repeat_count,step3_reselect_count");
        h
    }

    pub fn csv_row(&self) -> String {
        let mut r = format!(
            "{},{},{},{},{},{}",
            self.slot, self.z_new, self.z_active, self.z_success, self.g_idle, self.acb
        );
        for s in &self.successes_by_attempt {
            let _ = write!(r, ",{s}");
        }
        let _ = write!(r, ",{},{}", self.step3_repeat_count, self.step3_reselect_count);
        r
    }
}

/// Everything that happened in a slot, per contender in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub metrics: SlotMetrics,
    pub step1_pilot: Vec<usize>,
    pub repeated: Vec<bool>,
    pub step3_pilot: Vec<Option<usize>>,
    pub success: Vec<bool>,
    /// Pilots the BS broadcast as idle, ascending.
    pub idle_pilots: Vec<usize>,
}

/// Shared, immutable context for running slots.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    pub cfg: &'a SystemConfig,
    pub table: &'a ResolutionTable,
    pub exec: Exec,
    params: PhyParams,
    geometry: CellGeometry,
}

impl<'a> Simulator<'a> {
    pub fn new(cfg: &'a SystemConfig, table: &'a ResolutionTable, exec: Exec) -> Self {
        Self {
            cfg,
            table,
            exec,
            params: PhyParams::from(cfg),
            geometry: CellGeometry::from(cfg),
        }
    }

    /// Runs Steps 1-4 for `population` in slot `slot` (0-based). Random draws
    /// come from substreams keyed by `(seed, slot, pilot)` and
    /// `(seed, slot, ue id)`, so two protocols given the same population
    /// share Step-1 choices and Step-3 decisions.
    pub fn step_slot(&self, slot: usize, population: &[Contender], protocol: Protocol, seed: u64) -> SlotOutcome {
        let tau = self.cfg.pilots;
        let slot_key = slot as u64;

        // Step 1: uniform pilot choice.
        let step1_pilot: Vec<usize> = population
            .iter()
            .map(|c| substream(seed, Tag::PilotChoice, slot_key, c.id as u64).random_range(0..tau))
            .collect();
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); tau];
        for (k, &t) in step1_pilot.iter().enumerate() {
            groups[t].push(k);
        }

        // Step 2: correlation, idle detection; Step 3 decisions ride along.
        let outcomes = self.exec.map(tau, |t| {
            let gains: Vec<f64> = groups[t].iter().map(|&k| population[k].large_scale_gain).collect();
            let mut rng = substream(seed, Tag::Channel, slot_key, t as u64);
            resolve_pilot(&self.params, &gains, &mut rng)
        });
        let idle_pilots: Vec<usize> = (0..tau).filter(|&t| outcomes[t].idle).collect();
        let mut repeated = vec![false; population.len()];
        for (t, out) in outcomes.iter().enumerate() {
            for (&k, &r) in groups[t].iter().zip(&out.repeats) {
                repeated[k] = r;
            }
        }
        let z = population.len();
        let f = expected_nonrepeaters(z as u64, self.table, tau);
        let acb = acb_factor(f, idle_pilots.len() as f64);

        // Step 3: winners repeat, losers may contend for an idle pilot.
        let mut step3_pilot = vec![None; z];
        let mut reselects = 0;
        for k in 0..z {
            if repeated[k] {
                step3_pilot[k] = Some(step1_pilot[k]);
            } else if protocol == Protocol::SucrIpa && !idle_pilots.is_empty() {
                let mut rng = substream(seed, Tag::Admission, slot_key, population[k].id as u64);
                let draw: f64 = rng.random();
                if draw < acb {
                    step3_pilot[k] = Some(idle_pilots[rng.random_range(0..idle_pilots.len())]);
                    reselects += 1;
                }
            }
        }

        // Step 4: a pilot with exactly one transmitter is granted.
        let mut load = vec![0usize; tau];
        for t in step3_pilot.iter().flatten() {
            load[*t] += 1;
        }
        let success: Vec<bool> = step3_pilot.iter().map(|p| p.is_some_and(|t| load[t] == 1)).collect();
        let w = self.cfg.max_attempts as usize;
        let mut by_attempt = vec![0usize; w];
        for (c, &ok) in population.iter().zip(&success) {
            if ok {
                by_attempt[(c.attempt as usize).clamp(1, w) - 1] += 1;
            }
        }
        let metrics = SlotMetrics {
            slot: slot + 1,
            z_new: population.iter().filter(|c| c.attempt == 1).count(),
            z_active: z,
            z_success: success.iter().filter(|&&s| s).count(),
            g_idle: idle_pilots.len(),
            acb,
            successes_by_attempt: by_attempt,
            step3_repeat_count: repeated.iter().filter(|&&r| r).count(),
            step3_reselect_count: reselects,
        };
        SlotOutcome {
            metrics,
            step1_pilot,
            repeated,
            step3_pilot,
            success,
            idle_pilots,
        }
    }

    /// Full run over the arrival slots and the retry tail.
    pub fn run(&self, schedule: &ArrivalSchedule, protocol: Protocol, seed: u64) -> SimulationReport {
        let cfg = self.cfg;
        let horizon = cfg.slots.max(schedule.counts.len()) + cfg.tail_slots();
        let w = cfg.max_attempts;
        let mut sessions = Vec::with_capacity(schedule.total());
        let mut queue: Vec<Vec<usize>> = vec![Vec::new(); horizon];
        for (slot, &count) in schedule.counts.iter().enumerate() {
            for _ in 0..count {
                let id = sessions.len();
                let mut rng = substream(seed, Tag::Position, id as u64, 0);
                sessions.push(UeSession {
                    id,
                    ue: self.geometry.sample_ue(&mut rng),
                    arrival_slot: slot,
                    attempts_used: 0,
                    status: UeStatus::Waiting,
                    current_pilot: None,
                });
                queue[slot].push(id);
            }
        }

        let mut slots = Vec::with_capacity(horizon);
        for slot in 0..horizon {
            let mut ids = std::mem::take(&mut queue[slot]);
            ids.sort_unstable();
            let population: Vec<Contender> = ids
                .iter()
                .map(|&id| {
                    let s = &mut sessions[id];
                    s.attempts_used += 1;
                    s.status = UeStatus::Active;
                    Contender {
                        id,
                        large_scale_gain: s.ue.large_scale_gain,
                        attempt: s.attempts_used,
                    }
                })
                .collect();
            let outcome = self.step_slot(slot, &population, protocol, seed);
            for (k, &id) in ids.iter().enumerate() {
                let s = &mut sessions[id];
                s.current_pilot = outcome.step3_pilot[k];
                if outcome.success[k] {
                    s.status = UeStatus::Succeeded {
                        slot,
                        attempts: s.attempts_used,
                    };
                } else if s.attempts_used >= w {
                    s.status = UeStatus::Dropped;
                    s.current_pilot = None;
                } else {
                    let backoff_ms = substream(seed, Tag::Backoff, slot as u64, id as u64)
                        .random_range(1..=cfg.backoff_window);
                    let offset = ((backoff_ms as f64 / cfg.slot_interval).ceil() as usize).max(1);
                    let next = slot + offset;
                    s.status = UeStatus::Backlogged { until_slot: next };
                    s.current_pilot = None;
                    if next < horizon {
                        queue[next].push(id);
                    }
                }
            }
            slots.push(outcome.metrics);
        }
        SimulationReport::new(protocol, seed, slots, sessions, w as usize)
    }

    /// Independent single-slot trials with a fixed number of fresh UEs.
    /// Replication `r` uses slot key `r`, so the same `seed` couples two
    /// protocols trial by trial.
    pub fn fixed_load_trials(&self, active: usize, replications: usize, protocol: Protocol, seed: u64) -> Vec<SlotMetrics> {
        let inner = Simulator {
            exec: Exec::Sequential,
            ..self.clone()
        };
        self.exec.map(replications, |r| {
            let population: Vec<Contender> = (0..active)
                .map(|id| {
                    let mut rng = substream(seed, Tag::Replication, r as u64, id as u64);
                    Contender {
                        id,
                        large_scale_gain: inner.geometry.sample_ue(&mut rng).large_scale_gain,
                        attempt: 1,
                    }
                })
                .collect();
            inner.step_slot(r, &population, protocol, seed).metrics
        })
    }
}

/// Attempt-count CDF over succeeded sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptsCdf {
    /// `values[r - 1] = F_p(r)`; empty when nobody succeeded.
    pub values: Vec<f64>,
    pub defined: bool,
}

pub fn collect_cdf(sessions: &[UeSession], max_attempts: usize) -> AttemptsCdf {
    let mut counts = vec![0.0; max_attempts];
    for s in sessions {
        if let UeStatus::Succeeded { attempts, .. } = s.status {
            counts[(attempts as usize).clamp(1, max_attempts) - 1] += 1.0;
        }
    }
    let values = cdf_from_counts(&counts);
    AttemptsCdf {
        defined: !values.is_empty(),
        values,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub protocol: Protocol,
    pub seed: u64,
    pub slots: Vec<SlotMetrics>,
    pub sessions: Vec<UeSession>,
    pub success_probability: f64,
    pub attempts_cdf: AttemptsCdf,
    pub succeeded: usize,
    pub dropped: usize,
    /// UEs still backlogged when the horizon ended.
    pub unresolved: usize,
}

impl SimulationReport {
    fn new(protocol: Protocol, seed: u64, slots: Vec<SlotMetrics>, sessions: Vec<UeSession>, w: usize) -> Self {
        let active: usize = slots.iter().map(|s| s.z_active).sum();
        let success: usize = slots.iter().map(|s| s.z_success).sum();
        let count = |f: fn(&UeStatus) -> bool| sessions.iter().filter(|s| f(&s.status)).count();
        Self {
            protocol,
            seed,
            success_probability: if active == 0 { 1.0 } else { success as f64 / active as f64 },
            attempts_cdf: collect_cdf(&sessions, w),
            succeeded: count(|s| matches!(s, UeStatus::Succeeded { .. })),
            dropped: count(|s| matches!(s, UeStatus::Dropped)),
            unresolved: count(|s| !s.is_terminal()),
            slots,
            sessions,
        }
    }

    /// Per-slot CSV body (header line plus one row per slot).
    pub fn slots_csv(&self, max_attempts: usize) -> String {
        let mut out = SlotMetrics::csv_header(max_attempts);
        out.push('\n');
        for s in &self.slots {
            out.push_str(&s.csv_row());
            out.push('\n');
        }
        out
    }

    /// Summary CSV body with `metric,value` rows.
    pub fn summary_csv(&self, config_hash: &str) -> String {
        let mut out = String::from("metric,value\n");
        let _ = writeln!(out, "protocol,{}", self.protocol);
        let _ = writeln!(out, "P_s,{}", self.success_probability);
        for (r, f) in self.attempts_cdf.values.iter().enumerate() {
            let _ = writeln!(out, "F_p({}),{}", r + 1, f);
        }
        let _ = writeln!(out, "cdf_defined,{}", self.attempts_cdf.defined);
        let _ = writeln!(out, "succeeded,{}", self.succeeded);
        let _ = writeln!(out, "dropped,{}", self.dropped);
        let _ = writeln!(out, "unresolved,{}", self.unresolved);
        let _ = writeln!(out, "config_hash,{config_hash}");
        let _ = writeln!(out, "seed,{}", self.seed);
        out
    }
}

/// Builds the schedule-driven run in one call.
pub fn run_simulation(
    cfg: &SystemConfig,
    schedule: &ArrivalSchedule,
    table: &ResolutionTable,
    protocol: Protocol,
    seed: u64,
    exec: Exec,
) -> SimulationReport {
    Simulator::new(cfg, table, exec).run(schedule, protocol, seed)
}
