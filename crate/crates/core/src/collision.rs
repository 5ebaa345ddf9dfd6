//! Same-pilot contention statistics.
//!
//! [`ResolutionTable`] holds Monte Carlo estimates of the probability that
//! `d` of `u` UEs sharing a pilot decide to repeat it, obtained by running
//! the exact decision rule the simulator uses. From it and the binomial
//! pilot occupancy follow the expected non-repeater count `F` and the ACB
//! factor broadcast to the losers.

use std::fmt::Write as _;

use statrs::function::factorial::ln_binomial;

use crate::config::{PhyMode, SystemConfig};
use crate::error::TableError;
use crate::exec::Exec;
use crate::geometry::CellGeometry;
use crate::phy::{resolve_pilot, PhyParams};
use crate::rng::{substream, Tag};

/// Default largest contender count tabulated.
pub const DEFAULT_U_MAX: usize = 25;

const CHUNK: usize = 1024;

/// Estimated `Pr(d of u contenders repeat)`, stored as integer counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolutionTable {
    /// `counts[u - 1][d]` for `d` in `0..=u`.
    counts: Vec<Vec<u64>>,
    replications: u64,
    mode: PhyMode,
}

impl ResolutionTable {
    /// Builds a table from raw counts. Every row `u` must have `u + 1` entries
    /// summing to `replications`.
    pub fn from_counts(counts: Vec<Vec<u64>>, replications: u64, mode: PhyMode) -> Result<Self, TableError> {
        if counts.is_empty() || replications == 0 {
            return Err(TableError::Incomplete("no rows or zero replications".into()));
        }
        for (i, row) in counts.iter().enumerate() {
            let u = i + 1;
            if row.len() != u + 1 {
                return Err(TableError::Incomplete(format!("row u={u} has {} entries", row.len())));
            }
            let total: u64 = row.iter().sum();
            if total != replications {
                return Err(TableError::Incomplete(format!(
                    "row u={u} counts sum to {total}, expected {replications}"
                )));
            }
        }
        Ok(Self {
            counts,
            replications,
            mode,
        })
    }

    pub fn u_max(&self) -> usize {
        self.counts.len()
    }

    pub fn replications(&self) -> u64 {
        self.replications
    }

    pub fn mode(&self) -> PhyMode {
        self.mode
    }

    pub fn count(&self, u: usize, d: usize) -> u64 {
        self.counts[u - 1][d]
    }

    /// `Pr(D_u^d)`; rows above `u_max` reuse the `u_max` row.
    pub fn prob(&self, u: usize, d: usize) -> f64 {
        assert!(u >= 1, "u must be positive");
        let row = &self.counts[u.min(self.u_max()) - 1];
        row.get(d).map_or(0.0, |&c| c as f64 / self.replications as f64)
    }

    /// Expected number of non-repeaters among `u` contenders on one pilot.
    pub fn mean_nonrepeaters(&self, u: usize) -> f64 {
        let uu = u.min(self.u_max());
        let row = &self.counts[uu - 1];
        // Beyond u_max the repeater distribution is reused and every extra
        // contender is a non-repeater.
        row.iter()
            .enumerate()
            .map(|(d, &c)| (u - d) as f64 * c as f64)
            .sum::<f64>()
            / self.replications as f64
    }

    /// CSV with columns `u,d,probability,replications` and a `#` header line
    /// carrying the PHY mode.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# phy_mode={}\nu,d,probability,replications\n", self.mode);
        for (i, row) in self.counts.iter().enumerate() {
            for (d, _) in row.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", i + 1, d, self.prob(i + 1, d), self.replications);
            }
        }
        out
    }

    /// Parses [`to_csv`](Self::to_csv) output. Probabilities must be exact
    /// multiples of `1 / replications`, so a loaded table is identical to the
    /// one written.
    pub fn from_csv(text: &str) -> Result<Self, TableError> {
        let mut mode = None;
        let mut header_seen = false;
        let mut counts: Vec<Vec<u64>> = Vec::new();
        let mut replications = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let malformed = |message: String| TableError::Malformed { line: line_no, message };
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for token in comment.split_whitespace() {
                    if let Some(v) = token.strip_prefix("phy_mode=") {
                        mode = Some(v.parse::<PhyMode>().map_err(malformed)?);
                    }
                }
                continue;
            }
            if !header_seen {
                if line != "u,d,probability,replications" {
                    return Err(malformed(format!("unexpected header `{line}`")));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(malformed(format!("expected 4 fields, got {}", fields.len())));
            }
            let u: usize = fields[0].parse().map_err(|e| malformed(format!("u: {e}")))?;
            let d: usize = fields[1].parse().map_err(|e| malformed(format!("d: {e}")))?;
            let p: f64 = fields[2].parse().map_err(|e| malformed(format!("probability: {e}")))?;
            let r: u64 = fields[3].parse().map_err(|e| malformed(format!("replications: {e}")))?;
            if r == 0 || *replications.get_or_insert(r) != r {
                return Err(malformed("inconsistent replications".into()));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(malformed(format!("probability {p} outside [0, 1]")));
            }
            let c = (p * r as f64).round() as u64;
            if c as f64 / r as f64 != p {
                return Err(malformed(format!("probability {p} is not a multiple of 1/{r}")));
            }
            if u == 0 || d > u {
                return Err(malformed(format!("invalid cell (u={u}, d={d})")));
            }
            if u == counts.len() + 1 && d == 0 {
                counts.push(Vec::with_capacity(u + 1));
            }
            let rows = counts.len();
            match counts.last_mut() {
                Some(row) if u == rows && row.len() == d => row.push(c),
                _ => return Err(malformed(format!("cell (u={u}, d={d}) out of order"))),
            }
        }
        let mode = mode.ok_or_else(|| TableError::Incomplete("missing `# phy_mode=` header".into()))?;
        let replications = replications.ok_or_else(|| TableError::Incomplete("no rows".into()))?;
        Self::from_counts(counts, replications, mode)
    }
}

/// Monte Carlo estimate of `Pr(D_u^d)` for `u` in `1..=u_max`.
///
/// Each trial drops `u` UEs uniformly in the cell and applies the
/// configured PHY mode's decision rule. Trials are split into fixed-size
/// chunks with their own substreams, so the counts do not depend on `exec`.
pub fn build_resolution_table(
    cfg: &SystemConfig,
    u_max: usize,
    replications: usize,
    exec: Exec,
) -> ResolutionTable {
    assert!(u_max >= 1 && replications >= 1);
    let geometry = CellGeometry::from(cfg);
    let params = PhyParams::from(cfg);
    let chunks = replications.div_ceil(CHUNK);
    let jobs: Vec<(usize, usize)> = (1..=u_max).flat_map(|u| (0..chunks).map(move |c| (u, c))).collect();
    let partial = exec.map_slice(&jobs, |&(u, chunk)| {
        let mut rng = substream(cfg.seed, Tag::Table, u as u64, chunk as u64);
        let trials = CHUNK.min(replications - chunk * CHUNK);
        let mut row = vec![0u64; u + 1];
        let mut gains = vec![0.0; u];
        for _ in 0..trials {
            for g in gains.iter_mut() {
                *g = geometry.sample_ue(&mut rng).large_scale_gain;
            }
            row[resolve_pilot(&params, &gains, &mut rng).repeaters()] += 1;
        }
        (u, row)
    });
    let mut counts: Vec<Vec<u64>> = (1..=u_max).map(|u| vec![0; u + 1]).collect();
    for (u, row) in partial {
        for (acc, c) in counts[u - 1].iter_mut().zip(row) {
            *acc += c;
        }
    }
    ResolutionTable::from_counts(counts, replications as u64, cfg.phy_mode)
        .expect("freshly counted table is complete")
}

/// Binomial probability `C(n, k) p^k (1-p)^(n-k)`.
pub fn binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()).exp()
}

/// Expected number of pilots chosen by exactly `u` of `z` UEs:
/// `tau_p C(z, u) (1/tau_p)^u (1 - 1/tau_p)^(z-u)`.
pub fn expected_pilots_with_u(z: u64, u: u64, pilots: usize) -> f64 {
    pilots as f64 * binomial_pmf(z, u, 1.0 / pilots as f64)
}

/// Expected idle pilots `tau_p (1 - 1/tau_p)^z`.
pub fn expected_idle_pilots(z: f64, pilots: usize) -> f64 {
    pilots as f64 * (1.0 - 1.0 / pilots as f64).powf(z)
}

/// Expected number of Step-1 contenders that do not repeat:
/// `F = sum_u sum_d (u - d) Pr(D_u^d) C_u`.
pub fn expected_nonrepeaters(z: u64, table: &ResolutionTable, pilots: usize) -> f64 {
    (1..=z)
        .map(|u| table.mean_nonrepeaters(u as usize) * expected_pilots_with_u(z, u, pilots))
        .sum()
}

/// ACB factor: `G/F` when `F > G`, else 1.
pub fn acb_factor(f: f64, idle: f64) -> f64 {
    if f > idle {
        idle / f
    } else {
        1.0
    }
}
