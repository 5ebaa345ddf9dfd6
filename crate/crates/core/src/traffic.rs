//! Bursty M2M arrivals: per-slot new-arrival counts from a beta activation
//! profile over the observation window.

use statrs::function::beta::{beta_reg, ln_beta};

use crate::config::SystemConfig;
use crate::error::DomainError;

/// Beta activation profile over `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaTraffic {
    pub alpha: f64,
    pub theta: f64,
    /// Observation window length T in milliseconds.
    pub horizon: f64,
    pub slots: usize,
}

impl From<&SystemConfig> for BetaTraffic {
    fn from(cfg: &SystemConfig) -> Self {
        Self {
            alpha: cfg.traffic_alpha,
            theta: cfg.traffic_theta,
            horizon: cfg.slots as f64 * cfg.slot_interval,
            slots: cfg.slots,
        }
    }
}

impl BetaTraffic {
    /// Activation density `t^(α-1) (T-t)^(θ-1) / (T^(α+θ-1) B(α,θ))`, per millisecond.
    pub fn beta_pdf(&self, t: f64) -> Result<f64, DomainError> {
        let big_t = self.horizon;
        if !(0.0..=big_t).contains(&t) {
            return Err(DomainError {
                what: "t",
                value: t,
                lo: 0.0,
                hi: big_t,
            });
        }
        let (a, b) = (self.alpha, self.theta);
        // Work on the unit interval to avoid overflow in T^(α+θ-1).
        let x = t / big_t;
        let log_kernel = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln();
        let unit = (log_kernel - ln_beta(a, b)).exp();
        let unit = if unit.is_nan() {
            // 0·∞ at an endpoint with an exponent of exactly zero.
            if x == 0.0 && a == 1.0 || x == 1.0 && b == 1.0 {
                (-ln_beta(a, b)).exp()
            } else {
                0.0
            }
        } else {
            unit
        };
        Ok(unit / big_t)
    }

    /// Probability mass of slot `i` (1-based): the incomplete-beta difference
    /// over `[(i-1)/eta, i/eta]`.
    pub fn slot_fraction(&self, i: usize) -> f64 {
        assert!(i >= 1 && i <= self.slots, "slot index {i} outside 1..={}", self.slots);
        let cdf = |k: usize| {
            if k == 0 {
                0.0
            } else if k == self.slots {
                1.0
            } else {
                beta_reg(self.alpha, self.theta, k as f64 / self.slots as f64)
            }
        };
        (cdf(i) - cdf(i - 1)).max(0.0)
    }
}

/// New-arrival counts per slot; `counts[i - 1]` is the count for slot `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalSchedule {
    pub counts: Vec<usize>,
    pub horizon_ms: f64,
}

impl ArrivalSchedule {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// CSV body with columns `slot_index,new_arrivals`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot_index,new_arrivals\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, c));
        }
        out
    }
}

/// Integerizes `N * slot_fraction(i)` by largest remainder so the counts sum
/// to exactly `N`. Ties go to the earlier slot.
pub fn build_schedule(cfg: &SystemConfig) -> ArrivalSchedule {
    let traffic = BetaTraffic::from(cfg);
    let n = cfg.total_arrivals;
    let ideal: Vec<f64> = (1..=cfg.slots)
        .map(|i| n as f64 * traffic.slot_fraction(i))
        .collect();
    let mut counts: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..cfg.slots).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - ideal[a].floor();
        let rb = ideal[b] - ideal[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    ArrivalSchedule {
        counts,
        horizon_ms: traffic.horizon,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn traffic(alpha: f64, theta: f64, horizon: f64, slots: usize) -> BetaTraffic {
        BetaTraffic {
            alpha,
            theta,
            horizon,
            slots,
        }
    }

    /// Composite Simpson rule on [a, b]; independent of the incomplete-beta path.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn uniform_profile_is_flat() {
        let t = traffic(1.0, 1.0, 1000.0, 100);
        for x in [0.0, 1.0, 250.0, 999.0, 1000.0] {
            assert!((t.beta_pdf(x).unwrap() - 1e-3).abs() < 1e-15);
        }
        for i in 1..=100 {
            assert!((t.slot_fraction(i) - 0.01).abs() < 1e-14);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        for (a, b) in [(3.0, 4.0), (1.0, 1.0), (2.0, 5.0)] {
            let t = traffic(a, b, 1000.0, 100);
            let total = simpson(|x| t.beta_pdf(x).unwrap(), 0.0, 1000.0, 20_000);
            assert!((total - 1.0).abs() < 1e-9, "({a},{b}) -> {total}");
        }
    }

    #[test]
    fn density_mode_for_beta_3_4() {
        let t = traffic(3.0, 4.0, 1000.0, 100);
        let best = (0..=1000)
            .map(|k| k as f64)
            .max_by(|x, y| t.beta_pdf(*x).unwrap().total_cmp(&t.beta_pdf(*y).unwrap()))
            .unwrap();
        assert_eq!(best, 400.0);
    }

    #[test]
    fn outside_window_is_domain_error() {
        let t = traffic(3.0, 4.0, 1000.0, 100);
        assert!(t.beta_pdf(-1.0).is_err());
        assert!(t.beta_pdf(1000.5).is_err());
    }

    #[test]
    fn slot_fractions_telescope() {
        let t = traffic(3.0, 4.0, 1000.0, 100);
        let s: f64 = (1..=100).map(|i| t.slot_fraction(i)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slot_forty_matches_quadrature() {
        let t = traffic(3.0, 4.0, 1000.0, 100);
        let oracle = simpson(|x| t.beta_pdf(x).unwrap(), 390.0, 400.0, 2000);
        // Frozen from the quadrature oracle.
        assert!((oracle - 0.020_728_771).abs() < 1e-8, "{oracle}");
        assert!((t.slot_fraction(40) - oracle).abs() < 1e-12);
        for i in [1, 13, 41, 77, 100] {
            let lo = (i - 1) as f64 * 10.0;
            let q = simpson(|x| t.beta_pdf(x).unwrap(), lo, lo + 10.0, 2000);
            assert!((t.slot_fraction(i) - q).abs() < 1e-12, "slot {i}");
        }
    }

    #[test]
    fn uniform_schedule_is_twenty_per_slot() {
        let cfg = SystemConfig {
            traffic_alpha: 1.0,
            traffic_theta: 1.0,
            ..SystemConfig::default()
        };
        let s = build_schedule(&cfg);
        assert!(s.counts.iter().all(|&c| c == 20));
        assert_eq!(s.horizon_ms, 1000.0);
    }

    #[test]
    fn default_schedule_peaks_near_slot_forty() {
        let s = build_schedule(&SystemConfig::default());
        assert_eq!(s.total(), 2000);
        assert_eq!(s.counts.len(), 100);
        let peak = s.counts.iter().copied().max().unwrap();
        let peak_slot = s.counts.iter().position(|&c| c == peak).unwrap() + 1;
        assert!((39..=41).contains(&peak_slot), "peak slot {peak_slot}");
        assert!((40..=42).contains(&peak), "peak count {peak}");
    }

    #[test]
    fn csv_has_one_row_per_slot() {
        let s = build_schedule(&SystemConfig::default());
        let csv = s.to_csv();
        assert_eq!(csv.lines().count(), 101);
        assert!(csv.starts_with("slot_index,new_arrivals\n1,"));
    }

    proptest! {
        #[test]
        fn schedule_conserves_arrivals(
            n in 1usize..5000,
            slots in 1usize..200,
            alpha in 0.3f64..6.0,
            theta in 0.3f64..6.0,
        ) {
            let cfg = SystemConfig {
                total_arrivals: n,
                slots,
                traffic_alpha: alpha,
                traffic_theta: theta,
                ..SystemConfig::default()
            };
            let s = build_schedule(&cfg);
            prop_assert_eq!(s.counts.len(), slots);
            prop_assert_eq!(s.total(), n);
        }

        #[test]
        fn schedule_is_unimodal_up_to_rounding(
            alpha in 1.2f64..6.0,
            theta in 1.2f64..6.0,
        ) {
            let cfg = SystemConfig {
                traffic_alpha: alpha,
                traffic_theta: theta,
                ..SystemConfig::default()
            };
            let c = build_schedule(&cfg).counts;
            let peak = c.iter().position(|&x| x == *c.iter().max().unwrap()).unwrap();
            for w in c[..=peak].windows(2) {
                prop_assert!(w[1] + 1 >= w[0]);
            }
            for w in c[peak..].windows(2) {
                prop_assert!(w[0] + 1 >= w[1]);
            }
        }
    }
}
