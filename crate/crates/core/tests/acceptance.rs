//! Acceptance suite. Runs every exit criterion at its pinned tolerance and
//! prints one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_complex::Complex64;
use pilot_ra::analysis::{run_flow_model, throughput_terms};
use pilot_ra::collision::{build_resolution_table, expected_idle_pilots, ResolutionTable};
use pilot_ra::phy::{correlate_with_noise, draw_channel, draw_cn, PhyParams};
use pilot_ra::report::{render_csv, OutputHeader};
use pilot_ra::rng::{substream, Tag};
use pilot_ra::sim::{run_simulation, SimulationReport, Simulator};
use pilot_ra::traffic::build_schedule;
use pilot_ra::{acb_factor, Exec, PhyMode, Protocol, SystemConfig};
use rand::Rng;

const SEEDS: [u64; 4] = [1, 2, 3, 4];

/// Outcome of one sub-check inside a criterion.
struct Check {
    ok: bool,
    line: String,
}

fn check(ok: bool, line: String) -> Check {
    Check { ok, line }
}

fn reference_config(mode: PhyMode, antennas: usize) -> SystemConfig {
    SystemConfig {
        phy_mode: mode,
        antennas,
        ..SystemConfig::default()
    }
}

struct MultiSeed {
    success_probability: f64,
    first_attempt: f64,
    max_active_ratio: f64,
}

fn run_seeds(cfg: &SystemConfig, table: &ResolutionTable, protocol: Protocol) -> MultiSeed {
    let schedule = build_schedule(cfg);
    let runs: Vec<SimulationReport> = SEEDS
        .iter()
        .map(|&s| run_simulation(cfg, &schedule, table, protocol, s, Exec::Parallel))
        .collect();
    let k = runs.len() as f64;
    let max_active_ratio = runs
        .iter()
        .flat_map(|r| r.slots.iter().take(cfg.slots))
        .filter(|s| s.z_new >= 5)
        .map(|s| s.z_active as f64 / s.z_new as f64)
        .fold(0.0, f64::max);
    MultiSeed {
        success_probability: runs.iter().map(|r| r.success_probability).sum::<f64>() / k,
        first_attempt: runs.iter().map(|r| r.attempts_cdf.values[0]).sum::<f64>() / k,
        max_active_ratio,
    }
}

/// Finite-M runs at M = 20, 50, 100 shared by criteria 1, 2 and the
/// active-vs-new soft target.
struct FullRuns {
    by_m: Vec<(usize, MultiSeed, MultiSeed)>,
}

fn full_runs() -> FullRuns {
    let by_m = [20usize, 50, 100]
        .into_iter()
        .map(|m| {
            let cfg = reference_config(PhyMode::FiniteM, m);
            let table = build_resolution_table(&cfg, 25, cfg.mc_replications, Exec::Parallel);
            let sucr = run_seeds(&cfg, &table, Protocol::Sucr);
            let ipa = run_seeds(&cfg, &table, Protocol::SucrIpa);
            (m, sucr, ipa)
        })
        .collect();
    FullRuns { by_m }
}

fn criterion_1(runs: &FullRuns) -> Vec<Check> {
    let mut out = Vec::new();
    for (m, sucr, ipa) in &runs.by_m {
        let p = ipa.success_probability;
        out.push(check(
            (0.85..=0.95).contains(&p),
            format!("M={m}: SUCR-IPA P_s = {p:.4} in [0.85, 0.95]"),
        ));
        let gap = p - sucr.success_probability;
        out.push(check(
            gap >= 0.10,
            format!("M={m}: SUCR P_s = {:.4}, gap {gap:.4} >= 0.10", sucr.success_probability),
        ));
    }
    out
}

fn criterion_2(runs: &FullRuns) -> Vec<Check> {
    let (_, sucr, ipa) = runs.by_m.iter().find(|(m, _, _)| *m == 50).unwrap();
    vec![
        check(
            (0.85..=0.95).contains(&ipa.first_attempt),
            format!("M=50: SUCR-IPA F_p(1) = {:.4} in [0.85, 0.95]", ipa.first_attempt),
        ),
        check(
            (0.48..=0.62).contains(&sucr.first_attempt),
            format!("M=50: SUCR F_p(1) = {:.4} in [0.48, 0.62]", sucr.first_attempt),
        ),
    ]
}

fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

fn criterion_3() -> Vec<Check> {
    let sweep: Vec<usize> = std::iter::once(1).chain((1..=10).map(|k| 10 * k)).collect();
    let reps = 2000;
    let mut out = Vec::new();
    let mut ipa_curve = Vec::new();
    for &m in &sweep {
        let cfg = reference_config(PhyMode::FiniteM, m);
        let table = build_resolution_table(&cfg, 25, 5000, Exec::Parallel);
        let sim = Simulator::new(&cfg, &table, Exec::Parallel);
        let series = |p| -> Vec<f64> {
            sim.fixed_load_trials(60, reps, p, 11)
                .iter()
                .map(|s| s.z_success as f64)
                .collect()
        };
        let (a, ha) = mean_ci(&series(Protocol::Sucr));
        let (b, hb) = mean_ci(&series(Protocol::SucrIpa));
        let separated = b - hb > a + ha;
        let ok = b >= a && (m < 10 || separated);
        out.push(check(
            ok,
            format!("M={m}: SUCR-IPA {b:.3}±{hb:.3} vs SUCR {a:.3}±{ha:.3}"),
        ));
        ipa_curve.push((m as f64, b));
    }
    let at = |m: f64| ipa_curve.iter().find(|(x, _)| *x == m).unwrap().1;
    let early = (at(20.0) - at(1.0)) / 19.0;
    let late = (at(100.0) - at(20.0)) / 80.0;
    out.push(check(
        early >= 3.0 * late,
        format!("gain per antenna: {early:.4} over [1,20] vs {late:.4} over [20,100] (need >= 3x)"),
    ));
    out
}

fn criterion_4() -> Vec<Check> {
    let cfg = reference_config(PhyMode::Asymptotic, 50);
    let table = build_resolution_table(&cfg, 25, 100_000, Exec::Parallel);
    let sim = Simulator::new(&cfg, &table, Exec::Parallel);
    let mut out = Vec::new();
    for z in [20usize, 60, 100] {
        let terms = throughput_terms(z as f64, &table, cfg.pilots).unwrap();
        for p in Protocol::BOTH {
            let trials = sim.fixed_load_trials(z, 10_000, p, 5);
            let simulated = trials.iter().map(|s| s.z_success as f64).sum::<f64>() / trials.len() as f64;
            let analytic = terms.total(p);
            let rel = (analytic - simulated).abs() / simulated;
            out.push(check(
                rel <= 0.05,
                format!("Z={z} {p}: analysis {analytic:.3} vs simulation {simulated:.3} (rel err {rel:.4} <= 0.05)"),
            ));
        }
    }
    out
}

fn criterion_5() -> Vec<Check> {
    let cfg = reference_config(PhyMode::Asymptotic, 50);
    let table = build_resolution_table(&cfg, 25, 2000, Exec::Parallel);
    let sim = Simulator::new(&cfg, &table, Exec::Parallel);
    let trials = sim.fixed_load_trials(60, 10_000, Protocol::SucrIpa, 17);
    let mean = trials.iter().map(|s| s.g_idle as f64).sum::<f64>() / trials.len() as f64;
    let expected = expected_idle_pilots(60.0, 60);
    let rel = (mean - expected).abs() / expected;
    vec![
        check(
            (expected - 21.8875).abs() < 1e-3,
            format!("60*(59/60)^60 = {expected:.4}"),
        ),
        check(rel <= 0.02, format!("mean G_i = {mean:.4} (rel err {rel:.4} <= 0.02)")),
    ]
}

fn criterion_6() -> Vec<Check> {
    let mut out = Vec::new();
    let asym = reference_config(PhyMode::Asymptotic, 50);
    let finite = reference_config(PhyMode::FiniteM, 10);
    for cfg in [&asym, &finite] {
        let t = build_resolution_table(cfg, 25, 4000, Exec::Parallel);
        let exact = (1..=25).all(|u| (0..=u).map(|d| t.count(u, d)).sum::<u64>() == t.replications());
        out.push(check(exact, format!("{} table rows sum to R_mc exactly", cfg.phy_mode)));
    }
    let t = build_resolution_table(&asym, 25, 20_000, Exec::Parallel);
    let d_le_1 = (1..=25).all(|u| (2..=u).all(|d| t.count(u, d) == 0));
    out.push(check(
        d_le_1 && t.prob(1, 1) == 1.0,
        format!("asymptotic: d <= 1 everywhere, Pr(D_1^1) = {}", t.prob(1, 1)),
    ));

    let schedule = build_schedule(&asym);
    let mut acb_values = Vec::new();
    let mut conserved = true;
    let mut cdf_ok = true;
    for p in Protocol::BOTH {
        let r = run_simulation(&asym, &schedule, &t, p, 1, Exec::Parallel);
        acb_values.extend(r.slots.iter().map(|s| s.acb));
        conserved &= r.succeeded + r.dropped + r.unresolved == asym.total_arrivals;
        let v = &r.attempts_cdf.values;
        cdf_ok &= v.windows(2).all(|w| w[1] >= w[0]) && v[v.len() - 1] == 1.0;
        let a = run_flow_model(&asym, &schedule, &t, p);
        let v = &a.attempts_cdf;
        cdf_ok &= v.windows(2).all(|w| w[1] >= w[0]) && v[v.len() - 1] == 1.0;
    }
    let in_range = acb_values.iter().all(|&x| x > 0.0 && x <= 1.0);
    let throttled = acb_values.iter().any(|&x| x < 1.0);
    let open = acb_values.iter().any(|&x| x == 1.0);
    out.push(check(
        in_range && throttled && open && acb_factor(40.0, 20.0) == 0.5 && acb_factor(5.0, 20.0) == 1.0,
        format!("ACB factor in (0,1], both branches hit (throttled={throttled}, open={open})"),
    ));
    let total: usize = schedule.counts.iter().sum();
    let peak = *schedule.counts.iter().max().unwrap();
    let peak_slot = schedule.counts.iter().position(|&c| c == peak).unwrap() + 1;
    out.push(check(
        total == asym.total_arrivals && (39..=41).contains(&peak_slot),
        format!("schedule sums to {total}, Beta(3,4) peak at slot {peak_slot} ({peak} arrivals)"),
    ));
    out.push(check(cdf_ok, "F_p monotone with F_p(W) = 1 (simulation and flow model)".into()));
    out.push(check(conserved, "N = succeeded + dropped + never-activated".into()));
    out
}

fn rendered_outputs(cfg: &SystemConfig, exec: Exec) -> (String, String) {
    let table = build_resolution_table(cfg, 25, 3000, exec);
    let r = run_simulation(cfg, &build_schedule(cfg), &table, Protocol::SucrIpa, 99, exec);
    let header = OutputHeader::new(cfg, 99).with("protocol", Protocol::SucrIpa);
    (
        render_csv(&header, &r.slots_csv(cfg.max_attempts as usize)),
        render_csv(&header, &r.summary_csv(&cfg.hash_hex())),
    )
}

fn criterion_7() -> Vec<Check> {
    let mut out = Vec::new();
    for cfg in [reference_config(PhyMode::Asymptotic, 50), reference_config(PhyMode::FiniteM, 16)] {
        let reference = rendered_outputs(&cfg, Exec::Sequential);
        let mut same = true;
        for threads in [1, 2, 4] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            same &= pool.install(|| rendered_outputs(&cfg, Exec::Parallel)) == reference;
        }
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        std::fs::write(&a, &reference.0).unwrap();
        std::fs::write(&b, rendered_outputs(&cfg, Exec::Parallel).0).unwrap();
        same &= std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap();
        out.push(check(
            same,
            format!("{}: slots.csv and summary.csv byte-identical across 1/2/4 workers and sequential", cfg.phy_mode),
        ));
    }
    out
}

/// Forms the full received block `Y = sum sqrt(rho) h_k psi_k^T + N` with
/// explicit DFT pilots and correlates it with every pilot.
fn full_block_correlation(
    rho: f64,
    pilots: &[Vec<Complex64>],
    channels: &[(usize, Vec<Complex64>)],
    noise: &[Vec<Complex64>],
) -> Vec<Vec<Complex64>> {
    let m = noise.len();
    let l = pilots[0].len();
    let mut y = noise.to_vec();
    for (t, h) in channels {
        for i in 0..m {
            for j in 0..l {
                y[i][j] += rho.sqrt() * h[i] * pilots[*t][j];
            }
        }
    }
    pilots
        .iter()
        .map(|xi| {
            let norm = xi.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
            (0..m)
                .map(|i| (0..l).map(|j| y[i][j] * xi[j].conj()).sum::<Complex64>() / norm)
                .collect()
        })
        .collect()
}

fn criterion_8() -> Vec<Check> {
    let mut rng = substream(2024, Tag::Replication, 0, 0);
    let mut worst = 0.0f64;
    for case in 0..100u64 {
        let m = rng.random_range(1..=32);
        let l = rng.random_range(1..=64);
        let tau = rng.random_range(1..=l);
        let k = rng.random_range(0..=5);
        let params = PhyParams {
            mode: PhyMode::FiniteM,
            antennas: m,
            pilot_length: l,
            ul_power: rng.random_range(0.1..2.0),
            dl_power: 1.0,
            noise_var: rng.random_range(0.1..2.0),
            decision_bias: 0.0,
            idle_threshold: 2.0,
        };
        let pilots: Vec<Vec<Complex64>> = (0..tau)
            .map(|t| {
                (0..l)
                    .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (t * j) as f64 / l as f64))
                    .collect()
            })
            .collect();
        let channels: Vec<(usize, Vec<Complex64>)> = (0..k)
            .map(|_| (rng.random_range(0..tau), draw_channel(rng.random_range(0.5..50.0), m, &mut rng)))
            .collect();
        let block_noise: Vec<Vec<Complex64>> = (0..m).map(|_| draw_cn(params.noise_var, l, &mut rng)).collect();
        let full = full_block_correlation(params.ul_power, &pilots, &channels, &block_noise);
        for (t, xi) in pilots.iter().enumerate() {
            // The same noise draw seen through pilot t.
            let n_t: Vec<Complex64> = block_noise
                .iter()
                .map(|row| row.iter().zip(xi).map(|(n, x)| n * x.conj()).sum::<Complex64>() / (l as f64).sqrt())
                .collect();
            let hs: Vec<&[Complex64]> = channels.iter().filter(|(p, _)| *p == t).map(|(_, h)| h.as_slice()).collect();
            let short = correlate_with_noise(&params, &hs, &n_t).signal;
            let scale = full[t].iter().map(|c| c.norm()).fold(1e-300, f64::max);
            let err = short.iter().zip(&full[t]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
            worst = worst.max(err);
            if err > 1e-10 {
                return vec![check(false, format!("case {case}, pilot {t}: relative error {err:e}"))];
            }
        }
    }
    vec![check(true, format!("100 random cases, worst relative error {worst:e} <= 1e-10"))]
}

fn soft_targets(runs: &FullRuns) {
    let (_, sucr, ipa) = runs.by_m.iter().find(|(m, _, _)| *m == 50).unwrap();
    let tag = |ok: bool| if ok { "met" } else { "missed" };
    println!(
        "[SOFT] active/new tracking at M=50: SUCR-IPA max Z_i/Z_i^1 = {:.3} (target <= 1.3, {}); SUCR = {:.3} (target >= 2, {})",
        ipa.max_active_ratio,
        tag(ipa.max_active_ratio <= 1.3),
        sucr.max_active_ratio,
        tag(sucr.max_active_ratio >= 2.0)
    );
}

fn run(id: &str, title: &str, f: impl FnOnce() -> Vec<Check>) -> bool {
    let start = Instant::now();
    let checks = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(c) => c,
        Err(_) => vec![check(false, "panicked".into())],
    };
    let ok = checks.iter().all(|c| c.ok);
    println!(
        "[{}] {id} {title} ({:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    for c in &checks {
        println!("    {} {}", if c.ok { "ok  " } else { "FAIL" }, c.line);
    }
    ok
}

fn main() {
    // `cargo test -- --list` and filters: this target has no sub-tests to list.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let start = Instant::now();
    let runs = full_runs();
    println!("shared M in {{20, 50, 100}} runs ready in {:.1}s", start.elapsed().as_secs_f64());
    let results = [
        run("C1", "P_s vs M (SUCR-IPA in [0.85,0.95], SUCR >= 0.10 lower)", || criterion_1(&runs)),
        run("C2", "attempt CDF at M=50", || criterion_2(&runs)),
        run("C3", "throughput vs M at Z_i=60", criterion_3),
        run("C4", "analysis vs simulation throughput", criterion_4),
        run("C5", "idle-pilot occupancy", criterion_5),
        run("C6", "property suite", criterion_6),
        run("C7", "determinism across worker counts", criterion_7),
        run("C8", "PHY shortcut vs full block correlation", criterion_8),
    ];
    soft_targets(&runs);
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!(
        "acceptance: {} passed, {failed} failed ({:.1}s)",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
