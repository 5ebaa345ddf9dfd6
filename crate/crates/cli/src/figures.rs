//! Figure presets. Each writes `<fig>.csv` (and `<fig>.svg` with `--svg`).
//!
//! The antenna sweeps (fig3, fig4) always evaluate the PHY with finite M,
//! since the asymptotic mode does not depend on M.

use std::fmt::Write as _;

use pilot_ra::collision::DEFAULT_U_MAX;
use pilot_ra::report::{line_chart_svg, Series};
use pilot_ra::sim::Simulator;
use pilot_ra::{analytic_throughput, build_resolution_table, build_schedule, run_flow_model, run_simulation};
use pilot_ra::{Exec, PhyMode, Protocol, ResolutionTable, SystemConfig};

use crate::{CliError, Context, FigureId};

/// Load used for the throughput sweep.
const FIG3_ACTIVE: usize = 60;
const FIG_M: usize = 50;

fn antenna_sweep() -> Vec<usize> {
    std::iter::once(1).chain((1..=10).map(|k| 10 * k)).collect()
}

fn column_names(protocols: &[Protocol]) -> Vec<String> {
    protocols
        .iter()
        .flat_map(|p| {
            let stem = p.as_str().replace('-', "_");
            [format!("{stem}_sim"), format!("{stem}_analysis")]
        })
        .collect()
}

/// Writes `x,<series...>` rows and the optional chart.
fn emit(
    ctx: &Context,
    fig: &str,
    x_name: &str,
    y_name: &str,
    columns: &[String],
    rows: &[(f64, Vec<f64>)],
) -> Result<(), CliError> {
    let mut body = x_name.to_string();
    for c in columns {
        body.push(',');
        body.push_str(c);
    }
    body.push('\n');
    for (x, ys) in rows {
        let _ = write!(body, "{x}");
        for y in ys {
            let _ = write!(body, ",{y}");
        }
        body.push('\n');
    }
    ctx.write(format!("{fig}.csv"), &ctx.header().with("figure", fig), &body)?;
    if ctx.svg {
        let series: Vec<Series> = columns
            .iter()
            .enumerate()
            .map(|(i, name)| Series {
                name: name.clone(),
                points: rows.iter().map(|(x, ys)| (*x, ys[i])).collect(),
            })
            .collect();
        ctx.write_raw(format!("{fig}.svg"), &line_chart_svg(fig, x_name, y_name, &series))?;
    }
    Ok(())
}

fn with_antennas(cfg: &SystemConfig, m: usize, mode: PhyMode) -> SystemConfig {
    SystemConfig {
        antennas: m,
        phy_mode: mode,
        ..cfg.clone()
    }
}

fn sweep_table(cfg: &SystemConfig) -> ResolutionTable {
    build_resolution_table(cfg, DEFAULT_U_MAX, cfg.mc_replications, Exec::Parallel)
}

fn fig3(ctx: &Context) -> Result<(), CliError> {
    let rows = Exec::Parallel.map_slice(&antenna_sweep(), |&m| {
        let cfg = with_antennas(&ctx.cfg, m, PhyMode::FiniteM);
        let table = sweep_table(&cfg);
        let sim = Simulator::new(&cfg, &table, Exec::Sequential);
        let ys = ctx
            .protocols
            .iter()
            .flat_map(|&p| {
                let trials = sim.fixed_load_trials(FIG3_ACTIVE, cfg.mc_replications, p, cfg.seed);
                let mean = trials.iter().map(|s| s.z_success as f64).sum::<f64>() / trials.len() as f64;
                let analytic = analytic_throughput(FIG3_ACTIVE as f64, &table, cfg.pilots, p).expect("valid load");
                [mean, analytic]
            })
            .collect();
        (m as f64, ys)
    });
    emit(ctx, "fig3", "M", "throughput Z_i^s", &column_names(&ctx.protocols), &rows)
}

fn seeds(ctx: &Context, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|k| ctx.cfg.seed.wrapping_add(k)).collect()
}

fn fig4(ctx: &Context, runs: usize) -> Result<(), CliError> {
    let seeds = seeds(ctx, runs);
    let rows = Exec::Parallel.map_slice(&antenna_sweep(), |&m| {
        let cfg = with_antennas(&ctx.cfg, m, PhyMode::FiniteM);
        let table = sweep_table(&cfg);
        let schedule = build_schedule(&cfg);
        let ys = ctx
            .protocols
            .iter()
            .flat_map(|&p| {
                let sim = seeds
                    .iter()
                    .map(|&s| run_simulation(&cfg, &schedule, &table, p, s, Exec::Sequential).success_probability)
                    .sum::<f64>()
                    / seeds.len() as f64;
                [sim, run_flow_model(&cfg, &schedule, &table, p).success_probability]
            })
            .collect();
        (m as f64, ys)
    });
    emit(ctx, "fig4", "M", "P_s", &column_names(&ctx.protocols), &rows)
}

fn fig5(ctx: &Context, runs: usize) -> Result<(), CliError> {
    let cfg = with_antennas(&ctx.cfg, FIG_M, ctx.cfg.phy_mode);
    let table = ctx.table_for(&cfg)?;
    let schedule = build_schedule(&cfg);
    let seeds = seeds(ctx, runs);
    let mut columns = vec!["new_arrivals".to_string()];
    let mut series: Vec<Vec<f64>> = Vec::new();
    for &p in &ctx.protocols {
        let stem = p.as_str().replace('-', "_");
        let mut active = vec![0.0; cfg.slots];
        for &s in &seeds {
            let r = run_simulation(&cfg, &schedule, &table, p, s, Exec::Parallel);
            for (a, m) in active.iter_mut().zip(&r.slots) {
                *a += m.z_active as f64 / seeds.len() as f64;
            }
        }
        let analysis = run_flow_model(&cfg, &schedule, &table, p);
        columns.push(format!("{stem}_active_sim"));
        columns.push(format!("{stem}_active_analysis"));
        series.push(active);
        series.push(analysis.slots.iter().take(cfg.slots).map(|s| s.active).collect());
    }
    let rows: Vec<(f64, Vec<f64>)> = (0..cfg.slots)
        .map(|i| {
            let mut ys = vec![schedule.counts[i] as f64];
            ys.extend(series.iter().map(|s| s[i]));
            ((i + 1) as f64, ys)
        })
        .collect();
    emit(ctx, "fig5", "slot", "UEs", &columns, &rows)
}

fn fig6(ctx: &Context, runs: usize) -> Result<(), CliError> {
    let cfg = with_antennas(&ctx.cfg, FIG_M, ctx.cfg.phy_mode);
    let table = ctx.table_for(&cfg)?;
    let schedule = build_schedule(&cfg);
    let seeds = seeds(ctx, runs);
    let w = cfg.max_attempts as usize;
    let mut series: Vec<Vec<f64>> = Vec::new();
    for &p in &ctx.protocols {
        // Pool successes over runs before normalizing.
        let mut by_attempt = vec![0.0; w];
        for &s in &seeds {
            let r = run_simulation(&cfg, &schedule, &table, p, s, Exec::Parallel);
            for sess in &r.sessions {
                if let pilot_ra::sim::UeStatus::Succeeded { attempts, .. } = sess.status {
                    by_attempt[attempts as usize - 1] += 1.0;
                }
            }
        }
        series.push(pilot_ra::analysis::cdf_from_counts(&by_attempt));
        series.push(run_flow_model(&cfg, &schedule, &table, p).attempts_cdf);
    }
    let rows: Vec<(f64, Vec<f64>)> = (0..w)
        .map(|r| ((r + 1) as f64, series.iter().map(|s| s.get(r).copied().unwrap_or(f64::NAN)).collect()))
        .collect();
    emit(ctx, "fig6", "attempts", "F_p", &column_names(&ctx.protocols), &rows)
}

pub fn cmd_figure(ctx: &Context, fig: FigureId, runs: usize) -> Result<(), CliError> {
    match fig {
        FigureId::Fig3 => fig3(ctx),
        FigureId::Fig4 => fig4(ctx, runs),
        FigureId::Fig5 => fig5(ctx, runs),
        FigureId::Fig6 => fig6(ctx, runs),
    }
}
