//! `ra-sim`: run the pilot random access simulator and flow model from the
//! command line and reproduce the throughput, success-probability,
//! active-UE and attempt-CDF figures as CSV (plus optional SVG).
//!
//! Exit codes: 0 ok, 2 usage or config error, 3 I/O error, 4 bad table cache.

mod figures;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pilot_ra::collision::DEFAULT_U_MAX;
use pilot_ra::config::load_config_text;
use pilot_ra::report::{write_csv, OutputHeader};
use pilot_ra::{build_resolution_table, build_schedule, run_flow_model, run_simulation};
use pilot_ra::{Exec, PhyMode, Protocol, ResolutionTable, SystemConfig};

#[derive(Debug, Parser)]
#[command(name = "ra-sim", version, about = "Pilot random access simulator for crowded massive MIMO cells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the slot-level Monte Carlo and write slots.csv and summary.csv.
    Simulate(CommonArgs),
    /// Run the expected-value flow model and write analysis.csv.
    Analyze(CommonArgs),
    /// Build the resolution-probability table and write table.csv.
    Table(TableArgs),
    /// Reproduce one of the figures.
    Figure(FigureArgs),
    /// Simulation and flow model side by side for the selected protocols.
    Compare(CommonArgs),
}

#[derive(Debug, Clone, Args)]
struct CommonArgs {
    /// Flat `key = value` config file; defaults apply to absent keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Root seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Both)]
    protocol: ProtocolArg,
    /// PHY evaluation mode; overrides the config's `phy_mode`.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Monte Carlo replications; overrides the config's `mc_replications`.
    #[arg(long)]
    replications: Option<usize>,
    /// Load the resolution table from this CSV instead of building it.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Also write SVG charts where a command supports them.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Clone, Args)]
struct FigureArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    figure: FigureId,
    /// Independent full runs averaged per simulated point.
    #[arg(long, default_value_t = 4)]
    runs: usize,
}

#[derive(Debug, Clone, Args)]
struct TableArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Largest contender count tabulated; larger counts reuse the last row.
    #[arg(long, default_value_t = DEFAULT_U_MAX)]
    u_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    Sucr,
    SucrIpa,
    Both,
}

impl ProtocolArg {
    fn protocols(self) -> Vec<Protocol> {
        match self {
            ProtocolArg::Sucr => vec![Protocol::Sucr],
            ProtocolArg::SucrIpa => vec![Protocol::SucrIpa],
            ProtocolArg::Both => Protocol::BOTH.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Asymptotic,
    FiniteM,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Cache(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Cache(_) => 4,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Cache(m) => write!(f, "table cache error: {m}"),
        }
    }
}

/// Resolved inputs shared by every command.
pub struct Context {
    pub cfg: SystemConfig,
    pub out: PathBuf,
    pub protocols: Vec<Protocol>,
    pub table_path: Option<PathBuf>,
    pub svg: bool,
}

impl Context {
    fn from_args(args: &CommonArgs) -> Result<Self, CliError> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                load_config_text(&text).map_err(|e| CliError::Config(e.to_string()))?
            }
            None => SystemConfig::default(),
        };
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = args.mode {
            cfg.phy_mode = match mode {
                ModeArg::Asymptotic => PhyMode::Asymptotic,
                ModeArg::FiniteM => PhyMode::FiniteM,
            };
        }
        if let Some(r) = args.replications {
            cfg.mc_replications = r;
        }
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
        Ok(Self {
            cfg,
            out: args.out.clone(),
            protocols: args.protocol.protocols(),
            table_path: args.table.clone(),
            svg: args.svg,
        })
    }

    pub fn header(&self) -> OutputHeader {
        OutputHeader::new(&self.cfg, self.cfg.seed)
    }

    /// The cached table if `--table` was given, otherwise a fresh build.
    pub fn table(&self) -> Result<ResolutionTable, CliError> {
        self.table_for(&self.cfg)
    }

    pub fn table_for(&self, cfg: &SystemConfig) -> Result<ResolutionTable, CliError> {
        match &self.table_path {
            Some(path) => load_table(path, cfg.phy_mode),
            None => Ok(build_resolution_table(cfg, DEFAULT_U_MAX, cfg.mc_replications, Exec::Parallel)),
        }
    }

    pub fn write(&self, rel: impl AsRef<Path>, header: &OutputHeader, body: &str) -> Result<(), CliError> {
        let path = self.out.join(rel);
        write_csv(&path, header, body).map_err(|e| CliError::io(&path, e))
    }

    pub fn write_raw(&self, rel: impl AsRef<Path>, body: &str) -> Result<(), CliError> {
        let path = self.out.join(rel);
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))
    }

    /// Subdirectory per protocol when more than one is selected.
    fn protocol_dir(&self, p: Protocol) -> PathBuf {
        if self.protocols.len() > 1 {
            PathBuf::from(p.as_str())
        } else {
            PathBuf::new()
        }
    }
}

fn load_table(path: &Path, expected: PhyMode) -> Result<ResolutionTable, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Cache(format!("{}: {e}", path.display())))?;
    let table = ResolutionTable::from_csv(&text).map_err(|e| {
        CliError::Cache(format!(
            "{}: {e}; rebuild it with `ra-sim table --out <dir>`",
            path.display()
        ))
    })?;
    if table.mode() != expected {
        return Err(CliError::Cache(format!(
            "{}: table was built in {} mode but the run uses {expected}; rebuild it with `ra-sim table`",
            path.display(),
            table.mode()
        )));
    }
    Ok(table)
}

fn cmd_simulate(ctx: &Context) -> Result<(), CliError> {
    let table = ctx.table()?;
    let schedule = build_schedule(&ctx.cfg);
    let w = ctx.cfg.max_attempts as usize;
    for &p in &ctx.protocols {
        let report = run_simulation(&ctx.cfg, &schedule, &table, p, ctx.cfg.seed, Exec::Parallel);
        let header = ctx.header().with("protocol", p);
        let dir = ctx.protocol_dir(p);
        fs::create_dir_all(ctx.out.join(&dir)).map_err(|e| CliError::io(&ctx.out.join(&dir), e))?;
        ctx.write(dir.join("slots.csv"), &header, &report.slots_csv(w))?;
        ctx.write(dir.join("summary.csv"), &header, &report.summary_csv(&ctx.cfg.hash_hex()))?;
        eprintln!(
            "{p}: P_s = {:.4}, succeeded {}, dropped {}",
            report.success_probability, report.succeeded, report.dropped
        );
    }
    Ok(())
}

fn cmd_analyze(ctx: &Context) -> Result<(), CliError> {
    let table = ctx.table()?;
    let schedule = build_schedule(&ctx.cfg);
    for &p in &ctx.protocols {
        let report = run_flow_model(&ctx.cfg, &schedule, &table, p);
        let dir = ctx.protocol_dir(p);
        fs::create_dir_all(ctx.out.join(&dir)).map_err(|e| CliError::io(&ctx.out.join(&dir), e))?;
        ctx.write(dir.join("analysis.csv"), &ctx.header().with("protocol", p), &report.to_csv())?;
        eprintln!("{p}: analytic P_s = {:.4}", report.success_probability);
    }
    Ok(())
}

fn cmd_table(ctx: &Context, u_max: usize) -> Result<(), CliError> {
    if u_max == 0 {
        return Err(CliError::Config("u_max must be at least 1".into()));
    }
    let table = match &ctx.table_path {
        Some(path) => load_table(path, ctx.cfg.phy_mode)?,
        None => build_resolution_table(&ctx.cfg, u_max, ctx.cfg.mc_replications, Exec::Parallel),
    };
    let header = ctx.header().with("u_max", table.u_max()).with("replications", table.replications());
    ctx.write("table.csv", &header, &table.to_csv())
}

fn cmd_compare(ctx: &Context) -> Result<(), CliError> {
    let table = ctx.table()?;
    let schedule = build_schedule(&ctx.cfg);
    let mut body = String::from("protocol,source,P_s");
    for r in 1..=ctx.cfg.max_attempts {
        body.push_str(&format!(",F_p({r})"));
    }
    body.push('\n');
    for &p in &ctx.protocols {
        let sim = run_simulation(&ctx.cfg, &schedule, &table, p, ctx.cfg.seed, Exec::Parallel);
        let ana = run_flow_model(&ctx.cfg, &schedule, &table, p);
        let row = |source: &str, ps: f64, cdf: &[f64]| {
            let mut s = format!("{p},{source},{ps}");
            for f in cdf {
                s.push_str(&format!(",{f}"));
            }
            s.push('\n');
            s
        };
        body.push_str(&row("simulation", sim.success_probability, &sim.attempts_cdf.values));
        body.push_str(&row("analysis", ana.success_probability, &ana.attempts_cdf));
    }
    ctx.write("compare.csv", &ctx.header(), &body)
}

fn configure_threads() {
    if let Some(n) = std::env::var("RA_SIM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => Context::from_args(a).and_then(|c| cmd_simulate(&c)),
        Command::Analyze(a) => Context::from_args(a).and_then(|c| cmd_analyze(&c)),
        Command::Table(a) => Context::from_args(&a.common).and_then(|c| cmd_table(&c, a.u_max)),
        Command::Compare(a) => Context::from_args(a).and_then(|c| cmd_compare(&c)),
        Command::Figure(a) => {
            Context::from_args(&a.common).and_then(|c| figures::cmd_figure(&c, a.figure, a.runs.max(1)))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ra-sim: {e}");
            ExitCode::from(e.code())
        }
    }
}
