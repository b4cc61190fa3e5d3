//! `seqshare`: evaluate, sweep, optimize and sample the three-sided sequential
//! measurement scenario, and enumerate the local hidden variable bound.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;
use config::{ObjectiveSpec, RunConfig, Side, SpaceSpec, StateSpec};

#[derive(Parser, Debug)]
#[command(name = "seqshare", version, about = "Nonlocality sharing under sequential weak measurements")]
struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Initial state: `ghz`, `mixed`, or a file of 8x8 complex entries.
    #[arg(long, global = true, value_name = "STATE")]
    state: Option<String>,
    /// Precision factor shared by all three sides.
    #[arg(long, global = true, conflicts_with_all = ["g1", "g2", "g3"])]
    g: Option<f64>,
    #[arg(long, global = true)]
    g1: Option<f64>,
    #[arg(long, global = true)]
    g2: Option<f64>,
    #[arg(long, global = true)]
    g3: Option<f64>,
    /// Main output file (standard output by default).
    #[arg(long, short, global = true, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    echo_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// All eight MABK quantities, closed forms and violation flags.
    Evaluate {
        /// Also write the 64x64 joint probability table as CSV.
        #[arg(long, value_name = "FILE")]
        table: Option<PathBuf>,
    },
    /// B1..B8 over a grid of G, and violation windows.
    Sweep(SweepArgs),
    /// Maximize one quantity, or the minimum over a set.
    Optimize(OptimizeArgs),
    /// Monte Carlo estimate of one quantity.
    Sample(SampleArgs),
    /// Exhaustive local hidden variable bound.
    Lhv,
}

/// Comma-separated omega indices.
#[derive(Clone, Debug)]
struct OmegaList(Vec<u8>);

fn parse_omegas(s: &str) -> Result<OmegaList, String> {
    s.split(',')
        .map(|w| w.trim().parse::<u8>().map_err(|_| format!("bad omega {w:?}")))
        .collect::<Result<_, _>>()
        .map(OmegaList)
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    start: Option<f64>,
    #[arg(long)]
    stop: Option<f64>,
    /// Number of grid points; 0 skips the grid.
    #[arg(long)]
    points: Option<usize>,
    /// Vary only this side.
    #[arg(long, value_enum)]
    side: Option<Side>,
    /// Omega set for a violation window, e.g. `1,8`. Repeatable.
    #[arg(long = "window", value_name = "OMEGAS", value_parser = parse_omegas)]
    windows: Vec<OmegaList>,
    /// Bisection tolerance for window edges.
    #[arg(long)]
    tol: Option<f64>,
    /// File for the window records (standard output by default).
    #[arg(long, value_name = "FILE")]
    intervals_output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    /// Maximize B_omega.
    #[arg(long, conflicts_with = "min_over")]
    omega: Option<u8>,
    /// Maximize the minimum over these omegas, e.g. `1,2,3,4,5,6,7,8`.
    #[arg(long, value_name = "OMEGAS", value_parser = parse_omegas)]
    min_over: Option<OmegaList>,
    #[arg(long, value_enum)]
    space: Option<SpaceSpec>,
    /// Free polar angles as well as azimuths.
    #[arg(long)]
    full_sphere: bool,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    step_floor: Option<f64>,
    #[arg(long)]
    max_evaluations: Option<usize>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    omega: Option<u8>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-round CSV log.
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Configuration file (or defaults) with command-line overrides applied.
fn build_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(Failure::config)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &cli.state {
        c.state = s.parse::<StateSpec>().map_err(Failure::config)?;
    }
    if let Some(g) = cli.g {
        c.set_equal_g(g);
    }
    for (k, g) in [cli.g1, cli.g2, cli.g3].into_iter().enumerate() {
        if let Some(g) = g {
            c.set_side_g(k, g);
        }
    }
    if cli.output.is_some() {
        c.output.clone_from(&cli.output);
    }
    if cli.threads.is_some() {
        c.threads = cli.threads;
    }
    match &cli.command {
        Command::Evaluate { table } => {
            if table.is_some() {
                c.evaluate.table.clone_from(table);
            }
        }
        Command::Sweep(a) => {
            let s = &mut c.sweep;
            set(&mut s.start, a.start);
            set(&mut s.stop, a.stop);
            set(&mut s.points, a.points);
            if a.side.is_some() {
                s.side = a.side;
            }
            if !a.windows.is_empty() {
                s.windows = a.windows.iter().map(|w| w.0.clone()).collect();
            }
            set(&mut s.tol, a.tol);
            if a.intervals_output.is_some() {
                s.intervals_output.clone_from(&a.intervals_output);
            }
        }
        Command::Optimize(a) => {
            let o = &mut c.optimize;
            if let Some(w) = a.omega {
                o.objective = ObjectiveSpec::Single(w);
            }
            if let Some(ws) = &a.min_over {
                o.objective = ObjectiveSpec::MinOver(ws.0.clone());
            }
            set(&mut o.space, a.space);
            o.full_sphere |= a.full_sphere;
            set(&mut o.restarts, a.restarts);
            set(&mut o.seed, a.seed);
            set(&mut o.step_floor, a.step_floor);
            set(&mut o.max_evaluations, a.max_evaluations);
        }
        Command::Sample(a) => {
            let s = &mut c.sample;
            set(&mut s.omega, a.omega);
            set(&mut s.rounds, a.rounds);
            set(&mut s.seed, a.seed);
            if a.log.is_some() {
                s.log.clone_from(&a.log);
            }
        }
        Command::Lhv => {}
    }
    Ok(c)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = build_config(cli)?;
    let resolved = config.resolve().map_err(Failure::config)?;
    if cli.echo_config {
        println!("{}", config.to_json());
        return Ok(());
    }
    if let Some(n) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("threads: {e}")))?;
    }
    match &cli.command {
        Command::Evaluate { .. } => commands::evaluate(&config, &resolved),
        Command::Sweep(_) => commands::sweep(&config, &resolved),
        Command::Optimize(_) => commands::optimize(&config, &resolved),
        Command::Sample(_) => commands::sample(&config, &resolved),
        Command::Lhv => commands::lhv(&config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("seqshare: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
