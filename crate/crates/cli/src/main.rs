//! `pins`: path-integral nested sampling from the command line.

mod config;
mod error;
mod output;
mod plot;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pins::selftest::selftest_i9;

use config::{Format, RunConfig};
use error::CliError;
use output::{trace_path, ResultSink, TraceWriter};
use sweep::{run_scan, run_sweep, ScanKind};

#[derive(Parser)]
#[command(name = "pins", version, about = "Rovibrational partition functions by path-integral nested sampling")]
struct Cli {
    /// Master seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (run, sweeps, selftest) or directory (plot).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every temperature of a configuration file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Nine-dimensional Gaussian benchmark with known evidence.
    #[command(name = "selftest-i9")]
    SelftestI9 {
        #[arg(long, default_value_t = 1000)]
        live_points: usize,
        #[arg(long, default_value_t = 800)]
        walk_steps: usize,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        walkers: usize,
    },
    /// Repeat a run for several box lengths.
    #[command(name = "sweep-l")]
    SweepL {
        config: PathBuf,
        /// Box lengths in bohr.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Repeat a run for several bead numbers.
    #[command(name = "sweep-m")]
    SweepM {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Plot a result table (CSV or JSON) to SVG files.
    Plot { results: PathBuf },
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    live_points: Option<usize>,
    #[arg(long)]
    walk_steps: Option<usize>,
    #[arg(long)]
    walkers: Option<usize>,
    #[arg(long)]
    box_length: Option<f64>,
    /// Write per-iteration traces next to the results.
    #[arg(long)]
    write_traces: bool,
    /// Leave the wall_s column empty so that output is reproducible.
    #[arg(long)]
    no_wall_time: bool,
}

impl clap::ValueEnum for Format {
    fn value_variants<'a>() -> &'a [Self] {
        &[Format::Csv, Format::Json]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pins: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides, cli.seed, cli.out.as_deref())?;
            with_outputs(&cfg, |cfg, sink, traces| run_sweep(cfg, sink, traces).map(|_| ()))
        }
        Command::SweepL { config, values, overrides } => {
            let cfg = load(&config, &overrides, cli.seed, cli.out.as_deref())?;
            with_outputs(&cfg, |cfg, sink, traces| {
                run_scan(cfg, ScanKind::BoxLength, &values, sink, traces).map(|_| ())
            })
        }
        Command::SweepM { config, values, overrides } => {
            let cfg = load(&config, &overrides, cli.seed, cli.out.as_deref())?;
            with_outputs(&cfg, |cfg, sink, traces| run_scan(cfg, ScanKind::Beads, &values, sink, traces).map(|_| ()))
        }
        Command::SelftestI9 { live_points, walk_steps, runs, walkers } => {
            selftest(live_points, walk_steps, runs, walkers, cli.seed.unwrap_or(1), cli.out.as_deref())
        }
        Command::Plot { results } => {
            let rows = output::read_results(&results)?;
            let dir = match cli.out {
                Some(d) => d,
                None => results.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            for p in plot::plot_results(&rows, &dir)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn load(path: &Path, o: &Overrides, seed: Option<u64>, out: Option<&Path>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    let r = &mut cfg.run;
    if let Some(s) = seed {
        r.seed = s;
    }
    if let Some(v) = o.runs {
        r.n_runs = v;
    }
    if let Some(v) = o.live_points {
        r.live_points = v;
    }
    if let Some(v) = o.walk_steps {
        r.walk_steps = v;
    }
    if let Some(v) = o.walkers {
        r.walkers = v;
    }
    if let Some(v) = o.box_length {
        r.box_l = v;
    }
    if let Some(f) = o.format {
        cfg.output.format = f;
    }
    if let Some(p) = out {
        cfg.output.path = Some(p.to_path_buf());
    }
    if o.write_traces {
        cfg.output.write_traces = true;
    }
    if o.no_wall_time {
        cfg.output.wall_time = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Opens the result and trace files, runs `f`, and closes both even when
/// `f` fails so that finished rows reach the disk.
fn with_outputs(
    cfg: &RunConfig,
    f: impl FnOnce(&RunConfig, &mut ResultSink, Option<&mut TraceWriter>) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let path = cfg.output.path.as_deref();
    let mut sink = ResultSink::open(path, cfg.output.format)?;
    let mut traces = match cfg.output.write_traces {
        true => Some(TraceWriter::create(trace_path(path))?),
        false => None,
    };
    let res = f(cfg, &mut sink, traces.as_mut());
    let closed = sink.finish();
    let traces_closed = traces.map_or(Ok(()), TraceWriter::finish);
    res.and(closed).and(traces_closed)
}

#[derive(Serialize)]
struct SelftestOutput {
    live_points: usize,
    walk_steps: usize,
    n_runs: usize,
    seed: u64,
    mean: f64,
    sigma_of_mean: f64,
    exact: f64,
    relative_deviation: f64,
    iterations_mean: f64,
    values: Vec<f64>,
}

fn selftest(k: usize, s: usize, runs: usize, walkers: usize, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let rep = selftest_i9(k, s, runs, seed, walkers)?;
    println!("K = {k}, S = {s}, runs = {runs}");
    println!("mean       {:.2}", rep.mean);
    println!("sigma_mean {:.2}", rep.sigma_of_mean);
    println!("exact      {:.2}", rep.exact);
    println!("deviation  {:.3} %", 100.0 * rep.relative_deviation);
    if let Some(p) = out {
        let o = SelftestOutput {
            live_points: k,
            walk_steps: s,
            n_runs: runs,
            seed,
            mean: rep.mean,
            sigma_of_mean: rep.sigma_of_mean,
            exact: rep.exact,
            relative_deviation: rep.relative_deviation,
            iterations_mean: rep.iterations_mean,
            values: rep.values,
        };
        let text = serde_json::to_string_pretty(&o).map_err(|e| CliError::Other(e.to_string()))?;
        std::fs::write(p, text + "\n").map_err(|e| CliError::io(format!("write {}", p.display()), e))?;
    }
    Ok(())
}
