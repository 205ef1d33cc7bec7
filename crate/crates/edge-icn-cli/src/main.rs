//! Command-line harness: scenario runs, analytic sweeps, topology checks.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on scenario or runtime
//! errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use edge_icn::analysis::{sweep, sweep_csv, AnalysisParams, SweptParam};
use edge_icn::engine::{counters_csv, run_scenario, Mode};
use edge_icn::scenario::parse_scenario_file;
use edge_icn::topology::{LinkIdAssignment, TopologySpec};
use edge_icn::BloomParams;

#[derive(Parser)]
#[command(name = "edge-icn", version, about = "Bloom-routed edge ICN simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulation runs.
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
    /// Closed-form overhead models.
    Analyze {
        #[command(subcommand)]
        command: AnalyzeCommand,
    },
    /// Topology file checks.
    Topo {
        #[command(subcommand)]
        command: TopoCommand,
    },
}

#[derive(Subcommand)]
enum SimCommand {
    /// Run one scenario and print its counters CSV.
    Run(SimRunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    EdgeIcn,
    Point,
}

impl From<ModeArg> for Mode {
    fn from(arg: ModeArg) -> Mode {
        match arg {
            ModeArg::EdgeIcn => Mode::EdgeIcn,
            ModeArg::Point => Mode::Point,
        }
    }
}

#[derive(Args)]
struct SimRunArgs {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's `mode` stanza.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Link identifier seed; overrides the scenario's `seed` stanza.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the per-packet switch trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the counters CSV here instead of stdout.
    #[arg(long)]
    counters: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Sweep one parameter and emit both models' l-units as CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// advertisers, subscribers, or scopes.
    #[arg(long)]
    vary: String,
    #[arg(long)]
    from: u64,
    #[arg(long)]
    to: u64,
    #[arg(long)]
    step: u64,
    #[arg(long, default_value_t = 1000)]
    scopes: u64,
    #[arg(long, default_value_t = 100)]
    advertisers: u64,
    #[arg(long, default_value_t = 100)]
    subscribers: u64,
    #[arg(long, default_value_t = 1)]
    l: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TopoCommand {
    /// Parse and validate a topology file.
    Check { file: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is
            // a usage error.
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    let _ = e.print();
                    ExitCode::from(1)
                }
            };
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Sim {
            command: SimCommand::Run(args),
        } => sim_run(args),
        Command::Analyze {
            command: AnalyzeCommand::Sweep(args),
        } => analyze_sweep(args),
        Command::Topo {
            command: TopoCommand::Check { file },
        } => topo_check(file),
    }
}

fn sim_run(args: SimRunArgs) -> anyhow::Result<()> {
    let scenario = parse_scenario_file(&args.scenario)
        .map_err(|e| anyhow::anyhow!("{}: {e}", args.scenario.display()))?;

    let mode = match args.mode {
        Some(arg) => arg.into(),
        None => scenario.mode.unwrap_or(Mode::EdgeIcn),
    };
    let seed = args.seed.or(scenario.seed).unwrap_or(0);

    let report = run_scenario(&scenario.to_run_config(mode, seed))?;
    if !report.errors.is_empty() {
        for err in &report.errors {
            eprintln!("scenario error: {err}");
        }
        anyhow::bail!("{} scenario error(s)", report.errors.len());
    }

    if let Some(path) = &args.trace {
        let mut text = report.trace.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        std::fs::write(path, text)?;
    }

    let csv = counters_csv(&report);
    match &args.counters {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn analyze_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let vary = SweptParam::parse(&args.vary)
        .ok_or_else(|| anyhow::anyhow!("--vary must be advertisers, subscribers, or scopes"))?;
    let base = AnalysisParams::new(args.scopes, args.advertisers, args.subscribers, args.l);
    let rows = sweep(vary, args.from, args.to, args.step, &base)?;
    let csv = sweep_csv(&rows);
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn topo_check(file: PathBuf) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&file)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", file.display()))?;
    let spec =
        TopologySpec::parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", file.display()))?;
    let topo = spec.build(BloomParams::default(), LinkIdAssignment::Keyed)?;
    println!(
        "ok: {} switches, {} nodes, {} directed links",
        topo.switches().len(),
        topo.nodes().len(),
        topo.links().len()
    );
    Ok(())
}
