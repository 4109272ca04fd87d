use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use duopoly::cli::{run, CommandKind, RunConfig};
use duopoly::Tolerances;

#[derive(Parser)]
#[command(
    name = "duopoly",
    about = "Market-clearing equilibria of two-provider price competition",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write the equilibrium as JSON
    Solve(CommonArgs),
    /// Sweep the path-loss exponent and write a price table as CSV
    Sweep(SweepArgs),
    /// Write the provider-preference grid at equilibrium prices as CSV
    Regions(RegionsArgs),
    /// Cross-check solvers against their oracles
    Verify(VerifyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON (schema 1)
    #[arg(long)]
    input: PathBuf,
    /// Output file; standard output when omitted
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override a named tolerance, e.g. --tol kkt=1e-6 (repeatable)
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tolerances: Vec<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated path-loss exponents, e.g. 2,2.5,3
    #[arg(long, value_delimiter = ',')]
    betas: Vec<f64>,
}

#[derive(Args)]
struct RegionsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Grid resolution as NXxNY, e.g. 200x100
    #[arg(long)]
    grid: Option<String>,
    /// Willingness to pay of the probe user at each grid cell
    #[arg(long = "probe-a")]
    probe_a: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Scenario or equilibrium JSON; omit to run a seeded random batch
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file; standard output when omitted
    #[arg(long)]
    output: Option<PathBuf>,
    /// Batch seed or scenario seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Override a named tolerance (repeatable)
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tolerances: Vec<String>,
}

fn parse_tolerances(overrides: &[String]) -> Result<Tolerances, String> {
    let mut tol = Tolerances::default();
    for entry in overrides {
        let (name, value) = entry
            .split_once('=')
            .ok_or_else(|| format!("--tol expects NAME=VALUE (got {entry:?})"))?;
        let value: f64 = value
            .parse()
            .map_err(|_| format!("--tol {name}: {value:?} is not a number"))?;
        tol.set(name, value).map_err(|e| e.to_string())?;
    }
    Ok(tol)
}

fn parse_grid(text: &str) -> Result<(usize, usize), String> {
    let (nx, ny) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("--grid expects NXxNY (got {text:?})"))?;
    let nx = nx.parse().map_err(|_| format!("bad grid width {nx:?}"))?;
    let ny = ny.parse().map_err(|_| format!("bad grid height {ny:?}"))?;
    Ok((nx, ny))
}

fn build_config(cli: Cli) -> Result<RunConfig, String> {
    let (kind, common, betas, grid, probe_a) = match cli.command {
        Command::Solve(common) => (CommandKind::Solve, common, None, None, None),
        Command::Sweep(args) => (
            CommandKind::Sweep,
            args.common,
            Some(args.betas),
            None,
            None,
        ),
        Command::Regions(args) => {
            let grid = args.grid.as_deref().map(parse_grid).transpose()?;
            (CommandKind::Regions, args.common, None, grid, args.probe_a)
        }
        Command::Verify(args) => {
            let mut config = RunConfig::new(CommandKind::Verify);
            config.input = args.input;
            config.output = args.output;
            config.seed = args.seed;
            config.tolerances = parse_tolerances(&args.tolerances)?;
            return Ok(config);
        }
    };
    let mut config = RunConfig::new(kind);
    config.input = Some(common.input);
    config.output = common.output;
    config.seed = common.seed;
    config.tolerances = parse_tolerances(&common.tolerances)?;
    config.betas = betas.filter(|b: &Vec<f64>| !b.is_empty());
    config.grid = grid;
    config.probe_a = probe_a;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match build_config(cli) {
        Ok(config) => ExitCode::from(run(&config) as u8),
        Err(message) => {
            eprintln!("{}", serde_json::json!({ "error": message, "code": 1 }));
            ExitCode::from(1)
        }
    }
}
