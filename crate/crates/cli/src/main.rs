use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavepot_cli::{dump, run_file, CliError, Kind, RunReport, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "wavepot", version, about = "Evolve, reconstruct and compare wave-potential scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios of any kind (the kind is read from each file).
    Run(RunArgs),
    /// Schrodinger evolution of the wave function.
    Schrodinger(RunArgs),
    /// Second-order evolution of the real potential phi.
    Phi(RunArgs),
    /// Maxwell evolution of E and B.
    MaxwellFields(RunArgs),
    /// Maxwell evolution of the vector potential in Coulomb gauge.
    MaxwellPotential(RunArgs),
    /// Rebuild phi from a recorded wave-function trajectory.
    ReconstructPhi(RunArgs),
    /// Rebuild A from a recorded field trajectory.
    #[command(name = "reconstruct-a", alias = "reconstruct-A")]
    ReconstructA(RunArgs),
    /// Compare two recorded trajectories frame by frame.
    Compare(RunArgs),
    /// Export a trajectory file as CSV.
    Dump(DumpArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file; repeat to run a suite.
    #[arg(long = "scenario", required = true)]
    scenarios: Vec<PathBuf>,
    /// Output directory; suites write one subdirectory per scenario.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a scenario value, e.g. `integrator.steps=100`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Number of scenarios run concurrently.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Export only this frame index.
    #[arg(long)]
    frame: Option<usize>,
}

fn print_report(path: &Path, report: &RunReport) {
    println!("{} ({})", path.display(), report.kind);
    for line in &report.table {
        println!("  {line}");
    }
    for (k, v) in &report.summary {
        println!("  {k:<20} {v:e}");
    }
    for m in &report.monitors {
        let ceiling = m.ceiling.map_or_else(|| "-".to_string(), |c| format!("{c:e}"));
        let state = if m.exceeded { "EXCEEDED" } else { "ok" };
        println!("  monitor {:<12} {:e} <= {ceiling}  {state}", m.name, m.value);
    }
}

fn run_suite(args: &RunArgs, kind: Option<Kind>) -> i32 {
    let suite = args.scenarios.len() > 1;
    let out_dir = |p: &Path| {
        if suite {
            args.out.join(p.file_stem().unwrap_or_default())
        } else {
            args.out.clone()
        }
    };
    let threads = args.threads.max(1);
    let mut results: Vec<Option<Result<RunReport, CliError>>> = (0..args.scenarios.len()).map(|_| None).collect();
    for (chunk_paths, chunk_results) in args.scenarios.chunks(threads).zip(results.chunks_mut(threads)) {
        std::thread::scope(|scope| {
            for (path, slot) in chunk_paths.iter().zip(chunk_results.iter_mut()) {
                let dir = out_dir(path);
                scope.spawn(move || *slot = Some(run_file(path, &args.overrides, kind, &dir)));
            }
        });
    }
    let mut code = 0;
    for (path, result) in args.scenarios.iter().zip(results) {
        match result.expect("every scenario ran") {
            Ok(report) => {
                print_report(path, &report);
                code = code.max(report.exit_code());
            }
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                code = code.max(e.exit_code());
            }
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run(a) => run_suite(a, None),
        Command::Schrodinger(a) => run_suite(a, Some(Kind::Schrodinger)),
        Command::Phi(a) => run_suite(a, Some(Kind::Phi)),
        Command::MaxwellFields(a) => run_suite(a, Some(Kind::MaxwellFields)),
        Command::MaxwellPotential(a) => run_suite(a, Some(Kind::MaxwellPotential)),
        Command::ReconstructPhi(a) => run_suite(a, Some(Kind::ReconstructPhi)),
        Command::ReconstructA(a) => run_suite(a, Some(Kind::ReconstructA)),
        Command::Compare(a) => run_suite(a, Some(Kind::Compare)),
        Command::Dump(a) => match dump(&a.input, &a.out, a.frame) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code().max(EXIT_CONFIG)
            }
        },
    };
    ExitCode::from(code as u8)
}
