use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use regimes_core::reference_example::{reference_comparison, reference_scenario, render_table};
use regimes_core::report::Block;
use regimes_core::scenario::{AnalysisKind, Overrides};
use regimes_core::{emit_report, load_scenario, run_scenario, AnalysisReport, Error, RunOptions, Scenario};

const EXIT_TOLERANCE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INVALID_SCENARIO: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

/// Simulate and analyse regime-switching dynamical systems.
#[derive(Debug, Parser)]
#[command(name = "regimes", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Scenario file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    scenario: Option<PathBuf>,
    /// Directory for report.json and CSV output; the report goes to stdout
    /// when neither this nor the scenario's output.dir is set.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replace the signal and sampler seeds.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Maximum JSR word length.
    #[arg(long, global = true, value_name = "L")]
    depth: Option<usize>,
    /// Target JSR gap.
    #[arg(long, global = true, value_name = "G")]
    gap: Option<f64>,
    /// Tolerance for structural diagnostics.
    #[arg(long, global = true, value_name = "T")]
    tol: Option<f64>,
    /// Omit wall-clock timings so reports are byte-reproducible.
    #[arg(long, global = true)]
    no_timings: bool,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the scenario's trajectory.
    Simulate,
    /// Run the analyses listed in the scenario.
    Analyze,
    /// Bracket the joint spectral radius of the linearized family.
    Jsr,
    /// Commutation, irreducibility and topology diagnostics.
    Structure,
    /// Run the built-in two-regime collateral example and compare against
    /// reference values.
    PaperExample,
    /// Check a scenario file without running it.
    Validate,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Failure::new(EXIT_USAGE, "--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot configure threads: {e}")))?;
    }
    let g = &cli.global;
    let analyses = match cli.command {
        Command::Simulate => Some(vec![AnalysisKind::Simulate]),
        Command::Jsr => Some(vec![AnalysisKind::Jsr]),
        Command::Structure => Some(vec![
            AnalysisKind::Commute,
            AnalysisKind::Irreducibility,
            AnalysisKind::Topology,
        ]),
        Command::Analyze | Command::PaperExample | Command::Validate => None,
    };
    let overrides = Overrides {
        analyses,
        seed: g.seed,
        depth: g.depth,
        gap: g.gap,
        tolerance: g.tol,
    };

    let scenario = match cli.command {
        Command::PaperExample => Scenario::from_file(reference_scenario(), "built-in collateral scenario")
            .and_then(|s| s.with_overrides(&overrides)),
        _ => {
            let path = g
                .scenario
                .as_deref()
                .ok_or_else(|| Failure::new(EXIT_USAGE, "--scenario PATH is required for this command"))?;
            load_scenario(path).and_then(|s| s.with_overrides(&overrides))
        }
    }
    .map_err(|e| Failure::new(EXIT_INVALID_SCENARIO, e.to_string()))?;

    if let Command::Validate = cli.command {
        println!(
            "{}: valid ({} regimes, dimension {}, analyses: {})",
            scenario.name(),
            scenario.system.regime_count(),
            scenario.system.dimension(),
            scenario
                .file
                .analyses
                .iter()
                .map(|a| a.name())
                .collect::<Vec<_>>()
                .join(", ")
        );
        return Ok(0);
    }

    let report = run_scenario(&scenario, RunOptions { timings: !g.no_timings }).map_err(|e| {
        let code = match e {
            Error::Invalid { .. } | Error::Dimension { .. } | Error::UnknownRegime { .. } => EXIT_INVALID_SCENARIO,
            _ => EXIT_NUMERICAL,
        };
        Failure::new(code, e.to_string())
    })?;

    let out_dir = g.out.clone().or_else(|| scenario.output_dir());
    let comparison = matches!(cli.command, Command::PaperExample).then(|| reference_comparison(&report));

    match &out_dir {
        Some(dir) => {
            write_outputs(&report, dir)?;
            print!("{}", summary(&report));
        }
        None if comparison.is_none() => print!("{}", report.to_json()),
        None => {}
    }
    for (analysis, message) in report.failures() {
        eprintln!("warning: {analysis} failed: {message}");
    }

    if let Some(rows) = comparison {
        print!("{}", render_table(&rows));
        if let Some(bad) = rows.iter().find(|r| !r.pass) {
            eprintln!("comparison failed: {} = {}", bad.quantity, bad.computed);
            return Ok(EXIT_TOLERANCE);
        }
    }
    Ok(0)
}

fn write_outputs(report: &AnalysisReport, dir: &Path) -> Result<(), Failure> {
    let written = emit_report(report, dir)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot write to {}: {e}", dir.display())))?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn summary(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let mut line = |name: &str, text: String| out.push_str(&format!("{name:<16} {text}\n"));
    let status = |e: &String| format!("failed: {e}");
    if let Some(b) = &report.fixed_point {
        line(
            "fixed point",
            match b {
                Block::Ok(f) => format!(
                    "{:?} residual {:e}{}",
                    f.point.as_slice(),
                    f.residual,
                    if f.converged { "" } else { " (not converged)" }
                ),
                Block::Error(e) => status(e),
            },
        );
    }
    if let Some(b) = &report.linearization {
        line(
            "linearization",
            match b {
                Block::Ok(l) => l
                    .regimes
                    .iter()
                    .map(|r| format!("rho({}) = {}", r.label, r.spectral_radius))
                    .collect::<Vec<_>>()
                    .join(", "),
                Block::Error(e) => status(e),
            },
        );
    }
    if let Some(b) = &report.jsr {
        line(
            "jsr",
            match b {
                Block::Ok(j) => {
                    let b = &j.verdict.bounds;
                    format!(
                        "[{}, {}] at depth {}: {:?} (witness {})",
                        b.lower,
                        b.upper,
                        b.depth,
                        j.verdict.status,
                        j.witness_labels.join(" ")
                    )
                }
                Block::Error(e) => status(e),
            },
        );
    }
    if let Some(b) = &report.representability {
        line(
            "single law",
            match b {
                Block::Ok(v) => format!("{:?}: {}", v.status, v.reason),
                Block::Error(e) => status(e),
            },
        );
    }
    if let Some(b) = &report.irreducibility {
        line(
            "irreducibility",
            match b {
                Block::Ok(r) => format!(
                    "{} distinct pair(s), reducible candidate: {}",
                    r.distinct_pairs.len(),
                    r.reducible_candidate
                ),
                Block::Error(e) => status(e),
            },
        );
    }
    if let Some(b) = &report.topology {
        line(
            "topology",
            match b {
                Block::Ok(t) => format!(
                    "{} component(s), conjugate to a single law: {}",
                    t.component_count, t.conjugate_to_invariant_law
                ),
                Block::Error(e) => status(e),
            },
        );
    }
    if let Some(b) = &report.simulation {
        line(
            "simulation",
            match b {
                Block::Ok(s) => format!(
                    "{} steps, final state {:?}",
                    s.trajectory.horizon(),
                    s.trajectory.last().as_slice()
                ),
                Block::Error(e) => status(e),
            },
        );
    }
    out
}
