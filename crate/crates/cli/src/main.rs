mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polity_core::io::Format;

use crate::report::CliError;

#[derive(Parser)]
#[command(name = "polity", version, about = "Power, support and family analysis of listening matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the report (or generated matrix) to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Matrix file format; guessed from the file extension when omitted.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Power vector by the iterative, closed-form and matrix-power routes.
    Power(PowerArgs),
    /// Support matrix of voters over candidates.
    Elect(ElectArgs),
    /// Decomposition, family topology, upper class and connectivity.
    Families(FamiliesArgs),
    /// Small-ε limits: dominated power, limit support, consensus, residuals.
    Perturb(PerturbArgs),
    /// Monte Carlo estimates of marginal and joint support.
    Simulate(SimulateArgs),
    /// Generate an archetype society.
    Gen(GenArgs),
}

#[derive(Args)]
struct PowerArgs {
    matrix: PathBuf,
    /// Convergence tolerance of the iterative routes.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args)]
struct Election {
    /// Candidates, 1-based, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    candidates: Vec<usize>,
    /// Voters, 1-based; defaults to everyone who is not a candidate.
    #[arg(long, value_delimiter = ',')]
    voters: Option<Vec<usize>>,
}

#[derive(Args)]
struct ElectArgs {
    matrix: PathBuf,
    #[command(flatten)]
    election: Election,
    /// Condition number above which the result is flagged near-singular.
    #[arg(long, default_value_t = polity_core::linalg::NEAR_SINGULAR_COND)]
    cond_limit: f64,
}

#[derive(Args)]
struct FamiliesArgs {
    matrix: PathBuf,
    /// Entries at or below this are treated as small listening weights.
    #[arg(long, default_value_t = commands::DEFAULT_THRESHOLD)]
    threshold: f64,
}

#[derive(Args)]
struct PerturbArgs {
    matrix: PathBuf,
    /// Candidates, 1-based; omit to report only the dominated power.
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    voters: Option<Vec<usize>>,
    #[arg(long, default_value_t = commands::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Correction matrix B for a dominated input; defaults to uniform mixing.
    #[arg(long)]
    correction: Option<PathBuf>,
    /// Relative rank tolerance for kernel computations.
    #[arg(long, default_value_t = polity_core::linalg::RANK_TOL)]
    rank_tol: f64,
    /// ε values for the residual tables; defaults to a grid below the fitted ε.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
}

#[derive(Args)]
struct SimulateArgs {
    matrix: PathBuf,
    #[command(flatten)]
    election: Election,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    archetype: Archetype,
}

#[derive(Subcommand)]
enum Archetype {
    /// Everyone listens to person 1.
    FatherAndSons {
        #[arg(long)]
        k: usize,
        /// Listening row for the leader (a distribution over the family).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        leader_row: Option<Vec<f64>>,
    },
    /// Reporting tree; each person listens to their parent.
    Tree {
        /// 1-based parent of each person; the root is its own parent.
        #[arg(long, value_delimiter = ',', required = true)]
        parents: Vec<usize>,
    },
    /// Everyone gives weight s to each other member.
    Equality {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: f64,
    },
    /// I + εB for a generator B (uniform rates when no file is given).
    Garden {
        #[arg(long, required_unless_present = "correction")]
        n: Option<usize>,
        #[arg(long)]
        correction: Option<PathBuf>,
        #[arg(long)]
        eps: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let format = cli.format.map(Format::from);
    let out = cli.out.as_deref();
    let (name, outcome) = match cli.command {
        Command::Power(a) => ("power", commands::power(&a.matrix, format, a.tol)?),
        Command::Elect(a) => (
            "elect",
            commands::elect(&a.matrix, format, &a.election.candidates, a.election.voters.as_deref(), a.cond_limit)?,
        ),
        Command::Families(a) => ("families", commands::families(&a.matrix, format, a.threshold)?),
        Command::Perturb(a) => (
            "perturb",
            commands::perturb(&commands::PerturbRequest {
                matrix: &a.matrix,
                format,
                candidates: a.candidates.as_deref(),
                voters: a.voters.as_deref(),
                threshold: a.threshold,
                correction: a.correction.as_deref(),
                rank_tol: a.rank_tol,
                eps: a.eps.as_deref(),
            })?,
        ),
        Command::Simulate(a) => (
            "simulate",
            commands::simulate(
                &a.matrix,
                format,
                &a.election.candidates,
                a.election.voters.as_deref(),
                a.trials,
                a.seed,
            )?,
        ),
        Command::Gen(g) => {
            let m = match g.archetype {
                Archetype::FatherAndSons { k, leader_row } => commands::gen_father_and_sons(k, leader_row.as_deref())?,
                Archetype::Tree { parents } => commands::gen_tree(&parents)?,
                Archetype::Equality { k, s } => commands::gen_equality(k, s)?,
                Archetype::Garden { n, correction, eps } => {
                    commands::gen_garden(n, correction.as_deref(), format, eps)?
                }
            };
            let out_format = format
                .or_else(|| out.map(Format::from_path))
                .unwrap_or(Format::Csv);
            eprintln!("generated {n}x{n} matrix", n = m.nrows());
            return report::emit(&polity_core::io::render(&m, out_format), out);
        }
    };
    eprint!("{}", outcome.summary);
    for d in &outcome.diagnostics {
        eprintln!("warning: {d}");
    }
    report::emit(&report::Report::new(name, outcome).to_json(), out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
