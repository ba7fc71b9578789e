use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hamperturb::casebook::{run_case, CaseError, CaseReport};
use hamperturb::manifest::Manifest;
use hamperturb::pipeline::{self, F0Source, Options, PipelineError, Stage};
use hamperturb::report::{verdict_word, Report};

#[derive(Parser)]
#[command(
    name = "hamperturb",
    version,
    about = "Integrability checks for Hamiltonian perturbations of hydrodynamic-type systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Report)]
    format: Format,
    /// Overrides the manifest seed for probabilistic zero tests.
    #[arg(long, global = true, env = "HAMPERTURB_SEED")]
    seed: Option<u64>,
    /// Include per-stage wall-clock times (breaks byte-stable output).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// JSON report.
    Report,
    /// Human-readable summary.
    Summary,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Hydro,
    First,
    Second,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analysis stages up to `--stage`.
    Check {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = StageArg::All)]
        stage: StageArg,
    },
    /// Construct the generators k0 and K1.
    Trivialize { manifest: PathBuf },
    /// Extend conservation laws to second order.
    Extend {
        manifest: PathBuf,
        /// Density to extend; repeatable.
        #[arg(long, required_unless_present = "basis", conflicts_with = "basis")]
        f0: Vec<String>,
        /// Extend every conservation law found in this manifest basis.
        #[arg(long)]
        basis: Option<String>,
        /// Reject densities with coincident characteristic weights.
        #[arg(long)]
        require_generic: bool,
    },
    /// Built-in reference cases.
    Case {
        #[command(subcommand)]
        action: CaseAction,
    },
}

#[derive(Subcommand)]
enum CaseAction {
    /// Run a case: `waterwave` or `synthetic`.
    Run { name: String },
    /// List the built-in cases.
    List,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Pipeline { path: String, source: PipelineError },
    #[error(transparent)]
    Case(#[from] CaseError),
}

fn load(path: &Path) -> Result<(String, Manifest), CliError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: shown.clone(),
        source,
    })?;
    let m = Manifest::from_toml(&text).map_err(|e| CliError::Pipeline {
        path: shown.clone(),
        source: e.into(),
    })?;
    Ok((shown, m))
}

fn case_summary(r: &CaseReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "case {}: {}", r.name, verdict_word(r.verdict));
    for e in &r.expectations {
        let mark = if e.passed { "ok  " } else { "FAIL" };
        let _ = writeln!(
            out,
            "  {mark} {:<24} expected {} observed {}",
            e.name, e.expected, e.observed
        );
    }
    out
}

fn emit(g: &Global, text: &str) -> Result<(), CliError> {
    match &g.out {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Write {
            path: p.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let g = &cli.global;
    let opts = Options {
        seed: g.seed,
        timing: g.timing,
        require_generic: false,
    };
    let report = |r: Report| -> Result<i32, CliError> {
        let text = match g.format {
            Format::Report => r.to_json(),
            Format::Summary => r.summary(),
        };
        emit(g, &text)?;
        Ok(r.exit_code())
    };
    let with_path = |path: String| move |source: PipelineError| CliError::Pipeline { path, source };
    match cli.command {
        Command::Check { manifest, stage } => {
            let (path, m) = load(&manifest)?;
            let stage = match stage {
                StageArg::Hydro => Stage::Hydro,
                StageArg::First => Stage::First,
                StageArg::Second => Stage::Second,
                StageArg::All => Stage::All,
            };
            report(pipeline::check(&m, stage, &opts).map_err(with_path(path))?)
        }
        Command::Trivialize { manifest } => {
            let (path, m) = load(&manifest)?;
            report(pipeline::trivialize(&m, &opts).map_err(with_path(path))?)
        }
        Command::Extend {
            manifest,
            f0,
            basis,
            require_generic,
        } => {
            let (path, m) = load(&manifest)?;
            let src = match basis {
                Some(b) => F0Source::Basis(b),
                None => F0Source::Exprs(f0),
            };
            let opts = Options {
                require_generic,
                ..opts
            };
            report(pipeline::extend(&m, &src, &opts).map_err(with_path(path))?)
        }
        Command::Case {
            action: CaseAction::List,
        } => {
            emit(g, &format!("{}\n", hamperturb::casebook::CASES.join("\n")))?;
            Ok(0)
        }
        Command::Case {
            action: CaseAction::Run { name },
        } => {
            let r = run_case(&name, g.seed.unwrap_or(0))?;
            let text = match g.format {
                Format::Report => r.to_json(),
                Format::Summary => case_summary(&r),
            };
            emit(g, &text)?;
            Ok(if r.verdict.is_ok() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
