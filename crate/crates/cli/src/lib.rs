//! Command-line harness: parses the run configuration, picks the arithmetic,
//! runs one verification suite and writes its report.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use chargedfield::{ArithmeticContext, ArithmeticMode};
use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{ConfigError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "chargedfield", version, about = "Exact and numerical checks of the charged free boson, its time-zero fields and the perturbed de Sitter generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Current, Virasoro, covariance, oracle and adjoint identities
    VerifyAlgebra(Overrides),
    /// Vacuum norms of field modes against the closed form, and their decay rate
    VerifyDecay(Overrides),
    /// Band norms and partial sums of time-zero modes on the vacuum, as CSV
    Converge(Overrides),
    /// Logarithmic growth of the partial sums at the convergence threshold, as CSV
    DivergeDemo(Overrides),
    /// Weak commutators of symmetric time-zero modes at several cutoffs
    VerifyCommutativity(Overrides),
    /// Weak Lorentz relations of the perturbed generators
    VerifyLorentz(Overrides),
    /// Weak Virasoro relations with zero central charge
    VerifyVirasoroC0(Overrides),
    /// Closure of the perturbed chiral-difference family
    ExploreDHalf(Overrides),
    /// Matrix entries of one field-mode block, as CSV
    ExportModeBlock(Overrides),
    /// A symmetric time-zero mode applied to the vacuum, as JSON lines
    DumpState(Overrides),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyAlgebra(_) => "verify-algebra",
            Command::VerifyDecay(_) => "verify-decay",
            Command::Converge(_) => "converge",
            Command::DivergeDemo(_) => "diverge-demo",
            Command::VerifyCommutativity(_) => "verify-commutativity",
            Command::VerifyLorentz(_) => "verify-lorentz",
            Command::VerifyVirasoroC0(_) => "verify-virasoro-c0",
            Command::ExploreDHalf(_) => "explore-d-half",
            Command::ExportModeBlock(_) => "export-mode-block",
            Command::DumpState(_) => "dump-state",
        }
    }

    fn overrides(&self) -> &Overrides {
        match self {
            Command::VerifyAlgebra(o)
            | Command::VerifyDecay(o)
            | Command::Converge(o)
            | Command::DivergeDemo(o)
            | Command::VerifyCommutativity(o)
            | Command::VerifyLorentz(o)
            | Command::VerifyVirasoroC0(o)
            | Command::ExploreDHalf(o)
            | Command::ExportModeBlock(o)
            | Command::DumpState(o) => o,
        }
    }
}

/// Overall result of a run, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    BudgetExceeded,
    IdentityFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::IdentityFailure => 2,
            Status::BudgetExceeded => 3,
        }
    }
}

/// What a subcommand produces.
pub enum Artifact {
    /// A JSON report.
    Json(serde_json::Value),
    /// Preformatted CSV or JSON-lines text.
    Text(String),
    /// One text per suffix, written next to the output path (or concatenated
    /// on stdout).
    Split(Vec<(String, String)>),
}

pub struct Outcome {
    pub status: Status,
    pub artifact: Artifact,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Precondition(String),
    Run(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Precondition(m) => write!(f, "refused: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.0)
    }
}

/// Mode actually used: the flag if given, otherwise the subcommand default,
/// falling back to floats when a parameter is irrational.
pub fn resolve_arithmetic(cfg: &RunConfig, default: ArithmeticMode) -> Result<ArithmeticContext, CliError> {
    let params = [&cfg.alpha0, &cfg.lambda];
    let mode = match cfg.arithmetic {
        Some(m) => m,
        None if params.iter().all(|p| p.is_rational()) => default,
        None => ArithmeticMode::Float,
    };
    ArithmeticContext::select(mode, cfg.tolerance, &params).map_err(|e| CliError::Usage(e.to_string()))
}

fn write_output(path: Option<&PathBuf>, artifact: Artifact) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Run(e.to_string());
    let texts: Vec<(Option<String>, String)> = match artifact {
        Artifact::Json(v) => {
            let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Run(e.to_string()))?;
            s.push('\n');
            vec![(None, s)]
        }
        Artifact::Text(s) => vec![(None, s)],
        Artifact::Split(parts) => parts.into_iter().map(|(suffix, s)| (Some(suffix), s)).collect(),
    };
    match path {
        Some(p) => {
            for (suffix, text) in texts {
                let target = match suffix {
                    Some(sfx) => PathBuf::from(format!("{}.{sfx}.csv", p.display())),
                    None => p.clone(),
                };
                std::fs::write(&target, text).map_err(io)?;
                log::info!("wrote {}", target.display());
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            let n = texts.len();
            for (i, (_, text)) in texts.into_iter().enumerate() {
                out.write_all(text.as_bytes()).map_err(io)?;
                if i + 1 < n {
                    out.write_all(b"\n").map_err(io)?;
                }
            }
        }
    }
    Ok(())
}

/// Runs one invocation and returns the process exit code:
/// 0 pass, 1 usage error or refused precondition, 2 identity failure,
/// 3 residual above its budget.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let name = cli.command.name();
    let cfg = match cli.command.overrides().merged().and_then(|m| RunConfig::from_map(&m)) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{name}: {e}");
            return 1;
        }
    };
    let result = match &cli.command {
        Command::VerifyAlgebra(_) => commands::verify_algebra(&cfg),
        Command::VerifyDecay(_) => commands::verify_decay(&cfg),
        Command::Converge(_) => commands::converge(&cfg),
        Command::DivergeDemo(_) => commands::diverge_demo(&cfg),
        Command::VerifyCommutativity(_) => commands::verify_commutativity(&cfg),
        Command::VerifyLorentz(_) => commands::verify_lorentz(&cfg),
        Command::VerifyVirasoroC0(_) => commands::verify_virasoro_c0(&cfg),
        Command::ExploreDHalf(_) => commands::explore_d_half(&cfg),
        Command::ExportModeBlock(_) => commands::export_mode_block(&cfg),
        Command::DumpState(_) => commands::dump_state(&cfg),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            log::error!("{name}: {e}");
            return 1;
        }
    };
    let status = outcome.status;
    if let Err(e) = write_output(cfg.output.as_ref(), outcome.artifact) {
        log::error!("{name}: {e}");
        return 1;
    }
    match status {
        Status::Pass => log::info!("{name}: pass"),
        Status::IdentityFailure => log::error!("{name}: exact identity failed"),
        Status::BudgetExceeded => log::error!("{name}: residual above its tail budget"),
    }
    status.exit_code()
}
