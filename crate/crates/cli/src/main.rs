//! `surfspec`: meshes, spectra, surgery sweeps, crossing scans, conformal
//! maximization and the acceptance suite from the command line.
//!
//! Exit status: 0 pass, 1 a check failed, 2 usage error, 3 solver failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use surfspec::surgery::AttachKind;

use config::{NumList, OnError, Resolved, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Library(#[from] surfspec::Error),
}

impl CliError {
    fn status(&self) -> Status {
        use surfspec::Error as E;
        match self {
            CliError::Usage(_) => Status::Usage,
            CliError::Library(
                E::InvalidArgument(_)
                | E::Parse(_)
                | E::Resolution { .. }
                | E::EpsilonTooLarge { .. }
                | E::UnsupportedLattice(_)
                | E::BracketViolated { .. },
            ) => Status::Usage,
            CliError::Library(_) => Status::SolverFailure,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    CheckFailed = 1,
    Usage = 2,
    SolverFailure = 3,
}

#[derive(Parser, Debug)]
#[command(name = "surfspec", version, about = "Laplace spectra, thin surgery and first-eigenvalue maximization on surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Build a mesh (surgered with --attach) and write it as JSON.
    Mesh,
    /// Lowest eigenvalues of the closed surface.
    Spectrum,
    /// Deviation of the surgered spectrum from the limit over an (eps, h) grid.
    Sweep {
        /// What a failed grid point does to the exit status.
        #[arg(long, value_enum)]
        on_error: Option<OnError>,
    },
    /// Scan the model height for the first-eigenvalue crossing.
    Heightscan {
        /// Grid points across the bracket.
        #[arg(long)]
        grid: Option<usize>,
        /// Also build the monotonicity certificate at the crossing.
        #[arg(long)]
        certificate: bool,
    },
    /// Ascend lambda_1 * area over the conformal class.
    Maximize {
        #[arg(long)]
        iterations: Option<usize>,
        /// Continue from the checkpoint in --out.
        #[arg(long)]
        resume: bool,
    },
    /// Run the acceptance criteria and write the manifest.
    Verify {
        #[arg(long)]
        suite: Option<String>,
        /// Only these criteria, e.g. `1,2`.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<usize>>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config mirroring the flags; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// sphere, rp2, klein[:W,H], flat-torus:equilateral[:AREA],
    /// flat-torus:square[:SIDE], flat-torus:A1,A2,B1,B2 or file:PATH.
    #[arg(long, global = true)]
    surface: Option<String>,
    #[arg(long, global = true, value_enum)]
    attach: Option<AttachArg>,
    /// Disk radii, as a list `0.08,0.04` or range `start:end:count`.
    #[arg(long, global = true)]
    eps: Option<String>,
    /// Model heights, as a list or range `start:end:count`.
    #[arg(long, global = true)]
    h: Option<String>,
    /// Eigenpairs, the constant mode included (sweep: highest index k).
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Mesh resolution.
    #[arg(long, global = true)]
    res: Option<usize>,
    /// Eigensolver residual tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Handle feet distance as a fraction of the first torus period.
    #[arg(long, global = true)]
    separation: Option<f64>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum AttachArg {
    CrossCap,
    Handle,
}

impl From<AttachArg> for AttachKind {
    fn from(a: AttachArg) -> Self {
        match a {
            AttachArg::CrossCap => AttachKind::CrossCap,
            AttachArg::Handle => AttachKind::Handle,
        }
    }
}

fn flags(cli: Cli) -> (Option<PathBuf>, RunConfig) {
    let c = cli.common;
    let mut rc = RunConfig {
        surface: c.surface,
        attach: c.attach.map(Into::into),
        eps: c.eps.map(NumList::Text),
        h: c.h.map(NumList::Text),
        k: c.k,
        res: c.res,
        tol: c.tol,
        seed: c.seed,
        out: c.out,
        jobs: c.jobs,
        separation: c.separation,
        ..Default::default()
    };
    let name = match cli.command {
        Cmd::Mesh => "mesh",
        Cmd::Spectrum => "spectrum",
        Cmd::Sweep { on_error } => {
            rc.on_error = on_error;
            "sweep"
        }
        Cmd::Heightscan { grid, certificate } => {
            rc.grid = grid;
            rc.certificate = certificate.then_some(true);
            "heightscan"
        }
        Cmd::Maximize { iterations, resume } => {
            rc.iterations = iterations;
            rc.resume = resume.then_some(true);
            "maximize"
        }
        Cmd::Verify { suite, only } => {
            rc.suite = suite;
            rc.only = only;
            "verify"
        }
    };
    rc.command = Some(name.into());
    (c.config, rc)
}

fn run(cli: Cli) -> Result<Status, CliError> {
    let (file, flag_config) = flags(cli);
    let base = match &file {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let config = Resolved::new(base.overridden_by(flag_config))?;
    if let Some(j) = config.jobs {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    output::log(&format!("{} config {}", config.command, config.hash()));
    let status = match config.command() {
        config::Command::Mesh => commands::mesh(&config),
        config::Command::Spectrum => commands::spectrum(&config),
        config::Command::Sweep => commands::sweep(&config),
        config::Command::Heightscan => commands::heightscan(&config),
        config::Command::Maximize => commands::maximize(&config),
        config::Command::Verify => commands::verify(&config),
    }?;
    // the resolved config is itself a valid --config file
    let mut bytes = serde_json::to_vec_pretty(&config).map_err(surfspec::Error::from)?;
    bytes.push(b'\n');
    surfspec::surgery::write_atomic(&config.out.join("run.json"), &bytes)?;
    Ok(status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match run(cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("surfspec: error: {e}");
            e.status()
        }
    };
    ExitCode::from(status as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses() {
        assert_eq!(CliError::Usage("x".into()).status(), Status::Usage);
        assert_eq!(CliError::from(surfspec::Error::InvalidArgument("x".into())).status(), Status::Usage);
        assert_eq!(CliError::from(surfspec::Error::NoConvergence("x".into())).status(), Status::SolverFailure);
        assert_eq!(Status::CheckFailed as u8, 1);
    }
}
