use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, AlmostArgs, OracleArgs, Outcome, PdArgs};
use crate::config::{eval_expr, Config};
use crate::error::CliError;
use crate::formats::read_comb;

#[derive(Debug, Parser)]
#[command(
    name = "cutproj",
    version,
    about = "Model sets, diffraction and positive-definiteness checks for cut-and-project schemes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scheme configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; CSV goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `run.budget` (enumeration candidate limit).
    #[arg(long)]
    pub budget: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Injectivity, internal density and dual pairing diagnostics.
    Check(Common),
    /// Model set points in the query box.
    Modelset(Common),
    /// Bragg spectrum CSV plus JSON metadata.
    Diffract {
        #[command(flatten)]
        common: Common,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Metadata path; defaults to the output path with a `.json` extension.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Compare closed-form amplitudes with finite-patch averages.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Wave vector, comma-separated components; repeatable.
        #[arg(long, allow_hyphen_values = true)]
        k: Vec<String>,
        /// Patch half-width R.
        #[arg(long)]
        radius: Option<f64>,
        /// Number of strongest peaks when no --k is given.
        #[arg(long)]
        top: Option<usize>,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Positive definiteness downstairs versus on the lift.
    Pdcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        /// Flip the weights of the dominant offset pair first.
        #[arg(long)]
        corrupt: bool,
        /// Comb file (`x1..xd,re,im`) replacing the patch autocorrelation.
        #[arg(long)]
        comb: Option<PathBuf>,
    },
    /// Epsilon-norm almost periods among model-set differences.
    Almostperiods {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        comb: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<Config, CliError> {
    let mut cfg = Config::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(b) = common.budget {
        if b == 0 {
            return Err(CliError::Usage("--budget must be positive".into()));
        }
        cfg.budget = b;
    }
    Ok(cfg)
}

fn load_comb(path: &Path) -> Result<cutproj_core::WeightedComb, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_comb(&text, &path.display().to_string())
}

fn parse_k(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|c| eval_expr(c.trim()).map_err(|e| CliError::Usage(format!("--k `{s}`: {e}"))))
        .collect()
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn emit(out: &Outcome, common: &Common, json_path: Option<&Path>) -> Result<(), CliError> {
    match (&out.csv, &common.out) {
        (Some(csv), Some(p)) => {
            write(p, csv)?;
            print!("{}", out.report.as_str());
        }
        (Some(csv), None) => {
            print!("{csv}");
            eprint!("{}", out.report.as_str());
        }
        (None, Some(p)) => {
            write(p, out.report.as_str())?;
            print!("{}", out.report.as_str());
        }
        (None, None) => print!("{}", out.report.as_str()),
    }
    if let Some(json) = &out.json {
        let target = json_path
            .map(Path::to_path_buf)
            .or_else(|| common.out.as_ref().map(|p| p.with_extension("json")));
        if let Some(t) = target {
            let text = serde_json::to_string_pretty(json).expect("json values serialise");
            write(&t, &(text + "\n"))?;
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    let (out, common, json) = match cli.command {
        Command::Check(c) => (commands::check(&load(&c)?)?, c, None),
        Command::Modelset(c) => (commands::modelset(&load(&c)?)?, c, None),
        Command::Diffract {
            common,
            threads,
            json,
        } => (commands::diffract(&load(&common)?, threads)?, common, json),
        Command::Oracle {
            common,
            k,
            radius,
            top,
            threads,
        } => {
            let args = OracleArgs {
                k: k.iter().map(|s| parse_k(s)).collect::<Result<_, _>>()?,
                radius,
                top,
                threads,
            };
            (commands::oracle(&load(&common)?, &args)?, common, None)
        }
        Command::Pdcheck {
            common,
            trials,
            corrupt,
            comb,
        } => {
            let args = PdArgs {
                trials,
                corrupt,
                comb: comb.as_deref().map(load_comb).transpose()?,
            };
            (commands::pdcheck(&load(&common)?, &args)?, common, None)
        }
        Command::Almostperiods { common, eps, comb } => {
            let args = AlmostArgs {
                eps,
                comb: comb.as_deref().map(load_comb).transpose()?,
            };
            (
                commands::almostperiods(&load(&common)?, &args)?,
                common,
                None,
            )
        }
    };
    emit(&out, &common, json.as_deref())?;
    Ok(out.ok)
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
