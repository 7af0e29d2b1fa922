//! Command-line driver: `solve`, `expand`, `reduce`, `ivi`, `sweep`, `check`.
//!
//! Exit codes: 0 on success, 1 on a semantic error (invalid model, failed
//! check), 2 on a syntax or usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use bmdp_reduce::factored::{formulas_to_partition, partition_to_formulas, DEFAULT_REGION_CAP};
use bmdp_reduce::harness::{epsilon_sweep_with, SweepOptions};
use bmdp_reduce::io::{
    format_real, parse_model, serialize_bmdp, serialize_mdp, serialize_partition, Model,
    ParseError, PartitionFile,
};
use bmdp_reduce::reduction::verify_homogeneity;
use bmdp_reduce::{
    expand_to_explicit, induce_bmdp, ivi_bound_optimal, reduce_factored, reduce_model,
    value_iterate, ExplicitMdp, FactoredMdp, Partition,
};
use clap::{Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SEMANTIC: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Digits used when printing values.
const DIGITS: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "bmdp-reduce", version, about = "Reduce factored MDPs to bounded-parameter MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Explicit,
    Symbolic,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal value and greedy action of every state of an explicit MDP.
    Solve {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Expand a factored MDP into an explicit one.
    Expand {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce an MDP or factored MDP to a BMDP over ε-homogeneous blocks.
    Reduce {
        file: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        partition: Option<PathBuf>,
        /// Defaults to explicit for `mdp` input and symbolic for `fmdp` input.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long, default_value_t = DEFAULT_REGION_CAP)]
        region_cap: usize,
    },
    /// Interval value iteration: lower and upper values and the pessimistic action.
    Ivi {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Block counts, interval widths and IVI bound widths for several ε (CSV).
    Sweep {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_REGION_CAP)]
        region_cap: usize,
        /// Add a wall-time column (makes output run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Validate a file; for a partition with `--model`, also check ε-homogeneity.
    Check {
        file: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
}

enum Failure {
    Usage(String),
    Semantic(String),
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        match e {
            ParseError::Semantic { .. } => Failure::Semantic(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<bmdp_reduce::Error> for Failure {
    fn from(e: bmdp_reduce::Error) -> Self {
        Failure::Semantic(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Runs the driver on `args` (including the program name) and returns the
/// exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Semantic(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_SEMANTIC
        }
    }
}

fn read_model(path: &Path) -> Result<Model<f64>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| match e {
        ParseError::Syntax { line, message } => {
            Failure::Usage(format!("{}:{line}: {message}", path.display()))
        }
        ParseError::Semantic { message } => Failure::Semantic(format!("{}: {message}", path.display())),
        other => Failure::Usage(format!("{}: {other}", path.display())),
    })
}

fn expect_mdp(model: Model<f64>, path: &Path) -> Result<ExplicitMdp<f64>, Failure> {
    match model {
        Model::Mdp(m) => Ok(m),
        other => Err(Failure::Usage(format!(
            "{}: expected an mdp file, found {}",
            path.display(),
            other.kind().tag()
        ))),
    }
}

fn expect_fmdp(model: Model<f64>, path: &Path) -> Result<FactoredMdp<f64>, Failure> {
    match model {
        Model::Fmdp(f) => Ok(f),
        other => Err(Failure::Usage(format!(
            "{}: expected an fmdp file, found {}",
            path.display(),
            other.kind().tag()
        ))),
    }
}

fn write_file(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn real(x: f64) -> String {
    format_real(x, DIGITS)
}

fn dispatch(command: Command, out: &mut dyn Write) -> Outcome {
    match command {
        Command::Solve { file, tol } => {
            let m = expect_mdp(read_model(&file)?, &file)?;
            let (values, policy) = value_iterate(&m, tol)?;
            writeln!(out, "state value action")?;
            for (s, v) in values.iter().enumerate() {
                writeln!(out, "{s} {} {}", real(*v), policy[s])?;
            }
        }
        Command::Expand { file, out: target } => {
            let f = expect_fmdp(read_model(&file)?, &file)?;
            let m = expand_to_explicit(&f)?;
            write_file(&target, &serialize_mdp(&m))?;
            writeln!(out, "states {}", m.n_states())?;
        }
        Command::Reduce {
            file,
            epsilon,
            out: target,
            partition,
            mode,
            region_cap,
        } => {
            let (blocks, bmdp, partition_file) = match read_model(&file)? {
                Model::Mdp(m) => {
                    if mode == Some(Mode::Symbolic) {
                        return Err(Failure::Usage(
                            "symbolic mode needs an fmdp input".into(),
                        ));
                    }
                    let (p, _) = reduce_model(&m, epsilon)?;
                    let b = induce_bmdp(&m, &p)?;
                    (p.len(), b, PartitionFile::Explicit(p))
                }
                Model::Fmdp(f) => {
                    let variables = f.variables().to_vec();
                    if mode == Some(Mode::Explicit) {
                        let m = expand_to_explicit(&f)?;
                        let (p, _) = reduce_model(&m, epsilon)?;
                        let b = induce_bmdp(&m, &p)?;
                        let formulas = partition_to_formulas(&p, f.n_variables());
                        (p.len(), b, PartitionFile::Symbolic { variables, blocks: formulas })
                    } else {
                        let r = reduce_factored(&f, epsilon, region_cap)?;
                        (
                            r.blocks.len(),
                            r.bmdp,
                            PartitionFile::Symbolic {
                                variables,
                                blocks: r.blocks,
                            },
                        )
                    }
                }
                other => {
                    return Err(Failure::Usage(format!(
                        "{}: expected an mdp or fmdp file, found {}",
                        file.display(),
                        other.kind().tag()
                    )))
                }
            };
            write_file(&target, &serialize_bmdp(&bmdp))?;
            if let Some(path) = partition {
                write_file(&path, &serialize_partition(&partition_file))?;
            }
            writeln!(out, "blocks {blocks}")?;
        }
        Command::Ivi { file, tol } => {
            let b = match read_model(&file)? {
                Model::Bmdp(b) => b,
                other => {
                    return Err(Failure::Usage(format!(
                        "{}: expected a bmdp file, found {}",
                        file.display(),
                        other.kind().tag()
                    )))
                }
            };
            let r = ivi_bound_optimal(&b, tol)?;
            writeln!(out, "state lower upper action")?;
            for s in 0..b.n_states() {
                writeln!(
                    out,
                    "{s} {} {} {}",
                    real(r.lower[s]),
                    real(r.upper[s]),
                    r.pessimistic_policy[s]
                )?;
            }
        }
        Command::Sweep {
            file,
            epsilons,
            tol,
            region_cap,
            timing,
        } => {
            let f = expect_fmdp(read_model(&file)?, &file)?;
            let report = epsilon_sweep_with(&f, &epsilons, SweepOptions { tol, region_cap })?;
            out.write_all(report.to_csv(timing).as_bytes())?;
        }
        Command::Check {
            file,
            model,
            epsilon,
        } => check(&file, model.as_deref(), epsilon, out)?,
    }
    Ok(())
}

fn check(file: &Path, model: Option<&Path>, epsilon: f64, out: &mut dyn Write) -> Outcome {
    let parsed = read_model(file)?;
    match (&parsed, model) {
        (Model::Mdp(m), None) => {
            writeln!(out, "ok: mdp with {} states, {} actions", m.n_states(), m.n_actions())?
        }
        (Model::Bmdp(b), None) => {
            writeln!(out, "ok: bmdp with {} states, {} actions", b.n_states(), b.n_actions())?
        }
        (Model::Fmdp(f), None) => writeln!(
            out,
            "ok: fmdp with {} variables, {} actions",
            f.n_variables(),
            f.n_actions()
        )?,
        (Model::Partition(p), None) => {
            let blocks = match p {
                PartitionFile::Explicit(p) => p.len(),
                PartitionFile::Symbolic { blocks, .. } => blocks.len(),
            };
            writeln!(out, "ok: partition with {blocks} blocks")?
        }
        (Model::Partition(p), Some(model_path)) => {
            let m = match read_model(model_path)? {
                Model::Mdp(m) => m,
                Model::Fmdp(f) => expand_to_explicit(&f)?,
                other => {
                    return Err(Failure::Usage(format!(
                        "{}: expected an mdp or fmdp model, found {}",
                        model_path.display(),
                        other.kind().tag()
                    )))
                }
            };
            let partition = partition_of(p, &m)?;
            let report = verify_homogeneity(&m, &partition, epsilon)?;
            if !report.is_homogeneous() {
                return Err(Failure::Semantic(format!(
                    "partition is not {}-homogeneous: reward spread {}, transition spread {}",
                    real(epsilon),
                    real(report.max_reward_spread),
                    real(report.max_transition_spread)
                )));
            }
            writeln!(
                out,
                "ok: {} blocks, {}-homogeneous (reward spread {}, transition spread {})",
                partition.len(),
                real(epsilon),
                real(report.max_reward_spread),
                real(report.max_transition_spread)
            )?;
        }
        (_, Some(_)) => {
            return Err(Failure::Usage("--model applies only to partition files".into()))
        }
    }
    Ok(())
}

fn partition_of(p: &PartitionFile, m: &ExplicitMdp<f64>) -> Result<Partition, Failure> {
    let partition = match p {
        PartitionFile::Explicit(p) => p.clone(),
        PartitionFile::Symbolic { variables, blocks } => {
            if 1usize.checked_shl(variables.len() as u32) != Some(m.n_states()) {
                return Err(Failure::Semantic(format!(
                    "partition over {} variables does not match a model with {} states",
                    variables.len(),
                    m.n_states()
                )));
            }
            formulas_to_partition(blocks, variables.len())?
        }
    };
    if partition.n_states() != m.n_states() {
        return Err(Failure::Semantic(format!(
            "partition covers {} states, model has {}",
            partition.n_states(),
            m.n_states()
        )));
    }
    Ok(partition)
}
