use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use avgcost::dp::{evaluate_policy, mismatch, solve_acoe, AcoeOptions, Certification};
use avgcost::experiments::{run, Experiment};
use avgcost::learning::{adaptive_run, write_series_csv, AdaptiveConfig, Estimator, Schedule, ShiftDynamics};
use avgcost::metrics::{check_ergodicity, ErgodicityOptions};
use avgcost::perturbations::BUILTIN_FAMILIES;
use avgcost::{Error, FiniteMdp, PerturbationFamily, StationaryPolicy};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

/// Average-cost MDP solver and perturbation experiments.
#[derive(Parser)]
#[command(name = "avgcost", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct SolverArgs {
    /// Span tolerance for relative value iteration.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Skip the ergodicity certificate.
    #[arg(long)]
    no_certify: bool,
    /// Largest horizon tried by the certificate.
    #[arg(long, default_value_t = 64)]
    t_max: usize,
}

impl SolverArgs {
    fn options(&self) -> AcoeOptions {
        AcoeOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            certification: if self.no_certify {
                Certification::Override
            } else {
                Certification::Require(ErgodicityOptions { t_max: self.t_max, ..Default::default() })
            },
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Report which ergodicity conditions hold.
    CheckErgodicity {
        model: PathBuf,
        #[arg(long, default_value_t = 64)]
        t_max: usize,
        #[arg(long, default_value_t = 1_000_000)]
        policy_cap: usize,
    },
    /// Solve the average cost optimality equation.
    Solve {
        model: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Average cost, invariant law and relative values of a policy.
    Evaluate { model: PathBuf, policy: PathBuf },
    /// Apply the optimal policy of the design model to the true model.
    Mismatch {
        truth: PathBuf,
        design: PathBuf,
        /// Apply this policy instead of the design's optimal one.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Built-in perturbation families: `family list` or `family <name> --n k`.
    Family {
        name: String,
        #[arg(long)]
        n: Option<usize>,
        /// Write the model here instead of stdout.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Materialize the limit model on member n's grid.
        #[arg(long)]
        limit: bool,
    },
    /// Adaptive certainty-equivalent control on a simulated true model.
    Learn {
        truth: PathBuf,
        #[arg(long, value_enum, default_value_t = EstimatorArg::Counts)]
        estimator: EstimatorArg,
        /// Shift dynamics for the inversion estimator.
        #[arg(long)]
        dynamics: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ScheduleArg::Factorial)]
        schedule: ScheduleArg,
        #[arg(long, default_value_t = 8)]
        k_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run an experiment config.
    Run { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Counts,
    Inversion,
    Truth,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Factorial,
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Convergence { .. } => 3,
        Error::Budget { .. } => 4,
        _ => 2,
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit_stdout(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn print(value: &Value) {
    emit_stdout(&serde_json::to_string_pretty(value).expect("JSON value serializes"));
}

fn load_policy(path: &Path, mdp: &FiniteMdp) -> avgcost::Result<StationaryPolicy> {
    let policy = StationaryPolicy::load(path, mdp.n_actions())?;
    mdp.check_policy(&policy)?;
    Ok(policy)
}

fn write_file(path: &Path, text: &str) -> avgcost::Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn execute(command: Command) -> avgcost::Result<()> {
    match command {
        Command::CheckErgodicity { model, t_max, policy_cap } => {
            let mdp = FiniteMdp::load(&model)?;
            let report = check_ergodicity(&mdp, &ErgodicityOptions { t_max, policy_cap })?;
            print(&serde_json::to_value(&report).expect("report serializes"));
        }
        Command::Solve { model, solver } => {
            let mdp = FiniteMdp::load(&model)?;
            let sol = solve_acoe(&mdp, &solver.options())?;
            print(&json!({
                "j_star": sol.j_star,
                "v_star": sol.v_star.values(),
                "policy": sol.policy.choice(),
                "residual": sol.residual,
                "iterations": sol.iterations,
                "certificate": sol.certificate,
            }));
        }
        Command::Evaluate { model, policy } => {
            let mdp = FiniteMdp::load(&model)?;
            let policy = load_policy(&policy, &mdp)?;
            let eval = evaluate_policy(&mdp, &policy)?;
            print(&json!({
                "j": eval.j,
                "pi": eval.pi.weights(),
                "v_hat": eval.v_hat.values(),
            }));
        }
        Command::Mismatch { truth, design, policy, solver } => {
            let truth = FiniteMdp::load(&truth)?;
            let design = FiniteMdp::load(&design)?;
            let policy = policy.map(|p| load_policy(&p, &truth)).transpose()?;
            let record = mismatch(&truth, &design, &solver.options(), policy.as_ref())?;
            print(&serde_json::to_value(&record).expect("record serializes"));
        }
        Command::Family { name, n, emit, limit } => {
            if name == "list" {
                let list: Vec<Value> = BUILTIN_FAMILIES
                    .iter()
                    .map(|(name, description)| json!({ "name": name, "description": description }))
                    .collect();
                print(&Value::Array(list));
                return Ok(());
            }
            let n = n.ok_or_else(|| Error::Validation { path: "--n".into(), message: "required for a family".into() })?;
            let family = PerturbationFamily::builtin(&name, n)?;
            let model = if limit { family.limit(n)? } else { family.member(n)? };
            let text = model.to_json_string();
            match emit {
                Some(path) => write_file(&path, &(text + "\n"))?,
                None => emit_stdout(&text),
            }
        }
        Command::Learn { truth, estimator, dynamics, schedule, k_max, seed, out, solver } => {
            let mdp = FiniteMdp::load(&truth)?;
            let estimator = match estimator {
                EstimatorArg::Counts => Estimator::Counts,
                EstimatorArg::Truth => Estimator::Truth,
                EstimatorArg::Inversion => {
                    let path = dynamics.ok_or_else(|| Error::Validation {
                        path: "--dynamics".into(),
                        message: "required by the inversion estimator".into(),
                    })?;
                    let text = fs::read_to_string(&path)
                        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
                    let d: ShiftDynamics = serde_json::from_str(&text)
                        .map_err(|e| Error::Validation { path: path.display().to_string(), message: e.to_string() })?;
                    Estimator::NoiseInversion(ShiftDynamics::new(d.n_states, d.target, d.noise_grid)?)
                }
            };
            let mut config = AdaptiveConfig::new(estimator, k_max, seed);
            config.schedule = match schedule {
                ScheduleArg::Factorial => Schedule::Factorial,
            };
            config.acoe = solver.options();
            let series = adaptive_run(&mdp, &config)?;
            let file = fs::File::create(&out).map_err(|source| Error::Io { path: out.display().to_string(), source })?;
            write_series_csv(&series.rows, file)?;
            print(&json!({
                "out": out,
                "j_star_true": series.j_star_true,
                "final_gap": series.final_gap(),
                "final_policy": series.policies.last().map(|p| p.choice()),
            }));
        }
        Command::Run { config } => {
            let exp = Experiment::load(&config)?;
            let summary = run(&exp)?;
            print(&serde_json::to_value(&summary).expect("summary serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
