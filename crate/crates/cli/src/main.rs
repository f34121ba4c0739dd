//! `fmnes` — run optimizer campaigns and render their diagnostics.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fmnes::{
    emit_csv, emit_eig_plot, emit_json, read_json, run_experiment, Benchmark, ConfigFile,
    Execution, ExperimentSpec, RunReport, StrategyMode,
};

/// Sample sizes swept when `sweep` is given no --lambda.
const SWEEP_LAMBDAS: [usize; 11] = [4, 8, 12, 16, 20, 24, 28, 32, 40, 60, 80];

#[derive(Parser)]
#[command(
    name = "fmnes",
    version,
    about = "Natural evolution strategies under implicit constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment, from a config file and/or flags.
    Run {
        /// TOML experiment file (see `dump-config`); flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        exp: ExperimentFlags,
    },
    /// Run an experiment over a grid of sample sizes.
    Sweep {
        #[command(flatten)]
        exp: ExperimentFlags,
    },
    /// Render the eigenvalue/best-value diagnostic of one trial as SVG.
    Plot {
        /// records.json written by `run` or `sweep`.
        records: PathBuf,
        /// Sample size to pick when the file holds several.
        #[arg(long)]
        lambda: Option<usize>,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Output SVG path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the fully resolved configuration, every strategy default spelled out.
    DumpConfig {
        #[command(flatten)]
        exp: ExperimentFlags,
    },
}

#[derive(Args)]
struct ExperimentFlags {
    #[arg(long)]
    strategy: Option<StrategyMode>,
    #[arg(long)]
    problem: Option<Benchmark>,
    #[arg(long)]
    dim: Option<usize>,
    /// One or more sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Evaluation budget per trial.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    target: Option<f64>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (run/sweep) or file (dump-config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record per-generation best values and eigenvalues.
    #[arg(long)]
    trajectory: bool,
    /// Run trials on one thread.
    #[arg(long)]
    serial: bool,
}

type CliResult<T> = Result<T, String>;

impl ExperimentFlags {
    /// Flags over an optional base spec; strategy, problem and dim are
    /// mandatory when there is no base.
    fn spec(
        &self,
        base: Option<ExperimentSpec>,
        default_lambdas: &[usize],
    ) -> CliResult<ExperimentSpec> {
        let mut spec = match base {
            Some(s) => s,
            None => {
                let strategy = self.strategy.ok_or("--strategy is required")?;
                let problem = self.problem.ok_or("--problem is required")?;
                let dim = self.dim.ok_or("--dim is required")?;
                let mut s = ExperimentSpec::new(strategy, problem, dim, 0);
                s.lambdas = default_lambdas.to_vec();
                s
            }
        };
        if let Some(v) = self.strategy {
            spec.strategy = v;
        }
        if let Some(v) = self.problem {
            spec.problem = v;
        }
        if let Some(v) = self.dim {
            spec.dim = v;
        }
        if !self.lambda.is_empty() {
            spec.lambdas = self.lambda.clone();
        }
        if let Some(v) = self.trials {
            spec.trials = v;
        }
        if let Some(v) = self.budget {
            spec.eval_budget = v;
        }
        if let Some(v) = self.target {
            spec.target = v;
        }
        if let Some(v) = self.seed {
            spec.base_seed = v;
        }
        spec.trajectory |= self.trajectory;
        if spec.lambdas.is_empty() {
            return Err("--lambda is required".into());
        }
        Ok(spec)
    }

    fn execution(&self) -> Execution {
        if self.serial {
            Execution::Serial
        } else {
            Execution::Parallel
        }
    }
}

fn load_config(path: &Path) -> CliResult<ExperimentSpec> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let cfg = ConfigFile::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(cfg.into_spec())
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn experiment(spec: &ExperimentSpec, flags: &ExperimentFlags) -> CliResult<()> {
    eprintln!(
        "{} on {} (d={}), lambda {:?}, {} trials",
        spec.strategy, spec.problem, spec.dim, spec.lambdas, spec.trials
    );
    let reports = run_experiment(spec, flags.execution()).map_err(|e| e.to_string())?;
    let rows: Vec<_> = reports.iter().map(RunReport::summary).collect();
    for r in &rows {
        eprintln!(
            "  lambda={:<3} success {}/{}  mean evals {}",
            r.lambda,
            r.n_success,
            r.trials,
            r.mean_evals.map_or("-".into(), |m| format!("{m:.0}"))
        );
    }
    match &flags.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            emit_csv(&rows, create(&dir.join("summary.csv"))?).map_err(|e| e.to_string())?;
            emit_json(&reports, create(&dir.join("records.json"))?).map_err(|e| e.to_string())?;
            let toml = ConfigFile::resolved(spec)
                .and_then(|c| c.to_toml())
                .map_err(|e| e.to_string())?;
            fs::write(dir.join("config.toml"), toml).map_err(|e| e.to_string())?;
            eprintln!("wrote {}", dir.display());
        }
        None => emit_csv(&rows, io::stdout().lock()).map_err(|e| e.to_string())?,
    }
    Ok(())
}

fn plot(records: &Path, lambda: Option<usize>, trial: usize, out: Option<&Path>) -> CliResult<()> {
    let file = File::open(records).map_err(|e| format!("{}: {e}", records.display()))?;
    let reports = read_json(BufReader::new(file)).map_err(|e| e.to_string())?;
    let report = reports
        .iter()
        .find(|r| lambda.map_or(true, |l| r.lambda == l))
        .ok_or("no report with the requested lambda")?;
    let record = report
        .records
        .iter()
        .find(|r| r.trial == trial)
        .ok_or_else(|| format!("no trial {trial} in the records"))?;
    let title = format!(
        "{} on {} (d={}, lambda={}, trial {})",
        report.strategy, report.problem, report.dim, report.lambda, trial
    );
    let svg = emit_eig_plot(record, &title).map_err(|e| e.to_string())?;
    match out {
        Some(p) => fs::write(p, svg).map_err(|e| format!("{}: {e}", p.display())),
        None => io::stdout()
            .write_all(svg.as_bytes())
            .map_err(|e| e.to_string()),
    }
}

fn dump_config(flags: &ExperimentFlags) -> CliResult<()> {
    let base = ExperimentSpec::new(
        flags.strategy.unwrap_or(StrategyMode::FmNes),
        flags.problem.unwrap_or(Benchmark::Sphere),
        flags.dim.unwrap_or(40),
        8,
    );
    let spec = flags.spec(Some(base), &[])?;
    let text = ConfigFile::resolved(&spec)
        .and_then(|c| c.to_toml())
        .map_err(|e| e.to_string())?;
    match &flags.out {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, exp } => config
            .as_deref()
            .map(load_config)
            .transpose()
            .and_then(|base| exp.spec(base, &[]))
            .and_then(|spec| experiment(&spec, exp)),
        Command::Sweep { exp } => exp
            .spec(None, &SWEEP_LAMBDAS)
            .and_then(|spec| experiment(&spec, exp)),
        Command::Plot {
            records,
            lambda,
            trial,
            out,
        } => plot(records, *lambda, *trial, out.as_deref()),
        Command::DumpConfig { exp } => dump_config(exp),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
