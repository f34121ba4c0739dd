//! Multi-trial experiment campaigns and their CSV/JSON reports.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::{ConfigError, StrategyConfig, StrategyMode, StrategyOverrides};
use crate::engine::{self, Engine, EngineError, EvaluatedSolution};
use crate::problems::{
    evaluate, resample_ask, Benchmark, EvalCounter, Problem, ProblemError, ResampleError,
    ResamplePolicy,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn default_trials() -> usize {
    50
}
fn default_budget() -> u64 {
    1_000_000
}
fn default_target() -> f64 {
    1e-10
}
fn default_resample_cap() -> u64 {
    1_000_000
}

/// One campaign: a strategy on a problem over a list of sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub strategy: StrategyMode,
    pub problem: Benchmark,
    pub dim: usize,
    #[serde(rename = "lambda")]
    pub lambdas: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(rename = "budget", default = "default_budget")]
    pub eval_budget: u64,
    #[serde(default = "default_target")]
    pub target: f64,
    #[serde(rename = "seed", default)]
    pub base_seed: u64,
    /// Record best-value and eigenvalue trajectories every generation.
    #[serde(default)]
    pub trajectory: bool,
    #[serde(default = "default_resample_cap")]
    pub resample_cap: u64,
    #[serde(skip)]
    pub overrides: StrategyOverrides,
}

impl ExperimentSpec {
    pub fn new(strategy: StrategyMode, problem: Benchmark, dim: usize, lambda: usize) -> Self {
        Self {
            strategy,
            problem,
            dim,
            lambdas: vec![lambda],
            trials: default_trials(),
            eval_budget: default_budget(),
            target: default_target(),
            base_seed: 0,
            trajectory: false,
            resample_cap: default_resample_cap(),
            overrides: StrategyOverrides::default(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::InvalidSpec(
                "trials must be at least 1".into(),
            ));
        }
        if self.lambdas.is_empty() {
            return Err(HarnessError::InvalidSpec("no sample size given".into()));
        }
        if let Some(&l) = self
            .lambdas
            .iter()
            .find(|&&l| (l as u64) > self.eval_budget)
        {
            return Err(HarnessError::InvalidSpec(format!(
                "budget {} is smaller than lambda {l}",
                self.eval_budget
            )));
        }
        if !(self.target > 0.0) {
            return Err(HarnessError::InvalidSpec(format!(
                "target must be positive, got {}",
                self.target
            )));
        }
        if self.resample_cap == 0 {
            return Err(HarnessError::InvalidSpec(
                "resample_cap must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<Problem, HarnessError> {
        Ok(crate::problems::make_benchmark(
            self.problem.name(),
            self.dim,
        )?)
    }

    /// Mode defaults for `lambda` with the spec's overrides applied.
    pub fn strategy_config(&self, lambda: usize) -> Result<StrategyConfig, HarnessError> {
        let mut cfg = StrategyConfig::for_mode(self.strategy, self.dim, lambda)?;
        cfg.apply(&self.overrides);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    BudgetExhausted,
    SigmaGuard,
    ResampleCap,
    /// Any other numerical breakdown reported by the engine.
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub evals: u64,
    /// Best feasible value so far; `None` until one is found.
    pub best: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSample {
    pub evals: u64,
    /// √eigenvalues of B·Bᵀ, descending.
    pub sqrt_eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub evals_used: u64,
    pub infeasible_evals: u64,
    pub generations: u64,
    pub best_value: Option<f64>,
    pub failure: Option<FailureReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TrajectoryPoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eig_trajectory: Option<Vec<EigenSample>>,
}

impl TrialRecord {
    /// Largest √(λ₁/λ₂) seen over the recorded eigenvalue trajectory.
    pub fn max_ridge_ratio(&self) -> Option<f64> {
        self.eig_trajectory.as_ref().map(|t| {
            t.iter()
                .filter(|s| s.sqrt_eigenvalues.len() >= 2)
                .map(|s| s.sqrt_eigenvalues[0] / s.sqrt_eigenvalues[1])
                .fold(1.0, f64::max)
        })
    }
}

/// Runs one trial to success, budget exhaustion, or engine abort.
pub fn run_trial(
    spec: &ExperimentSpec,
    lambda: usize,
    trial: usize,
) -> Result<TrialRecord, HarnessError> {
    let problem = spec.problem()?;
    let config = spec.strategy_config(lambda)?;
    let seed = spec.base_seed.wrapping_add(trial as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut engine = Engine::new(config, problem.initial_mean(), problem.initial_sigma())?;
    let mut counter = EvalCounter::default();
    let mut best: Option<f64> = None;
    let mut trajectory = spec.trajectory.then(Vec::new);
    let mut eig_trajectory = spec.trajectory.then(Vec::new);
    let resample = ResamplePolicy {
        max_consecutive_infeasible: spec.resample_cap,
        eval_limit: spec.eval_budget,
    };

    let (success, failure, detail) = loop {
        let pop: Vec<EvaluatedSolution> = if spec.strategy.uses_resampling() {
            match resample_ask(&engine, &problem, &mut counter, &mut rng, resample) {
                Ok(pop) => pop,
                Err(ResampleError::CapReached(n)) => {
                    break (
                        false,
                        Some(FailureReason::ResampleCap),
                        Some(format!("{n} consecutive infeasible draws")),
                    )
                }
                Err(ResampleError::EvalLimit { .. }) => {
                    break (false, Some(FailureReason::BudgetExhausted), None)
                }
            }
        } else {
            if counter.total + lambda as u64 > spec.eval_budget {
                break (false, Some(FailureReason::BudgetExhausted), None);
            }
            engine
                .ask(&mut rng)
                .into_iter()
                .map(|c| {
                    let v = evaluate(&problem, c.x.as_slice(), &mut counter)?;
                    Ok(c.evaluated(v))
                })
                .collect::<Result<_, ProblemError>>()?
        };

        for v in pop.iter().filter_map(|s| s.value.value()) {
            if best.map_or(true, |b| v < b) {
                best = Some(v);
            }
        }
        let reached = best.is_some_and(|b| b < spec.target);

        if !reached {
            if let Err(e) = engine.step(pop) {
                let reason = match e {
                    EngineError::SigmaOutOfRange { .. } => FailureReason::SigmaGuard,
                    _ => FailureReason::Numerical,
                };
                break (false, Some(reason), Some(e.to_string()));
            }
        }
        if let Some(t) = trajectory.as_mut() {
            t.push(TrajectoryPoint {
                evals: counter.total,
                best,
            });
        }
        if let Some(t) = eig_trajectory.as_mut() {
            t.push(EigenSample {
                evals: counter.total,
                sqrt_eigenvalues: engine::sqrt_eigenvalues(&engine.state().transform),
            });
        }
        if reached {
            break (true, None, None);
        }
    };

    Ok(TrialRecord {
        trial,
        seed,
        success,
        evals_used: counter.total,
        infeasible_evals: counter.infeasible,
        generations: engine.state().generation,
        best_value: best,
        failure,
        failure_detail: detail,
        trajectory,
        eig_trajectory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    /// Trials spread over the global worker pool (serial without the `parallel` feature).
    #[default]
    Parallel,
}

/// Aggregate over the trials of one (strategy, problem, λ) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: StrategyMode,
    pub problem: Benchmark,
    pub dim: usize,
    pub lambda: usize,
    pub trials: usize,
    pub n_success: usize,
    /// Mean evaluations over successful trials only.
    pub mean_evals: Option<f64>,
    /// Sample standard deviation over successful trials only.
    pub std_evals: Option<f64>,
    pub base_seed: u64,
}

/// Per-λ output of a campaign: summary plus the raw trials, keyed by trial index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: StrategyMode,
    pub problem: Benchmark,
    pub dim: usize,
    pub lambda: usize,
    pub eval_budget: u64,
    pub target: f64,
    pub base_seed: u64,
    pub records: Vec<TrialRecord>,
}

impl RunReport {
    pub fn summary(&self) -> SummaryRow {
        let evals: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.success)
            .map(|r| r.evals_used as f64)
            .collect();
        let (mean_evals, std_evals) = mean_std(&evals);
        SummaryRow {
            strategy: self.strategy,
            problem: self.problem,
            dim: self.dim,
            lambda: self.lambda,
            trials: self.records.len(),
            n_success: evals.len(),
            mean_evals,
            std_evals,
            base_seed: self.base_seed,
        }
    }
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

pub fn run_lambda(
    spec: &ExperimentSpec,
    lambda: usize,
    execution: Execution,
) -> Result<RunReport, HarnessError> {
    let run = |t: usize| run_trial(spec, lambda, t);
    let records: Result<Vec<_>, _> = match execution {
        Execution::Serial => (0..spec.trials).map(run).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..spec.trials).into_par_iter().map(run).collect()
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel => (0..spec.trials).map(run).collect(),
    };
    Ok(RunReport {
        strategy: spec.strategy,
        problem: spec.problem,
        dim: spec.dim,
        lambda,
        eval_budget: spec.eval_budget,
        target: spec.target,
        base_seed: spec.base_seed,
        records: records?,
    })
}

/// Runs every sample size of the spec; one report per λ, in spec order.
pub fn run_experiment(
    spec: &ExperimentSpec,
    execution: Execution,
) -> Result<Vec<RunReport>, HarnessError> {
    spec.validate()?;
    spec.lambdas
        .iter()
        .map(|&l| run_lambda(spec, l, execution))
        .collect()
}

pub const CSV_HEADER: [&str; 9] = [
    "strategy",
    "problem",
    "d",
    "lambda",
    "trials",
    "n_success",
    "mean_evals",
    "std_evals",
    "base_seed",
];

pub fn emit_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.strategy.name().to_string(),
            r.problem.name().to_string(),
            r.dim.to_string(),
            r.lambda.to_string(),
            r.trials.to_string(),
            r.n_success.to_string(),
            opt(r.mean_evals),
            opt(r.std_evals),
            r.base_seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_json<W: Write>(reports: &[RunReport], out: W) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(out, reports)?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<Vec<RunReport>, HarnessError> {
    Ok(serde_json::from_reader(input)?)
}
