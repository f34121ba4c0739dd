//! Browser bindings for the interactive demo page in `www/`.
//!
//! Three operations: a steppable 2-D run ([`DemoRun`]), an FM-NES vs
//! DX-NES-IC race on a chosen benchmark ([`compare`]), and the weight
//! explorer ([`weights`]). Everything crosses the boundary as JSON strings.

use fmnes::engine::ridge_ratio;
use fmnes::{
    compute_distance_weights, compute_mu_eff, compute_rank_weights, evaluate, feasible_alpha,
    make_benchmark, resample_ask, run_trial, Engine, EvalCounter, ExperimentSpec, Fitness, Phase,
    Problem, ResamplePolicy, StrategyConfig, StrategyMode,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Sample {
    x: f64,
    y: f64,
    feasible: bool,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    generation: u64,
    evals: u64,
    infeasible_evals: u64,
    best: Option<f64>,
    mean: [f64; 2],
    sigma: f64,
    /// σ²·B·Bᵀ, row major.
    covariance: [f64; 4],
    ridge_ratio: f64,
    gamma: f64,
    phase: Option<Phase>,
    samples: &'a [Sample],
    done: bool,
    error: Option<&'a str>,
}

/// A two-dimensional run that the page advances a few generations per frame.
#[wasm_bindgen]
pub struct DemoRun {
    engine: Engine,
    problem: Problem,
    resampling: bool,
    rng: ChaCha8Rng,
    counter: EvalCounter,
    best: Option<f64>,
    samples: Vec<Sample>,
    phase: Option<Phase>,
    done: bool,
    error: Option<String>,
}

#[wasm_bindgen]
impl DemoRun {
    #[wasm_bindgen(constructor)]
    pub fn new(strategy: &str, problem: &str, lambda: usize, seed: u64) -> Result<DemoRun, String> {
        let mode: StrategyMode = strategy.parse().map_err(|e| format!("{e}"))?;
        let problem = make_benchmark(problem, 2).map_err(|e| e.to_string())?;
        let config = StrategyConfig::for_mode(mode, 2, lambda).map_err(|e| e.to_string())?;
        let engine = Engine::new(config, problem.initial_mean(), problem.initial_sigma())
            .map_err(|e| e.to_string())?;
        Ok(DemoRun {
            engine,
            problem,
            resampling: mode.uses_resampling(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            counter: EvalCounter::default(),
            best: None,
            samples: Vec::new(),
            phase: None,
            done: false,
            error: None,
        })
    }

    /// Advances up to `generations` generations and returns the snapshot JSON.
    /// Stops early once the best value drops below 1e-10 or the state degenerates.
    pub fn step(&mut self, generations: usize) -> String {
        for _ in 0..generations {
            if self.done {
                break;
            }
            if let Err(e) = self.generation() {
                self.done = true;
                self.error = Some(e);
            }
            if self.best.is_some_and(|b| b < 1e-10) {
                self.done = true;
            }
        }
        self.snapshot()
    }

    pub fn snapshot(&self) -> String {
        let s = self.engine.state();
        let bbt = &s.transform * s.transform.transpose();
        let v = s.sigma * s.sigma;
        serde_json::to_string(&Snapshot {
            generation: s.generation,
            evals: self.counter.total,
            infeasible_evals: self.counter.infeasible,
            best: self.best,
            mean: [s.mean[0], s.mean[1]],
            sigma: s.sigma,
            covariance: [
                v * bbt[(0, 0)],
                v * bbt[(0, 1)],
                v * bbt[(1, 0)],
                v * bbt[(1, 1)],
            ],
            ridge_ratio: ridge_ratio(&s.transform),
            gamma: s.gamma,
            phase: self.phase,
            samples: &self.samples,
            done: self.done,
            error: self.error.as_deref(),
        })
        .expect("snapshot serializes")
    }
}

impl DemoRun {
    fn generation(&mut self) -> Result<(), String> {
        let pop = if self.resampling {
            let policy = ResamplePolicy {
                max_consecutive_infeasible: 100_000,
                eval_limit: u64::MAX,
            };
            resample_ask(
                &self.engine,
                &self.problem,
                &mut self.counter,
                &mut self.rng,
                policy,
            )
            .map_err(|e| e.to_string())?
        } else {
            self.engine
                .ask(&mut self.rng)
                .into_iter()
                .map(|c| {
                    let v = evaluate(&self.problem, c.x.as_slice(), &mut self.counter)
                        .expect("dimension fixed at 2");
                    c.evaluated(v)
                })
                .collect()
        };
        self.samples = pop
            .iter()
            .map(|s| Sample {
                x: s.x[0],
                y: s.x[1],
                feasible: s.value.is_feasible(),
            })
            .collect();
        for s in &pop {
            if let Fitness::Feasible(v) = s.value {
                self.best = Some(self.best.map_or(v, |b| b.min(v)));
            }
        }
        let report = self.engine.step(pop).map_err(|e| e.to_string())?;
        self.phase = report.phase;
        Ok(())
    }
}

/// Objective value at (x, y) of a 2-D benchmark; NaN outside the feasible set.
#[wasm_bindgen]
pub fn objective(problem: &str, x: f64, y: f64) -> f64 {
    match make_benchmark(problem, 2) {
        Ok(p) if p.is_feasible(&[x, y]) => p.objective(&[x, y]),
        _ => f64::NAN,
    }
}

#[derive(Serialize)]
struct Curve {
    strategy: &'static str,
    lambda: usize,
    success: bool,
    evals_used: u64,
    /// (evaluations, best feasible value) after each generation.
    points: Vec<(u64, f64)>,
}

const MAX_POINTS: usize = 400;

/// Runs FM-NES and DX-NES-IC with the same seed and returns both best-value
/// curves as JSON.
#[wasm_bindgen]
pub fn compare(
    problem: &str,
    dim: usize,
    lambda_fm: usize,
    lambda_dx: usize,
    budget: u64,
    seed: u64,
) -> Result<String, String> {
    let bench = problem.parse().map_err(|e| format!("{e}"))?;
    let curves = [
        (StrategyMode::FmNes, lambda_fm),
        (StrategyMode::DxNesIc, lambda_dx),
    ]
    .into_iter()
    .map(|(mode, lambda)| {
        let mut spec = ExperimentSpec::new(mode, bench, dim, lambda);
        spec.trials = 1;
        spec.eval_budget = budget;
        spec.base_seed = seed;
        spec.trajectory = true;
        spec.validate().map_err(|e| e.to_string())?;
        let rec = run_trial(&spec, lambda, 0).map_err(|e| e.to_string())?;
        let all: Vec<(u64, f64)> = rec
            .trajectory
            .unwrap_or_default()
            .into_iter()
            .filter_map(|p| p.best.map(|b| (p.evals, b)))
            .collect();
        let stride = all.len().div_ceil(MAX_POINTS).max(1);
        let mut points: Vec<_> = all.iter().copied().step_by(stride).collect();
        if let Some(&last) = all.last() {
            if points.last() != Some(&last) {
                points.push(last);
            }
        }
        Ok(Curve {
            strategy: mode.name(),
            lambda,
            success: rec.success,
            evals_used: rec.evals_used,
            points,
        })
    })
    .collect::<Result<Vec<_>, String>>()?;
    Ok(serde_json::to_string(&curves).expect("curves serialize"))
}

#[derive(Serialize)]
struct Weights {
    rank: Vec<f64>,
    distance: Vec<f64>,
    /// ‖z‖ of each ranked sample.
    norms: Vec<f64>,
    mu_eff: f64,
    alpha: f64,
    alpha_used: f64,
}

/// Rank and distance weights for `lambda` random samples in `dim` dimensions,
/// of which the first `n_feasible` ranks are feasible.
#[wasm_bindgen]
pub fn weights(lambda: usize, dim: usize, n_feasible: usize, seed: u64) -> Result<String, String> {
    let rank = compute_rank_weights(lambda).map_err(|e| e.to_string())?;
    let config =
        StrategyConfig::for_mode(StrategyMode::FmNes, dim, lambda).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norms: Vec<f64> = (0..lambda)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    v * v
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let alpha_used = feasible_alpha(config.alpha, n_feasible.min(lambda), lambda);
    Ok(serde_json::to_string(&Weights {
        mu_eff: compute_mu_eff(&rank),
        distance: compute_distance_weights(&norms, alpha_used),
        rank,
        norms,
        alpha: config.alpha,
        alpha_used,
    })
    .expect("weights serialize"))
}
