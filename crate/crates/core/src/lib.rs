//! Natural evolution strategies for unconstrained and implicitly constrained
//! black-box minimisation.
//!
//! The [`engine::Engine`] implements FM-NES: a distance-weighted exponential
//! NES with phase-dependent learning rates and expansion emphasis, extended by
//! a volume-preserving rank-one update that is gated by a ridge condition and
//! by a shape reset on the first infeasible sample. Switching features off in
//! [`StrategyConfig`] yields DX-NES-IC, xNES and the ablation variants.
//!
//! ```
//! use fmnes::{evaluate, make_benchmark, Engine, EvalCounter, StrategyConfig, StrategyMode};
//! use rand::SeedableRng;
//!
//! let problem = make_benchmark("sphere", 10).unwrap();
//! let config = StrategyConfig::for_mode(StrategyMode::FmNes, 10, 8).unwrap();
//! let mut engine = Engine::new(config, problem.initial_mean(), problem.initial_sigma()).unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
//! let mut counter = EvalCounter::default();
//! for _ in 0..50 {
//!     let pop = engine
//!         .ask(&mut rng)
//!         .into_iter()
//!         .map(|c| {
//!             let v = evaluate(&problem, c.x.as_slice(), &mut counter).unwrap();
//!             c.evaluated(v)
//!         })
//!         .collect();
//!     engine.step(pop).unwrap();
//! }
//! assert_eq!(counter.total, 400);
//! ```

pub mod config;
pub mod distribution;
pub mod engine;
pub mod harness;
pub mod linalg;
pub mod plot;
pub mod problems;

pub use config::ConfigFile;
pub use distribution::{
    chi_d, compute_distance_weights, compute_mu_eff, compute_rank_weights, feasible_alpha,
    ConfigError, DerivedParams, SearchState, StrategyConfig, StrategyMode, StrategyOverrides,
};
pub use engine::{
    Candidate, Engine, EngineError, EvaluatedSolution, Fitness, NaturalGradients, Phase, StepReport,
};
pub use harness::{
    emit_csv, emit_json, read_json, run_experiment, run_trial, Execution, ExperimentSpec,
    FailureReason, HarnessError, RunReport, SummaryRow, TrialRecord,
};
pub use linalg::{EigenDecomposition, LinalgError, SymMatrix};
pub use plot::{emit_eig_plot, PlotError};
pub use problems::{
    evaluate, make_benchmark, resample_ask, Benchmark, EvalCounter, Problem, ProblemError,
    ResamplePolicy,
};
