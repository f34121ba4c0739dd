//! The generation loop: mirrored sampling, implicit-constraint ranking, phase
//! detection, natural-gradient updates, expansion emphasis and the rank-one
//! update with its ridge condition and first-infeasibility reset.
//!
//! The engine is driven through an ask/tell interface: [`Engine::ask`] returns
//! candidates, the caller evaluates them (objective value or infeasible) and
//! hands the results to [`Engine::step`]. Each sub-operation of a generation is
//! also exposed as a free function acting on a [`SearchState`] so it can be
//! tested in isolation.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::{
    compute_distance_weights, feasible_alpha, ConfigError, DerivedParams, SearchState,
    StrategyConfig,
};
use crate::linalg::{self, LinalgError, SymMatrix};

/// σ must stay inside this interval or the run is aborted.
pub const SIGMA_MIN: f64 = 1e-250;
pub const SIGMA_MAX: f64 = 1e250;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("step size left the safe range: sigma = {sigma:e} at generation {generation}")]
    SigmaOutOfRange { sigma: f64, generation: u64 },
    #[error("expected a population of {expected} solutions, got {got}")]
    PopulationSize { expected: usize, got: usize },
    #[error("solution {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("solution {index} has a non-finite objective value {value}")]
    NonFiniteObjective { index: usize, value: f64 },
    #[error("search state became non-finite at generation {0}")]
    NonFiniteState(u64),
    #[error("initial step size must be positive and finite, got {0}")]
    InitialSigma(f64),
    #[error("initial transformation must have unit determinant, got {0}")]
    InitialTransform(f64),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Outcome of evaluating one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Fitness {
    Feasible(f64),
    /// Outside the feasible region; carries no objective value.
    Infeasible,
}

impl Fitness {
    pub fn is_feasible(self) -> bool {
        matches!(self, Fitness::Feasible(_))
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Fitness::Feasible(v) => Some(v),
            Fitness::Infeasible => None,
        }
    }

    /// The objective with infeasible points mapped to +∞.
    pub fn as_f64(self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

/// A sampled point awaiting evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub z: DVector<f64>,
    pub x: DVector<f64>,
}

impl Candidate {
    pub fn evaluated(self, value: Fitness) -> EvaluatedSolution {
        let z_norm = self.z.norm();
        EvaluatedSolution {
            z: self.z,
            x: self.x,
            value,
            z_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedSolution {
    pub z: DVector<f64>,
    pub x: DVector<f64>,
    pub value: Fitness,
    pub z_norm: f64,
}

impl EvaluatedSolution {
    pub fn feasible(&self) -> bool {
        self.value.is_feasible()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Movement,
    Stagnation,
    Convergence,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Movement => "movement",
            Phase::Stagnation => "stagnation",
            Phase::Convergence => "convergence",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaturalGradients {
    pub g_delta: DVector<f64>,
    pub g_m: SymMatrix,
    pub g_sigma: f64,
    /// Traceless part of `g_m`.
    pub g_b: SymMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub eta_m: f64,
    pub eta_sigma: f64,
    pub eta_b: f64,
}

/// What happened during one call to [`Engine::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// `None` when phase switching is disabled.
    pub phase: Option<Phase>,
    pub n_infeasible: usize,
    pub reset: bool,
    pub rank_one_applied: bool,
}

/// Draws λ/2 antithetic pairs `z, −z` and maps them through the current state.
pub fn ask<R: Rng + ?Sized>(state: &SearchState, lambda: usize, rng: &mut R) -> Vec<Candidate> {
    let d = state.dim();
    let mut out = Vec::with_capacity(lambda);
    for _ in 0..lambda / 2 {
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let neg = -&z;
        out.push(to_candidate(state, z));
        out.push(to_candidate(state, neg));
    }
    out
}

/// `x = m + σ·B·z`
pub fn to_candidate(state: &SearchState, z: DVector<f64>) -> Candidate {
    let x = &state.mean + (&state.transform * &z) * state.sigma;
    Candidate { z, x }
}

/// Preference order for implicitly constrained problems: feasible solutions by
/// ascending objective, then infeasible ones by ascending ‖z‖. Stable on ties.
pub fn preference(a: &EvaluatedSolution, b: &EvaluatedSolution) -> Ordering {
    match (a.value, b.value) {
        (Fitness::Feasible(fa), Fitness::Feasible(fb)) => fa.total_cmp(&fb),
        (Fitness::Feasible(_), Fitness::Infeasible) => Ordering::Less,
        (Fitness::Infeasible, Fitness::Feasible(_)) => Ordering::Greater,
        (Fitness::Infeasible, Fitness::Infeasible) => a.z_norm.total_cmp(&b.z_norm),
    }
}

pub fn rank(mut pop: Vec<EvaluatedSolution>) -> Vec<EvaluatedSolution> {
    pop.sort_by(preference);
    pop
}

/// On the first generation containing an infeasible solution, clears the
/// learned shape (B, both paths, γ) when `enable_reset` is set. The
/// unconstrained flag is cleared either way. Returns whether a reset happened.
pub fn maybe_reset(
    state: &mut SearchState,
    n_infeasible: usize,
    initial_transform: &DMatrix<f64>,
    enable_reset: bool,
) -> bool {
    if !state.unconstrained || n_infeasible == 0 {
        return false;
    }
    state.unconstrained = false;
    if !enable_reset {
        return false;
    }
    state.transform = initial_transform.clone();
    state.p_sigma.fill(0.0);
    state.p_c.fill(0.0);
    state.gamma = 1.0;
    true
}

fn weighted_sum(sorted: &[EvaluatedSolution], weights: &[f64]) -> DVector<f64> {
    let d = sorted[0].z.len();
    let mut acc = DVector::zeros(d);
    for (s, &w) in sorted.iter().zip(weights) {
        acc.axpy(w, &s.z, 1.0);
    }
    acc
}

pub fn update_p_sigma(
    state: &mut SearchState,
    sorted: &[EvaluatedSolution],
    w_rank: &[f64],
    mu_eff: f64,
    c_sigma: f64,
) {
    let step = weighted_sum(sorted, w_rank);
    let gain = (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt();
    state.p_sigma = &state.p_sigma * (1.0 - c_sigma) + step * gain;
}

/// Movement at or above `chi`, stagnation down to `0.1·chi`, convergence below.
pub fn detect_phase(p_sigma_norm: f64, chi: f64) -> Phase {
    if p_sigma_norm >= chi {
        Phase::Movement
    } else if p_sigma_norm >= 0.1 * chi {
        Phase::Stagnation
    } else {
        Phase::Convergence
    }
}

/// Distance weights and movement rates while moving, rank weights otherwise.
/// The distance tilt shrinks with the feasible fraction of the population.
/// With `phase == None` (phase switching disabled) the rank weights and the
/// movement-slot rates are used unconditionally.
pub fn select_weights_and_rates(
    phase: Option<Phase>,
    sorted: &[EvaluatedSolution],
    config: &StrategyConfig,
    params: &DerivedParams,
) -> (Vec<f64>, LearningRates) {
    let rates = |eta_sigma, eta_b| LearningRates {
        eta_m: config.eta_m,
        eta_sigma,
        eta_b,
    };
    match phase {
        Some(Phase::Movement) => {
            let norms: Vec<f64> = sorted.iter().map(|s| s.z_norm).collect();
            let n_feasible = sorted.iter().filter(|s| s.value.is_feasible()).count();
            (
                compute_distance_weights(
                    &norms,
                    feasible_alpha(config.alpha, n_feasible, sorted.len()),
                ),
                rates(config.eta_sigma_move, config.eta_b_move),
            )
        }
        Some(Phase::Stagnation) => (
            params.w_rank.clone(),
            rates(config.eta_sigma_stag, config.eta_b_stag),
        ),
        Some(Phase::Convergence) => (
            params.w_rank.clone(),
            rates(config.eta_sigma_conv, config.eta_b_conv),
        ),
        None => (
            params.w_rank.clone(),
            rates(config.eta_sigma_move, config.eta_b_move),
        ),
    }
}

pub fn estimate_gradients(sorted: &[EvaluatedSolution], weights: &[f64]) -> NaturalGradients {
    let d = sorted[0].z.len();
    let g_delta = weighted_sum(sorted, weights);
    let mut g_m = DMatrix::zeros(d, d);
    for (s, &w) in sorted.iter().zip(weights) {
        g_m.ger(w, &s.z, &s.z, 1.0);
    }
    let w_total: f64 = weights.iter().sum();
    for i in 0..d {
        g_m[(i, i)] -= w_total;
    }
    let g_m = SymMatrix::symmetrized(g_m);
    let g_sigma = g_m.trace() / d as f64;
    let g_b = g_m.traceless();
    NaturalGradients {
        g_delta,
        g_m,
        g_sigma,
        g_b,
    }
}

/// Mean, step size and shape updates. The mean uses the pre-update σ and B.
pub fn apply_updates(
    state: &mut SearchState,
    grads: &NaturalGradients,
    rates: LearningRates,
) -> Result<(), EngineError> {
    let shift = (&state.transform * &grads.g_delta) * (rates.eta_m * state.sigma);
    state.mean += shift;
    state.sigma *= (rates.eta_sigma * grads.g_sigma / 2.0).exp();
    let shape = linalg::sym_exp(&grads.g_b.scale(rates.eta_b / 2.0));
    state.transform = &state.transform * shape.as_matrix();
    check_state(state)
}

/// Evolution path of the mean shift, mapped through the pre-update `b_old`.
pub fn update_p_c(
    state: &mut SearchState,
    b_old: &DMatrix<f64>,
    g_delta: &DVector<f64>,
    c_c: f64,
    mu_eff: f64,
) {
    let gain = (c_c * (2.0 - c_c) * mu_eff).sqrt();
    state.p_c = &state.p_c * (1.0 - c_c) + (b_old * g_delta) * gain;
}

/// Updates γ from the largest relative second-moment change along the
/// eigenvectors of `b_old·b_oldᵀ`, and during movement stretches B along every
/// direction that grew, moving the volume change into σ.
pub fn emphasize_expansion(
    state: &mut SearchState,
    b_old: &DMatrix<f64>,
    movement: bool,
    c_gamma: f64,
    d_gamma: f64,
) -> Result<(), EngineError> {
    let d = state.dim();
    let cov_old = SymMatrix::gram(b_old);
    let cov_new = SymMatrix::gram(&state.transform);
    let eig = linalg::sym_eigen(&cov_old);
    let taus: Vec<f64> = eig
        .eigenvectors
        .column_iter()
        .map(|e| {
            let num = e.dot(&(cov_new.as_matrix() * e));
            let den = e.dot(&(cov_old.as_matrix() * e));
            num / den - 1.0
        })
        .collect();
    let tau = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grown = (1.0 - c_gamma) * state.gamma + c_gamma * (1.0 + d_gamma * tau).max(0.0).sqrt();
    state.gamma = grown.max(1.0);

    if movement {
        let mut q = DMatrix::<f64>::identity(d, d);
        for (e, &t) in eig.eigenvectors.column_iter().zip(&taus) {
            if t > 0.0 {
                q.ger(state.gamma - 1.0, &e, &e, 1.0);
            }
        }
        let root = linalg::det(&q)?.powf(1.0 / d as f64);
        state.sigma *= root;
        state.transform = (q * &state.transform) / root;
    }
    check_state(state)
}

/// √(λ₁/λ₂) of `B·Bᵀ`.
pub fn ridge_ratio(transform: &DMatrix<f64>) -> f64 {
    let eig = linalg::sym_eigen(&SymMatrix::gram(transform));
    (eig.eigenvalues[0] / eig.eigenvalues[1]).sqrt()
}

/// Square roots of the eigenvalues of `B·Bᵀ`, descending.
pub fn sqrt_eigenvalues(transform: &DMatrix<f64>) -> Vec<f64> {
    linalg::sym_eigen(&SymMatrix::gram(transform))
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

/// Volume-preserving stretch of B along `b_old⁻¹·p_c`.
pub fn rank_one_update(
    state: &mut SearchState,
    b_old: &DMatrix<f64>,
    c1: f64,
) -> Result<(), EngineError> {
    if c1 == 0.0 {
        // exp(0) = I
        return Ok(());
    }
    let y = linalg::inverse(b_old)? * &state.p_c;
    let d = state.dim();
    let mut r = y.clone() * y.transpose();
    for i in 0..d {
        r[(i, i)] -= 1.0;
    }
    let r_b = SymMatrix::symmetrized(r).traceless();
    let stretch = linalg::sym_exp(&r_b.scale(c1 / 2.0));
    state.transform = &state.transform * stretch.as_matrix();
    check_state(state)
}

fn check_state(state: &SearchState) -> Result<(), EngineError> {
    if !state.sigma.is_finite() || !(SIGMA_MIN..=SIGMA_MAX).contains(&state.sigma) {
        return Err(EngineError::SigmaOutOfRange {
            sigma: state.sigma,
            generation: state.generation,
        });
    }
    let finite =
        state.mean.iter().all(|v| v.is_finite()) && state.transform.iter().all(|v| v.is_finite());
    if !finite {
        return Err(EngineError::NonFiniteState(state.generation));
    }
    Ok(())
}

/// One optimizer run.
#[derive(Debug, Clone)]
pub struct Engine {
    config: StrategyConfig,
    params: DerivedParams,
    state: SearchState,
    initial_transform: DMatrix<f64>,
}

impl Engine {
    pub fn new(
        config: StrategyConfig,
        mean: DVector<f64>,
        sigma: f64,
    ) -> Result<Self, EngineError> {
        let d = mean.len();
        Self::with_transform(config, mean, sigma, DMatrix::identity(d, d))
    }

    pub fn with_transform(
        config: StrategyConfig,
        mean: DVector<f64>,
        sigma: f64,
        transform: DMatrix<f64>,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        if mean.len() != config.dim || transform.nrows() != config.dim {
            return Err(EngineError::DimensionMismatch {
                index: 0,
                expected: config.dim,
                got: mean.len(),
            });
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(EngineError::InitialSigma(sigma));
        }
        let det = linalg::det(&transform)?;
        if (det - 1.0).abs() > 1e-6 {
            return Err(EngineError::InitialTransform(det));
        }
        let params = DerivedParams::new(config.lambda, config.dim)?;
        Ok(Self {
            params,
            state: SearchState::new(mean, sigma, transform.clone()),
            initial_transform: transform,
            config,
        })
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.config
    }

    pub fn params(&self) -> &DerivedParams {
        &self.params
    }

    pub fn state(&self) -> &SearchState {
        &self.state
    }

    pub fn lambda(&self) -> usize {
        self.config.lambda
    }

    pub fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Candidate> {
        ask(&self.state, self.config.lambda, rng)
    }

    /// A single unpaired draw from the current distribution.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Candidate {
        let z = DVector::from_fn(self.state.dim(), |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        to_candidate(&self.state, z)
    }

    /// Consumes one evaluated population and advances the state by a generation.
    pub fn step(&mut self, pop: Vec<EvaluatedSolution>) -> Result<StepReport, EngineError> {
        self.check_population(&pop)?;
        let cfg = &self.config;
        let sorted = rank(pop);
        let n_infeasible = sorted.iter().filter(|s| !s.feasible()).count();

        let state = &mut self.state;
        let reset = maybe_reset(
            state,
            n_infeasible,
            &self.initial_transform,
            cfg.enable_reset,
        );
        update_p_sigma(
            state,
            &sorted,
            &self.params.w_rank,
            self.params.mu_eff,
            cfg.c_sigma,
        );
        let phase = cfg
            .enable_phase_switching
            .then(|| detect_phase(state.p_sigma.norm(), self.params.chi_d));
        let (weights, rates) = select_weights_and_rates(phase, &sorted, cfg, &self.params);
        let grads = estimate_gradients(&sorted, &weights);

        let b_old = state.transform.clone();
        apply_updates(state, &grads, rates)?;
        if cfg.enable_rank_one {
            update_p_c(state, &b_old, &grads.g_delta, cfg.c_c, self.params.mu_eff);
        }
        if cfg.enable_expansion {
            emphasize_expansion(
                state,
                &b_old,
                phase == Some(Phase::Movement),
                cfg.c_gamma,
                cfg.d_gamma,
            )?;
        }
        let mut rank_one_applied = false;
        if cfg.enable_rank_one {
            let on_ridge = state.unconstrained
                || !cfg.enable_ridge_condition
                || ridge_ratio(&state.transform) > cfg.beta;
            if on_ridge {
                rank_one_update(state, &b_old, cfg.c1)?;
                rank_one_applied = true;
            }
        }
        state.generation += 1;
        Ok(StepReport {
            phase,
            n_infeasible,
            reset,
            rank_one_applied,
        })
    }

    fn check_population(&self, pop: &[EvaluatedSolution]) -> Result<(), EngineError> {
        if pop.len() != self.config.lambda {
            return Err(EngineError::PopulationSize {
                expected: self.config.lambda,
                got: pop.len(),
            });
        }
        for (index, s) in pop.iter().enumerate() {
            if s.z.len() != self.config.dim || s.x.len() != self.config.dim {
                return Err(EngineError::DimensionMismatch {
                    index,
                    expected: self.config.dim,
                    got: s.z.len(),
                });
            }
            if let Fitness::Feasible(value) = s.value {
                if !value.is_finite() {
                    return Err(EngineError::NonFiniteObjective { index, value });
                }
            }
        }
        Ok(())
    }
}
