//! Search-distribution state, strategy hyperparameters and the weight schedules
//! shared by every strategy mode.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("sample size must be a positive even number, got {0}")]
    OddLambda(usize),
    #[error("dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("invalid value for `{field}`: {value} ({reason})")]
    OutOfRange {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("unknown strategy `{0}` (expected one of: {list})", list = StrategyMode::NAMES.join(", "))]
    UnknownStrategy(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Named configurations of the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyMode {
    /// Rank-one update, ridge condition and first-infeasibility reset.
    FmNes,
    /// FM-NES without the rank-one update (and therefore without reset).
    DxNesIc,
    /// Plain exponential NES: fixed learning rates, rank weights only.
    Xnes,
    /// xNES whose population is filled by resampling until λ feasible points exist.
    XnesResampling,
    /// FM-NES with the ridge condition removed (rank-one every generation).
    MethodA,
    /// FM-NES without the reset.
    MethodB,
    /// FM-NES with neither ridge condition nor reset.
    MethodC,
}

impl StrategyMode {
    pub const ALL: [StrategyMode; 7] = [
        StrategyMode::FmNes,
        StrategyMode::DxNesIc,
        StrategyMode::Xnes,
        StrategyMode::XnesResampling,
        StrategyMode::MethodA,
        StrategyMode::MethodB,
        StrategyMode::MethodC,
    ];

    pub const NAMES: [&'static str; 7] = [
        "fm-nes",
        "dx-nes-ic",
        "xnes",
        "xnes-r",
        "method-a",
        "method-b",
        "method-c",
    ];

    pub fn name(self) -> &'static str {
        let idx = Self::ALL.iter().position(|&m| m == self).unwrap();
        Self::NAMES[idx]
    }

    /// Whether the harness must fill populations with the resampling wrapper.
    pub fn uses_resampling(self) -> bool {
        self == StrategyMode::XnesResampling
    }
}

impl fmt::Display for StrategyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', '/'], "-");
        let norm = match norm.as_str() {
            "fmnes" => "fm-nes",
            "dxnesic" | "dx-nes" => "dx-nes-ic",
            "xnes-resampling" | "xnesr" => "xnes-r",
            "a" => "method-a",
            "b" => "method-b",
            "c" => "method-c",
            other => other,
        }
        .to_string();
        Self::NAMES
            .iter()
            .position(|&n| n == norm)
            .map(|i| Self::ALL[i])
            .ok_or_else(|| ConfigError::UnknownStrategy(s.to_string()))
    }
}

/// Every tunable of the engine. Defaults come from [`StrategyConfig::for_mode`];
/// any field can be overridden from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub lambda: usize,
    pub dim: usize,
    pub eta_m: f64,
    pub eta_sigma_move: f64,
    pub eta_sigma_stag: f64,
    pub eta_sigma_conv: f64,
    pub eta_b_move: f64,
    pub eta_b_stag: f64,
    pub eta_b_conv: f64,
    pub alpha: f64,
    pub c_sigma: f64,
    pub c_c: f64,
    pub c1: f64,
    pub beta: f64,
    pub c_gamma: f64,
    pub d_gamma: f64,
    pub enable_rank_one: bool,
    pub enable_ridge_condition: bool,
    pub enable_reset: bool,
    pub enable_phase_switching: bool,
    pub enable_expansion: bool,
}

/// Ridge threshold on √(λ₁/λ₂) of B·Bᵀ.
pub const DEFAULT_BETA: f64 = 1.2;

impl StrategyConfig {
    pub fn for_mode(mode: StrategyMode, dim: usize, lambda: usize) -> Result<Self, ConfigError> {
        if dim < 2 {
            return Err(ConfigError::Dimension(dim));
        }
        let w = compute_rank_weights(lambda)?;
        let mu_eff = compute_mu_eff(&w);
        let d = dim as f64;
        let lam = lambda as f64;

        let eta_b = ((0.025 * lam + 0.35 * d + 15.0) / (d * d + 6.0)).tanh();
        let mut cfg = StrategyConfig {
            lambda,
            dim,
            eta_m: 1.0,
            eta_sigma_move: 1.0,
            eta_sigma_stag: ((0.024 * lam + 0.7 * d + 20.0) / (d + 12.0)).tanh(),
            eta_sigma_conv: 2.0 * ((0.025 * lam + 0.75 * d + 10.0) / (d + 4.0)).tanh(),
            eta_b_move: eta_b,
            eta_b_stag: eta_b,
            eta_b_conv: eta_b,
            alpha: h_inv(dim) * (lam / d).sqrt().min(1.0),
            c_sigma: (mu_eff + 2.0) / (d + mu_eff + 5.0),
            c_c: (4.0 + mu_eff / d) / (d + 4.0 + 2.0 * mu_eff / d),
            c1: 2.0 / ((d + 1.3).powi(2) + mu_eff),
            beta: DEFAULT_BETA,
            c_gamma: 1.0 / (3.0 * (d - 1.0)),
            d_gamma: (d / lam).max(1.0),
            enable_rank_one: true,
            enable_ridge_condition: true,
            enable_reset: true,
            enable_phase_switching: true,
            enable_expansion: true,
        };
        match mode {
            StrategyMode::FmNes => {}
            StrategyMode::DxNesIc => {
                cfg.enable_rank_one = false;
                cfg.enable_reset = false;
            }
            StrategyMode::MethodA => cfg.enable_ridge_condition = false,
            StrategyMode::MethodB => cfg.enable_reset = false,
            StrategyMode::MethodC => {
                cfg.enable_ridge_condition = false;
                cfg.enable_reset = false;
            }
            StrategyMode::Xnes | StrategyMode::XnesResampling => {
                let eta = xnes_learning_rate(dim);
                cfg.eta_sigma_move = eta;
                cfg.eta_sigma_stag = eta;
                cfg.eta_sigma_conv = eta;
                cfg.eta_b_move = eta;
                cfg.eta_b_stag = eta;
                cfg.eta_b_conv = eta;
                cfg.enable_rank_one = false;
                cfg.enable_reset = false;
                cfg.enable_phase_switching = false;
                cfg.enable_expansion = false;
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.lambda < 2 || self.lambda % 2 != 0 {
            return Err(ConfigError::OddLambda(self.lambda));
        }
        if self.dim < 2 {
            return Err(ConfigError::Dimension(self.dim));
        }
        let positive = [
            ("eta_m", self.eta_m),
            ("alpha", self.alpha),
            ("d_gamma", self.d_gamma),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::OutOfRange {
                    field,
                    value,
                    reason: "must be positive",
                });
            }
        }
        let rates = [
            ("eta_sigma_move", self.eta_sigma_move),
            ("eta_sigma_stag", self.eta_sigma_stag),
            ("eta_sigma_conv", self.eta_sigma_conv),
            ("eta_b_move", self.eta_b_move),
            ("eta_b_stag", self.eta_b_stag),
            ("eta_b_conv", self.eta_b_conv),
            ("c1", self.c1),
        ];
        for (field, value) in rates {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ConfigError::OutOfRange {
                    field,
                    value,
                    reason: "must be finite and non-negative",
                });
            }
        }
        let unit = [("c_sigma", self.c_sigma), ("c_c", self.c_c)];
        for (field, value) in unit {
            if !(value > 0.0 && value <= 1.0) {
                return Err(ConfigError::OutOfRange {
                    field,
                    value,
                    reason: "must lie in (0, 1]",
                });
            }
        }
        if !(0.0..=1.0).contains(&self.c_gamma) {
            return Err(ConfigError::OutOfRange {
                field: "c_gamma",
                value: self.c_gamma,
                reason: "must lie in [0, 1]",
            });
        }
        if !(self.beta > 1.0) {
            return Err(ConfigError::OutOfRange {
                field: "beta",
                value: self.beta,
                reason: "must exceed 1",
            });
        }
        Ok(())
    }

    /// Applies every field present in `overrides`.
    pub fn apply(&mut self, overrides: &StrategyOverrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = overrides.$f { self.$f = v; } )* };
        }
        set!(
            eta_m,
            eta_sigma_move,
            eta_sigma_stag,
            eta_sigma_conv,
            eta_b_move,
            eta_b_stag,
            eta_b_conv,
            alpha,
            c_sigma,
            c_c,
            c1,
            beta,
            c_gamma,
            d_gamma,
            enable_rank_one,
            enable_ridge_condition,
            enable_reset,
            enable_phase_switching,
            enable_expansion
        );
    }
}

/// Optional per-field replacements for the mode defaults, as read from the
/// `[strategy]` table of a config file. Sample size and dimension are set by
/// the experiment, not here.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyOverrides {
    pub eta_m: Option<f64>,
    pub eta_sigma_move: Option<f64>,
    pub eta_sigma_stag: Option<f64>,
    pub eta_sigma_conv: Option<f64>,
    pub eta_b_move: Option<f64>,
    pub eta_b_stag: Option<f64>,
    pub eta_b_conv: Option<f64>,
    pub alpha: Option<f64>,
    pub c_sigma: Option<f64>,
    pub c_c: Option<f64>,
    pub c1: Option<f64>,
    pub beta: Option<f64>,
    pub c_gamma: Option<f64>,
    pub d_gamma: Option<f64>,
    pub enable_rank_one: Option<bool>,
    pub enable_ridge_condition: Option<bool>,
    pub enable_reset: Option<bool>,
    pub enable_phase_switching: Option<bool>,
    pub enable_expansion: Option<bool>,
}

/// xNES learning rate for σ and B: (9 + 3 ln d) / (5 d √d).
pub fn xnes_learning_rate(dim: usize) -> f64 {
    let d = dim as f64;
    (9.0 + 3.0 * d.ln()) / (5.0 * d * d.sqrt())
}

/// Root of `(1 + a²)·exp(a²/2)/0.24 − 10 − d = 0`, the base of the
/// distance-weight parameter α.
pub fn h_inv(dim: usize) -> f64 {
    let d = dim as f64;
    let f = |a: f64| (1.0 + a * a) * (a * a / 2.0).exp() / 0.24 - 10.0 - d;
    let df = |a: f64| a * (a * a / 2.0).exp() * (3.0 + a * a) / 0.24;
    let mut a = 1.0;
    for _ in 0..10_000 {
        let fa = f(a);
        if fa.abs() <= 1e-10 {
            break;
        }
        a -= 0.5 * fa / df(a);
    }
    a
}

/// Quantities fixed by λ and d for the whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    pub mu_eff: f64,
    pub w_rank: Vec<f64>,
    /// Approximation of E‖N(0, I)‖.
    pub chi_d: f64,
}

impl DerivedParams {
    pub fn new(lambda: usize, dim: usize) -> Result<Self, ConfigError> {
        let w_rank = compute_rank_weights(lambda)?;
        Ok(Self {
            mu_eff: compute_mu_eff(&w_rank),
            w_rank,
            chi_d: chi_d(dim),
        })
    }
}

fn rank_utilities(lambda: usize) -> Vec<f64> {
    let top = (lambda as f64 / 2.0 + 1.0).ln();
    (1..=lambda)
        .map(|i| (top - (i as f64).ln()).max(0.0))
        .collect()
}

/// Zero-sum log-rank weights, best solution first.
pub fn compute_rank_weights(lambda: usize) -> Result<Vec<f64>, ConfigError> {
    if lambda < 2 || lambda % 2 != 0 {
        return Err(ConfigError::OddLambda(lambda));
    }
    let hat = rank_utilities(lambda);
    let total: f64 = hat.iter().sum();
    let shift = 1.0 / lambda as f64;
    Ok(hat.iter().map(|h| h / total - shift).collect())
}

pub fn compute_mu_eff(w_rank: &[f64]) -> f64 {
    let shift = 1.0 / w_rank.len() as f64;
    1.0 / w_rank.iter().map(|w| (w + shift).powi(2)).sum::<f64>()
}

/// `alpha·√(λ_F/λ)`: with only `n_feasible` of `lambda` samples inside the
/// feasible set, far samples are trusted less.
pub fn feasible_alpha(alpha: f64, n_feasible: usize, lambda: usize) -> f64 {
    alpha * (n_feasible as f64 / lambda as f64).sqrt()
}

/// Rank weights tilted toward samples far from the mean: the i-th utility is
/// multiplied by `exp(alpha·‖z_i‖)` before normalising. `z_norms` must be in
/// ranked order.
pub fn compute_distance_weights(z_norms: &[f64], alpha: f64) -> Vec<f64> {
    let lambda = z_norms.len();
    let hat = rank_utilities(lambda);
    // The normalisation cancels any common factor, so shift the exponent by its max.
    let top = z_norms
        .iter()
        .map(|n| alpha * n)
        .fold(f64::NEG_INFINITY, f64::max);
    let tilted: Vec<f64> = hat
        .iter()
        .zip(z_norms)
        .map(|(h, n)| h * (alpha * n - top).exp())
        .collect();
    let total: f64 = tilted.iter().sum();
    let shift = 1.0 / lambda as f64;
    tilted.iter().map(|t| t / total - shift).collect()
}

/// E‖N(0, I_d)‖ ≈ √d·(1 − 1/(4d) + 1/(21d²)).
pub fn chi_d(dim: usize) -> f64 {
    let d = dim as f64;
    d.sqrt() * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d))
}

/// Full optimizer state for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    /// Normalized transformation matrix B, det(B) = 1.
    pub transform: DMatrix<f64>,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    /// Expansion rate γ ≥ 1.
    pub gamma: f64,
    /// True until the first infeasible solution is observed.
    pub unconstrained: bool,
    pub generation: u64,
}

impl SearchState {
    pub fn new(mean: DVector<f64>, sigma: f64, transform: DMatrix<f64>) -> Self {
        let d = mean.len();
        Self {
            mean,
            sigma,
            transform,
            p_sigma: DVector::zeros(d),
            p_c: DVector::zeros(d),
            gamma: 1.0,
            unconstrained: true,
            generation: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}
