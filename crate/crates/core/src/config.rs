//! TOML experiment files.
//!
//! ```toml
//! [experiment]
//! strategy = "fm-nes"      # fm-nes | dx-nes-ic | xnes | xnes-r | method-a | method-b | method-c
//! problem = "rosenbrock"   # sphere | ellipsoid | rosenbrock | cigar | ic-*
//! dim = 40
//! lambda = [16]
//! trials = 50
//! budget = 1000000
//! target = 1e-10
//! seed = 0
//! trajectory = false
//! resample_cap = 1000000
//!
//! [strategy]               # optional; any StrategyConfig field except lambda/dim
//! c1 = 0.0
//! enable_reset = false
//! ```

use serde::{Deserialize, Serialize};

use crate::distribution::{ConfigError, StrategyConfig, StrategyOverrides};
use crate::harness::ExperimentSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub strategy: StrategyOverrides,
}

const HEADER: &str = "\
# Resolved experiment configuration.
#
# Strategy defaults, by source:
#   c_sigma = (mu_eff + 2) / (d + mu_eff + 5)
#   c_c     = (4 + mu_eff/d) / (d + 4 + 2 mu_eff/d)
#   c1      = 2 / ((d + 1.3)^2 + mu_eff)                      (CMA-ES rank-one rate)
#   beta    = 1.2
#   eta_sigma_move = 1
#   eta_sigma_stag = tanh((0.024 lambda + 0.7 d + 20) / (d + 12))
#   eta_sigma_conv = 2 tanh((0.025 lambda + 0.75 d + 10) / (d + 4))
#   eta_b_*        = tanh((0.025 lambda + 0.35 d + 15) / (d^2 + 6))
#   alpha          = h^-1(d) * min(1, sqrt(lambda / d)),
#                    h^-1(d) solves (1 + a^2) exp(a^2 / 2) / 0.24 = 10 + d;
#                    each generation uses alpha * sqrt(feasible / lambda)
#   c_gamma        = 1 / (3 (d - 1))
#   d_gamma        = max(1, d / lambda)
# The eta, alpha and gamma defaults follow the DX-NES-IC recommendations of
# Nomura, Sakai and Ono (2021) as published with its reference implementation.
# xNES modes use eta_sigma = eta_b = (9 + 3 ln d) / (5 d sqrt(d)) in every slot.
# The [strategy] values below are resolved for the first lambda in the list.
";

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// The experiment with the `[strategy]` table folded in.
    pub fn into_spec(self) -> ExperimentSpec {
        let mut spec = self.experiment;
        spec.overrides = self.strategy;
        spec
    }

    /// Every strategy field spelled out, so the file documents exactly what ran.
    pub fn resolved(spec: &ExperimentSpec) -> Result<Self, ConfigError> {
        let lambda = spec.lambdas.first().copied().unwrap_or(2);
        let mut cfg = StrategyConfig::for_mode(spec.strategy, spec.dim, lambda)?;
        cfg.apply(&spec.overrides);
        Ok(Self {
            experiment: spec.clone(),
            strategy: full_overrides(&cfg),
        })
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        let body = toml::to_string(self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(format!("{HEADER}\n{body}"))
    }
}

fn full_overrides(c: &StrategyConfig) -> StrategyOverrides {
    StrategyOverrides {
        eta_m: Some(c.eta_m),
        eta_sigma_move: Some(c.eta_sigma_move),
        eta_sigma_stag: Some(c.eta_sigma_stag),
        eta_sigma_conv: Some(c.eta_sigma_conv),
        eta_b_move: Some(c.eta_b_move),
        eta_b_stag: Some(c.eta_b_stag),
        eta_b_conv: Some(c.eta_b_conv),
        alpha: Some(c.alpha),
        c_sigma: Some(c.c_sigma),
        c_c: Some(c.c_c),
        c1: Some(c.c1),
        beta: Some(c.beta),
        c_gamma: Some(c.c_gamma),
        d_gamma: Some(c.d_gamma),
        enable_rank_one: Some(c.enable_rank_one),
        enable_ridge_condition: Some(c.enable_ridge_condition),
        enable_reset: Some(c.enable_reset),
        enable_phase_switching: Some(c.enable_phase_switching),
        enable_expansion: Some(c.enable_expansion),
    }
}
