//! Benchmark problems, evaluation accounting and the resampling wrapper.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Engine, EvaluatedSolution, Fitness};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem `{0}` (expected one of: {list})", list = Benchmark::NAMES.join(", "))]
    UnknownProblem(String),
    #[error("problems need dimension >= 2, got {0}")]
    Dimension(usize),
    #[error("point has dimension {got}, problem expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    Sphere,
    Ellipsoid,
    Rosenbrock,
    Cigar,
    IcSphere,
    IcEllipsoid,
    IcRosenbrock,
    IcCigar,
}

impl Benchmark {
    pub const ALL: [Benchmark; 8] = [
        Benchmark::Sphere,
        Benchmark::Ellipsoid,
        Benchmark::Rosenbrock,
        Benchmark::Cigar,
        Benchmark::IcSphere,
        Benchmark::IcEllipsoid,
        Benchmark::IcRosenbrock,
        Benchmark::IcCigar,
    ];

    pub const NAMES: [&'static str; 8] = [
        "sphere",
        "ellipsoid",
        "rosenbrock",
        "cigar",
        "ic-sphere",
        "ic-ellipsoid",
        "ic-rosenbrock",
        "ic-cigar",
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES[Self::ALL.iter().position(|&b| b == self).unwrap()]
    }

    pub fn is_constrained(self) -> bool {
        matches!(
            self,
            Benchmark::IcSphere
                | Benchmark::IcEllipsoid
                | Benchmark::IcRosenbrock
                | Benchmark::IcCigar
        )
    }

    fn base(self) -> Benchmark {
        match self {
            Benchmark::IcSphere => Benchmark::Sphere,
            Benchmark::IcEllipsoid => Benchmark::Ellipsoid,
            Benchmark::IcRosenbrock => Benchmark::Rosenbrock,
            Benchmark::IcCigar => Benchmark::Cigar,
            b => b,
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::NAMES
            .iter()
            .position(|&n| n == norm || n.replace('-', "") == norm)
            .map(|i| Self::ALL[i])
            .ok_or_else(|| ProblemError::UnknownProblem(s.to_string()))
    }
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Σ (1000^((i−1)/(d−1))·xᵢ)²
pub fn ellipsoid(x: &[f64]) -> f64 {
    let d = x.len();
    x.iter()
        .enumerate()
        .map(|(i, v)| (ellipsoid_coefficient(i, d) * v).powi(2))
        .sum()
}

/// Scale applied to coordinate `i` (zero-based) of the ellipsoid.
pub fn ellipsoid_coefficient(i: usize, d: usize) -> f64 {
    1000f64.powf(i as f64 / (d - 1) as f64)
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

/// x₁² + Σ_{i≥2} (100·xᵢ)²
pub fn cigar(x: &[f64]) -> f64 {
    x[0] * x[0] + x[1..].iter().map(|v| (100.0 * v).powi(2)).sum::<f64>()
}

/// A benchmark instance at a fixed dimension, with its initial distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub benchmark: Benchmark,
    pub dim: usize,
}

impl Problem {
    pub fn name(&self) -> &'static str {
        self.benchmark.name()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        match self.benchmark.base() {
            Benchmark::Sphere => sphere(x),
            Benchmark::Ellipsoid => ellipsoid(x),
            Benchmark::Rosenbrock => rosenbrock(x),
            Benchmark::Cigar => cigar(x),
            _ => unreachable!(),
        }
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        match self.benchmark {
            Benchmark::IcSphere | Benchmark::IcEllipsoid | Benchmark::IcCigar => {
                x.iter().all(|&v| v >= 0.0)
            }
            Benchmark::IcRosenbrock => x.iter().all(|&v| v <= 1.0),
            _ => true,
        }
    }

    pub fn optimum(&self) -> DVector<f64> {
        match self.benchmark.base() {
            Benchmark::Rosenbrock => DVector::from_element(self.dim, 1.0),
            _ => DVector::zeros(self.dim),
        }
    }

    pub fn optimum_value(&self) -> f64 {
        0.0
    }

    pub fn initial_mean(&self) -> DVector<f64> {
        match self.benchmark.base() {
            Benchmark::Rosenbrock => DVector::zeros(self.dim),
            _ => DVector::from_element(self.dim, 20.0),
        }
    }

    pub fn initial_sigma(&self) -> f64 {
        match self.benchmark.base() {
            Benchmark::Rosenbrock => 0.5,
            _ => 2.0,
        }
    }
}

pub fn make_benchmark(name: &str, dim: usize) -> Result<Problem, ProblemError> {
    let benchmark = name.parse()?;
    if dim < 2 {
        return Err(ProblemError::Dimension(dim));
    }
    Ok(Problem { benchmark, dim })
}

/// Evaluation tally for one trial. Infeasible evaluations count toward the total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounter {
    pub total: u64,
    pub infeasible: u64,
}

/// The implicitly constrained objective: value on the feasible region,
/// `Fitness::Infeasible` elsewhere.
pub fn evaluate(
    problem: &Problem,
    x: &[f64],
    counter: &mut EvalCounter,
) -> Result<Fitness, ProblemError> {
    if x.len() != problem.dim {
        return Err(ProblemError::DimensionMismatch {
            expected: problem.dim,
            got: x.len(),
        });
    }
    counter.total += 1;
    if problem.is_feasible(x) {
        Ok(Fitness::Feasible(problem.objective(x)))
    } else {
        counter.infeasible += 1;
        Ok(Fitness::Infeasible)
    }
}

/// Limits for [`resample_ask`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResamplePolicy {
    /// Give up after this many infeasible draws in a row.
    pub max_consecutive_infeasible: u64,
    /// Stop once `counter.total` reaches this value.
    pub eval_limit: u64,
}

impl Default for ResamplePolicy {
    fn default() -> Self {
        Self {
            max_consecutive_infeasible: 1_000_000,
            eval_limit: u64::MAX,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum ResampleError {
    #[error("{0} consecutive infeasible draws")]
    CapReached(u64),
    #[error("evaluation limit reached with {feasible} of {needed} feasible solutions")]
    EvalLimit { feasible: usize, needed: usize },
}

/// Draws unpaired candidates one at a time, discarding infeasible ones, until
/// λ feasible solutions are collected. Every draw is evaluated and counted.
pub fn resample_ask<R: Rng + ?Sized>(
    engine: &Engine,
    problem: &Problem,
    counter: &mut EvalCounter,
    rng: &mut R,
    policy: ResamplePolicy,
) -> Result<Vec<EvaluatedSolution>, ResampleError> {
    let needed = engine.lambda();
    let mut accepted = Vec::with_capacity(needed);
    let mut streak = 0u64;
    while accepted.len() < needed {
        if counter.total >= policy.eval_limit {
            return Err(ResampleError::EvalLimit {
                feasible: accepted.len(),
                needed,
            });
        }
        let cand = engine.sample_one(rng);
        let value = evaluate(problem, cand.x.as_slice(), counter)
            .expect("engine and problem dimensions agree");
        if value.is_feasible() {
            streak = 0;
            accepted.push(cand.evaluated(value));
        } else {
            streak += 1;
            if streak >= policy.max_consecutive_infeasible {
                return Err(ResampleError::CapReached(streak));
            }
        }
    }
    Ok(accepted)
}
