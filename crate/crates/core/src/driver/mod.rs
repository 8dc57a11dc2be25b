//! Iterative solvers and convergence traces.
//!
//! One "inner step" is one evaluation of the baseline map (a fixed-point
//! step or a gradient step). Extrapolation work is not counted, so a plain
//! run and an accelerated run compared at step `k` have both paid for `k`
//! map evaluations.

mod baseline;
mod cycling;
mod linear;
mod trace;

use std::error::Error as StdError;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::extrapolation::{
    ExtrapolationStatus, ExtrapolationWeights, VeMethod, DEFAULT_RANK_TOLERANCE,
};

pub use baseline::{run_fixed_point, run_nesterov, run_steepest_descent, GradientStep};
pub use cycling::run_ve_cycling;
pub use linear::LinearFixedPointProblem;
pub use trace::{IterationRecord, IterationTrace};

/// Images up to this many pixels log cost and PSNR on every step.
pub const DENSE_LOG_LIMIT: usize = 128 * 128;

pub type BoxError = Box<dyn StdError + Send + Sync>;

/// A fixed-point map `x ↦ F(x)` with optional objective and gradient.
pub trait FixedPointProblem {
    fn dim(&self) -> usize;

    fn step(&self, x: &[f64]) -> Result<Vec<f64>, BoxError>;

    fn cost(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Ground truth for PSNR logging.
    fn reference(&self) -> Option<&[f64]> {
        None
    }
}

impl<P: FixedPointProblem + ?Sized> FixedPointProblem for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn step(&self, x: &[f64]) -> Result<Vec<f64>, BoxError> {
        (**self).step(x)
    }
    fn cost(&self, x: &[f64]) -> Option<f64> {
        (**self).cost(x)
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        (**self).gradient(x)
    }
    fn reference(&self) -> Option<&[f64]> {
        (**self).reference()
    }
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("non-finite iterate at inner step {iter}")]
    NonFiniteIterate {
        iter: usize,
        trace: Box<IterationTrace>,
    },
    #[error("baseline map failed at inner step {iter}: {source}")]
    MapFailed {
        iter: usize,
        #[source]
        source: BoxError,
        trace: Box<IterationTrace>,
    },
    #[error("{0} needs a gradient, but the problem does not provide one")]
    NoGradient(SolverMethod),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("initial point has dimension {got}, problem expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

impl DriverError {
    /// Trace collected up to the failure, when there is one.
    pub fn trace(&self) -> Option<&IterationTrace> {
        match self {
            DriverError::NonFiniteIterate { trace, .. } | DriverError::MapFailed { trace, .. } => {
                Some(trace)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverMethod {
    Fp,
    FpVe,
    Sd,
    SdVe,
    Nesterov,
}

impl SolverMethod {
    pub fn uses_extrapolation(self) -> bool {
        matches!(self, SolverMethod::FpVe | SolverMethod::SdVe)
    }

    pub fn needs_gradient(self) -> bool {
        matches!(
            self,
            SolverMethod::Sd | SolverMethod::SdVe | SolverMethod::Nesterov
        )
    }
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMethod::Fp => "FP",
            SolverMethod::FpVe => "FP-VE",
            SolverMethod::Sd => "SD",
            SolverMethod::SdVe => "SD-VE",
            SolverMethod::Nesterov => "Nesterov",
        })
    }
}

impl FromStr for SolverMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fp" => Ok(SolverMethod::Fp),
            "fp-ve" => Ok(SolverMethod::FpVe),
            "sd" => Ok(SolverMethod::Sd),
            "sd-ve" => Ok(SolverMethod::SdVe),
            "nesterov" => Ok(SolverMethod::Nesterov),
            other => Err(format!("unknown solver `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub method: SolverMethod,
    pub ve_method: VeMethod,
    /// Warm-up iterates discarded at the start of each cycle.
    pub m: usize,
    pub kappa: usize,
    /// Total budget of baseline-map evaluations.
    pub max_inner_steps: usize,
    /// Relative step-norm threshold.
    pub tol: f64,
    /// Plain baseline steps run after the extrapolation phase.
    pub stabilization_iters: usize,
    /// Gradient step for SD / Nesterov.
    pub step_size: f64,
    pub rank_tolerance: f64,
    /// Cost/PSNR are evaluated every `log_every` steps (0 disables).
    pub log_every: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Fp,
            ve_method: VeMethod::Mpe,
            m: 0,
            kappa: 5,
            max_inner_steps: 200,
            tol: 0.0,
            stabilization_iters: 0,
            step_size: 1.0,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            log_every: 1,
        }
    }
}

impl SolveConfig {
    pub fn with_method(method: SolverMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    /// Logging cadence for a problem of `dim` unknowns.
    pub fn default_log_every(dim: usize) -> usize {
        if dim <= DENSE_LOG_LIMIT {
            1
        } else {
            5
        }
    }

    /// Map evaluations per extrapolation cycle.
    pub fn cycle_len(&self) -> usize {
        self.m + self.kappa + 1
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |msg: String| Err(DriverError::InvalidConfig(msg));
        if self.kappa < 1 {
            return bad("kappa must be at least 1".into());
        }
        if self.method.uses_extrapolation() && self.max_inner_steps < self.m + self.kappa + 2 {
            return bad(format!(
                "budget {} is below m + kappa + 2 = {}",
                self.max_inner_steps,
                self.m + self.kappa + 2
            ));
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol must be nonnegative, got {}", self.tol));
        }
        if self.method.needs_gradient() && !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad(format!(
                "step size must be positive, got {}",
                self.step_size
            ));
        }
        if !(self.rank_tolerance > 0.0) {
            return bad(format!(
                "rank tolerance must be positive, got {}",
                self.rank_tolerance
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Stop(StopReason),
}

/// Stop when the last relative step norm is within `tol`, or when the
/// trace holds `budget` map evaluations.
pub fn check_termination(trace: &IterationTrace, tol: f64, budget: usize) -> Decision {
    match trace.last() {
        Some(rec) if rec.step_norm <= tol => Decision::Stop(StopReason::Converged),
        _ if trace.len() >= budget => Decision::Stop(StopReason::Budget),
        _ => Decision::Continue,
    }
}

/// What happened at the end of one extrapolation cycle.
#[derive(Debug, Clone)]
pub struct CycleReport {
    /// Inner-step index of the last map evaluation in the cycle.
    pub at_step: usize,
    pub status: ExtrapolationStatus,
    pub weights: Option<ExtrapolationWeights>,
    pub kappa_used: usize,
    /// The extrapolated point had non-finite entries and was discarded.
    pub discarded: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub trace: IterationTrace,
    pub stop: StopReason,
    pub cycles: Vec<CycleReport>,
    /// The returned point was replaced by a lower-cost plain iterate.
    pub safeguard_applied: bool,
}

impl Solution {
    pub fn extrapolations(&self) -> usize {
        self.cycles
            .iter()
            .filter(|c| c.status == ExtrapolationStatus::Extrapolated && !c.discarded)
            .count()
    }

    /// Largest Σ|γ| over all cycles.
    pub fn max_stability_sum(&self) -> Option<f64> {
        self.cycles
            .iter()
            .filter_map(|c| c.weights.as_ref().map(|w| w.stability_sum))
            .reduce(f64::max)
    }
}

/// Runs the solver selected by `config.method`.
pub fn solve(
    problem: &dyn FixedPointProblem,
    x0: &[f64],
    config: &SolveConfig,
) -> Result<Solution, DriverError> {
    match config.method {
        SolverMethod::Fp => run_fixed_point(problem, x0, config),
        SolverMethod::FpVe => run_ve_cycling(problem, x0, config),
        SolverMethod::Sd => run_steepest_descent(problem, x0, config),
        SolverMethod::SdVe => {
            let map = GradientStep::new(problem, config.step_size);
            run_ve_cycling(&map, x0, config)
        }
        SolverMethod::Nesterov => run_nesterov(problem, x0, config),
    }
}

fn check_dim(problem: &dyn FixedPointProblem, x0: &[f64]) -> Result<(), DriverError> {
    if x0.len() != problem.dim() {
        return Err(DriverError::DimensionMismatch {
            expected: problem.dim(),
            got: x0.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests;
