use super::trace::{relative_step, Recorder};
use super::{
    check_dim, check_termination, BoxError, Decision, DriverError, FixedPointProblem, Solution,
    SolveConfig, SolverMethod, StopReason,
};

/// Turns a problem with a gradient into the map `x ↦ x - η ∇E(x)`.
pub struct GradientStep<P> {
    problem: P,
    step_size: f64,
}

impl<P: FixedPointProblem> GradientStep<P> {
    pub fn new(problem: P, step_size: f64) -> Self {
        Self { problem, step_size }
    }
}

impl<P: FixedPointProblem> FixedPointProblem for GradientStep<P> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn step(&self, x: &[f64]) -> Result<Vec<f64>, BoxError> {
        let g = self
            .problem
            .gradient(x)
            .ok_or("problem does not provide a gradient")?;
        Ok(x.iter()
            .zip(&g)
            .map(|(xi, gi)| xi - self.step_size * gi)
            .collect())
    }

    fn cost(&self, x: &[f64]) -> Option<f64> {
        self.problem.cost(x)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.problem.gradient(x)
    }

    fn reference(&self) -> Option<&[f64]> {
        self.problem.reference()
    }
}

fn finish(x: Vec<f64>, rec: Recorder<'_>, stop: StopReason) -> Solution {
    Solution {
        x,
        trace: rec.trace,
        stop,
        cycles: Vec::new(),
        safeguard_applied: false,
    }
}

/// Plain iteration `x_{k+1} = F(x_k)` until the step norm reaches `tol`
/// or the budget is spent.
pub fn run_fixed_point(
    problem: &dyn FixedPointProblem,
    x0: &[f64],
    config: &SolveConfig,
) -> Result<Solution, DriverError> {
    config.validate()?;
    check_dim(problem, x0)?;
    let mut rec = Recorder::new(problem, config.log_every);
    let mut x = x0.to_vec();
    loop {
        if let Decision::Stop(reason) =
            check_termination(&rec.trace, config.tol, config.max_inner_steps)
        {
            return Ok(finish(x, rec, reason));
        }
        x = rec.map_step(&x)?.0;
    }
}

/// Fixed-step gradient descent `x_{k+1} = x_k - η ∇E(x_k)`.
pub fn run_steepest_descent(
    problem: &dyn FixedPointProblem,
    x0: &[f64],
    config: &SolveConfig,
) -> Result<Solution, DriverError> {
    check_dim(problem, x0)?;
    if problem.gradient(x0).is_none() {
        return Err(DriverError::NoGradient(SolverMethod::Sd));
    }
    let map = GradientStep::new(problem, config.step_size);
    run_fixed_point(&map, x0, config)
}

/// Accelerated gradient with constant step and the momentum sequence
/// `t_{k+1} = (1 + √(1 + 4 t_k²)) / 2`, no restarts.
pub fn run_nesterov(
    problem: &dyn FixedPointProblem,
    x0: &[f64],
    config: &SolveConfig,
) -> Result<Solution, DriverError> {
    config.validate()?;
    check_dim(problem, x0)?;
    if problem.gradient(x0).is_none() {
        return Err(DriverError::NoGradient(SolverMethod::Nesterov));
    }
    let eta = config.step_size;
    let mut rec = Recorder::new(problem, config.log_every);
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut t = 1.0f64;
    loop {
        if let Decision::Stop(reason) =
            check_termination(&rec.trace, config.tol, config.max_inner_steps)
        {
            return Ok(finish(x, rec, reason));
        }
        let iter = rec.steps() + 1;
        let g = problem
            .gradient(&y)
            .ok_or(DriverError::NoGradient(SolverMethod::Nesterov))?;
        let next: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - eta * gi).collect();
        let step = relative_step(&x, &next);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        y = next
            .iter()
            .zip(&x)
            .map(|(n, p)| n + beta * (n - p))
            .collect();
        rec.record(iter, &next, step)?;
        x = next;
        t = t_next;
    }
}
