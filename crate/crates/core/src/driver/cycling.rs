use super::trace::Recorder;
use super::{
    check_dim, check_termination, CycleReport, Decision, DriverError, FixedPointProblem, Solution,
    SolveConfig, StopReason,
};
use crate::extrapolation::{extrapolate_once, ExtrapolationStatus, VectorSequenceWindow};
use crate::linalg::all_finite;

/// Restarted extrapolation.
///
/// Each cycle runs `m + κ + 1` baseline steps from the current point,
/// extrapolates the last `κ + 2` iterates and restarts from the result.
/// Whatever budget is left when a full cycle no longer fits, plus
/// `stabilization_iters`, is spent on plain steps.
pub fn run_ve_cycling(
    problem: &dyn FixedPointProblem,
    x0: &[f64],
    config: &SolveConfig,
) -> Result<Solution, DriverError> {
    config.validate()?;
    check_dim(problem, x0)?;
    let budget = config.max_inner_steps;
    let phase_budget = budget.saturating_sub(config.stabilization_iters);
    let cycle_len = config.cycle_len();

    let mut rec = Recorder::new(problem, config.log_every);
    let mut cycles = Vec::new();
    let mut x = x0.to_vec();

    let stop = 'outer: loop {
        if let Decision::Stop(reason) = check_termination(&rec.trace, config.tol, budget) {
            break reason;
        }
        if rec.steps() + cycle_len > phase_budget {
            break 'outer run_plain(&mut rec, &mut x, config)?;
        }

        let mut seq = Vec::with_capacity(cycle_len + 1);
        seq.push(x.clone());
        for _ in 0..cycle_len {
            let (next, step) = rec.map_step(seq.last().unwrap())?;
            seq.push(next);
            if step <= config.tol {
                x = seq.pop().unwrap();
                break 'outer StopReason::Converged;
            }
        }

        let last_plain = seq.last().unwrap().clone();
        let window = VectorSequenceWindow::new(config.m, config.kappa, seq.split_off(config.m))
            .expect("cycle produces a well-formed window");
        let ext = extrapolate_once(&window, config.ve_method, config.rank_tolerance)
            .expect("validated window and tolerance");

        rec.note_plain(&last_plain);
        let discarded = !all_finite(&ext.x);
        let converged = ext.status == ExtrapolationStatus::Converged;
        x = if discarded { last_plain } else { ext.x };
        let gamma_sum = ext
            .weights
            .as_ref()
            .filter(|_| !discarded)
            .map(|w| w.stability_sum);
        rec.close_cycle(&x, gamma_sum);
        cycles.push(CycleReport {
            at_step: rec.steps(),
            status: ext.status,
            weights: ext.weights,
            kappa_used: ext.kappa_used,
            discarded,
        });
        if converged {
            break StopReason::Converged;
        }
    };

    let mut safeguard_applied = false;
    if let Some(best) = rec.safeguard(&x) {
        x = best;
        safeguard_applied = true;
    }
    Ok(Solution {
        x,
        trace: rec.trace,
        stop,
        cycles,
        safeguard_applied,
    })
}

fn run_plain(
    rec: &mut Recorder<'_>,
    x: &mut Vec<f64>,
    config: &SolveConfig,
) -> Result<StopReason, DriverError> {
    loop {
        if let Decision::Stop(reason) =
            check_termination(&rec.trace, config.tol, config.max_inner_steps)
        {
            return Ok(reason);
        }
        *x = rec.map_step(x)?.0;
    }
}
