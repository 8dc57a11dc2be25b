use std::time::Instant;

use super::{DriverError, FixedPointProblem};
use crate::imaging::psnr_values;
use crate::linalg::{all_finite, dist, norm};

/// One baseline-map evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based inner-step index.
    pub iter: usize,
    pub cost: Option<f64>,
    pub psnr: Option<f64>,
    /// `‖x_{k+1} - x_k‖ / ‖x_k‖` (absolute when `x_k = 0`).
    pub step_norm: f64,
    /// Σ|γ|, present on records that close an extrapolation cycle.
    pub gamma_abs_sum: Option<f64>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<IterationRecord>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn push(&mut self, record: IterationRecord) {
        debug_assert!(self.records.last().map_or(true, |r| r.iter < record.iter));
        self.records.push(record);
    }

    pub(crate) fn last_mut(&mut self) -> Option<&mut IterationRecord> {
        self.records.last_mut()
    }

    /// Last logged cost.
    pub fn final_cost(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.cost)
    }

    pub fn final_psnr(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.psnr)
    }

    /// First inner step whose logged cost is at or below `threshold`.
    pub fn first_step_reaching(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.cost.is_some_and(|c| c <= threshold))
            .map(|r| r.iter)
    }
}

pub(crate) fn relative_step(prev: &[f64], next: &[f64]) -> f64 {
    let d = dist(prev, next);
    let n = norm(prev);
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

/// Shared bookkeeping for the solvers: trace, timing, logging cadence and
/// the best plain iterate seen so far.
pub(crate) struct Recorder<'a> {
    problem: &'a dyn FixedPointProblem,
    log_every: usize,
    start: Instant,
    pub trace: IterationTrace,
    best: Option<(f64, Vec<f64>)>,
}

impl<'a> Recorder<'a> {
    pub fn new(problem: &'a dyn FixedPointProblem, log_every: usize) -> Self {
        Self {
            problem,
            log_every,
            start: Instant::now(),
            trace: IterationTrace::new(),
            best: None,
        }
    }

    pub fn steps(&self) -> usize {
        self.trace.len()
    }

    fn due(&self, iter: usize) -> bool {
        self.log_every > 0 && iter % self.log_every == 0
    }

    /// Evaluates the baseline map once and records it.
    pub fn map_step(&mut self, x: &[f64]) -> Result<(Vec<f64>, f64), DriverError> {
        let iter = self.steps() + 1;
        let next = self
            .problem
            .step(x)
            .map_err(|source| DriverError::MapFailed {
                iter,
                source,
                trace: Box::new(self.trace.clone()),
            })?;
        let step = relative_step(x, &next);
        self.record(iter, &next, step)?;
        Ok((next, step))
    }

    /// Records an iterate produced outside `map_step` (gradient methods).
    pub fn record(&mut self, iter: usize, x: &[f64], step_norm: f64) -> Result<(), DriverError> {
        let finite = all_finite(x) && step_norm.is_finite();
        let (cost, psnr) = if finite && self.due(iter) {
            self.evaluate(x)
        } else {
            (None, None)
        };
        if let Some(c) = cost {
            self.offer_best(c, x);
        }
        self.trace.push(IterationRecord {
            iter,
            cost,
            psnr,
            step_norm,
            gamma_abs_sum: None,
            elapsed_s: self.start.elapsed().as_secs_f64(),
        });
        let cost_ok = cost.map_or(true, f64::is_finite);
        if !finite || !cost_ok {
            return Err(DriverError::NonFiniteIterate {
                iter,
                trace: Box::new(self.trace.clone()),
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> (Option<f64>, Option<f64>) {
        let cost = self.problem.cost(x);
        let psnr = self.problem.reference().map(|r| psnr_values(x, r));
        (cost, psnr)
    }

    fn offer_best(&mut self, cost: f64, x: &[f64]) {
        if cost.is_finite() && self.best.as_ref().map_or(true, |(b, _)| cost < *b) {
            self.best = Some((cost, x.to_vec()));
        }
    }

    /// Makes sure the last plain iterate's cost is known for the safeguard.
    pub fn note_plain(&mut self, x: &[f64]) {
        if self.log_every == 0 {
            return;
        }
        let logged = self.trace.last().and_then(|r| r.cost);
        let cost = logged.or_else(|| self.problem.cost(x));
        if let Some(c) = cost {
            self.offer_best(c, x);
        }
    }

    /// Marks the last record as a cycle boundary: the carried-forward point
    /// is `x`, so its cost/PSNR replace the plain iterate's.
    pub fn close_cycle(&mut self, x: &[f64], gamma_abs_sum: Option<f64>) {
        let logging = self
            .trace
            .last()
            .is_some_and(|r| r.cost.is_some() || r.psnr.is_some());
        let (cost, psnr) = if logging {
            self.evaluate(x)
        } else {
            (None, None)
        };
        if let Some(rec) = self.trace.last_mut() {
            rec.gamma_abs_sum = gamma_abs_sum;
            if logging {
                rec.cost = cost;
                rec.psnr = psnr;
            }
            rec.elapsed_s = self.start.elapsed().as_secs_f64();
        }
    }

    /// Returns the best plain iterate if it beats `x` on cost.
    pub fn safeguard(&self, x: &[f64]) -> Option<Vec<f64>> {
        let (best_cost, best_x) = self.best.as_ref()?;
        let cost = self.problem.cost(x)?;
        if cost > *best_cost {
            Some(best_x.clone())
        } else {
            None
        }
    }
}
