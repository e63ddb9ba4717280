//! Exhaustive grid search over the monotone slab, for checking the solvers.

use serde::{Deserialize, Serialize};

use super::rates_from_free;
use super::solver::SolveResult;
use crate::error::{Error, Result};
use crate::noma::{
    from_cumulative, rate_vector, CumulativePower, LinkBudget, UserSet, VALIDATION_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Sum,
    Min,
}

impl Objective {
    pub fn evaluate(self, rates: &[f64]) -> f64 {
        match self {
            Objective::Sum => rates.iter().sum(),
            Objective::Min => rates.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

const MAX_ORACLE_USERS: usize = 4;

/// Best QoS-feasible grid point for `objective`. Grid points are `i/N` with
/// `N = round(1/grid_step)`, so halving the step refines the grid.
pub fn brute_force_oracle(
    budget: &LinkBudget,
    users: &UserSet,
    objective: Objective,
    grid_step: f64,
) -> Result<SolveResult> {
    let k = users.len();
    if k > MAX_ORACLE_USERS {
        return Err(Error::domain(format!(
            "grid oracle supports at most {MAX_ORACLE_USERS} users, got {k}"
        )));
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::domain(format!(
            "grid step {grid_step} outside (0, 1]"
        )));
    }
    let n = (1.0 / grid_step).round() as usize;
    let m = budget.m_coefficients(users);
    let eps = budget.epsilon();
    let targets = users.targets().as_slice();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluated = 0usize;
    let mut idx = vec![0usize; k - 1];
    let mut free = vec![0.0; k - 1];

    // odometer over n ≥ i_1 ≥ i_2 ≥ ... ≥ 0
    loop {
        for (f, i) in free.iter_mut().zip(&idx) {
            *f = *i as f64 / n as f64;
        }
        let rates = rates_from_free(eps, &m, &free);
        evaluated += 1;
        if rates
            .iter()
            .zip(targets)
            .all(|(r, t)| *r >= t - VALIDATION_TOL)
        {
            let value = objective.evaluate(&rates);
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, idx.clone()));
            }
        }
        if !advance(&mut idx, n) {
            break;
        }
    }

    let Some((_, idx)) = best else {
        return Err(Error::Infeasible {
            stage: 0,
            reason: format!("no QoS-feasible point on the grid with step {grid_step}"),
        });
    };
    let free: Vec<f64> = idx.iter().map(|i| *i as f64 / n as f64).collect();
    let s = CumulativePower::from_free(&free)?;
    let rates = rate_vector(budget, users, &s)?;
    Ok(SolveResult {
        allocation: from_cumulative(&s)?,
        objective: objective.evaluate(rates.as_slice()),
        s,
        rates,
        iterations: evaluated,
        converged: true,
        trace: None,
    })
}

/// Next non-increasing index tuple bounded by `n`, in lexicographic order.
fn advance(idx: &mut [usize], n: usize) -> bool {
    for pos in (0..idx.len()).rev() {
        let cap = if pos == 0 { n } else { idx[pos - 1] };
        if idx[pos] < cap {
            idx[pos] += 1;
            for later in idx.iter_mut().skip(pos + 1) {
                *later = 0;
            }
            return true;
        }
    }
    false
}
