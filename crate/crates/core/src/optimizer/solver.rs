use serde::{Deserialize, Serialize};

use super::gradient::{softmin, softmin_gradient, sum_rate_gradient};
use super::projection::{project, project_from};
use super::rates_from_free;
use super::region::{build_feasible_region, check_feasibility, dot, FeasibleRegion};
use crate::error::{Error, Result};
use crate::noma::{
    from_cumulative, qos_satisfied, rate_vector, CumulativePower, LinkBudget, PowerAllocation,
    RateVector, UserSet,
};

/// QoS audit tolerance applied to every returned solution.
const QOS_AUDIT_TOL: f64 = 1e-6;

/// Consecutive accepted steps without a representable objective gain after
/// which an ascent gives up.
const STALL_LIMIT: usize = 20;

/// How the first trial step of each backtracking search is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Always start from `initial_step`.
    Fixed,
    /// Start from the Barzilai-Borwein step of the previous accepted move,
    /// clamped to `[1e-10, 1e10]·initial_step`; `initial_step` on the first
    /// iteration or under non-positive curvature.
    #[default]
    BarzilaiBorwein,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Iteration cap per ascent run (per β stage for max-min).
    pub max_iterations: usize,
    /// Stop once the gradient-mapping norm drops below this.
    pub gradient_tolerance: f64,
    pub backtracking_shrink: f64,
    pub backtracking_accept: f64,
    pub initial_step: f64,
    pub step_rule: StepRule,
    /// Final softmin sharpness; earlier stages divide it by `beta_growth`.
    pub softmin_beta: f64,
    pub beta_stages: usize,
    pub beta_growth: f64,
    pub projection_tolerance: f64,
    /// Also ascend from the projected vertices of the monotone slab and keep
    /// the best end point; both objectives can have several local maxima.
    pub multi_start: bool,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            gradient_tolerance: 1e-7,
            backtracking_shrink: 0.5,
            backtracking_accept: 0.01,
            initial_step: 1.0,
            step_rule: StepRule::BarzilaiBorwein,
            softmin_beta: 1250.0,
            beta_stages: 4,
            beta_growth: 5.0,
            projection_tolerance: 1e-10,
            multi_start: true,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(format!("solver.{field}"), msg));
        if self.max_iterations == 0 {
            return bad("max_iterations", "must be at least 1");
        }
        if !(self.gradient_tolerance > 0.0) {
            return bad("gradient_tolerance", "must be positive");
        }
        if !(self.backtracking_shrink > 0.0 && self.backtracking_shrink < 1.0) {
            return bad("backtracking_shrink", "must lie in (0, 1)");
        }
        if !(self.backtracking_accept > 0.0 && self.backtracking_accept < 0.5) {
            return bad("backtracking_accept", "must lie in (0, 0.5)");
        }
        if !(self.initial_step > 0.0) {
            return bad("initial_step", "must be positive");
        }
        if !(self.softmin_beta > 0.0) {
            return bad("softmin_beta", "must be positive");
        }
        if self.beta_stages == 0 {
            return bad("beta_stages", "must be at least 1");
        }
        if !(self.beta_growth >= 1.0) {
            return bad("beta_growth", "must be at least 1");
        }
        if !(self.projection_tolerance > 0.0) {
            return bad("projection_tolerance", "must be positive");
        }
        Ok(())
    }

    /// Increasing β values ending at `softmin_beta`: 10, 50, 250, 1250 by default.
    pub fn beta_schedule(&self) -> Vec<f64> {
        (0..self.beta_stages)
            .rev()
            .map(|i| self.softmin_beta / self.beta_growth.powi(i as i32))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// The smooth objective being ascended (sum rate, or softmin at `beta`).
    pub objective: f64,
    pub step: f64,
    pub min_rate: f64,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub allocation: PowerAllocation,
    pub s: CumulativePower,
    pub rates: RateVector,
    /// Sum rate or minimum rate at the returned point, depending on the criterion.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Option<Vec<TraceEntry>>,
}

struct Cell {
    region: FeasibleRegion,
    m: Vec<f64>,
    eps: f64,
}

impl Cell {
    fn rates(&self, x: &[f64]) -> Vec<f64> {
        rates_from_free(self.eps, &self.m, x)
    }
}

/// Objective value, point, converged flag and trace of the best run so far.
type Best = Option<(f64, Vec<f64>, bool, Option<Vec<TraceEntry>>)>;

struct Ascent {
    point: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Projected gradient ascent with Armijo backtracking along the projection arc.
fn ascend(
    cell: &Cell,
    start: Vec<f64>,
    cfg: &SolverConfig,
    objective: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Result<Vec<f64>>,
    mut trace: Option<(&mut Vec<TraceEntry>, Option<f64>)>,
) -> Result<Ascent> {
    let mut x = start;
    let mut value = objective(&x);
    let mut next_step = cfg.initial_step;
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut stalled = 0;
    for iter in 0..cfg.max_iterations {
        let g = gradient(&x)?;
        if let (StepRule::BarzilaiBorwein, Some((px, pg))) = (cfg.step_rule, &previous) {
            let sx: Vec<f64> = x.iter().zip(px).map(|(a, b)| a - b).collect();
            // ascent: curvature is measured on −g
            let sy: f64 = sx
                .iter()
                .zip(g.iter().zip(pg))
                .map(|(s, (a, b))| -s * (a - b))
                .sum();
            let ss = dot(&sx, &sx);
            next_step = if sy > 0.0 && ss > 0.0 {
                (ss / sy).clamp(1e-10 * cfg.initial_step, 1e10 * cfg.initial_step)
            } else {
                cfg.initial_step
            };
        }
        let mut step = next_step;
        let mut first = true;
        loop {
            let target: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            let cand = project_from(&target, &cell.region, &x, cfg.projection_tolerance)?.point;
            let delta: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
            if first {
                let mapping = dot(&delta, &delta).sqrt() / step;
                if mapping < cfg.gradient_tolerance {
                    return Ok(Ascent {
                        point: x,
                        iterations: iter,
                        converged: true,
                    });
                }
                first = false;
            }
            let cand_value = objective(&cand);
            if cand_value >= value + cfg.backtracking_accept * dot(&g, &delta) {
                previous = Some((std::mem::replace(&mut x, cand), g.clone()));
                if cand_value - value <= 4.0 * f64::EPSILON * value.abs() {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                value = cand_value;
                break;
            }
            step *= cfg.backtracking_shrink;
            if step < 1e-20 * next_step.min(cfg.initial_step) {
                // no representable ascent left along this direction
                return Ok(Ascent {
                    point: x,
                    iterations: iter,
                    converged: false,
                });
            }
        }
        if let Some((log, beta)) = trace.as_mut() {
            let min_rate = cell.rates(&x).into_iter().fold(f64::INFINITY, f64::min);
            log.push(TraceEntry {
                iteration: log.len() + 1,
                objective: value,
                step,
                min_rate,
                beta: *beta,
            });
        }
        if stalled >= STALL_LIMIT {
            return Ok(Ascent {
                point: x,
                iterations: iter + 1,
                converged: false,
            });
        }
    }
    Ok(Ascent {
        point: x,
        iterations: cfg.max_iterations,
        converged: false,
    })
}

fn prepare(budget: &LinkBudget, users: &UserSet, cfg: &SolverConfig) -> Result<(Cell, Vec<f64>)> {
    cfg.validate()?;
    let region = build_feasible_region(budget, users);
    let feas = check_feasibility(&region);
    let Some(witness) = feas.witness else {
        return Err(Error::Infeasible {
            stage: feas.stage.unwrap_or(0),
            reason: "QoS targets exceed what any power split can deliver".into(),
        });
    };
    let cell = Cell {
        region,
        m: budget.m_coefficients(users),
        eps: budget.epsilon(),
    };
    Ok((cell, witness.free().to_vec()))
}

/// The witness, then (with `multi_start`) the projections of the slab
/// vertices `(1, .., 1, 0, .., 0)`, dropping near-duplicates.
fn starts(cell: &Cell, witness: Vec<f64>, cfg: &SolverConfig) -> Result<Vec<Vec<f64>>> {
    let n = witness.len();
    let mut out = vec![witness];
    if !cfg.multi_start || n == 0 {
        return Ok(out);
    }
    for ones in 0..=n {
        let vertex: Vec<f64> = (0..n).map(|i| if i < ones { 1.0 } else { 0.0 }).collect();
        let p = project(&vertex, &cell.region, cfg.projection_tolerance)?;
        let fresh = out.iter().all(|q| {
            q.iter()
                .zip(&p)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                > 1e-9
        });
        if fresh {
            out.push(p);
        }
    }
    Ok(out)
}

fn finish(
    budget: &LinkBudget,
    users: &UserSet,
    free: &[f64],
    objective: impl Fn(&RateVector) -> f64,
    iterations: usize,
    converged: bool,
    trace: Option<Vec<TraceEntry>>,
) -> Result<SolveResult> {
    // remove sub-tolerance drift so the tail sums are exactly monotone
    let mut cleaned = Vec::with_capacity(free.len());
    let mut prev = 1.0f64;
    for &v in free {
        let v = v.clamp(0.0, prev);
        cleaned.push(v);
        prev = v;
    }
    let s = CumulativePower::from_free(&cleaned)?;
    let allocation = from_cumulative(&s)?;
    let rates = rate_vector(budget, users, &s)?;
    let floor: Vec<f64> = users
        .targets()
        .as_slice()
        .iter()
        .map(|t| t - QOS_AUDIT_TOL)
        .collect();
    if !qos_satisfied(&rates, &crate::noma::QosTargets(floor))? {
        return Err(Error::domain(format!(
            "solver produced a QoS-violating point: rates {:?}",
            rates.as_slice()
        )));
    }
    Ok(SolveResult {
        objective: objective(&rates),
        allocation,
        s,
        rates,
        iterations,
        converged,
        trace,
    })
}

/// Maximizes the sum rate subject to every user's QoS floor.
pub fn maximize_sum_rate(
    budget: &LinkBudget,
    users: &UserSet,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let (cell, witness) = prepare(budget, users, cfg)?;
    let sum = |x: &[f64]| cell.rates(x).iter().sum::<f64>();
    let mut best: Best = None;
    let mut iterations = 0;
    for start in starts(&cell, witness, cfg)? {
        let mut log = cfg.record_trace.then(Vec::new);
        let ascent = if start.is_empty() {
            Ascent {
                point: start,
                iterations: 0,
                converged: true,
            }
        } else {
            ascend(
                &cell,
                start,
                cfg,
                sum,
                |x| sum_rate_gradient(x, &cell.m, cell.eps),
                log.as_mut().map(|l| (l, None)),
            )?
        };
        iterations += ascent.iterations;
        let value = sum(&ascent.point);
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, ascent.point, ascent.converged, log));
        }
    }
    let (_, point, converged, log) = best.expect("at least one start");
    finish(
        budget,
        users,
        &point,
        RateVector::sum,
        iterations,
        converged,
        log,
    )
}

/// Maximizes the smallest user rate subject to every user's QoS floor, by
/// ascending a softmin surrogate with increasing sharpness.
pub fn maximize_min_rate(
    budget: &LinkBudget,
    users: &UserSet,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let (cell, witness) = prepare(budget, users, cfg)?;
    let true_min = |x: &[f64]| cell.rates(x).into_iter().fold(f64::INFINITY, f64::min);

    let mut best: Best = None;
    let mut iterations = 0;
    for start in starts(&cell, witness, cfg)? {
        let mut log = cfg.record_trace.then(Vec::new);
        let mut run_best = (true_min(&start), start.clone());
        let mut x = start;
        let mut converged = true;
        if !x.is_empty() {
            for beta in cfg.beta_schedule() {
                let ascent = ascend(
                    &cell,
                    x,
                    cfg,
                    |p| softmin(&cell.rates(p), beta),
                    |p| softmin_gradient(p, &cell.m, cell.eps, beta),
                    log.as_mut().map(|l| (l, Some(beta))),
                )?;
                iterations += ascent.iterations;
                converged = ascent.converged;
                x = ascent.point;
                let value = true_min(&x);
                if value > run_best.0 {
                    run_best = (value, x.clone());
                }
            }
        }
        if best.as_ref().is_none_or(|b| run_best.0 > b.0) {
            best = Some((run_best.0, run_best.1, converged, log));
        }
    }
    let (_, point, converged, log) = best.expect("at least one start");
    finish(
        budget,
        users,
        &point,
        RateVector::min,
        iterations,
        converged,
        log,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noma::{DbConvention, QosTargets};

    fn example_cell(targets: [f64; 3]) -> (LinkBudget, UserSet) {
        let b = LinkBudget::new(70.0, 0.4, 0.05, DbConvention::Amplitude).unwrap();
        let u = UserSet::new(vec![0.293, 0.359, 0.454], QosTargets(targets.to_vec())).unwrap();
        (b, u)
    }

    #[test]
    fn default_schedule() {
        assert_eq!(
            SolverConfig::default().beta_schedule(),
            vec![10.0, 50.0, 250.0, 1250.0]
        );
        let bad = SolverConfig {
            backtracking_accept: 0.7,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_user_returns_full_power() {
        let b = LinkBudget::new(60.0, 0.4, 0.05, DbConvention::Power).unwrap();
        let u = UserSet::new(vec![0.4], QosTargets(vec![1.0])).unwrap();
        for r in [
            maximize_sum_rate(&b, &u, &SolverConfig::default()).unwrap(),
            maximize_min_rate(&b, &u, &SolverConfig::default()).unwrap(),
        ] {
            assert_eq!(r.s.tail_sums(), &[1.0]);
            assert_eq!(r.iterations, 0);
        }
    }

    #[test]
    fn sum_rate_trace_is_monotone() {
        let (b, u) = example_cell([0.6, 0.6, 0.6]);
        let cfg = SolverConfig {
            record_trace: true,
            ..SolverConfig::default()
        };
        let r = maximize_sum_rate(&b, &u, &cfg).unwrap();
        let trace = r.trace.unwrap();
        assert!(!trace.is_empty());
        assert!(trace.windows(2).all(|w| w[1].objective >= w[0].objective));
        assert!(r.converged);
        // weak users sit on their QoS floor, the strongest takes the rest
        let rates = r.rates.as_slice();
        assert!((rates[0] - 0.6).abs() < 1e-6 && (rates[1] - 0.6).abs() < 1e-6);
        assert!(!r.allocation.is_noma_ordered());
    }

    #[test]
    fn flat_objective_keeps_witness_value() {
        // ε = 0 and equal m: the sum rate does not depend on the split
        let b = LinkBudget::new(0.0, 1.0, 0.0, DbConvention::Power).unwrap();
        let u = UserSet::new(vec![2.0; 3], QosTargets(vec![0.1; 3])).unwrap();
        let r = maximize_sum_rate(&b, &u, &SolverConfig::default()).unwrap();
        assert!((r.objective - (1.25f64 / 0.25).log2()).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn infeasible_reports_stage() {
        let (b, _) = example_cell([1.0, 1.0, 1.0]);
        let u = UserSet::new(vec![0.293, 0.359, 0.454], QosTargets(vec![9.0, 1.0, 1.0])).unwrap();
        match maximize_min_rate(&b, &u, &SolverConfig::default()) {
            Err(Error::Infeasible { stage, .. }) => assert_eq!(stage, 1),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn max_min_beats_witness_and_respects_floor() {
        let (b, u) = example_cell([2.0, 1.0, 1.0]);
        let r = maximize_min_rate(&b, &u, &SolverConfig::default()).unwrap();
        let rates = r.rates.as_slice();
        assert!(rates[0] >= 2.0 - 1e-6);
        assert!((rates[1] - rates[2]).abs() < 0.02);
        assert!((r.objective - r.rates.min()).abs() < 1e-15);
    }

    #[test]
    fn deterministic() {
        let (b, u) = example_cell([1.0, 1.0, 1.0]);
        let a = maximize_min_rate(&b, &u, &SolverConfig::default()).unwrap();
        let c = maximize_min_rate(&b, &u, &SolverConfig::default()).unwrap();
        assert_eq!(a, c);
    }
}
