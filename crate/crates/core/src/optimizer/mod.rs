//! QoS-guaranteed power allocation by gradient projection over the
//! cumulative-power polytope.

mod gradient;
mod oracle;
mod projection;
mod region;
mod solver;

pub use gradient::{
    rate_jacobian, softmin, softmin_gradient, sum_rate, sum_rate_gradient, RatePartials,
};
pub use oracle::{brute_force_oracle, Objective};
pub use projection::{project, project_from, Projection};
pub use region::{
    build_feasible_region, check_feasibility, Feasibility, FeasibleRegion, Halfspace, RowKind,
};
pub use solver::{
    maximize_min_rate, maximize_sum_rate, SolveResult, SolverConfig, StepRule, TraceEntry,
};

/// Rates from the free coordinates `(s_2, ..., s_K)` without validation.
/// Used on solver iterates, which are feasible by construction.
pub(crate) fn rates_from_free(eps: f64, m: &[f64], free: &[f64]) -> Vec<f64> {
    let k = m.len();
    let s = |i: usize| -> f64 {
        match i {
            0 => 1.0,
            i if i < k => free[i - 1],
            _ => 0.0,
        }
    };
    (0..k)
        .map(|i| {
            let si = s(i);
            (((1.0 - eps) * si + m[i]) / (s(i + 1) - eps * si + m[i])).log2()
        })
        .collect()
}
