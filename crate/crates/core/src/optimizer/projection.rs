//! Euclidean projection onto the feasible polytope.
//!
//! Primal active-set method for `min ½‖x − p‖²` subject to the region's
//! halfspaces. The working set stays linearly independent because a row only
//! enters when it blocks a step that lies in the null space of the current
//! working set. Ties are broken by the lowest row index.

use nalgebra::{DMatrix, DVector};

use super::region::{check_feasibility, dot, FeasibleRegion};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    /// Indices of rows in the final working set.
    pub active: Vec<usize>,
    /// Lagrange multipliers of `active`, all non-negative at optimality.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

/// Projects `point` onto `region`, starting the active-set search from the
/// feasibility witness.
pub fn project(point: &[f64], region: &FeasibleRegion, tol: f64) -> Result<Vec<f64>> {
    let f = check_feasibility(region);
    let Some(w) = f.witness else {
        return Err(Error::Infeasible {
            stage: f.stage.unwrap_or(0),
            reason: "cannot project onto an empty region".into(),
        });
    };
    Ok(project_from(point, region, w.free(), tol)?.point)
}

/// Projects `point` onto `region` from a feasible `start`.
pub fn project_from(
    point: &[f64],
    region: &FeasibleRegion,
    start: &[f64],
    tol: f64,
) -> Result<Projection> {
    let n = region.dim();
    if point.len() != n || start.len() != n {
        return Err(Error::Projection(format!(
            "dimension mismatch: region {n}, point {}, start {}",
            point.len(),
            start.len()
        )));
    }
    if n == 0 {
        return Ok(Projection {
            point: Vec::new(),
            active: Vec::new(),
            multipliers: Vec::new(),
            iterations: 0,
        });
    }
    let rows = region.rows();
    if region.contains(point, 0.0) {
        return Ok(Projection {
            point: point.to_vec(),
            active: Vec::new(),
            multipliers: Vec::new(),
            iterations: 0,
        });
    }
    if !region.contains(start, tol) {
        return Err(Error::Projection("start point is not feasible".into()));
    }

    let scale = 1.0
        + point
            .iter()
            .chain(start)
            .fold(0.0f64, |a, v| a.max(v.abs()));
    let step_eps = 1e-14 * scale;
    let mut x = start.to_vec();
    let mut working: Vec<usize> = Vec::new();
    let max_iter = 50 * (rows.len() + n) + 100;

    for iter in 0..max_iter {
        let grad: Vec<f64> = x.iter().zip(point).map(|(a, b)| a - b).collect();
        let (dir, lambda) = equality_step(region, &working, &grad)?;
        let dir_norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();

        if dir_norm <= step_eps {
            let worst = lambda
                .iter()
                .enumerate()
                .filter(|(_, l)| **l < -1e-12)
                .min_by(|a, b| a.1.total_cmp(b.1).then(working[a.0].cmp(&working[b.0])));
            match worst {
                None => {
                    return Ok(Projection {
                        point: x,
                        active: working,
                        multipliers: lambda.iter().map(|l| l.max(0.0)).collect(),
                        iterations: iter,
                    })
                }
                Some((pos, _)) => {
                    working.remove(pos);
                    continue;
                }
            }
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for (i, row) in rows.iter().enumerate() {
            if working.contains(&i) {
                continue;
            }
            let rate = dot(&row.normal, &dir);
            if rate > 1e-15 {
                let step = (row.slack(&x) / rate).max(0.0);
                if step < alpha {
                    alpha = step;
                    blocking = Some(i);
                }
            }
        }
        for (xi, di) in x.iter_mut().zip(&dir) {
            *xi += alpha * di;
        }
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Err(Error::Projection(format!(
        "active set did not settle in {max_iter} iterations"
    )))
}

/// Step to the minimizer on the working-set face and the face multipliers.
fn equality_step(
    region: &FeasibleRegion,
    working: &[usize],
    grad: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grad.len();
    if working.is_empty() {
        return Ok((grad.iter().map(|g| -g).collect(), Vec::new()));
    }
    let rows = region.rows();
    let a = DMatrix::from_fn(working.len(), n, |r, c| rows[working[r]].normal[c]);
    let g = DVector::from_column_slice(grad);
    let gram = &a * a.transpose();
    let rhs = -(&a * &g);
    let lambda = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Projection(e.to_string()))?,
    };
    let dir = -(g + a.transpose() * &lambda);
    Ok((
        dir.iter().copied().collect(),
        lambda.iter().copied().collect(),
    ))
}
