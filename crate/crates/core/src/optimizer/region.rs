use crate::noma::{qos_rows, CumulativePower, LinearQos, LinkBudget, UserSet};

/// Feasibility slack below which a chain value still counts as non-negative.
const CHAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// QoS floor of user `k` (0-based).
    Qos(usize),
    /// `s_2 ≤ 1`.
    Ceiling,
    /// `s_{k+1} ≤ s_k` between free coordinates `k-1` and `k` (0-based user `k`).
    Order(usize),
    /// `s_K ≥ 0`.
    Floor,
}

/// `normal · x ≤ bound`, with `normal` scaled to unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub bound: f64,
    pub kind: RowKind,
}

impl Halfspace {
    fn new(normal: Vec<f64>, bound: f64, kind: RowKind) -> Self {
        let norm = normal.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 0.0 {
            Self {
                normal: normal.iter().map(|a| a / norm).collect(),
                bound: bound / norm,
                kind,
            }
        } else {
            Self {
                normal,
                bound,
                kind,
            }
        }
    }

    /// `bound − normal·x`; non-negative when satisfied.
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.bound - dot(&self.normal, x)
    }
}

/// The QoS-feasible polytope in the free coordinates `(s_2, ..., s_K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleRegion {
    eps: f64,
    m: Vec<f64>,
    targets: Vec<f64>,
    qos: Vec<LinearQos>,
    rows: Vec<Halfspace>,
}

impl FeasibleRegion {
    /// Number of free coordinates, `K − 1`.
    pub fn dim(&self) -> usize {
        self.qos.len() - 1
    }

    pub fn users(&self) -> usize {
        self.qos.len()
    }

    pub fn rows(&self) -> &[Halfspace] {
        &self.rows
    }

    pub fn linear_qos(&self) -> &[LinearQos] {
        &self.qos
    }

    /// Smallest row slack at `x`; negative means infeasible.
    pub fn min_slack(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.slack(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.min_slack(x) >= -tol
    }
}

pub fn build_feasible_region(budget: &LinkBudget, users: &UserSet) -> FeasibleRegion {
    let eps = budget.epsilon();
    let m = budget.m_coefficients(users);
    let targets = users.targets().as_slice().to_vec();
    let qos = qos_rows(eps, &m, &targets);
    let k = qos.len();
    let n = k - 1;
    let mut rows = Vec::with_capacity(2 * k);

    // self·s_i − next·s_{i+1} ≥ rhs, rewritten as −self·s_i + next·s_{i+1} ≤ −rhs
    for (i, q) in qos.iter().enumerate() {
        let mut normal = vec![0.0; n];
        let mut bound = -q.rhs;
        if i == 0 {
            bound += q.self_coef;
        } else {
            normal[i - 1] = -q.self_coef;
        }
        if i + 1 < k {
            normal[i] = q.next_coef;
        }
        rows.push(Halfspace::new(normal, bound, RowKind::Qos(i)));
    }

    if n > 0 {
        let mut ceiling = vec![0.0; n];
        ceiling[0] = 1.0;
        rows.push(Halfspace::new(ceiling, 1.0, RowKind::Ceiling));
        for i in 1..n {
            let mut normal = vec![0.0; n];
            normal[i] = 1.0;
            normal[i - 1] = -1.0;
            rows.push(Halfspace::new(normal, 0.0, RowKind::Order(i + 1)));
        }
        let mut floor = vec![0.0; n];
        floor[n - 1] = -1.0;
        rows.push(Halfspace::new(floor, 0.0, RowKind::Floor));
    }

    FeasibleRegion {
        eps,
        m,
        targets,
        qos,
        rows,
    }
}

/// Outcome of the forward recursion over the QoS chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub witness: Option<CumulativePower>,
    /// 1-based user index where the chain broke.
    pub stage: Option<usize>,
    /// The point that gives every user as much as its predecessors allow.
    pub greedy: Option<Vec<f64>>,
}

impl Feasibility {
    fn broken(stage: usize) -> Self {
        Self {
            feasible: false,
            witness: None,
            stage: Some(stage),
            greedy: None,
        }
    }
}

/// Largest admissible chain `(s_2, ..., s_K)` for the given QoS rows, or the
/// 1-based user at which the chain breaks.
///
/// Each row bounds `s_{k+1}` from above by an increasing function of `s_k`
/// and only the last row bounds from below, so carrying the largest value
/// forward decides feasibility.
fn greedy_chain(qos: &[LinearQos]) -> std::result::Result<Vec<f64>, usize> {
    let k = qos.len();
    let mut chain = vec![1.0; k];
    for i in 0..k - 1 {
        let q = &qos[i];
        let upper = (q.self_coef * chain[i] - q.rhs) / q.next_coef;
        if upper < -CHAIN_TOL {
            return Err(i + 1);
        }
        chain[i + 1] = upper.min(chain[i]).max(0.0);
    }
    let last = &qos[k - 1];
    if last.self_coef * chain[k - 1] - last.rhs < -CHAIN_TOL {
        return Err(k);
    }
    Ok(chain[1..].to_vec())
}

/// Decides emptiness of the region. The witness is the uniform power split
/// when that is strictly feasible; otherwise the greedy chain for targets
/// raised by half the largest uniform margin the region admits, which keeps
/// every QoS row slack.
pub fn check_feasibility(region: &FeasibleRegion) -> Feasibility {
    let greedy = match greedy_chain(&region.qos) {
        Ok(g) => g,
        Err(stage) => return Feasibility::broken(stage),
    };
    let k = region.users();
    let uniform: Vec<f64> = (1..k).map(|i| (k - i) as f64 / k as f64).collect();

    let free = if region.min_slack(&uniform) > 0.0 {
        uniform
    } else {
        let lifted = |delta: f64| {
            let t: Vec<f64> = region.targets.iter().map(|t| t + delta).collect();
            greedy_chain(&qos_rows(region.eps, &region.m, &t))
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while lifted(hi).is_ok() && hi < 64.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if lifted(mid).is_ok() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lifted(0.5 * lo).unwrap_or_else(|_| greedy.clone())
    };

    let witness = CumulativePower::from_free(&free).ok();
    Feasibility {
        feasible: witness.is_some(),
        witness,
        stage: None,
        greedy: Some(greedy),
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
