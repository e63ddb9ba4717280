//! Power-domain NOMA rate model with residual SIC interference.
//!
//! Users are indexed from 0 in code and sorted by ascending channel gain, so
//! user 0 is the weakest and receives the most power. All rates are spectral
//! efficiencies in b/s/Hz.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for simplex, monotonicity and QoS checks.
pub const VALIDATION_TOL: f64 = 1e-9;

/// How a TSNR given in dB is turned into a linear ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DbConvention {
    /// 10·log10: the dB value is a power ratio.
    #[default]
    Power,
    /// 20·log10: the dB value is an amplitude ratio.
    Amplitude,
}

impl DbConvention {
    pub fn to_linear(self, db: f64) -> f64 {
        match self {
            DbConvention::Power => 10f64.powf(db / 10.0),
            DbConvention::Amplitude => 10f64.powf(db / 20.0),
        }
    }
}

/// Noise and residual-interference context shared by every user of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    tsnr_db: f64,
    responsivity: f64,
    residual_interference: f64,
    convention: DbConvention,
    rho: f64,
}

impl LinkBudget {
    pub fn new(
        tsnr_db: f64,
        responsivity: f64,
        residual_interference: f64,
        convention: DbConvention,
    ) -> Result<Self> {
        if !tsnr_db.is_finite() {
            return Err(Error::domain("TSNR must be finite"));
        }
        if !(responsivity > 0.0 && responsivity.is_finite()) {
            return Err(Error::domain(format!(
                "responsivity must be positive, got {responsivity}"
            )));
        }
        if !(0.0..1.0).contains(&residual_interference) {
            return Err(Error::domain(format!(
                "residual interference {residual_interference} outside [0, 1)"
            )));
        }
        let rho = responsivity * responsivity * convention.to_linear(tsnr_db);
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::domain(format!(
                "rho = {rho} is not a positive finite number"
            )));
        }
        Ok(Self {
            tsnr_db,
            responsivity,
            residual_interference,
            convention,
            rho,
        })
    }

    pub fn tsnr_db(&self) -> f64 {
        self.tsnr_db
    }
    pub fn responsivity(&self) -> f64 {
        self.responsivity
    }
    pub fn epsilon(&self) -> f64 {
        self.residual_interference
    }
    pub fn convention(&self) -> DbConvention {
        self.convention
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Same budget with a different residual-interference coefficient.
    pub fn with_epsilon(&self, eps: f64) -> Result<Self> {
        Self::new(self.tsnr_db, self.responsivity, eps, self.convention)
    }

    pub fn m_coefficients(&self, users: &UserSet) -> Vec<f64> {
        users
            .gains
            .iter()
            .map(|&h| self.residual_interference + 1.0 / (self.rho * h * h))
            .collect()
    }
}

/// `ε + 1/(ρh²)`: the per-user noise-plus-residual term of the substituted rates.
pub fn m_coefficient(budget: &LinkBudget, gain: f64) -> Result<f64> {
    if !(gain > 0.0) {
        return Err(Error::domain(format!(
            "channel gain must be positive, got {gain}"
        )));
    }
    Ok(budget.residual_interference + 1.0 / (budget.rho * gain * gain))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosTargets(pub Vec<f64>);

impl QosTargets {
    pub fn uniform(target: f64, k: usize) -> Self {
        Self(vec![target; k])
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// The users of one NOMA cell, sorted weakest first.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSet {
    gains: Vec<f64>,
    targets: QosTargets,
}

impl UserSet {
    pub fn new(gains: Vec<f64>, targets: QosTargets) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::domain("a cell needs at least one user"));
        }
        if gains.len() != targets.len() {
            return Err(Error::domain(format!(
                "{} gains but {} QoS targets",
                gains.len(),
                targets.len()
            )));
        }
        if let Some(h) = gains.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::domain(format!(
                "channel gain must be positive, got {h}"
            )));
        }
        if gains.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::domain("gains must be sorted ascending"));
        }
        if let Some(t) = targets.0.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::domain(format!(
                "QoS target must be non-negative, got {t}"
            )));
        }
        Ok(Self { gains, targets })
    }

    /// Sorts `(gain, target)` pairs by gain before validating.
    pub fn from_unsorted(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (gains, targets) = pairs.into_iter().unzip();
        Self::new(gains, QosTargets(targets))
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }
    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }
    pub fn targets(&self) -> &QosTargets {
        &self.targets
    }
}

/// Amplitude coefficients `a_k` of the superposed signal.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation(Vec<f64>);

impl PowerAllocation {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::domain("empty allocation"));
        }
        if let Some(a) = coefficients.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(Error::domain(format!(
                "negative or non-finite coefficient {a}"
            )));
        }
        let norm: f64 = coefficients.iter().map(|a| a * a).sum();
        if (norm - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::domain(format!(
                "squared coefficients sum to {norm}, not 1"
            )));
        }
        Ok(Self(coefficients))
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Weaker users hold at least as much power as stronger ones.
    pub fn is_noma_ordered(&self) -> bool {
        self.0.windows(2).all(|w| w[0] >= w[1] - VALIDATION_TOL)
    }
}

/// Tail sums `s_k = Σ_{i≥k} a_i²`, with an implied trailing zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativePower(Vec<f64>);

impl CumulativePower {
    pub fn new(tail_sums: Vec<f64>) -> Result<Self> {
        let Some(&first) = tail_sums.first() else {
            return Err(Error::domain("empty cumulative power vector"));
        };
        if (first - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::domain(format!("s_1 = {first}, expected 1")));
        }
        for (k, w) in tail_sums.windows(2).enumerate() {
            if w[1] > w[0] + VALIDATION_TOL {
                return Err(Error::domain(format!(
                    "tail sums increase at position {}: {} < {}",
                    k + 2,
                    w[0],
                    w[1]
                )));
            }
        }
        let last = *tail_sums.last().unwrap();
        if last < -VALIDATION_TOL || !last.is_finite() {
            return Err(Error::domain(format!("last tail sum {last} is negative")));
        }
        Ok(Self(tail_sums))
    }

    /// Builds `[1, tail...]` from the free coordinates `(s_2, ..., s_K)`.
    pub fn from_free(free: &[f64]) -> Result<Self> {
        let mut v = Vec::with_capacity(free.len() + 1);
        v.push(1.0);
        v.extend_from_slice(free);
        Self::new(v)
    }

    pub fn tail_sums(&self) -> &[f64] {
        &self.0
    }
    pub fn free(&self) -> &[f64] {
        &self.0[1..]
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    /// `s_{k+1}` for 0-based `k`, zero past the end.
    pub fn next(&self, k: usize) -> f64 {
        self.0.get(k + 1).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateVector(pub Vec<f64>);

impl RateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn to_cumulative(alloc: &PowerAllocation) -> CumulativePower {
    let mut tail = vec![0.0; alloc.len()];
    let mut acc = 0.0;
    for (k, a) in alloc.0.iter().enumerate().rev() {
        acc += a * a;
        tail[k] = acc;
    }
    CumulativePower(tail)
}

pub fn from_cumulative(s: &CumulativePower) -> Result<PowerAllocation> {
    let mut a = Vec::with_capacity(s.len());
    for k in 0..s.len() {
        let diff = s.0[k] - s.next(k);
        if diff < -VALIDATION_TOL {
            return Err(Error::domain(format!("s_{} < s_{}", k + 1, k + 2)));
        }
        a.push(diff.max(0.0).sqrt());
    }
    PowerAllocation::new(a)
}

/// Rate at which user `k` decodes user `j`'s message (0-based, `j ≤ k`).
pub fn rate_k_to_j(
    budget: &LinkBudget,
    users: &UserSet,
    alloc: &PowerAllocation,
    k: usize,
    j: usize,
) -> Result<f64> {
    let n = users.len();
    if alloc.len() != n {
        return Err(Error::domain("allocation and user set differ in length"));
    }
    if !(j <= k && k < n) {
        return Err(Error::domain(format!(
            "need j <= k < K, got j = {j}, k = {k}, K = {n}"
        )));
    }
    let h = users.gains[k];
    let a = &alloc.0;
    let p = |i: usize| (h * a[i]).powi(2);
    let eps = budget.residual_interference;
    let residual: f64 = (0..j).map(p).sum::<f64>() * eps;
    let undecoded: f64 = if j + 1 == n {
        0.0
    } else {
        (j + 1..n).map(p).sum()
    };
    let sinr = p(j) / (undecoded + residual + 1.0 / budget.rho);
    Ok((1.0 + sinr).log2())
}

/// Diagonal rates from the cumulative-power form.
pub fn rate_vector(
    budget: &LinkBudget,
    users: &UserSet,
    s: &CumulativePower,
) -> Result<RateVector> {
    if s.len() != users.len() {
        return Err(Error::domain(
            "cumulative power and user set differ in length",
        ));
    }
    let eps = budget.residual_interference;
    let m = budget.m_coefficients(users);
    let mut rates = Vec::with_capacity(users.len());
    for k in 0..users.len() {
        let sk = s.0[k];
        let num = (1.0 - eps) * sk + m[k];
        let den = s.next(k) - eps * sk + m[k];
        if !(den > 0.0) || !(num > 0.0) {
            return Err(Error::domain(format!(
                "non-positive log argument for user {} (num {num}, den {den})",
                k + 1
            )));
        }
        rates.push((num / den).log2());
    }
    Ok(RateVector(rates))
}

/// True when every stronger user decodes each weaker user's message at
/// least as fast as that user itself does.
pub fn sic_ordering_check(budget: &LinkBudget, users: &UserSet, alloc: &PowerAllocation) -> bool {
    let n = users.len();
    let mut table = vec![vec![0.0; n]; n];
    for k in 0..n {
        for j in 0..=k {
            match rate_k_to_j(budget, users, alloc, k, j) {
                Ok(r) => table[k][j] = r,
                Err(_) => return false,
            }
        }
    }
    for i in 0..n {
        for k2 in i..n {
            for k1 in k2..n {
                if table[k1][i] < table[k2][i] - VALIDATION_TOL {
                    return false;
                }
            }
        }
    }
    true
}

pub fn qos_satisfied(rates: &RateVector, targets: &QosTargets) -> Result<bool> {
    if rates.len() != targets.len() {
        return Err(Error::domain(format!(
            "{} rates but {} targets",
            rates.len(),
            targets.len()
        )));
    }
    Ok(rates
        .0
        .iter()
        .zip(&targets.0)
        .all(|(r, t)| *r >= t - VALIDATION_TOL))
}

/// One QoS constraint written as `self_coef·s_k − next_coef·s_{k+1} ≥ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearQos {
    pub self_coef: f64,
    pub next_coef: f64,
    pub rhs: f64,
}

/// The QoS constraints linearized in the cumulative-power variables.
pub fn linearized_qos(budget: &LinkBudget, users: &UserSet) -> Vec<LinearQos> {
    qos_rows(
        budget.residual_interference,
        &budget.m_coefficients(users),
        users.targets.as_slice(),
    )
}

pub(crate) fn qos_rows(eps: f64, m: &[f64], targets: &[f64]) -> Vec<LinearQos> {
    let n = m.len();
    targets
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let q = t.exp2();
            LinearQos {
                self_coef: 1.0 - eps + q * eps,
                next_coef: if k + 1 == n { 0.0 } else { q },
                rhs: (q - 1.0) * m[k],
            }
        })
        .collect()
}

/// Evaluates the linear QoS rows at `s`, returning the smallest slack.
pub fn linear_qos_slack(rows: &[LinearQos], s: &CumulativePower) -> f64 {
    rows.iter()
        .enumerate()
        .map(|(k, r)| r.self_coef * s.0[k] - r.next_coef * s.next(k) - r.rhs)
        .fold(f64::INFINITY, f64::min)
}
