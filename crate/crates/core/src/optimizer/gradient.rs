//! Analytic derivatives of the rate objectives in the free coordinates.
//!
//! Rate `k` depends on `s_k` and `s_{k+1}` only, so each rate contributes to
//! at most two gradient entries.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// `∂R_k/∂s_k` and `∂R_k/∂s_{k+1}` for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePartials {
    pub own: Vec<f64>,
    pub next: Vec<f64>,
}

fn tail(free: &[f64], i: usize, k: usize) -> f64 {
    match i {
        0 => 1.0,
        i if i < k => free[i - 1],
        _ => 0.0,
    }
}

pub fn rate_jacobian(free: &[f64], m: &[f64], eps: f64) -> Result<RatePartials> {
    let k = m.len();
    if free.len() + 1 != k {
        return Err(Error::domain(format!(
            "{} free coordinates for {k} users",
            free.len()
        )));
    }
    let mut own = Vec::with_capacity(k);
    let mut next = Vec::with_capacity(k);
    for i in 0..k {
        let si = tail(free, i, k);
        let num = (1.0 - eps) * si + m[i];
        let den = tail(free, i + 1, k) - eps * si + m[i];
        if !(num > 0.0 && den > 0.0) {
            return Err(Error::domain(format!(
                "log argument of user {} leaves the domain (num {num}, den {den})",
                i + 1
            )));
        }
        own.push(((1.0 - eps) / num + eps / den) / LN_2);
        next.push(if i + 1 < k { -1.0 / (den * LN_2) } else { 0.0 });
    }
    Ok(RatePartials { own, next })
}

impl RatePartials {
    /// Gradient of `Σ w_k R_k` over `(s_2, ..., s_K)`.
    pub fn weighted(&self, weights: &[f64]) -> Vec<f64> {
        let k = self.own.len();
        (1..k)
            .map(|j| weights[j - 1] * self.next[j - 1] + weights[j] * self.own[j])
            .collect()
    }
}

pub fn sum_rate(free: &[f64], m: &[f64], eps: f64) -> f64 {
    super::rates_from_free(eps, m, free).iter().sum()
}

pub fn sum_rate_gradient(free: &[f64], m: &[f64], eps: f64) -> Result<Vec<f64>> {
    let partials = rate_jacobian(free, m, eps)?;
    Ok(partials.weighted(&vec![1.0; m.len()]))
}

/// Smooth lower bound on the minimum: `−(1/β)·ln Σ exp(−β r_i)`.
pub fn softmin(rates: &[f64], beta: f64) -> f64 {
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = rates.iter().map(|r| (-beta * (r - lo)).exp()).sum();
    lo - sum.ln() / beta
}

fn softmin_weights(rates: &[f64], beta: f64) -> Vec<f64> {
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = rates.iter().map(|r| (-beta * (r - lo)).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub fn softmin_gradient(free: &[f64], m: &[f64], eps: f64, beta: f64) -> Result<Vec<f64>> {
    let partials = rate_jacobian(free, m, eps)?;
    let rates = super::rates_from_free(eps, m, free);
    Ok(partials.weighted(&softmin_weights(&rates, beta)))
}
