//! End-to-end channel parameters for cascades of binary symmetric channels
//! and the exact probability that a bounded-distance decoder fails.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Ordered per-hop cross-over probabilities of a route.
#[derive(Debug, Clone, PartialEq)]
pub struct BscCascade {
    hops: Vec<f64>,
}

impl BscCascade {
    pub fn new(hops: Vec<f64>) -> Result<Self> {
        if hops.is_empty() {
            return Err(Error::InvalidArgument("cascade needs at least one hop".into()));
        }
        if let Some(a) = hops.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidArgument(format!(
                "cross-over probability {a} outside [0, 1]"
            )));
        }
        Ok(Self { hops })
    }

    pub fn hops(&self) -> &[f64] {
        &self.hops
    }
}

/// Cross-over probability of the cascade, i.e. the probability that an odd
/// number of hops flip the bit.
///
/// Uses the two-state recurrence, which is the off-diagonal entry of the
/// product of the per-hop transition matrices.
pub fn cascade_crossover(cascade: &BscCascade) -> f64 {
    cascade
        .hops
        .iter()
        .fold(0.0, |acc, &a| acc * (1.0 - a) + (1.0 - acc) * a)
}

/// Probability that an m-bit symbol is received in error: 1 - (1 - α)^m.
pub fn symbol_error(alpha: f64, m: u32) -> f64 {
    -(f64::from(m) * (-alpha).ln_1p()).exp_m1()
}

/// P{X > (n - k)/2} for X ~ Binomial(n, β).
///
/// Terms are formed in the log domain and summed relative to the largest
/// one with Neumaier compensation, so tiny β and long codewords do not
/// underflow.
pub fn exact_packet_error(k: u64, n: u64, beta: f64) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::InvalidDimensions { k, n });
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("beta = {beta} outside [0, 1]")));
    }
    // X > (n-k)/2  <=>  X >= floor((n-k)/2) + 1
    let first = (n - k) / 2 + 1;
    if first > n {
        return Ok(0.0);
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    if beta == 1.0 {
        return Ok(1.0);
    }

    let ln_b = beta.ln();
    let ln_q = (-beta).ln_1p();
    let ln_n_fact = ln_gamma(n as f64 + 1.0);
    let ln_term = |i: u64| {
        let i_f = i as f64;
        let ln_choose = ln_n_fact - ln_gamma(i_f + 1.0) - ln_gamma((n - i) as f64 + 1.0);
        ln_choose + i_f * ln_b + (n - i) as f64 * ln_q
    };
    // terms are unimodal in i; past the peak, stop once they fall e^-60 below it
    let mut log_terms = Vec::new();
    let mut max = f64::NEG_INFINITY;
    for i in first..=n {
        let l = ln_term(i);
        if l < max - 60.0 {
            break;
        }
        max = max.max(l);
        log_terms.push(l);
    }
    let scaled = neumaier_sum(log_terms.iter().map(|l| (l - max).exp()));
    Ok((max + scaled.ln()).exp().min(1.0))
}

pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
