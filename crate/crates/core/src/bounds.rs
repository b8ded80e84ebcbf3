//! Chernoff and divergence bounds on the probability that a packet of k
//! information symbols, sent at rate r = 1 - 2x over a channel with symbol
//! error probability β, is not decodable. Also the convexity test for the
//! optimised bound as a function of x.
//!
//! All logarithms are natural.

use crate::error::{Error, Result};

/// Upper end of the x interval scanned by [`min_k_for_convexity`].
pub const CONVEXITY_X_MAX: f64 = 0.5 - 1e-6;

const CONVEXITY_GRID_POINTS: usize = 10_001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInput {
    pub k: u64,
    pub x: f64,
    pub beta: f64,
}

impl BoundInput {
    pub fn new(k: u64, x: f64, beta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if !(0.0..0.5).contains(&x) {
            return Err(Error::InvalidArgument(format!("x = {x} outside [0, 0.5)")));
        }
        if !(beta > 0.0 && beta < 0.5) {
            return Err(Error::InvalidArgument(format!("beta = {beta} outside (0, 0.5)")));
        }
        Ok(Self { k, x, beta })
    }

    /// Real-valued codeword length k / (1 - 2x).
    pub fn codeword_length(&self) -> f64 {
        self.k as f64 / (1.0 - 2.0 * self.x)
    }
}

/// θx - ln E[e^{θZ}] for Z ~ Bernoulli(β).
pub fn rate_function(x: f64, theta: f64, beta: f64) -> f64 {
    theta * x - (beta * theta.exp_m1()).ln_1p()
}

/// Chernoff bound on the decoding error at tilt θ. Values above 1 are
/// valid but vacuous.
pub fn chernoff_upper(input: BoundInput, theta: f64) -> f64 {
    (-input.codeword_length() * rate_function(input.x, theta, input.beta)).exp()
}

/// Tilt that minimises the Chernoff bound.
pub fn optimal_theta(x: f64, beta: f64) -> Result<f64> {
    if x <= beta {
        return Err(Error::NoRecovery { x, beta });
    }
    Ok(x.ln() - beta.ln() - ((-x).ln_1p() - (-beta).ln_1p()))
}

/// D(B(x) ‖ B(β)) in nats, with 0 ln 0 = 0.
pub fn bernoulli_kl(x: f64, beta: f64) -> f64 {
    let term = |p: f64, q: f64| if p == 0.0 { 0.0 } else { p * (p / q).ln() };
    (term(x, beta) + term(1.0 - x, 1.0 - beta)).max(0.0)
}

/// H(B(x)) in nats, with 0 ln 0 = 0.
pub fn bernoulli_entropy(x: f64) -> f64 {
    let term = |p: f64| if p == 0.0 { 0.0 } else { -p * p.ln() };
    term(x) + term(1.0 - x)
}

/// Exponent k D(B(x) ‖ B(β)) / (1 - 2x) of the optimised Chernoff bound.
pub fn kl_exponent(input: BoundInput) -> Result<f64> {
    if input.x <= input.beta {
        return Err(Error::NoRecovery { x: input.x, beta: input.beta });
    }
    Ok(input.codeword_length() * bernoulli_kl(input.x, input.beta))
}

/// Chernoff bound at the optimal tilt.
pub fn kl_exponent_upper(input: BoundInput) -> Result<f64> {
    Ok((-kl_exponent(input)?).exp())
}

/// ln(1 - e) for e the optimised Chernoff bound, accurate when e is tiny
/// or close to 1.
pub fn ln_one_minus_upper(input: BoundInput) -> Result<f64> {
    let a = kl_exponent(input)?;
    let e = (-a).exp();
    Ok(if e < 0.5 { (-e).ln_1p() } else { (-(-a).exp_m1()).ln() })
}

/// Lower bound on the decoding error:
/// β/(1-β) · exp(-n H(B(x))) · exp(-n D(B(x) ‖ B(β))) with n = k/(1-2x).
pub fn lower_bound(input: BoundInput) -> f64 {
    let n = input.codeword_length();
    let BoundInput { x, beta, .. } = input;
    beta / (1.0 - beta) * (-n * (bernoulli_entropy(x) + bernoulli_kl(x, beta))).exp()
}

/// Λ(x) = ln(x(1-x) / (β(1-β))), positive for β < x < 1/2.
pub fn variance_log_ratio(x: f64, beta: f64) -> f64 {
    (x * (1.0 - x)).ln() - (beta * (1.0 - beta)).ln()
}

/// d e / d x for the optimised bound e(x) = exp(-k D / (1 - 2x)).
pub fn upper_bound_slope(input: BoundInput) -> Result<f64> {
    let e = kl_exponent_upper(input)?;
    let s = 1.0 - 2.0 * input.x;
    Ok(-e * input.k as f64 * variance_log_ratio(input.x, input.beta) / (s * s))
}

/// K₀ = 1 / Λ(x_lower).
pub fn k0(x_lower: f64, beta: f64) -> f64 {
    1.0 / variance_log_ratio(x_lower, beta)
}

/// k - [4(1-2x)/Λ + K₀²(1-2x)³/(x(1-x))]; non-negative values certify the
/// sufficient convexity condition at x.
pub fn convexity_margin(k: u64, x: f64, beta: f64, k0: f64) -> f64 {
    let s = 1.0 - 2.0 * x;
    let lam = variance_log_ratio(x, beta);
    k as f64 - (4.0 * s / lam + k0 * k0 * s.powi(3) / (x * (1.0 - x)))
}

/// The factor whose sign decides the sign of d²e/dx²:
/// k Λ²/(1-2x)² - 4Λ/(1-2x) - (1-2x)/(x(1-x)).
pub fn convexity_bracket(k: u64, x: f64, beta: f64) -> f64 {
    let s = 1.0 - 2.0 * x;
    let lam = variance_log_ratio(x, beta);
    k as f64 * lam * lam / (s * s) - 4.0 * lam / s - s / (x * (1.0 - x))
}

/// Smallest real k for which the bracket is non-negative at x.
fn bracket_threshold(x: f64, beta: f64) -> f64 {
    let s = 1.0 - 2.0 * x;
    let lam = variance_log_ratio(x, beta);
    4.0 * s / lam + s.powi(3) / (x * (1.0 - x) * lam * lam)
}

/// Uniform grid over [x_lo, x_hi] plus geometrically spaced points close to
/// x_lo, where the bracket changes fastest.
fn convexity_grid(x_lo: f64, x_hi: f64) -> Vec<f64> {
    let width = x_hi - x_lo;
    let mut grid: Vec<f64> = (0..CONVEXITY_GRID_POINTS)
        .map(|i| x_lo + width * i as f64 / (CONVEXITY_GRID_POINTS - 1) as f64)
        .collect();
    grid.extend((1..=120).map(|j| x_lo + width * 10f64.powf(-4.0 - 8.0 * j as f64 / 120.0)));
    grid.extend((1..=40).map(|j| x_hi - width * 10f64.powf(-4.0 - 8.0 * j as f64 / 40.0)));
    grid
}

/// Whether the optimised bound is convex in x on [x_lo, x_hi], judged on a
/// dense grid.
pub fn exact_convexity_check(k: u64, beta: f64, x_lo: f64, x_hi: f64) -> bool {
    if x_lo >= x_hi {
        return true;
    }
    convexity_grid(x_lo, x_hi)
        .into_iter()
        .all(|x| convexity_bracket(k, x, beta) >= 0.0)
}

/// Smallest k for which the optimised bound is convex on
/// [β + ε, 1/2 - 10⁻⁶].
pub fn min_k_for_convexity(beta: f64, epsilon: f64) -> Result<u64> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::InvalidArgument(format!("beta = {beta} outside (0, 0.5)")));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be positive")));
    }
    let (x_lo, x_hi) = (beta + epsilon, CONVEXITY_X_MAX);
    if x_lo >= x_hi {
        return Ok(1);
    }
    let worst = convexity_grid(x_lo, x_hi)
        .into_iter()
        .map(|x| bracket_threshold(x, beta))
        .fold(0.0, f64::max);
    if !worst.is_finite() || worst > 1e18 {
        return Err(Error::NumericalFailure(format!(
            "convexity threshold {worst} out of range for beta = {beta}, epsilon = {epsilon}"
        )));
    }
    // the bracket is increasing in k, so the grid threshold pins k up to rounding
    let mut k = (worst.ceil() as u64).max(1);
    while !exact_convexity_check(k, beta, x_lo, x_hi) {
        k += 1;
    }
    while k > 1 && exact_convexity_check(k - 1, beta, x_lo, x_hi) {
        k -= 1;
    }
    Ok(k)
}
