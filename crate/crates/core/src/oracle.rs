//! Brute-force checks for the analytical machinery: exhaustive grid search
//! over x, literal parity enumeration of cascades, Monte Carlo decoding
//! error, and a joint (θ, x) grid against the closed-form θ.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::bounds::{chernoff_upper, kl_exponent, ln_one_minus_upper, optimal_theta, BoundInput};
use crate::channel::BscCascade;
use crate::error::{Error, Result};
use crate::model::{validate, Scenario};

pub const MAX_GRID_FLOWS: usize = 3;
pub const MAX_ENUMERATED_HOPS: usize = 20;

/// Name of the random stream recorded with every Monte Carlo estimate.
pub const MC_ALGORITHM: &str = "ChaCha8Rng + rand_distr::Binomial";

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub spacing: f64,
    /// Per-flow x range; `None` uses each flow's admissible range.
    pub ranges: Option<Vec<(f64, f64)>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { spacing: 1e-3, ranges: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOptimum {
    pub x: Vec<f64>,
    pub utility: f64,
    pub feasible_points: u64,
}

/// Points lo, lo + h, lo + 2h, ... below hi, then hi itself.
fn axis(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let steps = ((hi - lo) / h).floor() as usize;
    let mut pts: Vec<f64> = (0..=steps).map(|i| lo + h * i as f64).filter(|&x| x < hi).collect();
    pts.push(hi);
    pts
}

struct Axis {
    x: Vec<f64>,
    value: Vec<f64>,
    /// Error exponent per grid point, used to order points whose utilities
    /// are equal in floating point.
    exponent: Vec<f64>,
    /// Air-time per grid point in each cell of the route.
    time: Vec<Vec<(usize, f64)>>,
}

/// Exhaustive maximisation of Σ ln(1 - e_f) over the feasible x grid.
/// Ties go to the lexicographically smallest x.
pub fn grid_joint_optimum(scenario: &Scenario, grid: &GridSpec) -> Result<GridOptimum> {
    if scenario.flows.len() > MAX_GRID_FLOWS {
        return Err(Error::TooLarge(format!(
            "{} flows; the grid oracle handles at most {MAX_GRID_FLOWS}",
            scenario.flows.len()
        )));
    }
    if grid.spacing.is_nan() || grid.spacing <= 0.0 {
        return Err(Error::InvalidArgument(format!("grid spacing {}", grid.spacing)));
    }
    let channels = validate(scenario)?;
    let periods: Vec<f64> = scenario.cells.iter().map(|c| c.period).collect();
    let cell_index = |id: &str| scenario.cells.iter().position(|c| c.id == id).unwrap();
    let axes = scenario
        .flows
        .iter()
        .zip(&channels)
        .enumerate()
        .map(|(i, (f, ch))| {
            let (lo, hi) = match &grid.ranges {
                Some(r) => *r.get(i).ok_or_else(|| {
                    Error::InvalidArgument(format!("no grid range for flow `{}`", f.id))
                })?,
                None => (ch.x_lower, ch.x_upper),
            };
            if !(ch.beta < lo && lo <= hi && hi < 0.5) {
                return Err(Error::InvalidArgument(format!(
                    "grid range [{lo}, {hi}] for flow `{}` must lie in (beta, 0.5)",
                    f.id
                )));
            }
            let x = axis(lo, hi, grid.spacing);
            let value = x
                .iter()
                .map(|&x| ln_one_minus_upper(BoundInput::new(f.packet_size, x, ch.beta)?))
                .collect::<Result<Vec<_>>>()?;
            let exponent = x
                .iter()
                .map(|&x| kl_exponent(BoundInput::new(f.packet_size, x, ch.beta)?))
                .collect::<Result<Vec<_>>>()?;
            let time = x
                .iter()
                .map(|&x| {
                    f.route
                        .iter()
                        .map(|c| {
                            (cell_index(c), f.packet_size as f64 / ((1.0 - 2.0 * x) * f.phy_rate[c]))
                        })
                        .collect()
                })
                .collect();
            Ok(Axis { x, value, exponent, time })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = GridOptimum { x: Vec::new(), utility: f64::NEG_INFINITY, feasible_points: 0 };
    let mut load = vec![0.0; periods.len()];
    let mut chosen = Vec::with_capacity(axes.len());
    let mut best_tail = f64::INFINITY;
    let mut walk = Walk { axes: &axes, periods: &periods, best: &mut best, best_tail: &mut best_tail };
    walk.search(&mut load, &mut chosen, 0.0, f64::NEG_INFINITY);
    if best.x.is_empty() {
        return Err(Error::InvalidArgument("no feasible grid point".into()));
    }
    Ok(best)
}

struct Walk<'a> {
    axes: &'a [Axis],
    periods: &'a [f64],
    best: &'a mut GridOptimum,
    /// ln Σ e_f of the incumbent, which decides between equal utilities.
    best_tail: &'a mut f64,
}

impl Walk<'_> {
    fn search(&mut self, load: &mut [f64], chosen: &mut Vec<f64>, partial: f64, tail: f64) {
        let depth = chosen.len();
        if depth == self.axes.len() {
            self.best.feasible_points += 1;
            let better = partial > self.best.utility
                || (partial == self.best.utility && tail < *self.best_tail);
            if better {
                self.best.utility = partial;
                self.best.x = chosen.clone();
                *self.best_tail = tail;
            }
            return;
        }
        let a = &self.axes[depth];
        for i in 0..a.x.len() {
            let fits = a.time[i].iter().all(|&(c, t)| load[c] + t <= self.periods[c]);
            if !fits {
                // air-time grows with x, so the rest of the axis is infeasible too
                break;
            }
            for &(c, t) in &a.time[i] {
                load[c] += t;
            }
            chosen.push(a.x[i]);
            let next_tail = log_add(tail, -a.exponent[i]);
            self.search(load, chosen, partial + a.value[i], next_tail);
            chosen.pop();
            for &(c, t) in &a.time[i] {
                load[c] -= t;
            }
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateCheck {
    /// max over the (θ, x) grid of ln(1 - e(θ, x)).
    pub joint: f64,
    /// max over x of ln(1 - e(θ*(x), x)), θ* clamped into the θ grid's range.
    pub coordinate: f64,
    /// Largest change of the objective between neighbouring grid points
    /// around the joint maximiser.
    pub tolerance: f64,
    pub passed: bool,
}

fn ln_success(e: f64) -> f64 {
    if e < 1.0 {
        (-e).ln_1p()
    } else {
        f64::NEG_INFINITY
    }
}

/// Compares joint maximisation over (θ, x) with maximising over x after
/// setting θ to its closed-form optimum.
pub fn coordinate_vs_joint(
    k: u64,
    beta: f64,
    theta_grid: &[f64],
    x_grid: &[f64],
) -> Result<CoordinateCheck> {
    if theta_grid.is_empty() || x_grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let f = |theta: f64, x: f64| -> Result<f64> {
        Ok(ln_success(chernoff_upper(BoundInput::new(k, x, beta)?, theta)))
    };
    let (t_min, t_max) = theta_grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));

    let mut joint = f64::NEG_INFINITY;
    let mut arg = (0, 0);
    for (j, &x) in x_grid.iter().enumerate() {
        for (i, &t) in theta_grid.iter().enumerate() {
            let v = f(t, x)?;
            if v > joint {
                joint = v;
                arg = (i, j);
            }
        }
    }
    let mut coordinate = f64::NEG_INFINITY;
    for &x in x_grid {
        let theta = optimal_theta(x, beta).map_or(t_min, |t| t.clamp(t_min, t_max));
        coordinate = coordinate.max(f(theta, x)?);
    }

    let (i, j) = arg;
    let mut tolerance: f64 = 0.0;
    let mut neighbour = |v: f64| {
        if v.is_finite() {
            tolerance = tolerance.max((v - joint).abs());
        }
    };
    if i > 0 {
        neighbour(f(theta_grid[i - 1], x_grid[j])?);
    }
    if i + 1 < theta_grid.len() {
        neighbour(f(theta_grid[i + 1], x_grid[j])?);
    }
    if j > 0 {
        neighbour(f(theta_grid[i], x_grid[j - 1])?);
    }
    if j + 1 < x_grid.len() {
        neighbour(f(theta_grid[i], x_grid[j + 1])?);
    }
    let slack = 1e-12 * joint.abs().max(1e-300);
    let passed = if joint.is_finite() {
        (coordinate - joint).abs() <= tolerance + slack
    } else {
        coordinate == joint
    };
    Ok(CoordinateCheck { joint, coordinate, tolerance, passed })
}

/// Boolean form of [`coordinate_vs_joint`].
pub fn coordinate_vs_joint_check(k: u64, beta: f64, theta_grid: &[f64], x_grid: &[f64]) -> bool {
    coordinate_vs_joint(k, beta, theta_grid, x_grid).is_ok_and(|c| c.passed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
    pub algorithm: String,
}

/// Fraction of seeded Binomial(n, β) draws that exceed (n - k)/2.
pub fn monte_carlo_packet_error(k: u64, n: u64, beta: f64, trials: u64, seed: u64) -> Result<McEstimate> {
    if k == 0 || k > n {
        return Err(Error::InvalidDimensions { k, n });
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let dist = Binomial::new(n, beta).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let failures = (0..trials).filter(|_| 2 * dist.sample(&mut rng) > n - k).count();
    let mean = failures as f64 / trials as f64;
    Ok(McEstimate {
        mean,
        std_error: (mean * (1.0 - mean) / trials as f64).sqrt(),
        trials,
        seed,
        algorithm: MC_ALGORITHM.to_string(),
    })
}

/// Probability of an odd number of flips, summed over every hop pattern.
pub fn cascade_enumeration(cascade: &BscCascade) -> Result<f64> {
    let hops = cascade.hops();
    if hops.len() > MAX_ENUMERATED_HOPS {
        return Err(Error::TooLarge(format!(
            "{} hops; enumeration handles at most {MAX_ENUMERATED_HOPS}",
            hops.len()
        )));
    }
    let mut total = 0.0;
    for pattern in 0u32..(1 << hops.len()) {
        if pattern.count_ones() % 2 == 1 {
            total += hops
                .iter()
                .enumerate()
                .map(|(i, &a)| if pattern >> i & 1 == 1 { a } else { 1.0 - a })
                .product::<f64>();
        }
    }
    Ok(total)
}
