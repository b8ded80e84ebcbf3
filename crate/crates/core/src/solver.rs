//! Dual decomposition for the proportional-fair rate problem.
//!
//! With the Chernoff tilt eliminated in closed form, each flow's error is
//! e_f(x) = exp(-k D(B(x) ‖ B(β)) / (1 - 2x)). Pricing cell time at p_c
//! decouples the flows: given λ_f = 2 Σ_c p_c / w_{f,c}, the best x for
//! flow f solves a scalar equation. Prices are then moved along the
//! projected subgradient of the dual.
//!
//! The default start is a dual coordinate-descent pass (each cell's price
//! set so that its own load meets its period, holding the others fixed).
//! From there the subgradient steps are scaled per cell by the inverse of
//! the load sensitivity, so one step size works across instances whose
//! prices differ by hundreds of orders of magnitude.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bounds::{
    bernoulli_kl, k0, kl_exponent_upper, ln_one_minus_upper, lower_bound, min_k_for_convexity,
    variance_log_ratio, BoundInput,
};
use crate::channel::exact_packet_error;
use crate::error::{Error, Result};
use crate::model::{validate, FlowChannel, FlowSpec, Scenario};

/// Per-cell price of schedule time, keyed by cell id.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PriceVector(pub BTreeMap<String, f64>);

impl PriceVector {
    pub fn zeros(scenario: &Scenario) -> Self {
        Self(scenario.cells.iter().map(|c| (c.id.clone(), 0.0)).collect())
    }

    pub fn get(&self, cell: &str) -> Option<f64> {
        self.0.get(cell).copied()
    }

    fn to_dense(&self, scenario: &Scenario) -> Result<Vec<f64>> {
        scenario
            .cells
            .iter()
            .map(|c| match self.get(&c.id) {
                Some(p) if p >= 0.0 && p.is_finite() => Ok(p),
                Some(p) => Err(Error::InvalidArgument(format!("price {p} for cell `{}`", c.id))),
                None => Err(Error::UnknownCell { cell: c.id.clone() }),
            })
            .collect()
    }

    fn from_dense(scenario: &Scenario, p: &[f64]) -> Self {
        Self(scenario.cells.iter().zip(p).map(|(c, &v)| (c.id.clone(), v)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    Constant,
    /// γ_i = γ₀ / √i
    Diminishing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepScaling {
    /// Step in cell c is γ / H_c with H_c the row sum of |∂load/∂p| at the
    /// starting prices.
    Curvature,
    /// Plain update p ← [p - γ·slack]⁺.
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPrices {
    WarmStart,
    Zero,
    Explicit(PriceVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub step_size: f64,
    pub schedule: StepSchedule,
    pub scaling: StepScaling,
    pub max_iterations: usize,
    /// Sup-norm price change; `None` derives it from the starting prices.
    pub price_tolerance: Option<f64>,
    /// Seconds; `None` means 10⁻⁹ of the shortest period.
    pub violation_tolerance: Option<f64>,
    pub bisection_tolerance: f64,
    pub initial_prices: InitialPrices,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            step_size: 0.5,
            schedule: StepSchedule::Constant,
            scaling: StepScaling::Curvature,
            max_iterations: 10_000,
            price_tolerance: None,
            violation_tolerance: None,
            bisection_tolerance: 1e-13,
            initial_prices: InitialPrices::WarmStart,
        }
    }
}

impl SolverOptions {
    fn check(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.step_size, "step size")?;
        positive(self.bisection_tolerance, "bisection tolerance")?;
        if let Some(t) = self.price_tolerance {
            positive(t, "price tolerance")?;
        }
        if let Some(t) = self.violation_tolerance {
            positive(t, "violation tolerance")?;
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowAllocation {
    pub flow_id: String,
    pub k: u64,
    pub beta: f64,
    pub lambda: f64,
    pub x_star: f64,
    pub r_star: f64,
    pub codeword_length: f64,
    pub codeword_length_int: u64,
    pub error_upper: f64,
    pub error_lower: f64,
    pub exact_error: f64,
    /// Seconds per period in each cell of the route.
    pub airtimes: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellAllocation {
    pub cell_id: String,
    pub period: f64,
    pub price: f64,
    pub load: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub flows: Vec<FlowAllocation>,
    pub cells: Vec<CellAllocation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Utilities {
    /// Σ ln(1 - e_f)
    pub u: f64,
    /// Σ ln(k_f (1 - e_f))
    pub u_tilde: f64,
    /// k_f (1 - e_f) per flow.
    pub throughput: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub prices: Vec<f64>,
    pub slacks: Vec<f64>,
    pub dual: f64,
    /// Utility after projecting x*(p) onto the feasible set.
    pub primal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktResiduals {
    /// max over interior flows of |Λ/(e^a - 1) - λ| / λ.
    pub stationarity: f64,
    /// Largest cell overload of the final allocation, in seconds.
    pub primal_feasibility: f64,
    /// Most negative price (zero by construction of the projection).
    pub dual_feasibility: f64,
    /// max over cells of p_c |slack_c|.
    pub complementary_slackness: f64,
    pub interior_flows: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub cell_ids: Vec<String>,
    pub allocation: Allocation,
    pub utilities: Utilities,
    pub prices: PriceVector,
    pub status: Status,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    pub kkt: KktResiduals,
    pub dual_value: f64,
    pub price_tolerance: f64,
    pub violation_tolerance: f64,
    pub warnings: Vec<String>,
}

/// λ_f = 2 Σ_{c ∈ route} p_c / w_{f,c}.
pub fn lambda_price(flow: &FlowSpec, prices: &PriceVector) -> Result<f64> {
    flow.route.iter().try_fold(0.0, |acc, c| {
        let p = prices.get(c).ok_or_else(|| Error::UnknownCell { cell: c.clone() })?;
        Ok(acc + 2.0 * p / flow.phy_rate[c])
    })
}

/// ln((λ + Λ)/λ), switching to ln Λ - ln λ when Λ/λ overflows.
fn ln_price_ratio(lam_cap: f64, lambda: f64) -> f64 {
    let r = lam_cap / lambda;
    if r.is_finite() {
        r.ln_1p()
    } else {
        lam_cap.ln() - lambda.ln()
    }
}

/// g(x) = k D/(1-2x) - ln((λ+Λ)/λ); negative below the optimum, positive above.
fn stationarity_gap(k: u64, beta: f64, lambda: f64, x: f64) -> f64 {
    let a = k as f64 * bernoulli_kl(x, beta) / (1.0 - 2.0 * x);
    a - ln_price_ratio(variance_log_ratio(x, beta), lambda)
}

/// Best x for a flow facing time price λ, clamped to the flow's admissible
/// range.
pub fn solve_x_star(channel: &FlowChannel, k: u64, lambda: f64, tol: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("lambda = {lambda}")));
    }
    let (mut lo, mut hi) = (channel.x_lower, channel.x_upper);
    if lambda == 0.0 {
        return Ok(hi);
    }
    let beta = channel.beta;
    let g_lo = stationarity_gap(k, beta, lambda, lo);
    if g_lo >= 0.0 {
        return Ok(lo);
    }
    let g_hi = stationarity_gap(k, beta, lambda, hi);
    if g_hi <= 0.0 {
        return Ok(hi);
    }
    if !(g_lo.is_finite() && g_hi.is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "no bracket for flow `{}` at lambda = {lambda}: g = {g_lo}, {g_hi}",
            channel.flow_id
        )));
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if stationarity_gap(k, beta, lambda, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Λ(x) e/(1-e) with e the optimised bound; equals λ at an interior optimum.
pub fn residual_e_over_1_minus_e(channel: &FlowChannel, k: u64, x: f64) -> Result<f64> {
    let input = BoundInput::new(k, x, channel.beta)?;
    let a = crate::bounds::kl_exponent(input)?;
    Ok(variance_log_ratio(x, channel.beta) / a.exp_m1())
}

/// ln of [`residual_e_over_1_minus_e`], finite even when e underflows.
fn ln_residual(channel: &FlowChannel, k: u64, x: f64) -> Result<f64> {
    let a = crate::bounds::kl_exponent(BoundInput::new(k, x, channel.beta)?)?;
    let ln_expm1 = if a > 1.0 { a + (-(-a).exp()).ln_1p() } else { a.exp_m1().ln() };
    Ok(variance_log_ratio(x, channel.beta).ln() - ln_expm1)
}

/// Σ over flows through `cell` of k/((1-2x)w). `x` is parallel to
/// `scenario.flows`.
pub fn cell_load(scenario: &Scenario, cell: &str, x: &[f64]) -> Result<f64> {
    if scenario.cell(cell).is_none() {
        return Err(Error::UnknownCell { cell: cell.to_string() });
    }
    check_len(scenario, x)?;
    Ok(scenario
        .flows
        .iter()
        .zip(x)
        .filter_map(|(f, &x)| f.phy_rate.get(cell).map(|w| airtime(f.packet_size, x, *w)))
        .sum())
}

/// p ← [p - γ (T - load)]⁺ in every cell.
pub fn subgradient_step(
    prices: &PriceVector,
    scenario: &Scenario,
    x: &[f64],
    gamma: f64,
) -> Result<PriceVector> {
    let mut next = prices.clone();
    for c in &scenario.cells {
        let p = prices.get(&c.id).ok_or_else(|| Error::UnknownCell { cell: c.id.clone() })?;
        let slack = c.period - cell_load(scenario, &c.id, x)?;
        next.0.insert(c.id.clone(), (p - gamma * slack).max(0.0));
    }
    Ok(next)
}

/// D(p) = max_x Σ ln(1-e_f) + Σ p_c (T_c - load_c), the maximiser being
/// x*(p) within the admissible ranges.
pub fn dual_value(scenario: &Scenario, prices: &PriceVector) -> Result<f64> {
    let problem = Problem::new(scenario)?;
    let p = prices.to_dense(scenario)?;
    problem.dual(&p, SolverOptions::default().bisection_tolerance)
}

/// Air-time of every (flow, cell) pair on the routes.
pub fn airtimes(allocation: &Allocation) -> BTreeMap<(String, String), f64> {
    allocation
        .flows
        .iter()
        .flat_map(|f| f.airtimes.iter().map(|(c, t)| ((f.flow_id.clone(), c.clone()), *t)))
        .collect()
}

/// U, Ũ and per-flow throughput of an allocation, with e_f the optimised
/// upper bound at x*.
pub fn utilities(allocation: &Allocation, scenario: &Scenario) -> Result<Utilities> {
    let mut u = 0.0;
    let mut ln_k = 0.0;
    let mut throughput = BTreeMap::new();
    for fa in &allocation.flows {
        let flow = scenario
            .flow(&fa.flow_id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown flow `{}`", fa.flow_id)))?;
        let k = flow.packet_size as f64;
        let ln_success = ln_one_minus_upper(BoundInput::new(flow.packet_size, fa.x_star, fa.beta)?)?;
        u += ln_success;
        ln_k += k.ln();
        throughput.insert(fa.flow_id.clone(), k * ln_success.exp());
    }
    Ok(Utilities { u, u_tilde: u + ln_k, throughput })
}

fn airtime(k: u64, x: f64, w: f64) -> f64 {
    k as f64 / ((1.0 - 2.0 * x) * w)
}

fn check_len(scenario: &Scenario, x: &[f64]) -> Result<()> {
    if x.len() != scenario.flows.len() {
        return Err(Error::InvalidArgument(format!(
            "{} x values for {} flows",
            x.len(),
            scenario.flows.len()
        )));
    }
    Ok(())
}

/// A validated scenario with routes resolved to indices.
#[derive(Debug, Clone)]
pub struct Problem {
    scenario: Scenario,
    channels: Vec<FlowChannel>,
    periods: Vec<f64>,
    /// Per flow: (cell index, w).
    routes: Vec<Vec<(usize, f64)>>,
    /// Per cell: (flow index, w).
    members: Vec<Vec<(usize, f64)>>,
}

impl Problem {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let channels = validate(scenario)?;
        let index: BTreeMap<&str, usize> =
            scenario.cells.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect();
        let mut members = vec![Vec::new(); scenario.cells.len()];
        let routes = scenario
            .flows
            .iter()
            .enumerate()
            .map(|(fi, f)| {
                f.route
                    .iter()
                    .map(|c| {
                        let ci = index[c.as_str()];
                        let w = f.phy_rate[c];
                        members[ci].push((fi, w));
                        (ci, w)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            scenario: scenario.clone(),
            channels,
            periods: scenario.cells.iter().map(|c| c.period).collect(),
            routes,
            members,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn channels(&self) -> &[FlowChannel] {
        &self.channels
    }

    fn k(&self, f: usize) -> u64 {
        self.scenario.flows[f].packet_size
    }

    pub fn lambda(&self, f: usize, p: &[f64]) -> f64 {
        self.routes[f].iter().map(|&(c, w)| 2.0 * p[c] / w).sum()
    }

    pub fn x_star(&self, p: &[f64], tol: f64) -> Result<Vec<f64>> {
        (0..self.channels.len())
            .map(|f| solve_x_star(&self.channels[f], self.k(f), self.lambda(f, p), tol))
            .collect()
    }

    pub fn loads(&self, x: &[f64]) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| m.iter().map(|&(f, w)| airtime(self.k(f), x[f], w)).sum())
            .collect()
    }

    pub fn utility(&self, x: &[f64]) -> Result<f64> {
        x.iter()
            .enumerate()
            .map(|(f, &xf)| ln_one_minus_upper(BoundInput::new(self.k(f), xf, self.channels[f].beta)?))
            .sum()
    }

    pub fn dual(&self, p: &[f64], tol: f64) -> Result<f64> {
        let x = self.x_star(p, tol)?;
        let loads = self.loads(&x);
        let penalty: f64 =
            (0..p.len()).map(|c| p[c] * (self.periods[c] - loads[c])).sum();
        Ok(self.utility(&x)? + penalty)
    }

    /// Load of cell `c` as a function of its own price, other prices fixed.
    fn cell_load_at(&self, c: usize, p: &[f64], pc: f64, tol: f64) -> Result<f64> {
        self.members[c].iter().try_fold(0.0, |acc, &(f, w)| {
            let lambda = self.lambda(f, p) - 2.0 * p[c] / w + 2.0 * pc / w;
            let x = solve_x_star(&self.channels[f], self.k(f), lambda.max(0.0), tol)?;
            Ok(acc + airtime(self.k(f), x, w))
        })
    }

    /// Smallest price (to relative precision 10⁻¹⁴) at which cell `c`'s own
    /// load fits its period.
    fn balance_cell(&self, c: usize, p: &[f64], tol: f64) -> Result<f64> {
        let period = self.periods[c];
        if self.cell_load_at(c, p, 0.0, tol)? <= period {
            return Ok(0.0);
        }
        let mut lo = f64::MIN_POSITIVE;
        if self.cell_load_at(c, p, lo, tol)? <= period {
            return Ok(lo);
        }
        let mut hi = (p[c] * 2.0).max(lo * 16.0);
        let mut grow = 0;
        while self.cell_load_at(c, p, hi, tol)? > period {
            lo = hi;
            hi *= 16.0;
            grow += 1;
            if grow > 600 || !hi.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "cannot price cell `{}` down to its period",
                    self.scenario.cells[c].id
                )));
            }
        }
        while hi > lo * (1.0 + 1e-14) {
            let mid = (lo.ln() * 0.5 + hi.ln() * 0.5).exp();
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cell_load_at(c, p, mid, tol)? > period {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Cyclic per-cell price balancing until prices settle.
    fn coordinate_descent(&self, tol: f64) -> Result<Vec<f64>> {
        let mut p = vec![0.0; self.periods.len()];
        for _ in 0..1000 {
            let mut change: f64 = 0.0;
            for c in 0..p.len() {
                let next = self.balance_cell(c, &p, tol)?;
                let scale = next.max(p[c]);
                if scale > 0.0 {
                    change = change.max((next - p[c]).abs() / scale);
                }
                p[c] = next;
            }
            if change <= 1e-12 {
                break;
            }
        }
        Ok(p)
    }

    /// Per-cell step scale 1/H_c, H_c = Σ_c' |∂load_c/∂p_c'| at prices p.
    fn curvature_scales(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let n_cells = self.periods.len();
        let dx_dlambda: Vec<f64> = (0..x.len())
            .map(|f| {
                let ch = &self.channels[f];
                let lambda = self.lambda(f, p);
                let interior = x[f] > ch.x_lower && x[f] < ch.x_upper;
                if !interior || lambda <= 0.0 {
                    return 0.0;
                }
                let k = self.k(f) as f64;
                let s = 1.0 - 2.0 * x[f];
                let cap = variance_log_ratio(x[f], ch.beta);
                let dcap = s / (x[f] * (1.0 - x[f]));
                let dg_dlambda = cap / (lambda * (lambda + cap));
                let dg_dx = k * cap / (s * s) - dcap / (lambda + cap);
                -dg_dlambda / dg_dx
            })
            .collect();
        let mut h = vec![0.0; n_cells];
        for (c, hc) in h.iter_mut().enumerate() {
            for &(f, w) in &self.members[c] {
                let s = 1.0 - 2.0 * x[f];
                let dload_dx = 2.0 * self.k(f) as f64 / (s * s * w);
                for &(_, w2) in &self.routes[f] {
                    *hc += (dload_dx * dx_dlambda[f] * 2.0 / w2).abs();
                }
            }
        }
        let min_positive = h
            .iter()
            .filter(|v| **v > 0.0 && v.is_finite())
            .map(|v| 1.0 / v)
            .fold(f64::INFINITY, f64::min);
        let t_min = self.periods.iter().copied().fold(f64::INFINITY, f64::min);
        let fallback = if min_positive.is_finite() { min_positive } else { 1.0 / (t_min * t_min) };
        h.iter()
            .map(|&v| if v > 0.0 && v.is_finite() { 1.0 / v } else { fallback })
            .collect()
    }

    /// Shrinks air-times in overloaded cells by lowering x until every cell
    /// fits.
    pub fn project_feasible(&self, x: &[f64]) -> Vec<f64> {
        let mut x = x.to_vec();
        for _ in 0..50 {
            let loads = self.loads(&x);
            let factors: Vec<f64> = loads
                .iter()
                .zip(&self.periods)
                .map(|(&l, &t)| if l > t { t / l * (1.0 - 1e-12) } else { 1.0 })
                .collect();
            if factors.iter().all(|&f| f == 1.0) {
                return x;
            }
            for (f, xf) in x.iter_mut().enumerate() {
                let shrink = self.routes[f].iter().map(|&(c, _)| factors[c]).fold(1.0, f64::min);
                if shrink < 1.0 {
                    let s = (1.0 - 2.0 * *xf) / shrink;
                    *xf = (0.5 * (1.0 - s)).max(self.channels[f].x_lower);
                }
            }
        }
        let loads = self.loads(&x);
        for (f, xf) in x.iter_mut().enumerate() {
            if self.routes[f].iter().any(|&(c, _)| loads[c] > self.periods[c]) {
                *xf = self.channels[f].x_lower;
            }
        }
        x
    }

    fn allocation(&self, p: &[f64], x: &[f64]) -> Result<Allocation> {
        let loads = self.loads(x);
        let flows = (0..x.len())
            .map(|f| {
                let spec = &self.scenario.flows[f];
                let ch = &self.channels[f];
                let input = BoundInput::new(spec.packet_size, x[f], ch.beta)?;
                let r = 1.0 - 2.0 * x[f];
                let n = input.codeword_length();
                let n_int = (n * (1.0 - 1e-12)).ceil() as u64;
                Ok(FlowAllocation {
                    flow_id: spec.id.clone(),
                    k: spec.packet_size,
                    beta: ch.beta,
                    lambda: self.lambda(f, p),
                    x_star: x[f],
                    r_star: r,
                    codeword_length: n,
                    codeword_length_int: n_int,
                    error_upper: kl_exponent_upper(input)?,
                    error_lower: lower_bound(input),
                    exact_error: exact_packet_error(spec.packet_size, n_int, ch.beta)?,
                    airtimes: self.routes[f]
                        .iter()
                        .map(|&(c, w)| {
                            (self.scenario.cells[c].id.clone(), airtime(spec.packet_size, x[f], w))
                        })
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cells = self
            .scenario
            .cells
            .iter()
            .enumerate()
            .map(|(c, cell)| CellAllocation {
                cell_id: cell.id.clone(),
                period: cell.period,
                price: p[c],
                load: loads[c],
                slack: cell.period - loads[c],
            })
            .collect();
        Ok(Allocation { flows, cells })
    }

    fn convexity_warnings(&self) -> Vec<String> {
        self.channels
            .iter()
            .zip(&self.scenario.flows)
            .filter_map(|(ch, f)| match min_k_for_convexity(ch.beta, ch.x_lower - ch.beta) {
                Ok(k_min) if f.packet_size < k_min => Some(format!(
                    "flow `{}`: k = {} is below {k_min}, the size that guarantees a convex \
                     error bound on its rate range",
                    f.id, f.packet_size
                )),
                Ok(_) => None,
                Err(e) => Some(format!("flow `{}`: convexity check failed: {e}", f.id)),
            })
            .collect()
    }

    pub fn solve(&self, options: &SolverOptions) -> Result<SolveReport> {
        options.check()?;
        let tol = options.bisection_tolerance;
        let mut warnings = self.convexity_warnings();
        let n_cells = self.periods.len();
        let t_min = self.periods.iter().copied().fold(f64::INFINITY, f64::min);

        let mut p = match &options.initial_prices {
            InitialPrices::Zero => vec![0.0; n_cells],
            InitialPrices::Explicit(pv) => pv.to_dense(&self.scenario)?,
            InitialPrices::WarmStart => match self.coordinate_descent(tol) {
                Ok(p) => p,
                Err(e) => {
                    warnings.push(format!("warm start failed ({e}); starting from zero prices"));
                    vec![0.0; n_cells]
                }
            },
        };
        let p_max0 = p.iter().copied().fold(0.0, f64::max);
        let price_tol = options
            .price_tolerance
            .unwrap_or(1e-10 * p_max0.max(1.0 / t_min));
        let violation_tol = options.violation_tolerance.unwrap_or(1e-9 * t_min);
        let scales = match options.scaling {
            StepScaling::Unit => vec![1.0; n_cells],
            StepScaling::Curvature => {
                let x0 = self.x_star(&p, tol)?;
                self.curvature_scales(&p, &x0)
            }
        };

        let mut trace = Vec::new();
        let mut status = Status::NotConverged;
        for i in 1..=options.max_iterations {
            let x = self.x_star(&p, tol)?;
            let loads = self.loads(&x);
            let slacks: Vec<f64> = (0..n_cells).map(|c| self.periods[c] - loads[c]).collect();
            let utility = self.utility(&x)?;
            let dual = utility + (0..n_cells).map(|c| p[c] * slacks[c]).sum::<f64>();
            let primal = self.utility(&self.project_feasible(&x))?;
            trace.push(TraceRow { iteration: i, prices: p.clone(), slacks: slacks.clone(), dual, primal });

            let gamma = match options.schedule {
                StepSchedule::Constant => options.step_size,
                StepSchedule::Diminishing => options.step_size / (i as f64).sqrt(),
            };
            let next: Vec<f64> = (0..n_cells)
                .map(|c| (p[c] - gamma * scales[c] * slacks[c]).max(0.0))
                .collect();
            let change = (0..n_cells).map(|c| (next[c] - p[c]).abs()).fold(0.0, f64::max);
            let violation = slacks.iter().map(|s| -s).fold(0.0, f64::max);
            if change <= price_tol && violation <= violation_tol {
                status = Status::Converged;
                break;
            }
            p = next;
        }

        let x_raw = self.x_star(&p, tol)?;
        let x = self.project_feasible(&x_raw);
        let allocation = self.allocation(&p, &x)?;
        let utilities = utilities(&allocation, &self.scenario)?;
        let kkt = self.kkt(&p, &x, &allocation, tol)?;
        Ok(SolveReport {
            cell_ids: self.scenario.cells.iter().map(|c| c.id.clone()).collect(),
            iterations: trace.len(),
            dual_value: self.dual(&p, tol)?,
            prices: PriceVector::from_dense(&self.scenario, &p),
            allocation,
            utilities,
            status,
            trace,
            kkt,
            price_tolerance: price_tol,
            violation_tolerance: violation_tol,
            warnings,
        })
    }

    fn kkt(&self, p: &[f64], x: &[f64], allocation: &Allocation, tol: f64) -> Result<KktResiduals> {
        let mut stationarity: f64 = 0.0;
        let mut interior = Vec::new();
        for (f, ch) in self.channels.iter().enumerate() {
            let lambda = self.lambda(f, p);
            let margin = 4.0 * tol;
            if lambda > 0.0 && x[f] > ch.x_lower + margin && x[f] < ch.x_upper - margin {
                let ln_r = ln_residual(ch, self.k(f), x[f])?;
                stationarity = stationarity.max((ln_r - lambda.ln()).exp_m1().abs());
                interior.push(ch.flow_id.clone());
            }
        }
        let cells = &allocation.cells;
        Ok(KktResiduals {
            stationarity,
            primal_feasibility: cells.iter().map(|c| -c.slack).fold(0.0, f64::max),
            dual_feasibility: p.iter().map(|&v| if v < 0.0 { -v } else { 0.0 }).fold(0.0, f64::max),
            complementary_slackness: cells
                .iter()
                .map(|c| c.price * c.slack.abs())
                .fold(0.0, f64::max),
            interior_flows: interior,
        })
    }
}

/// Validates the scenario and runs the price iteration.
pub fn solve(scenario: &Scenario, options: &SolverOptions) -> Result<SolveReport> {
    Problem::new(scenario)?.solve(options)
}

/// K₀ for a flow's channel, as used by the sufficient convexity condition.
pub fn channel_k0(channel: &FlowChannel) -> f64 {
    k0(channel.x_lower, channel.beta)
}
