//! Problem instances: cells with schedule periods, flows with routes and
//! per-hop channel descriptions, and the derived end-to-end channel of each
//! flow.
//!
//! Scenario files are JSON:
//!
//! ```json
//! {
//!   "cells": [{ "id": "a", "period_s": 0.01 }],
//!   "flows": [{
//!     "id": "f1", "route": ["a"], "k": 100, "m": 1,
//!     "alpha": { "a": 0.001 }, "w": { "a": 100000.0 }
//!   }],
//!   "rate_bounds": { "f1": { "x_lower": 0.0012, "x_upper": 0.49 } }
//! }
//! ```
//!
//! `w` is in coded symbols per second. A flow gives either per-hop `alpha`
//! values or a direct symbol error probability `beta`, never both.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::channel::{cascade_crossover, symbol_error, BscCascade};
use crate::error::{Error, Result};

/// Default upper end of the admissible x range.
pub const DEFAULT_X_UPPER: f64 = 0.5 - 1e-3;

/// Default gap between β and the lower end of the admissible x range.
pub fn default_epsilon(beta: f64) -> f64 {
    f64::max(1e-4, 1e-3 * beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub id: String,
    #[serde(rename = "period_s")]
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    /// Cross-over probability of each hop, keyed by cell id.
    PerHop(BTreeMap<String, f64>),
    /// End-to-end symbol error probability.
    Direct(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlowRecord", into = "FlowRecord")]
pub struct FlowSpec {
    pub id: String,
    pub route: Vec<String>,
    pub packet_size: u64,
    pub bits_per_symbol: u32,
    pub channel: ChannelSpec,
    pub phy_rate: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowRecord {
    id: String,
    route: Vec<String>,
    k: u64,
    m: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    w: BTreeMap<String, f64>,
}

impl TryFrom<FlowRecord> for FlowSpec {
    type Error = String;

    fn try_from(r: FlowRecord) -> std::result::Result<Self, String> {
        let channel = match (r.alpha, r.beta) {
            (Some(a), None) => ChannelSpec::PerHop(a),
            (None, Some(b)) => ChannelSpec::Direct(b),
            (Some(_), Some(_)) => {
                return Err(format!("flow `{}` gives both `alpha` and `beta`", r.id))
            }
            (None, None) => {
                return Err(format!("flow `{}` needs either `alpha` or `beta`", r.id))
            }
        };
        Ok(FlowSpec {
            id: r.id,
            route: r.route,
            packet_size: r.k,
            bits_per_symbol: r.m,
            channel,
            phy_rate: r.w,
        })
    }
}

impl From<FlowSpec> for FlowRecord {
    fn from(f: FlowSpec) -> Self {
        let (alpha, beta) = match f.channel {
            ChannelSpec::PerHop(a) => (Some(a), None),
            ChannelSpec::Direct(b) => (None, Some(b)),
        };
        FlowRecord {
            id: f.id,
            route: f.route,
            k: f.packet_size,
            m: f.bits_per_symbol,
            alpha,
            beta,
            w: f.phy_rate,
        }
    }
}

/// Per-flow override of the admissible x range. Missing ends keep their
/// defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateBounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub cells: Vec<CellSpec>,
    pub flows: Vec<FlowSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rate_bounds: BTreeMap<String, RateBounds>,
}

/// End-to-end channel of one flow and its admissible x range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowChannel {
    pub flow_id: String,
    pub alpha_end_to_end: f64,
    pub beta: f64,
    pub x_lower: f64,
    pub x_upper: f64,
}

impl Scenario {
    /// Parses a scenario document and checks its structure.
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.check_structure()?;
        Ok(scenario)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn cell(&self, id: &str) -> Option<&CellSpec> {
        self.cells.iter().find(|c| c.id == id)
    }

    pub fn flow(&self, id: &str) -> Option<&FlowSpec> {
        self.flows.iter().find(|f| f.id == id)
    }

    /// Shape checks that do not involve channel arithmetic.
    pub fn check_structure(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidScenario(msg));
        if self.flows.is_empty() {
            return invalid("scenario has no flows".into());
        }
        let mut cell_ids = BTreeSet::new();
        for c in &self.cells {
            if !cell_ids.insert(c.id.as_str()) {
                return invalid(format!("duplicate cell id `{}`", c.id));
            }
            if !(c.period > 0.0 && c.period.is_finite()) {
                return invalid(format!("cell `{}` has non-positive period {}", c.id, c.period));
            }
        }
        let mut flow_ids = BTreeSet::new();
        for f in &self.flows {
            if !flow_ids.insert(f.id.as_str()) {
                return invalid(format!("duplicate flow id `{}`", f.id));
            }
            if f.route.is_empty() {
                return invalid(format!("flow `{}` has an empty route", f.id));
            }
            let mut seen = BTreeSet::new();
            for c in &f.route {
                if !cell_ids.contains(c.as_str()) {
                    return Err(Error::UnknownCell { cell: c.clone() });
                }
                if !seen.insert(c.as_str()) {
                    return invalid(format!("flow `{}` visits cell `{c}` twice", f.id));
                }
            }
            if f.packet_size == 0 {
                return invalid(format!("flow `{}` has k = 0", f.id));
            }
            if f.bits_per_symbol == 0 {
                return invalid(format!("flow `{}` has m = 0", f.id));
            }
            let route_keys: BTreeSet<&str> = seen;
            let w_keys: BTreeSet<&str> = f.phy_rate.keys().map(String::as_str).collect();
            if w_keys != route_keys {
                return invalid(format!("flow `{}`: `w` must be keyed exactly by the route", f.id));
            }
            if let Some((c, w)) = f.phy_rate.iter().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
                return invalid(format!("flow `{}` has non-positive rate {w} in cell `{c}`", f.id));
            }
            match &f.channel {
                ChannelSpec::PerHop(alpha) => {
                    let a_keys: BTreeSet<&str> = alpha.keys().map(String::as_str).collect();
                    if a_keys != route_keys {
                        return invalid(format!(
                            "flow `{}`: `alpha` must be keyed exactly by the route",
                            f.id
                        ));
                    }
                    if let Some((c, a)) = alpha.iter().find(|(_, a)| !(0.0..=1.0).contains(*a)) {
                        return invalid(format!(
                            "flow `{}` has cross-over {a} outside [0, 1] in cell `{c}`",
                            f.id
                        ));
                    }
                }
                ChannelSpec::Direct(b) => {
                    if !(0.0..=1.0).contains(b) {
                        return invalid(format!("flow `{}` has beta {b} outside [0, 1]", f.id));
                    }
                }
            }
        }
        if let Some(id) = self.rate_bounds.keys().find(|id| !flow_ids.contains(id.as_str())) {
            return invalid(format!("rate bounds given for unknown flow `{id}`"));
        }
        Ok(())
    }
}

fn derive_channel(scenario: &Scenario, f: &FlowSpec) -> Result<FlowChannel> {
    let m = f.bits_per_symbol;
    let (alpha, beta) = match &f.channel {
        ChannelSpec::PerHop(per_hop) => {
            let hops = f.route.iter().map(|c| per_hop[c]).collect();
            let alpha = cascade_crossover(&BscCascade::new(hops)?);
            (alpha, symbol_error(alpha, m))
        }
        ChannelSpec::Direct(beta) => {
            // bit-level cross-over consistent with the given symbol error
            let alpha = -((-beta).ln_1p() / f64::from(m)).exp_m1();
            (alpha, *beta)
        }
    };
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::DegenerateChannel { flow: f.id.clone(), beta });
    }
    let overrides = scenario.rate_bounds.get(&f.id).copied().unwrap_or_default();
    let x_lower = overrides.x_lower.unwrap_or(beta + default_epsilon(beta));
    let x_upper = overrides.x_upper.unwrap_or(DEFAULT_X_UPPER);
    if !(beta < x_lower && x_lower < x_upper && x_upper < 0.5) {
        if overrides == RateBounds::default() {
            return Err(Error::DegenerateChannel { flow: f.id.clone(), beta });
        }
        return Err(Error::InvalidScenario(format!(
            "flow `{}`: need beta < x_lower < x_upper < 0.5, got {beta} / {x_lower} / {x_upper}",
            f.id
        )));
    }
    Ok(FlowChannel {
        flow_id: f.id.clone(),
        alpha_end_to_end: alpha,
        beta,
        x_lower,
        x_upper,
    })
}

/// Derives the end-to-end channel of every flow and confirms that each cell
/// can schedule its flows at the most aggressive admissible rates.
pub fn validate(scenario: &Scenario) -> Result<Vec<FlowChannel>> {
    scenario.check_structure()?;
    let channels = scenario
        .flows
        .iter()
        .map(|f| derive_channel(scenario, f))
        .collect::<Result<Vec<_>>>()?;
    for cell in &scenario.cells {
        let load = minimum_load(scenario, &channels, &cell.id);
        if load > cell.period {
            return Err(Error::Infeasible {
                cell: cell.id.clone(),
                deficit: load - cell.period,
            });
        }
    }
    Ok(channels)
}

/// Cell load with every flow at its lower x bound. `channels` is parallel to
/// `scenario.flows`.
pub fn minimum_load(scenario: &Scenario, channels: &[FlowChannel], cell: &str) -> f64 {
    scenario
        .flows
        .iter()
        .zip(channels)
        .filter_map(|(f, ch)| {
            f.phy_rate
                .get(cell)
                .map(|w| f.packet_size as f64 / ((1.0 - 2.0 * ch.x_lower) * w))
        })
        .sum()
}

/// Ids of the flows whose route contains `cell`, in scenario order.
pub fn flows_in_cell(scenario: &Scenario, cell: &str) -> Result<BTreeSet<String>> {
    if scenario.cell(cell).is_none() {
        return Err(Error::UnknownCell { cell: cell.to_string() });
    }
    Ok(scenario
        .flows
        .iter()
        .filter(|f| f.route.iter().any(|c| c == cell))
        .map(|f| f.id.clone())
        .collect())
}
