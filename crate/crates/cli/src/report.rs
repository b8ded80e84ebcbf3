//! JSON report and CSV trace rendering.

use std::io::Write;

use faircode_core::solver::{SolveReport, Status};
use serde_json::{json, Map, Value};

/// Rounds to 12 significant digits so reruns and platforms agree byte for byte.
pub fn round12(v: f64) -> f64 {
    if v.is_finite() {
        format!("{v:.11e}").parse().unwrap_or(v)
    } else {
        v
    }
}

/// Text form of [`round12`], matching the JSON number rendering.
pub fn fmt12(v: f64) -> String {
    num(v).to_string()
}

fn num(v: f64) -> Value {
    json!(round12(v))
}

pub fn report_json(report: &SolveReport) -> Value {
    let flows: Map<String, Value> = report
        .allocation
        .flows
        .iter()
        .map(|f| {
            let airtimes: Map<String, Value> =
                f.airtimes.iter().map(|(c, t)| (c.clone(), num(*t))).collect();
            let entry = json!({
                "k": f.k,
                "beta": num(f.beta),
                "lambda": num(f.lambda),
                "x_star": num(f.x_star),
                "r_star": num(f.r_star),
                "n": num(f.codeword_length),
                "n_int": f.codeword_length_int,
                "e_upper": num(f.error_upper),
                "e_lower": num(f.error_lower),
                "e_exact": num(f.exact_error),
                "airtimes": airtimes,
            });
            (f.flow_id.clone(), entry)
        })
        .collect();
    let cells: Map<String, Value> = report
        .allocation
        .cells
        .iter()
        .map(|c| {
            let entry = json!({
                "period": num(c.period),
                "price": num(c.price),
                "load": num(c.load),
                "slack": num(c.slack),
            });
            (c.cell_id.clone(), entry)
        })
        .collect();
    let kkt = &report.kkt;
    json!({
        "status": match report.status {
            Status::Converged => "converged",
            Status::NotConverged => "not_converged",
        },
        "iterations": report.iterations,
        "U": num(report.utilities.u),
        "U_tilde": num(report.utilities.u_tilde),
        "dual_value": num(report.dual_value),
        "price_tolerance": num(report.price_tolerance),
        "violation_tolerance": num(report.violation_tolerance),
        "kkt_residuals": {
            "stationarity": num(kkt.stationarity),
            "primal_feasibility": num(kkt.primal_feasibility),
            "dual_feasibility": num(kkt.dual_feasibility),
            "complementary_slackness": num(kkt.complementary_slackness),
            "interior_flows": kkt.interior_flows,
        },
        "flows": flows,
        "cells": cells,
        "warnings": report.warnings,
    })
}

pub fn write_trace<W: Write>(report: &SolveReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iter".to_string()];
    header.extend(report.cell_ids.iter().map(|c| format!("p_{c}")));
    header.extend(report.cell_ids.iter().map(|c| format!("slack_{c}")));
    header.extend(["dual".to_string(), "primal".to_string()]);
    w.write_record(&header)?;
    for row in &report.trace {
        let mut rec = vec![row.iteration.to_string()];
        rec.extend(row.prices.iter().chain(&row.slacks).map(|v| fmt12(*v)));
        rec.push(fmt12(row.dual));
        rec.push(fmt12(row.primal));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round12(0.1234567890123456), 0.123456789012);
        assert_eq!(round12(16622.957311784), 16622.9573118);
        assert_eq!(round12(0.0), 0.0);
        assert_eq!(round12(-2.5e-300), -2.5e-300);
    }
}
