//! Benchmark reports and their CSV and JSON forms.
//!
//! JSON schema (`mocc-bench/report/v1`):
//!
//! ```text
//! { "schema", "metadata": { "tool", "version", "h", "t_end" },
//!   "disturbances": [name...],
//!   "rows": [ { "controller", "error"?, "hinf_norm"?: { "value", "peak_omega", "band"? },
//!               "cells": [ { "disturbance", "cost"?, "measured_cost"?, "steady_power"?,
//!                            "power_terms"?, "band"?, "error"? } ] } ] }
//! ```
//!
//! A band is `{ "expected", "rel_tol"?, "abs_tol"?, "lower", "upper", "within", "note"? }`.
//! Numbers are written in shortest round-trip form, so they carry full
//! double precision.

use std::io::Write;

use serde::Serialize;

use crate::config::{Expectation, NORM_ROW};

pub const SCHEMA: &str = "mocc-bench/report/v1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub h: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Band {
    pub expected: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub within: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Band {
    pub fn new(e: &Expectation, value: f64) -> Self {
        let half = match (e.rel_tol, e.abs_tol) {
            (Some(r), _) => r * e.value.abs(),
            (_, Some(a)) => a,
            _ => 0.0,
        };
        let (lower, upper) = (e.value - half, e.value + half);
        Band {
            expected: e.value,
            rel_tol: e.rel_tol,
            abs_tol: e.abs_tol,
            lower,
            upper,
            within: value >= lower && value <= upper,
            note: e.note.clone(),
        }
    }
}

/// Closed-form power split of `‖z‖²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PowerTerms {
    Independent { z_sq: f64, z1_sq: f64, z2_sq: f64 },
    Dependent { z_sq: f64, z1_sq: f64, z2_tilde_sq: f64, z2_sq: f64, w_sq: f64, t1_hinf: f64, bound: f64, bound_holds: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub disturbance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_cost: Option<f64>,
    /// Mean-square `z` of the bounded periodic solution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady_power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_terms: Option<PowerTerms>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<Band>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CellReport {
    pub fn failed(disturbance: &str, error: String) -> Self {
        CellReport {
            disturbance: disturbance.to_string(),
            cost: None,
            measured_cost: None,
            steady_power: None,
            power_terms: None,
            band: None,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEntry {
    pub value: f64,
    pub peak_omega: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<Band>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerReport {
    pub controller: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hinf_norm: Option<NormEntry>,
    pub cells: Vec<CellReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceReport {
    pub schema: String,
    pub metadata: Metadata,
    pub disturbances: Vec<String>,
    pub rows: Vec<ControllerReport>,
}

impl PerformanceReport {
    pub fn empty(metadata: Metadata) -> Self {
        Self { schema: SCHEMA.to_string(), metadata, disturbances: Vec::new(), rows: Vec::new() }
    }

    /// True when every cell and every requested norm was computed.
    pub fn complete(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_none() && r.cells.iter().all(|c| c.error.is_none()))
    }

    pub fn cell(&self, controller: &str, disturbance: &str) -> Option<&CellReport> {
        self.rows.iter().find(|r| r.controller == controller)?.cells.iter().find(|c| c.disturbance == disturbance)
    }

    /// Table layout: one column per controller, one row per disturbance,
    /// then the norm row when any norm is present.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["case".to_string()];
        header.extend(self.rows.iter().map(|r| r.controller.clone()));
        writeln!(out, "{}", header.join(","))?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for d in &self.disturbances {
            let mut line = vec![d.clone()];
            line.extend(self.rows.iter().map(|r| fmt(r.cells.iter().find(|c| &c.disturbance == d).and_then(|c| c.cost))));
            writeln!(out, "{}", line.join(","))?;
        }
        if self.rows.iter().any(|r| r.hinf_norm.is_some()) {
            let mut line = vec![NORM_ROW.to_string()];
            line.extend(self.rows.iter().map(|r| fmt(r.hinf_norm.as_ref().map(|n| n.value))));
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> Metadata {
        Metadata { tool: "mocc".into(), version: "0".into(), h: 1e-3, t_end: 100.0 }
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        PerformanceReport::empty(meta()).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "case\n");
    }

    #[test]
    fn band_edges() {
        let e = Expectation { controller: "mocc".into(), disturbance: "w1".into(), value: 1.0, rel_tol: Some(0.05), abs_tol: None, note: None };
        assert!(Band::new(&e, 1.049).within);
        assert!(!Band::new(&e, 1.051).within);
    }
}
