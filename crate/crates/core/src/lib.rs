//! End-to-end orchestration of information-aware DAG services over a
//! cloud-augmented network graph.
//!
//! The pipeline: a physical network is augmented with per-node gadgets so that
//! computation and memory become capacitated links ([`graph`]); a service is an
//! information-aware DAG of functions and data streams ([`service`]); the DAG
//! is transformed into a forest of trees, one per destination stream
//! ([`transform`]); placement + routing + resource allocation is written as a
//! mixed-integer program ([`formulation`]) and solved exactly or via its LP
//! relaxation ([`solver`]); fractional tree flows are decomposed into convex
//! combinations of embeddings ([`decompose`]) and rounded into an integral
//! orchestration ([`rounding`]); [`analysis`] provides the metrics and the
//! concentration bounds that certify the rounding, and [`scenarios`] ships the
//! built-in benchmark configurations and the baseline comparison runner.

pub mod analysis;
pub mod decompose;
pub mod formulation;
pub mod graph;
pub mod lpfile;
pub mod rng;
pub mod rounding;
pub mod scenarios;
pub mod service;
pub mod simplex;
pub mod solver;
pub mod transform;

/// Primal feasibility tolerance used by the solver and by row checks.
pub const FEAS_TOL: f64 = 1e-7;
/// Integrality tolerance for MILP solutions.
pub const INT_TOL: f64 = 1e-6;
/// Flows below this threshold are treated as zero during decomposition.
pub const FLOW_EPS: f64 = 1e-9;

/// Formats a float with 9 significant digits, locale independent.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{:.8e}", v);
    // Render plainly when the exponent is small; keeps CSVs readable.
    let exp: i32 = s.split('e').nth(1).unwrap().parse().unwrap();
    if (-3..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let plain = format!("{:.*}", decimals, v);
        if plain.contains('.') {
            let trimmed = plain.trim_end_matches('0').trim_end_matches('.');
            return trimmed.to_string();
        }
        return plain;
    }
    s
}
