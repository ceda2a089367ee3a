//! Metrics and probabilistic guarantees for the rounded solution.
//!
//! The randomized rounding induces, per commodity and link, a Bernoulli
//! presence variable whose parameter is the LP flow. From those this module
//! derives the distribution and expectation of per-object and total link
//! flows, Monte Carlo estimates of end-to-end latency, exponential tail
//! bounds on capacity/cost/latency violations, the per-link condition under
//! which capacity violations are impossible, and the closed-form
//! approximation factors achieved after repeated rounding tries.

use std::fmt;

use crate::decompose::Decomposition;
use crate::graph::{AugmentedGraph, LinkId};
use crate::rng::StreamRng;
use crate::rounding::{commodity_link_latency, effective_rate, ForestEmbedding};
use crate::service::{CommodityId, ObjectId};
use crate::transform::ServiceForest;
use crate::FLOW_EPS;

#[derive(Clone, Debug, PartialEq)]
pub enum AnalysisError {
    ZeroBaselineCost,
    NoCapacitatedLink,
    NonpositiveBeta(f64),
    NonpositiveAlpha(f64),
    InvalidTheta(f64),
    MissingDecomposition(usize),
    NonpositiveArgument(String),
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::ZeroBaselineCost => write!(f, "baseline cost is zero"),
            AnalysisError::NoCapacitatedLink => write!(f, "no capacitated link"),
            AnalysisError::NonpositiveBeta(b) => write!(f, "beta = {b} is not positive"),
            AnalysisError::NonpositiveAlpha(a) => write!(f, "alpha = {a} is not positive"),
            AnalysisError::InvalidTheta(t) => write!(f, "theta = {t} must be below 1"),
            AnalysisError::MissingDecomposition(t) => {
                write!(f, "tree {t} has no decomposition entry")
            }
            AnalysisError::NonpositiveArgument(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for AnalysisError {}

/// Cost approximation ratio against the exact optimum on the forest.
pub fn car(idago_cost: f64, milp_forest_cost: f64) -> Result<f64, AnalysisError> {
    if milp_forest_cost <= 0.0 {
        return Err(AnalysisError::ZeroBaselineCost);
    }
    Ok(idago_cost / milp_forest_cost)
}

/// Capacity relaxation factor: worst link utilization of the realization.
pub fn crf(e: &ForestEmbedding, g: &AugmentedGraph) -> Result<f64, AnalysisError> {
    let mut worst: Option<f64> = None;
    for link in g.capacitated_links() {
        let cap = link.effective_capacity().finite().expect("capacitated");
        let used = e.info_flow[link.id.index()];
        let ratio = if cap > 0.0 {
            used / cap
        } else if used > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst = Some(worst.map_or(ratio, |w: f64| w.max(ratio)));
    }
    worst.ok_or(AnalysisError::NoCapacitatedLink)
}

/// Distribution of the flow one object realizes on one link.
#[derive(Clone, Debug)]
pub struct ObjectFlowPmf {
    /// Ascending distinct support values, starting with 0.
    pub support: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub expectation: f64,
}

/// Distribution of the max over independent rate-weighted presence variables:
/// `members` holds (rate, presence probability) pairs. The object realizes the
/// largest rate among its present members.
pub fn pmf_from_members(members: &[(f64, f64)]) -> ObjectFlowPmf {
    let mut members: Vec<(f64, f64)> = members
        .iter()
        .copied()
        .filter(|(rate, _)| *rate > 0.0)
        .map(|(rate, q)| (rate, q.clamp(0.0, 1.0)))
        .collect();
    members.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut support = vec![0.0];
    let mut probabilities = vec![members.iter().map(|(_, q)| 1.0 - q).product::<f64>()];
    for (i, &(rate, q)) in members.iter().enumerate() {
        let none_higher: f64 = members[i + 1..].iter().map(|(_, q)| 1.0 - q).product();
        let mass = q * none_higher;
        // ties in rate merge into one support point
        if let Some(last) = support.last() {
            if (last - rate).abs() <= 1e-15 * rate.abs().max(1.0) {
                *probabilities.last_mut().expect("aligned") += mass;
                continue;
            }
        }
        support.push(rate);
        probabilities.push(mass);
    }
    let expectation = support.iter().zip(&probabilities).map(|(v, p)| v * p).sum();
    ObjectFlowPmf { support, probabilities, expectation }
}

/// Per-object flow law on a link: the object realizes the largest rate among
/// its present commodities, each present independently with its LP flow.
pub fn object_flow_pmf(
    g: &AugmentedGraph,
    forest: &ServiceForest,
    flows: &[Vec<f64>],
    object: ObjectId,
    link: LinkId,
    burstiness: bool,
) -> ObjectFlowPmf {
    let s = &forest.graph;
    let members: Vec<(f64, f64)> = s
        .commodities()
        .iter()
        .filter(|k| k.object == object)
        .map(|k| {
            let rate = effective_rate(g, s, k.id, link, burstiness);
            let q = flows[k.id.index()][link.index()];
            (rate, q)
        })
        .collect();
    pmf_from_members(&members)
}

/// Closed-form and Monte Carlo expectations under the rounding distribution.
#[derive(Clone, Debug)]
pub struct Expectations {
    /// Expected total information flow per link.
    pub link_flow: Vec<f64>,
    /// Expected resource cost (flow-proportional; block-based links use their
    /// per-unit equivalent cost).
    pub cost: f64,
    /// Per destination commodity: (commodity, mean cumulative latency,
    /// standard error) from Monte Carlo over independent per-commodity draws.
    pub cumulative_latency: Vec<(CommodityId, f64, f64)>,
}

/// Per-unit cost of a link, converting block pricing to its proportional
/// equivalent.
pub fn unit_cost(g: &AugmentedGraph, link: LinkId, resource_blocks: bool) -> f64 {
    let l = g.link(link);
    match (resource_blocks, l.blocks) {
        (true, Some(b)) if b.block_capacity > 0.0 => b.block_cost / b.block_capacity,
        _ => l.unit_cost,
    }
}

pub fn expectations(
    g: &AugmentedGraph,
    forest: &ServiceForest,
    flows: &[Vec<f64>],
    decs: &[Decomposition],
    n_mc: usize,
    seed: u64,
    burstiness: bool,
    resource_blocks: bool,
) -> Expectations {
    let s = &forest.graph;
    let mut link_flow = vec![0.0; g.link_count()];
    for link in g.links() {
        for o in 0..s.object_count() {
            let pmf = object_flow_pmf(g, forest, flows, ObjectId(o as u32), link.id, burstiness);
            link_flow[link.id.index()] += pmf.expectation;
        }
    }
    let cost = g
        .links()
        .map(|l| link_flow[l.id.index()] * unit_cost(g, l.id, resource_blocks))
        .sum();

    // cumulative latency has no product form; sample per-commodity paths
    // independently (the model treats commodities as independent)
    let dests: Vec<CommodityId> = s.destination_commodities().map(|k| k.id).collect();
    let order = s.commodity_topo_order();
    let mut acc: Vec<(f64, f64)> = vec![(0.0, 0.0); dests.len()];
    let mut local = vec![0.0; s.commodities().len()];
    let mut cumulative = vec![0.0; s.commodities().len()];
    for t in 0..n_mc {
        for c in &forest.components {
            let dec = &decs[c.index];
            for &k in &c.commodities {
                let mut rng = StreamRng::for_try(seed ^ (k.0 as u64) << 20, t as u64, c.index as u64);
                let entry = crate::rounding::sample(dec, &mut rng);
                let path = dec.entries[entry].0.commodity_map.get(&k);
                local[k.index()] = path.map_or(0.0, |p| {
                    p.iter().map(|&l| commodity_link_latency(g, s, k, l)).sum()
                });
            }
        }
        for &k in &order {
            let inputs = s.input_commodities(k).expect("dense ids");
            let worst = inputs.iter().map(|l| cumulative[l.index()]).fold(0.0f64, f64::max);
            cumulative[k.index()] = local[k.index()] + worst;
        }
        for (i, &k) in dests.iter().enumerate() {
            let v = cumulative[k.index()];
            acc[i].0 += v;
            acc[i].1 += v * v;
        }
    }
    let cumulative_latency = dests
        .iter()
        .zip(&acc)
        .map(|(&k, &(sum, sumsq))| {
            let n = n_mc.max(1) as f64;
            let mean = sum / n;
            let var = (sumsq / n - mean * mean).max(0.0);
            (k, mean, (var / n).sqrt())
        })
        .collect();

    Expectations { link_flow, cost, cumulative_latency }
}

/// Everything the tail bounds and approximation factors need.
#[derive(Clone, Debug)]
pub struct BoundInputs {
    /// Largest active rate per (object, link).
    pub active_rate: Vec<Vec<f64>>,
    /// Sum of squared active object rates per link.
    pub xi: Vec<f64>,
    /// Cost-weighted squared active rate mass.
    pub chi: f64,
    /// Capacitated links whose active rates can exceed capacity at factor 1.
    pub failing_links: Vec<LinkId>,
    pub xi_max: f64,
    pub c_min: f64,
    pub kappa: f64,
    /// Latency envelopes per commodity.
    pub lambda_max: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub lambda_max_global: f64,
    pub lambda_min_global: f64,
    /// Smallest latency bound among bounded destination commodities.
    pub l_min: f64,
    /// Expected cost over the LP optimum.
    pub delta_alpha: f64,
    /// Per link, expected flow over capacity (uncapacitated links are 0).
    pub delta_beta1: Vec<f64>,
    /// Per bounded destination commodity, expected latency over its bound.
    pub delta_beta2: Vec<(CommodityId, f64)>,
    pub c_lp: f64,
}

pub fn bound_inputs(
    g: &AugmentedGraph,
    forest: &ServiceForest,
    flows: &[Vec<f64>],
    decs: &[Decomposition],
    c_lp: f64,
    exps: &Expectations,
    burstiness: bool,
    resource_blocks: bool,
) -> Result<BoundInputs, AnalysisError> {
    let s = &forest.graph;
    let n_links = g.link_count();
    let n_objects = s.object_count();

    let mut active_rate = vec![vec![0.0f64; n_links]; n_objects];
    for k in s.commodities() {
        for link in g.links() {
            if flows[k.id.index()][link.id.index()] > FLOW_EPS {
                let r = effective_rate(g, s, k.id, link.id, burstiness);
                let cell = &mut active_rate[k.object.index()][link.id.index()];
                *cell = (*cell).max(r);
            }
        }
    }
    let mut xi = vec![0.0; n_links];
    let mut chi = 0.0;
    for link in g.links() {
        let mut sum = 0.0;
        for o in 0..n_objects {
            let r = active_rate[o][link.id.index()];
            xi[link.id.index()] += r * r;
            sum += r;
        }
        let w = unit_cost(g, link.id, resource_blocks);
        chi += w * w * sum * sum;
    }

    let mut failing_links = Vec::new();
    for link in g.capacitated_links() {
        let cap = link.effective_capacity().finite().expect("capacitated");
        let sum: f64 = (0..n_objects).map(|o| active_rate[o][link.id.index()]).sum();
        if sum > cap + 1e-12 {
            failing_links.push(link.id);
        }
    }
    let xi_max =
        failing_links.iter().map(|l| xi[l.index()]).fold(0.0f64, f64::max);
    let c_min = failing_links
        .iter()
        .map(|l| g.link(*l).effective_capacity().finite().expect("capacitated"))
        .fold(f64::INFINITY, f64::min);

    let r_max = {
        let rates = &active_rate;
        g.capacitated_links()
            .flat_map(|l| (0..n_objects).map(move |o| rates[o][l.id.index()]))
            .fold(0.0f64, f64::max)
    };
    let kappa = if c_min.is_finite() && c_min > 0.0 { (r_max / c_min).min(1.0) } else { 1.0 };

    // path-length extremes over each tree's decomposition entries
    let mut p_up = vec![0usize; s.commodities().len()];
    let mut p_down = vec![usize::MAX; s.commodities().len()];
    for c in &forest.components {
        let dec = decs.get(c.index).ok_or(AnalysisError::MissingDecomposition(c.index))?;
        if dec.entries.is_empty() {
            return Err(AnalysisError::MissingDecomposition(c.index));
        }
        for (e, _) in &dec.entries {
            for &k in &c.commodities {
                let len = e
                    .commodity_map
                    .get(&k)
                    .ok_or(AnalysisError::MissingDecomposition(c.index))?
                    .len();
                p_up[k.index()] = p_up[k.index()].max(len);
                p_down[k.index()] = p_down[k.index()].min(len);
            }
        }
    }

    // envelope recursion along the topological order
    let max_link_latency = |k: CommodityId| -> (f64, f64) {
        let mut hi = 0.0f64;
        let mut lo = f64::INFINITY;
        for link in g.links() {
            let l = commodity_link_latency(g, s, k, link.id);
            hi = hi.max(l);
            lo = lo.min(l);
        }
        (hi, if lo.is_finite() { lo } else { 0.0 })
    };
    let mut lambda_max = vec![0.0; s.commodities().len()];
    let mut lambda_min = vec![0.0; s.commodities().len()];
    for k in s.commodity_topo_order() {
        let (hi, lo) = max_link_latency(k);
        let inputs = s.input_commodities(k).expect("dense ids");
        let in_hi = inputs.iter().map(|l| lambda_max[l.index()]).fold(0.0f64, f64::max);
        let in_lo = inputs.iter().map(|l| lambda_min[l.index()]).fold(0.0f64, f64::max);
        lambda_max[k.index()] = hi * p_up[k.index()] as f64 + in_hi;
        lambda_min[k.index()] = lo * p_down[k.index()].min(1_000_000) as f64 + in_lo;
    }
    let dests: Vec<CommodityId> = s.destination_commodities().map(|k| k.id).collect();
    let lambda_max_global = dests.iter().map(|k| lambda_max[k.index()]).fold(0.0f64, f64::max);
    let lambda_min_global =
        dests.iter().map(|k| lambda_min[k.index()]).fold(f64::INFINITY, f64::min).min(0.0).max(0.0);

    let l_min = s
        .destination_commodities()
        .filter_map(|k| k.latency_bound)
        .fold(f64::INFINITY, f64::min);

    let delta_alpha = if c_lp > 0.0 { exps.cost / c_lp } else { f64::INFINITY };
    let mut delta_beta1 = vec![0.0; n_links];
    for link in g.capacitated_links() {
        let cap = link.effective_capacity().finite().expect("capacitated");
        if cap > 0.0 {
            delta_beta1[link.id.index()] = exps.link_flow[link.id.index()] / cap;
        }
    }
    let delta_beta2 = exps
        .cumulative_latency
        .iter()
        .filter_map(|&(k, mean, _)| {
            s.commodity(k).latency_bound.map(|b| (k, if b > 0.0 { mean / b } else { 0.0 }))
        })
        .collect();

    Ok(BoundInputs {
        active_rate,
        xi,
        chi,
        failing_links,
        xi_max,
        c_min,
        kappa,
        lambda_max,
        lambda_min,
        lambda_max_global,
        lambda_min_global,
        l_min,
        delta_alpha,
        delta_beta1,
        delta_beta2,
        c_lp,
    })
}

/// True when the link cannot violate capacity by factor `delta` at all: the
/// sum of its active object rates already fits.
pub fn condition_f(
    inputs: &BoundInputs,
    g: &AugmentedGraph,
    link: LinkId,
    delta: f64,
) -> bool {
    let Some(cap) = g.link(link).effective_capacity().finite() else {
        return true;
    };
    let sum: f64 = inputs.active_rate.iter().map(|per_link| per_link[link.index()]).sum();
    sum <= delta * cap + 1e-12
}

/// Tail bound on the link flow exceeding `delta * capacity`.
pub fn capacity_bound(
    inputs: &BoundInputs,
    g: &AugmentedGraph,
    link: LinkId,
    delta: f64,
) -> Result<f64, AnalysisError> {
    if condition_f(inputs, g, link, delta) {
        return Ok(0.0);
    }
    let cap = g
        .link(link)
        .effective_capacity()
        .finite()
        .ok_or(AnalysisError::NoCapacitatedLink)?;
    let beta = delta - inputs.delta_beta1[link.index()];
    if beta <= 0.0 {
        return Err(AnalysisError::NonpositiveBeta(beta));
    }
    let xi = inputs.xi[link.index()];
    if xi <= 0.0 {
        return Ok(0.0);
    }
    Ok((-2.0 * (beta * cap).powi(2) / xi).exp())
}

/// Tail bound on a destination commodity's cumulative latency exceeding
/// `delta * bound`.
pub fn latency_bound_prob(
    inputs: &BoundInputs,
    forest: &ServiceForest,
    k: CommodityId,
    delta: f64,
) -> Result<f64, AnalysisError> {
    let bound = forest
        .graph
        .commodity(k)
        .latency_bound
        .ok_or_else(|| AnalysisError::NonpositiveArgument(format!("{k} has no latency bound")))?;
    let delta_beta2 = inputs
        .delta_beta2
        .iter()
        .find(|(kk, _)| *kk == k)
        .map(|(_, d)| *d)
        .ok_or_else(|| AnalysisError::NonpositiveArgument(format!("{k} not analyzed")))?;
    let beta = delta - delta_beta2;
    if beta <= 0.0 {
        return Err(AnalysisError::NonpositiveBeta(beta));
    }
    let width = inputs.lambda_max[k.index()] - inputs.lambda_min[k.index()];
    if width <= 0.0 {
        // deterministic latency: no mass can exceed the mean-based threshold
        return Ok(0.0);
    }
    Ok((-2.0 * (beta * bound).powi(2) / (width * width)).exp())
}

/// Tail bound on the realized cost exceeding `delta` times the exact optimum.
pub fn cost_bound(inputs: &BoundInputs, delta: f64) -> Result<f64, AnalysisError> {
    let alpha = delta - inputs.delta_alpha;
    if alpha <= 0.0 {
        return Err(AnalysisError::NonpositiveAlpha(alpha));
    }
    if inputs.chi <= 0.0 {
        return Ok(0.0);
    }
    Ok((-2.0 * (alpha * inputs.c_lp).powi(2) / inputs.chi).exp())
}

/// Tail bound on allocated blocks exceeding `delta * max_blocks`.
pub fn block_bound(
    inputs: &BoundInputs,
    g: &AugmentedGraph,
    link: LinkId,
    delta: f64,
) -> Result<f64, AnalysisError> {
    let spec = g
        .link(link)
        .blocks
        .ok_or_else(|| AnalysisError::NonpositiveArgument(format!("{link} has no blocks")))?;
    if spec.block_capacity <= 0.0 {
        return Err(AnalysisError::NonpositiveArgument(format!("{link} zero block capacity")));
    }
    // block analogue of the zero-violation condition: even the largest
    // possible flow needs fewer than `delta * max_blocks` blocks
    let sum_active: f64 =
        inputs.active_rate.iter().map(|per_link| per_link[link.index()]).sum();
    let gamma_max = crate::rounding::blocks_for(sum_active, spec.block_capacity);
    if gamma_max < delta * spec.max_blocks - 1e-12 {
        return Ok(0.0);
    }
    let beta = delta - inputs.delta_beta1[link.index()];
    if beta <= 0.0 {
        return Err(AnalysisError::NonpositiveBeta(beta));
    }
    let x = beta * spec.max_blocks;
    if x <= 1.0 {
        return Ok(1.0);
    }
    let xi_t = inputs.xi[link.index()] / spec.block_capacity;
    if xi_t <= 0.0 {
        return Ok(0.0);
    }
    Ok((-2.0 * (x - 1.0).powi(2) / xi_t).exp())
}

/// One closed-form factor, evaluated exactly as printed and with the logarithm
/// argument inverted (the two readings of the derivation).
#[derive(Clone, Copy, Debug)]
pub struct FactorEval {
    pub as_printed: f64,
    pub as_printed_valid: bool,
    pub sign_corrected: f64,
    pub sign_corrected_valid: bool,
}

fn factor(scale: f64, offset: f64, log_arg_printed: f64) -> FactorEval {
    let eval = |arg: f64| -> (f64, bool) {
        if arg <= 0.0 {
            return (f64::NAN, false);
        }
        let rad = 0.5 * arg.ln();
        if rad < 0.0 {
            (f64::NAN, false)
        } else {
            (scale * rad.sqrt() + offset, true)
        }
    };
    let (p, pv) = eval(log_arg_printed);
    let (c, cv) = eval(if log_arg_printed > 0.0 { 1.0 / log_arg_printed } else { f64::INFINITY });
    FactorEval {
        as_printed: p,
        as_printed_valid: pv,
        sign_corrected: c,
        sign_corrected_valid: cv,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TheoremFactors {
    pub theta: f64,
    pub delta_alpha: FactorEval,
    pub delta_beta1: FactorEval,
    pub delta_beta2: FactorEval,
}

/// The `(delta_alpha; delta_beta1, delta_beta2)` factors reached after
/// repeated rounding tries with per-try failure probability `theta`.
pub fn theorem2_factors(
    inputs: &BoundInputs,
    theta: f64,
    ef_count: usize,
    dest_count: usize,
) -> Result<TheoremFactors, AnalysisError> {
    if !(0.0..1.0).contains(&theta) {
        return Err(AnalysisError::InvalidTheta(theta));
    }
    let max_delta_beta1 = inputs
        .failing_links
        .iter()
        .map(|l| inputs.delta_beta1[l.index()])
        .fold(0.0f64, f64::max);
    let max_delta_beta2 =
        inputs.delta_beta2.iter().map(|(_, d)| *d).fold(0.0f64, f64::max);

    let alpha = factor(
        if inputs.c_lp > 0.0 { inputs.chi.sqrt() / inputs.c_lp } else { 0.0 },
        inputs.delta_alpha,
        theta / 3.0,
    );
    let beta1 = if ef_count == 0 {
        // no link can violate capacity; the factor is vacuous
        FactorEval {
            as_printed: 1.0,
            as_printed_valid: true,
            sign_corrected: 1.0,
            sign_corrected_valid: true,
        }
    } else {
        factor(inputs.kappa, max_delta_beta1, theta * ef_count as f64 / 3.0)
    };
    let beta2 = if dest_count == 0 || !inputs.l_min.is_finite() {
        FactorEval {
            as_printed: 1.0,
            as_printed_valid: true,
            sign_corrected: 1.0,
            sign_corrected_valid: true,
        }
    } else {
        factor(
            (inputs.lambda_max_global - inputs.lambda_min_global) / inputs.l_min,
            max_delta_beta2,
            theta * dest_count as f64 / 3.0,
        )
    };
    Ok(TheoremFactors { theta, delta_alpha: alpha, delta_beta1: beta1, delta_beta2: beta2 })
}

/// Probability that at least one of `t` independent tries succeeds.
pub fn success_probability(theta: f64, t: u32) -> f64 {
    1.0 - theta.powi(t as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn car_requires_positive_baseline() {
        assert!((car(10.0, 10.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(car(1.0, 0.0), Err(AnalysisError::ZeroBaselineCost)));
    }

    #[test]
    fn hoeffding_capacity_formula() {
        // exp(-2 (0.5 * 2)^2 / 4) = e^{-0.5}
        let v = (-2.0f64 * (0.5 * 2.0f64).powi(2) / 4.0).exp();
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn success_probability_compounds() {
        let p = success_probability(0.5, 10);
        assert!((p - (1.0 - 0.5f64.powi(10))).abs() < 1e-12);
        assert!(p > 0.999);
    }

    #[test]
    fn factor_marks_negative_radicand() {
        // log argument below 1 makes the printed form invalid, the inverted
        // form valid
        let f = factor(1.0, 0.5, 0.25);
        assert!(!f.as_printed_valid);
        assert!(f.sign_corrected_valid);
        assert!((f.sign_corrected - (1.0 * (0.5 * 4.0f64.ln()).sqrt() + 0.5)).abs() < 1e-12);
    }
}
