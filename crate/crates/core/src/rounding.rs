//! Randomized rounding of the decomposed LP flow into an integral
//! orchestration.
//!
//! One embedding is drawn per tree, the forest embedding is composed, and the
//! information flows, cost, capacity relaxation, and end-to-end latencies are
//! evaluated. Tries repeat until the acceptance thresholds are met or the try
//! budget runs out. When the Cartesian product of per-tree decompositions is
//! small it is enumerated exhaustively instead of sampled.

use std::fmt;

use crate::decompose::{self, Decomposition, Embedding};
use crate::formulation::{self, FormulationOptions, LpProblem};
use crate::graph::{AugmentedGraph, LinkId, LinkKind, NodeId};
use crate::rng::StreamRng;
use crate::service::{CommodityId, ServiceGraph};
use crate::solver::{self, LpSolution, SolveBudget, SolveStatus};
use crate::transform::{self, ServiceForest, TransformError};

/// Exhaustive enumeration threshold for the candidate product set.
pub const ENUMERATION_LIMIT: u64 = 4096;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Selection {
    FirstAccepted,
    BestCostAmongTries,
}

#[derive(Clone, Copy, Debug)]
pub struct RoundingParams {
    pub seed: u64,
    pub max_tries: u64,
    /// Candidate accepted when CRF is at most this.
    pub accept_crf: f64,
    /// ... and every bounded latency satisfies `l_T <= relax * bound`.
    pub accept_latency_relax: f64,
    pub selection: Selection,
}

impl Default for RoundingParams {
    fn default() -> Self {
        RoundingParams {
            seed: 0,
            max_tries: 100,
            accept_crf: 1.0,
            accept_latency_relax: 1.0,
            selection: Selection::BestCostAmongTries,
        }
    }
}

/// A composed embedding of the whole forest with its realized flows and
/// metrics.
#[derive(Clone, Debug)]
pub struct ForestEmbedding {
    /// Chosen decomposition entry per tree.
    pub choices: Vec<usize>,
    /// Per forest function, the node it is placed on.
    pub placements: Vec<Option<NodeId>>,
    /// Per forest commodity, its link path.
    pub paths: Vec<Option<Vec<LinkId>>>,
    /// Realized information flow per link.
    pub info_flow: Vec<f64>,
    /// Realized object flow per (object, link), sparse.
    pub object_flow: Vec<(u32, LinkId, f64)>,
    /// Allocated blocks per link (block-based links only).
    pub blocks: Vec<(LinkId, f64)>,
    pub cost: f64,
    /// Max over capacitated links of flow / capacity.
    pub crf: f64,
    /// Local latency per forest commodity.
    pub local_latency: Vec<f64>,
    /// Cumulative latency per forest commodity.
    pub cumulative_latency: Vec<f64>,
    /// Max over bounded destination commodities of `l_T / bound` (0 when no
    /// commodity carries a bound).
    pub latency_relax: f64,
}

impl ForestEmbedding {
    pub fn commodity_crosses(&self, k: CommodityId, link: LinkId) -> bool {
        self.paths[k.index()].as_ref().is_some_and(|p| p.contains(&link))
    }
}

#[derive(Clone, Debug)]
pub enum RoundingError {
    MissingTreeEmbedding { tree: usize },
    InvalidEmbedding { tree: usize, violations: Vec<String> },
}

impl fmt::Display for RoundingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoundingError::MissingTreeEmbedding { tree } => {
                write!(f, "no embedding chosen for tree {tree}")
            }
            RoundingError::InvalidEmbedding { tree, violations } => {
                write!(f, "invalid embedding for tree {tree}: {}", violations.join("; "))
            }
        }
    }
}

impl std::error::Error for RoundingError {}

/// Draws one embedding index from a decomposition by inverse CDF.
pub fn sample(dec: &Decomposition, rng: &mut StreamRng) -> usize {
    let u = rng.next_f64() * dec.total_probability();
    let mut acc = 0.0;
    for (i, (_, p)) in dec.entries.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dec.entries.len() - 1
}

/// Number of allocated blocks covering `flow` on a link with `block_capacity`.
pub fn blocks_for(flow: f64, block_capacity: f64) -> f64 {
    if block_capacity <= 0.0 {
        return 0.0;
    }
    (flow / block_capacity - 1e-9).ceil().max(0.0)
}

/// Composes chosen per-tree embeddings into the forest solution and evaluates
/// flows, cost, CRF, and latencies.
pub fn compose(
    chosen: &[&Embedding],
    forest: &ServiceForest,
    g: &AugmentedGraph,
    opts: &FormulationOptions,
) -> Result<ForestEmbedding, RoundingError> {
    let s = &forest.graph;
    for c in &forest.components {
        let Some(e) = chosen.get(c.index) else {
            return Err(RoundingError::MissingTreeEmbedding { tree: c.index });
        };
        let violations = decompose::validate_embedding(forest, c, g, e);
        if !violations.is_empty() {
            return Err(RoundingError::InvalidEmbedding { tree: c.index, violations });
        }
    }

    let n_links = g.link_count();
    let mut placements: Vec<Option<NodeId>> = vec![None; s.functions().len()];
    let mut paths: Vec<Option<Vec<LinkId>>> = vec![None; s.commodities().len()];
    for e in chosen {
        for (&f, &node) in &e.function_map {
            debug_assert!(placements[f.index()].map_or(true, |n| n == node));
            placements[f.index()] = Some(node);
        }
        for (&k, path) in &e.commodity_map {
            paths[k.index()] = Some(path.clone());
        }
    }

    // object flows: overlapping same-object commodities count once, at the
    // largest rate crossing the link
    let mut object_flow_dense: std::collections::BTreeMap<(u32, u32), f64> = Default::default();
    for k in s.commodities() {
        let Some(path) = &paths[k.id.index()] else { continue };
        for &l in path {
            let rate = effective_rate(g, s, k.id, l, opts.burstiness_enabled);
            if rate <= 0.0 {
                continue;
            }
            let cell = object_flow_dense.entry((k.object.0, l.0)).or_insert(0.0);
            *cell = cell.max(rate);
        }
    }

    let mut info_flow = vec![0.0; n_links];
    for (&(_, l), &v) in &object_flow_dense {
        info_flow[l as usize] += v;
    }

    let mut cost = 0.0;
    let mut blocks = Vec::new();
    for link in g.links() {
        let mu = info_flow[link.id.index()];
        match (opts.resource_blocks, link.blocks) {
            (true, Some(spec)) => {
                let y = blocks_for(mu, spec.block_capacity);
                cost += y * spec.block_cost;
                blocks.push((link.id, y));
            }
            _ => cost += mu * link.unit_cost,
        }
    }

    let mut crf: f64 = 0.0;
    for link in g.capacitated_links() {
        let cap = link.effective_capacity().finite().expect("capacitated");
        if cap > 0.0 {
            crf = crf.max(info_flow[link.id.index()] / cap);
        } else if info_flow[link.id.index()] > 0.0 {
            crf = f64::INFINITY;
        }
    }

    // latency: local sums over the path, cumulative via the join recursion
    let mut local = vec![0.0; s.commodities().len()];
    for k in s.commodities() {
        if let Some(path) = &paths[k.id.index()] {
            local[k.id.index()] = path
                .iter()
                .map(|&l| commodity_link_latency(g, s, k.id, l))
                .sum();
        }
    }
    let mut cumulative = vec![0.0; s.commodities().len()];
    for k in s.commodity_topo_order() {
        let inputs = s.input_commodities(k).expect("dense ids");
        let worst_input =
            inputs.iter().map(|l| cumulative[l.index()]).fold(0.0f64, f64::max);
        cumulative[k.index()] = local[k.index()] + worst_input;
    }
    let mut latency_relax: f64 = 0.0;
    for k in s.commodities() {
        if let Some(bound) = k.latency_bound {
            if bound > 0.0 {
                latency_relax = latency_relax.max(cumulative[k.id.index()] / bound);
            }
        }
    }

    let object_flow =
        object_flow_dense.into_iter().map(|((o, l), v)| (o, LinkId(l), v)).collect();
    Ok(ForestEmbedding {
        choices: chosen.iter().map(|e| e.tree).collect(),
        placements,
        paths,
        info_flow,
        object_flow,
        blocks,
        cost,
        crf,
        local_latency: local,
        cumulative_latency: cumulative,
        latency_relax,
    })
}

/// Rate a commodity imposes on a link, by link kind, with optional burstiness.
pub fn effective_rate(
    g: &AugmentedGraph,
    s: &ServiceGraph,
    k: CommodityId,
    link: LinkId,
    burstiness: bool,
) -> f64 {
    let spec = s.commodity(k);
    let (rate, burst) = match g.link(link).kind {
        LinkKind::Communication => (spec.rates.comm, spec.burstiness.comm),
        LinkKind::ComputationOut => (spec.rates.prod, spec.burstiness.prod),
        LinkKind::ComputationIn => (spec.rates.cons, spec.burstiness.cons),
        LinkKind::Source | LinkKind::Destination => (0.0, 1.0),
    };
    if burstiness {
        rate * burst
    } else {
        rate
    }
}

/// Latency for one unit of `k` over `link`.
pub fn commodity_link_latency(
    g: &AugmentedGraph,
    s: &ServiceGraph,
    k: CommodityId,
    link: LinkId,
) -> f64 {
    let l = g.link(link);
    match l.kind {
        LinkKind::Communication => l.latency,
        LinkKind::ComputationOut => s.commodity(k).proc_delay,
        _ => 0.0,
    }
}

#[derive(Clone, Debug)]
pub struct CandidateSummary {
    pub try_index: u64,
    pub choices: Vec<usize>,
    pub cost: f64,
    pub crf: f64,
    pub latency_relax: f64,
    pub accepted: bool,
}

#[derive(Debug)]
pub struct IdagoResult {
    pub forest: ServiceForest,
    pub problem: LpProblem,
    pub lp: LpSolution,
    pub decompositions: Vec<Decomposition>,
    pub best: ForestEmbedding,
    pub best_try: u64,
    pub tries_used: u64,
    /// False when the try budget ran out without meeting the thresholds; the
    /// best candidate seen is still returned.
    pub accepted: bool,
    /// True when the full Cartesian candidate set was enumerated.
    pub enumerated: bool,
    pub candidates: Vec<CandidateSummary>,
}

#[derive(Debug)]
pub enum IdagoError {
    Transform(TransformError),
    Formulation(formulation::FormulationError),
    LpNotSolved(SolveStatus),
    Decompose(decompose::DecomposeError),
    Rounding(RoundingError),
}

impl fmt::Display for IdagoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdagoError::Transform(e) => write!(f, "{e}"),
            IdagoError::Formulation(e) => write!(f, "{e}"),
            IdagoError::LpNotSolved(s) => write!(f, "relaxation not solved: {s:?}"),
            IdagoError::Decompose(e) => write!(f, "{e}"),
            IdagoError::Rounding(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for IdagoError {}

/// The full pipeline: transform to a forest, solve the LP relaxation,
/// decompose each tree, then sample/enumerate composed embeddings until the
/// acceptance thresholds or the try budget are hit.
pub fn idago(
    g: &AugmentedGraph,
    s: &ServiceGraph,
    params: &RoundingParams,
    opts: &FormulationOptions,
    budget: &SolveBudget,
) -> Result<IdagoResult, IdagoError> {
    let forest = transform::dag_to_forest(s).map_err(IdagoError::Transform)?;
    let mut lp_opts = *opts;
    lp_opts.relaxed = true;
    let problem =
        formulation::build(g, &forest.graph, lp_opts).map_err(IdagoError::Formulation)?;
    let lp = solver::solve_lp(&problem, budget);
    if lp.status != SolveStatus::Optimal {
        return Err(IdagoError::LpNotSolved(lp.status));
    }
    let flows = formulation::flow_table(&problem, g, &forest.graph, &lp.values);

    let mut decompositions = Vec::with_capacity(forest.components.len());
    for c in &forest.components {
        decompositions
            .push(decompose::decompose_tree(&forest, c, g, &flows).map_err(IdagoError::Decompose)?);
    }

    let product: u64 = decompositions
        .iter()
        .map(|d| d.len() as u64)
        .try_fold(1u64, u64::checked_mul)
        .unwrap_or(u64::MAX);
    let enumerated = product <= ENUMERATION_LIMIT;

    let mut candidates: Vec<CandidateSummary> = Vec::new();
    let mut best: Option<(usize, ForestEmbedding)> = None; // candidate index
    let trials: u64 = if enumerated { product } else { params.max_tries };

    for t in 0..trials {
        let choices: Vec<usize> = if enumerated {
            // mixed-radix decoding, first tree is the most significant digit
            let mut rest = t;
            let mut idx = vec![0usize; decompositions.len()];
            for (i, d) in decompositions.iter().enumerate().rev() {
                idx[i] = (rest % d.len() as u64) as usize;
                rest /= d.len() as u64;
            }
            idx
        } else {
            decompositions
                .iter()
                .enumerate()
                .map(|(phi, d)| {
                    let mut rng = StreamRng::for_try(params.seed, t, phi as u64);
                    sample(d, &mut rng)
                })
                .collect()
        };
        let chosen: Vec<&Embedding> = decompositions
            .iter()
            .zip(&choices)
            .map(|(d, &i)| &d.entries[i].0)
            .collect();
        let mut emb = compose(&chosen, &forest, g, opts).map_err(IdagoError::Rounding)?;
        emb.choices = choices.clone();
        let accepted = emb.crf <= params.accept_crf + 1e-9
            && emb.latency_relax <= params.accept_latency_relax + 1e-9;
        candidates.push(CandidateSummary {
            try_index: t,
            choices,
            cost: emb.cost,
            crf: emb.crf,
            latency_relax: emb.latency_relax,
            accepted,
        });

        let replace = match &best {
            None => true,
            Some((bi, b)) => {
                let bc = &candidates[*bi];
                (accepted && !bc.accepted)
                    || (accepted == bc.accepted && emb.cost < b.cost - 1e-12)
            }
        };
        if replace {
            best = Some((candidates.len() - 1, emb));
        }
        if params.selection == Selection::FirstAccepted && accepted {
            break;
        }
    }

    let (best_idx, best_emb) = best.expect("at least one candidate");
    let accepted = candidates[best_idx].accepted;
    Ok(IdagoResult {
        forest,
        problem,
        lp,
        decompositions,
        best_try: candidates[best_idx].try_index,
        tries_used: candidates.len() as u64,
        accepted,
        enumerated,
        candidates,
        best: best_emb,
    })
}
