//! Decomposition of a fractional tree flow into a convex combination of
//! valid embeddings.
//!
//! Each iteration extracts one embedding: the root destination function is
//! pinned to its fixed node, the tree is traversed backward, and every
//! commodity is mapped to a positive-residual path found by depth-first search
//! from the consumer's ingestion point (largest residual first, ties by lowest
//! link id). The embedding's probability is the minimum residual over all
//! mapped links, which is then subtracted; the loop ends when no flow reaches
//! the destination anymore.

use std::collections::BTreeMap;
use std::fmt;

use crate::graph::{AugmentedGraph, LinkId, LinkKind, NodeId, NodeKind};
use crate::service::{CommodityId, FunctionId, FunctionKind};
use crate::transform::{ComponentView, ServiceForest};
use crate::FLOW_EPS;

/// Residual destination flow below this level terminates the extraction loop;
/// it matches the solver's feasibility tolerance rather than `FLOW_EPS`.
const TERMINATION_TOL: f64 = 1e-6;
const MAX_EXTRACTIONS: usize = 1_000_000;

/// A valid embedding of one service tree: functions to nodes, commodities to
/// simple link paths.
#[derive(Clone, PartialEq, Debug)]
pub struct Embedding {
    pub tree: usize,
    pub function_map: BTreeMap<FunctionId, NodeId>,
    pub commodity_map: BTreeMap<CommodityId, Vec<LinkId>>,
}

/// Convex combination of embeddings reconstructing the tree's LP flow.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub tree: usize,
    pub entries: Vec<(Embedding, f64)>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DecomposeError {
    NoPositivePath { commodity: CommodityId },
    NonConvergence { tree: usize },
}

impl fmt::Display for DecomposeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecomposeError::NoPositivePath { commodity } => {
                write!(f, "no positive-residual path for commodity {commodity}")
            }
            DecomposeError::NonConvergence { tree } => {
                write!(f, "decomposition of tree {tree} did not converge")
            }
        }
    }
}

impl std::error::Error for DecomposeError {}

/// Decomposes the LP flow of one tree. `flows` is the full per-(commodity,
/// link) table of the forest LP solution; only this tree's rows are touched.
pub fn decompose_tree(
    forest: &ServiceForest,
    component: &ComponentView,
    g: &AugmentedGraph,
    flows: &[Vec<f64>],
) -> Result<Decomposition, DecomposeError> {
    let mut residual: BTreeMap<CommodityId, Vec<f64>> = component
        .commodities
        .iter()
        .map(|&k| (k, flows[k.index()].clone()))
        .collect();

    let s = &forest.graph;
    let dest_links: Vec<(CommodityId, LinkId)> = component
        .destination_commodities
        .iter()
        .map(|&k| {
            let d = s.destination_node(k).expect("destination commodities have fixed nodes");
            (k, g.destination_link(d).expect("destination nodes have one incoming link"))
        })
        .collect();

    let flow_to_dest = |residual: &BTreeMap<CommodityId, Vec<f64>>| -> f64 {
        dest_links.iter().map(|&(k, l)| residual[&k][l.index()]).sum()
    };

    let mut entries: Vec<(Embedding, f64)> = Vec::new();
    let mut rounds = 0usize;
    while flow_to_dest(&residual) > TERMINATION_TOL * dest_links.len() as f64 {
        rounds += 1;
        if rounds > MAX_EXTRACTIONS {
            return Err(DecomposeError::NonConvergence { tree: component.index });
        }

        let mut function_map: BTreeMap<FunctionId, NodeId> = BTreeMap::new();
        let mut commodity_map: BTreeMap<CommodityId, Vec<LinkId>> = BTreeMap::new();
        let root_node = s
            .function(component.root)
            .location
            .expect("tree roots are destination functions with fixed nodes");
        function_map.insert(component.root, root_node);

        let mut queue: Vec<FunctionId> = vec![component.root];
        let mut head = 0;
        while head < queue.len() {
            let j = queue[head];
            head += 1;
            let consumer_node = function_map[&j];
            let incoming: Vec<CommodityId> = component
                .commodities
                .iter()
                .copied()
                .filter(|&k| s.commodity(k).consumer == j)
                .collect();
            for k in incoming {
                let (path, producer_node) =
                    map_commodity(forest, k, consumer_node, &residual[&k], g)?;
                let producer = s.commodity(k).producer;
                if let Some(&prev) = function_map.get(&producer) {
                    debug_assert_eq!(prev, producer_node, "shared producer placed twice");
                } else {
                    function_map.insert(producer, producer_node);
                    queue.push(producer);
                }
                commodity_map.insert(k, path);
            }
        }

        let mut p = f64::INFINITY;
        for (k, path) in &commodity_map {
            let r = &residual[k];
            for l in path {
                p = p.min(r[l.index()]);
            }
        }
        if !p.is_finite() || p <= 0.0 {
            return Err(DecomposeError::NonConvergence { tree: component.index });
        }
        let p = p.min(1.0);
        for (k, path) in &commodity_map {
            let r = residual.get_mut(k).expect("commodity in component");
            for l in path {
                r[l.index()] = (r[l.index()] - p).max(0.0);
            }
        }

        let embedding = Embedding { tree: component.index, function_map, commodity_map };
        match entries.iter_mut().find(|(e, _)| *e == embedding) {
            Some((_, q)) => *q += p,
            None => entries.push((embedding, p)),
        }
    }

    // absorb termination slack so probabilities sum to one exactly
    let total: f64 = entries.iter().map(|(_, p)| *p).sum();
    if !entries.is_empty() && (total - 1.0).abs() > 1e-12 && total > 0.0 {
        for (_, p) in &mut entries {
            *p /= total;
        }
    }

    Ok(Decomposition { tree: component.index, entries })
}

/// Finds a positive-residual simple path for commodity `k` ending at the
/// ingestion point of `consumer_node` and starting at a production point: the
/// fixed source node's emission link for source commodities, a computation-out
/// link otherwise. Returns the path (production to ingestion) and the
/// production node.
pub fn map_commodity(
    forest: &ServiceForest,
    k: CommodityId,
    consumer_node: NodeId,
    residual: &[f64],
    g: &AugmentedGraph,
) -> Result<(Vec<LinkId>, NodeId), DecomposeError> {
    let s = &forest.graph;
    let ingestion = match g.node(consumer_node).kind {
        NodeKind::Destination => g.destination_link(consumer_node),
        NodeKind::Computation => g.computation_in(consumer_node),
        _ => None,
    }
    .ok_or(DecomposeError::NoPositivePath { commodity: k })?;
    if residual[ingestion.index()] <= FLOW_EPS {
        return Err(DecomposeError::NoPositivePath { commodity: k });
    }

    let is_source = s.is_source_commodity(k);
    let start = g.link(ingestion).tail;

    // candidate in-links of a node, best first
    let candidates = |u: NodeId| -> Vec<LinkId> {
        let mut c: Vec<LinkId> = g
            .in_links(u)
            .iter()
            .copied()
            .filter(|l| residual[l.index()] > FLOW_EPS)
            .filter(|l| {
                let kind = g.link(*l).kind;
                if is_source {
                    matches!(kind, LinkKind::Communication | LinkKind::Source)
                } else {
                    matches!(kind, LinkKind::Communication | LinkKind::ComputationOut)
                }
            })
            .collect();
        c.sort_by(|a, b| {
            residual[b.index()]
                .partial_cmp(&residual[a.index()])
                .unwrap()
                .then(a.index().cmp(&b.index()))
        });
        c
    };

    struct Frame {
        node: NodeId,
        cands: Vec<LinkId>,
        next: usize,
        entered_by: Option<LinkId>,
    }

    let mut visited = vec![false; g.node_count()];
    visited[start.index()] = true;
    let mut frames =
        vec![Frame { node: start, cands: candidates(start), next: 0, entered_by: None }];

    while let Some(frame) = frames.last_mut() {
        if frame.next >= frame.cands.len() {
            let popped = frames.pop().expect("nonempty");
            visited[popped.node.index()] = false;
            continue;
        }
        let link = frame.cands[frame.next];
        frame.next += 1;
        let kind = g.link(link).kind;
        if (is_source && kind == LinkKind::Source)
            || (!is_source && kind == LinkKind::ComputationOut)
        {
            // production point reached; unwind the chosen links
            let mut path: Vec<LinkId> = vec![link];
            for f in frames.iter().rev() {
                if let Some(l) = f.entered_by {
                    path.push(l);
                }
            }
            path.push(ingestion);
            let producer_node = g.link(link).tail;
            return Ok((path, producer_node));
        }
        // communication link: walk to its tail
        let tail = g.link(link).tail;
        if visited[tail.index()] {
            continue;
        }
        visited[tail.index()] = true;
        frames.push(Frame { node: tail, cands: candidates(tail), next: 0, entered_by: Some(link) });
    }

    Err(DecomposeError::NoPositivePath { commodity: k })
}

/// Definition-level validity check of an embedding; returns violations.
pub fn validate_embedding(
    forest: &ServiceForest,
    component: &ComponentView,
    g: &AugmentedGraph,
    e: &Embedding,
) -> Vec<String> {
    let s = &forest.graph;
    let mut out = Vec::new();
    for &f in &component.functions {
        let spec = s.function(f);
        let Some(&node) = e.function_map.get(&f) else {
            out.push(format!("function {} not mapped", spec.name));
            continue;
        };
        match spec.kind {
            FunctionKind::Source | FunctionKind::Destination => {
                if spec.location != Some(node) {
                    out.push(format!("function {} not at its fixed location", spec.name));
                }
            }
            FunctionKind::Processing => {
                if g.node(node).kind != NodeKind::Computation {
                    out.push(format!("function {} not on a computation node", spec.name));
                } else if !spec.allowed_hosts.is_empty() && !spec.allowed_hosts.contains(&node) {
                    out.push(format!("function {} on a disallowed host", spec.name));
                }
            }
        }
    }
    for &k in &component.commodities {
        let spec = s.commodity(k);
        let Some(path) = e.commodity_map.get(&k) else {
            out.push(format!("commodity {} not mapped", spec.name));
            continue;
        };
        if path.is_empty() {
            out.push(format!("commodity {} mapped to an empty path", spec.name));
            continue;
        }
        for w in path.windows(2) {
            if g.link(w[0]).head != g.link(w[1]).tail {
                out.push(format!("commodity {} path is disconnected", spec.name));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        if !path.iter().all(|l| seen.insert(*l)) {
            out.push(format!("commodity {} path repeats a link", spec.name));
        }
        let first = g.link(path[0]);
        let last = g.link(*path.last().expect("nonempty"));
        let producer_at = e.function_map.get(&spec.producer);
        let consumer_at = e.function_map.get(&spec.consumer);
        let start_ok = match s.function(spec.producer).kind {
            FunctionKind::Source => {
                first.kind == LinkKind::Source && producer_at == Some(&first.tail)
            }
            _ => first.kind == LinkKind::ComputationOut && producer_at == Some(&first.tail),
        };
        if !start_ok {
            out.push(format!("commodity {} does not start at its producer", spec.name));
        }
        let end_ok = match s.function(spec.consumer).kind {
            FunctionKind::Destination => {
                last.kind == LinkKind::Destination && consumer_at == Some(&last.head)
            }
            _ => last.kind == LinkKind::ComputationIn && consumer_at == Some(&last.head),
        };
        if !end_ok {
            out.push(format!("commodity {} does not end at its consumer", spec.name));
        }
    }
    out
}

/// Checks that the convex combination reproduces the input flow table on every
/// link of this tree's commodities within `tol`.
pub fn reconstruction_error(
    dec: &Decomposition,
    component: &ComponentView,
    g: &AugmentedGraph,
    flows: &[Vec<f64>],
) -> f64 {
    let mut worst: f64 = 0.0;
    for &k in &component.commodities {
        for link in g.links() {
            let mut mass = 0.0;
            for (e, p) in &dec.entries {
                if e.commodity_map.get(&k).is_some_and(|path| path.contains(&link.id)) {
                    mass += p;
                }
            }
            worst = worst.max((mass - flows[k.index()][link.id.index()]).abs());
        }
    }
    worst
}
