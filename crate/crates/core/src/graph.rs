//! Cloud-augmented network graph.
//!
//! The physical network is a directed graph of communication nodes and links.
//! Augmentation attaches, per compute cluster, a computation node wired to its
//! host by one computation-in link (memory) and one computation-out link
//! (processing), and per declared endpoint a source or destination node wired
//! by a single zero-cost link. Computation and storage then become capacitated
//! links and every orchestration decision is a flow decision.

use std::collections::HashMap;
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct LinkId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NodeKind {
    Communication,
    Computation,
    Source,
    Destination,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LinkKind {
    Communication,
    /// Host communication node -> computation node; carries consumption
    /// (memory) flow.
    ComputationIn,
    /// Computation node -> host communication node; carries production
    /// (processing) flow.
    ComputationOut,
    Source,
    Destination,
}

/// Link capacity. Source and destination links are `Unbounded`: they act as
/// ingress/egress points and never get a capacity row in the formulation.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum Capacity {
    Finite(f64),
    Unbounded,
}

impl Capacity {
    pub fn finite(self) -> Option<f64> {
        match self {
            Capacity::Finite(c) => Some(c),
            Capacity::Unbounded => None,
        }
    }
}

/// Discrete resource blocks available on a link: up to `max_blocks` blocks of
/// `block_capacity` flow units each, `block_cost` per allocated block.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct BlockSpec {
    pub max_blocks: f64,
    pub block_capacity: f64,
    pub block_cost: f64,
}

#[derive(Clone, Debug)]
pub struct AugmentedLink {
    pub id: LinkId,
    pub tail: NodeId,
    pub head: NodeId,
    pub kind: LinkKind,
    pub capacity: Capacity,
    /// Cost per unit flow per hour.
    pub unit_cost: f64,
    /// Propagation delay in seconds (communication links); zero elsewhere.
    pub latency: f64,
    pub blocks: Option<BlockSpec>,
}

impl AugmentedLink {
    /// Capacity seen by the capacity constraint and by the relaxation factor:
    /// block-based links expose `max_blocks * block_capacity`.
    pub fn effective_capacity(&self) -> Capacity {
        match self.blocks {
            Some(b) => Capacity::Finite(b.max_blocks * b.block_capacity),
            None => self.capacity,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NodeInfo {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
    /// For computation/source/destination nodes, the communication node this
    /// node is attached to.
    pub host: Option<NodeId>,
}

#[derive(Clone, Debug, Default)]
pub struct AugmentedGraph {
    nodes: Vec<NodeInfo>,
    links: Vec<AugmentedLink>,
    in_links: Vec<Vec<LinkId>>,
    out_links: Vec<Vec<LinkId>>,
    labels: HashMap<String, NodeId>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GraphError {
    DuplicateNodeId(String),
    DanglingLinkEndpoint { link: usize, endpoint: usize },
    NegativeCapacityOrCost(String),
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::DuplicateNodeId(l) => write!(f, "duplicate node label {l:?}"),
            GraphError::DanglingLinkEndpoint { link, endpoint } => {
                write!(f, "link {link} references unknown node index {endpoint}")
            }
            GraphError::NegativeCapacityOrCost(what) => {
                write!(f, "negative capacity or cost on {what}")
            }
        }
    }
}

impl std::error::Error for GraphError {}

/// Plain physical network before augmentation.
#[derive(Clone, Debug, Default)]
pub struct BaseNetwork {
    pub nodes: Vec<String>,
    pub links: Vec<BaseLink>,
}

/// A directed communication link of the base network.
#[derive(Clone, Debug)]
pub struct BaseLink {
    pub tail: usize,
    pub head: usize,
    pub capacity: f64,
    pub unit_cost: f64,
    pub latency: f64,
    pub blocks: Option<BlockSpec>,
}

/// One resource dimension of a compute cluster.
#[derive(Clone, Copy, Debug)]
pub enum ResourceSpec {
    Proportional { capacity: Capacity, unit_cost: f64 },
    Blocks(BlockSpec),
}

/// A compute cluster attached to a communication node. A node with both CPU
/// and GPU clusters gets one `ComputeCluster` per cluster type.
#[derive(Clone, Debug)]
pub struct ComputeCluster {
    pub host: usize,
    pub label: String,
    /// Processing resource, exposed as the computation-out link.
    pub proc: ResourceSpec,
    /// Memory resource, exposed as the computation-in link.
    pub mem: ResourceSpec,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EndpointKind {
    Source,
    Destination,
}

/// Declared ingress/egress attachment point.
#[derive(Clone, Debug)]
pub struct EndpointSpec {
    pub host: usize,
    pub label: String,
    pub kind: EndpointKind,
}

impl ResourceSpec {
    fn capacity(&self) -> Capacity {
        match self {
            ResourceSpec::Proportional { capacity, .. } => *capacity,
            ResourceSpec::Blocks(b) => Capacity::Finite(b.max_blocks * b.block_capacity),
        }
    }

    fn unit_cost(&self) -> f64 {
        match self {
            ResourceSpec::Proportional { unit_cost, .. } => *unit_cost,
            ResourceSpec::Blocks(b) => {
                if b.block_capacity > 0.0 {
                    b.block_cost / b.block_capacity
                } else {
                    0.0
                }
            }
        }
    }

    fn blocks(&self) -> Option<BlockSpec> {
        match self {
            ResourceSpec::Proportional { .. } => None,
            ResourceSpec::Blocks(b) => Some(*b),
        }
    }

    fn check_nonnegative(&self, what: &str) -> Result<(), GraphError> {
        let bad = match self {
            ResourceSpec::Proportional { capacity, unit_cost } => {
                *unit_cost < 0.0 || matches!(capacity, Capacity::Finite(c) if *c < 0.0)
            }
            ResourceSpec::Blocks(b) => {
                b.max_blocks < 0.0 || b.block_capacity < 0.0 || b.block_cost < 0.0
            }
        };
        if bad {
            Err(GraphError::NegativeCapacityOrCost(what.to_string()))
        } else {
            Ok(())
        }
    }
}

/// Builds the cloud-augmented graph from a base network, its compute clusters,
/// and the declared source/destination endpoints.
pub fn augment(
    base: &BaseNetwork,
    clusters: &[ComputeCluster],
    endpoints: &[EndpointSpec],
) -> Result<AugmentedGraph, GraphError> {
    let mut g = AugmentedGraph::default();

    for label in &base.nodes {
        g.push_node(label.clone(), NodeKind::Communication, None)?;
    }
    for (i, l) in base.links.iter().enumerate() {
        if l.tail >= base.nodes.len() {
            return Err(GraphError::DanglingLinkEndpoint { link: i, endpoint: l.tail });
        }
        if l.head >= base.nodes.len() {
            return Err(GraphError::DanglingLinkEndpoint { link: i, endpoint: l.head });
        }
        if l.capacity < 0.0 || l.unit_cost < 0.0 {
            return Err(GraphError::NegativeCapacityOrCost(format!("link {i}")));
        }
        if let Some(b) = &l.blocks {
            if b.max_blocks < 0.0 || b.block_capacity < 0.0 || b.block_cost < 0.0 {
                return Err(GraphError::NegativeCapacityOrCost(format!("link {i}")));
            }
        }
        g.push_link(
            NodeId(l.tail as u32),
            NodeId(l.head as u32),
            LinkKind::Communication,
            Capacity::Finite(l.capacity),
            l.unit_cost,
            l.latency,
            l.blocks,
        );
    }

    for (i, c) in clusters.iter().enumerate() {
        if c.host >= base.nodes.len() {
            return Err(GraphError::DanglingLinkEndpoint { link: i, endpoint: c.host });
        }
        c.proc.check_nonnegative(&format!("cluster {} processing", c.label))?;
        c.mem.check_nonnegative(&format!("cluster {} memory", c.label))?;
        let host = NodeId(c.host as u32);
        let p = g.push_node(c.label.clone(), NodeKind::Computation, Some(host))?;
        g.push_link(
            host,
            p,
            LinkKind::ComputationIn,
            c.mem.capacity(),
            c.mem.unit_cost(),
            0.0,
            c.mem.blocks(),
        );
        g.push_link(
            p,
            host,
            LinkKind::ComputationOut,
            c.proc.capacity(),
            c.proc.unit_cost(),
            0.0,
            c.proc.blocks(),
        );
    }

    for (i, e) in endpoints.iter().enumerate() {
        if e.host >= base.nodes.len() {
            return Err(GraphError::DanglingLinkEndpoint { link: i, endpoint: e.host });
        }
        let host = NodeId(e.host as u32);
        match e.kind {
            EndpointKind::Source => {
                let s = g.push_node(e.label.clone(), NodeKind::Source, Some(host))?;
                g.push_link(s, host, LinkKind::Source, Capacity::Unbounded, 0.0, 0.0, None);
            }
            EndpointKind::Destination => {
                let d = g.push_node(e.label.clone(), NodeKind::Destination, Some(host))?;
                g.push_link(host, d, LinkKind::Destination, Capacity::Unbounded, 0.0, 0.0, None);
            }
        }
    }

    Ok(g)
}

impl AugmentedGraph {
    fn push_node(
        &mut self,
        label: String,
        kind: NodeKind,
        host: Option<NodeId>,
    ) -> Result<NodeId, GraphError> {
        if self.labels.contains_key(&label) {
            return Err(GraphError::DuplicateNodeId(label));
        }
        let id = NodeId(self.nodes.len() as u32);
        self.labels.insert(label.clone(), id);
        self.nodes.push(NodeInfo { id, kind, label, host });
        self.in_links.push(Vec::new());
        self.out_links.push(Vec::new());
        Ok(id)
    }

    #[allow(clippy::too_many_arguments)]
    fn push_link(
        &mut self,
        tail: NodeId,
        head: NodeId,
        kind: LinkKind,
        capacity: Capacity,
        unit_cost: f64,
        latency: f64,
        blocks: Option<BlockSpec>,
    ) -> LinkId {
        let id = LinkId(self.links.len() as u32);
        self.links.push(AugmentedLink { id, tail, head, kind, capacity, unit_cost, latency, blocks });
        self.out_links[tail.index()].push(id);
        self.in_links[head.index()].push(id);
        id
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn node(&self, id: NodeId) -> &NodeInfo {
        &self.nodes[id.index()]
    }

    pub fn link(&self, id: LinkId) -> &AugmentedLink {
        &self.links[id.index()]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeInfo> {
        self.nodes.iter()
    }

    pub fn links(&self) -> impl Iterator<Item = &AugmentedLink> {
        self.links.iter()
    }

    pub fn in_links(&self, u: NodeId) -> &[LinkId] {
        &self.in_links[u.index()]
    }

    pub fn out_links(&self, u: NodeId) -> &[LinkId] {
        &self.out_links[u.index()]
    }

    pub fn node_by_label(&self, label: &str) -> Option<NodeId> {
        self.labels.get(label).copied()
    }

    pub fn communication_nodes(&self) -> impl Iterator<Item = &NodeInfo> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Communication)
    }

    pub fn computation_nodes(&self) -> impl Iterator<Item = &NodeInfo> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Computation)
    }

    /// The unique computation-in link of computation node `p`, if wired.
    pub fn computation_in(&self, p: NodeId) -> Option<LinkId> {
        self.in_links(p).iter().copied().find(|l| self.link(*l).kind == LinkKind::ComputationIn)
    }

    /// The unique computation-out link of computation node `p`, if wired.
    pub fn computation_out(&self, p: NodeId) -> Option<LinkId> {
        self.out_links(p).iter().copied().find(|l| self.link(*l).kind == LinkKind::ComputationOut)
    }

    /// The single outgoing link of a source node.
    pub fn source_link(&self, s: NodeId) -> Option<LinkId> {
        self.out_links(s).first().copied()
    }

    /// The single incoming link of a destination node.
    pub fn destination_link(&self, d: NodeId) -> Option<LinkId> {
        self.in_links(d).first().copied()
    }

    /// Links that carry a finite effective capacity.
    pub fn capacitated_links(&self) -> impl Iterator<Item = &AugmentedLink> {
        self.links.iter().filter(|l| l.effective_capacity().finite().is_some())
    }
}

/// Checks every structural invariant and returns the violations, ordered by
/// node id then link id. An empty list means the graph is valid.
pub fn validate(g: &AugmentedGraph) -> Vec<String> {
    let mut out = Vec::new();
    for n in g.nodes() {
        match n.kind {
            NodeKind::Communication => {}
            NodeKind::Computation => {
                let ins: Vec<_> = g.in_links(n.id).iter().map(|l| g.link(*l)).collect();
                let outs: Vec<_> = g.out_links(n.id).iter().map(|l| g.link(*l)).collect();
                if outs.len() != 1 || outs[0].kind != LinkKind::ComputationOut {
                    out.push(format!(
                        "computation node {} has {} ComputationOut links",
                        n.id,
                        outs.iter().filter(|l| l.kind == LinkKind::ComputationOut).count()
                    ));
                }
                if ins.len() != 1 || ins[0].kind != LinkKind::ComputationIn {
                    out.push(format!(
                        "computation node {} has {} ComputationIn links",
                        n.id,
                        ins.iter().filter(|l| l.kind == LinkKind::ComputationIn).count()
                    ));
                }
                if let (Some(i), Some(o)) = (ins.first(), outs.first()) {
                    if i.tail != o.head {
                        out.push(format!(
                            "computation node {} gadget links attach to different hosts",
                            n.id
                        ));
                    } else if n.host != Some(i.tail) {
                        out.push(format!("computation node {} host map mismatch", n.id));
                    }
                }
            }
            NodeKind::Source => {
                if !g.in_links(n.id).is_empty() || g.out_links(n.id).len() != 1 {
                    out.push(format!("source node {} must have exactly one outgoing link", n.id));
                }
            }
            NodeKind::Destination => {
                if !g.out_links(n.id).is_empty() || g.in_links(n.id).len() != 1 {
                    out.push(format!(
                        "destination node {} must have exactly one incoming link",
                        n.id
                    ));
                }
            }
        }
    }
    for l in g.links() {
        if let Capacity::Finite(c) = l.capacity {
            if c < 0.0 {
                out.push(format!("link {} negative capacity", l.id));
            }
        }
        if l.unit_cost < 0.0 {
            out.push(format!("link {} negative cost", l.id));
        }
        let tail_kind = g.node(l.tail).kind;
        let head_kind = g.node(l.head).kind;
        let kind_ok = match l.kind {
            LinkKind::Communication => {
                tail_kind == NodeKind::Communication && head_kind == NodeKind::Communication
            }
            LinkKind::ComputationIn => head_kind == NodeKind::Computation,
            LinkKind::ComputationOut => tail_kind == NodeKind::Computation,
            LinkKind::Source => tail_kind == NodeKind::Source,
            LinkKind::Destination => head_kind == NodeKind::Destination,
        };
        if !kind_ok {
            out.push(format!("link {} kind {:?} inconsistent with endpoints", l.id, l.kind));
        }
        if matches!(l.kind, LinkKind::Source | LinkKind::Destination)
            && (l.unit_cost != 0.0 || l.capacity != Capacity::Unbounded)
        {
            out.push(format!("link {} must be zero-cost and unbounded", l.id));
        }
    }
    out
}
