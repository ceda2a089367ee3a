//! Sparse mixed-integer program for joint placement, routing, and resource
//! allocation.
//!
//! Variables: binary commodity flows `f` per (commodity, link), object flows
//! `muo` per (object, link), total information flow `mu` per link, optional
//! local/cumulative latency variables per commodity, and optional integer
//! block counts `y` per block-based link. Placement is implicit: a commodity
//! crossing a computation-out link is produced at that cluster.

use std::collections::HashMap;
use std::fmt;

use crate::graph::{AugmentedGraph, Capacity, LinkId, LinkKind, NodeId, NodeKind};
use crate::service::{CommodityId, FunctionKind, ObjectId, ServiceGraph};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum VariableKey {
    /// Binary commodity flow f over a link.
    Flow { commodity: CommodityId, link: LinkId },
    /// Information object flow over a link.
    ObjectFlow { object: ObjectId, link: LinkId },
    /// Total information flow over a link.
    InfoFlow { link: LinkId },
    /// Local latency of a commodity.
    LocalLatency { commodity: CommodityId },
    /// Cumulative latency of a commodity.
    CumulativeLatency { commodity: CommodityId },
    /// Number of allocated resource blocks on a link.
    Blocks { link: LinkId },
}

impl VariableKey {
    pub fn name(&self) -> String {
        match self {
            VariableKey::Flow { commodity, link } => format!("f_{}_{}", commodity, link),
            VariableKey::ObjectFlow { object, link } => format!("muo_{}_{}", object, link),
            VariableKey::InfoFlow { link } => format!("mu_{}", link),
            VariableKey::LocalLatency { commodity } => format!("ll_{}", commodity),
            VariableKey::CumulativeLatency { commodity } => format!("lt_{}", commodity),
            VariableKey::Blocks { link } => format!("y_{}", link),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// Which model rule generated a row.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RowTag {
    Conservation { node: NodeId, commodity: CommodityId },
    Chaining { node: NodeId, commodity: CommodityId, input: CommodityId },
    RateCoupling { link: LinkId, commodity: CommodityId },
    ObjectSum { link: LinkId },
    BlockCover { link: LinkId },
    LocalLatency { commodity: CommodityId },
    CumulativeInit { commodity: CommodityId },
    CumulativeStep { commodity: CommodityId, input: CommodityId },
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowTag::Conservation { node, commodity } => write!(f, "cons_{node}_{commodity}"),
            RowTag::Chaining { node, commodity, input } => {
                write!(f, "chain_{node}_{commodity}_{input}")
            }
            RowTag::RateCoupling { link, commodity } => write!(f, "rate_{link}_{commodity}"),
            RowTag::ObjectSum { link } => write!(f, "osum_{link}"),
            RowTag::BlockCover { link } => write!(f, "bcov_{link}"),
            RowTag::LocalLatency { commodity } => write!(f, "llat_{commodity}"),
            RowTag::CumulativeInit { commodity } => write!(f, "clat0_{commodity}"),
            RowTag::CumulativeStep { commodity, input } => {
                write!(f, "clat_{commodity}_{input}")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub tag: RowTag,
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct FormulationOptions {
    /// When false, every commodity is treated as its own information object.
    pub info_aware: bool,
    pub latency_enabled: bool,
    pub resource_blocks: bool,
    pub burstiness_enabled: bool,
    /// LP relaxation: binaries become continuous in [0, 1], blocks continuous.
    pub relaxed: bool,
}

impl Default for FormulationOptions {
    fn default() -> Self {
        FormulationOptions {
            info_aware: true,
            latency_enabled: false,
            resource_blocks: false,
            burstiness_enabled: false,
            relaxed: false,
        }
    }
}

impl FormulationOptions {
    pub fn relaxed(mut self) -> Self {
        self.relaxed = true;
        self
    }
}

#[derive(Clone, Debug)]
pub struct LpProblem {
    pub variables: Vec<VariableKey>,
    index: HashMap<VariableKey, usize>,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub options: FormulationOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FormulationError {
    UnresolvableEndpoint { commodity: String },
    ZeroBlockCapacity { link: LinkId },
    UnknownVariable(VariableKey),
}

impl fmt::Display for FormulationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormulationError::UnresolvableEndpoint { commodity } => {
                write!(f, "commodity {commodity} has no resolvable source/destination node")
            }
            FormulationError::ZeroBlockCapacity { link } => {
                write!(f, "link {link} has zero block capacity")
            }
            FormulationError::UnknownVariable(k) => write!(f, "unknown variable {}", k.name()),
        }
    }
}

impl std::error::Error for FormulationError {}

impl LpProblem {
    /// Assembles a problem from raw parts; used by tests and ad-hoc models.
    pub fn from_parts(
        variables: Vec<VariableKey>,
        objective: Vec<f64>,
        rows: Vec<Row>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        integer: Vec<bool>,
        options: FormulationOptions,
    ) -> LpProblem {
        let index = variables.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        LpProblem { variables, index, objective, rows, lower, upper, integer, options }
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn variable_index(&self, key: VariableKey) -> Result<usize, FormulationError> {
        self.index.get(&key).copied().ok_or(FormulationError::UnknownVariable(key))
    }

    pub fn variable_key(&self, column: usize) -> VariableKey {
        self.variables[column]
    }

    pub fn variable_name(&self, column: usize) -> String {
        self.variables[column].name()
    }

    /// Objective value of an assignment.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest relative violation over all rows and bounds.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let mut lhs = 0.0;
            let mut scale: f64 = 1.0;
            for &(j, a) in &row.coeffs {
                lhs += a * x[j];
                scale = scale.max(a.abs() * x[j].abs());
            }
            scale = scale.max(row.rhs.abs()).max(1.0);
            let gap = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(gap / scale);
        }
        for (j, &v) in x.iter().enumerate() {
            let scale = v.abs().max(1.0);
            worst = worst.max((self.lower[j] - v) / scale);
            if self.upper[j].is_finite() {
                worst = worst.max((v - self.upper[j]) / scale);
            }
        }
        worst
    }
}

/// Expected row count for a built problem, by construction rule. Kept next to
/// the builder so tests can assert the documented closed form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RowCounts {
    pub conservation: usize,
    pub chaining: usize,
    pub rate_coupling: usize,
    pub object_sum: usize,
    pub block_cover: usize,
    pub local_latency: usize,
    pub cumulative_init: usize,
    pub cumulative_step: usize,
}

impl RowCounts {
    pub fn total(&self) -> usize {
        self.conservation
            + self.chaining
            + self.rate_coupling
            + self.object_sum
            + self.block_cover
            + self.local_latency
            + self.cumulative_init
            + self.cumulative_step
    }

    pub fn of(p: &LpProblem) -> RowCounts {
        let mut c = RowCounts::default();
        for r in &p.rows {
            match r.tag {
                RowTag::Conservation { .. } => c.conservation += 1,
                RowTag::Chaining { .. } => c.chaining += 1,
                RowTag::RateCoupling { .. } => c.rate_coupling += 1,
                RowTag::ObjectSum { .. } => c.object_sum += 1,
                RowTag::BlockCover { .. } => c.block_cover += 1,
                RowTag::LocalLatency { .. } => c.local_latency += 1,
                RowTag::CumulativeInit { .. } => c.cumulative_init += 1,
                RowTag::CumulativeStep { .. } => c.cumulative_step += 1,
            }
        }
        c
    }
}

struct Builder<'a> {
    g: &'a AugmentedGraph,
    s: &'a ServiceGraph,
    opts: FormulationOptions,
    /// Object of each commodity under the active information model.
    object_of: Vec<ObjectId>,
}

impl<'a> Builder<'a> {
    /// Rate imposed by commodity `k` on `link` (zero on source/destination
    /// links), including the burstiness multiplier when enabled.
    fn effective_rate(&self, k: CommodityId, link: LinkId) -> f64 {
        let spec = self.s.commodity(k);
        let (rate, burst) = match self.g.link(link).kind {
            LinkKind::Communication => (spec.rates.comm, spec.burstiness.comm),
            LinkKind::ComputationOut => (spec.rates.prod, spec.burstiness.prod),
            LinkKind::ComputationIn => (spec.rates.cons, spec.burstiness.cons),
            LinkKind::Source | LinkKind::Destination => (0.0, 1.0),
        };
        if self.opts.burstiness_enabled {
            rate * burst
        } else {
            rate
        }
    }

    /// Latency to move one unit of `k` over `link`.
    fn link_latency(&self, k: CommodityId, link: LinkId) -> f64 {
        let l = self.g.link(link);
        match l.kind {
            LinkKind::Communication => l.latency,
            LinkKind::ComputationOut => self.s.commodity(k).proc_delay,
            _ => 0.0,
        }
    }

    fn allowed_host(&self, f: crate::service::FunctionId, p: NodeId) -> bool {
        let spec = self.s.function(f);
        spec.allowed_hosts.is_empty() || spec.allowed_hosts.contains(&p)
    }

    /// Bounds of the flow variable for (k, link): fixed by the source and
    /// destination rules, zero-forced on gadget links the commodity cannot
    /// legally use, free binary otherwise.
    fn flow_bounds(&self, k: CommodityId, link: LinkId) -> (f64, f64) {
        let l = self.g.link(link);
        let spec = self.s.commodity(k);
        match l.kind {
            LinkKind::Source => {
                let fixed_one = self.s.is_source_commodity(k)
                    && self.s.source_node(k) == Some(l.tail);
                if fixed_one {
                    (1.0, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            LinkKind::Destination => {
                let fixed_one = self.s.is_destination_commodity(k)
                    && self.s.destination_node(k) == Some(l.head);
                if fixed_one {
                    (1.0, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            LinkKind::ComputationOut => {
                let producible = !self.s.is_source_commodity(k)
                    && self.allowed_host(spec.producer, l.tail);
                if producible {
                    (0.0, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            LinkKind::ComputationIn => {
                let consumable = self.s.function(spec.consumer).kind == FunctionKind::Processing
                    && self.allowed_host(spec.consumer, l.head);
                if consumable {
                    (0.0, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            LinkKind::Communication => (0.0, 1.0),
        }
    }
}

/// Builds the program for service `s` over augmented graph `g`.
pub fn build(
    g: &AugmentedGraph,
    s: &ServiceGraph,
    opts: FormulationOptions,
) -> Result<LpProblem, FormulationError> {
    let (object_of, object_count) = if opts.info_aware {
        (s.commodities().iter().map(|k| k.object).collect::<Vec<_>>(), s.object_count())
    } else {
        // Information-unaware: one synthetic object per commodity.
        ((0..s.commodities().len()).map(|i| ObjectId(i as u32)).collect(), s.commodities().len())
    };
    let b = Builder { g, s, opts, object_of };

    for k in s.commodities() {
        if s.is_source_commodity(k.id) && b.s.source_node(k.id).is_none() {
            return Err(FormulationError::UnresolvableEndpoint { commodity: k.name.clone() });
        }
        if s.is_destination_commodity(k.id) && b.s.destination_node(k.id).is_none() {
            return Err(FormulationError::UnresolvableEndpoint { commodity: k.name.clone() });
        }
    }
    if opts.resource_blocks {
        for l in g.links() {
            if let Some(spec) = l.blocks {
                if spec.block_capacity <= 0.0 {
                    return Err(FormulationError::ZeroBlockCapacity { link: l.id });
                }
            }
        }
    }

    let n_links = g.link_count();

    let mut variables: Vec<VariableKey> = Vec::new();
    let mut lower: Vec<f64> = Vec::new();
    let mut upper: Vec<f64> = Vec::new();
    let mut integer: Vec<bool> = Vec::new();

    // f variables, commodity-major.
    for k in s.commodities() {
        for link in g.links() {
            let (lo, hi) = b.flow_bounds(k.id, link.id);
            variables.push(VariableKey::Flow { commodity: k.id, link: link.id });
            lower.push(lo);
            upper.push(hi);
            integer.push(!opts.relaxed && lo < hi);
        }
    }

    // Object flow variables where some commodity of the object can impose a
    // positive rate on the link.
    let mut object_links: Vec<Vec<bool>> = vec![vec![false; n_links]; object_count];
    for k in s.commodities() {
        for link in g.links() {
            let (_, hi) = b.flow_bounds(k.id, link.id);
            if hi > 0.0 && b.effective_rate(k.id, link.id) > 0.0 {
                object_links[b.object_of[k.id.index()].index()][link.id.index()] = true;
            }
        }
    }
    for (o, links) in object_links.iter().enumerate() {
        for (l, &alive) in links.iter().enumerate() {
            if alive {
                variables.push(VariableKey::ObjectFlow {
                    object: ObjectId(o as u32),
                    link: LinkId(l as u32),
                });
                lower.push(0.0);
                upper.push(f64::INFINITY);
                integer.push(false);
            }
        }
    }

    // Total information flow per link, capacity as an upper bound.
    for link in g.links() {
        variables.push(VariableKey::InfoFlow { link: link.id });
        lower.push(0.0);
        upper.push(match link.effective_capacity() {
            Capacity::Finite(c) => c,
            Capacity::Unbounded => f64::INFINITY,
        });
        integer.push(false);
    }

    // Block variables.
    if opts.resource_blocks {
        for link in g.links() {
            if let Some(spec) = link.blocks {
                variables.push(VariableKey::Blocks { link: link.id });
                lower.push(0.0);
                upper.push(spec.max_blocks);
                integer.push(!opts.relaxed);
            }
        }
    }

    // Latency variables; cumulative latency bounded by the commodity's limit.
    if opts.latency_enabled {
        for k in s.commodities() {
            variables.push(VariableKey::LocalLatency { commodity: k.id });
            lower.push(0.0);
            upper.push(f64::INFINITY);
            integer.push(false);
        }
        for k in s.commodities() {
            variables.push(VariableKey::CumulativeLatency { commodity: k.id });
            lower.push(0.0);
            upper.push(k.latency_bound.unwrap_or(f64::INFINITY));
            integer.push(false);
        }
    }

    let index: HashMap<VariableKey, usize> =
        variables.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let col = |key: VariableKey| -> usize { index[&key] };
    let fcol = |k: CommodityId, l: LinkId| -> usize {
        k.index() * n_links + l.index()
    };

    let mut rows: Vec<Row> = Vec::new();

    // Flow conservation at communication nodes.
    for node in g.nodes().filter(|n| n.kind == NodeKind::Communication) {
        for k in s.commodities() {
            let mut coeffs = Vec::new();
            for &l in g.in_links(node.id) {
                coeffs.push((fcol(k.id, l), 1.0));
            }
            for &l in g.out_links(node.id) {
                coeffs.push((fcol(k.id, l), -1.0));
            }
            rows.push(Row {
                coeffs,
                relation: Relation::Eq,
                rhs: 0.0,
                tag: RowTag::Conservation { node: node.id, commodity: k.id },
            });
        }
    }

    // Chaining at computation nodes: an output leaves a cluster exactly when
    // every input enters it.
    for k in s.commodities() {
        if s.is_source_commodity(k.id) {
            continue;
        }
        let inputs = s.input_commodities(k.id).expect("commodity ids are dense");
        for p in g.computation_nodes() {
            if !b.allowed_host(k.producer, p.id) {
                continue;
            }
            let out = g.computation_out(p.id).expect("gadget invariant");
            let inl = g.computation_in(p.id).expect("gadget invariant");
            for &input in inputs {
                rows.push(Row {
                    coeffs: vec![(fcol(k.id, out), 1.0), (fcol(input, inl), -1.0)],
                    relation: Relation::Eq,
                    rhs: 0.0,
                    tag: RowTag::Chaining { node: p.id, commodity: k.id, input },
                });
            }
        }
    }

    // Sized commodity flows of one object may overlap: each is bounded by the
    // object flow, not summed into it.
    for link in g.links() {
        for k in s.commodities() {
            let (_, hi) = b.flow_bounds(k.id, link.id);
            let rate = b.effective_rate(k.id, link.id);
            if hi <= 0.0 || rate <= 0.0 {
                continue;
            }
            let o = b.object_of[k.id.index()];
            rows.push(Row {
                coeffs: vec![
                    (fcol(k.id, link.id), rate),
                    (col(VariableKey::ObjectFlow { object: o, link: link.id }), -1.0),
                ],
                relation: Relation::Le,
                rhs: 0.0,
                tag: RowTag::RateCoupling { link: link.id, commodity: k.id },
            });
        }
    }

    // Total flow per link is the sum of its object flows.
    for link in g.links() {
        let mut coeffs = Vec::new();
        for o in 0..object_count {
            if object_links[o][link.id.index()] {
                coeffs.push((
                    col(VariableKey::ObjectFlow { object: ObjectId(o as u32), link: link.id }),
                    1.0,
                ));
            }
        }
        if coeffs.is_empty() {
            continue;
        }
        coeffs.push((col(VariableKey::InfoFlow { link: link.id }), -1.0));
        rows.push(Row {
            coeffs,
            relation: Relation::Le,
            rhs: 0.0,
            tag: RowTag::ObjectSum { link: link.id },
        });
    }

    // Enough blocks to cover the allocated flow.
    if opts.resource_blocks {
        for link in g.links() {
            if let Some(spec) = link.blocks {
                rows.push(Row {
                    coeffs: vec![
                        (col(VariableKey::InfoFlow { link: link.id }), 1.0),
                        (col(VariableKey::Blocks { link: link.id }), -spec.block_capacity),
                    ],
                    relation: Relation::Le,
                    rhs: 0.0,
                    tag: RowTag::BlockCover { link: link.id },
                });
            }
        }
    }

    if opts.latency_enabled {
        for k in s.commodities() {
            let mut coeffs = Vec::new();
            for link in g.links() {
                let (_, hi) = b.flow_bounds(k.id, link.id);
                let lat = b.link_latency(k.id, link.id);
                if hi > 0.0 && lat > 0.0 {
                    coeffs.push((fcol(k.id, link.id), lat));
                }
            }
            coeffs.push((col(VariableKey::LocalLatency { commodity: k.id }), -1.0));
            rows.push(Row {
                coeffs,
                relation: Relation::Eq,
                rhs: 0.0,
                tag: RowTag::LocalLatency { commodity: k.id },
            });
        }
        for k in s.commodities() {
            let lt = col(VariableKey::CumulativeLatency { commodity: k.id });
            let ll = col(VariableKey::LocalLatency { commodity: k.id });
            if s.is_source_commodity(k.id) {
                rows.push(Row {
                    coeffs: vec![(lt, 1.0), (ll, -1.0)],
                    relation: Relation::Eq,
                    rhs: 0.0,
                    tag: RowTag::CumulativeInit { commodity: k.id },
                });
            } else {
                for &input in s.input_commodities(k.id).expect("dense ids") {
                    let lti = col(VariableKey::CumulativeLatency { commodity: input });
                    rows.push(Row {
                        coeffs: vec![(lt, 1.0), (ll, -1.0), (lti, -1.0)],
                        relation: Relation::Ge,
                        rhs: 0.0,
                        tag: RowTag::CumulativeStep { commodity: k.id, input },
                    });
                }
            }
        }
    }

    // Objective: block cost where blocks are enabled, proportional flow cost
    // elsewhere.
    let mut objective = vec![0.0; variables.len()];
    for link in g.links() {
        if opts.resource_blocks && link.blocks.is_some() {
            let spec = link.blocks.unwrap();
            objective[col(VariableKey::Blocks { link: link.id })] = spec.block_cost;
        } else if link.unit_cost != 0.0 {
            objective[col(VariableKey::InfoFlow { link: link.id })] = link.unit_cost;
        }
    }

    Ok(LpProblem { variables, index, objective, rows, lower, upper, integer, options: opts })
}

/// Extracts the per-(commodity, link) flow table from a solution vector.
pub fn flow_table(p: &LpProblem, g: &AugmentedGraph, s: &ServiceGraph, x: &[f64]) -> Vec<Vec<f64>> {
    let n_links = g.link_count();
    let mut table = vec![vec![0.0; n_links]; s.commodities().len()];
    for (j, key) in p.variables.iter().enumerate() {
        if let VariableKey::Flow { commodity, link } = key {
            table[commodity.index()][link.index()] = x[j];
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{augment, BaseLink, BaseNetwork, ComputeCluster, EndpointKind, EndpointSpec, ResourceSpec};
    use crate::service::{CommoditySpec, FunctionId, FunctionSpec, Rates};

    fn tiny() -> (AugmentedGraph, ServiceGraph) {
        let base = BaseNetwork {
            nodes: vec!["a".into(), "b".into()],
            links: vec![
                BaseLink { tail: 0, head: 1, capacity: 100.0, unit_cost: 1.0, latency: 0.0, blocks: None },
                BaseLink { tail: 1, head: 0, capacity: 100.0, unit_cost: 1.0, latency: 0.0, blocks: None },
            ],
        };
        let clusters = [
            ComputeCluster {
                host: 0,
                label: "pa".into(),
                proc: ResourceSpec::Proportional { capacity: Capacity::Finite(50.0), unit_cost: 2.0 },
                mem: ResourceSpec::Proportional { capacity: Capacity::Finite(50.0), unit_cost: 0.0 },
            },
            ComputeCluster {
                host: 1,
                label: "pb".into(),
                proc: ResourceSpec::Proportional { capacity: Capacity::Finite(50.0), unit_cost: 5.0 },
                mem: ResourceSpec::Proportional { capacity: Capacity::Finite(50.0), unit_cost: 0.0 },
            },
        ];
        let eps = [
            EndpointSpec { host: 0, label: "src".into(), kind: EndpointKind::Source },
            EndpointSpec { host: 0, label: "dst".into(), kind: EndpointKind::Destination },
        ];
        let g = augment(&base, &clusters, &eps).unwrap();

        let src = g.node_by_label("src").unwrap();
        let dst = g.node_by_label("dst").unwrap();
        let functions = vec![
            FunctionSpec { id: FunctionId(0), name: "s".into(), kind: FunctionKind::Source, location: Some(src), allowed_hosts: vec![] },
            FunctionSpec { id: FunctionId(1), name: "f".into(), kind: FunctionKind::Processing, location: None, allowed_hosts: vec![] },
            FunctionSpec { id: FunctionId(2), name: "d".into(), kind: FunctionKind::Destination, location: Some(dst), allowed_hosts: vec![] },
        ];
        let commodities = vec![
            CommoditySpec::new(CommodityId(0), "s->f", FunctionId(0), FunctionId(1), ObjectId(0), Rates::uniform(1.0)),
            CommoditySpec::new(CommodityId(1), "f->d", FunctionId(1), FunctionId(2), ObjectId(1), Rates::uniform(1.0)),
        ];
        let s = ServiceGraph::new(functions, commodities, vec!["o0".into(), "o1".into()]).unwrap();
        (g, s)
    }

    #[test]
    fn variable_index_round_trips() {
        let (g, s) = tiny();
        let p = build(&g, &s, FormulationOptions::default()).unwrap();
        for (i, key) in p.variables.iter().enumerate() {
            assert_eq!(p.variable_index(*key).unwrap(), i);
            assert_eq!(p.variable_key(i), *key);
        }
        // first commodity, first link gets the first column
        assert_eq!(
            p.variable_index(VariableKey::Flow { commodity: CommodityId(0), link: LinkId(0) })
                .unwrap(),
            0
        );
    }

    #[test]
    fn blocks_variable_absent_without_blocks() {
        let (g, s) = tiny();
        let p = build(&g, &s, FormulationOptions::default()).unwrap();
        assert!(matches!(
            p.variable_index(VariableKey::Blocks { link: LinkId(0) }),
            Err(FormulationError::UnknownVariable(_))
        ));
    }

    #[test]
    fn source_and_destination_fixings() {
        let (g, s) = tiny();
        let p = build(&g, &s, FormulationOptions::default()).unwrap();
        let src_link = g.source_link(g.node_by_label("src").unwrap()).unwrap();
        let dst_link = g.destination_link(g.node_by_label("dst").unwrap()).unwrap();
        let j0 = p
            .variable_index(VariableKey::Flow { commodity: CommodityId(0), link: src_link })
            .unwrap();
        assert_eq!((p.lower[j0], p.upper[j0]), (1.0, 1.0));
        let j1 = p
            .variable_index(VariableKey::Flow { commodity: CommodityId(1), link: dst_link })
            .unwrap();
        assert_eq!((p.lower[j1], p.upper[j1]), (1.0, 1.0));
        // the source commodity cannot exit any computation cluster
        for pnode in g.computation_nodes() {
            let out = g.computation_out(pnode.id).unwrap();
            let j = p
                .variable_index(VariableKey::Flow { commodity: CommodityId(0), link: out })
                .unwrap();
            assert_eq!((p.lower[j], p.upper[j]), (0.0, 0.0));
        }
    }

    #[test]
    fn row_counts_follow_documented_form() {
        let (g, s) = tiny();
        let p = build(&g, &s, FormulationOptions::default()).unwrap();
        let c = RowCounts::of(&p);
        // conservation: |V_comm| * |K|
        assert_eq!(c.conservation, 2 * 2);
        // chaining: for k1 (the only processed commodity) over 2 clusters, 1 input
        assert_eq!(c.chaining, 2);
        // no latency rows by default
        assert_eq!(c.local_latency + c.cumulative_init + c.cumulative_step, 0);
        assert_eq!(c.total(), p.rows.len());
    }

    #[test]
    fn relaxed_build_has_no_integers() {
        let (g, s) = tiny();
        let p = build(&g, &s, FormulationOptions::default().relaxed()).unwrap();
        assert!(p.integer.iter().all(|b| !b));
    }
}
