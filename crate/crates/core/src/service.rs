//! Information-aware service DAG.
//!
//! Functions are vertices, commodities (data streams) are edges. Each
//! commodity carries per-link-kind rates and maps to an information object;
//! several commodities mapping to the same object may overlap in the network,
//! which is what makes the model information-aware.

use std::collections::HashMap;
use std::fmt;

use crate::graph::NodeId;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct FunctionId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CommodityId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ObjectId(pub u32);

impl FunctionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl CommodityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ObjectId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "i{}", self.0)
    }
}

impl fmt::Display for CommodityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k{}", self.0)
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FunctionKind {
    Source,
    Destination,
    Processing,
}

#[derive(Clone, Debug)]
pub struct FunctionSpec {
    pub id: FunctionId,
    pub name: String,
    pub kind: FunctionKind,
    /// Fixed network location; required for source and destination functions
    /// (a Source/Destination node of the augmented graph).
    pub location: Option<NodeId>,
    /// Computation nodes allowed to host this function; empty means all.
    pub allowed_hosts: Vec<NodeId>,
}

/// Per-link-kind values of a commodity: communication rate (Mbps), production
/// rate (Gflops), consumption rate (MB). Zero on source/destination links.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Rates {
    pub comm: f64,
    pub prod: f64,
    pub cons: f64,
}

impl Rates {
    pub fn uniform(v: f64) -> Self {
        Rates { comm: v, prod: v, cons: v }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Rates { comm: self.comm * factor, prod: self.prod * factor, cons: self.cons * factor }
    }
}

impl Default for Rates {
    fn default() -> Self {
        Rates { comm: 0.0, prod: 0.0, cons: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct CommoditySpec {
    pub id: CommodityId,
    pub name: String,
    pub producer: FunctionId,
    pub consumer: FunctionId,
    pub object: ObjectId,
    pub rates: Rates,
    /// Headroom multiplier per link kind; 1 everywhere by default.
    pub burstiness: Rates,
    /// End-to-end latency bound in seconds; only destination commodities may
    /// carry one.
    pub latency_bound: Option<f64>,
    /// Per-unit processing delay applied on computation-out links.
    pub proc_delay: f64,
}

impl CommoditySpec {
    pub fn new(
        id: CommodityId,
        name: impl Into<String>,
        producer: FunctionId,
        consumer: FunctionId,
        object: ObjectId,
        rates: Rates,
    ) -> Self {
        CommoditySpec {
            id,
            name: name.into(),
            producer,
            consumer,
            object,
            rates,
            burstiness: Rates::uniform(1.0),
            latency_bound: None,
            proc_delay: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ServiceError {
    UnknownCommodity(CommodityId),
    DanglingFunction { commodity: usize, function: u32 },
    BadObject { commodity: usize, object: u32 },
}

impl fmt::Display for ServiceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServiceError::UnknownCommodity(k) => write!(f, "unknown commodity {k}"),
            ServiceError::DanglingFunction { commodity, function } => {
                write!(f, "commodity {commodity} references unknown function i{function}")
            }
            ServiceError::BadObject { commodity, object } => {
                write!(f, "commodity {commodity} references unknown object o{object}")
            }
        }
    }
}

impl std::error::Error for ServiceError {}

#[derive(Clone, Debug, Default)]
pub struct ServiceGraph {
    functions: Vec<FunctionSpec>,
    commodities: Vec<CommoditySpec>,
    object_names: Vec<String>,
    incoming: Vec<Vec<CommodityId>>,
    outgoing: Vec<Vec<CommodityId>>,
}

impl ServiceGraph {
    pub fn new(
        functions: Vec<FunctionSpec>,
        commodities: Vec<CommoditySpec>,
        object_names: Vec<String>,
    ) -> Result<Self, ServiceError> {
        let nf = functions.len();
        for (i, k) in commodities.iter().enumerate() {
            for f in [k.producer, k.consumer] {
                if f.index() >= nf {
                    return Err(ServiceError::DanglingFunction { commodity: i, function: f.0 });
                }
            }
            if k.object.index() >= object_names.len() {
                return Err(ServiceError::BadObject { commodity: i, object: k.object.0 });
            }
        }
        let mut incoming = vec![Vec::new(); nf];
        let mut outgoing = vec![Vec::new(); nf];
        for k in &commodities {
            outgoing[k.producer.index()].push(k.id);
            incoming[k.consumer.index()].push(k.id);
        }
        for list in incoming.iter_mut().chain(outgoing.iter_mut()) {
            list.sort();
        }
        Ok(ServiceGraph { functions, commodities, object_names, incoming, outgoing })
    }

    pub fn functions(&self) -> &[FunctionSpec] {
        &self.functions
    }

    pub fn commodities(&self) -> &[CommoditySpec] {
        &self.commodities
    }

    pub fn function(&self, i: FunctionId) -> &FunctionSpec {
        &self.functions[i.index()]
    }

    pub fn commodity(&self, k: CommodityId) -> &CommoditySpec {
        &self.commodities[k.index()]
    }

    pub fn object_names(&self) -> &[String] {
        &self.object_names
    }

    pub fn object_count(&self) -> usize {
        self.object_names.len()
    }

    pub fn incoming(&self, i: FunctionId) -> &[CommodityId] {
        &self.incoming[i.index()]
    }

    pub fn outgoing(&self, i: FunctionId) -> &[CommodityId] {
        &self.outgoing[i.index()]
    }

    /// Input commodities required to produce `k`: the incoming edges of its
    /// producer. Empty exactly for source commodities.
    pub fn input_commodities(&self, k: CommodityId) -> Result<&[CommodityId], ServiceError> {
        if k.index() >= self.commodities.len() {
            return Err(ServiceError::UnknownCommodity(k));
        }
        Ok(self.incoming(self.commodity(k).producer))
    }

    pub fn is_source_commodity(&self, k: CommodityId) -> bool {
        self.function(self.commodity(k).producer).kind == FunctionKind::Source
    }

    pub fn is_destination_commodity(&self, k: CommodityId) -> bool {
        self.function(self.commodity(k).consumer).kind == FunctionKind::Destination
    }

    /// Source node hosting the producer of source commodity `k`.
    pub fn source_node(&self, k: CommodityId) -> Option<NodeId> {
        let p = self.function(self.commodity(k).producer);
        (p.kind == FunctionKind::Source).then_some(p.location).flatten()
    }

    /// Destination node hosting the consumer of destination commodity `k`.
    pub fn destination_node(&self, k: CommodityId) -> Option<NodeId> {
        let c = self.function(self.commodity(k).consumer);
        (c.kind == FunctionKind::Destination).then_some(c.location).flatten()
    }

    pub fn source_commodities(&self) -> impl Iterator<Item = &CommoditySpec> {
        self.commodities.iter().filter(|k| self.is_source_commodity(k.id))
    }

    pub fn destination_commodities(&self) -> impl Iterator<Item = &CommoditySpec> {
        self.commodities.iter().filter(|k| self.is_destination_commodity(k.id))
    }

    /// Topological order of functions, or `None` when the commodity digraph
    /// has a cycle.
    pub fn topo_order(&self) -> Option<Vec<FunctionId>> {
        let n = self.functions.len();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.incoming[i].len()).collect();
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            order.push(FunctionId(u as u32));
            for &k in &self.outgoing[u] {
                let v = self.commodity(k).consumer.index();
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push(v);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Commodities in an order where every input precedes its consumer's
    /// outputs. Panics on cyclic graphs; validate first.
    pub fn commodity_topo_order(&self) -> Vec<CommodityId> {
        let fns = self.topo_order().expect("service graph must be acyclic");
        let mut pos = vec![0usize; self.functions.len()];
        for (rank, f) in fns.iter().enumerate() {
            pos[f.index()] = rank;
        }
        let mut ks: Vec<CommodityId> = self.commodities.iter().map(|k| k.id).collect();
        ks.sort_by_key(|k| (pos[self.commodity(*k).producer.index()], k.index()));
        ks
    }

    /// Connected components of the commodity digraph (ignoring direction).
    /// Returns per-function component indices and the component count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let n = self.functions.len();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = count;
            while let Some(u) = stack.pop() {
                for &k in self.outgoing[u].iter().chain(self.incoming[u].iter()) {
                    for f in [self.commodity(k).producer, self.commodity(k).consumer] {
                        if comp[f.index()] == usize::MAX {
                            comp[f.index()] = count;
                            stack.push(f.index());
                        }
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    /// Replaces the information mapping by a bijection: one fresh object per
    /// commodity. This is the information-unaware baseline input.
    pub fn make_info_unaware(&self) -> ServiceGraph {
        let object_names: Vec<String> =
            self.commodities.iter().map(|k| format!("obj:{}", k.name)).collect();
        let commodities = self
            .commodities
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let mut k = k.clone();
                k.object = ObjectId(i as u32);
                k
            })
            .collect();
        ServiceGraph::new(self.functions.clone(), commodities, object_names)
            .expect("relabeling objects preserves validity")
    }
}

/// Reports every semantic violation of the service DAG invariants.
pub fn validate_dag(s: &ServiceGraph) -> Vec<String> {
    let mut out = Vec::new();
    for f in s.functions() {
        match f.kind {
            FunctionKind::Source => {
                if !s.incoming(f.id).is_empty() {
                    out.push(format!("source function {} has incoming commodities", f.name));
                }
                if f.location.is_none() {
                    out.push(format!("source function {} missing fixed location", f.name));
                }
            }
            FunctionKind::Destination => {
                if !s.outgoing(f.id).is_empty() {
                    out.push(format!("destination function {} has outgoing commodities", f.name));
                }
                if f.location.is_none() {
                    out.push(format!("destination function {} missing fixed location", f.name));
                }
            }
            FunctionKind::Processing => {
                if s.incoming(f.id).is_empty() || s.outgoing(f.id).is_empty() {
                    out.push(format!(
                        "processing function {} must have inputs and outputs",
                        f.name
                    ));
                }
            }
        }
    }
    for k in s.commodities() {
        if k.producer == k.consumer {
            out.push(format!("commodity {} is a self-loop", k.name));
        }
        if k.rates.comm < 0.0 || k.rates.prod < 0.0 || k.rates.cons < 0.0 {
            out.push(format!("commodity {} has a negative rate", k.name));
        }
        if k.burstiness.comm < 1.0 || k.burstiness.prod < 1.0 || k.burstiness.cons < 1.0 {
            out.push(format!("commodity {} burstiness below 1", k.name));
        }
        if k.latency_bound.is_some() && !s.is_destination_commodity(k.id) {
            out.push(format!(
                "commodity {} has a latency bound but is not a destination commodity",
                k.name
            ));
        }
    }
    let mut mapped = vec![false; s.object_count()];
    for k in s.commodities() {
        mapped[k.object.index()] = true;
    }
    for (o, used) in mapped.iter().enumerate() {
        if !used {
            out.push(format!("object {} unmapped", s.object_names()[o]));
        }
    }
    if s.topo_order().is_none() {
        out.push(format!("cycle: {}", cycle_witness(s).join(",")));
    }
    out
}

/// Finds one directed cycle in the commodity digraph (function names).
fn cycle_witness(s: &ServiceGraph) -> Vec<String> {
    let n = s.functions().len();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut parent: HashMap<usize, usize> = HashMap::new();
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state[start] = 1;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            let outs = s.outgoing(FunctionId(u as u32));
            if *next >= outs.len() {
                state[u] = 2;
                stack.pop();
                continue;
            }
            let k = outs[*next];
            *next += 1;
            let v = s.commodity(k).consumer.index();
            if state[v] == 1 {
                // unwind u -> ... -> v
                let mut cycle = vec![v];
                let mut cur = u;
                while cur != v {
                    cycle.push(cur);
                    cur = parent[&cur];
                }
                cycle.reverse();
                return cycle.iter().map(|&i| s.functions()[i].name.clone()).collect();
            }
            if state[v] == 0 {
                state[v] = 1;
                parent.insert(v, u);
                stack.push((v, 0));
            }
        }
    }
    Vec::new()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fun(id: u32, name: &str, kind: FunctionKind, loc: Option<u32>) -> FunctionSpec {
        FunctionSpec {
            id: FunctionId(id),
            name: name.into(),
            kind,
            location: loc.map(NodeId),
            allowed_hosts: Vec::new(),
        }
    }

    fn chain() -> ServiceGraph {
        // s -> f -> d
        let functions = vec![
            fun(0, "s", FunctionKind::Source, Some(10)),
            fun(1, "f", FunctionKind::Processing, None),
            fun(2, "d", FunctionKind::Destination, Some(11)),
        ];
        let commodities = vec![
            CommoditySpec::new(CommodityId(0), "s->f", FunctionId(0), FunctionId(1), ObjectId(0), Rates::uniform(1.0)),
            CommoditySpec::new(CommodityId(1), "f->d", FunctionId(1), FunctionId(2), ObjectId(1), Rates::uniform(2.0)),
        ];
        ServiceGraph::new(functions, commodities, vec!["o0".into(), "o1".into()]).unwrap()
    }

    #[test]
    fn chain_is_valid() {
        let s = chain();
        assert!(validate_dag(&s).is_empty());
        assert_eq!(s.input_commodities(CommodityId(1)).unwrap(), &[CommodityId(0)]);
        assert_eq!(s.input_commodities(CommodityId(0)).unwrap(), &[] as &[CommodityId]);
        assert!(s.input_commodities(CommodityId(9)).is_err());
    }

    #[test]
    fn cycle_reported_with_witness() {
        let functions = vec![
            fun(0, "f1", FunctionKind::Processing, None),
            fun(1, "f2", FunctionKind::Processing, None),
        ];
        let commodities = vec![
            CommoditySpec::new(CommodityId(0), "f1->f2", FunctionId(0), FunctionId(1), ObjectId(0), Rates::uniform(1.0)),
            CommoditySpec::new(CommodityId(1), "f2->f1", FunctionId(1), FunctionId(0), ObjectId(1), Rates::uniform(1.0)),
        ];
        let s = ServiceGraph::new(functions, commodities, vec!["a".into(), "b".into()]).unwrap();
        let v = validate_dag(&s);
        assert!(v.iter().any(|m| m == "cycle: f1,f2" || m == "cycle: f2,f1"), "{v:?}");
    }

    #[test]
    fn unmapped_object_reported() {
        let mut s = chain();
        s = ServiceGraph::new(
            s.functions().to_vec(),
            s.commodities().to_vec(),
            vec!["o0".into(), "o1".into(), "o3".into()],
        )
        .unwrap();
        let v = validate_dag(&s);
        assert_eq!(v, vec!["object o3 unmapped".to_string()]);
    }

    #[test]
    fn info_unaware_gives_one_object_per_commodity() {
        let s = chain();
        let u = s.make_info_unaware();
        assert_eq!(u.object_count(), u.commodities().len());
        assert_eq!(u.commodities().len(), s.commodities().len());
        for (a, b) in s.commodities().iter().zip(u.commodities()) {
            assert_eq!(a.rates, b.rates);
            assert_eq!(a.latency_bound, b.latency_bound);
        }
        let empty = ServiceGraph::default().make_info_unaware();
        assert_eq!(empty.commodities().len(), 0);
    }

    #[test]
    fn source_and_processing_partition() {
        let s = chain();
        let ks: Vec<_> = s.source_commodities().map(|k| k.id).collect();
        assert_eq!(ks, vec![CommodityId(0)]);
        let n_source = ks.len();
        let n_proc = s.commodities().iter().filter(|k| !s.is_source_commodity(k.id)).count();
        assert_eq!(n_source + n_proc, s.commodities().len());
    }

    #[test]
    fn components_counts() {
        let s = chain();
        let (_, n) = s.components();
        assert_eq!(n, 1);
    }
}
