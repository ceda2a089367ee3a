//! Shared test support: random instance generation, a placement-and-routing
//! enumeration oracle, and a fixed fractional instance. All oracles here are
//! independent of the solver and formulation code paths they are used to
//! check.

#![allow(dead_code)]

use idago_core::formulation::{self, FormulationOptions};
use idago_core::graph::{
    NodeKind,
    augment, AugmentedGraph, BaseLink, BaseNetwork, BlockSpec, Capacity, ComputeCluster,
    EndpointKind, EndpointSpec, LinkId, LinkKind, NodeId, ResourceSpec,
};
use idago_core::rng::StreamRng;
use idago_core::rounding::effective_rate;
use idago_core::service::{
    CommodityId, CommoditySpec, FunctionId, FunctionKind, FunctionSpec, ObjectId, Rates,
    ServiceGraph,
};
use idago_core::solver::{self, SolveBudget, SolveStatus};

pub struct GenParams {
    pub n_comm: usize,
    pub extra_links: usize,
    pub n_compute: usize,
    pub n_sources: usize,
    pub n_processing: usize,
    pub n_dests: usize,
    pub extra_commodities: usize,
    /// Chance (percent) that a commodity reuses the object of an earlier
    /// commodity with the same producer, creating multicast streams.
    pub shared_object_pct: u64,
    /// Tighten one loaded link to this fraction of its LP flow; `None` keeps
    /// everything uncapacitated enough to never bind.
    pub tighten: Option<f64>,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_comm: 6,
            extra_links: 3,
            n_compute: 3,
            n_sources: 2,
            n_processing: 3,
            n_dests: 2,
            extra_commodities: 2,
            shared_object_pct: 40,
            tighten: None,
        }
    }
}

pub struct Instance {
    pub graph: AugmentedGraph,
    pub service: ServiceGraph,
}

struct NetworkPlan {
    base: BaseNetwork,
    clusters: Vec<ComputeCluster>,
    endpoints: Vec<EndpointSpec>,
}

impl NetworkPlan {
    fn build(&self) -> AugmentedGraph {
        augment(&self.base, &self.clusters, &self.endpoints).expect("generated network is valid")
    }
}

/// Generates a connected network and a valid service DAG over it.
pub fn generate(seed: u64, params: &GenParams) -> Instance {
    let mut rng = StreamRng::new(seed);
    let mut plan = gen_network(&mut rng, params);
    let service = gen_service(&mut rng, &mut plan, params);
    let mut graph = plan.build();
    let service = bind_locations(&graph, service);

    if let Some(factor) = params.tighten {
        if let Some(tightened) = tighten_network(&plan, &graph, &service, factor) {
            graph = tightened;
        }
    }
    Instance { graph, service }
}

fn gen_network(rng: &mut StreamRng, params: &GenParams) -> NetworkPlan {
    let n = params.n_comm.max(2);
    let nodes: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut links = Vec::new();
    let add = |tail: usize, head: usize, rng: &mut StreamRng, links: &mut Vec<BaseLink>| {
        let cost = 1.0 + (rng.next_u64() % 20) as f64;
        links.push(BaseLink {
            tail,
            head,
            capacity: 1e6,
            unit_cost: cost,
            latency: 0.001 * (1 + rng.next_u64() % 20) as f64,
            blocks: None,
        });
        links.push(BaseLink {
            tail: head,
            head: tail,
            capacity: 1e6,
            unit_cost: cost,
            latency: 0.001 * (1 + rng.next_u64() % 20) as f64,
            blocks: None,
        });
    };
    // random spanning tree keeps it connected
    for i in 1..n {
        let parent = (rng.next_u64() % i as u64) as usize;
        add(parent, i, rng, &mut links);
    }
    for _ in 0..params.extra_links {
        let a = (rng.next_u64() % n as u64) as usize;
        let b = (rng.next_u64() % n as u64) as usize;
        if a != b {
            add(a, b, rng, &mut links);
        }
    }

    let mut clusters = Vec::new();
    for c in 0..params.n_compute.min(n) {
        // spread clusters over distinct nodes
        let host = (c * n) / params.n_compute.max(1);
        clusters.push(ComputeCluster {
            host,
            label: format!("v{host}_cpu"),
            proc: ResourceSpec::Proportional {
                capacity: Capacity::Finite(1e6),
                unit_cost: 1.0 + (rng.next_u64() % 10) as f64,
            },
            mem: ResourceSpec::Proportional {
                capacity: Capacity::Finite(1e6),
                unit_cost: (rng.next_u64() % 3) as f64,
            },
        });
    }
    NetworkPlan { base: BaseNetwork { nodes, links }, clusters, endpoints: Vec::new() }
}

fn gen_service(rng: &mut StreamRng, plan: &mut NetworkPlan, params: &GenParams) -> ServiceGraph {
    let n_comm = plan.base.nodes.len();
    let n_src = params.n_sources.max(1);
    let n_proc = params.n_processing;
    let n_dst = params.n_dests.max(1);

    let mut functions = Vec::new();
    for i in 0..n_src {
        let host = (rng.next_u64() % n_comm as u64) as usize;
        plan.endpoints.push(EndpointSpec {
            host,
            label: format!("ep_s{i}"),
            kind: EndpointKind::Source,
        });
        functions.push((format!("s{i}"), FunctionKind::Source));
    }
    for i in 0..n_proc {
        functions.push((format!("p{i}"), FunctionKind::Processing));
    }
    for i in 0..n_dst {
        let host = (rng.next_u64() % n_comm as u64) as usize;
        plan.endpoints.push(EndpointSpec {
            host,
            label: format!("ep_d{i}"),
            kind: EndpointKind::Destination,
        });
        functions.push((format!("d{i}"), FunctionKind::Destination));
    }
    let src_range = 0..n_src;
    let proc_range = n_src..n_src + n_proc;
    let dst_range = n_src + n_proc..n_src + n_proc + n_dst;

    // edges respect the (sources, ordered processing, destinations) order
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for p in proc_range.clone() {
        let lo = if p == proc_range.start { src_range.clone() } else { src_range.start..p };
        let span = lo.end - lo.start;
        let producer = lo.start + (rng.next_u64() % span as u64) as usize;
        edges.push((producer, p));
        let hi = (p + 1)..dst_range.end;
        let span = hi.end - hi.start;
        let consumer = hi.start + (rng.next_u64() % span as u64) as usize;
        edges.push((p, consumer));
    }
    for d in dst_range.clone() {
        if !edges.iter().any(|&(_, c)| c == d) {
            let span = dst_range.start;
            let producer = (rng.next_u64() % span as u64) as usize;
            edges.push((producer, d));
        }
    }
    for s in src_range.clone() {
        if !edges.iter().any(|&(p, _)| p == s) {
            let lo = src_range.end;
            let span = dst_range.end - lo;
            let consumer = lo + (rng.next_u64() % span as u64) as usize;
            edges.push((s, consumer));
        }
    }
    for _ in 0..params.extra_commodities {
        let producer = (rng.next_u64() % dst_range.start as u64) as usize;
        let lo = producer.max(src_range.end - 1) + 1;
        if lo >= dst_range.end {
            continue;
        }
        let consumer = lo + (rng.next_u64() % (dst_range.end - lo) as u64) as usize;
        if consumer == producer || edges.contains(&(producer, consumer)) {
            continue;
        }
        edges.push((producer, consumer));
    }
    edges.sort();
    edges.dedup();

    // objects: same-producer commodities may share the producer's output object
    let mut object_names: Vec<String> = Vec::new();
    let mut commodities = Vec::new();
    let mut producer_object: Vec<Option<usize>> = vec![None; functions.len()];
    for (i, &(p, c)) in edges.iter().enumerate() {
        let object = match producer_object[p] {
            Some(o) if rng.next_u64() % 100 < params.shared_object_pct => o,
            _ => {
                object_names.push(format!("o{i}"));
                let o = object_names.len() - 1;
                producer_object[p] = Some(o);
                o
            }
        };
        let rates = Rates {
            comm: 1.0 + (rng.next_u64() % 10) as f64,
            prod: 1.0 + (rng.next_u64() % 10) as f64,
            cons: 1.0 + (rng.next_u64() % 10) as f64,
        };
        commodities.push(CommoditySpec::new(
            CommodityId(i as u32),
            format!("{}->{}", functions[p].0, functions[c].0),
            FunctionId(p as u32),
            FunctionId(c as u32),
            ObjectId(object as u32),
            rates,
        ));
    }

    let functions = functions
        .into_iter()
        .enumerate()
        .map(|(i, (name, kind))| FunctionSpec {
            id: FunctionId(i as u32),
            name,
            kind,
            location: None,
            allowed_hosts: Vec::new(),
        })
        .collect();
    ServiceGraph::new(functions, commodities, object_names).expect("generated service is valid")
}

/// Resolves source/destination function locations to their endpoint nodes.
fn bind_locations(graph: &AugmentedGraph, service: ServiceGraph) -> ServiceGraph {
    let mut src_i = 0usize;
    let mut dst_i = 0usize;
    let functions = service
        .functions()
        .iter()
        .map(|f| {
            let mut f = f.clone();
            match f.kind {
                FunctionKind::Source => {
                    f.location = graph.node_by_label(&format!("ep_s{src_i}"));
                    src_i += 1;
                }
                FunctionKind::Destination => {
                    f.location = graph.node_by_label(&format!("ep_d{dst_i}"));
                    dst_i += 1;
                }
                FunctionKind::Processing => {}
            }
            f
        })
        .collect();
    ServiceGraph::new(
        functions,
        service.commodities().to_vec(),
        service.object_names().to_vec(),
    )
    .expect("binding locations preserves validity")
}

/// Shrinks the most loaded communication link to `factor` of its LP flow so
/// the relaxation goes fractional, keeping the LP feasible.
fn tighten_network(
    plan: &NetworkPlan,
    graph: &AugmentedGraph,
    service: &ServiceGraph,
    factor: f64,
) -> Option<AugmentedGraph> {
    let forest = idago_core::transform::dag_to_forest(service).ok()?;
    let opts = FormulationOptions { relaxed: true, ..FormulationOptions::default() };
    let p = formulation::build(graph, &forest.graph, opts).ok()?;
    let lp = solver::solve_lp(&p, &SolveBudget::default());
    if lp.status != SolveStatus::Optimal {
        return None;
    }
    // flows per base-network link index (base links come first, in order)
    let mut load = vec![0.0; plan.base.links.len()];
    for (i, cell) in load.iter_mut().enumerate() {
        let key = formulation::VariableKey::InfoFlow { link: LinkId(i as u32) };
        *cell = lp.value(&p, key);
    }
    let (target, flow) = load
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, &f)| (i, f))?;
    if flow <= 0.0 {
        return None;
    }
    let mut base = plan.base.clone();
    base.links[target].capacity = flow * factor;
    let candidate = augment(&base, &plan.clusters, &plan.endpoints).ok()?;
    let p2 = formulation::build(&candidate, &forest.graph, opts).ok()?;
    let lp2 = solver::solve_lp(&p2, &SolveBudget::default());
    (lp2.status == SolveStatus::Optimal).then_some(candidate)
}

/// Exhaustive placement x shortest-path-routing oracle for small instances
/// with ample capacities and one object per commodity. Returns the optimal
/// total cost, or `None` when some function has no feasible placement.
pub fn enumeration_oracle(g: &AugmentedGraph, s: &ServiceGraph) -> Option<f64> {
    let compute: Vec<NodeId> = g.computation_nodes().map(|n| n.id).collect();
    let processing: Vec<FunctionId> = s
        .functions()
        .iter()
        .filter(|f| f.kind == FunctionKind::Processing)
        .map(|f| f.id)
        .collect();
    if compute.is_empty() && !processing.is_empty() {
        return None;
    }

    let mut best: Option<f64> = None;
    let mut assignment = vec![0usize; processing.len()];
    loop {
        let placement: std::collections::HashMap<FunctionId, NodeId> = processing
            .iter()
            .zip(&assignment)
            .map(|(&f, &i)| (f, compute[i]))
            .collect();
        let mut total = 0.0;
        let mut feasible = true;
        for k in s.commodities() {
            let start = match s.function(k.producer).kind {
                FunctionKind::Source => s.function(k.producer).location,
                _ => placement.get(&k.producer).copied(),
            };
            let end = match s.function(k.consumer).kind {
                FunctionKind::Destination => s.function(k.consumer).location,
                _ => placement.get(&k.consumer).copied(),
            };
            let (Some(start), Some(end)) = (start, end) else {
                feasible = false;
                break;
            };
            match shortest_path_cost(g, s, k.id, start, end) {
                Some(c) => total += c,
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible {
            best = Some(best.map_or(total, |b: f64| b.min(total)));
        }

        // next assignment in the mixed-radix counter
        let mut d = 0;
        loop {
            if d >= assignment.len() {
                return best;
            }
            assignment[d] += 1;
            if assignment[d] < compute.len() {
                break;
            }
            assignment[d] = 0;
            d += 1;
        }
    }
}

/// Rate-weighted cheapest route for commodity `k` from its production point
/// to its consumption point: the emission leg (a computation-out or source
/// link), a shortest communication path between the two host nodes, and the
/// ingestion leg. A co-located producer and consumer still pay both gadget
/// legs, since production and consumption always cross their cluster links.
fn shortest_path_cost(
    g: &AugmentedGraph,
    s: &ServiceGraph,
    k: CommodityId,
    start: NodeId,
    end: NodeId,
) -> Option<f64> {
    let (emit_cost, from) = match g.node(start).kind {
        NodeKind::Source => {
            let l = g.source_link(start)?;
            (g.link(l).unit_cost * effective_rate(g, s, k, l, false), g.link(l).head)
        }
        NodeKind::Computation => {
            let l = g.computation_out(start)?;
            (g.link(l).unit_cost * effective_rate(g, s, k, l, false), g.link(l).head)
        }
        _ => return None,
    };
    let (ingest_cost, to) = match g.node(end).kind {
        NodeKind::Destination => {
            let l = g.destination_link(end)?;
            (g.link(l).unit_cost * effective_rate(g, s, k, l, false), g.link(l).tail)
        }
        NodeKind::Computation => {
            let l = g.computation_in(end)?;
            (g.link(l).unit_cost * effective_rate(g, s, k, l, false), g.link(l).tail)
        }
        _ => return None,
    };

    // Dijkstra over communication links only
    let n = g.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[from.index()] = 0.0;
    loop {
        let mut u = None;
        let mut best = f64::INFINITY;
        for i in 0..n {
            if !done[i] && dist[i] < best {
                best = dist[i];
                u = Some(i);
            }
        }
        let Some(u) = u else { break };
        done[u] = true;
        for &l in g.out_links(NodeId(u as u32)) {
            let link = g.link(l);
            if link.kind != LinkKind::Communication {
                continue;
            }
            let w = link.unit_cost * effective_rate(g, s, k, l, false);
            let v = link.head.index();
            if dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
            }
        }
    }
    dist[to.index()].is_finite().then(|| emit_cost + dist[to.index()] + ingest_cost)
}

/// A deterministic instance whose LP relaxation is fractional: one relay
/// commodity and one processed chain, split over parallel middle routes by
/// tight capacities and balanced cluster limits.
pub fn fixed_fractional_instance() -> Instance {
    fixed_instance(false)
}

/// Same shape with block-priced middle links and clusters.
pub fn fixed_fractional_block_instance() -> Instance {
    fixed_instance(true)
}

fn fixed_instance(blocks: bool) -> Instance {
    let mk_blocks = |cap: f64| {
        blocks.then_some(BlockSpec { max_blocks: 4.0, block_capacity: cap / 4.0, block_cost: 1.0 })
    };
    let nodes = vec!["in".to_string(), "m1".into(), "m2".into(), "outn".into()];
    let mut links = Vec::new();
    let wire = |tail: usize, head: usize, capacity: f64, cost: f64, links: &mut Vec<BaseLink>| {
        links.push(BaseLink {
            tail,
            head,
            capacity,
            unit_cost: cost,
            latency: 0.010,
            blocks: mk_blocks(capacity),
        });
    };
    // two parallel forward routes with capacity below the commodity rate
    wire(0, 1, 6.0, 1.0, &mut links);
    wire(0, 2, 6.0, 1.0, &mut links);
    wire(1, 3, 6.0, 1.0, &mut links);
    wire(2, 3, 6.0, 1.0, &mut links);

    let cluster = |host: usize, label: &str, cap: f64, cost: f64| ComputeCluster {
        host,
        label: label.into(),
        proc: match mk_blocks(cap) {
            Some(b) => ResourceSpec::Blocks(b),
            None => ResourceSpec::Proportional { capacity: Capacity::Finite(cap), unit_cost: cost },
        },
        mem: ResourceSpec::Proportional { capacity: Capacity::Finite(1e6), unit_cost: 0.0 },
    };
    let clusters =
        vec![cluster(1, "m1_cpu", 6.0, 1.0), cluster(2, "m2_cpu", 6.0, 1.0)];
    let endpoints = vec![
        EndpointSpec { host: 0, label: "ep_s0".into(), kind: EndpointKind::Source },
        EndpointSpec { host: 0, label: "ep_s1".into(), kind: EndpointKind::Source },
        EndpointSpec { host: 3, label: "ep_d0".into(), kind: EndpointKind::Destination },
        EndpointSpec { host: 3, label: "ep_d1".into(), kind: EndpointKind::Destination },
    ];
    let plan = NetworkPlan { base: BaseNetwork { nodes, links }, clusters, endpoints };
    let graph = plan.build();

    let fun = |id: u32, name: &str, kind, label: Option<&str>| FunctionSpec {
        id: FunctionId(id),
        name: name.into(),
        kind,
        location: label.and_then(|l| graph.node_by_label(l)),
        allowed_hosts: Vec::new(),
    };
    let functions = vec![
        fun(0, "s0", FunctionKind::Source, Some("ep_s0")),
        fun(1, "s1", FunctionKind::Source, Some("ep_s1")),
        fun(2, "proc", FunctionKind::Processing, None),
        fun(3, "d0", FunctionKind::Destination, Some("ep_d0")),
        fun(4, "d1", FunctionKind::Destination, Some("ep_d1")),
    ];
    let mut relay = CommoditySpec::new(
        CommodityId(0),
        "s0->d0",
        FunctionId(0),
        FunctionId(3),
        ObjectId(0),
        Rates { comm: 4.0, prod: 0.0, cons: 0.0 },
    );
    relay.latency_bound = Some(0.05);
    let feed = CommoditySpec::new(
        CommodityId(1),
        "s1->proc",
        FunctionId(1),
        FunctionId(2),
        ObjectId(1),
        Rates { comm: 4.0, prod: 0.0, cons: 2.0 },
    );
    let mut out = CommoditySpec::new(
        CommodityId(2),
        "proc->d1",
        FunctionId(2),
        FunctionId(4),
        ObjectId(2),
        Rates { comm: 4.0, prod: 4.0, cons: 0.0 },
    );
    out.latency_bound = Some(0.08);
    let service = ServiceGraph::new(
        functions,
        vec![relay, feed, out],
        vec!["rel".into(), "raw".into(), "proc_out".into()],
    )
    .expect("fixed instance is valid");
    Instance { graph, service }
}

/// Joint-Bernoulli enumeration of the max-rate law; the independent oracle
/// for the closed-form pmf.
pub fn enumerate_max_pmf(members: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let n = members.len();
    assert!(n <= 20);
    let mut pmf: std::collections::BTreeMap<u64, f64> = Default::default();
    for mask in 0..(1u32 << n) {
        let mut prob = 1.0;
        let mut value = 0.0f64;
        for (i, &(rate, q)) in members.iter().enumerate() {
            if mask & (1 << i) != 0 {
                prob *= q;
                value = value.max(rate);
            } else {
                prob *= 1.0 - q;
            }
        }
        *pmf.entry(value.to_bits()).or_insert(0.0) += prob;
    }
    pmf.into_iter().map(|(bits, p)| (f64::from_bits(bits), p)).collect()
}
