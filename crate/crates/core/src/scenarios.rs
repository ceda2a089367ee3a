//! Scenario configuration I/O, built-in benchmark scenarios, and the
//! four-method baseline comparison runner.
//!
//! A scenario bundles a physical network (nodes, links, compute clusters), an
//! information-aware service, a rate sweep, and solver/rounding parameters.
//! Configs are JSON; the built-ins reproduce the benchmark settings used by
//! the test suite.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::formulation::{self, FormulationOptions};
use crate::graph::{
    augment, AugmentedGraph, BaseLink, BaseNetwork, BlockSpec, Capacity, ComputeCluster,
    EndpointKind, EndpointSpec, ResourceSpec,
};
use crate::rounding::{self, RoundingParams, Selection};
use crate::service::{
    CommodityId, CommoditySpec, FunctionId, FunctionKind, FunctionSpec, ObjectId, Rates,
    ServiceGraph,
};
use crate::solver::{self, SolveBudget, SolveStatus};
use crate::transform;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    /// Parameters that are modeling choices rather than published values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assumptions: Vec<String>,
    pub network: NetworkConfig,
    pub service: ServiceConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub rounding: RoundingConfig,
    #[serde(default)]
    pub formulation: FormulationConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NetworkConfig {
    pub nodes: Vec<NodeConfig>,
    pub links: Vec<LinkConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NodeConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compute: Vec<ClusterConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ClusterConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proc_capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proc_unit_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mem_capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mem_unit_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proc_blocks: Option<BlocksConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mem_blocks: Option<BlocksConfig>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct BlocksConfig {
    pub max_blocks: f64,
    pub capacity_per_block: f64,
    pub cost_per_block: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LinkConfig {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(default)]
    pub unit_cost: f64,
    #[serde(default)]
    pub latency_s: f64,
    #[serde(default = "default_true")]
    pub bidirectional: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<BlocksConfig>,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ServiceConfig {
    pub functions: Vec<FunctionConfig>,
    pub commodities: Vec<CommodityConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FunctionConfig {
    pub name: String,
    pub kind: FunctionKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub allowed_clusters: Vec<String>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKindConfig {
    Source,
    Destination,
    Processing,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CommodityConfig {
    pub producer: String,
    pub consumer: String,
    pub object: String,
    #[serde(default)]
    pub comm_rate: f64,
    #[serde(default)]
    pub prod_rate: f64,
    #[serde(default)]
    pub cons_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burstiness: Option<BurstinessConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_bound_s: Option<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub proc_delay_s: f64,
    /// Rates multiplied by the sweep's scaling factor.
    #[serde(default, skip_serializing_if = "is_false")]
    pub scaled: bool,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn is_false(v: &bool) -> bool {
    !*v
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct BurstinessConfig {
    #[serde(default = "one")]
    pub comm: f64,
    #[serde(default = "one")]
    pub prod: f64,
    #[serde(default = "one")]
    pub cons: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepConfig {
    pub scales: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolverConfig {
    pub max_simplex_iterations: u64,
    pub max_bnb_nodes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_seconds: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let b = SolveBudget::default();
        SolverConfig {
            max_simplex_iterations: b.max_simplex_iterations,
            max_bnb_nodes: b.max_bnb_nodes,
            budget_seconds: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct RoundingConfig {
    pub seed: u64,
    pub max_tries: u64,
    pub accept_crf: f64,
    pub accept_latency_relax: f64,
    pub selection: SelectionConfig,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SelectionConfig {
    First,
    Best,
}

impl Default for RoundingConfig {
    fn default() -> Self {
        RoundingConfig {
            seed: 0,
            max_tries: 100,
            accept_crf: 1.0,
            accept_latency_relax: 1.0,
            selection: SelectionConfig::Best,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct FormulationConfig {
    #[serde(default)]
    pub latency_enabled: bool,
    #[serde(default)]
    pub resource_blocks: bool,
    #[serde(default)]
    pub burstiness_enabled: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioError {
    Schema { path: String, message: String },
    UnknownScenario(String),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Schema { path, message } => write!(f, "{path}: {message}"),
            ScenarioError::UnknownScenario(n) => write!(f, "unknown scenario {n:?}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

fn schema_err(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Schema { path: path.into(), message: message.into() }
}

/// A loaded scenario: the augmented graph plus the unscaled service.
#[derive(Clone, Debug)]
pub struct ScenarioModel {
    pub config: ScenarioConfig,
    pub graph: AugmentedGraph,
    pub service: ServiceGraph,
}

/// Parses and resolves a JSON scenario config.
pub fn load(text: &str) -> Result<ScenarioModel, ScenarioError> {
    let config: ScenarioConfig =
        serde_json::from_str(text).map_err(|e| schema_err("$", e.to_string()))?;
    resolve(config)
}

/// Canonical JSON for a config; `save(load(x).config) == x` for saved files.
pub fn save(config: &ScenarioConfig) -> String {
    let mut s = serde_json::to_string_pretty(config).expect("config serializes");
    s.push('\n');
    s
}

/// Serializes a service graph in the scenario config's service schema. Fixed
/// locations are rendered as the hosting communication node's name.
pub fn save_service(g: &AugmentedGraph, s: &ServiceGraph) -> String {
    let host_label = |loc: Option<crate::graph::NodeId>| -> Option<String> {
        let node = g.node(loc?);
        let host = node.host.unwrap_or(node.id);
        Some(g.node(host).label.clone())
    };
    let functions = s
        .functions()
        .iter()
        .map(|f| FunctionConfig {
            name: f.name.clone(),
            kind: match f.kind {
                FunctionKind::Source => FunctionKindConfig::Source,
                FunctionKind::Destination => FunctionKindConfig::Destination,
                FunctionKind::Processing => FunctionKindConfig::Processing,
            },
            location: host_label(f.location),
            allowed_clusters: f
                .allowed_hosts
                .iter()
                .map(|h| g.node(*h).label.clone())
                .collect(),
        })
        .collect();
    let commodities = s
        .commodities()
        .iter()
        .map(|k| CommodityConfig {
            producer: s.function(k.producer).name.clone(),
            consumer: s.function(k.consumer).name.clone(),
            object: s.object_names()[k.object.index()].clone(),
            comm_rate: k.rates.comm,
            prod_rate: k.rates.prod,
            cons_rate: k.rates.cons,
            burstiness: (k.burstiness != crate::service::Rates::uniform(1.0)).then(|| {
                BurstinessConfig {
                    comm: k.burstiness.comm,
                    prod: k.burstiness.prod,
                    cons: k.burstiness.cons,
                }
            }),
            latency_bound_s: k.latency_bound,
            proc_delay_s: k.proc_delay,
            scaled: false,
        })
        .collect();
    let cfg = ServiceConfig { functions, commodities };
    let mut out = serde_json::to_string_pretty(&cfg).expect("service serializes");
    out.push('\n');
    out
}

pub fn resolve(config: ScenarioConfig) -> Result<ScenarioModel, ScenarioError> {
    // base network
    let mut node_index = std::collections::HashMap::new();
    for (i, n) in config.network.nodes.iter().enumerate() {
        if node_index.insert(n.name.clone(), i).is_some() {
            return Err(schema_err(format!("network.nodes[{i}].name"), "duplicate node name"));
        }
    }
    let mut links = Vec::new();
    for (i, l) in config.network.links.iter().enumerate() {
        let from = *node_index
            .get(&l.from)
            .ok_or_else(|| schema_err(format!("network.links[{i}].from"), "unknown node"))?;
        let to = *node_index
            .get(&l.to)
            .ok_or_else(|| schema_err(format!("network.links[{i}].to"), "unknown node"))?;
        let capacity = match (l.capacity, l.blocks) {
            (Some(c), _) => c,
            (None, Some(b)) => b.max_blocks * b.capacity_per_block,
            (None, None) => {
                return Err(schema_err(format!("network.links[{i}].capacity"), "missing capacity"))
            }
        };
        let blocks = l.blocks.map(|b| BlockSpec {
            max_blocks: b.max_blocks,
            block_capacity: b.capacity_per_block,
            block_cost: b.cost_per_block,
        });
        links.push(BaseLink {
            tail: from,
            head: to,
            capacity,
            unit_cost: l.unit_cost,
            latency: l.latency_s,
            blocks,
        });
        if l.bidirectional {
            links.push(BaseLink {
                tail: to,
                head: from,
                capacity,
                unit_cost: l.unit_cost,
                latency: l.latency_s,
                blocks,
            });
        }
    }
    let base = BaseNetwork {
        nodes: config.network.nodes.iter().map(|n| n.name.clone()).collect(),
        links,
    };

    // compute clusters
    let mut clusters = Vec::new();
    for (ni, n) in config.network.nodes.iter().enumerate() {
        for (ci, c) in n.compute.iter().enumerate() {
            let path = format!("network.nodes[{ni}].compute[{ci}]");
            let proc = resource_spec(c.proc_capacity, c.proc_unit_cost, c.proc_blocks);
            let mem = resource_spec(c.mem_capacity, c.mem_unit_cost, c.mem_blocks);
            if c.name.is_empty() {
                return Err(schema_err(format!("{path}.name"), "empty cluster name"));
            }
            clusters.push(ComputeCluster { host: ni, label: c.name.clone(), proc, mem });
        }
    }

    // endpoints derive from the fixed-location service functions
    let mut endpoints = Vec::new();
    for (fi, f) in config.service.functions.iter().enumerate() {
        match f.kind {
            FunctionKindConfig::Source | FunctionKindConfig::Destination => {
                let loc = f.location.as_deref().ok_or_else(|| {
                    schema_err(format!("service.functions[{fi}].location"), "missing location")
                })?;
                let host = *node_index.get(loc).ok_or_else(|| {
                    schema_err(format!("service.functions[{fi}].location"), "unknown node")
                })?;
                let kind = if f.kind == FunctionKindConfig::Source {
                    EndpointKind::Source
                } else {
                    EndpointKind::Destination
                };
                endpoints.push(EndpointSpec {
                    host,
                    label: format!("ep:{}", f.name),
                    kind,
                });
            }
            FunctionKindConfig::Processing => {}
        }
    }

    let graph = augment(&base, &clusters, &endpoints)
        .map_err(|e| schema_err("network", e.to_string()))?;

    // service functions
    let mut functions = Vec::new();
    let mut fn_index = std::collections::HashMap::new();
    for (fi, f) in config.service.functions.iter().enumerate() {
        if fn_index.insert(f.name.clone(), fi).is_some() {
            return Err(schema_err(format!("service.functions[{fi}].name"), "duplicate name"));
        }
        let kind = match f.kind {
            FunctionKindConfig::Source => FunctionKind::Source,
            FunctionKindConfig::Destination => FunctionKind::Destination,
            FunctionKindConfig::Processing => FunctionKind::Processing,
        };
        let location = match kind {
            FunctionKind::Processing => None,
            _ => graph.node_by_label(&format!("ep:{}", f.name)),
        };
        let mut allowed_hosts = Vec::new();
        for (ai, cname) in f.allowed_clusters.iter().enumerate() {
            let node = graph.node_by_label(cname).ok_or_else(|| {
                schema_err(
                    format!("service.functions[{fi}].allowed_clusters[{ai}]"),
                    "unknown cluster",
                )
            })?;
            allowed_hosts.push(node);
        }
        functions.push(FunctionSpec {
            id: FunctionId(fi as u32),
            name: f.name.clone(),
            kind,
            location,
            allowed_hosts,
        });
    }

    // objects in first-appearance order
    let mut object_names: Vec<String> = Vec::new();
    let mut object_index = std::collections::HashMap::new();
    for k in &config.service.commodities {
        object_index.entry(k.object.clone()).or_insert_with(|| {
            object_names.push(k.object.clone());
            object_names.len() - 1
        });
    }

    let mut commodities = Vec::new();
    for (ki, k) in config.service.commodities.iter().enumerate() {
        let producer = *fn_index
            .get(&k.producer)
            .ok_or_else(|| schema_err(format!("service.commodities[{ki}].producer"), "unknown"))?;
        let consumer = *fn_index
            .get(&k.consumer)
            .ok_or_else(|| schema_err(format!("service.commodities[{ki}].consumer"), "unknown"))?;
        let burst = k.burstiness.map_or(Rates::uniform(1.0), |b| Rates {
            comm: b.comm,
            prod: b.prod,
            cons: b.cons,
        });
        commodities.push(CommoditySpec {
            id: CommodityId(ki as u32),
            name: format!("{}->{}", k.producer, k.consumer),
            producer: FunctionId(producer as u32),
            consumer: FunctionId(consumer as u32),
            object: ObjectId(object_index[&k.object] as u32),
            rates: Rates { comm: k.comm_rate, prod: k.prod_rate, cons: k.cons_rate },
            burstiness: burst,
            latency_bound: k.latency_bound_s,
            proc_delay: k.proc_delay_s,
        });
    }

    let service = ServiceGraph::new(functions, commodities, object_names)
        .map_err(|e| schema_err("service", e.to_string()))?;
    let violations = crate::service::validate_dag(&service);
    if !violations.is_empty() {
        return Err(schema_err("service", violations.join("; ")));
    }
    for (i, &scale) in config.sweep.scales.iter().enumerate() {
        if scale <= 0.0 {
            return Err(schema_err(format!("sweep.scales[{i}]"), "scale must be positive"));
        }
    }

    Ok(ScenarioModel { config, graph, service })
}

fn resource_spec(
    capacity: Option<f64>,
    cost: Option<f64>,
    blocks: Option<BlocksConfig>,
) -> ResourceSpec {
    match blocks {
        Some(b) => ResourceSpec::Blocks(BlockSpec {
            max_blocks: b.max_blocks,
            block_capacity: b.capacity_per_block,
            block_cost: b.cost_per_block,
        }),
        None => ResourceSpec::Proportional {
            capacity: capacity.map_or(Capacity::Unbounded, Capacity::Finite),
            unit_cost: cost.unwrap_or(0.0),
        },
    }
}

impl ScenarioModel {
    /// The service with the sweep factor applied to its scaled commodities.
    pub fn scaled_service(&self, scale: f64) -> ServiceGraph {
        let commodities = self
            .service
            .commodities()
            .iter()
            .zip(&self.config.service.commodities)
            .map(|(spec, cfg)| {
                let mut spec = spec.clone();
                if cfg.scaled {
                    spec.rates = spec.rates.scaled(scale);
                }
                spec
            })
            .collect();
        ServiceGraph::new(
            self.service.functions().to_vec(),
            commodities,
            self.service.object_names().to_vec(),
        )
        .expect("scaling preserves validity")
    }

    pub fn formulation_options(&self) -> FormulationOptions {
        FormulationOptions {
            info_aware: true,
            latency_enabled: self.config.formulation.latency_enabled,
            resource_blocks: self.config.formulation.resource_blocks,
            burstiness_enabled: self.config.formulation.burstiness_enabled,
            relaxed: false,
        }
    }

    pub fn rounding_params(&self) -> RoundingParams {
        let r = &self.config.rounding;
        RoundingParams {
            seed: r.seed,
            max_tries: r.max_tries,
            accept_crf: r.accept_crf,
            accept_latency_relax: r.accept_latency_relax,
            selection: match r.selection {
                SelectionConfig::First => Selection::FirstAccepted,
                SelectionConfig::Best => Selection::BestCostAmongTries,
            },
        }
    }

    pub fn solve_budget(&self) -> SolveBudget {
        SolveBudget {
            max_simplex_iterations: self.config.solver.max_simplex_iterations,
            max_bnb_nodes: self.config.solver.max_bnb_nodes,
            wall_clock: self.config.solver.budget_seconds,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Method {
    InfoUnawareDag,
    InfoAwareDag,
    InfoAwareForest,
    Idago,
}

pub const ALL_METHODS: [Method; 4] =
    [Method::InfoUnawareDag, Method::InfoAwareDag, Method::InfoAwareForest, Method::Idago];

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::InfoUnawareDag => "milp-info-unaware-dag",
            Method::InfoAwareDag => "milp-info-aware-dag",
            Method::InfoAwareForest => "milp-info-aware-forest",
            Method::Idago => "idago",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct BaselineRow {
    pub method: Method,
    pub scale: f64,
    pub status: String,
    pub cost: Option<f64>,
    pub car: Option<f64>,
    pub crf: Option<f64>,
    pub max_latency_relax: Option<f64>,
    pub gap: Option<f64>,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug, Default)]
pub struct BaselineReport {
    pub rows: Vec<BaselineRow>,
}

impl BaselineReport {
    pub fn row(&self, method: Method, scale: f64) -> Option<&BaselineRow> {
        self.rows.iter().find(|r| r.method == method && r.scale == scale)
    }

    /// CSV per the published schema. Wall times are reported only when
    /// `timings` is set; otherwise the column is zero so byte-identical
    /// reruns stay byte-identical.
    pub fn to_csv(&self, timings: bool) -> String {
        let mut out = String::from("method,scale,cost,car,crf,max_latency_relax,status,elapsed_s\n");
        let fmt_opt = |v: Option<f64>| v.map(crate::fmt_sig).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.method,
                crate::fmt_sig(r.scale),
                fmt_opt(r.cost),
                fmt_opt(r.car),
                fmt_opt(r.crf),
                fmt_opt(r.max_latency_relax),
                r.status,
                if timings { crate::fmt_sig(r.elapsed_s) } else { "0".to_string() },
            ));
        }
        out
    }
}

/// Tight cumulative latency per commodity realized by a (near-)integral
/// solution: local latencies summed over carried links, joined by the
/// worst-input recursion.
pub fn realized_cumulative_latencies(
    g: &AugmentedGraph,
    s: &ServiceGraph,
    p: &formulation::LpProblem,
    values: &[f64],
) -> Vec<f64> {
    let flows = formulation::flow_table(p, g, s, values);
    let mut local = vec![0.0; s.commodities().len()];
    for k in s.commodities() {
        local[k.id.index()] = g
            .links()
            .map(|l| {
                if flows[k.id.index()][l.id.index()] > 0.5 {
                    rounding::commodity_link_latency(g, s, k.id, l.id)
                } else {
                    0.0
                }
            })
            .sum();
    }
    let mut cumulative = vec![0.0; s.commodities().len()];
    for k in s.commodity_topo_order() {
        let inputs = s.input_commodities(k).expect("dense");
        let worst = inputs.iter().map(|l| cumulative[l.index()]).fold(0.0f64, f64::max);
        cumulative[k.index()] = local[k.index()] + worst;
    }
    cumulative
}

/// Worst link utilization and tight end-to-end latency of a MILP solution.
fn milp_realization(
    g: &AugmentedGraph,
    s: &ServiceGraph,
    p: &formulation::LpProblem,
    sol: &solver::LpSolution,
) -> (Option<f64>, Option<f64>) {
    let flows = formulation::flow_table(p, g, s, &sol.values);
    let mut crf: Option<f64> = None;
    for link in g.capacitated_links() {
        let cap = link.effective_capacity().finite().expect("capacitated");
        if cap <= 0.0 {
            continue;
        }
        let mut used = vec![0.0f64; s.object_count()];
        for k in s.commodities() {
            let f = flows[k.id.index()][link.id.index()];
            if f > 0.5 {
                let r = rounding::effective_rate(g, s, k.id, link.id, p.options.burstiness_enabled);
                let cell = &mut used[k.object.index()];
                *cell = (*cell).max(r);
            }
        }
        let mu: f64 = used.iter().sum();
        let ratio = mu / cap;
        crf = Some(crf.map_or(ratio, |c: f64| c.max(ratio)));
    }

    let cumulative = realized_cumulative_latencies(g, s, p, &sol.values);
    let mut relax: Option<f64> = None;
    for k in s.commodities() {
        if let Some(b) = k.latency_bound {
            if b > 0.0 {
                let r = cumulative[k.id.index()] / b;
                relax = Some(relax.map_or(r, |x: f64| x.max(r)));
            }
        }
    }
    (crf, relax)
}

fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
        SolveStatus::BudgetExceeded => "budget-exceeded",
    }
}

/// Runs one (method, scale) cell.
pub fn run_cell(model: &ScenarioModel, method: Method, scale: f64) -> BaselineRow {
    let start = std::time::Instant::now();
    let service = model.scaled_service(scale);
    let opts = model.formulation_options();
    let budget = model.solve_budget();
    let mut row = BaselineRow {
        method,
        scale,
        status: "error".into(),
        cost: None,
        car: None,
        crf: None,
        max_latency_relax: None,
        gap: None,
        elapsed_s: 0.0,
    };

    match method {
        Method::InfoUnawareDag | Method::InfoAwareDag | Method::InfoAwareForest => {
            let mut opts = opts;
            opts.info_aware = method != Method::InfoUnawareDag;
            let built = match method {
                Method::InfoAwareForest => transform::dag_to_forest(&service)
                    .map_err(|e| e.to_string())
                    .and_then(|f| {
                        formulation::build(&model.graph, &f.graph, opts)
                            .map(|p| (p, f.graph))
                            .map_err(|e| e.to_string())
                    }),
                _ => formulation::build(&model.graph, &service, opts)
                    .map(|p| (p, service.clone()))
                    .map_err(|e| e.to_string()),
            };
            match built {
                Ok((p, graph_service)) => {
                    let sol = solver::solve_milp(&p, &budget);
                    row.status = status_name(sol.status).into();
                    row.gap = sol.gap;
                    if matches!(sol.status, SolveStatus::Optimal | SolveStatus::BudgetExceeded)
                        && !sol.values.is_empty()
                    {
                        row.cost = Some(sol.objective);
                        let (crf, relax) =
                            milp_realization(&model.graph, &graph_service, &p, &sol);
                        row.crf = crf;
                        row.max_latency_relax = relax;
                    }
                }
                Err(e) => row.status = format!("error: {e}"),
            }
        }
        Method::Idago => {
            let params = model.rounding_params();
            match rounding::idago(&model.graph, &service, &params, &opts, &budget) {
                Ok(result) => {
                    row.status = if result.accepted { "accepted" } else { "best-effort" }.into();
                    row.cost = Some(result.best.cost);
                    row.crf = Some(result.best.crf);
                    row.max_latency_relax = Some(result.best.latency_relax);
                }
                Err(e) => row.status = format!("error: {e}"),
            }
        }
    }
    row.elapsed_s = start.elapsed().as_secs_f64();
    row
}

/// Runs the full method x scale sweep; cells never abort the run. The CAR
/// column relates every method's cost to the forest MILP optimum at the same
/// scale.
pub fn run_baselines(model: &ScenarioModel, methods: &[Method]) -> BaselineReport {
    let threads = std::env::var("IDAGO_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .map(|v| {
            if v == 0 {
                std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1)
            } else {
                v
            }
        })
        .unwrap_or(1)
        .max(1);

    let cells: Vec<(Method, f64)> = model
        .config
        .sweep
        .scales
        .iter()
        .flat_map(|&scale| methods.iter().map(move |&m| (m, scale)))
        .collect();

    let mut rows: Vec<BaselineRow> = if threads <= 1 || cells.len() <= 1 {
        cells.iter().map(|&(m, s)| run_cell(model, m, s)).collect()
    } else {
        let chunk = cells.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = cells
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(|&(m, s)| run_cell(model, m, s)).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("cell worker")).collect()
        })
    };

    // canonical order: scale, then method order as requested
    let method_rank = |m: Method| methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        a.scale
            .partial_cmp(&b.scale)
            .unwrap()
            .then(method_rank(a.method).cmp(&method_rank(b.method)))
    });

    // CAR relative to the forest optimum at the same scale
    let forest_costs: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.method == Method::InfoAwareForest && r.status == "optimal")
        .filter_map(|r| r.cost.map(|c| (r.scale, c)))
        .collect();
    for row in &mut rows {
        if let (Some(cost), Some(&(_, base))) = (
            row.cost,
            forest_costs.iter().find(|(s, _)| *s == row.scale),
        ) {
            row.car = analysis::car(cost, base).ok();
        }
    }

    BaselineReport { rows }
}

pub mod builtin;
