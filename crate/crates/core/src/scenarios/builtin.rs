//! Built-in benchmark scenarios.
//!
//! Scenario 1 is a five-node hierarchy (one core, two edge, two access nodes)
//! with proportional resource costs: setting A runs one media service with two
//! user groups, setting B runs three single-user service components under
//! higher load. Scenario 2 duplicates the topology (two cores, four edges,
//! eight access nodes), prices everything in discrete resource blocks, and
//! runs three VR applications with shared content and broadcast rendered
//! streams under latency bounds.

use super::{
    BlocksConfig, ClusterConfig, CommodityConfig, FormulationConfig, FunctionConfig,
    FunctionKindConfig, LinkConfig, NetworkConfig, NodeConfig, RoundingConfig, ScenarioConfig,
    ScenarioError, ServiceConfig, SolverConfig, SweepConfig,
};

pub fn builtin(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    match name {
        "scenario1_a" => Ok(scenario1_a()),
        "scenario1_b" => Ok(scenario1_b()),
        "scenario2" => Ok(scenario2()),
        other => Err(ScenarioError::UnknownScenario(other.to_string())),
    }
}

pub const BUILTIN_NAMES: [&str; 3] = ["scenario1_a", "scenario1_b", "scenario2"];

fn cpu_cluster(name: &str, capacity: f64, unit_cost: f64) -> ClusterConfig {
    ClusterConfig {
        name: name.into(),
        proc_capacity: Some(capacity),
        proc_unit_cost: Some(unit_cost),
        mem_capacity: Some(capacity),
        mem_unit_cost: Some(unit_cost),
        proc_blocks: None,
        mem_blocks: None,
    }
}

fn comm_link(from: &str, to: &str, capacity: f64, unit_cost: f64) -> LinkConfig {
    LinkConfig {
        from: from.into(),
        to: to.into(),
        capacity: Some(capacity),
        unit_cost,
        latency_s: 0.0,
        bidirectional: true,
        blocks: None,
    }
}

fn function(name: &str, kind: FunctionKindConfig, location: Option<&str>) -> FunctionConfig {
    FunctionConfig {
        name: name.into(),
        kind,
        location: location.map(str::to_string),
        allowed_clusters: Vec::new(),
    }
}

fn commodity(producer: &str, consumer: &str, object: &str, rate: f64, scaled: bool) -> CommodityConfig {
    CommodityConfig {
        producer: producer.into(),
        consumer: consumer.into(),
        object: object.into(),
        comm_rate: rate,
        prod_rate: rate,
        cons_rate: rate,
        burstiness: None,
        latency_bound_s: None,
        proc_delay_s: 0.0,
        scaled,
    }
}

/// The five-node hierarchical network shared by both scenario-1 settings.
fn scenario1_network() -> NetworkConfig {
    NetworkConfig {
        nodes: vec![
            NodeConfig { name: "core".into(), compute: vec![cpu_cluster("core_cpu", 600.0, 5.0)] },
            NodeConfig { name: "edge1".into(), compute: vec![cpu_cluster("edge1_cpu", 500.0, 10.0)] },
            NodeConfig { name: "edge2".into(), compute: vec![cpu_cluster("edge2_cpu", 500.0, 12.0)] },
            NodeConfig {
                name: "access1".into(),
                compute: vec![cpu_cluster("access1_cpu", 400.0, 15.0)],
            },
            NodeConfig {
                name: "access2".into(),
                compute: vec![cpu_cluster("access2_cpu", 400.0, 15.0)],
            },
        ],
        links: vec![
            comm_link("core", "edge1", 500.0, 100.0),
            comm_link("core", "edge2", 500.0, 100.0),
            comm_link("edge1", "edge2", 500.0, 100.0),
            comm_link("edge1", "access1", 500.0, 100.0),
            comm_link("edge2", "access2", 500.0, 100.0),
        ],
    }
}

fn scenario1_assumptions() -> Vec<String> {
    vec![
        "assumption: link propagation delays are zero; latency constraints are inactive".into(),
        "assumption: per-node memory capacity and unit cost equal the published processing values"
            .into(),
        "assumption: the content store attaches to the core node".into(),
    ]
}

fn scenario1_a() -> ScenarioConfig {
    let functions = vec![
        function("gnb1_src", FunctionKindConfig::Source, Some("access1")),
        function("gnb2_src", FunctionKindConfig::Source, Some("access2")),
        function("cs", FunctionKindConfig::Source, Some("core")),
        function("tracking", FunctionKindConfig::Processing, None),
        function("synthesis", FunctionKindConfig::Processing, None),
        function("pers1", FunctionKindConfig::Processing, None),
        function("pers2", FunctionKindConfig::Processing, None),
        function("gnb1_dst", FunctionKindConfig::Destination, Some("access1")),
        function("gnb2_dst", FunctionKindConfig::Destination, Some("access2")),
    ];
    let commodities = vec![
        commodity("gnb1_src", "tracking", "sensor1", 10.0, false),
        commodity("gnb2_src", "tracking", "sensor2", 10.0, false),
        commodity("cs", "synthesis", "content", 10.0, false),
        commodity("tracking", "synthesis", "context", 5.0, false),
        commodity("synthesis", "pers1", "scene1", 15.0, true),
        commodity("synthesis", "pers2", "scene2", 15.0, true),
        commodity("pers1", "gnb1_dst", "view1", 20.0, true),
        commodity("pers2", "gnb2_dst", "view2", 20.0, true),
    ];
    ScenarioConfig {
        name: "scenario1_a".into(),
        assumptions: scenario1_assumptions(),
        network: scenario1_network(),
        service: ServiceConfig { functions, commodities },
        sweep: SweepConfig { scales: (1..=10).map(|s| s as f64).collect() },
        solver: SolverConfig::default(),
        rounding: RoundingConfig { seed: 7, ..RoundingConfig::default() },
        formulation: FormulationConfig::default(),
    }
}

fn scenario1_b() -> ScenarioConfig {
    let mut functions = Vec::new();
    let mut commodities = Vec::new();
    // three single-user media pipelines, all user groups behind the first
    // access node; sensor feeds come from different sides of the network
    let user_at = ["access1", "access1", "access1"];
    let sensors_at = [("access1", "access2"), ("access1", "access1"), ("access2", "access2")];
    for (c, user_node) in user_at.iter().enumerate() {
        let (sa, sb) = sensors_at[c];
        let c = c + 1;
        functions.push(function(&format!("gnb{c}a_src"), FunctionKindConfig::Source, Some(sa)));
        functions.push(function(&format!("gnb{c}b_src"), FunctionKindConfig::Source, Some(sb)));
        functions.push(function(&format!("cs{c}"), FunctionKindConfig::Source, Some("core")));
        functions.push(function(&format!("tracking{c}"), FunctionKindConfig::Processing, None));
        functions.push(function(&format!("synthesis{c}"), FunctionKindConfig::Processing, None));
        functions.push(function(&format!("pers{c}"), FunctionKindConfig::Processing, None));
        functions.push(function(&format!("gnb{c}_dst"), FunctionKindConfig::Destination, Some(user_node)));

        commodities.push(commodity(
            &format!("gnb{c}a_src"),
            &format!("tracking{c}"),
            &format!("sensor{c}a"),
            10.0,
            false,
        ));
        commodities.push(commodity(
            &format!("gnb{c}b_src"),
            &format!("tracking{c}"),
            &format!("sensor{c}b"),
            10.0,
            false,
        ));
        commodities.push(commodity(
            &format!("cs{c}"),
            &format!("synthesis{c}"),
            &format!("content{c}"),
            10.0,
            false,
        ));
        commodities.push(commodity(
            &format!("tracking{c}"),
            &format!("synthesis{c}"),
            &format!("context{c}"),
            5.0,
            false,
        ));
        commodities.push(commodity(
            &format!("synthesis{c}"),
            &format!("pers{c}"),
            &format!("scene{c}"),
            15.0,
            true,
        ));
        commodities.push(commodity(
            &format!("pers{c}"),
            &format!("gnb{c}_dst"),
            &format!("view{c}"),
            20.0,
            true,
        ));
    }
    let mut assumptions = scenario1_assumptions();
    assumptions.push(
        "assumption: the three user groups share the first access node; sensor feeds attach per \
         the service definition"
            .into(),
    );
    ScenarioConfig {
        name: "scenario1_b".into(),
        assumptions,
        network: scenario1_network(),
        service: ServiceConfig { functions, commodities },
        sweep: SweepConfig { scales: (1..=10).map(|s| s as f64).collect() },
        solver: SolverConfig::default(),
        rounding: RoundingConfig { seed: 7, ..RoundingConfig::default() },
        formulation: FormulationConfig::default(),
    }
}

fn block_cluster(name: &str, blocks: BlocksConfig, memory: bool) -> ClusterConfig {
    // compute clusters price their processing link; the caching cluster
    // prices its memory link; the other dimension stays free and unbounded
    ClusterConfig {
        name: name.into(),
        proc_capacity: None,
        proc_unit_cost: None,
        mem_capacity: None,
        mem_unit_cost: None,
        proc_blocks: (!memory).then_some(blocks),
        mem_blocks: memory.then_some(blocks),
    }
}

fn block_link(from: &str, to: &str, cost_per_block: f64, latency_s: f64) -> LinkConfig {
    LinkConfig {
        from: from.into(),
        to: to.into(),
        capacity: None,
        unit_cost: 0.0,
        latency_s,
        bidirectional: true,
        blocks: Some(BlocksConfig {
            max_blocks: 100.0,
            capacity_per_block: 50.0,
            cost_per_block,
        }),
    }
}

fn scenario2() -> ScenarioConfig {
    // cluster blocks: c5 tracking 3.4*2*16 Gflops, c7g vr 2.6*4*64 Gflops,
    // g3s rendering 4825 Gflops, r7g cache 8 GiB, m7i general 2.6*2*8 Gflops
    let tracking_blocks =
        BlocksConfig { max_blocks: 500.0, capacity_per_block: 108.8, cost_per_block: 0.085 };
    let vr_blocks =
        BlocksConfig { max_blocks: 500.0, capacity_per_block: 665.6, cost_per_block: 0.150 };
    let render_blocks =
        BlocksConfig { max_blocks: 500.0, capacity_per_block: 4825.0, cost_per_block: 0.750 };
    let cache_blocks =
        BlocksConfig { max_blocks: 500.0, capacity_per_block: 8192.0, cost_per_block: 0.054 };
    let gp_blocks =
        BlocksConfig { max_blocks: 500.0, capacity_per_block: 41.6, cost_per_block: 0.108 };

    let mut nodes = Vec::new();
    for name in ["core1", "core2", "edge1", "edge2", "edge3", "edge4"] {
        nodes.push(NodeConfig {
            name: name.into(),
            compute: vec![
                block_cluster(&format!("{name}_track"), tracking_blocks, false),
                block_cluster(&format!("{name}_vr"), vr_blocks, false),
                block_cluster(&format!("{name}_render"), render_blocks, false),
                block_cluster(&format!("{name}_cache"), cache_blocks, true),
            ],
        });
    }
    for i in 1..=8 {
        nodes.push(NodeConfig {
            name: format!("access{i}"),
            compute: vec![block_cluster(&format!("access{i}_gp"), gp_blocks, false)],
        });
    }

    let links = vec![
        block_link("core1", "core2", 0.45, 0.020),
        block_link("core1", "edge1", 0.45, 0.020),
        block_link("core1", "edge2", 0.45, 0.020),
        block_link("core2", "edge3", 0.45, 0.020),
        block_link("core2", "edge4", 0.45, 0.020),
        block_link("edge1", "edge2", 0.45, 0.015),
        block_link("edge3", "edge4", 0.45, 0.015),
        block_link("edge1", "access1", 0.90, 0.010),
        block_link("edge1", "access2", 0.90, 0.010),
        block_link("edge2", "access3", 0.90, 0.010),
        block_link("edge2", "access4", 0.90, 0.010),
        block_link("edge3", "access5", 0.90, 0.010),
        block_link("edge3", "access6", 0.90, 0.010),
        block_link("edge4", "access7", 0.90, 0.010),
        block_link("edge4", "access8", 0.90, 0.010),
    ];

    let compute_sites = ["core1", "core2", "edge1", "edge2", "edge3", "edge4"];
    let clusters_of = |kind: &str| -> Vec<String> {
        compute_sites.iter().map(|s| format!("{s}_{kind}")).collect()
    };

    let mut functions = Vec::new();
    let mut commodities = Vec::new();
    // components 1 and 2: latency-sensitive broadcast VR events with three
    // user groups behind one gNB; component 3: latency-tolerant VR with two
    // user groups on different edges
    struct Comp {
        sensor_at: &'static str,
        users: Vec<&'static str>,
        latency: f64,
    }
    let comps = [
        Comp {
            sensor_at: "access1",
            users: vec!["access1", "access1", "access1", "access1"],
            latency: 0.050,
        },
        Comp {
            sensor_at: "access3",
            users: vec!["access3", "access3", "access3", "access3"],
            latency: 0.050,
        },
        Comp { sensor_at: "access5", users: vec!["access5", "access7"], latency: 0.150 },
    ];

    for (idx, comp) in comps.iter().enumerate() {
        let c = idx + 1;
        functions.push(function(&format!("cam{c}"), FunctionKindConfig::Source, Some(comp.sensor_at)));
        functions.push(function(&format!("cs{c}"), FunctionKindConfig::Source, Some("core1")));
        for (kind, fname) in
            [("track", "track"), ("cache", "cache"), ("vr", "vr"), ("render", "render")]
        {
            functions.push(FunctionConfig {
                name: format!("{fname}{c}"),
                kind: FunctionKindConfig::Processing,
                location: None,
                allowed_clusters: clusters_of(kind),
            });
        }
        for (u, node) in comp.users.iter().enumerate() {
            functions.push(function(
                &format!("usr{c}{}", (b'a' + u as u8) as char),
                FunctionKindConfig::Destination,
                Some(node),
            ));
        }

        commodities.push(CommodityConfig {
            comm_rate: 1.0,
            prod_rate: 0.0,
            cons_rate: 0.65,
            ..commodity(&format!("cam{c}"), &format!("track{c}"), &format!("capture{c}"), 0.0, false)
        });
        commodities.push(CommodityConfig {
            comm_rate: 2.0,
            prod_rate: 0.0,
            cons_rate: 2800.0,
            ..commodity(&format!("cs{c}"), &format!("cache{c}"), "library", 0.0, false)
        });
        commodities.push(CommodityConfig {
            comm_rate: 50.0,
            prod_rate: 0.025,
            cons_rate: 800.0,
            ..commodity(&format!("cache{c}"), &format!("vr{c}"), &format!("cached{c}"), 0.0, false)
        });
        commodities.push(CommodityConfig {
            comm_rate: 17.28,
            prod_rate: 0.625,
            cons_rate: 800.0,
            ..commodity(&format!("track{c}"), &format!("vr{c}"), &format!("context{c}"), 0.0, false)
        });
        commodities.push(CommodityConfig {
            comm_rate: 120.0,
            prod_rate: 2549.75,
            cons_rate: 148.0,
            scaled: true,
            ..commodity(&format!("vr{c}"), &format!("render{c}"), &format!("scene{c}"), 0.0, false)
        });
        for (u, _) in comp.users.iter().enumerate() {
            let user = format!("usr{c}{}", (b'a' + u as u8) as char);
            commodities.push(CommodityConfig {
                comm_rate: 80.0,
                prod_rate: 8918.63,
                cons_rate: 0.0,
                scaled: true,
                latency_bound_s: Some(comp.latency),
                ..commodity(&format!("render{c}"), &user, &format!("frames{c}"), 0.0, false)
            });
        }
    }

    ScenarioConfig {
        name: "scenario2".into(),
        assumptions: vec![
            "assumption: the two cores interconnect with core-edge block pricing".into(),
            "assumption: compute cluster memory and the caching cluster's processing side are \
             uncapacitated and free"
                .into(),
            "assumption: each rendered stream is a broadcast shared by its component's user \
             groups; user groups attach as in the service definition"
                .into(),
            "assumption: burstiness is folded into the rate scaling factor".into(),
        ],
        network: NetworkConfig { nodes, links },
        service: ServiceConfig { functions, commodities },
        sweep: SweepConfig { scales: vec![1.0, 2.0, 5.0, 10.0, 15.0] },
        solver: SolverConfig { max_bnb_nodes: 400, ..SolverConfig::default() },
        rounding: RoundingConfig { seed: 7, ..RoundingConfig::default() },
        formulation: FormulationConfig {
            latency_enabled: true,
            resource_blocks: true,
            burstiness_enabled: false,
        },
    }
}
