//! End-to-end checks of the formulation/solver/rounding pipeline on small
//! hand-checkable instances and the built-in scenarios.

use idago_core::formulation::{self, FormulationOptions};
use idago_core::graph::{
    augment, BaseLink, BaseNetwork, Capacity, ComputeCluster, EndpointKind, EndpointSpec,
    ResourceSpec,
};
use idago_core::rounding::{self, RoundingParams};
use idago_core::scenarios::{self, builtin::builtin};
use idago_core::service::{
    CommodityId, CommoditySpec, FunctionId, FunctionKind, FunctionSpec, ObjectId, Rates,
    ServiceGraph,
};
use idago_core::solver::{self, SolveBudget, SolveStatus};
use idago_core::transform;

/// Two communication nodes, compute at both (production cost 2 at a, 5 at b),
/// unit-rate chain s -> f -> d with source and destination at node a, comm
/// links cost 1 per direction. Placing f at a costs 2; placing it at b adds
/// two comm traversals and the dearer cluster.
fn two_node_toy() -> (idago_core::graph::AugmentedGraph, ServiceGraph) {
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
        FunctionSpec {
            id: FunctionId(0),
            name: "s".into(),
            kind: FunctionKind::Source,
            location: Some(src),
            allowed_hosts: vec![],
        },
        FunctionSpec {
            id: FunctionId(1),
            name: "f".into(),
            kind: FunctionKind::Processing,
            location: None,
            allowed_hosts: vec![],
        },
        FunctionSpec {
            id: FunctionId(2),
            name: "d".into(),
            kind: FunctionKind::Destination,
            location: Some(dst),
            allowed_hosts: vec![],
        },
    ];
    let commodities = vec![
        CommoditySpec::new(CommodityId(0), "s->f", FunctionId(0), FunctionId(1), ObjectId(0), Rates::uniform(1.0)),
        CommoditySpec::new(CommodityId(1), "f->d", FunctionId(1), FunctionId(2), ObjectId(1), Rates::uniform(1.0)),
    ];
    let s = ServiceGraph::new(functions, commodities, vec!["o0".into(), "o1".into()]).unwrap();
    (g, s)
}

#[test]
fn two_node_toy_picks_cheap_placement() {
    let (g, s) = two_node_toy();
    let p = formulation::build(&g, &s, FormulationOptions::default()).unwrap();
    let sol = solver::solve_milp(&p, &SolveBudget::default());
    assert_eq!(sol.status, SolveStatus::Optimal);
    // produce at a: prod rate 1 * cost 2; memory is free in this toy
    assert!((sol.objective - 2.0).abs() < 1e-6, "objective {}", sol.objective);

    // LP relaxation agrees (the instance is integral)
    let lp = solver::solve_lp(&p, &SolveBudget::default());
    assert!((lp.objective - sol.objective).abs() < 1e-6);
    assert!(lp.objective <= sol.objective + 1e-9);
}

#[test]
fn colocated_zero_cost_instance() {
    // source and destination of one commodity on the same node, no processing:
    // the flow rides only zero-cost source/destination links
    let base = BaseNetwork {
        nodes: vec!["a".into()],
        links: vec![],
    };
    let eps = [
        EndpointSpec { host: 0, label: "src".into(), kind: EndpointKind::Source },
        EndpointSpec { host: 0, label: "dst".into(), kind: EndpointKind::Destination },
    ];
    let g = augment(&base, &[], &eps).unwrap();
    let src = g.node_by_label("src").unwrap();
    let dst = g.node_by_label("dst").unwrap();
    let functions = vec![
        FunctionSpec {
            id: FunctionId(0),
            name: "s".into(),
            kind: FunctionKind::Source,
            location: Some(src),
            allowed_hosts: vec![],
        },
        FunctionSpec {
            id: FunctionId(1),
            name: "d".into(),
            kind: FunctionKind::Destination,
            location: Some(dst),
            allowed_hosts: vec![],
        },
    ];
    let commodities = vec![CommoditySpec::new(
        CommodityId(0),
        "s->d",
        FunctionId(0),
        FunctionId(1),
        ObjectId(0),
        Rates::uniform(3.0),
    )];
    let s = ServiceGraph::new(functions, commodities, vec!["o0".into()]).unwrap();
    let p = formulation::build(&g, &s, FormulationOptions::default()).unwrap();
    let sol = solver::solve_milp(&p, &SolveBudget::default());
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(sol.objective.abs() < 1e-9);
}

#[test]
fn scenario1_a_scale1_pipeline() {
    let model = scenarios::resolve(builtin("scenario1_a").unwrap()).unwrap();
    let budget = model.solve_budget();
    let opts = model.formulation_options();
    let service = model.scaled_service(1.0);

    // info-aware DAG
    let p_dag = formulation::build(&model.graph, &service, opts).unwrap();
    let dag = solver::solve_milp(&p_dag, &budget);
    assert_eq!(dag.status, SolveStatus::Optimal, "dag milp");

    // info-unaware equals make_info_unaware route
    let mut unaware_opts = opts;
    unaware_opts.info_aware = false;
    let p_un = formulation::build(&model.graph, &service, unaware_opts).unwrap();
    let un = solver::solve_milp(&p_un, &budget);
    let p_un2 = formulation::build(&model.graph, &service.make_info_unaware(), opts).unwrap();
    let un2 = solver::solve_milp(&p_un2, &budget);
    assert!((un.objective - un2.objective).abs() < 1e-6, "{} vs {}", un.objective, un2.objective);

    // forest
    let forest = transform::dag_to_forest(&service).unwrap();
    let p_forest = formulation::build(&model.graph, &forest.graph, opts).unwrap();
    let fo = solver::solve_milp(&p_forest, &budget);
    assert_eq!(fo.status, SolveStatus::Optimal, "forest milp");

    // orderings
    assert!(un.objective >= dag.objective - 1e-6);
    assert!(dag.objective >= fo.objective - 1e-6);

    // idago reaches the forest optimum with a feasible embedding
    let params = RoundingParams { seed: 7, ..RoundingParams::default() };
    let result = rounding::idago(&model.graph, &service, &params, &opts, &budget).unwrap();
    assert!(result.accepted, "idago accepted");
    assert!(result.best.crf <= 1.0 + 1e-9, "crf {}", result.best.crf);
    let car = result.best.cost / fo.objective;
    assert!((car - 1.0).abs() < 1e-6, "car {car}");
}

#[test]
fn scenario1_a_transform_counts() {
    let model = scenarios::resolve(builtin("scenario1_a").unwrap()).unwrap();
    let forest = transform::dag_to_forest(&model.service).unwrap();
    assert_eq!(forest.component_count(), 2);
    assert_eq!(forest.graph.commodities().len(), 12);
    assert_eq!(forest.graph.object_count(), 8);
}

/// Two unit commodities compete for a cheap shared link of capacity 1; the
/// relaxation splits both while the integral optimum pays a detour.
#[test]
fn shared_bottleneck_forces_integrality_gap() {
    use idago_core::graph::{augment, BaseLink, BaseNetwork, EndpointKind, EndpointSpec};
    use idago_core::service::ObjectId;

    // a -> b via a cheap capacity-1 middle link or an expensive detour
    let base = BaseNetwork {
        nodes: vec!["a".into(), "b".into(), "detour1".into(), "detour2".into()],
        links: vec![
            BaseLink { tail: 0, head: 1, capacity: 1.5, unit_cost: 1.0, latency: 0.0, blocks: None },
            BaseLink { tail: 0, head: 2, capacity: 10.0, unit_cost: 3.0, latency: 0.0, blocks: None },
            BaseLink { tail: 2, head: 1, capacity: 10.0, unit_cost: 3.0, latency: 0.0, blocks: None },
            BaseLink { tail: 0, head: 3, capacity: 10.0, unit_cost: 4.0, latency: 0.0, blocks: None },
            BaseLink { tail: 3, head: 1, capacity: 10.0, unit_cost: 4.0, latency: 0.0, blocks: None },
        ],
    };
    let endpoints = [
        EndpointSpec { host: 0, label: "s0".into(), kind: EndpointKind::Source },
        EndpointSpec { host: 0, label: "s1".into(), kind: EndpointKind::Source },
        EndpointSpec { host: 1, label: "d0".into(), kind: EndpointKind::Destination },
        EndpointSpec { host: 1, label: "d1".into(), kind: EndpointKind::Destination },
    ];
    let g = augment(&base, &[], &endpoints).unwrap();
    let fun = |id: u32, name: &str, kind, label: &str| FunctionSpec {
        id: FunctionId(id),
        name: name.into(),
        kind,
        location: g.node_by_label(label),
        allowed_hosts: vec![],
    };
    let functions = vec![
        fun(0, "src0", FunctionKind::Source, "s0"),
        fun(1, "src1", FunctionKind::Source, "s1"),
        fun(2, "dst0", FunctionKind::Destination, "d0"),
        fun(3, "dst1", FunctionKind::Destination, "d1"),
    ];
    let commodities = vec![
        CommoditySpec::new(CommodityId(0), "c0", FunctionId(0), FunctionId(2), ObjectId(0), Rates { comm: 1.0, prod: 0.0, cons: 0.0 }),
        CommoditySpec::new(CommodityId(1), "c1", FunctionId(1), FunctionId(3), ObjectId(1), Rates { comm: 1.0, prod: 0.0, cons: 0.0 }),
    ];
    let s = ServiceGraph::new(functions, commodities, vec!["o0".into(), "o1".into()]).unwrap();
    let p = formulation::build(&g, &s, FormulationOptions::default()).unwrap();

    // hand enumeration of the four integral routings:
    //   both direct: infeasible (capacity 1.5 < 2)
    //   one direct + cheap detour: 1 + 6 = 7 (optimal)
    //   one direct + dear detour: 1 + 8 = 9
    //   both detours: 6 + 8 = 14
    let milp = solver::solve_milp(&p, &SolveBudget::default());
    assert_eq!(milp.status, SolveStatus::Optimal);
    assert!((milp.objective - 7.0).abs() < 1e-6, "milp {}", milp.objective);

    // the relaxation packs 1.5 fractional units onto the cheap link and lands
    // strictly below the integral optimum
    let lp = solver::solve_lp(&p, &SolveBudget::default());
    assert_eq!(lp.status, SolveStatus::Optimal);
    assert!(lp.objective < milp.objective - 1e-6, "lp {} milp {}", lp.objective, milp.objective);
}
