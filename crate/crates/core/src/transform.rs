//! Functionally-equivalent DAG-to-Forest service graph transformation.
//!
//! Branching points are eliminated by walking backward from the destinations:
//! every function producing more than one output commodity is replaced by one
//! replica per output, and each replica receives a fresh copy of its whole
//! input cone. Replicated commodities keep their original attributes, in
//! particular their information object, so replicas of the same stream can
//! still overlap in the network. The result is one tree per destination
//! commodity. Source functions have fixed locations, so replicating them
//! changes nothing; they are shared by reference instead.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::graph::{AugmentedGraph, LinkId, LinkKind, NodeId, NodeKind};
use crate::service::{
    CommodityId, CommoditySpec, FunctionId, FunctionKind, FunctionSpec, ServiceGraph,
};

/// One tree of the transformed forest.
#[derive(Clone, Debug)]
pub struct ComponentView {
    pub index: usize,
    /// The destination function replica at the root.
    pub root: FunctionId,
    pub functions: Vec<FunctionId>,
    pub commodities: Vec<CommodityId>,
    pub destination_commodities: Vec<CommodityId>,
    pub source_commodities: Vec<CommodityId>,
}

#[derive(Clone, Debug)]
pub struct ServiceForest {
    pub graph: ServiceGraph,
    pub components: Vec<ComponentView>,
    /// Maps each forest function back to the original function it replicates.
    pub origin_function: Vec<FunctionId>,
    /// Maps each forest commodity back to the original commodity.
    pub origin_commodity: Vec<CommodityId>,
}

#[derive(Clone, Debug)]
pub enum TransformError {
    InvalidDag(Vec<String>),
    InconsistentEmbedding(String),
}

impl fmt::Display for TransformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformError::InvalidDag(v) => write!(f, "invalid service DAG: {}", v.join("; ")),
            TransformError::InconsistentEmbedding(m) => write!(f, "inconsistent embedding: {m}"),
        }
    }
}

impl std::error::Error for TransformError {}

pub fn dag_to_forest(s: &ServiceGraph) -> Result<ServiceForest, TransformError> {
    let violations = crate::service::validate_dag(s);
    if !violations.is_empty() {
        return Err(TransformError::InvalidDag(violations));
    }

    let mut functions: Vec<FunctionSpec> = Vec::new();
    let mut commodities: Vec<CommoditySpec> = Vec::new();
    let mut origin_function: Vec<FunctionId> = Vec::new();
    let mut origin_commodity: Vec<CommodityId> = Vec::new();
    let mut components: Vec<ComponentView> = Vec::new();
    // Shared source functions are materialized once, on first use.
    let mut shared_sources: BTreeMap<FunctionId, FunctionId> = BTreeMap::new();

    let dest_commodities: Vec<CommodityId> = s
        .commodities()
        .iter()
        .filter(|k| s.is_destination_commodity(k.id))
        .map(|k| k.id)
        .collect();

    for (phi, &kd) in dest_commodities.iter().enumerate() {
        let mut comp_functions: BTreeSet<FunctionId> = BTreeSet::new();
        let mut comp_commodities: Vec<CommodityId> = Vec::new();
        let mut comp_sources: Vec<CommodityId> = Vec::new();
        let mut seq = 0usize;

        let replicate_function = |orig: FunctionId,
                                      functions: &mut Vec<FunctionSpec>,
                                      origin_function: &mut Vec<FunctionId>,
                                      seq: &mut usize|
         -> FunctionId {
            let spec = s.function(orig);
            let id = FunctionId(functions.len() as u32);
            functions.push(FunctionSpec {
                id,
                name: format!("{}@t{}.{}", spec.name, phi, seq),
                kind: spec.kind,
                location: spec.location,
                allowed_hosts: spec.allowed_hosts.clone(),
            });
            origin_function.push(orig);
            *seq += 1;
            id
        };

        let root_orig = s.commodity(kd).consumer;
        let root = replicate_function(root_orig, &mut functions, &mut origin_function, &mut seq);
        comp_functions.insert(root);

        // Queue of (original commodity, replica of its consumer).
        let mut queue: VecDeque<(CommodityId, FunctionId)> = VecDeque::new();
        queue.push_back((kd, root));
        while let Some((orig_k, consumer_replica)) = queue.pop_front() {
            let kspec = s.commodity(orig_k);
            let producer_orig = kspec.producer;
            let producer_replica = if s.function(producer_orig).kind == FunctionKind::Source {
                *shared_sources.entry(producer_orig).or_insert_with(|| {
                    let spec = s.function(producer_orig);
                    let id = FunctionId(functions.len() as u32);
                    functions.push(FunctionSpec {
                        id,
                        name: spec.name.clone(),
                        kind: spec.kind,
                        location: spec.location,
                        allowed_hosts: spec.allowed_hosts.clone(),
                    });
                    origin_function.push(producer_orig);
                    id
                })
            } else {
                replicate_function(producer_orig, &mut functions, &mut origin_function, &mut seq)
            };
            comp_functions.insert(producer_replica);

            let new_k = CommodityId(commodities.len() as u32);
            let mut new_spec = kspec.clone();
            new_spec.id = new_k;
            new_spec.name = format!("{}@t{}", kspec.name, phi);
            new_spec.producer = producer_replica;
            new_spec.consumer = consumer_replica;
            commodities.push(new_spec);
            origin_commodity.push(orig_k);
            comp_commodities.push(new_k);
            if s.is_source_commodity(orig_k) {
                comp_sources.push(new_k);
            }

            for &input in s.input_commodities(orig_k).expect("validated above") {
                queue.push_back((input, producer_replica));
            }
        }

        comp_commodities.sort();
        comp_sources.sort();
        components.push(ComponentView {
            index: phi,
            root,
            functions: comp_functions.into_iter().collect(),
            commodities: comp_commodities.clone(),
            destination_commodities: vec![comp_commodities[0]],
            source_commodities: comp_sources,
        });
    }

    // The first commodity materialized per component is its destination
    // commodity; record explicitly for clarity.
    for c in &mut components {
        let dest: Vec<CommodityId> = c
            .commodities
            .iter()
            .copied()
            .filter(|&k| {
                let spec = &commodities[k.index()];
                functions[spec.consumer.index()].kind == FunctionKind::Destination
            })
            .collect();
        c.destination_commodities = dest;
    }

    let graph = ServiceGraph::new(functions, commodities, s.object_names().to_vec())
        .expect("replication preserves structural validity");
    Ok(ServiceForest { graph, components, origin_function, origin_commodity })
}

impl ServiceForest {
    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// The component a forest commodity belongs to.
    pub fn component_of(&self, k: CommodityId) -> usize {
        self.components
            .iter()
            .position(|c| c.commodities.binary_search(&k).is_ok())
            .expect("every forest commodity belongs to one component")
    }
}

/// An embedding of the original DAG recovered from a forest embedding by
/// merging replicas mapped to the same location.
#[derive(Clone, Debug, Default)]
pub struct CollapsedEmbedding {
    /// Original function -> set of network locations its replicas use.
    pub placements: BTreeMap<FunctionId, BTreeSet<NodeId>>,
    /// Original commodity -> set of distinct link paths its replicas use.
    pub paths: BTreeMap<CommodityId, BTreeSet<Vec<LinkId>>>,
}

/// Collapses a forest embedding back onto the original DAG.
///
/// `placements[f]` / `paths[k]` are indexed by forest ids; `None` entries for
/// functions or commodities that belong to the forest are inconsistent.
pub fn collapse(
    forest: &ServiceForest,
    placements: &[Option<NodeId>],
    paths: &[Option<Vec<LinkId>>],
) -> Result<CollapsedEmbedding, TransformError> {
    let mut out = CollapsedEmbedding::default();
    for f in forest.graph.functions() {
        let node = placements.get(f.id.index()).copied().flatten().ok_or_else(|| {
            TransformError::InconsistentEmbedding(format!("function {} not placed", f.name))
        })?;
        out.placements.entry(forest.origin_function[f.id.index()]).or_default().insert(node);
    }
    for k in forest.graph.commodities() {
        let path = paths
            .get(k.id.index())
            .and_then(|p| p.as_ref())
            .ok_or_else(|| {
                TransformError::InconsistentEmbedding(format!("commodity {} has no path", k.name))
            })?
            .clone();
        out.paths.entry(forest.origin_commodity[k.id.index()]).or_default().insert(path);
    }
    Ok(out)
}

/// Checks that a collapsed embedding still satisfies the original DAG's
/// chaining: every location hosting a consumer of commodity `k` receives `k`
/// through some path from a location hosting its producer. Returns the list
/// of violations (empty when functionally equivalent).
pub fn verify_collapsed_chaining(
    original: &ServiceGraph,
    g: &AugmentedGraph,
    collapsed: &CollapsedEmbedding,
) -> Vec<String> {
    let mut out = Vec::new();
    for k in original.commodities() {
        let Some(paths) = collapsed.paths.get(&k.id) else {
            out.push(format!("commodity {} has no collapsed path", k.name));
            continue;
        };
        let empty = BTreeSet::new();
        let producer_sites = collapsed.placements.get(&k.producer).unwrap_or(&empty);
        let consumer_sites = collapsed.placements.get(&k.consumer).unwrap_or(&empty);
        for site in consumer_sites {
            let reached = paths.iter().any(|p| match p.last() {
                Some(&last) => g.link(last).head == *site,
                None => false,
            });
            if !reached {
                out.push(format!(
                    "commodity {} never delivered to consumer location {}",
                    k.name, site
                ));
            }
        }
        for p in paths {
            match p.first() {
                Some(&first) => {
                    let start = g.link(first).tail;
                    let origin_ok = match original.function(k.producer).kind {
                        FunctionKind::Source => g.node(start).kind == NodeKind::Source,
                        _ => g.link(first).kind == LinkKind::ComputationOut,
                    };
                    if !origin_ok || !producer_sites.contains(&start) {
                        out.push(format!(
                            "commodity {} path starts at {} which does not host its producer",
                            k.name, start
                        ));
                    }
                }
                None => out.push(format!("commodity {} mapped to an empty path", k.name)),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::{ObjectId, Rates};

    fn fun(id: u32, name: &str, kind: FunctionKind, loc: Option<u32>) -> FunctionSpec {
        FunctionSpec {
            id: FunctionId(id),
            name: name.into(),
            kind,
            location: loc.map(NodeId),
            allowed_hosts: Vec::new(),
        }
    }

    fn commodity(id: u32, name: &str, p: u32, c: u32, o: u32, r: f64) -> CommoditySpec {
        CommoditySpec::new(
            CommodityId(id),
            name,
            FunctionId(p),
            FunctionId(c),
            ObjectId(o),
            Rates::uniform(r),
        )
    }

    /// Two sources and a content store feed tracking -> synthesis -> two
    /// personalization functions, one per user. Eight commodities, two
    /// destination commodities.
    fn media_service() -> ServiceGraph {
        let functions = vec![
            fun(0, "gnb1", FunctionKind::Source, Some(100)),
            fun(1, "gnb2", FunctionKind::Source, Some(101)),
            fun(2, "cs", FunctionKind::Source, Some(102)),
            fun(3, "tracking", FunctionKind::Processing, None),
            fun(4, "synthesis", FunctionKind::Processing, None),
            fun(5, "pers1", FunctionKind::Processing, None),
            fun(6, "pers2", FunctionKind::Processing, None),
            fun(7, "user1", FunctionKind::Destination, Some(103)),
            fun(8, "user2", FunctionKind::Destination, Some(104)),
        ];
        let commodities = vec![
            commodity(0, "gnb1->tracking", 0, 3, 0, 10.0),
            commodity(1, "gnb2->tracking", 1, 3, 1, 10.0),
            commodity(2, "cs->synthesis", 2, 4, 2, 10.0),
            commodity(3, "tracking->synthesis", 3, 4, 3, 5.0),
            commodity(4, "synthesis->pers1", 4, 5, 4, 15.0),
            commodity(5, "synthesis->pers2", 4, 6, 5, 15.0),
            commodity(6, "pers1->user1", 5, 7, 6, 20.0),
            commodity(7, "pers2->user2", 6, 8, 7, 20.0),
        ];
        let objects = (0..8).map(|o| format!("o{o}")).collect();
        ServiceGraph::new(functions, commodities, objects).unwrap()
    }

    #[test]
    fn media_service_forest_shape() {
        let s = media_service();
        let f = dag_to_forest(&s).unwrap();
        assert_eq!(f.component_count(), 2);
        assert_eq!(f.graph.commodities().len(), 12);
        assert_eq!(f.graph.object_count(), 8);
        for c in &f.components {
            assert_eq!(c.commodities.len(), 6);
            assert_eq!(c.destination_commodities.len(), 1);
            assert_eq!(c.source_commodities.len(), 3);
            // every non-source function has exactly one outgoing commodity in
            // its component, except the root which has none
            for &fid in &c.functions {
                let spec = f.graph.function(fid);
                if spec.kind == FunctionKind::Source {
                    continue;
                }
                let outs = c
                    .commodities
                    .iter()
                    .filter(|&&k| f.graph.commodity(k).producer == fid)
                    .count();
                assert_eq!(outs, usize::from(fid != c.root));
            }
        }
        // objects preserved: replicated tracking output keeps its object
        let objects: BTreeSet<u32> =
            f.graph.commodities().iter().map(|k| k.object.0).collect();
        assert_eq!(objects.len(), 8);
        // sources shared: gnb1 appears once in the forest function list
        let gnb1_count =
            f.graph.functions().iter().filter(|x| x.name.starts_with("gnb1")).count();
        assert_eq!(gnb1_count, 1);
    }

    #[test]
    fn path_service_passes_through() {
        let functions = vec![
            fun(0, "s", FunctionKind::Source, Some(10)),
            fun(1, "f", FunctionKind::Processing, None),
            fun(2, "d", FunctionKind::Destination, Some(11)),
        ];
        let commodities = vec![
            commodity(0, "s->f", 0, 1, 0, 1.0),
            commodity(1, "f->d", 1, 2, 1, 2.0),
        ];
        let s = ServiceGraph::new(functions, commodities, vec!["a".into(), "b".into()]).unwrap();
        let f = dag_to_forest(&s).unwrap();
        assert_eq!(f.component_count(), 1);
        assert_eq!(f.graph.commodities().len(), 2);
        assert_eq!(f.graph.functions().len(), 3);
    }

    #[test]
    fn transform_is_idempotent_in_structure() {
        let s = media_service();
        let f1 = dag_to_forest(&s).unwrap();
        let f2 = dag_to_forest(&f1.graph).unwrap();
        assert_eq!(f1.component_count(), f2.component_count());
        assert_eq!(f1.graph.commodities().len(), f2.graph.commodities().len());
        let sizes = |f: &ServiceForest| -> Vec<usize> {
            f.components.iter().map(|c| c.commodities.len()).collect::<Vec<_>>()
        };
        assert_eq!(sizes(&f1), sizes(&f2));
    }

    #[test]
    fn component_count_matches_destination_commodities() {
        let s = media_service();
        let f = dag_to_forest(&s).unwrap();
        assert_eq!(f.component_count(), s.destination_commodities().count());
    }

    #[test]
    fn invalid_dag_rejected() {
        let functions = vec![
            fun(0, "f1", FunctionKind::Processing, None),
            fun(1, "f2", FunctionKind::Processing, None),
        ];
        let commodities = vec![
            commodity(0, "f1->f2", 0, 1, 0, 1.0),
            commodity(1, "f2->f1", 1, 0, 1, 1.0),
        ];
        let s = ServiceGraph::new(functions, commodities, vec!["a".into(), "b".into()]).unwrap();
        assert!(matches!(dag_to_forest(&s), Err(TransformError::InvalidDag(_))));
    }
}
