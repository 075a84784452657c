use std::collections::{BTreeMap, BTreeSet};

use super::{CompositeWorkflow, EngineDecl, Forward, PartitionError, PlacementPlan, SubWorkflow};
use crate::dsl::is_keyword;
use crate::graph::{DataEdge, GraphMeta, Node, NodeId, NodeKind, WorkflowGraph};
use crate::qos::{EngineId, EngineInfo};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComposeOptions {
    /// Engine that collects final outputs. `None` leaves them at the
    /// producing engine.
    pub sink: Option<EngineId>,
    /// Composites get `base.1`, `base.2`, ...
    pub base_uid: Option<String>,
}

/// Variable name for every value-producing node: inputs keep their name,
/// invocations use the first source-level name bound to them, otherwise a
/// generated `v_<port>_<op>` name that collides with nothing else.
pub fn value_names(g: &WorkflowGraph) -> BTreeMap<NodeId, String> {
    let mut taken: BTreeSet<String> = g
        .nodes()
        .filter(|n| !n.is_invocation())
        .map(|n| n.label())
        .chain(g.value_names().values().cloned())
        .collect();
    let mut out = BTreeMap::new();
    for node in g.nodes() {
        match &node.kind {
            NodeKind::Input { name, .. } => {
                out.insert(node.id.clone(), name.clone());
            }
            NodeKind::Invocation(inv) => {
                let name = match g.value_name(&node.id) {
                    Some(n) => n.to_string(),
                    None => {
                        let mut base = format!("v_{}_{}", inv.port, inv.operation);
                        if inv.occurrence > 0 {
                            base.push_str(&format!("_{}", inv.occurrence));
                        }
                        let mut name = base.clone();
                        let mut n = 1;
                        while taken.contains(&name) || is_keyword(&name) {
                            name = format!("{base}_{n}");
                            n += 1;
                        }
                        taken.insert(name.clone());
                        name
                    }
                };
                out.insert(node.id.clone(), name);
            }
            NodeKind::Output { .. } => {}
        }
    }
    out
}

/// The whole graph as a single composite without forwards.
pub fn graph_to_composite(g: &WorkflowGraph) -> CompositeWorkflow {
    CompositeWorkflow {
        uid: g.meta.uid.clone(),
        ordinal: 1,
        host_engine: None,
        graph: g.clone(),
        engines: vec![],
        forwards: vec![],
    }
}

#[derive(Default)]
struct Builder {
    nodes: BTreeMap<NodeId, Node>,
    edges: Vec<DataEdge>,
    forwards: BTreeSet<(usize, String, EngineId)>,
}

impl Builder {
    fn input(&mut self, name: &str, ty: crate::dsl::TypeTag) -> NodeId {
        let id = NodeId::input(name);
        self.nodes.entry(id.clone()).or_insert_with(|| Node {
            id: id.clone(),
            kind: NodeKind::Input {
                name: name.to_string(),
                ty,
            },
        });
        id
    }

    /// Adds an output fed by `from` unless it already exists.
    fn output(&mut self, name: &str, from: &NodeId, ty: crate::dsl::TypeTag) {
        let id = NodeId::output(name);
        if self.nodes.contains_key(&id) {
            return;
        }
        self.nodes.insert(
            id.clone(),
            Node {
                id: id.clone(),
                kind: NodeKind::Output {
                    name: name.to_string(),
                    ty,
                },
            },
        );
        self.edges.push(DataEdge {
            from: from.clone(),
            to: id,
            param: None,
            ty,
        });
    }
}

/// Combines sub-workflows placed on the same engine into one stand-alone
/// composite per engine.
///
/// Cross-engine dependencies become an output plus a forward on the
/// producing side and an input on the consuming side. Composites are
/// numbered by the topological position of their earliest invocation.
pub fn compose(
    g: &WorkflowGraph,
    subs: &[SubWorkflow],
    plan: &PlacementPlan,
    engines: &[EngineInfo],
    options: &ComposeOptions,
) -> Result<Vec<CompositeWorkflow>, PartitionError> {
    let names = value_names(g);
    let rank: BTreeMap<NodeId, usize> = g
        .topo_order()
        .into_iter()
        .enumerate()
        .map(|(i, n)| (n, i))
        .collect();

    let mut host: BTreeMap<&NodeId, &EngineId> = BTreeMap::new();
    let mut groups: BTreeMap<&EngineId, BTreeSet<&NodeId>> = BTreeMap::new();
    for sub in subs {
        let engine = plan.engine_for(sub.id).ok_or(PartitionError::Unplaced(sub.id))?;
        for n in &sub.nodes {
            host.insert(n, engine);
            groups.entry(engine).or_default().insert(n);
        }
    }
    let mut groups: Vec<(EngineId, BTreeSet<&NodeId>)> =
        groups.into_iter().map(|(e, m)| (e.clone(), m)).collect();
    groups.sort_by_key(|(_, m)| m.iter().map(|n| rank[*n]).min());

    let is_kind = |id: &NodeId, output: bool| {
        matches!(
            (g.node(id).map(|n| &n.kind), output),
            (Ok(NodeKind::Output { .. }), true) | (Ok(NodeKind::Input { .. }), false)
        )
    };
    let has_pass_through = g
        .edges()
        .iter()
        .any(|e| is_kind(&e.from, false) && is_kind(&e.to, true));
    if has_pass_through && groups.is_empty() {
        let engine = options
            .sink
            .clone()
            .or_else(|| engines.first().map(|e| e.id.clone()))
            .ok_or(PartitionError::NoHost)?;
        groups.push((engine, BTreeSet::new()));
    }

    let mut composites = Vec::with_capacity(groups.len());
    for (index, (engine, members)) in groups.iter().enumerate() {
        let mut b = Builder::default();
        for n in members {
            let node = g.node(n)?.clone();
            b.nodes.insert(node.id.clone(), node);
        }
        for e in g.edges() {
            let from_local = members.contains(&e.from);
            let to_local = members.contains(&e.to);
            let to_output = is_kind(&e.to, true);
            if to_local {
                let from = if from_local {
                    e.from.clone()
                } else {
                    b.input(&names[&e.from], e.ty)
                };
                b.edges.push(DataEdge {
                    from,
                    to: e.to.clone(),
                    param: e.param.clone(),
                    ty: e.ty,
                });
            } else if from_local && to_output {
                let name = g.node(&e.to)?.label();
                b.output(&name, &e.from, e.ty);
                if let Some(sink) = options.sink.as_ref().filter(|s| *s != engine) {
                    b.forwards.insert((rank[&e.from], name, sink.clone()));
                }
            } else if from_local {
                let name = &names[&e.from];
                b.output(name, &e.from, e.ty);
                let dest = host[&e.to];
                b.forwards.insert((rank[&e.from], name.clone(), dest.clone()));
            } else if index == 0 && to_output && is_kind(&e.from, false) {
                let from = b.input(&names[&e.from], e.ty);
                let name = g.node(&e.to)?.label();
                b.output(&name, &from, e.ty);
                if let Some(sink) = options.sink.as_ref().filter(|s| *s != engine) {
                    b.forwards.insert((rank[&e.from], name, sink.clone()));
                }
            }
        }

        let forwards: Vec<Forward> = b
            .forwards
            .iter()
            .map(|(_, variable, engine)| Forward {
                variable: variable.clone(),
                engine: engine.clone(),
            })
            .collect();
        let mut decls: Vec<EngineDecl> = Vec::new();
        for f in &forwards {
            if decls.iter().any(|d| d.id == f.engine) {
                continue;
            }
            let info = engines
                .iter()
                .find(|e| e.id == f.engine)
                .ok_or_else(|| PartitionError::UnknownEngine(f.engine.clone()))?;
            decls.push(EngineDecl {
                id: info.id.clone(),
                url: info.endpoint.clone(),
            });
        }

        let ordinal = index + 1;
        let uid = options.base_uid.as_ref().map(|base| format!("{base}.{ordinal}"));
        let ports = members.iter().filter_map(|n| g.node(n).ok()?.invocation().map(|i| i.port.as_str()));
        let catalog = g.catalog.subset(ports);
        let kept_names: BTreeMap<NodeId, String> = g
            .value_names()
            .iter()
            .filter(|(id, _)| members.contains(id))
            .map(|(id, n)| (id.clone(), n.clone()))
            .collect();
        let graph = WorkflowGraph::new(
            GraphMeta {
                name: g.meta.name.clone(),
                uid: uid.clone(),
                origin: g.meta.origin.clone(),
            },
            catalog,
            b.nodes.into_values(),
            b.edges,
            kept_names,
        )?;
        composites.push(CompositeWorkflow {
            uid,
            ordinal,
            host_engine: Some(engine.clone()),
            graph,
            engines: decls,
            forwards,
        });
    }
    Ok(composites)
}
