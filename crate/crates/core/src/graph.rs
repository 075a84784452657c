//! Executable workflow graph: a DAG of service invocations with typed
//! data-dependency edges and boundary nodes for workflow inputs and outputs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{BindTarget, OperationSig, TypeTag, TypedWorkflow, ValueSource};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn input(name: &str) -> Self {
        NodeId(format!("input:{name}"))
    }

    pub fn output(name: &str) -> Self {
        NodeId(format!("output:{name}"))
    }

    /// `port.Op` for the first occurrence, `port.Op#k` for later ones.
    pub fn invocation(port: &str, operation: &str, occurrence: usize) -> Self {
        if occurrence == 0 {
            NodeId(format!("{port}.{operation}"))
        } else {
            NodeId(format!("{port}.{operation}#{occurrence}"))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationNode {
    pub service: String,
    pub port: String,
    pub operation: String,
    pub occurrence: usize,
    pub signature: OperationSig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Input { name: String, ty: TypeTag },
    Output { name: String, ty: TypeTag },
    Invocation(InvocationNode),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
}

impl Node {
    pub fn invocation(&self) -> Option<&InvocationNode> {
        match &self.kind {
            NodeKind::Invocation(inv) => Some(inv),
            _ => None,
        }
    }

    pub fn is_invocation(&self) -> bool {
        self.invocation().is_some()
    }

    /// Type of the value this node produces (inputs and invocations).
    pub fn produces(&self) -> Option<TypeTag> {
        match &self.kind {
            NodeKind::Input { ty, .. } => Some(*ty),
            NodeKind::Invocation(inv) => Some(inv.signature.returns),
            NodeKind::Output { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            NodeKind::Input { name, .. } | NodeKind::Output { name, .. } => name.clone(),
            NodeKind::Invocation(inv) => format!("{}.{}", inv.port, inv.operation),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub param: Option<String>,
    pub ty: TypeTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionRef {
    pub id: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceRef {
    pub id: String,
    pub description: String,
    pub service_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortRef {
    pub id: String,
    pub service: String,
    pub port_name: String,
}

/// Declarations needed to re-encode invocations as a stand-alone workflow.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceCatalog {
    pub descriptions: Vec<DescriptionRef>,
    pub services: Vec<ServiceRef>,
    pub ports: Vec<PortRef>,
}

impl ServiceCatalog {
    pub fn port(&self, id: &str) -> Option<&PortRef> {
        self.ports.iter().find(|p| p.id == id)
    }

    pub fn service(&self, id: &str) -> Option<&ServiceRef> {
        self.services.iter().find(|s| s.id == id)
    }

    pub fn description(&self, id: &str) -> Option<&DescriptionRef> {
        self.descriptions.iter().find(|d| d.id == id)
    }

    /// Restricts the catalog to what the given ports need, keeping declaration order.
    pub fn subset<'a>(&self, ports: impl IntoIterator<Item = &'a str>) -> ServiceCatalog {
        let ports: BTreeSet<&str> = ports.into_iter().collect();
        let kept_ports: Vec<PortRef> = self
            .ports
            .iter()
            .filter(|p| ports.contains(p.id.as_str()))
            .cloned()
            .collect();
        let services: BTreeSet<&str> = kept_ports.iter().map(|p| p.service.as_str()).collect();
        let kept_services: Vec<ServiceRef> = self
            .services
            .iter()
            .filter(|s| services.contains(s.id.as_str()))
            .cloned()
            .collect();
        let descs: BTreeSet<&str> = kept_services.iter().map(|s| s.description.as_str()).collect();
        ServiceCatalog {
            descriptions: self
                .descriptions
                .iter()
                .filter(|d| descs.contains(d.id.as_str()))
                .cloned()
                .collect(),
            services: kept_services,
            ports: kept_ports,
        }
    }

    /// Identity of the operation behind a port that does not depend on local ids.
    fn global_label(&self, inv: &InvocationNode) -> String {
        let port = self.port(&inv.port);
        let service = port.and_then(|p| self.service(&p.service));
        let url = service
            .and_then(|s| self.description(&s.description))
            .map(|d| d.url.as_str())
            .unwrap_or("?");
        format!(
            "{url}|{}|{}|{}",
            service.map(|s| s.service_name.as_str()).unwrap_or("?"),
            port.map(|p| p.port_name.as_str()).unwrap_or("?"),
            inv.operation
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub name: String,
    pub uid: Option<String>,
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("dependency cycle: {}", .0.iter().map(|n| n.as_str()).collect::<Vec<_>>().join(" -> "))]
    Cycle(Vec<NodeId>),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid graph: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowGraph {
    pub meta: GraphMeta,
    pub catalog: ServiceCatalog,
    nodes: BTreeMap<NodeId, Node>,
    edges: Vec<DataEdge>,
    /// Source-level variable names attached to producing nodes.
    value_names: BTreeMap<NodeId, String>,
}

impl WorkflowGraph {
    /// Validates and assembles a graph. Rejects dangling edges, arity
    /// mismatches, malformed boundary nodes and cycles.
    pub fn new(
        meta: GraphMeta,
        catalog: ServiceCatalog,
        nodes: impl IntoIterator<Item = Node>,
        edges: Vec<DataEdge>,
        value_names: BTreeMap<NodeId, String>,
    ) -> Result<Self, GraphError> {
        let mut map = BTreeMap::new();
        for node in nodes {
            if map.insert(node.id.clone(), node).is_some() {
                return Err(GraphError::Invalid("duplicate node id".into()));
            }
        }
        let graph = WorkflowGraph {
            meta,
            catalog,
            nodes: map,
            edges,
            value_names,
        };
        graph.validate()?;
        Ok(graph)
    }

    fn validate(&self) -> Result<(), GraphError> {
        let mut incoming: HashMap<&NodeId, Vec<&DataEdge>> = HashMap::new();
        for e in &self.edges {
            let from = self.node(&e.from)?;
            self.node(&e.to)?;
            if matches!(from.kind, NodeKind::Output { .. }) {
                return Err(GraphError::Invalid(format!("output {} has an outgoing edge", e.from)));
            }
            incoming.entry(&e.to).or_default().push(e);
        }
        for node in self.nodes.values() {
            let ins = incoming.get(&node.id).map(Vec::as_slice).unwrap_or(&[]);
            match &node.kind {
                NodeKind::Input { .. } if !ins.is_empty() => {
                    return Err(GraphError::Invalid(format!("input {} has an incoming edge", node.id)))
                }
                NodeKind::Output { .. } if ins.len() != 1 => {
                    return Err(GraphError::Invalid(format!(
                        "output {} has {} incoming edges",
                        node.id,
                        ins.len()
                    )))
                }
                NodeKind::Invocation(inv) => {
                    let arity = inv.signature.arity();
                    if ins.len() != arity {
                        return Err(GraphError::Invalid(format!(
                            "{} has {} incoming edges for arity {arity}",
                            node.id,
                            ins.len()
                        )));
                    }
                    let mut seen = BTreeSet::new();
                    for e in ins {
                        let ok = match &e.param {
                            Some(p) => arity > 1 && inv.signature.param_index(p).is_some(),
                            None => arity == 1,
                        };
                        if !ok || !seen.insert(e.param.clone()) {
                            return Err(GraphError::Invalid(format!(
                                "bad parameter binding {:?} into {}",
                                e.param, node.id
                            )));
                        }
                    }
                }
                _ => {}
            }
        }
        if let Some(cycle) = self.find_cycle() {
            return Err(GraphError::Cycle(cycle));
        }
        Ok(())
    }

    fn find_cycle(&self) -> Option<Vec<NodeId>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let succ = self.successor_map();
        let mut mark: BTreeMap<&NodeId, Mark> = self.nodes.keys().map(|k| (k, Mark::New)).collect();
        for start in self.nodes.keys() {
            if mark[start] != Mark::New {
                continue;
            }
            let mut stack: Vec<(&NodeId, usize)> = vec![(start, 0)];
            mark.insert(start, Mark::Active);
            while let Some(&mut (node, ref mut next)) = stack.last_mut() {
                let children = succ.get(node).map(Vec::as_slice).unwrap_or(&[]);
                if *next < children.len() {
                    let child = children[*next];
                    *next += 1;
                    match mark[child] {
                        Mark::New => {
                            mark.insert(child, Mark::Active);
                            stack.push((child, 0));
                        }
                        Mark::Active => {
                            let from = stack.iter().position(|(n, _)| *n == child).unwrap();
                            let mut cycle: Vec<NodeId> =
                                stack[from..].iter().map(|(n, _)| (*n).clone()).collect();
                            cycle.push(child.clone());
                            return Some(cycle);
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark.insert(node, Mark::Done);
                    stack.pop();
                }
            }
        }
        None
    }

    fn successor_map(&self) -> BTreeMap<&NodeId, Vec<&NodeId>> {
        let mut succ: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
        for e in &self.edges {
            succ.entry(&e.from).or_default().push(&e.to);
        }
        for v in succ.values_mut() {
            v.sort();
            v.dedup();
        }
        succ
    }

    pub fn node(&self, id: &NodeId) -> Result<&Node, GraphError> {
        self.nodes.get(id).ok_or_else(|| GraphError::UnknownNode(id.clone()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> &[DataEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn invocations(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.is_invocation())
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Node> {
        self.nodes
            .values()
            .filter(|n| matches!(n.kind, NodeKind::Input { .. }))
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Node> {
        self.nodes
            .values()
            .filter(|n| matches!(n.kind, NodeKind::Output { .. }))
    }

    pub fn in_edges<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a DataEdge> + 'a {
        self.edges.iter().filter(move |e| &e.to == id)
    }

    pub fn out_edges<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a DataEdge> + 'a {
        self.edges.iter().filter(move |e| &e.from == id)
    }

    /// Source-level name of the value produced by `id`, if the source had one.
    pub fn value_name(&self, id: &NodeId) -> Option<&str> {
        if let Some(Node {
            kind: NodeKind::Input { name, .. },
            ..
        }) = self.nodes.get(id)
        {
            return Some(name);
        }
        self.value_names.get(id).map(String::as_str)
    }

    pub fn value_names(&self) -> &BTreeMap<NodeId, String> {
        &self.value_names
    }

    /// Kahn's algorithm; ties go to the lexicographically smallest node id.
    pub fn topo_order(&self) -> Vec<NodeId> {
        let mut indeg: BTreeMap<&NodeId, usize> = self.nodes.keys().map(|k| (k, 0)).collect();
        let succ = self.successor_map();
        for targets in succ.values() {
            for t in targets {
                *indeg.get_mut(t).unwrap() += 1;
            }
        }
        let mut ready: BTreeSet<&NodeId> =
            indeg.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(next) = ready.pop_first() {
            order.push(next.clone());
            for t in succ.get(next).map(Vec::as_slice).unwrap_or(&[]) {
                let d = indeg.get_mut(t).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(t);
                }
            }
        }
        order
    }

    /// All ancestors of the given nodes (excluding the nodes themselves unless
    /// one is an ancestor of another).
    pub fn dependency_closure(&self, ids: &BTreeSet<NodeId>) -> Result<BTreeSet<NodeId>, GraphError> {
        for id in ids {
            self.node(id)?;
        }
        let mut preds: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
        for e in &self.edges {
            preds.entry(&e.to).or_default().push(&e.from);
        }
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&NodeId> = ids.iter().collect();
        while let Some(n) = stack.pop() {
            for p in preds.get(n).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert((*p).clone()) {
                    stack.push(p);
                }
            }
        }
        Ok(seen)
    }

    /// Graphviz rendering for documentation and debugging.
    pub fn to_dot(&self) -> String {
        let mut out = format!("digraph \"{}\" {{\n", self.meta.name);
        for node in self.nodes.values() {
            let shape = match node.kind {
                NodeKind::Invocation(_) => "box",
                _ => "ellipse",
            };
            out.push_str(&format!(
                "  \"{}\" [label=\"{}\", shape={shape}];\n",
                node.id,
                node.label()
            ));
        }
        for e in &self.edges {
            match &e.param {
                Some(p) => out.push_str(&format!("  \"{}\" -> \"{}\" [label=\"{p}\"];\n", e.from, e.to)),
                None => out.push_str(&format!("  \"{}\" -> \"{}\";\n", e.from, e.to)),
            }
        }
        out.push_str("}\n");
        out
    }

    fn iso_label(&self, node: &Node) -> String {
        match &node.kind {
            NodeKind::Input { ty, .. } => format!("in:{ty}"),
            NodeKind::Output { ty, .. } => format!("out:{ty}"),
            NodeKind::Invocation(inv) => self.catalog.global_label(inv),
        }
    }

    /// Labelled-DAG isomorphism that ignores local identifiers: boundary
    /// nodes match by type, invocations by the described operation they call.
    pub fn is_isomorphic(&self, other: &WorkflowGraph) -> bool {
        if self.nodes.len() != other.nodes.len() || self.edges.len() != other.edges.len() {
            return false;
        }
        let la: BTreeMap<&NodeId, String> =
            self.nodes.values().map(|n| (&n.id, self.iso_label(n))).collect();
        let lb: BTreeMap<&NodeId, String> =
            other.nodes.values().map(|n| (&n.id, other.iso_label(n))).collect();
        let mut hist_a: Vec<&String> = la.values().collect();
        let mut hist_b: Vec<&String> = lb.values().collect();
        hist_a.sort();
        hist_b.sort();
        if hist_a != hist_b {
            return false;
        }

        let edge_labels = |g: &WorkflowGraph| {
            let mut m: HashMap<(NodeId, NodeId), Vec<String>> = HashMap::new();
            for e in &g.edges {
                m.entry((e.from.clone(), e.to.clone()))
                    .or_default()
                    .push(format!("{:?}:{}", e.param, e.ty));
            }
            for v in m.values_mut() {
                v.sort();
            }
            m
        };
        let ea = edge_labels(self);
        let eb = edge_labels(other);
        let degree = |g: &WorkflowGraph, id: &NodeId| {
            (g.in_edges(id).count(), g.out_edges(id).count())
        };
        let order = self.topo_order();

        fn search(
            i: usize,
            order: &[NodeId],
            ctx: &IsoCtx<'_>,
            map: &mut BTreeMap<NodeId, NodeId>,
            used: &mut BTreeSet<NodeId>,
        ) -> bool {
            if i == order.len() {
                return true;
            }
            let a = &order[i];
            for b in ctx.candidates(a) {
                if used.contains(b) || !ctx.consistent(a, b, map) {
                    continue;
                }
                map.insert(a.clone(), b.clone());
                used.insert(b.clone());
                if search(i + 1, order, ctx, map, used) {
                    return true;
                }
                map.remove(a);
                used.remove(b);
            }
            false
        }

        struct IsoCtx<'g> {
            cands: BTreeMap<NodeId, Vec<NodeId>>,
            ea: &'g HashMap<(NodeId, NodeId), Vec<String>>,
            eb: &'g HashMap<(NodeId, NodeId), Vec<String>>,
        }
        impl IsoCtx<'_> {
            fn candidates(&self, a: &NodeId) -> &[NodeId] {
                self.cands.get(a).map(Vec::as_slice).unwrap_or(&[])
            }
            fn consistent(&self, a: &NodeId, b: &NodeId, map: &BTreeMap<NodeId, NodeId>) -> bool {
                map.iter().all(|(ma, mb)| {
                    self.ea.get(&(ma.clone(), a.clone())) == self.eb.get(&(mb.clone(), b.clone()))
                        && self.ea.get(&(a.clone(), ma.clone())) == self.eb.get(&(b.clone(), mb.clone()))
                })
            }
        }

        let cands = self
            .nodes
            .keys()
            .map(|a| {
                let list = other
                    .nodes
                    .keys()
                    .filter(|b| la[a] == lb[b] && degree(self, a) == degree(other, b))
                    .cloned()
                    .collect();
                (a.clone(), list)
            })
            .collect();
        let ctx = IsoCtx {
            cands,
            ea: &ea,
            eb: &eb,
        };
        search(0, &order, &ctx, &mut BTreeMap::new(), &mut BTreeSet::new())
    }
}

/// Builds the executable graph from a checked workflow.
pub fn build_graph(typed: &TypedWorkflow) -> Result<WorkflowGraph, GraphError> {
    let ast = &typed.ast;
    let inv_ids: Vec<NodeId> = typed
        .invocations
        .iter()
        .map(|i| NodeId::invocation(&i.port, &i.operation, i.occurrence))
        .collect();

    let mut nodes = Vec::new();
    for input in &ast.inputs {
        nodes.push(Node {
            id: NodeId::input(&input.name),
            kind: NodeKind::Input {
                name: input.name.clone(),
                ty: input.ty,
            },
        });
    }
    for output in &ast.outputs {
        nodes.push(Node {
            id: NodeId::output(&output.name),
            kind: NodeKind::Output {
                name: output.name.clone(),
                ty: output.ty,
            },
        });
    }
    for (inv, id) in typed.invocations.iter().zip(&inv_ids) {
        nodes.push(Node {
            id: id.clone(),
            kind: NodeKind::Invocation(InvocationNode {
                service: inv.service.clone(),
                port: inv.port.clone(),
                operation: inv.operation.clone(),
                occurrence: inv.occurrence,
                signature: inv.signature.clone(),
            }),
        });
    }

    let source_id = |src: &ValueSource| match src {
        ValueSource::Input(n) => NodeId::input(n),
        ValueSource::Invocation(i) => inv_ids[*i].clone(),
    };
    let edges = typed
        .bindings
        .iter()
        .map(|b| match &b.target {
            BindTarget::Param { invocation, param } => {
                let sig = &typed.invocations[*invocation].signature;
                DataEdge {
                    from: source_id(&b.source),
                    to: inv_ids[*invocation].clone(),
                    param: (sig.arity() > 1).then(|| sig.params[*param].name.clone()),
                    ty: b.ty,
                }
            }
            BindTarget::Output(name) => DataEdge {
                from: source_id(&b.source),
                to: NodeId::output(name),
                param: None,
                ty: b.ty,
            },
        })
        .collect();

    let mut value_names = BTreeMap::new();
    for (name, src) in &typed.names {
        if let ValueSource::Invocation(i) = src {
            value_names.entry(inv_ids[*i].clone()).or_insert_with(|| name.clone());
        }
    }

    let catalog = ServiceCatalog {
        descriptions: ast
            .descriptions
            .iter()
            .map(|d| DescriptionRef {
                id: d.id.clone(),
                url: d.url.clone(),
            })
            .collect(),
        services: ast
            .services
            .iter()
            .map(|s| ServiceRef {
                id: s.id.clone(),
                description: s.description.clone(),
                service_name: s.service_name.clone(),
            })
            .collect(),
        ports: ast
            .ports
            .iter()
            .map(|p| PortRef {
                id: p.id.clone(),
                service: p.service.clone(),
                port_name: p.port_name.clone(),
            })
            .collect(),
    };
    WorkflowGraph::new(
        GraphMeta {
            name: ast.name.clone(),
            uid: ast.uid.clone(),
            origin: ast.origin.clone(),
        },
        catalog,
        nodes,
        edges,
        value_names,
    )
}
