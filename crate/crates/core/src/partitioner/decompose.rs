use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::compose::value_names;
use crate::dsl::TypeTag;
use crate::graph::{NodeId, WorkflowGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalInput {
    pub name: String,
    pub ty: TypeTag,
    /// A workflow input node or an invocation outside the sub-workflow.
    pub producer: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProducedOutput {
    pub name: String,
    pub ty: TypeTag,
    pub producer: NodeId,
    /// Invocations outside the sub-workflow or workflow output nodes.
    pub consumers: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubWorkflow {
    pub id: usize,
    /// Topologically ordered.
    pub nodes: Vec<NodeId>,
    pub service_id: String,
    pub required_inputs: Vec<ExternalInput>,
    pub produced_outputs: Vec<ProducedOutput>,
}

impl SubWorkflow {
    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains(id)
    }
}

/// Finest split in which invocations of one service joined by a direct
/// edge stay together.
pub fn decompose(g: &WorkflowGraph) -> Vec<SubWorkflow> {
    let order = g.topo_order();
    let rank: BTreeMap<&NodeId, usize> = order.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let service = |id: &NodeId| g.node(id).ok().and_then(|n| n.invocation()).map(|i| i.service.clone());

    let inv: Vec<&NodeId> = order.iter().filter(|id| service(id).is_some()).collect();
    let index: BTreeMap<&NodeId, usize> = inv.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut parent: Vec<usize> = (0..inv.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in g.edges() {
        if let (Some(&a), Some(&b)) = (index.get(&e.from), index.get(&e.to)) {
            if service(&e.from) == service(&e.to) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }

    let mut blocks: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for (i, n) in inv.iter().enumerate() {
        let root = find(&mut parent, i);
        blocks.entry(root).or_default().push((*n).clone());
    }
    let mut blocks: Vec<Vec<NodeId>> = blocks.into_values().collect();
    for b in &mut blocks {
        b.sort_by_key(|n| rank[n]);
    }
    blocks.sort_by_key(|b| rank[&b[0]]);

    let names = value_names(g);
    blocks
        .into_iter()
        .enumerate()
        .map(|(id, nodes)| {
            let members: BTreeSet<&NodeId> = nodes.iter().collect();
            let mut required_inputs: Vec<ExternalInput> = Vec::new();
            let mut produced: BTreeMap<&NodeId, ProducedOutput> = BTreeMap::new();
            for e in g.edges() {
                let from_in = members.contains(&e.from);
                let to_in = members.contains(&e.to);
                if to_in && !from_in && !required_inputs.iter().any(|r| r.producer == e.from) {
                    required_inputs.push(ExternalInput {
                        name: names[&e.from].clone(),
                        ty: e.ty,
                        producer: e.from.clone(),
                    });
                }
                if from_in && !to_in {
                    let out = produced.entry(&e.from).or_insert_with(|| ProducedOutput {
                        name: names[&e.from].clone(),
                        ty: e.ty,
                        producer: e.from.clone(),
                        consumers: vec![],
                    });
                    if !out.consumers.contains(&e.to) {
                        out.consumers.push(e.to.clone());
                    }
                }
            }
            let mut produced_outputs: Vec<ProducedOutput> = produced.into_values().collect();
            produced_outputs.sort_by_key(|p| rank[&p.producer]);
            for p in &mut produced_outputs {
                p.consumers.sort();
            }
            SubWorkflow {
                id,
                service_id: service(&nodes[0]).unwrap(),
                nodes,
                required_inputs,
                produced_outputs,
            }
        })
        .collect()
}
