//! Re-encoding of composite workflows as source text.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::ast::{SourceUnit, TypeTag};
use super::error::DslError;
use crate::graph::{DataEdge, Node, NodeKind};
use crate::partitioner::CompositeWorkflow;

/// Emits a stand-alone workflow source for `composite`.
///
/// Statement order: `workflow`, `uid`, engines, descriptions, services,
/// ports, `input:`, `output:`, flows in topological order of their
/// producers, forwards. A producer that also feeds a declared output is
/// bound to that output first and its other consumers read the variable.
pub fn encode(composite: &CompositeWorkflow) -> Result<SourceUnit, DslError> {
    let g = &composite.graph;
    if g.edges().is_empty() {
        return Err(DslError::Encode(format!(
            "composite {} has no flows",
            composite.display_name()
        )));
    }
    for node in g.invocations() {
        let inv = node.invocation().unwrap();
        if g.catalog.port(&inv.port).is_none() {
            return Err(DslError::Encode(format!("port {} is not declared", inv.port)));
        }
    }
    let outputs: Vec<&str> = g
        .outputs()
        .filter_map(|n| match &n.kind {
            NodeKind::Output { name, .. } => Some(name.as_str()),
            _ => None,
        })
        .collect();
    for fwd in &composite.forwards {
        if !outputs.contains(&fwd.variable.as_str()) {
            return Err(DslError::Encode(format!(
                "forwarded variable {} is not an output of the composite",
                fwd.variable
            )));
        }
        if !composite.engines.iter().any(|e| e.id == fwd.engine) {
            return Err(DslError::Encode(format!("engine {} is not declared", fwd.engine)));
        }
    }

    let mut out = String::new();
    writeln!(out, "workflow {}", g.meta.name).unwrap();
    if let Some(uid) = &composite.uid {
        writeln!(out, "uid {uid}").unwrap();
    }
    for e in &composite.engines {
        writeln!(out, "engine {} is {}", e.id, e.url).unwrap();
    }
    for d in &g.catalog.descriptions {
        writeln!(out, "description {} is {}", d.id, d.url).unwrap();
    }
    for s in &g.catalog.services {
        writeln!(out, "service {} is {}.{}", s.id, s.description, s.service_name).unwrap();
    }
    for p in &g.catalog.ports {
        writeln!(out, "port {} is {}.{}", p.id, p.service, p.port_name).unwrap();
    }

    let order = g.topo_order();
    let boundary = |want_input: bool| -> Vec<(String, TypeTag)> {
        order
            .iter()
            .filter_map(|id| match &g.node(id).ok()?.kind {
                NodeKind::Input { name, ty } if want_input => Some((name.clone(), *ty)),
                NodeKind::Output { name, ty } if !want_input => Some((name.clone(), *ty)),
                _ => None,
            })
            .collect()
    };
    out.push_str("input:\n");
    write_typed_block(&mut out, &boundary(true));
    out.push_str("output:\n");
    write_typed_block(&mut out, &boundary(false));

    for id in &order {
        let node = g.node(id).map_err(|e| DslError::Encode(e.to_string()))?;
        let source = match &node.kind {
            NodeKind::Input { name, .. } => name.clone(),
            NodeKind::Invocation(inv) => format!("{}.{}", inv.port, inv.operation),
            NodeKind::Output { .. } => continue,
        };
        let mut edges: Vec<&DataEdge> = g.out_edges(id).collect();
        edges.sort_by(|a, b| (&a.to, &a.param).cmp(&(&b.to, &b.param)));
        let (to_outputs, to_consumers): (Vec<&DataEdge>, Vec<&DataEdge>) = edges
            .into_iter()
            .partition(|e| matches!(g.node(&e.to).map(|n| &n.kind), Ok(NodeKind::Output { .. })));
        let out_names: Vec<String> = to_outputs
            .iter()
            .map(|e| g.node(&e.to).map(Node::label).unwrap_or_default())
            .collect();
        let consumers: Vec<String> = to_consumers
            .iter()
            .map(|e| target_text(g.node(&e.to).ok(), e))
            .collect();

        if node.is_invocation() && !out_names.is_empty() {
            writeln!(out, "{source} -> {}", out_names.join(", ")).unwrap();
            if !consumers.is_empty() {
                writeln!(out, "{} -> {}", out_names[0], consumers.join(", ")).unwrap();
            }
        } else {
            let targets: Vec<String> = out_names.into_iter().chain(consumers).collect();
            if !targets.is_empty() {
                writeln!(out, "{source} -> {}", targets.join(", ")).unwrap();
            }
        }
    }

    for fwd in &composite.forwards {
        writeln!(out, "forward {} to {}", fwd.variable, fwd.engine).unwrap();
    }
    Ok(SourceUnit::new(composite.display_name(), out))
}

fn target_text(node: Option<&Node>, edge: &DataEdge) -> String {
    let label = node.map(Node::label).unwrap_or_default();
    match &edge.param {
        Some(p) => format!("{label}.{p}"),
        None => label,
    }
}

fn write_typed_block(out: &mut String, vars: &[(String, TypeTag)]) {
    let mut groups: BTreeMap<usize, (TypeTag, Vec<&str>)> = BTreeMap::new();
    let mut first_seen: Vec<TypeTag> = Vec::new();
    for (name, ty) in vars {
        let slot = match first_seen.iter().position(|t| t == ty) {
            Some(i) => i,
            None => {
                first_seen.push(*ty);
                first_seen.len() - 1
            }
        };
        groups.entry(slot).or_insert((*ty, vec![])).1.push(name);
    }
    for (ty, names) in groups.values() {
        writeln!(out, "   {ty} {}", names.join(", ")).unwrap();
    }
}
