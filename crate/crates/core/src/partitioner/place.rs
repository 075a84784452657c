use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{PartitionError, SubWorkflow};
use crate::graph::{NodeId, NodeKind, WorkflowGraph};
use crate::qos::{
    cluster_engines, rank_engines, split_dominated, Cluster, EngineId, EngineInfo, QosError, QosMatrix,
    QosSample, TransmissionEstimate,
};

pub const DEFAULT_K: usize = 3;

/// Predicts how much data a sub-workflow sends to its service.
pub trait SizeEstimator {
    fn input_mb(&self, sub: &SubWorkflow) -> f64;
}

/// Workflow inputs have declared sizes; every invocation's output is as
/// large as its largest input.
#[derive(Debug, Clone)]
pub struct IdentitySizes {
    sizes: BTreeMap<NodeId, f64>,
}

impl IdentitySizes {
    /// `inputs` maps workflow input names to MB; undeclared inputs use `default_mb`.
    pub fn new(g: &WorkflowGraph, inputs: &BTreeMap<String, f64>, default_mb: f64) -> Self {
        let mut sizes = BTreeMap::new();
        for id in g.topo_order() {
            let node = match g.node(&id) {
                Ok(n) => n,
                Err(_) => continue,
            };
            let size = match &node.kind {
                NodeKind::Input { name, .. } => inputs.get(name).copied().unwrap_or(default_mb),
                _ => g
                    .in_edges(&id)
                    .map(|e| sizes.get(&e.from).copied().unwrap_or(0.0))
                    .fold(0.0, f64::max),
            };
            sizes.insert(id, size);
        }
        Self { sizes }
    }

    pub fn uniform(g: &WorkflowGraph, mb: f64) -> Self {
        Self::new(g, &BTreeMap::new(), mb)
    }

    pub fn node_mb(&self, id: &NodeId) -> f64 {
        self.sizes.get(id).copied().unwrap_or(0.0)
    }
}

impl SizeEstimator for IdentitySizes {
    fn input_mb(&self, sub: &SubWorkflow) -> f64 {
        sub.required_inputs.iter().map(|r| self.node_mb(&r.producer)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubPlacement {
    pub sub: usize,
    pub service: String,
    pub input_mb: f64,
    pub clusters: Vec<Cluster>,
    pub eliminated: Vec<Cluster>,
    /// Survivor estimates, best first.
    pub estimates: Vec<TransmissionEstimate>,
    pub selected: EngineId,
    /// Set when elimination removed the engine that would have won without it.
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub assignments: BTreeMap<usize, EngineId>,
    pub audit: Vec<SubPlacement>,
}

impl PlacementPlan {
    /// Every sub-workflow on one engine.
    pub fn single(subs: &[SubWorkflow], engine: &str) -> Self {
        Self {
            assignments: subs.iter().map(|s| (s.id, engine.to_string())).collect(),
            audit: vec![],
        }
    }

    pub fn engine_for(&self, sub: usize) -> Option<&EngineId> {
        self.assignments.get(&sub)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

pub fn place(
    subs: &[SubWorkflow],
    engines: &[EngineInfo],
    qos: &QosMatrix,
    sizes: &dyn SizeEstimator,
) -> Result<PlacementPlan, PartitionError> {
    place_with(subs, engines, qos, sizes, DEFAULT_K)
}

/// Per sub-workflow: cluster candidates, drop dominated clusters, pick the
/// survivor with the smallest predicted transmission time.
pub fn place_with(
    subs: &[SubWorkflow],
    engines: &[EngineInfo],
    qos: &QosMatrix,
    sizes: &dyn SizeEstimator,
    k: usize,
) -> Result<PlacementPlan, PartitionError> {
    if engines.is_empty() {
        return Err(QosError::NoEngine.into());
    }
    let mut plan = PlacementPlan::default();
    for sub in subs {
        let input_mb = sizes.input_mb(sub);
        let features: BTreeMap<EngineId, QosSample> = engines
            .iter()
            .map(|e| Ok((e.id.clone(), qos.get(&e.id, &sub.service_id)?)))
            .collect::<Result<_, QosError>>()?;
        let clusters = cluster_engines(&features, k.min(engines.len()), input_mb);
        let (survivors, eliminated) = split_dominated(&clusters);
        let candidates: Vec<EngineId> = survivors.iter().flat_map(|c| c.members.clone()).collect();
        let estimates = rank_engines(&candidates, &sub.service_id, qos, input_mb)?;
        let selected = estimates.first().ok_or(QosError::NoEngine)?.engine.clone();

        let all: Vec<EngineId> = features.keys().cloned().collect();
        let global = rank_engines(&all, &sub.service_id, qos, input_mb)?;
        let warning = (global[0].engine != selected && global[0].time_s < estimates[0].time_s).then(|| {
            let msg = format!(
                "sub-workflow {} ({}): elimination removed {} which predicts {:.6}s against {:.6}s for {}",
                sub.id, sub.service_id, global[0].engine, global[0].time_s, estimates[0].time_s, selected
            );
            warn!("{msg}");
            msg
        });

        plan.assignments.insert(sub.id, selected.clone());
        plan.audit.push(SubPlacement {
            sub: sub.id,
            service: sub.service_id.clone(),
            input_mb,
            clusters,
            eliminated,
            estimates,
            selected,
            warning,
        });
    }
    Ok(plan)
}
