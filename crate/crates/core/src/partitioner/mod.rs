//! Decomposition of a workflow graph into minimal sub-workflows, placement
//! of each on an engine, and recombination into per-engine composites.

mod compose;
mod decompose;
mod place;

pub use compose::{compose, graph_to_composite, value_names, ComposeOptions};
pub use decompose::{decompose, ExternalInput, ProducedOutput, SubWorkflow};
pub use place::{place, place_with, IdentitySizes, PlacementPlan, SizeEstimator, SubPlacement, DEFAULT_K};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{GraphError, WorkflowGraph};
use crate::qos::{EngineId, EngineInfo, QosError, QosMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error(transparent)]
    Qos(#[from] QosError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("sub-workflow {0} has no placement")]
    Unplaced(usize),
    #[error("engine {0} is not in the engine list")]
    UnknownEngine(EngineId),
    #[error("no engine can host the workflow")]
    NoHost,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineDecl {
    pub id: EngineId,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Forward {
    pub variable: String,
    pub engine: EngineId,
}

/// A self-contained workflow destined for one engine.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeWorkflow {
    /// `base.k` for partitioned composites.
    pub uid: Option<String>,
    pub ordinal: usize,
    pub host_engine: Option<EngineId>,
    pub graph: WorkflowGraph,
    /// Forward destinations only; the host is never declared.
    pub engines: Vec<EngineDecl>,
    pub forwards: Vec<Forward>,
}

impl CompositeWorkflow {
    pub fn display_name(&self) -> String {
        match &self.uid {
            Some(uid) => format!("{}@{uid}", self.graph.meta.name),
            None => format!("{}.{}", self.graph.meta.name, self.ordinal),
        }
    }

    pub fn input_names(&self) -> Vec<String> {
        self.graph.inputs().map(|n| n.label()).collect()
    }

    pub fn output_names(&self) -> Vec<String> {
        self.graph.outputs().map(|n| n.label()).collect()
    }
}

/// Everything produced by one partitioning pass.
#[derive(Debug, Clone)]
pub struct Partitioned {
    pub subs: Vec<SubWorkflow>,
    pub plan: PlacementPlan,
    pub composites: Vec<CompositeWorkflow>,
}

/// decompose → place → compose.
pub fn partition(
    g: &WorkflowGraph,
    engines: &[EngineInfo],
    qos: &QosMatrix,
    sizes: &dyn SizeEstimator,
    options: &ComposeOptions,
) -> Result<Partitioned, PartitionError> {
    let subs = decompose(g);
    let plan = place(&subs, engines, qos, sizes)?;
    let composites = compose(g, &subs, &plan, engines, options)?;
    Ok(Partitioned {
        subs,
        plan,
        composites,
    })
}

/// Hex digest of the workflow name and a seed. Suffix free.
pub fn generate_uid(base: &str, seed: u64) -> String {
    let digest = Sha256::digest(format!("{base}:{seed}").as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    hex[..35].to_string()
}

/// Splits `base.k` into its base and ordinal.
pub fn parse_uid(uid: &str) -> (String, Option<u32>) {
    if let Some((base, suffix)) = uid.rsplit_once('.') {
        if !suffix.is_empty() && suffix.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(k) = suffix.parse() {
                return (base.to_string(), Some(k));
            }
        }
    }
    (uid.to_string(), None)
}
