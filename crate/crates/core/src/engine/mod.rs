//! Workflow engine runtime.
//!
//! An [`Engine`] is a passive state machine: callers feed it deployments,
//! arriving values and the outcomes of the work it asked for, and it answers
//! with [`Action`]s (invoke a service, ship a value to a peer). Drivers
//! decide how and when those actions happen: [`LocalCluster`] runs them
//! immediately in-process, the simulator schedules them on a virtual clock.

mod cluster;
mod envelope;
mod transport;

pub use cluster::LocalCluster;
pub use envelope::{Datum, ValueEnvelope, WireMessage};
pub use transport::{
    pure_result, send_with_retry, PureServices, RetryPolicy, ServiceInvoker, SimulatedTransport, Transport,
};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use log::{debug, info, warn};
use serde::Serialize;
use thiserror::Error;

use crate::dsl::{compile, CompileError, DescriptionResolver, SourceUnit, TypeTag, ValueSource};
use crate::graph::{NodeId, NodeKind, WorkflowGraph};
use crate::partitioner::parse_uid;

pub type DeploymentId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("compile error: {0}")]
    Compile(#[from] CompileError),
    #[error("workflow {0} is already deployed")]
    DuplicateDeployment(String),
    #[error("value {variable} of workflow {uid} was already received")]
    DuplicateValue { uid: String, variable: String },
    #[error("value {variable} of workflow {uid}: expected {expected}, found {found}")]
    TypeMismatch {
        uid: String,
        variable: String,
        expected: TypeTag,
        found: TypeTag,
    },
    #[error("unknown deployment {0}")]
    UnknownDeployment(DeploymentId),
    #[error("unknown engine {0}")]
    UnknownEngine(String),
    #[error("invocation of {node} failed: {reason}")]
    Invocation { node: NodeId, reason: String },
    #[error("transfer to {dest} failed: {reason}")]
    Transport { dest: String, reason: String },
    #[error("bad value: {0}")]
    BadValue(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkflowState {
    Waiting,
    Running,
    Completed,
    Failed,
}

impl WorkflowState {
    pub fn is_terminal(self) -> bool {
        matches!(self, WorkflowState::Completed | WorkflowState::Failed)
    }
}

/// Everything a driver needs to call one operation.
#[derive(Debug, Clone, PartialEq)]
pub struct InvocationRequest {
    /// Service declaration id in the composite.
    pub service: String,
    pub service_name: String,
    pub description_url: String,
    pub port: String,
    pub port_name: String,
    pub operation: String,
    /// In signature order.
    pub args: Vec<Datum>,
    pub returns: TypeTag,
}

impl InvocationRequest {
    pub fn request_mb(&self) -> f64 {
        self.args.iter().map(|a| a.size_mb).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Invoke {
        deployment: DeploymentId,
        node: NodeId,
        request: InvocationRequest,
    },
    Dispatch {
        deployment: DeploymentId,
        forward: usize,
        dest_id: String,
        dest_url: String,
        envelope: ValueEnvelope,
    },
    Completed {
        deployment: DeploymentId,
    },
    Failed {
        deployment: DeploymentId,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchReceipt {
    pub variable: String,
    pub dest: String,
    pub size_mb: f64,
    pub sent_at: f64,
    pub delivered_at: f64,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    InputBound { variable: String, at: f64 },
    Fired { node: NodeId, at: f64 },
    Finished { node: NodeId, at: f64 },
    Dispatched { variable: String, dest: String, at: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRecord {
    pub uid: String,
    pub state: WorkflowState,
    pub started_at: Option<f64>,
    pub completed_at: Option<f64>,
    pub trace: Vec<TraceEvent>,
    pub dispatches: Vec<DispatchReceipt>,
    pub outputs: BTreeMap<String, Datum>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
struct ForwardPlan {
    variable: String,
    producer: NodeId,
    dest_id: String,
    dest_url: String,
}

#[derive(Debug, Clone)]
struct Deployment {
    base: String,
    graph: WorkflowGraph,
    forwards: Vec<ForwardPlan>,
    values: BTreeMap<NodeId, Datum>,
    fired: BTreeSet<NodeId>,
    finished: usize,
    invocations: usize,
    acked: BTreeSet<usize>,
    record: CompletionRecord,
}

impl Deployment {
    fn input_node(&self, variable: &str) -> Option<(NodeId, TypeTag)> {
        let id = NodeId::input(variable);
        match self.graph.node(&id).ok()?.kind {
            NodeKind::Input { ty, .. } => Some((id, ty)),
            _ => None,
        }
    }
}

pub struct Engine {
    pub id: String,
    pub url: String,
    resolver: Arc<dyn DescriptionResolver + Send + Sync>,
    now: f64,
    deployments: Vec<Deployment>,
    by_uid: BTreeMap<String, DeploymentId>,
    by_base: BTreeMap<String, Vec<DeploymentId>>,
    /// Values that arrived before (or without) a deployment consuming them.
    buffer: BTreeMap<(String, String), Datum>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("id", &self.id)
            .field("url", &self.url)
            .field("deployments", &self.deployments.len())
            .finish()
    }
}

impl Engine {
    pub fn new(
        id: impl Into<String>,
        url: impl Into<String>,
        resolver: Arc<dyn DescriptionResolver + Send + Sync>,
    ) -> Self {
        Self {
            id: id.into(),
            url: url.into(),
            resolver,
            now: 0.0,
            deployments: Vec::new(),
            by_uid: BTreeMap::new(),
            by_base: BTreeMap::new(),
            buffer: BTreeMap::new(),
        }
    }

    /// Sets the clock used for timestamps in completion records.
    pub fn set_time(&mut self, now: f64) {
        self.now = now;
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Compiles and registers a workflow, binding any buffered inputs.
    pub fn deploy(&mut self, src: &SourceUnit) -> Result<(DeploymentId, Vec<Action>), EngineError> {
        let compiled = compile(src, self.resolver.as_ref())?;
        let ast = &compiled.ast;
        let uid = ast.uid.clone().unwrap_or_else(|| ast.name.clone());
        if self.by_uid.contains_key(&uid) {
            return Err(EngineError::DuplicateDeployment(uid));
        }
        let base = parse_uid(&uid).0;
        let typed = &compiled.typed;
        let forwards = ast
            .forwards
            .iter()
            .map(|f| {
                let source = typed
                    .names
                    .iter()
                    .find(|(n, _)| n == &f.variable)
                    .map(|(_, s)| s.clone())
                    .or_else(|| ast.input(&f.variable).map(|_| ValueSource::Input(f.variable.clone())))
                    .ok_or_else(|| EngineError::BadValue(format!("forward of unknown variable {}", f.variable)))?;
                let producer = match source {
                    ValueSource::Input(n) => NodeId::input(&n),
                    ValueSource::Invocation(i) => {
                        let inv = &typed.invocations[i];
                        NodeId::invocation(&inv.port, &inv.operation, inv.occurrence)
                    }
                };
                let dest_url = ast.engine(&f.engine).map(|e| e.url.clone()).unwrap_or_default();
                Ok(ForwardPlan {
                    variable: f.variable.clone(),
                    producer,
                    dest_id: f.engine.clone(),
                    dest_url,
                })
            })
            .collect::<Result<Vec<_>, EngineError>>()?;

        let graph = compiled.graph;
        let mut early = Vec::new();
        for node in graph.inputs() {
            if let NodeKind::Input { name, ty } = &node.kind {
                if let Some(d) = self.buffer.get(&(base.clone(), name.clone())) {
                    if ty.unify(d.ty).is_none() {
                        return Err(EngineError::TypeMismatch {
                            uid: base,
                            variable: name.clone(),
                            expected: *ty,
                            found: d.ty,
                        });
                    }
                    early.push(name.clone());
                }
            }
        }

        let id = self.deployments.len();
        let invocations = graph.invocations().count();
        self.deployments.push(Deployment {
            base: base.clone(),
            graph,
            forwards,
            values: BTreeMap::new(),
            fired: BTreeSet::new(),
            finished: 0,
            invocations,
            acked: BTreeSet::new(),
            record: CompletionRecord {
                uid: uid.clone(),
                state: WorkflowState::Waiting,
                started_at: None,
                completed_at: None,
                trace: vec![],
                dispatches: vec![],
                outputs: BTreeMap::new(),
                error: None,
            },
        });
        self.by_uid.insert(uid.clone(), id);
        self.by_base.entry(base.clone()).or_default().push(id);
        info!("engine {}: deployed {uid}", self.id);

        let mut actions = Vec::new();
        for name in early {
            let datum = self.buffer.remove(&(base.clone(), name.clone())).unwrap();
            actions.extend(self.bind_input(id, &name, datum));
        }
        actions.extend(self.check_complete(id));
        Ok((id, actions))
    }

    /// Accepts a value from a peer or the initiator. Values for workflows
    /// that are not deployed yet are buffered.
    pub fn receive_value(&mut self, env: ValueEnvelope) -> Result<Vec<Action>, EngineError> {
        let target = self.by_base.get(&env.uid).and_then(|ids| {
            ids.iter()
                .copied()
                .find_map(|id| self.deployments[id].input_node(&env.variable).map(|(n, ty)| (id, n, ty)))
        });
        let Some((id, node, ty)) = target else {
            let key = (env.uid.clone(), env.variable.clone());
            if self.buffer.contains_key(&key) {
                return Err(EngineError::DuplicateValue {
                    uid: env.uid,
                    variable: env.variable,
                });
            }
            debug!("engine {}: buffering {}/{}", self.id, env.uid, env.variable);
            self.buffer.insert(key, env.datum);
            return Ok(vec![]);
        };
        let d = &self.deployments[id];
        if d.values.contains_key(&node) {
            return Err(EngineError::DuplicateValue {
                uid: env.uid,
                variable: env.variable,
            });
        }
        if ty.unify(env.datum.ty).is_none() {
            return Err(EngineError::TypeMismatch {
                uid: env.uid,
                variable: env.variable,
                expected: ty,
                found: env.datum.ty,
            });
        }
        if d.record.state == WorkflowState::Failed {
            return Ok(vec![]);
        }
        Ok(self.bind_input(id, &env.variable, env.datum))
    }

    /// Reports the outcome of an `Invoke` action.
    pub fn invocation_finished(
        &mut self,
        id: DeploymentId,
        node: &NodeId,
        result: Result<Datum, String>,
    ) -> Result<Vec<Action>, EngineError> {
        let now = self.now;
        let d = self.deployments.get_mut(id).ok_or(EngineError::UnknownDeployment(id))?;
        if d.record.state == WorkflowState::Failed {
            return Ok(vec![]);
        }
        if !d.fired.contains(node) || d.values.contains_key(node) {
            return Err(EngineError::BadValue(format!("{node} was not awaiting a result")));
        }
        let returns = d.graph.node(node).ok().and_then(|n| n.produces()).unwrap_or(TypeTag::Any);
        let datum = match result {
            Ok(datum) if returns.unify(datum.ty).is_some() => datum,
            Ok(datum) => {
                return Ok(self.fail(
                    id,
                    format!("{node} returned {} where {returns} was declared", datum.ty),
                ))
            }
            Err(reason) => {
                return Ok(self.fail(id, EngineError::Invocation { node: node.clone(), reason }.to_string()))
            }
        };
        d.finished += 1;
        d.record.trace.push(TraceEvent::Finished {
            node: node.clone(),
            at: now,
        });
        let mut actions = self.propagate(id, node, datum);
        actions.extend(self.check_complete(id));
        Ok(actions)
    }

    /// Reports the outcome of a `Dispatch` action.
    pub fn dispatch_finished(
        &mut self,
        id: DeploymentId,
        forward: usize,
        result: Result<DispatchReceipt, String>,
    ) -> Result<Vec<Action>, EngineError> {
        let d = self.deployments.get_mut(id).ok_or(EngineError::UnknownDeployment(id))?;
        if d.record.state == WorkflowState::Failed {
            return Ok(vec![]);
        }
        match result {
            Ok(receipt) => {
                if d.acked.insert(forward) {
                    d.record.dispatches.push(receipt);
                }
                Ok(self.check_complete(id))
            }
            Err(reason) => Ok(self.fail(id, reason)),
        }
    }

    pub fn deployment(&self, uid: &str) -> Option<DeploymentId> {
        self.by_uid.get(uid).copied()
    }

    pub fn deployment_ids(&self) -> impl Iterator<Item = DeploymentId> {
        0..self.deployments.len()
    }

    pub fn record(&self, id: DeploymentId) -> Option<&CompletionRecord> {
        self.deployments.get(id).map(|d| &d.record)
    }

    pub fn state(&self, id: DeploymentId) -> Option<WorkflowState> {
        self.record(id).map(|r| r.state)
    }

    pub fn graph(&self, id: DeploymentId) -> Option<&WorkflowGraph> {
        self.deployments.get(id).map(|d| &d.graph)
    }

    /// Values received for `base` that no deployment consumed, such as final
    /// outputs collected at a sink.
    pub fn collected(&self, base: &str) -> BTreeMap<String, Datum> {
        self.buffer
            .iter()
            .filter(|((b, _), _)| b == base)
            .map(|((_, v), d)| (v.clone(), d.clone()))
            .collect()
    }

    fn bind_input(&mut self, id: DeploymentId, variable: &str, datum: Datum) -> Vec<Action> {
        let now = self.now;
        let d = &mut self.deployments[id];
        d.record.trace.push(TraceEvent::InputBound {
            variable: variable.to_string(),
            at: now,
        });
        let mut actions = self.propagate(id, &NodeId::input(variable), datum);
        actions.extend(self.check_complete(id));
        actions
    }

    /// Stores a produced value, ships its forwards, records outputs and fires
    /// every successor whose inputs are now all present.
    fn propagate(&mut self, id: DeploymentId, node: &NodeId, datum: Datum) -> Vec<Action> {
        let now = self.now;
        let d = &mut self.deployments[id];
        d.values.insert(node.clone(), datum.clone());
        let mut actions = Vec::new();

        for (i, f) in d.forwards.iter().enumerate() {
            if &f.producer != node {
                continue;
            }
            d.record.trace.push(TraceEvent::Dispatched {
                variable: f.variable.clone(),
                dest: f.dest_id.clone(),
                at: now,
            });
            actions.push(Action::Dispatch {
                deployment: id,
                forward: i,
                dest_id: f.dest_id.clone(),
                dest_url: f.dest_url.clone(),
                envelope: ValueEnvelope {
                    uid: d.base.clone(),
                    variable: f.variable.clone(),
                    datum: datum.clone(),
                },
            });
        }

        let targets: Vec<NodeId> = d.graph.out_edges(node).map(|e| e.to.clone()).collect();
        for target in targets {
            let Ok(t) = d.graph.node(&target) else { continue };
            match &t.kind {
                NodeKind::Output { name, .. } => {
                    d.record.outputs.insert(name.clone(), datum.clone());
                }
                NodeKind::Invocation(inv) => {
                    if d.fired.contains(&target)
                        || !d.graph.in_edges(&target).all(|e| d.values.contains_key(&e.from))
                    {
                        continue;
                    }
                    let args = inv
                        .signature
                        .params
                        .iter()
                        .map(|p| {
                            let edge = d
                                .graph
                                .in_edges(&target)
                                .find(|e| e.param.as_deref().is_none_or(|n| n == p.name))
                                .expect("validated arity");
                            d.values[&edge.from].clone()
                        })
                        .collect();
                    let catalog = &d.graph.catalog;
                    let port = catalog.port(&inv.port);
                    let service = port.and_then(|p| catalog.service(&p.service));
                    let request = InvocationRequest {
                        service: inv.service.clone(),
                        service_name: service.map(|s| s.service_name.clone()).unwrap_or_default(),
                        description_url: service
                            .and_then(|s| catalog.description(&s.description))
                            .map(|x| x.url.clone())
                            .unwrap_or_default(),
                        port: inv.port.clone(),
                        port_name: port.map(|p| p.port_name.clone()).unwrap_or_default(),
                        operation: inv.operation.clone(),
                        args,
                        returns: inv.signature.returns,
                    };
                    d.fired.insert(target.clone());
                    d.record.trace.push(TraceEvent::Fired {
                        node: target.clone(),
                        at: now,
                    });
                    if d.record.state == WorkflowState::Waiting {
                        d.record.state = WorkflowState::Running;
                        d.record.started_at = Some(now);
                    }
                    actions.push(Action::Invoke {
                        deployment: id,
                        node: target,
                        request,
                    });
                }
                NodeKind::Input { .. } => {}
            }
        }
        actions
    }

    fn check_complete(&mut self, id: DeploymentId) -> Vec<Action> {
        let now = self.now;
        let d = &mut self.deployments[id];
        if d.record.state.is_terminal()
            || d.finished < d.invocations
            || d.record.outputs.len() < d.graph.outputs().count()
            || d.acked.len() < d.forwards.len()
        {
            return vec![];
        }
        d.record.state = WorkflowState::Completed;
        d.record.started_at.get_or_insert(now);
        d.record.completed_at = Some(now);
        info!("engine {}: {} completed at {now}", self.id, d.record.uid);
        vec![Action::Completed { deployment: id }]
    }

    fn fail(&mut self, id: DeploymentId, reason: String) -> Vec<Action> {
        let d = &mut self.deployments[id];
        warn!("engine {}: {} failed: {reason}", self.id, d.record.uid);
        d.record.state = WorkflowState::Failed;
        d.record.completed_at = Some(self.now);
        d.record.error = Some(reason.clone());
        vec![Action::Failed { deployment: id, reason }]
    }
}
