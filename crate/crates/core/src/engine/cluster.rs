use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    send_with_retry, Action, DeploymentId, Engine, EngineError, RetryPolicy, ServiceInvoker, Transport,
    ValueEnvelope,
};
use crate::dsl::{DescriptionResolver, SourceUnit};
use crate::graph::NodeId;

enum Work {
    Invoke {
        engine: String,
        deployment: DeploymentId,
        node: NodeId,
        request: super::InvocationRequest,
    },
    Dispatch {
        engine: String,
        deployment: DeploymentId,
        forward: usize,
        dest_id: String,
        dest_url: String,
        envelope: ValueEnvelope,
    },
}

/// In-process group of engines that executes actions as soon as they are
/// issued. With a seed, pending work is taken in random order, which
/// exercises arbitrary interleavings of invocations and deliveries.
pub struct LocalCluster<I: ServiceInvoker, T: Transport> {
    engines: BTreeMap<String, Engine>,
    urls: BTreeMap<String, String>,
    pub invoker: I,
    pub transport: T,
    pub retry: RetryPolicy,
    queue: VecDeque<Work>,
    rng: Option<ChaCha8Rng>,
    step: u64,
    /// Delivery failures reported by receiving engines.
    pub errors: Vec<EngineError>,
}

impl<I: ServiceInvoker, T: Transport> LocalCluster<I, T> {
    pub fn new(invoker: I, transport: T, seed: Option<u64>) -> Self {
        Self {
            engines: BTreeMap::new(),
            urls: BTreeMap::new(),
            invoker,
            transport,
            retry: RetryPolicy::default(),
            queue: VecDeque::new(),
            rng: seed.map(ChaCha8Rng::seed_from_u64),
            step: 0,
            errors: vec![],
        }
    }

    pub fn add_engine(&mut self, id: &str, url: &str, resolver: Arc<dyn DescriptionResolver + Send + Sync>) {
        self.urls.insert(url.to_string(), id.to_string());
        self.engines.insert(id.to_string(), Engine::new(id, url, resolver));
    }

    pub fn engine(&self, id: &str) -> Option<&Engine> {
        self.engines.get(id)
    }

    fn engine_mut(&mut self, id: &str) -> Result<&mut Engine, EngineError> {
        let step = self.step as f64;
        let e = self
            .engines
            .get_mut(id)
            .ok_or_else(|| EngineError::UnknownEngine(id.to_string()))?;
        e.set_time(step);
        Ok(e)
    }

    pub fn deploy(&mut self, engine: &str, src: &SourceUnit) -> Result<DeploymentId, EngineError> {
        let (id, actions) = self.engine_mut(engine)?.deploy(src)?;
        self.enqueue(engine, actions);
        Ok(id)
    }

    /// Delivers a value from outside the cluster, such as a workflow input.
    pub fn inject(&mut self, engine: &str, envelope: ValueEnvelope) -> Result<(), EngineError> {
        let actions = self.engine_mut(engine)?.receive_value(envelope)?;
        self.enqueue(engine, actions);
        Ok(())
    }

    fn enqueue(&mut self, engine: &str, actions: Vec<Action>) {
        for a in actions {
            match a {
                Action::Invoke {
                    deployment,
                    node,
                    request,
                } => self.queue.push_back(Work::Invoke {
                    engine: engine.to_string(),
                    deployment,
                    node,
                    request,
                }),
                Action::Dispatch {
                    deployment,
                    forward,
                    dest_id,
                    dest_url,
                    envelope,
                } => self.queue.push_back(Work::Dispatch {
                    engine: engine.to_string(),
                    deployment,
                    forward,
                    dest_id,
                    dest_url,
                    envelope,
                }),
                Action::Completed { .. } | Action::Failed { .. } => {}
            }
        }
    }

    /// Runs until no work is pending.
    pub fn run(&mut self) -> Result<(), EngineError> {
        while !self.queue.is_empty() {
            let index = match &mut self.rng {
                Some(rng) => rng.gen_range(0..self.queue.len()),
                None => 0,
            };
            let work = self.queue.remove(index).unwrap();
            self.step += 1;
            match work {
                Work::Invoke {
                    engine,
                    deployment,
                    node,
                    request,
                } => {
                    let result = self.invoker.invoke(&request);
                    let actions = self.engine_mut(&engine)?.invocation_finished(deployment, &node, result)?;
                    self.enqueue(&engine, actions);
                }
                Work::Dispatch {
                    engine,
                    deployment,
                    forward,
                    dest_id,
                    dest_url,
                    envelope,
                } => {
                    let from_url = self.engines[&engine].url.clone();
                    let now = self.step as f64;
                    let sent = send_with_retry(
                        &mut self.transport,
                        &self.retry,
                        &from_url,
                        &dest_url,
                        &envelope.variable,
                        &dest_id,
                        envelope.datum.size_mb,
                        now,
                    );
                    let outcome = match sent {
                        Ok(receipt) => match self.urls.get(&dest_url).cloned() {
                            Some(dest) => match self.engine_mut(&dest)?.receive_value(envelope) {
                                Ok(actions) => {
                                    self.enqueue(&dest, actions);
                                    Ok(receipt)
                                }
                                Err(e) => {
                                    let reason = format!("rejected by {dest}: {e}");
                                    self.errors.push(e);
                                    Err(reason)
                                }
                            },
                            None => Err(format!("no engine at {dest_url}")),
                        },
                        Err(e) => Err(e.to_string()),
                    };
                    let actions = self.engine_mut(&engine)?.dispatch_finished(deployment, forward, outcome)?;
                    self.enqueue(&engine, actions);
                }
            }
        }
        Ok(())
    }
}
