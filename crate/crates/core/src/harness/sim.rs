//! Discrete-event execution of deployed composites over a simulated network.
//!
//! Every transfer costs `L + S/B` for the pair's QoS. Each engine has one
//! NIC of capacity `C` with separate send and receive queues served first
//! come first served: a transfer holds the NIC for `S/C`, so many transfers
//! through one engine queue behind each other, while wide-area flows to
//! different peers still overlap. Services never queue: each invocation
//! waits a fixed processing delay and returns a result as large as its
//! largest argument.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::topology::{Location, Topology};
use super::HarnessError;
use crate::dsl::{encode, DescriptionResolver, SourceUnit};
use crate::engine::{
    pure_result, Action, CompletionRecord, Datum, DeploymentId, DispatchReceipt, Engine, ValueEnvelope,
    WorkflowState,
};
use crate::graph::NodeId;
use crate::partitioner::CompositeWorkflow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Processing time of every service operation.
    pub service_delay_s: f64,
    /// Seed for transfer jitter. Ignored unless the topology enables noise.
    pub noise_seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            service_delay_s: 0.05,
            noise_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    /// Time at which the last composite completed.
    pub completion_s: f64,
    pub bytes_mb: f64,
    pub cross_region_mb: f64,
    pub transfers: usize,
    /// Final workflow outputs, wherever they ended up.
    pub outputs: BTreeMap<String, Datum>,
    pub records: Vec<CompletionRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Endpoint {
    Engine(String),
    Service(String),
}

#[derive(Debug)]
enum Event {
    Deploy {
        engine: String,
        source: SourceUnit,
    },
    Input {
        engine: String,
        envelope: ValueEnvelope,
    },
    ServiceDone {
        engine: String,
        deployment: DeploymentId,
        node: NodeId,
        service: String,
        result: Datum,
    },
    InvocationDone {
        engine: String,
        deployment: DeploymentId,
        node: NodeId,
        result: Datum,
    },
    Deliver {
        from: String,
        deployment: DeploymentId,
        forward: usize,
        dest: String,
        envelope: ValueEnvelope,
        receipt: DispatchReceipt,
    },
}

struct Scheduled {
    at: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.at.total_cmp(&self.at).then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Nic {
    tx_free: f64,
    rx_free: f64,
}

struct Simulator<'t> {
    topo: &'t Topology,
    options: SimOptions,
    now: f64,
    seq: u64,
    queue: BinaryHeap<Scheduled>,
    engines: BTreeMap<String, Engine>,
    by_url: BTreeMap<String, String>,
    nics: BTreeMap<String, Nic>,
    jitter: Option<(ChaCha8Rng, f64)>,
    bytes_mb: f64,
    cross_region_mb: f64,
    transfers: usize,
}

impl<'t> Simulator<'t> {
    fn schedule(&mut self, at: f64, event: Event) {
        self.seq += 1;
        self.queue.push(Scheduled {
            at,
            seq: self.seq,
            event,
        });
    }

    fn location(&self, e: &Endpoint) -> Result<Location, HarnessError> {
        match e {
            Endpoint::Engine(id) => Ok(self.topo.engine(id)?.location()),
            Endpoint::Service(id) => Ok(self.topo.service(id)?.location()),
        }
    }

    /// Starts a transfer now and returns its arrival time.
    fn transfer(&mut self, from: &Endpoint, to: &Endpoint, size_mb: f64) -> Result<f64, HarnessError> {
        if from == to {
            return Ok(self.now);
        }
        let (a, b) = (self.location(from)?, self.location(to)?);
        let qos = self.topo.model.qos(&a, &b)?;
        let nic = self.topo.model.defaults.nic_mbps;
        let occupy = size_mb / nic;
        let link = qos.latency_s + size_mb / qos.bandwidth_mbps.min(nic);
        let mut begin = self.now;
        if let Endpoint::Engine(id) = from {
            begin = begin.max(self.nics.entry(id.clone()).or_default().tx_free);
        }
        if let Endpoint::Engine(id) = to {
            begin = begin.max(self.nics.entry(id.clone()).or_default().rx_free);
        }
        if let Endpoint::Engine(id) = from {
            self.nics.get_mut(id).unwrap().tx_free = begin + occupy;
        }
        if let Endpoint::Engine(id) = to {
            self.nics.get_mut(id).unwrap().rx_free = begin + occupy;
        }
        let factor = match &mut self.jitter {
            Some((rng, spread)) if *spread > 0.0 => rng.gen_range(1.0 - *spread..=1.0 + *spread),
            _ => 1.0,
        };
        self.bytes_mb += size_mb;
        self.transfers += 1;
        if a.region != b.region {
            self.cross_region_mb += size_mb;
        }
        Ok(begin + link * factor)
    }

    fn engine_at(&mut self, id: &str) -> Result<&mut Engine, HarnessError> {
        let now = self.now;
        let e = self
            .engines
            .get_mut(id)
            .ok_or_else(|| HarnessError::Config(format!("no engine {id} in this run")))?;
        e.set_time(now);
        Ok(e)
    }

    fn handle(&mut self, engine: &str, actions: Vec<Action>) -> Result<(), HarnessError> {
        for action in actions {
            match action {
                Action::Invoke {
                    deployment,
                    node,
                    request,
                } => {
                    let service = request.service.clone();
                    let arrival = self.transfer(
                        &Endpoint::Engine(engine.into()),
                        &Endpoint::Service(service.clone()),
                        request.request_mb(),
                    )?;
                    let result = pure_result(&request);
                    self.schedule(
                        arrival + self.options.service_delay_s,
                        Event::ServiceDone {
                            engine: engine.into(),
                            deployment,
                            node,
                            service,
                            result,
                        },
                    );
                }
                Action::Dispatch {
                    deployment,
                    forward,
                    dest_id,
                    dest_url,
                    envelope,
                } => {
                    let dest = self
                        .by_url
                        .get(&dest_url)
                        .cloned()
                        .ok_or_else(|| HarnessError::Config(format!("no engine at {dest_url} ({dest_id})")))?;
                    let size = envelope.datum.size_mb;
                    let arrival = self.transfer(&Endpoint::Engine(engine.into()), &Endpoint::Engine(dest.clone()), size)?;
                    let receipt = DispatchReceipt {
                        variable: envelope.variable.clone(),
                        dest: dest_id,
                        size_mb: size,
                        sent_at: self.now,
                        delivered_at: arrival,
                        attempts: 1,
                    };
                    self.schedule(
                        arrival,
                        Event::Deliver {
                            from: engine.into(),
                            deployment,
                            forward,
                            dest,
                            envelope,
                            receipt,
                        },
                    );
                }
                Action::Completed { deployment } => {
                    debug!("t={:.6} {engine}: deployment {deployment} completed", self.now)
                }
                Action::Failed { deployment, reason } => {
                    debug!("t={:.6} {engine}: deployment {deployment} failed: {reason}", self.now)
                }
            }
        }
        Ok(())
    }

    fn step(&mut self, event: Event) -> Result<(), HarnessError> {
        match event {
            Event::Deploy { engine, source } => {
                let (_, actions) = self.engine_at(&engine)?.deploy(&source)?;
                self.handle(&engine, actions)
            }
            Event::Input { engine, envelope } => {
                let actions = self.engine_at(&engine)?.receive_value(envelope)?;
                self.handle(&engine, actions)
            }
            Event::ServiceDone {
                engine,
                deployment,
                node,
                service,
                result,
            } => {
                let arrival = self.transfer(
                    &Endpoint::Service(service),
                    &Endpoint::Engine(engine.clone()),
                    result.size_mb,
                )?;
                self.schedule(
                    arrival,
                    Event::InvocationDone {
                        engine,
                        deployment,
                        node,
                        result,
                    },
                );
                Ok(())
            }
            Event::InvocationDone {
                engine,
                deployment,
                node,
                result,
            } => {
                let actions = self
                    .engine_at(&engine)?
                    .invocation_finished(deployment, &node, Ok(result))?;
                self.handle(&engine, actions)
            }
            Event::Deliver {
                from,
                deployment,
                forward,
                dest,
                envelope,
                receipt,
            } => {
                let actions = self.engine_at(&dest)?.receive_value(envelope)?;
                self.handle(&dest, actions)?;
                let actions = self.engine_at(&from)?.dispatch_finished(deployment, forward, Ok(receipt))?;
                self.handle(&from, actions)
            }
        }
    }
}

/// A composite and the engine it runs on.
#[derive(Debug, Clone)]
pub struct Placed {
    pub engine: String,
    pub composite: CompositeWorkflow,
}

impl Placed {
    pub fn from_composites(composites: &[CompositeWorkflow]) -> Result<Vec<Placed>, HarnessError> {
        composites
            .iter()
            .map(|c| {
                let engine = c
                    .host_engine
                    .clone()
                    .ok_or_else(|| HarnessError::Config(format!("{} has no host engine", c.display_name())))?;
                Ok(Placed {
                    engine,
                    composite: c.clone(),
                })
            })
            .collect()
    }
}

/// Runs one workflow execution to completion.
///
/// The initiator sends every composite to its engine, then every workflow
/// input to the engines whose composite declares it. `base_uid` must be the
/// base of the composites' uids.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    topo: &Topology,
    resolver: Arc<dyn DescriptionResolver + Send + Sync>,
    placed: &[Placed],
    initiator: &str,
    base_uid: &str,
    inputs: &[(String, Datum)],
    workflow_outputs: &[String],
    options: SimOptions,
) -> Result<SimOutcome, HarnessError> {
    let mut sim = Simulator {
        topo,
        options,
        now: 0.0,
        seq: 0,
        queue: BinaryHeap::new(),
        engines: BTreeMap::new(),
        by_url: BTreeMap::new(),
        nics: BTreeMap::new(),
        jitter: topo
            .noise
            .map(|n| (ChaCha8Rng::seed_from_u64(options.noise_seed), n.spread.clamp(0.0, 0.99))),
        bytes_mb: 0.0,
        cross_region_mb: 0.0,
        transfers: 0,
    };
    for spec in &topo.engines {
        sim.by_url.insert(spec.endpoint(), spec.id.clone());
        sim.engines
            .insert(spec.id.clone(), Engine::new(&spec.id, spec.endpoint(), resolver.clone()));
    }
    topo.engine(initiator)?;
    let from = Endpoint::Engine(initiator.to_string());

    for p in placed {
        let source = encode(&p.composite).map_err(|e| HarnessError::Config(e.to_string()))?;
        let at = sim.transfer(&from, &Endpoint::Engine(p.engine.clone()), 0.0)?;
        sim.schedule(
            at,
            Event::Deploy {
                engine: p.engine.clone(),
                source,
            },
        );
    }
    for p in placed {
        let declared = p.composite.input_names();
        for (name, datum) in inputs.iter().filter(|(n, _)| declared.contains(n)) {
            let at = sim.transfer(&from, &Endpoint::Engine(p.engine.clone()), datum.size_mb)?;
            sim.schedule(
                at,
                Event::Input {
                    engine: p.engine.clone(),
                    envelope: ValueEnvelope {
                        uid: base_uid.to_string(),
                        variable: name.clone(),
                        datum: datum.clone(),
                    },
                },
            );
        }
    }

    while let Some(Scheduled { at, event, .. }) = sim.queue.pop() {
        sim.now = at;
        sim.step(event)?;
    }

    let mut records = Vec::new();
    let mut outputs = BTreeMap::new();
    let mut completion_s: f64 = 0.0;
    for p in placed {
        let engine = &sim.engines[&p.engine];
        let uid = p.composite.uid.clone().unwrap_or_else(|| p.composite.graph.meta.name.clone());
        let id = engine
            .deployment(&uid)
            .ok_or_else(|| HarnessError::Config(format!("{uid} was never deployed on {}", p.engine)))?;
        let rec = engine.record(id).unwrap().clone();
        match rec.state {
            WorkflowState::Completed => {}
            WorkflowState::Failed => {
                return Err(HarnessError::RunFailed(format!(
                    "{uid} on {}: {}",
                    p.engine,
                    rec.error.clone().unwrap_or_default()
                )))
            }
            other => {
                return Err(HarnessError::RunFailed(format!("{uid} on {} stalled in {other:?}", p.engine)))
            }
        }
        completion_s = completion_s.max(rec.completed_at.unwrap_or(0.0));
        for (k, v) in &rec.outputs {
            if workflow_outputs.contains(k) {
                outputs.insert(k.clone(), v.clone());
            }
        }
        records.push(rec);
    }
    for engine in sim.engines.values() {
        for (k, v) in engine.collected(base_uid) {
            if workflow_outputs.contains(&k) {
                outputs.insert(k, v);
            }
        }
    }
    if let Some(missing) = workflow_outputs.iter().find(|o| !outputs.contains_key(*o)) {
        return Err(HarnessError::RunFailed(format!("output {missing} was never produced")));
    }
    Ok(SimOutcome {
        completion_s,
        bytes_mb: sim.bytes_mb,
        cross_region_mb: sim.cross_region_mb,
        transfers: sim.transfers,
        outputs,
        records,
    })
}
