//! Experiment harness: simulated regions, generated workloads and the
//! comparison of centralized against distributed orchestration.

mod report;
mod sim;
mod topology;
mod workload;

pub use report::{BenchReport, ModeMean, RunRecord, RunReport, SizeSpeedups, Speedups};
pub use sim::{simulate, Placed, SimOptions, SimOutcome};
pub use topology::{
    build_topology, continental, intercontinental, single_engine, EngineSpec, Location, NetworkDefaults,
    NetworkModel, NoiseSpec, PairQos, Region, Roles, ServiceSpec, Topology, TopologyConfig,
    INTERCONTINENTAL_REGIONS,
};
pub use workload::{description_url, generate_workflow, Pattern, Workload, DESCRIPTION_HOST};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{compile, CompileError, DescriptionResolver};
use crate::engine::{Datum, EngineError};
use crate::graph::WorkflowGraph;
use crate::partitioner::{
    compose, decompose, generate_uid, place, ComposeOptions, CompositeWorkflow, IdentitySizes, PartitionError,
    PlacementPlan,
};
use crate::qos::{probe_bandwidth, probe_latency, QosError, QosMatrix, QosSample, SimulatedChannel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("region {0} is not declared")]
    UnknownRegion(String),
    #[error("no QoS between regions {a} and {b}")]
    MissingQos { a: String, b: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Qos(#[from] QosError),
    #[error("run failed: {0}")]
    RunFailed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    CentralizedLocal,
    CentralizedRemote,
    Centralized,
    Distributed,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::CentralizedLocal => "centralized_local",
            Mode::CentralizedRemote => "centralized_remote",
            Mode::Centralized => "centralized",
            Mode::Distributed => "distributed",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Continental,
    Intercontinental,
    Topology(Box<TopologyConfig>),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Continental => "continental",
            Scenario::Intercontinental => "intercontinental",
            Scenario::Topology(_) => "custom",
        }
    }

    pub fn config(&self, services: usize) -> TopologyConfig {
        match self {
            Scenario::Continental => continental(services),
            Scenario::Intercontinental => intercontinental(services),
            Scenario::Topology(c) => (**c).clone(),
        }
    }
}

fn default_sizes() -> Vec<f64> {
    (1..=21).map(f64::from).collect()
}

fn default_reps() -> usize {
    20
}

fn default_delay() -> f64 {
    0.05
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::CentralizedLocal, Mode::CentralizedRemote, Mode::Distributed]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub scenario: Scenario,
    pub pattern: Pattern,
    pub services: usize,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default = "default_sizes")]
    pub input_sizes_mb: Vec<f64>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Ship final outputs back to the initiator in distributed runs.
    #[serde(default)]
    pub collect_outputs: bool,
    #[serde(default = "default_delay")]
    pub service_delay_s: f64,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, pattern: Pattern, services: usize) -> Self {
        Self {
            name: None,
            scenario,
            pattern,
            services,
            modes: default_modes(),
            input_sizes_mb: default_sizes(),
            repetitions: default_reps(),
            seed: 0,
            collect_outputs: false,
            service_delay_s: default_delay(),
        }
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}-{}-{}", self.scenario.name(), self.pattern, self.services))
    }

    /// Runs each repetition per input size per mode.
    pub fn total_runs(&self) -> usize {
        self.modes.len() * self.input_sizes_mb.len() * self.repetitions
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub experiments: Vec<ExperimentConfig>,
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("bench config: {e}")))
    }
}

/// Measures engine-to-service QoS through the probing protocol over the
/// noise-free network model.
pub fn probe_matrix(topo: &Topology, engines: &[String], services: &[String]) -> Result<QosMatrix, HarnessError> {
    let mut m = QosMatrix::new(0.0);
    for e in engines {
        let loc = topo.engine(e)?.location();
        let mut channel = SimulatedChannel::new(1.0);
        for s in services {
            let link = topo.model.qos(&loc, &topo.service(s)?.location())?;
            channel = channel.with_link(s, link);
        }
        for s in services {
            let latency = probe_latency(&channel, s, 5)?;
            let bandwidth = probe_bandwidth(&channel, s)?;
            m.insert(e, s, QosSample::new(latency, bandwidth)?);
        }
    }
    Ok(m)
}

/// A compiled workload bound to a topology.
pub struct Prepared {
    pub topology: Topology,
    pub workload: Workload,
    pub graph: WorkflowGraph,
    resolver: Arc<dyn DescriptionResolver + Send + Sync>,
}

impl Prepared {
    pub fn new(topology: Topology, workload: Workload) -> Result<Self, HarnessError> {
        let graph = compile(&workload.source, &workload.registry)?.graph;
        let resolver = Arc::new(workload.registry.clone());
        Ok(Self {
            topology,
            workload,
            graph,
            resolver,
        })
    }

    fn central_engine(&self, mode: Mode) -> Result<String, HarnessError> {
        let t = &self.topology;
        let role = match mode {
            Mode::CentralizedLocal => t.centralized_local(),
            Mode::CentralizedRemote => t.centralized_remote(),
            Mode::Centralized => t.centralized(),
            Mode::Distributed => None,
        };
        role.map(String::from)
            .or_else(|| (t.engines.len() == 1).then(|| t.engines[0].id.clone()))
            .ok_or_else(|| HarnessError::Config(format!("topology has no engine for mode {mode}")))
    }

    /// Composites for one run of `mode` plus the engine that starts it.
    pub fn plan(
        &self,
        mode: Mode,
        input_mb: f64,
        base_uid: &str,
        collect_outputs: bool,
    ) -> Result<(Vec<CompositeWorkflow>, String, PlacementPlan), HarnessError> {
        let t = &self.topology;
        let subs = decompose(&self.graph);
        let mut options = ComposeOptions {
            sink: None,
            base_uid: Some(base_uid.to_string()),
        };
        if mode != Mode::Distributed {
            let central = self.central_engine(mode)?;
            let plan = PlacementPlan::single(&subs, &central);
            let composites = compose(&self.graph, &subs, &plan, &t.engine_infos(std::slice::from_ref(&central))?, &options)?;
            return Ok((composites, central, plan));
        }
        let initiator = t.initiator().to_string();
        let engines = t.distributed_engines();
        let services: Vec<String> = {
            let mut s: Vec<String> = subs.iter().map(|s| s.service_id.clone()).collect();
            s.sort();
            s.dedup();
            s
        };
        let qos = probe_matrix(t, &engines, &services)?;
        let inputs: BTreeMap<String, f64> = self.workload.inputs.iter().map(|i| (i.clone(), input_mb)).collect();
        let sizes = IdentitySizes::new(&self.graph, &inputs, input_mb);
        let infos = t.engine_infos(&engines)?;
        let plan = place(&subs, &infos, &qos, &sizes)?;
        let mut all = engines.clone();
        if collect_outputs {
            options.sink = Some(initiator.clone());
            if !all.contains(&initiator) {
                all.push(initiator.clone());
            }
        }
        let composites = compose(&self.graph, &subs, &plan, &t.engine_infos(&all)?, &options)?;
        Ok((composites, initiator, plan))
    }

    /// One execution of the workload under `mode`.
    pub fn run(
        &self,
        mode: Mode,
        input_mb: f64,
        rep: usize,
        seed: u64,
        collect_outputs: bool,
        service_delay_s: f64,
    ) -> Result<SimOutcome, HarnessError> {
        let name = &self.graph.meta.name;
        let base = generate_uid(name, seed.wrapping_add(rep as u64));
        let (composites, initiator, _) = self.plan(mode, input_mb, &base, collect_outputs)?;
        let placed = Placed::from_composites(&composites)?;
        let inputs: Vec<(String, Datum)> = self
            .workload
            .inputs
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), Datum::int(7 + i as i64, input_mb)))
            .collect();
        simulate(
            &self.topology,
            self.resolver.clone(),
            &placed,
            &initiator,
            &base,
            &inputs,
            &self.workload.outputs,
            SimOptions {
                service_delay_s,
                noise_seed: seed ^ (rep as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ input_mb.to_bits(),
            },
        )
    }
}

/// Runs every mode, input size and repetition of one experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    let topology = build_topology(&config.scenario.config(config.services))?;
    let workload = generate_workflow(config.pattern, config.services)?;
    let prepared = Prepared::new(topology, workload)?;
    let mut runs = Vec::with_capacity(config.total_runs());
    for &mode in &config.modes {
        for &input_mb in &config.input_sizes_mb {
            for rep in 0..config.repetitions {
                let out = prepared.run(
                    mode,
                    input_mb,
                    rep,
                    config.seed,
                    config.collect_outputs,
                    config.service_delay_s,
                )?;
                runs.push(RunRecord {
                    pattern: config.pattern,
                    mode,
                    services: config.services,
                    input_mb,
                    rep,
                    time_s: out.completion_s,
                    bytes_mb: out.bytes_mb,
                    cross_region_mb: out.cross_region_mb,
                });
            }
        }
    }
    Ok(RunReport::new(config, runs))
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport, HarnessError> {
    Ok(BenchReport {
        experiments: config.experiments.iter().map(run_experiment).collect::<Result<_, _>>()?,
    })
}
