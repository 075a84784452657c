//! Network QoS measurement and the placement mathematics built on it.

mod cluster;
mod probe;

pub use cluster::{cluster_engines, cluster_engines_traced, eliminate_clusters, split_dominated, Cluster, KMeansTrace};
pub use probe::{probe_bandwidth, probe_bandwidth_with, probe_latency, ProbeChannel, ProbeConfig, ProbeResponse, SimulatedChannel};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type EngineId = String;
pub type ServiceId = String;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QosError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no QoS sample for engine {engine} and service {service}")]
    MissingQos { engine: EngineId, service: ServiceId },
    #[error("probe of {service} failed: {reason}")]
    Probe { service: ServiceId, reason: String },
    #[error("no engines available")]
    NoEngine,
    #[error("malformed QoS snapshot: {0}")]
    Format(String),
}

/// Latency in seconds and bandwidth in MB/s between an engine and a service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosSample {
    pub latency_s: f64,
    pub bandwidth_mbps: f64,
}

impl QosSample {
    pub fn new(latency_s: f64, bandwidth_mbps: f64) -> Result<Self, QosError> {
        if !(latency_s >= 0.0) || !latency_s.is_finite() {
            return Err(QosError::Domain(format!("latency must be >= 0, got {latency_s}")));
        }
        if !(bandwidth_mbps > 0.0) || !bandwidth_mbps.is_finite() {
            return Err(QosError::Domain(format!(
                "bandwidth must be > 0, got {bandwidth_mbps}"
            )));
        }
        Ok(Self {
            latency_s,
            bandwidth_mbps,
        })
    }

    /// Predicted time to move `size_mb` over this link.
    pub fn transfer_time(&self, size_mb: f64) -> f64 {
        self.latency_s + size_mb / self.bandwidth_mbps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineInfo {
    pub id: EngineId,
    pub endpoint: String,
    pub region: String,
}

/// One row of the JSON snapshot format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosEntry {
    pub engine: EngineId,
    pub service: ServiceId,
    pub latency_s: f64,
    pub bandwidth_mbps: f64,
}

/// Immutable snapshot of engine↔service QoS.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QosMatrix {
    samples: BTreeMap<(EngineId, ServiceId), QosSample>,
    pub timestamp: f64,
}

impl QosMatrix {
    pub fn new(timestamp: f64) -> Self {
        Self {
            samples: BTreeMap::new(),
            timestamp,
        }
    }

    pub fn with_sample(mut self, engine: &str, service: &str, sample: QosSample) -> Self {
        self.insert(engine, service, sample);
        self
    }

    pub fn insert(&mut self, engine: &str, service: &str, sample: QosSample) {
        self.samples
            .insert((engine.to_string(), service.to_string()), sample);
    }

    pub fn get(&self, engine: &str, service: &str) -> Result<QosSample, QosError> {
        self.samples
            .get(&(engine.to_string(), service.to_string()))
            .copied()
            .ok_or_else(|| QosError::MissingQos {
                engine: engine.to_string(),
                service: service.to_string(),
            })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn entries(&self) -> Vec<QosEntry> {
        self.samples
            .iter()
            .map(|((engine, service), s)| QosEntry {
                engine: engine.clone(),
                service: service.clone(),
                latency_s: s.latency_s,
                bandwidth_mbps: s.bandwidth_mbps,
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries()).expect("entries serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, QosError> {
        let entries: Vec<QosEntry> =
            serde_json::from_str(text).map_err(|e| QosError::Format(e.to_string()))?;
        let mut m = QosMatrix::new(0.0);
        for e in entries {
            m.insert(&e.engine, &e.service, QosSample::new(e.latency_s, e.bandwidth_mbps)?);
        }
        Ok(m)
    }
}

/// T = L + S / B.
pub fn estimate_transmission(latency_s: f64, bandwidth_mbps: f64, input_mb: f64) -> Result<f64, QosError> {
    if !(bandwidth_mbps > 0.0) {
        return Err(QosError::Domain(format!("bandwidth must be > 0, got {bandwidth_mbps}")));
    }
    if !(latency_s >= 0.0) || !(input_mb >= 0.0) {
        return Err(QosError::Domain(format!(
            "latency and size must be >= 0, got {latency_s} and {input_mb}"
        )));
    }
    Ok(latency_s + input_mb / bandwidth_mbps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionEstimate {
    pub engine: EngineId,
    pub time_s: f64,
    pub latency_s: f64,
    pub bandwidth_mbps: f64,
    pub input_mb: f64,
}

/// Estimates for every candidate, best first (ties by engine id).
pub fn rank_engines(
    candidates: &[EngineId],
    service: &str,
    qos: &QosMatrix,
    input_mb: f64,
) -> Result<Vec<TransmissionEstimate>, QosError> {
    let mut out = candidates
        .iter()
        .map(|engine| {
            let s = qos.get(engine, service)?;
            Ok(TransmissionEstimate {
                engine: engine.clone(),
                time_s: estimate_transmission(s.latency_s, s.bandwidth_mbps, input_mb)?,
                latency_s: s.latency_s,
                bandwidth_mbps: s.bandwidth_mbps,
                input_mb,
            })
        })
        .collect::<Result<Vec<_>, QosError>>()?;
    out.sort_by(|a, b| a.time_s.total_cmp(&b.time_s).then_with(|| a.engine.cmp(&b.engine)));
    Ok(out)
}

/// The surviving engine with the shortest predicted transmission time.
pub fn rank_and_select(
    survivors: &[EngineId],
    service: &str,
    qos: &QosMatrix,
    input_mb: f64,
) -> Result<TransmissionEstimate, QosError> {
    rank_engines(survivors, service, qos, input_mb)?
        .into_iter()
        .next()
        .ok_or(QosError::NoEngine)
}

/// Ratio of mean centralized to mean distributed completion time.
pub fn speedup(centralized_s: f64, distributed_s: f64) -> Result<f64, QosError> {
    if !(distributed_s > 0.0) {
        return Err(QosError::Domain(format!(
            "distributed time must be > 0, got {distributed_s}"
        )));
    }
    Ok(centralized_s / distributed_s)
}
