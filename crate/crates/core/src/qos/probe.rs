use std::collections::BTreeMap;

use super::{QosError, QosSample, ServiceId};

/// Response to a full request used for bandwidth estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResponse {
    pub size_mb: f64,
    pub completion_s: f64,
}

/// Source of network measurements towards a service, either a real
/// transport or a simulated one.
pub trait ProbeChannel {
    /// One lightweight round trip, in seconds.
    fn round_trip(&self, service: &str) -> Result<f64, QosError>;
    /// One full request; returns response size and completion time.
    fn fetch(&self, service: &str) -> Result<ProbeResponse, QosError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub latency_samples: usize,
    pub min_bandwidth_mbps: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            latency_samples: 5,
            min_bandwidth_mbps: 0.01,
        }
    }
}

/// Mean of `n` round-trip samples.
pub fn probe_latency(probe: &dyn ProbeChannel, service: &str, n: usize) -> Result<f64, QosError> {
    if n == 0 {
        return Err(QosError::Domain("at least one latency sample is required".into()));
    }
    let mut total = 0.0;
    for _ in 0..n {
        total += probe.round_trip(service)?;
    }
    Ok(total / n as f64)
}

pub fn probe_bandwidth(probe: &dyn ProbeChannel, service: &str) -> Result<f64, QosError> {
    probe_bandwidth_with(probe, service, &ProbeConfig::default())
}

/// Response size over completion time net of the measured latency.
pub fn probe_bandwidth_with(
    probe: &dyn ProbeChannel,
    service: &str,
    config: &ProbeConfig,
) -> Result<f64, QosError> {
    let latency = probe_latency(probe, service, config.latency_samples)?;
    let resp = probe.fetch(service)?;
    if !(resp.size_mb > 0.0) {
        return Err(QosError::Probe {
            service: service.to_string(),
            reason: "empty response, bandwidth cannot be estimated".into(),
        });
    }
    let net = resp.completion_s - latency;
    if !(net > 0.0) {
        return Err(QosError::Probe {
            service: service.to_string(),
            reason: format!(
                "completion {}s does not exceed latency {latency}s",
                resp.completion_s
            ),
        });
    }
    Ok((resp.size_mb / net).max(config.min_bandwidth_mbps))
}

/// Noise-free channel answering from ground-truth link parameters.
#[derive(Debug, Clone, Default)]
pub struct SimulatedChannel {
    links: BTreeMap<ServiceId, QosSample>,
    pub response_mb: f64,
}

impl SimulatedChannel {
    pub fn new(response_mb: f64) -> Self {
        Self {
            links: BTreeMap::new(),
            response_mb,
        }
    }

    pub fn with_link(mut self, service: &str, link: QosSample) -> Self {
        self.links.insert(service.to_string(), link);
        self
    }

    fn link(&self, service: &str) -> Result<QosSample, QosError> {
        self.links.get(service).copied().ok_or_else(|| QosError::Probe {
            service: service.to_string(),
            reason: "unreachable".into(),
        })
    }
}

impl ProbeChannel for SimulatedChannel {
    fn round_trip(&self, service: &str) -> Result<f64, QosError> {
        Ok(self.link(service)?.latency_s)
    }

    fn fetch(&self, service: &str) -> Result<ProbeResponse, QosError> {
        let link = self.link(service)?;
        Ok(ProbeResponse {
            size_mb: self.response_mb,
            completion_s: link.transfer_time(self.response_mb),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::cell::Cell;

    struct Scripted {
        rtts: Vec<f64>,
        next: Cell<usize>,
        response: ProbeResponse,
    }

    impl ProbeChannel for Scripted {
        fn round_trip(&self, _: &str) -> Result<f64, QosError> {
            let i = self.next.get();
            self.next.set(i + 1);
            Ok(self.rtts[i % self.rtts.len()])
        }
        fn fetch(&self, _: &str) -> Result<ProbeResponse, QosError> {
            Ok(self.response)
        }
    }

    fn scripted(rtts: Vec<f64>, size_mb: f64, completion_s: f64) -> Scripted {
        Scripted {
            rtts,
            next: Cell::new(0),
            response: ProbeResponse { size_mb, completion_s },
        }
    }

    #[test]
    fn latency_examples() {
        let ch = SimulatedChannel::new(1.0).with_link("s", QosSample::new(0.08, 10.0).unwrap());
        assert!((probe_latency(&ch, "s", 5).unwrap() - 0.08).abs() < 1e-12);
        let two = scripted(vec![0.07, 0.09], 1.0, 1.0);
        assert!((probe_latency(&two, "s", 2).unwrap() - 0.08).abs() < 1e-12);
        assert!(matches!(probe_latency(&ch, "nowhere", 3), Err(QosError::Probe { .. })));
        assert!(probe_latency(&ch, "s", 0).is_err());
    }

    #[test]
    fn bandwidth_examples() {
        let ten = scripted(vec![0.1], 10.0, 1.1);
        assert!((probe_bandwidth(&ten, "s").unwrap() - 10.0).abs() < 1e-9);
        let two = scripted(vec![0.1], 1.0, 0.6);
        assert!((probe_bandwidth(&two, "s").unwrap() - 2.0).abs() < 1e-9);
        let empty = scripted(vec![0.1], 0.0, 0.5);
        assert!(matches!(probe_bandwidth(&empty, "s"), Err(QosError::Probe { .. })));
    }

    #[test]
    fn bandwidth_floor_applies() {
        let slow = scripted(vec![0.0], 0.001, 100.0);
        assert_eq!(probe_bandwidth(&slow, "s").unwrap(), 0.01);
    }

    proptest! {
        #[test]
        fn simulated_probing_recovers_truth(l in 0.0f64..0.5, b in 0.05f64..500.0, size in 0.1f64..50.0) {
            let ch = SimulatedChannel::new(size).with_link("s", QosSample::new(l, b).unwrap());
            let got_l = probe_latency(&ch, "s", 5).unwrap();
            prop_assert!((got_l - l).abs() <= 1e-9);
            let got_b = probe_bandwidth(&ch, "s").unwrap();
            prop_assert!(((got_b - b) / b).abs() <= 1e-6);
        }
    }
}
