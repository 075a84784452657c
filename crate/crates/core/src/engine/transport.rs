use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};

use super::{Datum, DispatchReceipt, EngineError, InvocationRequest};
use crate::dsl::TypeTag;
use crate::qos::{estimate_transmission, QosSample};

/// Calls services on behalf of an engine.
pub trait ServiceInvoker {
    fn invoke(&mut self, request: &InvocationRequest) -> Result<Datum, String>;
}

/// Moves bytes between engine endpoints. Returns the transfer time.
pub trait Transport {
    fn transfer(&mut self, from_url: &str, to_url: &str, size_mb: f64) -> Result<f64, String>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff_s: f64,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff_s: 0.5,
            factor: 2.0,
        }
    }
}

/// Sends with exponential backoff between failed attempts. Backoff is
/// counted in the receipt's delivery time, not slept.
#[allow(clippy::too_many_arguments)]
pub fn send_with_retry(
    transport: &mut dyn Transport,
    policy: &RetryPolicy,
    from_url: &str,
    to_url: &str,
    variable: &str,
    dest: &str,
    size_mb: f64,
    now: f64,
) -> Result<DispatchReceipt, EngineError> {
    let mut waited = 0.0;
    let mut backoff = policy.initial_backoff_s;
    let mut last = String::new();
    for attempt in 1..=policy.attempts.max(1) {
        match transport.transfer(from_url, to_url, size_mb) {
            Ok(t) => {
                return Ok(DispatchReceipt {
                    variable: variable.to_string(),
                    dest: dest.to_string(),
                    size_mb,
                    sent_at: now,
                    delivered_at: now + waited + t,
                    attempts: attempt,
                })
            }
            Err(e) => {
                last = e;
                waited += backoff;
                backoff *= policy.factor;
            }
        }
    }
    Err(EngineError::Transport {
        dest: to_url.to_string(),
        reason: format!("{last} after {} attempts", policy.attempts.max(1)),
    })
}

/// Link table between endpoints with L + S/B costs.
#[derive(Debug, Clone, Default)]
pub struct SimulatedTransport {
    links: BTreeMap<(String, String), QosSample>,
    default: Option<QosSample>,
    down: BTreeSet<String>,
    transient: BTreeMap<String, u32>,
    pub bytes_mb: f64,
}

impl SimulatedTransport {
    pub fn new(default: Option<QosSample>) -> Self {
        Self {
            default,
            ..Self::default()
        }
    }

    /// Symmetric link.
    pub fn link(mut self, a: &str, b: &str, qos: QosSample) -> Self {
        self.links.insert((a.to_string(), b.to_string()), qos);
        self.links.insert((b.to_string(), a.to_string()), qos);
        self
    }

    /// Every transfer to `url` fails.
    pub fn take_down(&mut self, url: &str) {
        self.down.insert(url.to_string());
    }

    /// The next `n` transfers to `url` fail.
    pub fn fail_next(&mut self, url: &str, n: u32) {
        self.transient.insert(url.to_string(), n);
    }
}

impl Transport for SimulatedTransport {
    fn transfer(&mut self, from_url: &str, to_url: &str, size_mb: f64) -> Result<f64, String> {
        if self.down.contains(to_url) {
            return Err(format!("{to_url} unreachable"));
        }
        if let Some(n) = self.transient.get_mut(to_url) {
            if *n > 0 {
                *n -= 1;
                return Err(format!("{to_url} timed out"));
            }
        }
        self.bytes_mb += size_mb;
        if from_url == to_url {
            return Ok(0.0);
        }
        let qos = self
            .links
            .get(&(from_url.to_string(), to_url.to_string()))
            .copied()
            .or(self.default)
            .ok_or_else(|| format!("no route from {from_url} to {to_url}"))?;
        estimate_transmission(qos.latency_s, qos.bandwidth_mbps, size_mb).map_err(|e| e.to_string())
    }
}

/// Deterministic stand-in for a service operation.
///
/// Int results mix the operation identity with the arguments in order, so
/// swapping aggregation parameters changes the result. Strings concatenate.
/// The result is as large as the largest argument.
pub fn pure_result(request: &InvocationRequest) -> Datum {
    let size_mb = request.args.iter().map(|a| a.size_mb).fold(0.0, f64::max);
    let key = format!("{}|{}|{}", request.description_url, request.port_name, request.operation);
    let digest = Sha256::digest(key.as_bytes());
    let salt = i64::from_le_bytes(digest[..8].try_into().unwrap()) & 0xffff;
    match request.returns {
        TypeTag::String => {
            let joined: Vec<String> = request
                .args
                .iter()
                .map(|a| a.as_text().unwrap_or_default().to_string())
                .collect();
            Datum::string(&format!("{}({})", request.operation, joined.join(",")), size_mb)
        }
        _ => {
            let mut acc = salt;
            for (i, a) in request.args.iter().enumerate() {
                let v = a.as_int().unwrap_or(a.payload.len() as i64);
                acc = acc.wrapping_mul(31).wrapping_add(v.wrapping_mul(i as i64 + 7)) % 1_000_000_007;
            }
            Datum::int(acc, size_mb)
        }
    }
}

/// Invoker answering every request with [`pure_result`], optionally failing
/// selected operations.
#[derive(Debug, Clone, Default)]
pub struct PureServices {
    pub failing: BTreeSet<String>,
    pub calls: usize,
}

impl ServiceInvoker for PureServices {
    fn invoke(&mut self, request: &InvocationRequest) -> Result<Datum, String> {
        self.calls += 1;
        if self.failing.contains(&request.operation) {
            return Err(format!("{} faulted", request.operation));
        }
        Ok(pure_result(request))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(l: f64, b: f64) -> QosSample {
        QosSample::new(l, b).unwrap()
    }

    #[test]
    fn transfer_cost_is_latency_plus_size_over_bandwidth() {
        let mut t = SimulatedTransport::new(None).link("a", "b", q(0.1, 10.0));
        let r = send_with_retry(&mut t, &RetryPolicy::default(), "a", "b", "c", "e2", 5.0, 1.0).unwrap();
        assert!((r.delivered_at - 1.6).abs() < 1e-12);
        let r = send_with_retry(&mut t, &RetryPolicy::default(), "b", "a", "c", "e1", 0.0, 0.0).unwrap();
        assert_eq!(r.delivered_at, 0.1);
        assert_eq!(r.attempts, 1);
    }

    #[test]
    fn retries_then_gives_up() {
        let mut t = SimulatedTransport::new(Some(q(0.1, 10.0)));
        t.fail_next("b", 2);
        let r = send_with_retry(&mut t, &RetryPolicy::default(), "a", "b", "c", "e2", 0.0, 0.0).unwrap();
        assert_eq!(r.attempts, 3);
        assert!((r.delivered_at - (0.5 + 1.0 + 0.1)).abs() < 1e-12);
        t.take_down("b");
        let err = send_with_retry(&mut t, &RetryPolicy::default(), "a", "b", "c", "e2", 0.0, 0.0).unwrap_err();
        assert!(matches!(err, EngineError::Transport { .. }));
    }

    fn req(args: Vec<Datum>) -> InvocationRequest {
        InvocationRequest {
            service: "s6".into(),
            service_name: "Service6".into(),
            description_url: "u".into(),
            port: "p6".into(),
            port_name: "Port6".into(),
            operation: "Op6".into(),
            args,
            returns: TypeTag::Int,
        }
    }

    #[test]
    fn pure_results_are_order_sensitive() {
        let a = pure_result(&req(vec![Datum::int(1, 2.0), Datum::int(2, 5.0)]));
        let b = pure_result(&req(vec![Datum::int(2, 2.0), Datum::int(1, 5.0)]));
        assert_ne!(a.as_int(), b.as_int());
        assert_eq!(a.size_mb, 5.0);
        assert_eq!(a, pure_result(&req(vec![Datum::int(1, 2.0), Datum::int(2, 5.0)])));
    }
}
