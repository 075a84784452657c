use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dsl::{InMemoryRegistry, OperationSig, Param, PortDesc, ServiceDescriptionDoc, SourceUnit, TypeTag};

pub const DESCRIPTION_HOST: &str = "http://services.example.org/documents";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Pipeline,
    Distribution,
    Aggregation,
    EndToEnd,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [
        Pattern::Pipeline,
        Pattern::Distribution,
        Pattern::Aggregation,
        Pattern::EndToEnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Pipeline => "pipeline",
            Pattern::Distribution => "distribution",
            Pattern::Aggregation => "aggregation",
            Pattern::EndToEnd => "end_to_end",
        }
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pattern::ALL
            .into_iter()
            .find(|p| p.name() == s || p.name().replace('_', "-") == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown pattern {s}")))
    }
}

/// A generated workflow with the descriptions it refers to.
#[derive(Debug, Clone)]
pub struct Workload {
    pub pattern: Pattern,
    pub services: usize,
    pub source: SourceUnit,
    pub registry: InMemoryRegistry,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

/// Service `i` of a generated workload.
pub fn description_url(i: usize) -> String {
    format!("{DESCRIPTION_HOST}/service{i}.wsdl")
}

/// `arity` of `None` is a single `value` parameter.
fn description(i: usize, arity: Option<usize>) -> ServiceDescriptionDoc {
    let params = match arity {
        None => vec![Param {
            name: "value".into(),
            ty: TypeTag::Int,
        }],
        Some(arity) => (1..=arity)
            .map(|k| Param {
                name: format!("par{k}"),
                ty: TypeTag::Int,
            })
            .collect(),
    };
    ServiceDescriptionDoc {
        url: description_url(i),
        service: format!("Service{i}"),
        ports: vec![PortDesc {
            name: format!("Port{i}"),
            operations: vec![OperationSig {
                name: format!("Op{i}"),
                params,
                returns: TypeTag::Int,
            }],
        }],
    }
}

fn op(i: usize) -> String {
    format!("p{i}.Op{i}")
}

/// Builds a workflow of `n` services arranged in `pattern`.
///
/// * pipeline: a chain `a -> 1 -> 2 -> ... -> n -> x`.
/// * distribution: service 1 feeds services 2..n, each producing an output.
/// * aggregation: services 1..n-1 all consume `a` and feed the parameters of service n.
/// * end_to_end: a pipeline prefix fanning out to `max(2, (n-1)/3)` branches
///   that aggregate into a final service. With 6 services this is a
///   three-stage chain, two branches and a two-parameter sink. Fewer than 4
///   services fall back to a pipeline.
pub fn generate_workflow(pattern: Pattern, n: usize) -> Result<Workload, HarnessError> {
    let min = match pattern {
        Pattern::Pipeline => 1,
        Pattern::Distribution | Pattern::Aggregation => 2,
        Pattern::EndToEnd => 1,
    };
    if n < min {
        return Err(HarnessError::Config(format!(
            "{pattern} needs at least {min} services, got {n}"
        )));
    }
    let mut arity = vec![None; n + 1];
    let mut flows: Vec<String> = Vec::new();
    let mut outputs = vec!["x".to_string()];
    let effective = if pattern == Pattern::EndToEnd && n < 4 {
        Pattern::Pipeline
    } else {
        pattern
    };
    match effective {
        Pattern::Pipeline => {
            flows.push(format!("a -> {}", op(1)));
            for i in 1..n {
                flows.push(format!("{} -> {}", op(i), op(i + 1)));
            }
            flows.push(format!("{} -> x", op(n)));
        }
        Pattern::Distribution => {
            flows.push(format!("a -> {}", op(1)));
            let leaves: Vec<String> = (2..=n).map(op).collect();
            flows.push(format!("{} -> {}", op(1), leaves.join(", ")));
            outputs = (2..=n).map(|i| format!("x{i}")).collect();
            for i in 2..=n {
                flows.push(format!("{} -> x{i}", op(i)));
            }
        }
        Pattern::Aggregation => {
            let sources: Vec<String> = (1..n).map(op).collect();
            flows.push(format!("a -> {}", sources.join(", ")));
            arity[n] = Some(n - 1);
            for i in 1..n {
                flows.push(format!("{} -> {}.par{i}", op(i), op(n)));
            }
            flows.push(format!("{} -> x", op(n)));
        }
        Pattern::EndToEnd => {
            let branches = ((n - 1) / 3).max(2);
            let prefix = n - 1 - branches;
            flows.push(format!("a -> {}", op(1)));
            for i in 1..prefix {
                flows.push(format!("{} -> {}", op(i), op(i + 1)));
            }
            let branch_ops: Vec<String> = (prefix + 1..n).map(op).collect();
            flows.push(format!("{} -> {}", op(prefix), branch_ops.join(", ")));
            arity[n] = Some(branches);
            for (k, i) in (prefix + 1..n).enumerate() {
                flows.push(format!("{} -> {}.par{}", op(i), op(n), k + 1));
            }
            flows.push(format!("{} -> x", op(n)));
        }
    }

    let mut text = format!("workflow {}{n}\n", pattern.name());
    for i in 1..=n {
        let _ = writeln!(text, "description d{i} is {}", description_url(i));
    }
    for i in 1..=n {
        let _ = writeln!(text, "service s{i} is d{i}.Service{i}");
    }
    for i in 1..=n {
        let _ = writeln!(text, "port p{i} is s{i}.Port{i}");
    }
    text.push_str("input:\n   int a\noutput:\n");
    for o in &outputs {
        let _ = writeln!(text, "   int {o}");
    }
    for f in &flows {
        text.push_str(f);
        text.push('\n');
    }

    let mut registry = InMemoryRegistry::new();
    for (i, &k) in arity.iter().enumerate().skip(1) {
        registry.insert(description_url(i), description(i, k));
    }
    Ok(Workload {
        pattern,
        services: n,
        source: SourceUnit::new(format!("{}{n}.orc", pattern.name()), text),
        registry,
        inputs: vec!["a".into()],
        outputs,
    })
}
