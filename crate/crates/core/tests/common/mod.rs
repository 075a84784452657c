#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use orchestra::dsl::{
    parse, DirectoryResolver, FlowEndpoint, InMemoryRegistry, OperationSig, Param, PortDesc, ServiceDescriptionDoc,
    SourceUnit, TypeTag, WorkflowAst,
};
use orchestra::partitioner::parse_uid;
use rand::Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixtures().join(name)).unwrap()
}

pub fn listing(k: usize) -> SourceUnit {
    SourceUnit::new(format!("listing{k}.orc"), fixture(&format!("listing{k}.orc")))
}

pub fn descriptions() -> DirectoryResolver {
    DirectoryResolver::new(fixtures().join("descriptions"))
}

/// A random DAG workflow over at most `max_services` services.
pub struct RandomDag {
    pub source: SourceUnit,
    pub registry: InMemoryRegistry,
    /// Service index of each invocation, 1-based node order.
    pub service_of: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

pub fn random_dag(rng: &mut impl Rng, max_nodes: usize, max_services: usize, edge_p: f64) -> RandomDag {
    let n = rng.gen_range(1..=max_nodes);
    let m = rng.gen_range(1..=max_services);
    let service_of: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=m)).collect();
    let mut edges = Vec::new();
    for j in 0..n {
        for i in 0..j {
            if rng.gen_bool(edge_p) {
                edges.push((i, j));
            }
        }
    }
    let preds = |j: usize| -> Vec<usize> { edges.iter().filter(|e| e.1 == j).map(|e| e.0).collect() };
    let has_succ = |i: usize| edges.iter().any(|e| e.0 == i);

    let used: BTreeSet<usize> = service_of.iter().copied().collect();
    let mut registry = InMemoryRegistry::new();
    let url = |s: usize| format!("http://dags.example/documents/svc{s}.json");
    for &s in &used {
        let ops = (0..n)
            .filter(|&i| service_of[i] == s)
            .map(|i| {
                let k = preds(i).len();
                let params = if k == 0 {
                    vec![Param {
                        name: "value".into(),
                        ty: TypeTag::Int,
                    }]
                } else {
                    (1..=k)
                        .map(|p| Param {
                            name: format!("par{p}"),
                            ty: TypeTag::Int,
                        })
                        .collect()
                };
                OperationSig {
                    name: format!("Op{}", i + 1),
                    params,
                    returns: TypeTag::Int,
                }
            })
            .collect();
        registry.insert(
            url(s),
            ServiceDescriptionDoc {
                url: url(s),
                service: format!("Svc{s}"),
                ports: vec![PortDesc {
                    name: format!("Port{s}"),
                    operations: ops,
                }],
            },
        );
    }

    let mut text = String::from("workflow dag\n");
    for &s in &used {
        let _ = writeln!(text, "description d{s} is {}", url(s));
    }
    for &s in &used {
        let _ = writeln!(text, "service s{s} is d{s}.Svc{s}");
    }
    for &s in &used {
        let _ = writeln!(text, "port p{s} is s{s}.Port{s}");
    }
    let outputs: Vec<String> = (0..n).filter(|&i| !has_succ(i)).map(|i| format!("x{}", i + 1)).collect();
    let _ = writeln!(text, "input:\n   int a\noutput:\n   int {}", outputs.join(", "));
    let op = |i: usize| format!("p{}.Op{}", service_of[i], i + 1);
    for j in 0..n {
        let ps = preds(j);
        if ps.is_empty() {
            let _ = writeln!(text, "a -> {}", op(j));
        }
        for (k, &i) in ps.iter().enumerate() {
            let _ = writeln!(text, "{} -> {}.par{}", op(i), op(j), k + 1);
        }
        if !has_succ(j) {
            let _ = writeln!(text, "{} -> x{}", op(j), j + 1);
        }
    }
    RandomDag {
        source: SourceUnit::new("dag.orc", text),
        registry,
        service_of,
        edges,
    }
}

/// A composite with generated variable names replaced by the `port.Op`
/// that produces them, so independently named encodings can be compared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub ordinal: Option<u32>,
    pub decls: BTreeSet<String>,
    pub inputs: BTreeSet<String>,
    pub outputs: BTreeSet<String>,
    pub flows: BTreeSet<(String, String)>,
    pub forwards: BTreeSet<(String, String)>,
}

pub fn normalize(texts: &[String]) -> Vec<Normalized> {
    let asts: Vec<WorkflowAst> = texts
        .iter()
        .map(|t| parse(&SourceUnit::new("composite", t.clone())).unwrap())
        .collect();
    let mut canon: BTreeMap<String, String> = BTreeMap::new();
    for ast in &asts {
        for f in &ast.flows {
            if let FlowEndpoint::Invocation { port, operation, .. } = &f.source {
                for t in &f.targets {
                    if let FlowEndpoint::Variable { name, .. } = t {
                        if ast.output(name).is_some() {
                            canon.insert(name.clone(), format!("${port}.{operation}"));
                        }
                    }
                }
            }
        }
    }
    // Final outputs keep their declared names.
    for ast in &asts {
        for o in &ast.outputs {
            if !asts.iter().any(|other| other.input(&o.name).is_some()) {
                canon.remove(&o.name);
            }
        }
    }
    let rename = |v: &str| canon.get(v).cloned().unwrap_or_else(|| v.to_string());
    let endpoint = |e: &FlowEndpoint| match e {
        FlowEndpoint::Variable { name, .. } => rename(name),
        other => other.to_string(),
    };
    asts.iter()
        .map(|ast| {
            let mut decls = BTreeSet::new();
            for e in &ast.engines {
                decls.insert(format!("engine {} {}", e.id, e.url));
            }
            for d in &ast.descriptions {
                decls.insert(format!("description {} {}", d.id, d.url));
            }
            for s in &ast.services {
                decls.insert(format!("service {} {}.{}", s.id, s.description, s.service_name));
            }
            for p in &ast.ports {
                decls.insert(format!("port {} {}.{}", p.id, p.service, p.port_name));
            }
            Normalized {
                ordinal: ast.uid.as_deref().and_then(|u| parse_uid(u).1),
                decls,
                inputs: ast.inputs.iter().map(|v| format!("{} {}", v.ty, rename(&v.name))).collect(),
                outputs: ast.outputs.iter().map(|v| format!("{} {}", v.ty, rename(&v.name))).collect(),
                flows: ast
                    .flows
                    .iter()
                    .flat_map(|f| f.targets.iter().map(move |t| (endpoint(&f.source), endpoint(t))))
                    .collect(),
                forwards: ast.forwards.iter().map(|f| (rename(&f.variable), f.engine.clone())).collect(),
            }
        })
        .collect()
}
