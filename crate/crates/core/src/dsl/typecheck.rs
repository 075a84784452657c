//! Signature checking against service descriptions.
//!
//! Besides checking types, this pass decides which textual `port.Op`
//! mentions denote the same invocation. A mention used as a target joins the
//! latest occurrence of that operation unless the parameter it feeds is
//! already bound, in which case a new occurrence starts. A mention used as a
//! source always refers to the latest occurrence.

use std::collections::HashMap;

use super::ast::*;
use super::description::{OperationSig, ServiceDescriptionDoc};
use super::error::{Diagnostics, DslError};

#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub port: String,
    pub operation: String,
    /// 0 for the first invocation of `port.operation`, 1 for the next, ...
    pub occurrence: usize,
    /// Service declaration id the port belongs to.
    pub service: String,
    pub signature: OperationSig,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueSource {
    Input(String),
    Invocation(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BindTarget {
    Param { invocation: usize, param: usize },
    Output(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub source: ValueSource,
    pub target: BindTarget,
    pub ty: TypeTag,
    pub pos: Pos,
}

/// A checked workflow: the AST plus resolved invocations and value bindings.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedWorkflow {
    pub ast: WorkflowAst,
    pub docs: Vec<ServiceDescriptionDoc>,
    pub invocations: Vec<Invocation>,
    pub bindings: Vec<Binding>,
    /// Named variables (intermediates and outputs) in binding order, with
    /// what produced them.
    pub names: Vec<(String, ValueSource)>,
}

impl TypedWorkflow {
    pub fn source_type(&self, src: &ValueSource) -> TypeTag {
        match src {
            ValueSource::Input(n) => self.ast.input(n).map(|i| i.ty).unwrap_or(TypeTag::Any),
            ValueSource::Invocation(i) => self.invocations[*i].signature.returns,
        }
    }
}

struct Checker<'a> {
    ast: &'a WorkflowAst,
    ports: HashMap<&'a str, (&'a str, &'a ServiceDescriptionDoc, &'a str)>,
    invocations: Vec<Invocation>,
    filled: Vec<Vec<bool>>,
    latest: HashMap<(String, String), usize>,
    bindings: Vec<Binding>,
    vars: HashMap<String, (ValueSource, TypeTag)>,
    named: Vec<(String, ValueSource)>,
    errors: Vec<DslError>,
}

pub fn typecheck(
    ast: &WorkflowAst,
    docs: &[ServiceDescriptionDoc],
) -> Result<TypedWorkflow, Diagnostics> {
    if docs.len() != ast.descriptions.len() {
        return Err(DslError::Format {
            url: ast.origin.clone(),
            reason: format!(
                "{} description documents supplied for {} declarations",
                docs.len(),
                ast.descriptions.len()
            ),
        }
        .into());
    }

    let mut errors = Vec::new();
    let doc_for: HashMap<&str, &ServiceDescriptionDoc> = ast
        .descriptions
        .iter()
        .zip(docs)
        .map(|(d, doc)| (d.id.as_str(), doc))
        .collect();
    let mut services: HashMap<&str, &ServiceDescriptionDoc> = HashMap::new();
    for s in &ast.services {
        match doc_for.get(s.description.as_str()) {
            Some(doc) if doc.service == s.service_name => {
                services.insert(s.id.as_str(), doc);
            }
            Some(doc) => errors.push(DslError::resolve(
                s.pos,
                format!(
                    "description {} describes service {}, not {}",
                    s.description, doc.service, s.service_name
                ),
            )),
            None => errors.push(DslError::resolve(
                s.pos,
                format!("undeclared description {}", s.description),
            )),
        }
    }
    let mut ports = HashMap::new();
    for p in &ast.ports {
        let Some(doc) = services.get(p.service.as_str()) else {
            continue;
        };
        if doc.port(&p.port_name).is_some() {
            ports.insert(p.id.as_str(), (p.service.as_str(), *doc, p.port_name.as_str()));
        } else {
            errors.push(DslError::resolve(
                p.pos,
                format!("service {} has no port {}", doc.service, p.port_name),
            ));
        }
    }

    let mut checker = Checker {
        ast,
        ports,
        invocations: Vec::new(),
        filled: Vec::new(),
        latest: HashMap::new(),
        bindings: Vec::new(),
        vars: HashMap::new(),
        named: Vec::new(),
        errors,
    };
    for flow in &ast.flows {
        checker.flow(flow);
    }
    checker.finish(docs)
}

impl<'a> Checker<'a> {
    fn signature(&mut self, port: &str, op: &str, pos: Pos) -> Option<(String, OperationSig)> {
        let (service, doc, port_name) = match self.ports.get(port) {
            Some(v) => *v,
            None => {
                // Already reported on the port declaration, or undeclared (parse rejects).
                if self.ast.port(port).is_none() {
                    self.errors
                        .push(DslError::resolve(pos, format!("undeclared port {port}")));
                }
                return None;
            }
        };
        match doc.operation(port_name, op) {
            Some(sig) if sig.arity() == 0 => {
                self.errors.push(DslError::Arity {
                    pos,
                    message: format!("{port}.{op} takes no parameters and cannot be invoked"),
                });
                None
            }
            Some(sig) => Some((service.to_string(), sig.clone())),
            None => {
                self.errors.push(DslError::resolve(
                    pos,
                    format!("port {port} has no operation {op}"),
                ));
                None
            }
        }
    }

    fn new_occurrence(&mut self, port: &str, op: &str, service: String, sig: OperationSig, pos: Pos) -> usize {
        let key = (port.to_string(), op.to_string());
        let occurrence = self
            .invocations
            .iter()
            .filter(|i| i.port == port && i.operation == op)
            .count();
        self.filled.push(vec![false; sig.arity()]);
        self.invocations.push(Invocation {
            port: port.to_string(),
            operation: op.to_string(),
            occurrence,
            service,
            signature: sig,
            pos,
        });
        let idx = self.invocations.len() - 1;
        self.latest.insert(key, idx);
        idx
    }

    fn source(&mut self, ep: &FlowEndpoint) -> Option<(ValueSource, TypeTag)> {
        match ep {
            FlowEndpoint::Variable { name, pos } => {
                if let Some(input) = self.ast.input(name) {
                    return Some((ValueSource::Input(name.clone()), input.ty));
                }
                match self.vars.get(name) {
                    Some(v) => Some(v.clone()),
                    None => {
                        self.errors.push(DslError::resolve(
                            *pos,
                            format!("undeclared or unbound variable {name}"),
                        ));
                        None
                    }
                }
            }
            FlowEndpoint::Invocation {
                port,
                operation,
                pos,
                ..
            } => {
                let key = (port.clone(), operation.clone());
                if let Some(&idx) = self.latest.get(&key) {
                    let ty = self.invocations[idx].signature.returns;
                    return Some((ValueSource::Invocation(idx), ty));
                }
                let (service, sig) = self.signature(port, operation, *pos)?;
                let ty = sig.returns;
                let idx = self.new_occurrence(port, operation, service, sig, *pos);
                Some((ValueSource::Invocation(idx), ty))
            }
        }
    }

    fn flow(&mut self, flow: &FlowStmt) {
        let Some((source, src_ty)) = self.source(&flow.source) else {
            return;
        };
        for target in &flow.targets {
            match target {
                FlowEndpoint::Variable { name, pos } => {
                    if let Some(out) = self.ast.output(name) {
                        match out.ty.unify(src_ty) {
                            Some(ty) => self.bindings.push(Binding {
                                source: source.clone(),
                                target: BindTarget::Output(name.clone()),
                                ty,
                                pos: *pos,
                            }),
                            None => self.errors.push(DslError::Type {
                                pos: *pos,
                                context: format!("output {name}"),
                                expected: out.ty,
                                found: src_ty,
                            }),
                        }
                    }
                    self.vars.insert(name.clone(), (source.clone(), src_ty));
                    self.named.push((name.clone(), source.clone()));
                }
                FlowEndpoint::Invocation {
                    port,
                    operation,
                    param,
                    pos,
                } => {
                    let key = (port.clone(), operation.clone());
                    let sig = match self.latest.get(&key) {
                        Some(&idx) => self.invocations[idx].signature.clone(),
                        None => match self.signature(port, operation, *pos) {
                            Some((_, sig)) => sig,
                            None => continue,
                        },
                    };
                    let param_idx = match param {
                        Some(p) => match sig.param_index(p) {
                            Some(i) => i,
                            None => {
                                self.errors.push(DslError::resolve(
                                    *pos,
                                    format!("{port}.{operation} has no parameter {p}"),
                                ));
                                continue;
                            }
                        },
                        None if sig.arity() == 1 => 0,
                        None => {
                            self.errors.push(DslError::Arity {
                                pos: *pos,
                                message: format!(
                                    "{port}.{operation} takes {} parameters; name the one being bound",
                                    sig.arity()
                                ),
                            });
                            continue;
                        }
                    };
                    let idx = match self.latest.get(&key) {
                        Some(&idx) if !self.filled[idx][param_idx] => idx,
                        _ => {
                            let (service, sig) = match self.signature(port, operation, *pos) {
                                Some(v) => v,
                                None => continue,
                            };
                            self.new_occurrence(port, operation, service, sig, *pos)
                        }
                    };
                    self.filled[idx][param_idx] = true;
                    let expected = sig.params[param_idx].ty;
                    match expected.unify(src_ty) {
                        Some(ty) => self.bindings.push(Binding {
                            source: source.clone(),
                            target: BindTarget::Param {
                                invocation: idx,
                                param: param_idx,
                            },
                            ty,
                            pos: *pos,
                        }),
                        None => self.errors.push(DslError::Type {
                            pos: *pos,
                            context: format!(
                                "parameter {} of {port}.{operation}",
                                sig.params[param_idx].name
                            ),
                            expected,
                            found: src_ty,
                        }),
                    }
                }
            }
        }
    }

    fn finish(mut self, docs: &[ServiceDescriptionDoc]) -> Result<TypedWorkflow, Diagnostics> {
        for (inv, filled) in self.invocations.iter().zip(&self.filled) {
            let missing: Vec<&str> = inv
                .signature
                .params
                .iter()
                .zip(filled)
                .filter(|(_, f)| !**f)
                .map(|(p, _)| p.name.as_str())
                .collect();
            if !missing.is_empty() {
                self.errors.push(DslError::Arity {
                    pos: inv.pos,
                    message: format!(
                        "{}.{} is missing arguments for {}",
                        inv.port,
                        inv.operation,
                        missing.join(", ")
                    ),
                });
            }
        }
        for out in &self.ast.outputs {
            if !self.vars.contains_key(&out.name) {
                self.errors.push(DslError::UnboundOutput {
                    pos: out.pos,
                    name: out.name.clone(),
                });
            }
        }
        if !self.errors.is_empty() {
            self.errors.sort_by_key(|e| e.pos());
            return Err(Diagnostics(self.errors));
        }
        Ok(TypedWorkflow {
            ast: self.ast.clone(),
            docs: docs.to_vec(),
            invocations: self.invocations,
            bindings: self.bindings,
            names: self.named,
        })
    }
}
