//! Syntax tree for workflow sources.

use std::fmt;

use serde::{Deserialize, Serialize};

/// 1-based line/column position of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Self {
        Self { line, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A named piece of workflow source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub text: String,
    pub origin: String,
}

impl SourceUnit {
    pub fn new(origin: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            origin: origin.into(),
        }
    }
}

/// Value type tags. `Any` unifies with every tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeTag {
    Int,
    String,
    Any,
}

impl TypeTag {
    /// Returns the most specific tag compatible with both, or `None` when
    /// they do not unify.
    pub fn unify(self, other: TypeTag) -> Option<TypeTag> {
        match (self, other) {
            (TypeTag::Any, t) | (t, TypeTag::Any) => Some(t),
            (a, b) if a == b => Some(a),
            _ => None,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            TypeTag::Int => "int",
            TypeTag::String => "string",
            TypeTag::Any => "any",
        }
    }

    pub fn from_keyword(s: &str) -> Option<TypeTag> {
        match s {
            "int" => Some(TypeTag::Int),
            "string" => Some(TypeTag::String),
            "any" => Some(TypeTag::Any),
            _ => None,
        }
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// `engine e2 is http://...` or `description d1 is http://...`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrlDecl {
    pub id: String,
    pub url: String,
    pub pos: Pos,
}

/// `service s1 is d1.Service1`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceDecl {
    pub id: String,
    pub description: String,
    pub service_name: String,
    pub pos: Pos,
}

/// `port p1 is s1.Port1`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortDecl {
    pub id: String,
    pub service: String,
    pub port_name: String,
    pub pos: Pos,
}

/// One name in an `input:` or `output:` block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub ty: TypeTag,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowEndpoint {
    Variable {
        name: String,
        pos: Pos,
    },
    /// `port.Op`, or `port.Op.par` when `param` is set.
    Invocation {
        port: String,
        operation: String,
        param: Option<String>,
        pos: Pos,
    },
}

impl FlowEndpoint {
    pub fn pos(&self) -> Pos {
        match self {
            FlowEndpoint::Variable { pos, .. } | FlowEndpoint::Invocation { pos, .. } => *pos,
        }
    }
}

impl fmt::Display for FlowEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowEndpoint::Variable { name, .. } => f.write_str(name),
            FlowEndpoint::Invocation {
                port,
                operation,
                param: None,
                ..
            } => write!(f, "{port}.{operation}"),
            FlowEndpoint::Invocation {
                port,
                operation,
                param: Some(par),
                ..
            } => write!(f, "{port}.{operation}.{par}"),
        }
    }
}

/// `source -> target, target, ...`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowStmt {
    pub source: FlowEndpoint,
    pub targets: Vec<FlowEndpoint>,
    pub pos: Pos,
}

/// `forward c to e2`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardStmt {
    pub variable: String,
    pub engine: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowAst {
    pub name: String,
    pub uid: Option<String>,
    pub origin: String,
    pub engines: Vec<UrlDecl>,
    pub descriptions: Vec<UrlDecl>,
    pub services: Vec<ServiceDecl>,
    pub ports: Vec<PortDecl>,
    pub inputs: Vec<VarDecl>,
    pub outputs: Vec<VarDecl>,
    pub flows: Vec<FlowStmt>,
    pub forwards: Vec<ForwardStmt>,
}

impl WorkflowAst {
    pub fn description(&self, id: &str) -> Option<&UrlDecl> {
        self.descriptions.iter().find(|d| d.id == id)
    }

    pub fn engine(&self, id: &str) -> Option<&UrlDecl> {
        self.engines.iter().find(|d| d.id == id)
    }

    pub fn service(&self, id: &str) -> Option<&ServiceDecl> {
        self.services.iter().find(|d| d.id == id)
    }

    pub fn port(&self, id: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|d| d.id == id)
    }

    pub fn input(&self, name: &str) -> Option<&VarDecl> {
        self.inputs.iter().find(|d| d.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&VarDecl> {
        self.outputs.iter().find(|d| d.name == name)
    }
}
