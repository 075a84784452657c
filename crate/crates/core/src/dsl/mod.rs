//! Workflow language front end: lexing, parsing, checking against service
//! descriptions, and re-encoding composites back to source.

mod ast;
mod description;
mod encode;
mod error;
mod lexer;
mod parser;
mod typecheck;

pub use ast::*;
pub use description::{
    resolve_descriptions, DescriptionResolver, DirectoryResolver, InMemoryRegistry, OperationSig,
    Param, PortDesc, ServiceDescriptionDoc,
};
pub use encode::encode;
pub use error::{Diagnostics, DslError};
pub use lexer::{is_keyword, KEYWORDS};
pub use parser::parse;
pub use typecheck::{typecheck, BindTarget, Binding, Invocation, TypedWorkflow, ValueSource};

use thiserror::Error;

use crate::graph::{build_graph, GraphError, WorkflowGraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Syntax(DslError),
    #[error(transparent)]
    Check(#[from] Diagnostics),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl CompileError {
    /// Individual diagnostics, for reporting one per line.
    pub fn diagnostics(&self) -> Vec<String> {
        match self {
            CompileError::Check(d) => d.iter().map(|e| e.to_string()).collect(),
            other => vec![other.to_string()],
        }
    }
}

impl From<DslError> for CompileError {
    fn from(e: DslError) -> Self {
        CompileError::Syntax(e)
    }
}

/// Output of the full front-end pipeline.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub ast: WorkflowAst,
    pub typed: TypedWorkflow,
    pub graph: WorkflowGraph,
}

/// parse → resolve descriptions → typecheck → build graph.
pub fn compile(src: &SourceUnit, resolver: &dyn DescriptionResolver) -> Result<Compiled, CompileError> {
    let ast = parse(src)?;
    let docs = resolve_descriptions(&ast, resolver)?;
    let typed = typecheck(&ast, &docs)?;
    let graph = build_graph(&typed)?;
    Ok(Compiled { ast, typed, graph })
}
