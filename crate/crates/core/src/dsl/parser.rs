//! Recursive-descent parser producing a [`WorkflowAst`].
//!
//! The grammar is line oriented:
//!
//! ```text
//! workflow   := "workflow" IDENT NL ["uid" UID NL] decl* inputs outputs stmt*
//! decl       := ("engine" | "description") IDENT "is" URL NL
//!             | ("service" | "port") IDENT "is" IDENT "." IDENT NL
//! inputs     := "input" ":" NL typed*
//! outputs    := "output" ":" NL typed*
//! typed      := TYPE IDENT ("," IDENT)* NL
//! stmt       := endpoint "->" endpoint ("," endpoint)* NL
//!             | "forward" IDENT "to" IDENT NL
//! endpoint   := IDENT | IDENT "." IDENT ["." IDENT]
//! ```
//!
//! Blank lines are ignored. Identifier cross-references that do not need
//! service descriptions are resolved here; operation signatures are checked
//! later by [`typecheck`](super::typecheck).

use std::collections::HashSet;

use super::ast::*;
use super::error::DslError;
use super::lexer::{is_keyword, tokenize, Token, TokenKind};

pub fn parse(src: &SourceUnit) -> Result<WorkflowAst, DslError> {
    let tokens = tokenize(&src.text)?;
    let mut parser = Parser { tokens, at: 0 };
    let ast = parser.workflow(&src.origin)?;
    check_references(&ast)?;
    Ok(ast)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        tok
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T, DslError> {
        let tok = self.peek();
        Err(DslError::Parse {
            pos: tok.pos,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: tok.kind.describe(),
        })
    }

    fn skip_blank_lines(&mut self) {
        while self.peek().kind == TokenKind::Newline {
            self.bump();
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Word(w) if w == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<Pos, DslError> {
        if self.at_keyword(kw) {
            Ok(self.bump().pos)
        } else {
            self.error(&[&format!("`{kw}`")])
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Token, DslError> {
        if self.peek().kind == kind {
            Ok(self.bump())
        } else {
            self.error(&[&kind.describe()])
        }
    }

    fn end_of_line(&mut self) -> Result<(), DslError> {
        match self.peek().kind {
            TokenKind::Newline => {
                self.bump();
                Ok(())
            }
            TokenKind::Eof => Ok(()),
            _ => self.error(&["end of line"]),
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), DslError> {
        match &self.peek().kind {
            TokenKind::Word(w)
                if !is_keyword(w) && !w.starts_with(|c: char| c.is_ascii_digit()) =>
            {
                let w = w.clone();
                let pos = self.bump().pos;
                Ok((w, pos))
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn url(&mut self) -> Result<String, DslError> {
        match &self.peek().kind {
            TokenKind::Url(u) => {
                let u = u.clone();
                self.bump();
                Ok(u)
            }
            _ => self.error(&["url"]),
        }
    }

    /// Dotted uid such as `618e...fd8.1`; tokens must be contiguous.
    fn uid(&mut self) -> Result<String, DslError> {
        let mut out = String::new();
        let mut last_end: Option<u32> = None;
        loop {
            let tok = self.peek().clone();
            if let Some(end) = last_end {
                if tok.pos.col != end {
                    break;
                }
            }
            match (&tok.kind, out.is_empty() || out.ends_with('.')) {
                (TokenKind::Word(w), true) => out.push_str(w),
                (TokenKind::Dot, false) => out.push('.'),
                _ => break,
            }
            last_end = Some(tok.end_col);
            self.bump();
        }
        if out.is_empty() || out.ends_with('.') {
            return self.error(&["uid"]);
        }
        Ok(out)
    }

    fn workflow(&mut self, origin: &str) -> Result<WorkflowAst, DslError> {
        self.skip_blank_lines();
        self.keyword("workflow")?;
        let (name, _) = self.ident()?;
        self.end_of_line()?;
        self.skip_blank_lines();

        let mut ast = WorkflowAst {
            name,
            uid: None,
            origin: origin.to_string(),
            engines: vec![],
            descriptions: vec![],
            services: vec![],
            ports: vec![],
            inputs: vec![],
            outputs: vec![],
            flows: vec![],
            forwards: vec![],
        };

        if self.at_keyword("uid") {
            self.bump();
            ast.uid = Some(self.uid()?);
            self.end_of_line()?;
        }

        loop {
            self.skip_blank_lines();
            let kw = match &self.peek().kind {
                TokenKind::Word(w) => w.clone(),
                _ => break,
            };
            match kw.as_str() {
                "engine" | "description" => {
                    let pos = self.bump().pos;
                    let (id, _) = self.ident()?;
                    self.keyword("is")?;
                    let url = self.url()?;
                    self.end_of_line()?;
                    let decl = UrlDecl { id, url, pos };
                    if kw == "engine" {
                        ast.engines.push(decl);
                    } else {
                        ast.descriptions.push(decl);
                    }
                }
                "service" => {
                    let pos = self.bump().pos;
                    let (id, _) = self.ident()?;
                    self.keyword("is")?;
                    let (description, _) = self.ident()?;
                    self.expect(TokenKind::Dot)?;
                    let (service_name, _) = self.ident()?;
                    self.end_of_line()?;
                    ast.services.push(ServiceDecl {
                        id,
                        description,
                        service_name,
                        pos,
                    });
                }
                "port" => {
                    let pos = self.bump().pos;
                    let (id, _) = self.ident()?;
                    self.keyword("is")?;
                    let (service, _) = self.ident()?;
                    self.expect(TokenKind::Dot)?;
                    let (port_name, _) = self.ident()?;
                    self.end_of_line()?;
                    ast.ports.push(PortDecl {
                        id,
                        service,
                        port_name,
                        pos,
                    });
                }
                _ => break,
            }
        }

        self.skip_blank_lines();
        if !self.at_keyword("input") {
            return self.error(&[
                "`engine`",
                "`description`",
                "`service`",
                "`port`",
                "`input`",
            ]);
        }
        self.bump();
        self.expect(TokenKind::Colon)?;
        self.end_of_line()?;
        ast.inputs = self.typed_block()?;

        self.skip_blank_lines();
        if !self.at_keyword("output") {
            return self.error(&["type", "`output`"]);
        }
        self.bump();
        self.expect(TokenKind::Colon)?;
        self.end_of_line()?;
        ast.outputs = self.typed_block()?;

        loop {
            self.skip_blank_lines();
            if self.peek().kind == TokenKind::Eof {
                break;
            }
            if self.at_keyword("forward") {
                let pos = self.bump().pos;
                let (variable, _) = self.ident()?;
                self.keyword("to")?;
                let (engine, _) = self.ident()?;
                self.end_of_line()?;
                ast.forwards.push(ForwardStmt {
                    variable,
                    engine,
                    pos,
                });
            } else {
                let flow = self.flow()?;
                ast.flows.push(flow);
            }
        }
        Ok(ast)
    }

    fn typed_block(&mut self) -> Result<Vec<VarDecl>, DslError> {
        let mut out = Vec::new();
        loop {
            self.skip_blank_lines();
            let ty = match &self.peek().kind {
                TokenKind::Word(w) => match TypeTag::from_keyword(w) {
                    Some(t) => t,
                    None => break,
                },
                _ => break,
            };
            self.bump();
            loop {
                let (name, pos) = self.ident()?;
                out.push(VarDecl { name, ty, pos });
                if self.peek().kind == TokenKind::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            self.end_of_line()?;
        }
        Ok(out)
    }

    fn endpoint(&mut self, allow_param: bool) -> Result<FlowEndpoint, DslError> {
        let (first, pos) = match self.ident() {
            Ok(v) => v,
            Err(_) => return self.error(&["identifier", "`forward`"]),
        };
        if self.peek().kind != TokenKind::Dot {
            return Ok(FlowEndpoint::Variable { name: first, pos });
        }
        self.bump();
        let (operation, _) = self.ident()?;
        let mut param = None;
        if self.peek().kind == TokenKind::Dot {
            if !allow_param {
                return self.error(&["`->`"]);
            }
            self.bump();
            param = Some(self.ident()?.0);
        }
        Ok(FlowEndpoint::Invocation {
            port: first,
            operation,
            param,
            pos,
        })
    }

    fn flow(&mut self) -> Result<FlowStmt, DslError> {
        let source = self.endpoint(false)?;
        let pos = source.pos();
        self.expect(TokenKind::Arrow)?;
        let mut targets = vec![self.endpoint(true)?];
        while self.peek().kind == TokenKind::Comma {
            self.bump();
            targets.push(self.endpoint(true)?);
        }
        self.end_of_line()?;
        Ok(FlowStmt {
            source,
            targets,
            pos,
        })
    }
}

/// Declaration-order and binding checks that need no service descriptions.
fn check_references(ast: &WorkflowAst) -> Result<(), DslError> {
    let mut declared: HashSet<&str> = HashSet::new();
    let decls = ast
        .engines
        .iter()
        .map(|d| (d.id.as_str(), d.pos))
        .chain(ast.descriptions.iter().map(|d| (d.id.as_str(), d.pos)))
        .chain(ast.services.iter().map(|d| (d.id.as_str(), d.pos)))
        .chain(ast.ports.iter().map(|d| (d.id.as_str(), d.pos)))
        .chain(ast.inputs.iter().map(|d| (d.name.as_str(), d.pos)))
        .chain(ast.outputs.iter().map(|d| (d.name.as_str(), d.pos)));
    for (id, pos) in decls {
        if !declared.insert(id) {
            return Err(DslError::resolve(pos, format!("duplicate declaration of {id}")));
        }
    }

    for s in &ast.services {
        match ast.description(&s.description) {
            Some(d) if d.pos < s.pos => {}
            _ => {
                return Err(DslError::resolve(
                    s.pos,
                    format!("undeclared description {}", s.description),
                ))
            }
        }
    }
    for p in &ast.ports {
        match ast.service(&p.service) {
            Some(s) if s.pos < p.pos => {}
            _ => {
                return Err(DslError::resolve(
                    p.pos,
                    format!("undeclared service {}", p.service),
                ))
            }
        }
    }

    let mut bound: HashSet<&str> = ast.inputs.iter().map(|i| i.name.as_str()).collect();
    for flow in &ast.flows {
        match &flow.source {
            FlowEndpoint::Variable { name, pos } => {
                if !bound.contains(name.as_str()) {
                    return Err(DslError::resolve(
                        *pos,
                        format!("undeclared or unbound variable {name}"),
                    ));
                }
            }
            FlowEndpoint::Invocation { port, pos, .. } => check_port(ast, port, *pos)?,
        }
        for target in &flow.targets {
            match target {
                FlowEndpoint::Variable { name, pos } => {
                    if ast.input(name).is_some() {
                        return Err(DslError::resolve(
                            *pos,
                            format!("cannot assign to workflow input {name}"),
                        ));
                    }
                    if declared.contains(name.as_str()) && ast.output(name).is_none() {
                        return Err(DslError::resolve(
                            *pos,
                            format!("{name} is not a variable"),
                        ));
                    }
                    if !bound.insert(name.as_str()) {
                        return Err(DslError::DuplicateBinding {
                            pos: *pos,
                            name: name.clone(),
                        });
                    }
                }
                FlowEndpoint::Invocation { port, pos, .. } => check_port(ast, port, *pos)?,
            }
        }
    }

    for fwd in &ast.forwards {
        if !bound.contains(fwd.variable.as_str()) {
            return Err(DslError::resolve(
                fwd.pos,
                format!("forward of unbound variable {}", fwd.variable),
            ));
        }
        if ast.engine(&fwd.engine).is_none() {
            return Err(DslError::resolve(
                fwd.pos,
                format!("undeclared engine {}", fwd.engine),
            ));
        }
    }
    Ok(())
}

fn check_port(ast: &WorkflowAst, port: &str, pos: Pos) -> Result<(), DslError> {
    if ast.port(port).is_none() {
        return Err(DslError::resolve(pos, format!("undeclared port {port}")));
    }
    Ok(())
}
