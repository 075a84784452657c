//! Service-description documents and the resolvers that fetch them.
//!
//! A description is a small JSON document naming one service, its ports and
//! the typed signature of every operation:
//!
//! ```json
//! { "service": "Service6",
//!   "ports": [ { "name": "Port6",
//!                "operations": [ { "name": "Op6",
//!                                  "params": [ {"name": "par1", "type": "int"},
//!                                              {"name": "par2", "type": "int"} ],
//!                                  "returns": "int" } ] } ] }
//! ```

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ast::{TypeTag, WorkflowAst};
use super::error::DslError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: TypeTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationSig {
    pub name: String,
    pub params: Vec<Param>,
    pub returns: TypeTag,
}

impl OperationSig {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortDesc {
    pub name: String,
    pub operations: Vec<OperationSig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceDescriptionDoc {
    /// Where the document was fetched from. Not part of the JSON body.
    #[serde(skip)]
    pub url: String,
    pub service: String,
    pub ports: Vec<PortDesc>,
}

impl ServiceDescriptionDoc {
    pub fn from_json(url: &str, text: &str) -> Result<Self, DslError> {
        let mut doc: ServiceDescriptionDoc =
            serde_json::from_str(text).map_err(|e| DslError::Format {
                url: url.to_string(),
                reason: e.to_string(),
            })?;
        doc.url = url.to_string();
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("description serializes")
    }

    fn validate(&self) -> Result<(), DslError> {
        let fail = |reason: String| DslError::Format {
            url: self.url.clone(),
            reason,
        };
        for port in &self.ports {
            let mut ops = HashSet::new();
            for op in &port.operations {
                if !ops.insert(op.name.as_str()) {
                    return Err(fail(format!(
                        "operation {} declared twice in port {}",
                        op.name, port.name
                    )));
                }
                let mut params = HashSet::new();
                for p in &op.params {
                    if !params.insert(p.name.as_str()) {
                        return Err(fail(format!(
                            "parameter {} declared twice in {}",
                            p.name, op.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn port(&self, name: &str) -> Option<&PortDesc> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn operation(&self, port: &str, op: &str) -> Option<&OperationSig> {
        self.port(port)?.operations.iter().find(|o| o.name == op)
    }
}

/// Maps description URLs to documents.
pub trait DescriptionResolver {
    fn resolve(&self, url: &str) -> Result<ServiceDescriptionDoc, DslError>;
}

/// Fixed set of documents keyed by URL.
#[derive(Debug, Clone, Default)]
pub struct InMemoryRegistry {
    docs: BTreeMap<String, ServiceDescriptionDoc>,
}

impl InMemoryRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, url: impl Into<String>, mut doc: ServiceDescriptionDoc) {
        let url = url.into();
        doc.url = url.clone();
        self.docs.insert(url, doc);
    }

    pub fn insert_json(&mut self, url: &str, text: &str) -> Result<(), DslError> {
        let doc = ServiceDescriptionDoc::from_json(url, text)?;
        self.docs.insert(url.to_string(), doc);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

impl DescriptionResolver for InMemoryRegistry {
    fn resolve(&self, url: &str) -> Result<ServiceDescriptionDoc, DslError> {
        self.docs.get(url).cloned().ok_or_else(|| DslError::Fetch {
            url: url.to_string(),
            reason: "not in registry".into(),
        })
    }
}

/// Resolves `file://` URLs directly and maps `http(s)://` URLs onto a local
/// directory by their last path segment. `.../service1.wsdl` is looked up as
/// `<root>/service1.wsdl`, then `<root>/service1.json`.
#[derive(Debug, Clone)]
pub struct DirectoryResolver {
    root: PathBuf,
}

impl DirectoryResolver {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn candidates(&self, url: &str) -> Vec<PathBuf> {
        if let Some(path) = url.strip_prefix("file://") {
            return vec![PathBuf::from(path)];
        }
        if !(url.starts_with("http://") || url.starts_with("https://")) {
            return vec![];
        }
        let segment = url
            .trim_end_matches('/')
            .rsplit('/')
            .next()
            .unwrap_or_default();
        if segment.is_empty() {
            return vec![];
        }
        let direct = self.root.join(segment);
        let json = self.root.join(Path::new(segment).with_extension("json"));
        if direct == json {
            vec![direct]
        } else {
            vec![direct, json]
        }
    }
}

impl DescriptionResolver for DirectoryResolver {
    fn resolve(&self, url: &str) -> Result<ServiceDescriptionDoc, DslError> {
        for path in self.candidates(url) {
            if let Ok(text) = std::fs::read_to_string(&path) {
                return ServiceDescriptionDoc::from_json(url, &text);
            }
        }
        Err(DslError::Fetch {
            url: url.to_string(),
            reason: format!("no document found under {}", self.root.display()),
        })
    }
}

impl<R: DescriptionResolver + ?Sized> DescriptionResolver for &R {
    fn resolve(&self, url: &str) -> Result<ServiceDescriptionDoc, DslError> {
        (**self).resolve(url)
    }
}

impl<R: DescriptionResolver + ?Sized> DescriptionResolver for std::sync::Arc<R> {
    fn resolve(&self, url: &str) -> Result<ServiceDescriptionDoc, DslError> {
        (**self).resolve(url)
    }
}

/// Fetches one document per `description` declaration, in declaration order.
pub fn resolve_descriptions(
    ast: &WorkflowAst,
    resolver: &dyn DescriptionResolver,
) -> Result<Vec<ServiceDescriptionDoc>, DslError> {
    ast.descriptions
        .iter()
        .map(|d| resolver.resolve(&d.url))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, SourceUnit};

    const DOC: &str = r#"{"service":"S","ports":[{"name":"P","operations":[
        {"name":"Op","params":[{"name":"a","type":"int"},{"name":"b","type":"any"}],"returns":"string"}]}]}"#;

    #[test]
    fn parses_document() {
        let doc = ServiceDescriptionDoc::from_json("mem://s", DOC).unwrap();
        let op = doc.operation("P", "Op").unwrap();
        assert_eq!(op.arity(), 2);
        assert_eq!(op.params[1].ty, TypeTag::Any);
        assert_eq!(op.returns, TypeTag::String);
        assert_eq!(op.param_index("b"), Some(1));
    }

    #[test]
    fn duplicate_operation_is_format_error() {
        let text = r#"{"service":"S","ports":[{"name":"P","operations":[
            {"name":"Op","params":[],"returns":"int"},{"name":"Op","params":[],"returns":"int"}]}]}"#;
        assert!(matches!(
            ServiceDescriptionDoc::from_json("u", text),
            Err(DslError::Format { .. })
        ));
    }

    #[test]
    fn duplicate_parameter_is_format_error() {
        let text = r#"{"service":"S","ports":[{"name":"P","operations":[
            {"name":"Op","params":[{"name":"a","type":"int"},{"name":"a","type":"int"}],"returns":"int"}]}]}"#;
        assert!(matches!(
            ServiceDescriptionDoc::from_json("u", text),
            Err(DslError::Format { .. })
        ));
    }

    #[test]
    fn bad_type_tag_is_format_error() {
        let text = r#"{"service":"S","ports":[{"name":"P","operations":[
            {"name":"Op","params":[],"returns":"float"}]}]}"#;
        assert!(matches!(
            ServiceDescriptionDoc::from_json("u", text),
            Err(DslError::Format { .. })
        ));
    }

    #[test]
    fn no_descriptions_gives_empty_list() {
        let ast = parse(&SourceUnit::new("t", "workflow w\ninput:\n int a\noutput:\n int x\na -> x\n")).unwrap();
        let docs = resolve_descriptions(&ast, &InMemoryRegistry::new()).unwrap();
        assert!(docs.is_empty());
    }

    #[test]
    fn unknown_url_names_it() {
        let ast = parse(&SourceUnit::new(
            "t",
            "workflow w\ndescription d is http://nowhere/x.json\ninput:\noutput:\n",
        ))
        .unwrap();
        let err = resolve_descriptions(&ast, &InMemoryRegistry::new()).unwrap_err();
        assert!(err.to_string().contains("http://nowhere/x.json"));
    }

    #[test]
    fn directory_resolver_maps_last_segment() {
        let dir = std::env::temp_dir().join(format!("orc-desc-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("svc.json"), DOC).unwrap();
        let r = DirectoryResolver::new(&dir);
        let doc = r.resolve("http://example.org/docs/svc.wsdl").unwrap();
        assert_eq!(doc.service, "S");
        assert_eq!(doc.url, "http://example.org/docs/svc.wsdl");
        let file_url = format!("file://{}", dir.join("svc.json").display());
        assert!(r.resolve(&file_url).is_ok());
        assert!(matches!(r.resolve("ftp://x/y"), Err(DslError::Fetch { .. })));
        std::fs::remove_dir_all(&dir).ok();
    }
}
