use std::fmt;

use thiserror::Error;

use super::ast::{Pos, TypeTag};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("{pos}: unexpected character {found:?}")]
    Lex { pos: Pos, found: char },

    #[error("{pos}: expected {}, found {found}", expected.join(" or "))]
    Parse {
        pos: Pos,
        expected: Vec<String>,
        found: String,
    },

    #[error("{pos}: {message}")]
    Resolve { pos: Pos, message: String },

    #[error("cannot fetch service description {url}: {reason}")]
    Fetch { url: String, reason: String },

    #[error("malformed service description {url}: {reason}")]
    Format { url: String, reason: String },

    #[error("{pos}: type mismatch for {context}: expected {expected}, found {found}")]
    Type {
        pos: Pos,
        context: String,
        expected: TypeTag,
        found: TypeTag,
    },

    #[error("{pos}: {message}")]
    Arity { pos: Pos, message: String },

    #[error("{pos}: output {name} is never assigned")]
    UnboundOutput { pos: Pos, name: String },

    #[error("{pos}: {name} is already bound")]
    DuplicateBinding { pos: Pos, name: String },

    #[error("cannot encode composite: {0}")]
    Encode(String),
}

impl DslError {
    /// Position of the offending token, when the error is tied to source text.
    pub fn pos(&self) -> Option<Pos> {
        match self {
            DslError::Lex { pos, .. }
            | DslError::Parse { pos, .. }
            | DslError::Resolve { pos, .. }
            | DslError::Type { pos, .. }
            | DslError::Arity { pos, .. }
            | DslError::UnboundOutput { pos, .. }
            | DslError::DuplicateBinding { pos, .. } => Some(*pos),
            DslError::Fetch { .. } | DslError::Format { .. } | DslError::Encode(_) => None,
        }
    }

    pub(crate) fn resolve(pos: Pos, message: impl Into<String>) -> Self {
        DslError::Resolve {
            pos,
            message: message.into(),
        }
    }
}

/// All diagnostics reported by a semantic pass.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct Diagnostics(pub Vec<DslError>);

impl Diagnostics {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DslError> {
        self.0.iter()
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl From<DslError> for Diagnostics {
    fn from(e: DslError) -> Self {
        Diagnostics(vec![e])
    }
}
