//! The JSON input document shared by every command.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use greechie_mle::{DiagramError, FrequencyTable, GreechieDiagram, ProbabilityAssignment};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InputDocument {
    pub outcomes: Vec<String>,
    pub operations: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<BTreeMap<String, u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_probs: Option<BTreeMap<String, f64>>,
    /// One weight per operation, in declaration order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<f64>>,
}

/// Problems that map to exit code 2.
#[derive(Debug)]
pub enum InputError {
    Io(String, std::io::Error),
    Json(serde_json::Error),
    Diagram(DiagramError),
    Missing(&'static str),
    UnknownName { field: &'static str, name: String },
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputError::Io(path, e) => write!(f, "cannot read {path}: {e}"),
            InputError::Json(e) => write!(f, "invalid input at line {}, column {}: {e}", e.line(), e.column()),
            InputError::Diagram(e) => write!(f, "invalid diagram: {e}"),
            InputError::Missing(field) => write!(f, "input has no `{field}` field"),
            InputError::UnknownName { field, name } => write!(f, "`{field}` names unknown outcome `{name}`"),
        }
    }
}

/// A parsed document with its diagram and the SHA-256 of the raw bytes.
pub struct Loaded {
    pub doc: InputDocument,
    pub diagram: GreechieDiagram,
    pub digest: String,
}

pub fn load(path: &Path) -> Result<Loaded, InputError> {
    let bytes = std::fs::read(path).map_err(|e| InputError::Io(path.display().to_string(), e))?;
    parse(&bytes)
}

pub fn parse(bytes: &[u8]) -> Result<Loaded, InputError> {
    let doc: InputDocument = serde_json::from_slice(bytes).map_err(InputError::Json)?;
    let diagram = GreechieDiagram::build(&doc.outcomes, &doc.operations).map_err(InputError::Diagram)?;
    let digest = Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect();
    Ok(Loaded { doc, diagram, digest })
}

impl Loaded {
    pub fn counts(&self) -> Result<FrequencyTable, InputError> {
        let named = self.doc.counts.as_ref().ok_or(InputError::Missing("counts"))?;
        FrequencyTable::from_named(&self.diagram, named).map_err(|e| match e {
            DiagramError::UnknownCount(name) => InputError::UnknownName { field: "counts", name },
            other => InputError::Diagram(other),
        })
    }

    /// True probabilities; outcomes not listed get 0.
    pub fn true_probs(&self) -> Result<ProbabilityAssignment, InputError> {
        let named = self.doc.true_probs.as_ref().ok_or(InputError::Missing("true_probs"))?;
        let mut p = vec![0.0; self.diagram.outcome_count()];
        for (name, &v) in named {
            let x = self.diagram.index_of(name).ok_or_else(|| InputError::UnknownName {
                field: "true_probs",
                name: name.clone(),
            })?;
            p[x] = v;
        }
        Ok(ProbabilityAssignment::new(p))
    }
}
