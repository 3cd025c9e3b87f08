//! Task files and reports: the JSON task format, a STRIPS-subset PDDL
//! importer, and deterministic JSON reports.

mod pddl;
mod task;

use thiserror::Error;

use crate::harness::ScoreBoard;
use crate::model::ModelError;

pub use pddl::import_pddl;
pub use task::{
    document_to_json, document_to_problem, parse_document, parse_task, problem_to_document, serialize_task,
    ActionDocument, TaskDocument,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("input is not UTF-8: {0}")]
    Utf8(String),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("undeclared fact `{fact}` in {context}")]
    UndeclaredFact { fact: String, context: String },
    #[error("undeclared agent `{agent}` in action `{action}`")]
    UndeclaredAgent { agent: String, action: String },
    #[error("duplicate fact `{0}`")]
    DuplicateFact(String),
    #[error("duplicate agent name")]
    DuplicateAgent,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("PDDL syntax error at line {line}: {message}")]
    Pddl { line: usize, message: String },
    #[error("unsupported PDDL construct `{construct}` at line {line}")]
    Unsupported { construct: String, line: usize },
}

/// Pretty JSON with sorted keys; equal boards give equal bytes.
pub fn write_report(board: &ScoreBoard) -> Vec<u8> {
    let value = serde_json::to_value(board).expect("score boards serialize");
    let mut out = serde_json::to_vec_pretty(&value).expect("json values serialize");
    out.push(b'\n');
    out
}

pub fn read_report(bytes: &[u8]) -> Result<ScoreBoard, IoError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de)
        .map_err(|e| IoError::Schema { path: e.path().to_string(), message: e.inner().to_string() })
}
