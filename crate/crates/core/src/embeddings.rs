//! Ingestion of precomputed embedding vectors.
//!
//! Format: comma-separated text with header `agent,label,e0,...,e{d-1}`,
//! one row per item. `agent` is an integer id, `label` is `truthful` or
//! `fabricated`, and the remaining columns are the embedding coordinates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Item;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot read embeddings {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("empty embedding file")]
    EmptyFile,
    #[error("header must start with `agent,label,e0,...`, got {header:?}")]
    BadHeader { header: String },
    #[error("line {line}: expected {expected} columns, got {actual}")]
    RaggedRow { line: usize, expected: usize, actual: usize },
    #[error("line {line}: bad agent id {value:?}")]
    BadAgentId { line: usize, value: String },
    #[error("line {line}: unknown label {value:?} (use truthful or fabricated)")]
    UnknownLabel { line: usize, value: String },
    #[error("line {line}: column {column} is not a number: {value:?}")]
    BadCoordinate { line: usize, column: usize, value: String },
    #[error("line {line}: coordinate {column} is not finite")]
    NonFinite { line: usize, column: usize },
    #[error("need truthful rows from at least two distinct agents, found {agents}")]
    TooFewTruthfulAgents { agents: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowLabel {
    Truthful,
    Fabricated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub agent: u64,
    pub label: RowLabel,
    pub vector: Vec<f64>,
}

/// A validated table of embedding items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub rows: Vec<EmbeddingRow>,
}

impl EmbeddingTable {
    /// Truthful items per agent, keyed by id in ascending order.
    pub fn truthful_by_agent(&self) -> BTreeMap<u64, Vec<Item>> {
        self.by_label(RowLabel::Truthful)
    }

    /// Fabricated items per agent.
    pub fn fabricated_by_agent(&self) -> BTreeMap<u64, Vec<Item>> {
        self.by_label(RowLabel::Fabricated)
    }

    fn by_label(&self, label: RowLabel) -> BTreeMap<u64, Vec<Item>> {
        let mut out: BTreeMap<u64, Vec<Item>> = BTreeMap::new();
        for row in &self.rows {
            if row.label == label {
                out.entry(row.agent).or_default().push(Item::Vector(row.vector.clone()));
            }
        }
        out
    }
}

/// Parse an embedding table from text; dimension is inferred from the
/// header.
pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable, EmbeddingError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(EmbeddingError::EmptyFile)?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 3 || columns[0] != "agent" || columns[1] != "label" {
        return Err(EmbeddingError::BadHeader { header: header.to_string() });
    }
    for (i, name) in columns[2..].iter().enumerate() {
        if *name != format!("e{i}") {
            return Err(EmbeddingError::BadHeader { header: header.to_string() });
        }
    }
    let dim = columns.len() - 2;

    let mut rows = Vec::new();
    for (index, raw) in lines {
        let line = index + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != dim + 2 {
            return Err(EmbeddingError::RaggedRow { line, expected: dim + 2, actual: fields.len() });
        }
        let agent = fields[0]
            .parse::<u64>()
            .map_err(|_| EmbeddingError::BadAgentId { line, value: fields[0].to_string() })?;
        let label = match fields[1] {
            "truthful" => RowLabel::Truthful,
            "fabricated" => RowLabel::Fabricated,
            other => {
                return Err(EmbeddingError::UnknownLabel { line, value: other.to_string() })
            }
        };
        let mut vector = Vec::with_capacity(dim);
        for (j, field) in fields[2..].iter().enumerate() {
            let value = field.parse::<f64>().map_err(|_| EmbeddingError::BadCoordinate {
                line,
                column: j,
                value: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(EmbeddingError::NonFinite { line, column: j });
            }
            vector.push(value);
        }
        rows.push(EmbeddingRow { agent, label, vector });
    }

    let mut truthful_agents: Vec<u64> =
        rows.iter().filter(|r| r.label == RowLabel::Truthful).map(|r| r.agent).collect();
    truthful_agents.sort_unstable();
    truthful_agents.dedup();
    if truthful_agents.len() < 2 {
        return Err(EmbeddingError::TooFewTruthfulAgents { agents: truthful_agents.len() });
    }

    Ok(EmbeddingTable { dim, rows })
}

/// Load an embedding table from a file.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable, EmbeddingError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| EmbeddingError::Io { path: path.to_path_buf(), source })?;
    parse_embeddings(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_table_parses() {
        let text = "agent,label,e0,e1\n0,truthful,0.5,1.5\n1,truthful,-1.0,2.0\n1,fabricated,0.0,0.0\n";
        let table = parse_embeddings(text).unwrap();
        assert_eq!(table.dim, 2);
        assert_eq!(table.rows.len(), 3);
        let truthful = table.truthful_by_agent();
        assert_eq!(truthful.len(), 2);
        assert_eq!(truthful[&0].len(), 1);
        let fabricated = table.fabricated_by_agent();
        assert_eq!(fabricated[&1].len(), 1);
    }

    #[test]
    fn ragged_rows_report_their_line() {
        let text = "agent,label,e0,e1\n0,truthful,0.5,1.5\n1,truthful,-1.0\n";
        let err = parse_embeddings(text).unwrap_err();
        assert!(
            matches!(err, EmbeddingError::RaggedRow { line: 3, expected: 4, actual: 3 }),
            "{err}"
        );
    }

    #[test]
    fn labels_and_numbers_are_validated() {
        let text = "agent,label,e0\n0,real,1.0\n";
        assert!(matches!(
            parse_embeddings(text).unwrap_err(),
            EmbeddingError::UnknownLabel { line: 2, .. }
        ));
        let text = "agent,label,e0\n0,truthful,abc\n1,truthful,1.0\n";
        assert!(matches!(
            parse_embeddings(text).unwrap_err(),
            EmbeddingError::BadCoordinate { line: 2, column: 0, .. }
        ));
        let text = "agent,label,e0\nx,truthful,1.0\n";
        assert!(matches!(
            parse_embeddings(text).unwrap_err(),
            EmbeddingError::BadAgentId { line: 2, .. }
        ));
        let text = "agent,label,e0\n0,truthful,inf\n1,truthful,0.0\n";
        assert!(matches!(
            parse_embeddings(text).unwrap_err(),
            EmbeddingError::NonFinite { line: 2, column: 0 }
        ));
    }

    #[test]
    fn header_is_validated() {
        assert!(matches!(
            parse_embeddings("id,label,e0\n").unwrap_err(),
            EmbeddingError::BadHeader { .. }
        ));
        assert!(matches!(
            parse_embeddings("agent,label,e0,e2\n").unwrap_err(),
            EmbeddingError::BadHeader { .. }
        ));
        assert!(matches!(parse_embeddings("").unwrap_err(), EmbeddingError::EmptyFile));
    }

    #[test]
    fn fabricated_only_agents_are_accepted() {
        // Agent 2 has no truthful rows; usage is the harness's decision.
        let text = "agent,label,e0\n0,truthful,1.0\n1,truthful,2.0\n2,fabricated,3.0\n";
        let table = parse_embeddings(text).unwrap();
        assert_eq!(table.truthful_by_agent().len(), 2);
        assert_eq!(table.fabricated_by_agent()[&2].len(), 1);

        let text = "agent,label,e0\n0,truthful,1.0\n0,fabricated,3.0\n";
        assert!(matches!(
            parse_embeddings(text).unwrap_err(),
            EmbeddingError::TooFewTruthfulAgents { agents: 1 }
        ));
    }
}
