//! API usage extraction from source files and mapping to domain labels.

mod imports;
mod labels;
mod taxonomy;

pub use imports::{extract_imports, ApiImport, Language};
pub use labels::{labels_for_dataset, LabeledIssue, LabelingSummary};
pub use taxonomy::{map_to_domains, ApiTaxonomy, DomainLabelSet};

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unsupported language {0:?}")]
    UnsupportedLanguage(String),
    #[error("taxonomy line {line}: duplicate prefix {prefix:?}")]
    DuplicatePrefix { line: u64, prefix: String },
    #[error("taxonomy line {line}: empty label")]
    EmptyLabel { line: u64 },
    #[error("taxonomy line {line}: empty prefix")]
    EmptyPrefix { line: u64 },
    #[error("taxonomy header must be `prefix,label`, found `{0}`")]
    BadHeader(String),
    #[error("taxonomy CSV error: {0}")]
    Csv(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("linked source file {path:?} has no content in the snapshot")]
    MissingFileContent { path: String },
}
