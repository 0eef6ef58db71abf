//! Issue text to TF-IDF features: cleaning, Porter stemming and vectorizing.

mod clean;
pub mod porter;
mod tfidf;

pub use clean::{default_stopwords, preprocess, preprocess_with_stats, CleaningConfig, Preprocessed};
pub use tfidf::{smoothed_idf, FeatureVector, TfidfModel, TFIDF_SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("no documents to fit")]
    NoDocuments,
    #[error("no term reaches min_df = {min_df}")]
    EmptyVocabulary { min_df: usize },
    #[error("tf-idf model schema violation: {0}")]
    Schema(String),
    #[error("tf-idf model schema version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
}
