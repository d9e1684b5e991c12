//! Project configuration, metadata ingestion, and synopsis redaction.

mod config;
mod metadata;
mod redact;

pub use config::{load_config, parse_config, save_config, ProjectConfig};
pub use metadata::{ingest_metadata, metadata_to_json, parse_metadata, MetadataFetcher, MovieMetadata};
pub use redact::{redact_text, RedactionLexicon};
