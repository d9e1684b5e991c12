use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieMetadata {
    pub title: String,
    pub synopsis: String,
    /// Raw quote blocks exactly as archived, one per entry.
    pub quote_blocks: Vec<String>,
    /// Order matters: voice selection breaks ties by genre position.
    pub genres: Vec<String>,
    pub directors: Vec<String>,
    pub release_date: Option<NaiveDate>,
    pub color_info: Option<String>,
}

/// On-disk shape of the metadata document.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetadataDoc {
    title: Option<String>,
    synopsis: Option<String>,
    #[serde(default)]
    quotes: Vec<String>,
    #[serde(default)]
    genres: Vec<String>,
    #[serde(default)]
    directors: Vec<String>,
    release_date: Option<NaiveDate>,
    color_info: Option<String>,
}

#[derive(Serialize)]
struct MetadataDocOut<'a> {
    title: &'a str,
    synopsis: &'a str,
    quotes: &'a [String],
    genres: &'a [String],
    directors: &'a [String],
    release_date: Option<NaiveDate>,
    color_info: Option<&'a str>,
}

pub fn parse_metadata(text: &str) -> Result<MovieMetadata> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: MetadataDoc = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Metadata(format!("unreadable document at {}: {}", e.path(), e.inner())))?;
    let title = doc
        .title
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| Error::Metadata("missing title".into()))?;
    let synopsis = doc
        .synopsis
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| Error::Metadata("missing synopsis".into()))?;
    Ok(MovieMetadata {
        title,
        synopsis,
        quote_blocks: doc.quotes,
        genres: doc.genres,
        directors: doc.directors,
        release_date: doc.release_date,
        color_info: doc.color_info,
    })
}

pub fn ingest_metadata(path: &Path) -> Result<MovieMetadata> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metadata(&text)
}

pub fn metadata_to_json(meta: &MovieMetadata) -> Result<String> {
    Ok(serde_json::to_string_pretty(&MetadataDocOut {
        title: &meta.title,
        synopsis: &meta.synopsis,
        quotes: &meta.quote_blocks,
        genres: &meta.genres,
        directors: &meta.directors,
        release_date: meta.release_date,
        color_info: meta.color_info.as_deref(),
    })?)
}

/// Stand-in for a catalog client: resolves `<archive>/<id>.json` locally.
#[derive(Debug, Clone)]
pub struct MetadataFetcher {
    archive: PathBuf,
}

impl MetadataFetcher {
    pub fn new(archive: impl Into<PathBuf>) -> Self {
        Self {
            archive: archive.into(),
        }
    }

    pub fn fetch(&self, external_id: &str) -> Result<MovieMetadata> {
        if external_id.is_empty() || external_id.contains(['/', '\\']) {
            return Err(Error::Metadata(format!("bad catalog id {external_id:?}")));
        }
        ingest_metadata(&self.archive.join(format!("{external_id}.json")))
    }
}
