use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// User-facing knobs for one trailer project.
///
/// Only `movie_path` and `project_name` are required in the JSON document;
/// everything else falls back to the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub movie_path: PathBuf,
    pub project_name: String,
    /// Catalog reference used by the metadata fetch stub.
    pub external_movie_id: String,
    /// Metadata document; relative paths resolve against the config file.
    pub metadata_path: PathBuf,
    pub n_sc_target: usize,
    pub n_qc_target: usize,
    pub clip_len_min_s: f64,
    pub clip_len_max_s: f64,
    pub head_trim_frac: f64,
    pub tail_trim_frac: f64,
    /// Absolute level the voice-over lines are brought to.
    pub gain_voice_dbfs: f64,
    pub gain_sc_audio_db: f64,
    pub gain_music_db: f64,
    pub duck_db: f64,
    pub seed: u64,
    /// Overrides `TRAILFORGE_MEDIA_ENGINE` and the `ffmpeg` on `PATH`.
    pub media_engine: Option<PathBuf>,
    /// Cap on simultaneous engine subprocesses; defaults to the CPU count.
    pub parallelism: Option<usize>,
    /// Extra redaction terms, one per line.
    pub lexicon_path: Option<PathBuf>,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            movie_path: PathBuf::new(),
            project_name: String::new(),
            external_movie_id: String::new(),
            metadata_path: PathBuf::from("metadata.json"),
            n_sc_target: 8,
            n_qc_target: 3,
            clip_len_min_s: 3.0,
            clip_len_max_s: 8.0,
            head_trim_frac: 0.04,
            tail_trim_frac: 0.10,
            gain_voice_dbfs: -16.0,
            gain_sc_audio_db: -8.0,
            gain_music_db: -6.0,
            duck_db: -12.0,
            seed: 0,
            media_engine: None,
            parallelism: None,
            lexicon_path: None,
        }
    }
}

impl ProjectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.movie_path.as_os_str().is_empty() {
            return Err(Error::config("movie_path", "movie_path is required"));
        }
        if self.project_name.trim().is_empty() {
            return Err(Error::config("project_name", "project_name is required"));
        }
        for (field, v) in [
            ("clip_len_min_s", self.clip_len_min_s),
            ("clip_len_max_s", self.clip_len_max_s),
            ("head_trim_frac", self.head_trim_frac),
            ("tail_trim_frac", self.tail_trim_frac),
            ("gain_voice_dbfs", self.gain_voice_dbfs),
            ("gain_sc_audio_db", self.gain_sc_audio_db),
            ("gain_music_db", self.gain_music_db),
            ("duck_db", self.duck_db),
        ] {
            if !v.is_finite() {
                return Err(Error::config(field, format!("{field} must be finite")));
            }
        }
        if self.clip_len_min_s <= 0.0 {
            return Err(Error::config("clip_len_min_s", "clip_len_min_s must be > 0"));
        }
        if self.clip_len_min_s >= self.clip_len_max_s {
            return Err(Error::config(
                "clip_len_min_s",
                "clip_len_min_s must be < clip_len_max_s",
            ));
        }
        // checked before the per-field range so that wildly large trims get
        // the more useful message
        if self.head_trim_frac + self.tail_trim_frac >= 1.0 {
            return Err(Error::config("head_trim_frac", "trim fractions exceed timeline"));
        }
        for (field, v) in [
            ("head_trim_frac", self.head_trim_frac),
            ("tail_trim_frac", self.tail_trim_frac),
        ] {
            if !(0.0..=0.3).contains(&v) {
                return Err(Error::config(field, format!("{field} must lie in [0, 0.3]")));
            }
        }
        if self.duck_db > 0.0 {
            return Err(Error::config("duck_db", "duck_db must be <= 0"));
        }
        if self.parallelism == Some(0) {
            return Err(Error::config("parallelism", "parallelism must be >= 1"));
        }
        Ok(())
    }

    /// Resolves `p` against `base` (the config file's directory) unless absolute.
    pub fn resolve(&self, base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}

pub fn load_config(path: &Path) -> Result<ProjectConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ProjectConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ProjectConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::config(field.clone(), format!("config parse error at {field}: {}", e.inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_config(cfg: &ProjectConfig, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(cfg)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
