//! Typed request and response documents for every task, with the checks a
//! response must pass before pipeline code sees it.

use std::collections::HashSet;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{AdapterKind, Capabilities};
use crate::mediaio::Interval;

/// A response that parsed but broke a task rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaViolation {
    pub field: String,
    pub message: String,
}

fn violation<T>(field: impl Into<String>, message: impl Into<String>) -> Result<T, SchemaViolation> {
    Err(SchemaViolation {
        field: field.into(),
        message: message.into(),
    })
}

pub trait Task: Serialize + DeserializeOwned {
    const NAME: &'static str;
    const KIND: AdapterKind;
    type Response: Serialize + DeserializeOwned;

    fn check(&self, _response: &Self::Response, _caps: &Capabilities) -> Result<(), SchemaViolation> {
        Ok(())
    }
}

fn non_empty_strings(field: &str, items: &[String]) -> Result<(), SchemaViolation> {
    for (i, s) in items.iter().enumerate() {
        if s.trim().is_empty() {
            return violation(format!("{field}[{i}]"), "empty string");
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSynopsis {
    pub synopsis: String,
    pub n_target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subplots {
    pub subplots: Vec<String>,
}

impl Task for SplitSynopsis {
    const NAME: &'static str = "llm/split_synopsis";
    const KIND: AdapterKind = AdapterKind::Llm;
    type Response = Subplots;

    fn check(&self, r: &Subplots, _: &Capabilities) -> Result<(), SchemaViolation> {
        if r.subplots.is_empty() || r.subplots.len() > self.n_target {
            return violation("subplots", format!("expected 1..={} items, got {}", self.n_target, r.subplots.len()));
        }
        non_empty_strings("subplots", &r.subplots)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectQuotes {
    pub synopsis: String,
    pub candidates: Vec<String>,
    pub n_target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedQuotes {
    pub quotes: Vec<String>,
}

impl Task for SelectQuotes {
    const NAME: &'static str = "llm/select_quotes";
    const KIND: AdapterKind = AdapterKind::Llm;
    type Response = SelectedQuotes;

    fn check(&self, r: &SelectedQuotes, _: &Capabilities) -> Result<(), SchemaViolation> {
        if r.quotes.len() > self.n_target {
            return violation("quotes", format!("more than {} quotes", self.n_target));
        }
        let allowed: HashSet<&str> = self.candidates.iter().map(String::as_str).collect();
        let mut seen = HashSet::new();
        for (i, q) in r.quotes.iter().enumerate() {
            if !allowed.contains(q.as_str()) {
                return violation(format!("quotes[{i}]"), "not one of the candidates");
            }
            if !seen.insert(q) {
                return violation(format!("quotes[{i}]"), "duplicate");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractKeywords {
    pub subplot: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keywords {
    pub keywords: Vec<String>,
}

impl Task for ExtractKeywords {
    const NAME: &'static str = "llm/keywords";
    const KIND: AdapterKind = AdapterKind::Llm;
    type Response = Keywords;

    fn check(&self, r: &Keywords, _: &Capabilities) -> Result<(), SchemaViolation> {
        non_empty_strings("keywords", &r.keywords)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WriteVoiceover {
    pub title: String,
    pub synopsis: String,
    pub subplots: Vec<String>,
    pub n_lines: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceLines {
    pub lines: Vec<String>,
}

impl Task for WriteVoiceover {
    const NAME: &'static str = "llm/voiceover";
    const KIND: AdapterKind = AdapterKind::Llm;
    type Response = VoiceLines;

    fn check(&self, r: &VoiceLines, _: &Capabilities) -> Result<(), SchemaViolation> {
        if r.lines.is_empty() || r.lines.len() > self.n_lines {
            return violation("lines", format!("expected 1..={} lines, got {}", self.n_lines, r.lines.len()));
        }
        non_empty_strings("lines", &r.lines)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WriteMusicBrief {
    pub title: String,
    pub genres: Vec<String>,
    pub synopsis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MusicBrief {
    pub brief: String,
}

impl Task for WriteMusicBrief {
    const NAME: &'static str = "llm/music_brief";
    const KIND: AdapterKind = AdapterKind::Llm;
    type Response = MusicBrief;

    fn check(&self, r: &MusicBrief, _: &Capabilities) -> Result<(), SchemaViolation> {
        if r.brief.trim().is_empty() {
            return violation("brief", "empty string");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embeddings {
    pub vectors: Vec<Vec<f32>>,
}

fn check_vectors(r: &Embeddings, expected: usize, caps: &Capabilities) -> Result<(), SchemaViolation> {
    if r.vectors.len() != expected {
        return violation("vectors", format!("expected {expected} vectors, got {}", r.vectors.len()));
    }
    let dim = caps.embedding_dim.unwrap_or(0);
    for (i, v) in r.vectors.iter().enumerate() {
        if v.len() != dim {
            return violation(format!("vectors[{i}]"), format!("dimension {} but endpoint declared {dim}", v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return violation(format!("vectors[{i}]"), "non-finite component");
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedTexts {
    pub texts: Vec<String>,
}

impl Task for EmbedTexts {
    const NAME: &'static str = "text-embed";
    const KIND: AdapterKind = AdapterKind::TextEmbed;
    type Response = Embeddings;

    fn check(&self, r: &Embeddings, caps: &Capabilities) -> Result<(), SchemaViolation> {
        check_vectors(r, self.texts.len(), caps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedImages {
    pub images: Vec<PathBuf>,
}

impl Task for EmbedImages {
    const NAME: &'static str = "image-embed";
    const KIND: AdapterKind = AdapterKind::ImageEmbed;
    type Response = Embeddings;

    fn check(&self, r: &Embeddings, caps: &Capabilities) -> Result<(), SchemaViolation> {
        check_vectors(r, self.images.len(), caps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedText {
    #[serde(flatten)]
    pub interval: Interval,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transcribe {
    pub audio: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcription {
    pub segments: Vec<TimedText>,
}

fn check_sorted(field: &str, spans: impl Iterator<Item = Interval>) -> Result<(), SchemaViolation> {
    let mut prev_end = f64::NEG_INFINITY;
    for (i, s) in spans.enumerate() {
        if s.start() < prev_end {
            return violation(format!("{field}[{i}]"), "overlaps or precedes the previous interval");
        }
        prev_end = s.end();
    }
    Ok(())
}

impl Task for Transcribe {
    const NAME: &'static str = "asr";
    const KIND: AdapterKind = AdapterKind::Asr;
    type Response = Transcription;

    fn check(&self, r: &Transcription, _: &Capabilities) -> Result<(), SchemaViolation> {
        check_sorted("segments", r.segments.iter().map(|s| s.interval))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectSpeech {
    pub audio: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechRegions {
    pub speech: Vec<Interval>,
}

impl Task for DetectSpeech {
    const NAME: &'static str = "vad";
    const KIND: AdapterKind = AdapterKind::Vad;
    type Response = SpeechRegions;

    fn check(&self, r: &SpeechRegions, _: &Capabilities) -> Result<(), SchemaViolation> {
        check_sorted("speech", r.speech.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioFile {
    pub audio: PathBuf,
    pub duration_s: f64,
}

fn check_audio(r: &AudioFile) -> Result<(), SchemaViolation> {
    if !(r.duration_s.is_finite() && r.duration_s > 0.0) {
        return violation("duration_s", "must be positive");
    }
    if !r.audio.is_file() {
        return violation("audio", format!("{} does not exist", r.audio.display()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Synthesize {
    pub text: String,
    pub voice: String,
    pub out: PathBuf,
}

impl Task for Synthesize {
    const NAME: &'static str = "tts";
    const KIND: AdapterKind = AdapterKind::Tts;
    type Response = AudioFile;

    fn check(&self, r: &AudioFile, _: &Capabilities) -> Result<(), SchemaViolation> {
        check_audio(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComposeMusic {
    pub brief: String,
    pub duration_s: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Task for ComposeMusic {
    const NAME: &'static str = "music";
    const KIND: AdapterKind = AdapterKind::Music;
    type Response = AudioFile;

    fn check(&self, r: &AudioFile, caps: &Capabilities) -> Result<(), SchemaViolation> {
        check_audio(r)?;
        let cap = caps.max_music_s.unwrap_or(f64::INFINITY).min(self.duration_s);
        if r.duration_s > cap + 0.05 {
            return violation("duration_s", format!("{} s exceeds {cap} s", r.duration_s));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparateVocals {
    pub audio: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocals {
    pub vocals: PathBuf,
}

impl Task for SeparateVocals {
    const NAME: &'static str = "vocal-separate";
    const KIND: AdapterKind = AdapterKind::VocalSeparate;
    type Response = Vocals;

    fn check(&self, r: &Vocals, _: &Capabilities) -> Result<(), SchemaViolation> {
        if !r.vocals.is_file() {
            return violation("vocals", format!("{} does not exist", r.vocals.display()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectText {
    pub image: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRegion {
    pub text: String,
    pub confidence: f64,
    /// Region area as a fraction of the frame.
    pub area_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRegions {
    pub regions: Vec<TextRegion>,
}

impl Task for DetectText {
    const NAME: &'static str = "ocr";
    const KIND: AdapterKind = AdapterKind::Ocr;
    type Response = TextRegions;

    fn check(&self, r: &TextRegions, _: &Capabilities) -> Result<(), SchemaViolation> {
        for (i, reg) in r.regions.iter().enumerate() {
            if !(0.0..=1.0).contains(&reg.confidence) {
                return violation(format!("regions[{i}].confidence"), "outside [0, 1]");
            }
            if !(0.0..=1.0).contains(&reg.area_frac) {
                return violation(format!("regions[{i}].area_frac"), "outside [0, 1]");
            }
        }
        Ok(())
    }
}

/// True for the free-text tasks that get one repair re-request.
pub fn is_llm_task(name: &str) -> bool {
    name.starts_with("llm/")
}
