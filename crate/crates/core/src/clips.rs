//! Quote Clips (dialogue moments found through the transcript) and Standard
//! Clips (shot-aligned windows around retrieved frames), rendered to files
//! with their provenance.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapters::{AdapterKind, Adapters, DetectSpeech, SelectQuotes, SeparateVocals, Transcribe};
use crate::mediaio::{blank_video_span, cut_clip, extract_audio_wav, Engine, Interval};
use crate::project::{redact_text, MovieMetadata, RedactionLexicon};
use crate::retrieval::SubplotAssignment;
use crate::shotdetect::{
    detect_shots, find_orphan_spans, rectify_with_boundaries, score_video, write_shots_sidecar, DetectorParams,
    Rectified, ScoreTrack, DEFAULT_ORPHAN_MAX_S,
};
use crate::textproc::{
    align_quote, filter_and_rank_quotes, parse_quote_block, refine_with_vad, AlignedQuote, LexiconSentiment,
    Quote, QuoteFilterParams, RuleCompleteness, TranscriptSegment, DEFAULT_MIN_RATIO, MAX_QUOTE_CLIP_S,
};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "clips_manifest.json";
pub const ALIGNED_QUOTES_FILE: &str = "aligned_quotes.json";
pub const DEFAULT_VAD_PAD_S: f64 = 0.15;

const EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteClip {
    pub index: usize,
    pub aligned: AlignedQuote,
    pub source_interval: Interval,
    /// Project-relative path of the rendered clip.
    pub file: PathBuf,
    /// Isolated dialogue track for the clip, project-relative.
    pub vocals: PathBuf,
    /// Clip-local spans painted black.
    pub orphan_spans_blanked: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardClip {
    pub index: usize,
    pub assignment: SubplotAssignment,
    pub source_interval: Interval,
    pub file: PathBuf,
    pub fallback: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClipsManifest {
    pub quote_clips: Vec<QuoteClip>,
    pub standard_clips: Vec<StandardClip>,
}

impl ClipsManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Writes the manifest with intervals rounded to microseconds and frame
    /// embeddings stripped, so equal plans serialize to equal bytes.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut m = self.clone();
        for q in &mut m.quote_clips {
            q.aligned.interval = q.aligned.interval.rounded();
            q.source_interval = q.source_interval.rounded();
            q.orphan_spans_blanked = q.orphan_spans_blanked.iter().map(Interval::rounded).collect();
        }
        for s in &mut m.standard_clips {
            s.source_interval = s.source_interval.rounded();
            s.assignment.frame.embedding = None;
        }
        write_json(path, &m)
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn relative_to(root: &Path, p: &Path) -> PathBuf {
    p.strip_prefix(root).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf())
}

/// Moves both ends to the nearest frame boundary, keeping the result inside
/// `[0, duration_s]` and no longer than `max_len_s`.
pub fn snap_to_frames(iv: Interval, fps: f64, duration_s: f64, max_len_s: f64) -> Result<Interval> {
    let max_frame = (duration_s * fps + EPS).floor();
    let a = (iv.start() * fps).round().clamp(0.0, max_frame);
    let mut b = (iv.end() * fps).round().clamp(0.0, max_frame);
    while (b - a) / fps > max_len_s + EPS {
        b -= 1.0;
    }
    if b <= a {
        return Err(Error::invalid(format!(
            "interval [{}, {}] collapses on the frame grid",
            iv.start(),
            iv.end()
        )));
    }
    Interval::new(a / fps, b / fps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuoteClipParams {
    pub n_target: usize,
    pub filter: QuoteFilterParams,
    pub min_ratio: f64,
    pub vad_pad_s: f64,
    pub orphan_max_s: f64,
}

impl Default for QuoteClipParams {
    fn default() -> Self {
        Self {
            n_target: 3,
            filter: QuoteFilterParams::default(),
            min_ratio: DEFAULT_MIN_RATIO,
            vad_pad_s: DEFAULT_VAD_PAD_S,
            orphan_max_s: DEFAULT_ORPHAN_MAX_S,
        }
    }
}

/// Align and refine one quote; `None` when it cannot be placed.
pub fn locate_quote(
    quote: &Quote,
    segments: &[TranscriptSegment],
    speech: &[Interval],
    params: &QuoteClipParams,
) -> Result<Option<(AlignedQuote, Interval)>> {
    let Some(aligned) = align_quote(quote, segments, params.min_ratio)? else {
        tracing::warn!(quote = %quote.text, "no transcript window matches");
        return Ok(None);
    };
    match refine_with_vad(aligned.interval, speech, params.vad_pad_s)? {
        Some(iv) => Ok(Some((aligned, iv))),
        None => {
            tracing::warn!(quote = %quote.text, "refined interval missing or longer than the cap");
            Ok(None)
        }
    }
}

/// Runs the whole quote cascade and renders `clips/qc_<n>.mp4`.
#[allow(clippy::too_many_arguments)]
pub fn build_quote_clips(
    engine: &Engine,
    adapters: &Adapters,
    root: &Path,
    movie: &Path,
    meta: &MovieMetadata,
    lexicon: &RedactionLexicon,
    params: &QuoteClipParams,
) -> Result<Vec<QuoteClip>> {
    let quotes: Vec<Quote> = meta.quote_blocks.iter().flat_map(|b| parse_quote_block(b)).collect();
    if quotes.is_empty() {
        tracing::warn!("metadata has no quotes; no quote clips");
        return Ok(Vec::new());
    }
    let ranked = filter_and_rank_quotes(&quotes, &RuleCompleteness, &LexiconSentiment, &params.filter);
    if ranked.is_empty() || params.n_target == 0 {
        tracing::warn!("no quote survived filtering; no quote clips");
        return Ok(Vec::new());
    }

    // the model only ever sees redacted text; its picks are mapped back
    let mut originals: HashMap<String, Quote> = HashMap::new();
    let mut candidates = Vec::new();
    for q in ranked {
        let r = redact_text(&q.text, lexicon);
        if !originals.contains_key(&r) {
            candidates.push(r.clone());
            originals.insert(r, q);
        }
    }
    let picked = adapters.get(AdapterKind::Llm)?.call(&SelectQuotes {
        synopsis: redact_text(&meta.synopsis, lexicon),
        candidates,
        n_target: params.n_target,
        repair: None,
    })?;

    let (info, duration) = engine.video_duration(movie)?;
    let stem = movie.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "movie".into());
    let audio = root.join("audio").join(format!("{stem}.wav"));
    if !audio.is_file() {
        extract_audio_wav(engine, movie, None, &audio)?;
    }
    let segments: Vec<TranscriptSegment> = adapters
        .get(AdapterKind::Asr)?
        .call(&Transcribe { audio: audio.clone() })?
        .segments
        .into_iter()
        .map(|s| TranscriptSegment {
            interval: s.interval,
            text: s.text,
        })
        .collect();
    let speech = adapters.get(AdapterKind::Vad)?.call(&DetectSpeech { audio })?.speech;

    let clips_dir = root.join("clips");
    std::fs::create_dir_all(&clips_dir).map_err(|e| Error::io(&clips_dir, e))?;
    let mut aligned_log = Vec::new();
    let mut clips: Vec<QuoteClip> = Vec::new();
    for text in &picked.quotes {
        let quote = &originals[text];
        let Some((aligned, refined)) = locate_quote(quote, &segments, &speech, params)? else {
            continue;
        };
        let source = snap_to_frames(refined, info.fps, duration, MAX_QUOTE_CLIP_S)?;
        aligned_log.push(aligned.clone());
        if clips.iter().any(|c| c.source_interval.overlaps(&source)) {
            tracing::warn!(quote = %quote.text, "dialogue already used by an earlier quote clip");
            continue;
        }
        let index = clips.len();
        clips.push(render_quote_clip(engine, adapters, root, movie, index, aligned, source, params)?);
    }
    write_json(&clips_dir.join(ALIGNED_QUOTES_FILE), &aligned_log)?;
    if clips.is_empty() {
        tracing::warn!("no selected quote could be aligned; no quote clips");
    }
    Ok(clips)
}

#[allow(clippy::too_many_arguments)]
fn render_quote_clip(
    engine: &Engine,
    adapters: &Adapters,
    root: &Path,
    movie: &Path,
    index: usize,
    aligned: AlignedQuote,
    source: Interval,
    params: &QuoteClipParams,
) -> Result<QuoteClip> {
    let dir = root.join("clips");
    let name = format!("qc_{index}");
    let raw = dir.join(format!("{name}.raw.mp4"));
    let out = dir.join(format!("{name}.mp4"));
    cut_clip(engine, movie, source, &raw)?;
    let shots = detect_shots(engine, &raw, &DetectorParams::default())?;
    write_shots_sidecar(&dir, &name, &shots)?;
    let orphans = find_orphan_spans(&shots, params.orphan_max_s);
    if orphans.is_empty() {
        std::fs::rename(&raw, &out).map_err(|e| Error::io(&raw, e))?;
    } else {
        blank_video_span(engine, &raw, &orphans, &out)?;
        std::fs::remove_file(&raw).map_err(|e| Error::io(&raw, e))?;
    }
    let wav = dir.join(format!("{name}.wav"));
    extract_audio_wav(engine, &out, None, &wav)?;
    let vocals = adapters.get(AdapterKind::VocalSeparate)?.call(&SeparateVocals {
        audio: wav.clone(),
        out: dir.join(format!("{name}.vocals.wav")),
    })?;
    if vocals.vocals != wav {
        let _ = std::fs::remove_file(&wav);
    }
    Ok(QuoteClip {
        index,
        aligned,
        source_interval: source,
        file: relative_to(root, &out),
        vocals: relative_to(root, &vocals.vocals),
        orphan_spans_blanked: orphans,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardClipParams {
    pub min_s: f64,
    pub max_s: f64,
    pub orphan_max_s: f64,
    pub downscale_width: u32,
}

impl StandardClipParams {
    pub fn new(min_s: f64, max_s: f64) -> Self {
        Self {
            min_s,
            max_s,
            orphan_max_s: DEFAULT_ORPHAN_MAX_S,
            downscale_width: DetectorParams::default().downscale_width,
        }
    }
}

/// Picks clip bounds for one anchor from a score track of the window around
/// it.
///
/// Window edges count as boundaries only where they coincide with the start
/// or end of the movie. When the chosen interval contains a shot that the
/// aggressive detector sees as orphan-short, the choice is redone over the
/// union of both boundary sets with such intervals ruled out.
pub fn plan_standard_interval(
    track: &ScoreTrack,
    anchor_s: f64,
    movie_duration_s: f64,
    params: &StandardClipParams,
) -> Result<Rectified> {
    let span = track.span()?;
    if !span.contains(anchor_s) {
        return Ok(Rectified::Rejected);
    }
    let frame = 1.0 / track.fps;
    let real_start = span.start() <= EPS;
    let real_end = span.end() >= movie_duration_s - frame / 2.0;
    let bounds = |p: &DetectorParams| -> Vec<f64> {
        let mut b: Vec<f64> = track
            .cut_frames(p)
            .into_iter()
            .map(|i| track.origin_s + i as f64 / track.fps)
            .collect();
        if real_start {
            b.push(span.start());
        }
        if real_end {
            b.push(span.end());
        }
        b
    };
    let normal = bounds(&DetectorParams::default());
    let first = rectify_with_boundaries(anchor_s, &normal, span, params.min_s, params.max_s, |_, _| true)?;
    let Rectified::Aligned(chosen) = first else {
        return Ok(first);
    };

    let aggressive = DetectorParams::aggressive();
    let orphans: Vec<Interval> = track
        .shots(&aggressive)?
        .into_iter()
        .map(|s| s.interval)
        .filter(|iv| iv.len() < params.orphan_max_s)
        .collect();
    let contains_orphan =
        |a: f64, b: f64| orphans.iter().any(|o| o.start() >= a - EPS && o.end() <= b + EPS);
    if !contains_orphan(chosen.start(), chosen.end()) {
        return Ok(first);
    }
    let mut all = normal;
    all.extend(bounds(&aggressive));
    rectify_with_boundaries(anchor_s, &all, span, params.min_s, params.max_s, |a, b| !contains_orphan(a, b))
}

/// Plans and renders `clips/sc_<n>.mp4` for each assignment, in parallel,
/// numbering clips by source position. Anchors that cannot hold a
/// minimum-length clip are dropped.
pub fn build_standard_clips(
    engine: &Engine,
    root: &Path,
    movie: &Path,
    assignments: &[SubplotAssignment],
    params: &StandardClipParams,
) -> Result<Vec<StandardClip>> {
    if assignments.is_empty() {
        return Err(Error::invalid("no frame assignments to build standard clips from"));
    }
    let (_, duration) = engine.video_duration(movie)?;
    let dir = root.join("clips");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let planned = assignments
        .par_iter()
        .map(|a| {
            let anchor = a.frame.timestamp_s;
            let lo = (anchor - params.max_s).max(0.0);
            let hi = (anchor + params.max_s).min(duration);
            let track = score_video(engine, movie, Some(Interval::new(lo, hi)?), params.downscale_width)?;
            plan_standard_interval(&track, anchor, duration, params)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut jobs = Vec::new();
    for (a, plan) in assignments.iter().zip(planned) {
        match plan.interval() {
            Some(iv) => jobs.push((a, iv, plan.is_fallback())),
            None => tracing::warn!(
                subplot = a.subplot_index,
                anchor = a.frame.timestamp_s,
                "no room for a minimum-length clip; anchor dropped"
            ),
        }
    }
    // numbered in source order, which is the order they play in
    jobs.sort_by(|a, b| a.1.start().total_cmp(&b.1.start()));
    jobs.par_iter()
        .enumerate()
        .map(|(index, (a, iv, fallback))| {
            let out = dir.join(format!("sc_{index}.mp4"));
            cut_clip(engine, movie, *iv, &out)?;
            let mut assignment = (*a).clone();
            assignment.frame.embedding = None;
            assignment.frame.image_path = relative_to(root, &assignment.frame.image_path);
            Ok(StandardClip {
                index,
                assignment,
                source_interval: *iv,
                file: relative_to(root, &out),
                fallback: *fallback,
            })
        })
        .collect()
}
