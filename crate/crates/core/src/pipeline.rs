//! Phase sequencing with content-hash checkpoints.
//!
//! Each phase writes plan documents (hashed) and media files (validated by
//! probed duration). A phase is skipped when its recorded fingerprint, which
//! chains the config, seed and every upstream digest, still matches and its
//! artifacts verify. Once any phase re-executes, everything after it in the
//! requested range re-executes too.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adapters::{AdapterKind, Adapters, ExtractKeywords, SplitSynopsis, Synthesize, Transcript, WriteMusicBrief, WriteVoiceover};
use crate::assembly::{
    assemble_visual, choose_voice, normalize_qc_gain, place_voice_lines, plan_sequence, plan_voice_count, prepare_music,
    render_final, EntryKind, QcTrack, RenderPlan, SequencePattern, TimestampEntry, TimestampLog, VoiceTable,
    VoiceTrack, DEFAULT_CLEARANCE_S, DEFAULT_DUCK_RAMP_S,
};
use crate::clips::{
    build_quote_clips, build_standard_clips, relative_to, write_json, ClipsManifest, QuoteClip, QuoteClipParams,
    StandardClipParams, MANIFEST_FILE,
};
use crate::mediaio::{extract_frames, measure_rms, plan_frame_timestamps, Engine, FrameRecord};
use crate::project::{ingest_metadata, load_config, metadata_to_json, parse_metadata, redact_text, MovieMetadata, ProjectConfig, RedactionLexicon};
use crate::retrieval::{
    embed_frames, embed_queries, query_text, select_frames, write_subplot_artifacts, OcrDetector, SelectionConstraints,
    SubplotAssignment,
};
use crate::{Error, Result};

pub const LAST_PHASE: u8 = 11;
pub const STATE_FILE: &str = "state.json";
pub const TRANSCRIPT_FILE: &str = "adapter_transcript.jsonl";
pub const FRAME_EMBED_BATCH: usize = 16;

pub const PHASE_NAMES: [&str; 12] = [
    "prepare",
    "frames",
    "subplots",
    "quote-clips",
    "retrieval",
    "standard-clips",
    "visual-assembly",
    "voiceover-script",
    "voice-synthesis",
    "voice-placement",
    "music",
    "render",
];

/// Project-relative artifact paths.
pub mod paths {
    pub const METADATA: &str = "metadata.json";
    pub const MOVIE_INFO: &str = "movie.json";
    pub const FRAMES: &str = "frames/frames.json";
    pub const SUBPLOTS: &str = "subplots/subplots.json";
    pub const QUOTE_CLIPS: &str = "clips/quote_clips.json";
    pub const ASSIGNMENTS: &str = "subplots/assignments.json";
    pub const CLIPS_MANIFEST: &str = "clips/clips_manifest.json";
    pub const SEQUENCE: &str = "assembly/sequence.json";
    pub const VISUAL: &str = "assembly/visual.mp4";
    pub const VISUAL_TIMESTAMPS: &str = "assembly/timestamps.json";
    pub const SCRIPT: &str = "voice/script.json";
    pub const VOICES: &str = "voice/voices.json";
    pub const TIMESTAMPS: &str = "trailer/timestamps.json";
    pub const MIX_PLAN: &str = "assembly/mix_plan.json";
    pub const MUSIC: &str = "music/music.json";
    pub const TRAILER: &str = "trailer/final.mp4";
    pub const REPORT: &str = "trailer/report.json";
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub fingerprint: String,
    /// Plan documents and their sha256.
    pub digests: BTreeMap<String, String>,
    /// Media files and their probed durations.
    pub media: BTreeMap<String, f64>,
    /// Files that only need to exist.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub seed: u64,
    pub completed_phases: Vec<u8>,
    pub phases: BTreeMap<u8, PhaseRecord>,
}

impl PipelineState {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&mut self, path: &Path) -> Result<()> {
        self.completed_phases = self.phases.keys().copied().collect();
        write_json(path, self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub from_phase: u8,
    pub to_phase: u8,
    pub seed: Option<u64>,
    pub allow_missing_music: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            from_phase: 0,
            to_phase: LAST_PHASE,
            seed: None,
            allow_missing_music: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub executed: Vec<u8>,
    pub skipped: Vec<u8>,
    pub trailer: Option<PathBuf>,
    pub trailer_duration_s: Option<f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieInfo {
    pub path: PathBuf,
    pub duration_s: f64,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub has_audio: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubplotDoc {
    pub subplots: Vec<String>,
    pub keywords: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptDoc {
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceLineDoc {
    pub text: String,
    pub audio: PathBuf,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoicesDoc {
    pub voice_id: String,
    pub lines: Vec<VoiceLineDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixPlanDoc {
    pub qc: Vec<QcTrack>,
    pub voice: Vec<VoiceTrack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MusicDoc {
    pub brief: String,
    pub file: Option<PathBuf>,
}

/// Output of one phase: documents to hash, media to probe, plain files.
#[derive(Default)]
struct Outputs {
    docs: Vec<String>,
    media: Vec<String>,
    files: Vec<String>,
}

impl Outputs {
    fn docs(docs: &[&str]) -> Self {
        Outputs {
            docs: docs.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }
}

pub struct Pipeline {
    root: PathBuf,
    cfg: ProjectConfig,
    config_text: String,
    manifest_text: String,
    seed: u64,
    engine: Engine,
    adapters: Adapters,
    lexicon: RedactionLexicon,
    allow_missing_music: bool,
}

impl Pipeline {
    /// Loads the config and connects every adapter in the manifest.
    pub fn open(config_path: &Path, manifest: &Path, seed: Option<u64>, allow_missing_music: bool) -> Result<Self> {
        let cfg = load_config(config_path)?;
        let config_text = std::fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
        let root = config_path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf();
        let root = std::fs::canonicalize(&root).map_err(|e| Error::io(&root, e))?;
        let seed = seed.unwrap_or(cfg.seed);
        let engine = Engine::discover(cfg.media_engine.as_deref().map(|p| cfg.resolve(&root, p)).as_deref(), cfg.parallelism)?;
        let lexicon = match &cfg.lexicon_path {
            Some(p) => RedactionLexicon::bundled_with_file(&cfg.resolve(&root, p))?,
            None => RedactionLexicon::bundled(),
        };
        let manifest_text = std::fs::read_to_string(manifest)
            .map_err(|e| crate::adapters::AdapterError::Manifest(format!("{}: {e}", manifest.display())))?;
        let transcript = Arc::new(Transcript::create(&root.join(TRANSCRIPT_FILE), Some(&root))?);
        let adapters = Adapters::load_manifest(manifest, seed, Some(transcript))?;
        if let Some(missing) = AdapterKind::ALL.into_iter().find(|k| adapters.get(*k).is_err()) {
            return Err(crate::adapters::AdapterError::Missing(missing).into());
        }
        Ok(Pipeline {
            root,
            cfg,
            config_text,
            manifest_text,
            seed,
            engine,
            adapters,
            lexicon,
            allow_missing_music,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn p(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn movie(&self) -> PathBuf {
        self.cfg.resolve(&self.root, &self.cfg.movie_path)
    }

    pub fn run(&self, opts: &RunOptions) -> Result<RunSummary> {
        if opts.from_phase > opts.to_phase || opts.to_phase > LAST_PHASE {
            return Err(Error::config(
                "phase",
                format!("phase range {}..={} must lie within 0..={LAST_PHASE}", opts.from_phase, opts.to_phase),
            ));
        }
        let state_path = self.p(STATE_FILE);
        let mut state = PipelineState::load(&state_path)?;
        state.seed = self.seed;
        let mut summary = RunSummary::default();
        let mut prev_fp = sha256_hex(format!("{}\n{}\n{}", self.config_text, self.manifest_text, self.seed).as_bytes());
        let mut dirty = false;
        for phase in 0..=opts.to_phase {
            let recorded = state.phases.get(&phase).cloned();
            let fp = sha256_hex(format!("{prev_fp}\n{phase}").as_bytes());
            if phase < opts.from_phase {
                let rec = recorded.ok_or_else(|| Error::DigestMismatch {
                    phase,
                    detail: "phase has not completed; run it first".into(),
                })?;
                if rec.fingerprint != fp {
                    return Err(Error::DigestMismatch {
                        phase,
                        detail: "upstream inputs changed since it ran".into(),
                    });
                }
                self.verify(&rec).map_err(|detail| Error::DigestMismatch { phase, detail })?;
                prev_fp = chain(&fp, &rec);
                continue;
            }
            if !dirty {
                if let Some(rec) = recorded.as_ref().filter(|r| r.fingerprint == fp) {
                    if self.verify(rec).is_ok() {
                        tracing::info!(phase, name = PHASE_NAMES[phase as usize], "up to date; skipped");
                        summary.skipped.push(phase);
                        prev_fp = chain(&fp, rec);
                        continue;
                    }
                }
            }
            dirty = true;
            state.phases.remove(&phase);
            let later: Vec<u8> = state.phases.keys().copied().filter(|&p| p > phase).collect();
            for p in later {
                state.phases.remove(&p);
            }
            state.save(&state_path)?;
            let started = Instant::now();
            tracing::info!(phase, name = PHASE_NAMES[phase as usize], "running");
            let out = self.run_phase(phase).map_err(|e| Error::Phase {
                phase,
                source: Box::new(e),
            })?;
            let rec = self.record(fp.clone(), out).map_err(|e| Error::Phase {
                phase,
                source: Box::new(e),
            })?;
            tracing::info!(phase, secs = started.elapsed().as_secs_f64(), "done");
            prev_fp = chain(&fp, &rec);
            state.phases.insert(phase, rec);
            state.save(&state_path)?;
            summary.executed.push(phase);
        }
        if opts.to_phase == LAST_PHASE {
            let trailer = self.p(paths::TRAILER);
            if trailer.is_file() {
                summary.trailer_duration_s = Some(self.engine.probe(&trailer)?.duration_s);
                summary.trailer = Some(trailer);
            }
        }
        Ok(summary)
    }

    fn record(&self, fingerprint: String, out: Outputs) -> Result<PhaseRecord> {
        let mut rec = PhaseRecord {
            fingerprint,
            ..Default::default()
        };
        for d in out.docs {
            rec.digests.insert(d.clone(), sha256_file(&self.p(&d))?);
        }
        for m in out.media {
            let info = self.engine.probe(&self.p(&m))?;
            rec.media.insert(m, (info.duration_s * 1e3).round() / 1e3);
        }
        rec.files = out.files;
        Ok(rec)
    }

    fn verify(&self, rec: &PhaseRecord) -> std::result::Result<(), String> {
        for (rel, want) in &rec.digests {
            let got = sha256_file(&self.p(rel)).map_err(|e| format!("{rel}: {e}"))?;
            if &got != want {
                return Err(format!("{rel} changed since it was written"));
            }
        }
        for (rel, want) in &rec.media {
            let info = self.engine.probe(&self.p(rel)).map_err(|e| format!("{rel}: {e}"))?;
            if (info.duration_s - want).abs() > 0.1 {
                return Err(format!("{rel} runs {:.3} s, recorded {want:.3} s", info.duration_s));
            }
        }
        if let Some(f) = rec.files.iter().find(|f| !self.p(f).is_file()) {
            return Err(format!("{f} is missing"));
        }
        Ok(())
    }

    fn run_phase(&self, phase: u8) -> Result<Outputs> {
        match phase {
            0 => self.prepare(),
            1 => self.frames(),
            2 => self.subplots(),
            3 => self.quote_clips(),
            4 => self.retrieval(),
            5 => self.standard_clips(),
            6 => self.visual(),
            7 => self.script(),
            8 => self.voices(),
            9 => self.placement(),
            10 => self.music(),
            11 => self.render(),
            _ => unreachable!("phase range checked"),
        }
    }

    fn metadata(&self) -> Result<MovieMetadata> {
        let text = std::fs::read_to_string(self.p(paths::METADATA)).map_err(|e| Error::io(self.p(paths::METADATA), e))?;
        parse_metadata(&text)
    }

    fn movie_info(&self) -> Result<MovieInfo> {
        read_json(&self.p(paths::MOVIE_INFO))
    }

    fn prepare(&self) -> Result<Outputs> {
        self.cfg.validate()?;
        let src = self.cfg.resolve(&self.root, &self.cfg.metadata_path);
        let meta = ingest_metadata(&src)?;
        let dst = self.p(paths::METADATA);
        let text = metadata_to_json(&meta)?;
        std::fs::write(&dst, text + "\n").map_err(|e| Error::io(&dst, e))?;
        let movie = self.movie();
        let (info, duration_s) = self.engine.video_duration(&movie)?;
        write_json(
            &self.p(paths::MOVIE_INFO),
            &MovieInfo {
                path: relative_to(&self.root, &movie),
                duration_s,
                fps: info.fps,
                width: info.width,
                height: info.height,
                has_audio: info.has_audio,
            },
        )?;
        Ok(Outputs::docs(&[paths::METADATA, paths::MOVIE_INFO]))
    }

    fn frames(&self) -> Result<Outputs> {
        let info = self.movie_info()?;
        let stamps = plan_frame_timestamps(info.duration_s, self.cfg.head_trim_frac, self.cfg.tail_trim_frac);
        if stamps.is_empty() {
            return Err(Error::config("movie_path", "movie too short to sample any frame"));
        }
        let dir = self.p("frames");
        let mut frames = extract_frames(&self.engine, &self.movie(), &stamps, &dir)?;
        for f in &mut frames {
            f.image_path = relative_to(&self.root, &f.image_path);
        }
        write_json(&self.p(paths::FRAMES), &frames)?;
        let mut out = Outputs::docs(&[paths::FRAMES]);
        out.files = frames.iter().map(|f| f.image_path.to_string_lossy().into_owned()).collect();
        Ok(out)
    }

    fn subplots(&self) -> Result<Outputs> {
        let meta = self.metadata()?;
        let llm = self.adapters.get(AdapterKind::Llm)?;
        let subplots = llm
            .call(&SplitSynopsis {
                synopsis: redact_text(&meta.synopsis, &self.lexicon),
                n_target: self.cfg.n_sc_target.max(1),
                repair: None,
            })?
            .subplots;
        let keywords = subplots
            .iter()
            .map(|s| {
                Ok(llm
                    .call(&ExtractKeywords {
                        subplot: s.clone(),
                        repair: None,
                    })?
                    .keywords)
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, (s, k)) in subplots.iter().zip(&keywords).enumerate() {
            let dir = self.p(&format!("subplots/{i}"));
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            std::fs::write(dir.join("subplot.txt"), format!("{s}\n")).map_err(|e| Error::io(&dir, e))?;
            write_json(&dir.join("keywords.json"), k)?;
        }
        write_json(&self.p(paths::SUBPLOTS), &SubplotDoc { subplots, keywords })?;
        Ok(Outputs::docs(&[paths::SUBPLOTS]))
    }

    fn quote_clips(&self) -> Result<Outputs> {
        let meta = self.metadata()?;
        let params = QuoteClipParams {
            n_target: self.cfg.n_qc_target,
            ..QuoteClipParams::default()
        };
        let clips = build_quote_clips(&self.engine, &self.adapters, &self.root, &self.movie(), &meta, &self.lexicon, &params)?;
        let manifest = ClipsManifest {
            quote_clips: clips,
            standard_clips: Vec::new(),
        };
        manifest.save(&self.p(paths::QUOTE_CLIPS))?;
        let mut out = Outputs::docs(&[paths::QUOTE_CLIPS]);
        out.media = manifest.quote_clips.iter().map(|c| c.file.to_string_lossy().into_owned()).collect();
        out.files = manifest.quote_clips.iter().map(|c| c.vocals.to_string_lossy().into_owned()).collect();
        Ok(out)
    }

    fn retrieval(&self) -> Result<Outputs> {
        let info = self.movie_info()?;
        let doc: SubplotDoc = read_json(&self.p(paths::SUBPLOTS))?;
        let mut frames: Vec<FrameRecord> = read_json(&self.p(paths::FRAMES))?;
        for f in &mut frames {
            f.image_path = self.root.join(&f.image_path);
        }
        embed_frames(self.adapters.get(AdapterKind::ImageEmbed)?, &mut frames, FRAME_EMBED_BATCH)?;
        let texts: Vec<String> = doc.subplots.iter().zip(&doc.keywords).map(|(s, k)| query_text(k, s)).collect();
        let queries = embed_queries(self.adapters.get(AdapterKind::TextEmbed)?, &texts)?;
        let constraints = SelectionConstraints::for_duration(info.duration_s);
        let detector = OcrDetector {
            client: self.adapters.get(AdapterKind::Ocr)?,
            conf_threshold: constraints.ocr_conf_threshold,
            min_area_frac: constraints.ocr_min_area_frac,
        };
        let sel = select_frames(&queries, &mut frames, info.duration_s, &constraints, &detector)?;
        let strip = |a: &SubplotAssignment| {
            let mut a = a.clone();
            a.frame.embedding = None;
            a.frame.image_path = relative_to(&self.root, &a.frame.image_path);
            a
        };
        let mut docs = vec![paths::ASSIGNMENTS.to_string()];
        for audit in &sel.audits {
            let mut audit = audit.clone();
            audit.chosen = audit.chosen.as_ref().map(strip);
            let i = audit.subplot_index;
            write_subplot_artifacts(&self.root, &doc.subplots[i], &doc.keywords[i], &audit)?;
            docs.push(format!("subplots/{i}/frame.json"));
        }
        let assignments: Vec<SubplotAssignment> = sel.assignments.iter().map(strip).collect();
        write_json(&self.p(paths::ASSIGNMENTS), &assignments)?;
        Ok(Outputs {
            docs,
            ..Default::default()
        })
    }

    fn standard_clips(&self) -> Result<Outputs> {
        let mut assignments: Vec<SubplotAssignment> = read_json(&self.p(paths::ASSIGNMENTS))?;
        for a in &mut assignments {
            a.frame.image_path = self.root.join(&a.frame.image_path);
        }
        let quotes: ClipsManifest = ClipsManifest::load(&self.p(paths::QUOTE_CLIPS))?;
        let params = StandardClipParams::new(self.cfg.clip_len_min_s, self.cfg.clip_len_max_s);
        let standard = build_standard_clips(&self.engine, &self.root, &self.movie(), &assignments, &params)?;
        if standard.is_empty() {
            return Err(Error::invalid("no standard clip could be built"));
        }
        let manifest = ClipsManifest {
            quote_clips: quotes.quote_clips,
            standard_clips: standard,
        };
        debug_assert_eq!(paths::CLIPS_MANIFEST, format!("clips/{MANIFEST_FILE}"));
        manifest.save(&self.p(paths::CLIPS_MANIFEST))?;
        let mut out = Outputs::docs(&[paths::CLIPS_MANIFEST]);
        out.media = manifest.standard_clips.iter().map(|c| c.file.to_string_lossy().into_owned()).collect();
        Ok(out)
    }

    fn visual(&self) -> Result<Outputs> {
        let m = ClipsManifest::load(&self.p(paths::CLIPS_MANIFEST))?;
        let pattern = plan_sequence(m.standard_clips.len(), m.quote_clips.len())?;
        write_json(&self.p(paths::SEQUENCE), &serde_json::json!({"pattern": pattern.to_string(), "items": pattern.items}))?;
        let log = assemble_visual(&self.engine, &self.root, &pattern, &m.standard_clips, &m.quote_clips, &self.p(paths::VISUAL))?;
        log.save(&self.p(paths::VISUAL_TIMESTAMPS))?;
        let mut out = Outputs::docs(&[paths::SEQUENCE, paths::VISUAL_TIMESTAMPS]);
        out.media = vec![paths::VISUAL.into()];
        Ok(out)
    }

    fn script(&self) -> Result<Outputs> {
        let meta = self.metadata()?;
        let log = TimestampLog::load(&self.p(paths::VISUAL_TIMESTAMPS))?;
        let doc: SubplotDoc = read_json(&self.p(paths::SUBPLOTS))?;
        let n_lines = plan_voice_count(log.trailer_duration_s)?;
        let lines = self
            .adapters
            .get(AdapterKind::Llm)?
            .call(&WriteVoiceover {
                title: meta.title.clone(),
                synopsis: redact_text(&meta.synopsis, &self.lexicon),
                subplots: doc.subplots,
                n_lines,
                repair: None,
            })?
            .lines;
        write_json(&self.p(paths::SCRIPT), &ScriptDoc { lines })?;
        Ok(Outputs::docs(&[paths::SCRIPT]))
    }

    fn voices(&self) -> Result<Outputs> {
        let meta = self.metadata()?;
        let script: ScriptDoc = read_json(&self.p(paths::SCRIPT))?;
        let voice_id = choose_voice(&meta.genres, VoiceTable::bundled());
        let tts = self.adapters.get(AdapterKind::Tts)?;
        let lines = script
            .lines
            .iter()
            .enumerate()
            .map(|(i, text)| {
                let a = tts.call(&Synthesize {
                    text: text.clone(),
                    voice: voice_id.clone(),
                    out: self.p(&format!("voice/line_{i}.wav")),
                })?;
                Ok(VoiceLineDoc {
                    text: text.clone(),
                    audio: relative_to(&self.root, &a.audio),
                    duration_s: (a.duration_s * 1e6).round() / 1e6,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let files = lines.iter().map(|l| l.audio.to_string_lossy().into_owned()).collect();
        write_json(&self.p(paths::VOICES), &VoicesDoc { voice_id, lines })?;
        Ok(Outputs {
            docs: vec![paths::VOICES.into()],
            files,
            ..Default::default()
        })
    }

    fn placement(&self) -> Result<Outputs> {
        let mut log = TimestampLog::load(&self.p(paths::VISUAL_TIMESTAMPS))?;
        let voices: VoicesDoc = read_json(&self.p(paths::VOICES))?;
        let manifest = ClipsManifest::load(&self.p(paths::CLIPS_MANIFEST))?;
        let durations: Vec<f64> = voices.lines.iter().map(|l| l.duration_s).collect();
        let slots = place_voice_lines(&log, &durations, DEFAULT_CLEARANCE_S)?;
        let mut voice_tracks = Vec::new();
        for (i, (line, slot)) in voices.lines.iter().zip(&slots).enumerate() {
            let level = measure_rms(&self.engine, &self.root.join(&line.audio), None)?;
            voice_tracks.push(VoiceTrack {
                audio: line.audio.clone(),
                gain_db: round_db(self.cfg.gain_voice_dbfs - level),
            });
            if let Some(iv) = slot {
                log.entries.push(TimestampEntry {
                    kind: EntryKind::Voice,
                    index: i,
                    start_s: iv.start(),
                    end_s: iv.end(),
                });
            }
        }
        let placed = slots.iter().flatten().count().max(1);
        let voice_levels = vec![self.cfg.gain_voice_dbfs; placed];
        let qc_tracks = manifest
            .quote_clips
            .iter()
            .map(|q: &QuoteClip| {
                let level = measure_rms(&self.engine, &self.root.join(&q.vocals), None)?;
                Ok(QcTrack {
                    vocals: q.vocals.clone(),
                    gain_db: round_db(normalize_qc_gain(&voice_levels, level)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        log.sort();
        log.validate()?;
        log.save(&self.p(paths::TIMESTAMPS))?;
        write_json(
            &self.p(paths::MIX_PLAN),
            &MixPlanDoc {
                qc: qc_tracks,
                voice: voice_tracks,
            },
        )?;
        Ok(Outputs::docs(&[paths::TIMESTAMPS, paths::MIX_PLAN]))
    }

    fn music(&self) -> Result<Outputs> {
        let meta = self.metadata()?;
        let log = TimestampLog::load(&self.p(paths::TIMESTAMPS))?;
        let brief = self
            .adapters
            .get(AdapterKind::Llm)?
            .call(&WriteMusicBrief {
                title: meta.title.clone(),
                genres: meta.genres.clone(),
                synopsis: redact_text(&meta.synopsis, &self.lexicon),
                repair: None,
            })?
            .brief;
        let dir = self.p("music");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        std::fs::write(dir.join("brief.txt"), format!("{brief}\n")).map_err(|e| Error::io(&dir, e))?;
        let file = match prepare_music(&self.engine, &self.adapters, &brief, log.trailer_duration_s, self.seed, &dir) {
            Ok(p) => Some(relative_to(&self.root, &p)),
            Err(e) if self.allow_missing_music => {
                tracing::warn!(error = %e, "music unavailable; continuing without it");
                None
            }
            Err(e) => return Err(e),
        };
        let mut out = Outputs::docs(&[paths::MUSIC]);
        out.files = file.iter().map(|f| f.to_string_lossy().into_owned()).collect();
        write_json(&self.p(paths::MUSIC), &MusicDoc { brief, file })?;
        Ok(out)
    }

    fn render(&self) -> Result<Outputs> {
        let log = TimestampLog::load(&self.p(paths::TIMESTAMPS))?;
        let mix: MixPlanDoc = read_json(&self.p(paths::MIX_PLAN))?;
        let music: MusicDoc = read_json(&self.p(paths::MUSIC))?;
        let abs = |p: &Path| self.root.join(p);
        let plan = RenderPlan {
            visual: self.p(paths::VISUAL),
            log: log.clone(),
            qc: mix
                .qc
                .iter()
                .map(|t| QcTrack {
                    vocals: abs(&t.vocals),
                    gain_db: t.gain_db,
                })
                .collect(),
            voice: mix
                .voice
                .iter()
                .map(|t| VoiceTrack {
                    audio: abs(&t.audio),
                    gain_db: t.gain_db,
                })
                .collect(),
            music: music.file.as_deref().map(abs),
            sc_gain_db: self.cfg.gain_sc_audio_db,
            music_gain_db: self.cfg.gain_music_db,
            duck_db: self.cfg.duck_db,
            duck_ramp_s: DEFAULT_DUCK_RAMP_S,
        };
        let duration = render_final(&self.engine, &plan, self.allow_missing_music, &self.p(paths::TRAILER))?;
        let seq: serde_json::Value = read_json(&self.p(paths::SEQUENCE))?;
        let voices: VoicesDoc = read_json(&self.p(paths::VOICES))?;
        write_json(
            &self.p(paths::REPORT),
            &serde_json::json!({
                "trailer": paths::TRAILER,
                "trailer_duration_s": (duration * 1e3).round() / 1e3,
                "visual_duration_s": log.trailer_duration_s,
                "pattern": seq["pattern"],
                "quote_clips": log.entries.iter().filter(|e| e.kind == EntryKind::Qc).count(),
                "voice_lines": log.entries.iter().filter(|e| e.kind == EntryKind::Voice).count(),
                "voice_id": voices.voice_id,
                "music": music.file,
                "seed": self.seed,
            }),
        )?;
        Ok(Outputs {
            docs: vec![paths::REPORT.into()],
            media: vec![paths::TRAILER.into()],
            files: Vec::new(),
        })
    }
}

fn round_db(x: f64) -> f64 {
    (x * 1e3).round() / 1e3
}

fn chain(fp: &str, rec: &PhaseRecord) -> String {
    let digests = serde_json::to_string(&rec.digests).expect("serializable");
    sha256_hex(format!("{fp}\n{digests}").as_bytes())
}

/// Loads the pattern back from `assembly/sequence.json`.
pub fn load_sequence(root: &Path) -> Result<SequencePattern> {
    let v: serde_json::Value = read_json(&root.join(paths::SEQUENCE))?;
    Ok(SequencePattern {
        items: serde_json::from_value(v["items"].clone())?,
    })
}

/// Convenience wrapper: open and run.
pub fn run(config: &Path, manifest: &Path, opts: &RunOptions) -> Result<RunSummary> {
    Pipeline::open(config, manifest, opts.seed, opts.allow_missing_music)?.run(opts)
}
