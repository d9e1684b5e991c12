//! Deterministic stand-ins for every adapter kind. Each response is a pure
//! function of the task, the payload and the seed.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::tasks::*;
use super::{AdapterKind, Capabilities, HandshakeRequest, HandshakeResponse, Request, Response, PROTOCOL_VERSION};
use crate::mediaio::{write_wav_mono16, Interval, SAMPLE_RATE};

pub const MOCK_EMBED_DIM: usize = 64;
pub const MOCK_MAX_MUSIC_S: f64 = 30.0;
pub const TTS_SECONDS_PER_CHAR: f64 = 0.06;
const TTS_FREQ_HZ: f64 = 220.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MockBackend {
    pub kind: AdapterKind,
    pub seed: u64,
    /// Cue-sheet directory for `asr` and `vad`; unused by other kinds.
    pub address: Option<PathBuf>,
}

/// Unit vector derived from a seeded hash of `input`.
pub fn mock_embedding(seed: u64, input: &str) -> Vec<f32> {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(input.as_bytes());
    let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
    let v: Vec<f64> = (0..MOCK_EMBED_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / norm) as f32).collect()
}

#[derive(Deserialize)]
struct LlmTemplates {
    voiceover: Vec<String>,
    music_brief: String,
    moods: BTreeMap<String, String>,
    default_mood: String,
}

fn templates() -> &'static LlmTemplates {
    static T: OnceLock<LlmTemplates> = OnceLock::new();
    T.get_or_init(|| serde_json::from_str(include_str!("../../data/mock_llm.json")).expect("bundled templates parse"))
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "of", "in", "on", "at", "to", "for", "with", "from", "by", "into", "amid",
    "amidst", "his", "her", "their", "its", "is", "are", "was", "were", "be", "been", "that", "this", "who", "which",
    "as", "up", "gone", "sense", "air", "while", "after", "before", "over", "under", "out",
];

fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        cur.push(c);
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace()) {
            let s = cur.trim().to_string();
            if !s.is_empty() {
                out.push(s);
            }
            cur.clear();
        }
    }
    let s = cur.trim().to_string();
    if !s.is_empty() {
        out.push(s);
    }
    out
}

fn keywords_of(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    text.split(|c: char| !c.is_alphanumeric() && c != '-')
        .map(str::to_lowercase)
        .filter(|w| w.chars().count() >= 4 && !STOPWORDS.contains(&w.as_str()))
        .filter(|w| seen.insert(w.clone()))
        .take(5)
        .collect()
}

fn tone(freq: f64, duration_s: f64, amp: f64) -> Vec<f32> {
    let sr = SAMPLE_RATE as f64;
    let n = (duration_s * sr).round() as usize;
    let ramp = (0.005 * sr) as usize;
    (0..n)
        .map(|i| {
            let edge = (i.min(n - 1 - i) as f64 / ramp as f64).min(1.0);
            (amp * edge * (2.0 * std::f64::consts::PI * freq * i as f64 / sr).sin()) as f32
        })
        .collect()
}

/// Three-note pad plus filtered noise, with a gentle swell.
fn noise_pad(seed: u64, duration_s: f64) -> Vec<f32> {
    let sr = SAMPLE_RATE as f64;
    let n = (duration_s * sr).round() as usize;
    let roots = [110.0, 123.47, 130.81, 146.83];
    let root = roots[(seed % roots.len() as u64) as usize];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lp = 0.0f64;
    let ramp = (0.05 * sr) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let chord: f64 = [1.0, 1.2, 1.5]
                .iter()
                .map(|r| (2.0 * std::f64::consts::PI * root * r * t).sin())
                .sum::<f64>()
                / 3.0;
            lp += 0.05 * (rng.random_range(-1.0..1.0) - lp);
            let swell = 0.85 + 0.15 * (2.0 * std::f64::consts::PI * t / 8.0).sin();
            let edge = (i.min(n - 1 - i) as f64 / ramp as f64).min(1.0);
            (edge * swell * (0.25 * chord + 0.3 * lp)) as f32
        })
        .collect()
}

#[derive(Deserialize, Serialize)]
struct CueSheet {
    segments: Vec<TimedText>,
    #[serde(default)]
    speech: Option<Vec<Interval>>,
}

fn parse<T: DeserializeOwned>(payload: &Value) -> Result<T, String> {
    serde_path_to_error::deserialize(payload).map_err(|e| format!("invalid payload at {}: {}", e.path(), e.inner()))
}

fn ensure_parent(path: &Path) -> Result<(), String> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

impl MockBackend {
    pub fn new(kind: AdapterKind, seed: u64, address: Option<PathBuf>) -> Self {
        MockBackend { kind, seed, address }
    }

    pub fn capabilities(&self) -> Capabilities {
        let mut caps = Capabilities {
            max_concurrency: 4,
            ..Default::default()
        };
        match self.kind {
            AdapterKind::TextEmbed | AdapterKind::ImageEmbed => {
                caps.embedding_dim = Some(MOCK_EMBED_DIM);
                caps.max_concurrency = 1;
            }
            AdapterKind::Music => {
                caps.max_music_s = Some(MOCK_MAX_MUSIC_S);
                caps.max_concurrency = 2;
            }
            AdapterKind::Tts => {
                caps.voices = (1..=5).map(|i| format!("V{i}")).collect();
                caps.max_concurrency = 2;
            }
            _ => {}
        }
        caps
    }

    pub fn respond(&self, req: &Request) -> Response {
        match self.dispatch(&req.task, &req.payload) {
            Ok(v) => Response::success(&req.id, v),
            Err(e) => Response::failure(&req.id, e),
        }
    }

    fn dispatch(&self, task: &str, payload: &Value) -> Result<Value, String> {
        if task == "handshake" {
            let h: HandshakeRequest = parse(payload)?;
            if h.protocol != PROTOCOL_VERSION {
                return Err(format!("unsupported protocol {}", h.protocol));
            }
            let resp = HandshakeResponse {
                protocol: PROTOCOL_VERSION,
                kind: self.kind,
                capabilities: self.capabilities(),
            };
            return Ok(serde_json::to_value(resp).expect("serializable"));
        }
        let served = match self.kind {
            AdapterKind::Llm => task.starts_with("llm/"),
            k => task == k.as_str(),
        };
        if !served {
            return Err(format!("task {task} is not served by a {} adapter", self.kind));
        }
        let out = match task {
            SplitSynopsis::NAME => self.split_synopsis(parse(payload)?),
            SelectQuotes::NAME => {
                let r: SelectQuotes = parse(payload)?;
                json!(SelectedQuotes {
                    quotes: r.candidates.into_iter().take(r.n_target).collect()
                })
            }
            ExtractKeywords::NAME => {
                let r: ExtractKeywords = parse(payload)?;
                json!(Keywords {
                    keywords: keywords_of(&r.subplot)
                })
            }
            WriteVoiceover::NAME => self.voiceover(parse(payload)?),
            WriteMusicBrief::NAME => music_brief(parse(payload)?),
            EmbedTexts::NAME => {
                let r: EmbedTexts = parse(payload)?;
                json!(Embeddings {
                    vectors: r.texts.iter().map(|t| mock_embedding(self.seed, t)).collect()
                })
            }
            EmbedImages::NAME => {
                let r: EmbedImages = parse(payload)?;
                json!(Embeddings {
                    vectors: r.images.iter().map(|p| mock_embedding(self.seed, &file_name(p))).collect()
                })
            }
            Transcribe::NAME => {
                let r: Transcribe = parse(payload)?;
                json!(Transcription {
                    segments: self.cue_sheet(&r.audio)?.segments
                })
            }
            DetectSpeech::NAME => {
                let r: DetectSpeech = parse(payload)?;
                let sheet = self.cue_sheet(&r.audio)?;
                let speech = sheet
                    .speech
                    .unwrap_or_else(|| sheet.segments.iter().map(|s| s.interval).collect());
                json!(SpeechRegions { speech })
            }
            Synthesize::NAME => {
                let r: Synthesize = parse(payload)?;
                let secs = TTS_SECONDS_PER_CHAR * r.text.chars().count() as f64;
                if secs <= 0.0 {
                    return Err("empty text".into());
                }
                let samples = tone(TTS_FREQ_HZ, secs, 0.5);
                write_audio(&r.out, &samples)?
            }
            ComposeMusic::NAME => {
                let r: ComposeMusic = parse(payload)?;
                let secs = r.duration_s.min(MOCK_MAX_MUSIC_S);
                if !(secs > 0.0) {
                    return Err(format!("bad duration {}", r.duration_s));
                }
                write_audio(&r.out, &noise_pad(r.seed ^ self.seed, secs))?
            }
            SeparateVocals::NAME => {
                let r: SeparateVocals = parse(payload)?;
                ensure_parent(&r.out)?;
                std::fs::copy(&r.audio, &r.out).map_err(|e| format!("{}: {e}", r.audio.display()))?;
                json!(Vocals { vocals: r.out })
            }
            DetectText::NAME => {
                let r: DetectText = parse(payload)?;
                let regions = if file_name(&r.image).contains("_text") {
                    vec![TextRegion {
                        text: "TEXT".into(),
                        confidence: 0.99,
                        area_frac: 0.05,
                    }]
                } else {
                    Vec::new()
                };
                json!(TextRegions { regions })
            }
            other => return Err(format!("unknown task {other}")),
        };
        Ok(out)
    }

    fn split_synopsis(&self, r: SplitSynopsis) -> Value {
        let sents = sentences(&r.synopsis);
        let k = r.n_target.min(sents.len()).max(1);
        let subplots: Vec<String> = if sents.is_empty() {
            vec![r.synopsis.trim().to_string()]
        } else {
            (0..k)
                .map(|g| sents[g * sents.len() / k..(g + 1) * sents.len() / k].join(" "))
                .collect()
        };
        json!(Subplots { subplots })
    }

    fn voiceover(&self, r: WriteVoiceover) -> Value {
        let t = templates();
        let lines = (0..r.n_lines)
            .map(|i| {
                let source = if r.subplots.is_empty() {
                    r.synopsis.as_str()
                } else {
                    r.subplots[i * r.subplots.len() / r.n_lines.max(1)].as_str()
                };
                let kws = keywords_of(source);
                let phrase = match kws.as_slice() {
                    [] => "the unknown".to_string(),
                    [a] => a.clone(),
                    [a, b, ..] => format!("{a} and {b}"),
                };
                let tpl = &t.voiceover[(i + self.seed as usize) % t.voiceover.len()];
                tpl.replace("{phrase}", &phrase).replace("{title}", &r.title)
            })
            .collect();
        json!(VoiceLines { lines })
    }

    fn cue_sheet(&self, audio: &Path) -> Result<CueSheet, String> {
        let dir = self.address.as_ref().ok_or("mock needs a cue-sheet directory as its address")?;
        let stem = audio.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let path = dir.join(format!("{stem}.cues.json"));
        let text = std::fs::read_to_string(&path).map_err(|e| format!("no cue sheet {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

fn music_brief(r: WriteMusicBrief) -> Value {
    let t = templates();
    let mood = r
        .genres
        .iter()
        .find_map(|g| t.moods.get(&g.to_lowercase()))
        .unwrap_or(&t.default_mood);
    let genres = if r.genres.is_empty() {
        "film".to_string()
    } else {
        r.genres.join("/").to_lowercase()
    };
    let brief = t
        .music_brief
        .replace("{genres}", &genres)
        .replace("{title}", &r.title)
        .replace("{mood}", mood);
    json!(MusicBrief { brief })
}

fn write_audio(out: &Path, samples: &[f32]) -> Result<Value, String> {
    ensure_parent(out)?;
    write_wav_mono16(out, samples, SAMPLE_RATE).map_err(|e| e.to_string())?;
    Ok(json!(AudioFile {
        audio: out.to_path_buf(),
        duration_s: samples.len() as f64 / SAMPLE_RATE as f64,
    }))
}

/// Serves `backend` over newline-delimited envelopes until `input` closes.
pub fn serve_mock_lines(backend: &MockBackend, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<Request>(&line) {
            Ok(req) => backend.respond(&req),
            Err(e) => Response::failure("", format!("malformed request: {e}")),
        };
        serde_json::to_writer(&mut output, &resp)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}
