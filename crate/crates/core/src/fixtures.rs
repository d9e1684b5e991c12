//! Synthetic test material: solid-colour shot sequences with known cuts,
//! tone-burst dialogue with matching cue sheets, and a ready-to-run project
//! directory wired to the mock adapters.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapters::{AdapterKind, EndpointSpec, TimedText};
use crate::clips::write_json;
use crate::mediaio::{write_wav_mono16, Engine, Interval, SAMPLE_RATE};
use crate::project::{save_config, ProjectConfig};
use crate::{Error, Result};

pub const MOVIE_STEM: &str = "fixture_movie";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorShot {
    pub frames: u32,
    pub rgb: [u8; 3],
}

/// Encodes a sequence of solid-colour shots, optionally muxing `audio`.
pub fn write_color_video(
    engine: &Engine,
    shots: &[ColorShot],
    fps: u32,
    size: (u32, u32),
    audio: Option<&Path>,
    out: &Path,
) -> Result<()> {
    if shots.is_empty() || shots.iter().any(|s| s.frames == 0) {
        return Err(Error::invalid("every shot needs at least one frame"));
    }
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut graph = Vec::new();
    let mut join = String::new();
    for (i, s) in shots.iter().enumerate() {
        let [r, g, b] = s.rgb;
        graph.push(format!(
            "color=c=0x{r:02x}{g:02x}{b:02x}:s={}x{}:r={fps}:d={}[v{i}]",
            size.0,
            size.1,
            s.frames as f64 / fps as f64
        ));
        join += &format!("[v{i}]");
    }
    graph.push(format!("{join}concat=n={}:v=1:a=0[v]", shots.len()));
    let total: u32 = shots.iter().map(|s| s.frames).sum();
    let mut args = Vec::new();
    if let Some(a) = audio {
        args.extend(["-i".to_string(), a.to_string_lossy().into_owned()]);
    }
    args.extend(["-filter_complex".to_string(), graph.join(";"), "-map".into(), "[v]".into()]);
    if audio.is_some() {
        args.extend(["-map".to_string(), "0:a:0".into()]);
    }
    args.extend([
        "-frames:v".to_string(),
        total.to_string(),
        "-c:v".into(),
        "libx264".into(),
        "-preset".into(),
        "veryfast".into(),
        "-crf".into(),
        "18".into(),
        "-pix_fmt".into(),
        "yuv420p".into(),
        "-r".into(),
        fps.to_string(),
    ]);
    if audio.is_some() {
        args.extend([
            "-c:a".to_string(),
            "aac".into(),
            "-b:a".into(),
            "160k".into(),
            "-ar".into(),
            SAMPLE_RATE.to_string(),
            "-t".into(),
            format!("{:.6}", total as f64 / fps as f64),
        ]);
    }
    args.push(out.to_string_lossy().into_owned());
    engine.run("fixture-video", &args).map(|_| ())
}

/// Alternating dark and bright palettes so every cut scores far above the
/// default threshold.
pub fn shot_color(i: usize) -> [u8; 3] {
    const DARK: [[u8; 3]; 3] = [[0x1a, 0x20, 0x30], [0x30, 0x20, 0x18], [0x18, 0x28, 0x18]];
    const BRIGHT: [[u8; 3]; 3] = [[0xd8, 0xe0, 0xf0], [0xf0, 0xd8, 0xc0], [0xd0, 0xf0, 0xd0]];
    if i % 2 == 0 {
        DARK[(i / 2) % 3]
    } else {
        BRIGHT[(i / 2) % 3]
    }
}

/// Cut frames to shots.
pub fn shots_from_cuts(cuts: &[u32], total_frames: u32) -> Vec<ColorShot> {
    let mut bounds = vec![0];
    bounds.extend(cuts.iter().copied().filter(|&c| c > 0 && c < total_frames));
    bounds.push(total_frames);
    bounds
        .windows(2)
        .enumerate()
        .map(|(i, w)| ColorShot {
            frames: w[1] - w[0],
            rgb: shot_color(i),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub speaker: String,
    /// Line as it appears in the quote archive.
    pub text: String,
    /// Line as the recogniser hears it, split into transcript segments.
    pub heard: Vec<String>,
    pub start_s: f64,
    pub end_s: f64,
    /// Edge of the line that a brief shot should straddle.
    pub orphan: Option<OrphanEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrphanEdge {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub duration_s: f64,
    pub fps: u32,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub dialogues: Vec<Dialogue>,
    /// Speech that is transcribed but never quoted.
    pub chatter: Vec<Dialogue>,
    pub min_shot_s: f64,
    pub max_shot_s: f64,
}

fn line(speaker: &str, text: &str, heard: &[&str], start_s: f64, end_s: f64, orphan: Option<OrphanEdge>) -> Dialogue {
    Dialogue {
        speaker: speaker.into(),
        text: text.into(),
        heard: heard.iter().map(|s| s.to_string()).collect(),
        start_s,
        end_s,
        orphan,
    }
}

impl FixtureSpec {
    /// The three-minute dialogue movie.
    pub fn standard() -> Self {
        FixtureSpec {
            duration_s: 180.0,
            fps: 25,
            width: 256,
            height: 144,
            seed: 7,
            dialogues: vec![
                line(
                    "Mara",
                    "You're late, and the storm is already here.",
                    &["you're late and the", "storm is already here"],
                    40.0,
                    42.6,
                    Some(OrphanEdge::Start),
                ),
                line(
                    "Ilan",
                    "I will never forgive you for this betrayal.",
                    &["i will never forgive you", "for this betrayal"],
                    95.3,
                    98.1,
                    Some(OrphanEdge::End),
                ),
                line(
                    "Mara",
                    "We can still win this fight together.",
                    &["we can still win this", "fight together"],
                    140.2,
                    142.8,
                    None,
                ),
            ],
            chatter: vec![
                line("Guard", "Where did you put the keys?", &["where did you put the keys"], 20.0, 21.6, None),
                line("Ilan", "Over there.", &["over there"], 120.0, 121.0, None),
            ],
            min_shot_s: 1.5,
            max_shot_s: 5.0,
        }
    }

    pub fn total_frames(&self) -> u32 {
        (self.duration_s * self.fps as f64).round() as u32
    }

    /// Cut positions in frames: random shot lengths, cleared around each
    /// dialogue, plus a cut placing a brief shot at the requested edge.
    pub fn cut_frames(&self) -> Vec<u32> {
        let fps = self.fps as f64;
        let f = |t: f64| (t * fps).round() as u32;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let total = self.total_frames();
        let mut cuts = Vec::new();
        let mut t = 0u32;
        loop {
            t += f(rng.random_range(self.min_shot_s..self.max_shot_s));
            if t + f(self.min_shot_s) >= total {
                break;
            }
            cuts.push(t);
        }
        for d in &self.dialogues {
            let (lo, hi) = (f(d.start_s - self.min_shot_s - 0.5), f(d.end_s + self.min_shot_s + 0.5));
            cuts.retain(|&c| c < lo || c > hi);
            match d.orphan {
                Some(OrphanEdge::Start) => cuts.push(f(d.start_s + 0.2)),
                Some(OrphanEdge::End) => cuts.push(f(d.end_s - 0.2)),
                None => {}
            }
        }
        cuts.sort_unstable();
        cuts.dedup();
        cuts
    }

    /// Speech-like bursts over a faint hum.
    pub fn audio_samples(&self) -> Vec<f32> {
        let sr = SAMPLE_RATE as f64;
        let n = (self.duration_s * sr).round() as usize;
        let tau = std::f64::consts::TAU;
        let mut out: Vec<f32> = (0..n).map(|i| (0.03 * (tau * 90.0 * i as f64 / sr).sin()) as f32).collect();
        for (k, d) in self.dialogues.iter().chain(&self.chatter).enumerate() {
            let pitch = 180.0 + 40.0 * (k % 4) as f64;
            let (a, b) = ((d.start_s * sr) as usize, ((d.end_s * sr) as usize).min(n));
            let ramp = 0.01 * sr;
            for (i, s) in out[a..b].iter_mut().enumerate() {
                let t = i as f64 / sr;
                let edge = ((i as f64).min((b - a - 1 - i) as f64) / ramp).min(1.0);
                let syllables = 0.6 + 0.4 * (tau * 4.0 * t).sin().abs();
                let voice = (tau * pitch * t).sin() + 0.5 * (tau * 2.0 * pitch * t).sin();
                *s += (0.2 * edge * syllables * voice) as f32;
            }
        }
        out
    }

    /// Transcript segments and speech regions as the mock recogniser and
    /// voice detector report them.
    pub fn cue_sheet(&self) -> serde_json::Value {
        let mut all: Vec<&Dialogue> = self.dialogues.iter().chain(&self.chatter).collect();
        all.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        let mut segments = Vec::new();
        let mut speech = Vec::new();
        for d in all {
            let n = d.heard.len().max(1) as f64;
            let step = (d.end_s - d.start_s) / n;
            for (i, text) in d.heard.iter().enumerate() {
                let s = d.start_s + i as f64 * step;
                segments.push(TimedText {
                    interval: Interval::new(s, s + step).expect("ordered"),
                    text: text.clone(),
                });
            }
            speech.push(Interval::new(d.start_s, d.end_s).expect("ordered"));
        }
        serde_json::json!({ "segments": segments, "speech": speech })
    }
}

const SYNOPSIS: &str = "Mara guards the last lantern on the mountain road. \
A storm cuts the valley off from the coast. \
Her brother Ilan returns after years at sea. \
He carries a map that everyone in the valley wants. \
Soldiers arrive at the gate before dawn. \
Mara learns that Ilan sold the lantern's secret. \
The siblings flee through the flooded pass. \
Together they must relight the lantern before the ships are lost.";

/// Paths of a generated project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub root: PathBuf,
    pub movie: PathBuf,
    pub config: PathBuf,
    pub adapters: PathBuf,
    pub cue_dir: PathBuf,
    pub spec: FixtureSpec,
    pub cut_times_s: Vec<f64>,
}

/// Renders the fixture movie into `out`, returning cut times in seconds.
pub fn write_fixture_movie(engine: &Engine, spec: &FixtureSpec, out: &Path) -> Result<Vec<f64>> {
    let cuts = spec.cut_frames();
    let shots = shots_from_cuts(&cuts, spec.total_frames());
    let wav = out.with_extension("wav");
    write_wav_mono16(&wav, &spec.audio_samples(), SAMPLE_RATE)?;
    let res = write_color_video(engine, &shots, spec.fps, (spec.width, spec.height), Some(&wav), out);
    let _ = std::fs::remove_file(&wav);
    res?;
    Ok(cuts.iter().map(|&c| c as f64 / spec.fps as f64).collect())
}

/// Creates a runnable project in `root`. When `movie` is given it is copied
/// in instead of rendering a fresh one.
pub fn create_project(engine: &Engine, root: &Path, spec: &FixtureSpec, movie: Option<&Path>) -> Result<Fixture> {
    let source = root.join("source");
    std::fs::create_dir_all(&source).map_err(|e| Error::io(&source, e))?;
    let movie_path = source.join(format!("{MOVIE_STEM}.mp4"));
    match movie {
        Some(m) => {
            std::fs::copy(m, &movie_path).map_err(|e| Error::io(m, e))?;
        }
        None => {
            write_fixture_movie(engine, spec, &movie_path)?;
        }
    }
    let cut_times_s: Vec<f64> = spec.cut_frames().iter().map(|&c| c as f64 / spec.fps as f64).collect();

    let mut quotes: Vec<String> = spec.dialogues.iter().map(|d| format!("{}: {}", d.speaker, d.text)).collect();
    quotes.push("Guard: No.".into());
    quotes.push("Ilan: Over there, by the old gate near the water.".into());
    quotes.push("Mara: The ships come in from the north every spring, carrying salt and wool and news.".into());
    write_json(
        &source.join("metadata.json"),
        &serde_json::json!({
            "title": "The Lantern Road",
            "synopsis": SYNOPSIS,
            "quotes": quotes,
            "genres": ["Adventure", "Drama", "Action"],
            "directors": ["A. Fixture"],
            "release_date": "2024-05-01",
            "color_info": "Color",
        }),
    )?;

    let cue_dir = root.join("cues");
    write_json(&cue_dir.join(format!("{MOVIE_STEM}.cues.json")), &spec.cue_sheet())?;
    let specs: BTreeMap<String, EndpointSpec> = AdapterKind::ALL
        .iter()
        .map(|k| (k.as_str().to_string(), EndpointSpec::mock(Some(PathBuf::from("cues")))))
        .collect();
    let adapters = root.join("adapters.json");
    write_json(&adapters, &specs)?;

    let cfg = ProjectConfig {
        movie_path: PathBuf::from("source").join(format!("{MOVIE_STEM}.mp4")),
        project_name: "lantern-road".into(),
        external_movie_id: "fixture-0001".into(),
        metadata_path: PathBuf::from("source/metadata.json"),
        n_sc_target: 8,
        n_qc_target: 3,
        seed: spec.seed,
        ..ProjectConfig::default()
    };
    let config = root.join("config.json");
    save_config(&cfg, &config)?;
    write_json(&root.join("source").join("ground_truth.json"), &serde_json::json!({
        "cuts_s": cut_times_s,
        "dialogues": spec.dialogues,
    }))?;
    Ok(Fixture {
        root: root.to_path_buf(),
        movie: movie_path,
        config,
        adapters,
        cue_dir,
        spec: spec.clone(),
        cut_times_s,
    })
}
