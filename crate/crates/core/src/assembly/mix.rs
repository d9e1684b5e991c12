use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapters::{AdapterKind, Adapters, ComposeMusic};
use crate::mediaio::{
    loop_with_crossfade, mix_and_mux, write_wav_mono16, Engine, GainEnvelope, Interval, MixOptions, MixTrack,
    SAMPLE_RATE,
};
use crate::{Error, Result};

use super::{EntryKind, TimestampLog};

pub const DEFAULT_DUCK_DB: f64 = -12.0;
pub const DEFAULT_DUCK_RAMP_S: f64 = 0.15;
pub const MUSIC_CROSSFADE_S: f64 = 2.0;
pub const FADE_IN_S: f64 = 1.0;
pub const FADE_OUT_S: f64 = 2.0;
/// Fade on each QC's dialogue track.
pub const QC_FADE_S: f64 = 0.1;
/// Level the visual's own audio drops to under a QC, where the QC's
/// isolated dialogue takes over.
const MUTE_DB: f64 = -120.0;
const MUTE_RAMP_S: f64 = 0.01;
pub const DURATION_TOLERANCE_S: f64 = 0.1;

fn merge(spans: &[Interval], gap: f64) -> Result<Vec<Interval>> {
    let mut sorted = spans.to_vec();
    sorted.sort_by(|a, b| a.start().total_cmp(&b.start()));
    let mut out: Vec<Interval> = Vec::new();
    for s in sorted {
        match out.last_mut() {
            Some(last) if s.start() - last.end() < gap => {
                *last = Interval::new(last.start(), last.end().max(s.end()))?;
            }
            _ => out.push(s),
        }
    }
    Ok(out)
}

/// Hold `low_db` over each span with linear ramps of `ramp_s` outside it;
/// 0 dB elsewhere. Spans closer than `ramp_s` merge. Where the ramps of two
/// neighbours overlap, the curve meets at their crossing point.
fn notch_envelope(spans: &[Interval], low_db: f64, ramp_s: f64) -> Result<GainEnvelope> {
    let merged = merge(spans, ramp_s)?;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (i, s) in merged.iter().enumerate() {
        let down = s.start() - ramp_s;
        match pts.last() {
            Some(&(t, _)) if t >= down - 1e-9 => {
                // previous ramp-up still running; replace it with the crossing
                let (_, prev_end_g) = pts.pop().expect("ramp-up point");
                debug_assert_eq!(prev_end_g, 0.0);
                let prev_end = merged[i - 1].end();
                let mid = (prev_end + s.start()) / 2.0;
                let g = low_db * (1.0 - (mid - prev_end) / ramp_s);
                pts.push((mid, g));
            }
            _ => pts.push((down, 0.0)),
        }
        pts.push((s.start(), low_db));
        pts.push((s.end(), low_db));
        pts.push((s.end() + ramp_s, 0.0));
    }
    GainEnvelope::new(pts)
}

/// Music gain curve: unity outside speech, `duck_db` inside.
pub fn build_duck_envelope(speech: &[Interval], duck_db: f64, ramp_s: f64, trailer_duration_s: f64) -> Result<GainEnvelope> {
    if !(ramp_s > 0.0) {
        return Err(Error::invalid("duck ramp must be positive"));
    }
    if let Some(s) = speech.iter().find(|s| s.end() > trailer_duration_s + 1e-6) {
        return Err(Error::invalid(format!(
            "speech [{}, {}] beyond the {trailer_duration_s} s trailer",
            s.start(),
            s.end()
        )));
    }
    notch_envelope(speech, duck_db, ramp_s)
}

/// Requests trailer-length music and loops it with an equal-power
/// crossfade when the adapter returns a shorter segment. Writes
/// `dir/music.wav`.
pub fn prepare_music(
    engine: &Engine,
    adapters: &Adapters,
    brief: &str,
    duration_s: f64,
    seed: u64,
    dir: &Path,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let seg = adapters.get(AdapterKind::Music)?.call(&ComposeMusic {
        brief: brief.to_string(),
        duration_s,
        seed,
        out: dir.join("segment.wav"),
    })?;
    let pcm = engine.decode_pcm(&seg.audio, None)?;
    if pcm.is_empty() {
        return Err(Error::invalid("music adapter returned silence"));
    }
    let target = (duration_s * SAMPLE_RATE as f64).round() as usize;
    let xfade = (MUSIC_CROSSFADE_S * SAMPLE_RATE as f64) as usize;
    let looped = loop_with_crossfade(&pcm, target, xfade);
    let out = dir.join("music.wav");
    write_wav_mono16(&out, &looped, SAMPLE_RATE)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcTrack {
    pub vocals: PathBuf,
    pub gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceTrack {
    pub audio: PathBuf,
    pub gain_db: f64,
}

/// Everything the final mix needs. QC and voice tracks are indexed by the
/// `index` of their timestamp entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderPlan {
    pub visual: PathBuf,
    pub log: TimestampLog,
    pub qc: Vec<QcTrack>,
    pub voice: Vec<VoiceTrack>,
    pub music: Option<PathBuf>,
    pub sc_gain_db: f64,
    pub music_gain_db: f64,
    pub duck_db: f64,
    pub duck_ramp_s: f64,
}

/// Mixes scene audio, QC dialogue, narration and ducked music under the
/// visual and muxes the trailer. Returns the trailer's video duration.
pub fn render_final(engine: &Engine, plan: &RenderPlan, allow_missing_music: bool, out: &Path) -> Result<f64> {
    plan.log.validate()?;
    let (_, visual_s) = engine.video_duration(&plan.visual)?;
    let qc_spans = plan.log.intervals(EntryKind::Qc);
    let mut tracks = vec![MixTrack {
        audio: plan.visual.clone(),
        offset_s: 0.0,
        envelope: notch_envelope(&qc_spans, MUTE_DB, MUTE_RAMP_S)?.offset(plan.sc_gain_db),
        max_len_s: Some(visual_s),
    }];
    for e in &plan.log.entries {
        let iv = e.interval()?;
        let (audio, gain) = match e.kind {
            EntryKind::Qc => {
                let t = plan.qc.get(e.index).ok_or_else(|| Error::invalid(format!("no dialogue track for qc {}", e.index)))?;
                (t.vocals.clone(), t.gain_db)
            }
            EntryKind::Voice => {
                let t = plan
                    .voice
                    .get(e.index)
                    .ok_or_else(|| Error::invalid(format!("no audio for voice line {}", e.index)))?;
                (t.audio.clone(), t.gain_db)
            }
        };
        if iv.end() > visual_s + DURATION_TOLERANCE_S {
            return Err(Error::invalid(format!(
                "{:?} {} placed at [{}, {}] overruns the {visual_s:.3} s visual",
                e.kind,
                e.index,
                iv.start(),
                iv.end()
            )));
        }
        let envelope = match e.kind {
            EntryKind::Qc if iv.len() > 2.0 * QC_FADE_S => GainEnvelope::new(vec![
                (iv.start(), gain - 60.0),
                (iv.start() + QC_FADE_S, gain),
                (iv.end() - QC_FADE_S, gain),
                (iv.end(), gain - 60.0),
            ])?,
            _ => GainEnvelope::constant(gain),
        };
        tracks.push(MixTrack {
            audio,
            offset_s: iv.start(),
            envelope,
            max_len_s: Some(iv.len().min(visual_s - iv.start())),
        });
    }
    match &plan.music {
        Some(m) => {
            let speech: Vec<Interval> = plan.log.entries.iter().filter_map(|e| e.interval().ok()).collect();
            let duck = build_duck_envelope(&speech, plan.duck_db, plan.duck_ramp_s, visual_s + DURATION_TOLERANCE_S)?;
            tracks.push(MixTrack {
                audio: m.clone(),
                offset_s: 0.0,
                envelope: duck.offset(plan.music_gain_db),
                max_len_s: Some(visual_s),
            });
        }
        None if allow_missing_music => tracing::warn!("rendering without music"),
        None => return Err(Error::invalid("no music to mix (allow it explicitly to render without)")),
    }
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let opts = MixOptions {
        audio_fade_in_s: FADE_IN_S,
        audio_fade_out_s: FADE_OUT_S,
        video_fade_in_s: FADE_IN_S,
        video_fade_out_s: FADE_OUT_S,
    };
    mix_and_mux(engine, &plan.visual, &tracks, opts, out)?;
    let (_, got) = engine.video_duration(out)?;
    if (got - visual_s).abs() > DURATION_TOLERANCE_S {
        return Err(Error::Engine {
            op: "render",
            message: format!("trailer runs {got:.3} s against a {visual_s:.3} s visual"),
        });
    }
    Ok(got)
}
