use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

use super::engine::{path_arg, secs, Engine, SAMPLE_RATE};
use super::{GainEnvelope, Interval};

/// Level reported for digital silence.
pub const RMS_FLOOR_DBFS: f64 = -120.0;

/// Ceiling enforced by the mix limiter.
pub const LIMITER_CEILING_DB: f64 = -1.0;

/// RMS level in dBFS, where a full-scale square wave reads 0 dB and a
/// full-scale sine about -3.01 dB. Floors at [`RMS_FLOOR_DBFS`].
pub fn rms_dbfs(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return RMS_FLOOR_DBFS;
    }
    let sum_sq: f64 = samples.iter().map(|&s| (s as f64) * (s as f64)).sum();
    let rms = (sum_sq / samples.len() as f64).sqrt();
    if rms <= 0.0 {
        return RMS_FLOOR_DBFS;
    }
    (20.0 * rms.log10()).max(RMS_FLOOR_DBFS)
}

pub fn measure_rms(engine: &Engine, audio: &Path, interval: Option<Interval>) -> Result<f64> {
    let pcm = engine.decode_pcm(audio, interval)?;
    if pcm.is_empty() {
        return Err(Error::invalid(format!("no decodable audio in {}", audio.display())));
    }
    Ok(rms_dbfs(&pcm))
}

/// Extracts the first audio stream (or a window of it) as 48 kHz mono
/// 16-bit WAV.
pub fn extract_audio_wav(engine: &Engine, media: &Path, window: Option<Interval>, out: &Path) -> Result<()> {
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut args = Vec::new();
    if let Some(w) = window {
        args.extend(["-ss".to_string(), secs(w.start())]);
    }
    args.extend(["-i".to_string(), path_arg(media)]);
    if let Some(w) = window {
        args.extend(["-t".to_string(), secs(w.len())]);
    }
    args.extend([
        "-map".to_string(),
        "0:a:0".into(),
        "-vn".into(),
        "-ac".into(),
        "1".into(),
        "-ar".into(),
        SAMPLE_RATE.to_string(),
        "-c:a".into(),
        "pcm_s16le".into(),
        path_arg(out),
    ]);
    engine.run("extract-audio", &args).map(|_| ())
}

/// Writes 16-bit mono PCM as a canonical WAV file.
pub fn write_wav_mono16(path: &Path, samples: &[f32], sample_rate: u32) -> Result<()> {
    let data_len = (samples.len() * 2) as u32;
    let mut buf = Vec::with_capacity(44 + data_len as usize);
    buf.extend_from_slice(b"RIFF");
    buf.extend_from_slice(&(36 + data_len).to_le_bytes());
    buf.extend_from_slice(b"WAVEfmt ");
    buf.extend_from_slice(&16u32.to_le_bytes());
    buf.extend_from_slice(&1u16.to_le_bytes()); // PCM
    buf.extend_from_slice(&1u16.to_le_bytes()); // mono
    buf.extend_from_slice(&sample_rate.to_le_bytes());
    buf.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    buf.extend_from_slice(&2u16.to_le_bytes());
    buf.extend_from_slice(&16u16.to_le_bytes());
    buf.extend_from_slice(b"data");
    buf.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Peak limiter with instant attack and exponential release. Output never
/// exceeds `ceiling` in magnitude.
pub fn limit(samples: &mut [f32], ceiling: f32, release_s: f64, sample_rate: u32) {
    let release = (-1.0 / (release_s * sample_rate as f64)).exp() as f32;
    let mut gain = 1.0f32;
    for s in samples.iter_mut() {
        let mag = s.abs();
        let needed = if mag > ceiling { ceiling / mag } else { 1.0 };
        gain = if needed < gain {
            needed
        } else {
            needed - (needed - gain) * release
        };
        *s *= gain;
        if s.abs() > ceiling {
            *s = ceiling.copysign(*s);
        }
    }
}

/// Linear fade applied in place over the first `fade_in_s` and last `fade_out_s`.
pub fn apply_fades(samples: &mut [f32], fade_in_s: f64, fade_out_s: f64, sample_rate: u32) {
    let n = samples.len();
    let fin = ((fade_in_s * sample_rate as f64) as usize).min(n);
    for (i, s) in samples[..fin].iter_mut().enumerate() {
        *s *= i as f32 / fin as f32;
    }
    let fout = ((fade_out_s * sample_rate as f64) as usize).min(n);
    for i in 0..fout {
        samples[n - 1 - i] *= i as f32 / fout as f32;
    }
}

/// Repeats `segment` until it covers `target_len` samples, joining the
/// copies with an equal-power crossfade of `xfade` samples.
pub fn loop_with_crossfade(segment: &[f32], target_len: usize, xfade: usize) -> Vec<f32> {
    if segment.len() >= target_len || segment.is_empty() {
        return segment[..target_len.min(segment.len())].to_vec();
    }
    let xfade = xfade.min(segment.len() / 2);
    let mut out: Vec<f32> = segment.to_vec();
    while out.len() < target_len {
        let start = out.len() - xfade;
        for i in 0..xfade {
            let x = (i as f64 + 0.5) / xfade as f64 * std::f64::consts::FRAC_PI_2;
            let (fade_out, fade_in) = (x.cos() as f32, x.sin() as f32);
            out[start + i] = out[start + i] * fade_out + segment[i] * fade_in;
        }
        out.extend_from_slice(&segment[xfade..]);
    }
    out.truncate(target_len);
    out
}

#[derive(Debug, Clone)]
pub struct MixTrack {
    pub audio: std::path::PathBuf,
    /// Where the track starts on the output timeline.
    pub offset_s: f64,
    /// Gain curve on the output timeline.
    pub envelope: GainEnvelope,
    /// Source audio beyond this length is dropped.
    pub max_len_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MixOptions {
    pub audio_fade_in_s: f64,
    pub audio_fade_out_s: f64,
    pub video_fade_in_s: f64,
    pub video_fade_out_s: f64,
}

/// Slack allowed when checking that tracks fit within the video.
const FIT_TOLERANCE_S: f64 = 0.05;

/// Sums gain-shaped tracks into one mono bed on the video's timeline.
pub fn mix_tracks(
    decoded: &[(Vec<f32>, f64, &GainEnvelope)],
    duration_s: f64,
    sample_rate: u32,
) -> Result<Vec<f32>> {
    let len = (duration_s * sample_rate as f64).round() as usize;
    let mut bus = vec![0f32; len];
    for (i, (pcm, offset_s, env)) in decoded.iter().enumerate() {
        let track_len = pcm.len() as f64 / sample_rate as f64;
        if *offset_s < 0.0 || offset_s + track_len > duration_s + FIT_TOLERANCE_S {
            return Err(Error::invalid(format!(
                "track {i} ({track_len:.3} s at offset {offset_s:.3} s) overruns the {duration_s:.3} s video"
            )));
        }
        let first = (offset_s * sample_rate as f64).round() as usize;
        for (n, &s) in pcm.iter().enumerate() {
            let Some(slot) = bus.get_mut(first + n) else { break };
            let t = (first + n) as f64 / sample_rate as f64;
            *slot += s * env.linear_gain_at(t) as f32;
        }
    }
    Ok(bus)
}

/// Mixes `tracks` under `video` and writes the result to `out`.
pub fn mix_and_mux(
    engine: &Engine,
    video: &Path,
    tracks: &[MixTrack],
    opts: MixOptions,
    out: &Path,
) -> Result<()> {
    if !video.exists() {
        return Err(Error::invalid(format!("missing video {}", video.display())));
    }
    let (_, duration) = engine.video_duration(video)?;
    let decoded = tracks
        .iter()
        .map(|t| {
            let mut pcm = engine.decode_pcm(&t.audio, None)?;
            if let Some(max) = t.max_len_s {
                pcm.truncate((max * SAMPLE_RATE as f64).round() as usize);
            }
            Ok((pcm, t.offset_s, &t.envelope))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut bus = mix_tracks(&decoded, duration, SAMPLE_RATE)?;
    apply_fades(&mut bus, opts.audio_fade_in_s, opts.audio_fade_out_s, SAMPLE_RATE);
    let ceiling = super::db_to_linear(LIMITER_CEILING_DB) as f32;
    limit(&mut bus, ceiling, 0.05, SAMPLE_RATE);

    let wav = out.with_extension("mix.wav");
    write_wav_mono16(&wav, &bus, SAMPLE_RATE)?;

    let mut args = vec![
        "-i".to_string(),
        path_arg(video),
        "-i".into(),
        path_arg(&wav),
        "-map".into(),
        "0:v:0".into(),
        "-map".into(),
        "1:a:0".into(),
        "-af".into(),
        super::edit::MONO_TO_STEREO.into(),
    ];
    let mut vf = Vec::new();
    if opts.video_fade_in_s > 0.0 {
        vf.push(format!("fade=t=in:st=0:d={}", secs(opts.video_fade_in_s)));
    }
    if opts.video_fade_out_s > 0.0 {
        let st = (duration - opts.video_fade_out_s).max(0.0);
        vf.push(format!("fade=t=out:st={}:d={}", secs(st), secs(opts.video_fade_out_s)));
    }
    if vf.is_empty() {
        args.extend(["-c:v".to_string(), "copy".into()]);
    } else {
        args.extend(["-vf".to_string(), vf.join(",")]);
        args.extend(super::edit::video_codec_args());
    }
    args.extend(super::edit::audio_codec_args());
    args.extend(["-t".to_string(), secs(duration), path_arg(out)]);
    let res = engine.run("mux", &args);
    let _ = std::fs::remove_file(&wav);
    res.map(|_| ())
}
