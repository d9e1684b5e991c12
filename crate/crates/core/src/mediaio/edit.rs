use std::path::{Path, PathBuf};

use image::codecs::jpeg::JpegEncoder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::engine::{path_arg, secs, Engine, MediaInfo};
use super::interval::check_disjoint;
use super::Interval;

pub const JPEG_QUALITY: u8 = 90;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: usize,
    pub timestamp_s: f64,
    pub image_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_text: Option<bool>,
}

pub fn frame_file_name(index: usize, timestamp_s: f64) -> String {
    format!("frame_{index:06}_{}.jpg", (timestamp_s * 1000.0).round() as u64)
}

pub(crate) fn video_codec_args() -> Vec<String> {
    ["-c:v", "libx264", "-preset", "veryfast", "-crf", "18", "-pix_fmt", "yuv420p"]
        .map(String::from)
        .to_vec()
}

pub(crate) fn audio_codec_args() -> Vec<String> {
    ["-c:a", "aac", "-b:a", "160k", "-ar", "48000", "-ac", "2"]
        .map(String::from)
        .to_vec()
}

/// Mono is copied into both stereo channels at unity gain. The engine's
/// default upmix splits it at -3 dB per channel.
pub(crate) const MONO_TO_STEREO: &str = "pan=stereo|c0=c0|c1=c0";

/// Grabs one still per timestamp into `out_dir` as JPEG.
pub fn extract_frames(
    engine: &Engine,
    movie: &Path,
    timestamps: &[f64],
    out_dir: &Path,
) -> Result<Vec<FrameRecord>> {
    if timestamps.is_empty() {
        return Ok(Vec::new());
    }
    let info = engine.probe(movie)?;
    if let Some(&bad) = timestamps
        .iter()
        .find(|&&t| !(0.0..info.duration_s).contains(&t))
    {
        return Err(Error::invalid(format!(
            "timestamp {bad} outside movie duration {}",
            info.duration_s
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    timestamps
        .par_iter()
        .enumerate()
        .map(|(index, &t)| {
            let image_path = out_dir.join(frame_file_name(index, t));
            grab_frame(engine, movie, &info, t, &image_path)?;
            Ok(FrameRecord {
                index,
                timestamp_s: t,
                image_path,
                embedding: None,
                has_text: None,
            })
        })
        .collect()
}

fn grab_frame(engine: &Engine, movie: &Path, info: &MediaInfo, t: f64, out: &Path) -> Result<()> {
    let args = vec![
        "-ss".to_string(),
        secs(t),
        "-i".into(),
        path_arg(movie),
        "-frames:v".into(),
        "1".into(),
        "-f".into(),
        "rawvideo".into(),
        "-pix_fmt".into(),
        "rgb24".into(),
        "-loglevel".into(),
        "error".into(),
        "-".into(),
    ];
    let out_bytes = engine.run("extract-frame", &args)?;
    let need = (info.width * info.height * 3) as usize;
    if out_bytes.len() < need {
        return Err(Error::Engine {
            op: "extract-frame",
            message: format!("no frame decoded at {t:.3} s"),
        });
    }
    let file = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = std::io::BufWriter::new(file);
    JpegEncoder::new_with_quality(&mut w, JPEG_QUALITY)
        .encode(&out_bytes[..need], info.width, info.height, image::ExtendedColorType::Rgb8)
        .map_err(|e| Error::Engine {
            op: "extract-frame",
            message: format!("jpeg encode: {e}"),
        })
}

/// Frame-accurate re-encoded cut. The output always carries a stereo audio
/// track (silent when the source has none) so clips concatenate uniformly.
pub fn cut_clip(engine: &Engine, movie: &Path, interval: Interval, out: &Path) -> Result<PathBuf> {
    let info = engine.probe(movie)?;
    if interval.end() > info.duration_s + info.frame_s() {
        return Err(Error::invalid(format!(
            "cut [{}, {}] exceeds movie duration {}",
            interval.start(),
            interval.end(),
            info.duration_s
        )));
    }
    let mut args = vec!["-ss".to_string(), secs(interval.start()), "-i".into(), path_arg(movie)];
    if info.has_audio {
        args.extend(["-map".to_string(), "0:v:0".into(), "-map".into(), "0:a:0".into()]);
    } else {
        args.extend([
            "-f".to_string(),
            "lavfi".into(),
            "-i".into(),
            "anullsrc=r=48000:cl=stereo".into(),
            "-map".into(),
            "0:v:0".into(),
            "-map".into(),
            "1:a:0".into(),
        ]);
    }
    args.extend(["-t".to_string(), secs(interval.len())]);
    if info.audio_channels == Some(1) {
        args.extend(["-af".to_string(), MONO_TO_STEREO.into()]);
    }
    args.extend(video_codec_args());
    args.extend(audio_codec_args());
    args.push(path_arg(out));
    engine.run("cut", &args)?;
    Ok(out.to_path_buf())
}

/// Paints the given spans of `clip` solid black. Spans are in clip time; the
/// audio stream is copied untouched.
pub fn blank_video_span(engine: &Engine, clip: &Path, spans: &[Interval], out: &Path) -> Result<PathBuf> {
    check_disjoint(spans)?;
    let (info, duration) = engine.video_duration(clip)?;
    if let Some(bad) = spans.iter().find(|s| s.end() > duration + info.frame_s()) {
        return Err(Error::invalid(format!(
            "span [{}, {}] outside clip of {duration:.3} s",
            bad.start(),
            bad.end()
        )));
    }
    let mut args = vec!["-i".to_string(), path_arg(clip), "-map".into(), "0:v:0".into()];
    if info.has_audio {
        args.extend(["-map".to_string(), "0:a:0".into()]);
    }
    if !spans.is_empty() {
        // frames whose timestamps fall in [start, end), judged half a frame
        // early so timestamp rounding cannot flip a boundary frame
        let h = info.frame_s() / 2.0;
        let boxes: Vec<String> = spans
            .iter()
            .map(|s| {
                format!(
                    "drawbox=x=0:y=0:w=iw:h=ih:color=black:t=fill:enable='gte(t,{})*lt(t,{})'",
                    secs(s.start() - h),
                    secs(s.end() - h)
                )
            })
            .collect();
        args.extend(["-vf".to_string(), boxes.join(",")]);
    }
    args.extend(video_codec_args());
    if info.has_audio {
        args.extend(["-c:a".to_string(), "copy".into()]);
    }
    args.push(path_arg(out));
    engine.run("blank", &args)?;
    Ok(out.to_path_buf())
}

#[derive(Debug, Clone)]
pub struct ConcatItem {
    pub path: PathBuf,
    pub audio_fade: bool,
    pub video_fade: bool,
}

impl ConcatItem {
    pub fn plain(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            audio_fade: false,
            video_fade: false,
        }
    }
}

/// Joins clips end to end. Each segment is cut to its exact video length so
/// the output timeline is the running sum of clip durations; returns those
/// durations in order.
pub fn concat_with_fades(
    engine: &Engine,
    clips: &[ConcatItem],
    video_fade_s: f64,
    audio_fade_s: f64,
    out: &Path,
) -> Result<Vec<f64>> {
    if clips.is_empty() {
        return Err(Error::invalid("nothing to concatenate"));
    }
    let probed = clips
        .par_iter()
        .map(|c| engine.video_duration(&c.path))
        .collect::<Result<Vec<_>>>()?;
    let (first, _) = &probed[0];
    for (c, (info, _)) in clips.iter().zip(&probed) {
        if (info.width, info.height) != (first.width, first.height) {
            return Err(Error::invalid(format!(
                "{} is {}x{}, expected {}x{}",
                c.path.display(),
                info.width,
                info.height,
                first.width,
                first.height
            )));
        }
        if (info.fps - first.fps).abs() > 1e-3 {
            return Err(Error::invalid(format!(
                "{} runs at {} fps, expected {}",
                c.path.display(),
                info.fps,
                first.fps
            )));
        }
    }

    let mut args = Vec::new();
    for c in clips {
        args.extend(["-i".to_string(), path_arg(&c.path)]);
    }
    let mut graph = Vec::new();
    let mut joins = String::new();
    for (i, (c, (info, dur))) in clips.iter().zip(&probed).enumerate() {
        let d = secs(*dur);
        let mut v = format!("[{i}:v]settb=AVTB,setpts=PTS-STARTPTS");
        if c.video_fade && video_fade_s > 0.0 {
            let f = video_fade_s.min(dur / 2.0);
            v += &format!(",fade=t=in:st=0:d={},fade=t=out:st={}:d={}", secs(f), secs(dur - f), secs(f));
        }
        graph.push(format!("{v}[v{i}]"));
        let src = if info.audio_channels == Some(1) {
            format!("[{i}:a]{MONO_TO_STEREO},")
        } else if info.has_audio {
            format!("[{i}:a]")
        } else {
            format!("anullsrc=r=48000:cl=stereo,atrim=end={d},")
        };
        let mut a = format!(
            "{src}aresample=48000,aformat=sample_fmts=fltp:channel_layouts=stereo,asetpts=PTS-STARTPTS,atrim=end={d},apad=whole_dur={d}"
        );
        if c.audio_fade && audio_fade_s > 0.0 {
            let f = audio_fade_s.min(dur / 2.0);
            a += &format!(",afade=t=in:st=0:d={},afade=t=out:st={}:d={}", secs(f), secs(dur - f), secs(f));
        }
        graph.push(format!("{a}[a{i}]"));
        joins += &format!("[v{i}][a{i}]");
    }
    graph.push(format!("{joins}concat=n={}:v=1:a=1[v][a]", clips.len()));
    args.extend([
        "-filter_complex".to_string(),
        graph.join(";"),
        "-map".into(),
        "[v]".into(),
        "-map".into(),
        "[a]".into(),
        "-r".into(),
        format!("{}", first.fps),
    ]);
    args.extend(video_codec_args());
    args.extend(audio_codec_args());
    args.push(path_arg(out));
    engine.run("concat", &args)?;
    Ok(probed.into_iter().map(|(_, d)| d).collect())
}
