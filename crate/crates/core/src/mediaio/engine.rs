use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::sync::FairSemaphore;
use crate::{Error, Result};

use super::Interval;

pub const ENGINE_ENV: &str = "TRAILFORGE_MEDIA_ENGINE";

/// Sample rate used for every decoded or synthesized audio buffer.
pub const SAMPLE_RATE: u32 = 48_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaInfo {
    pub duration_s: f64,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub has_audio: bool,
    pub sample_rate_hz: Option<u32>,
    #[serde(default)]
    pub audio_channels: Option<u32>,
}

impl MediaInfo {
    pub fn frame_s(&self) -> f64 {
        1.0 / self.fps
    }
}

/// Handle on the external FFmpeg-compatible transcoder.
///
/// Cloning is cheap; clones share the subprocess cap.
#[derive(Debug, Clone)]
pub struct Engine {
    binary: PathBuf,
    slots: Arc<FairSemaphore>,
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl Engine {
    pub fn new(binary: impl Into<PathBuf>, parallelism: Option<usize>) -> Self {
        Self {
            binary: binary.into(),
            slots: Arc::new(FairSemaphore::new(parallelism.unwrap_or_else(default_parallelism))),
        }
    }

    /// Picks the binary from the explicit override, then `TRAILFORGE_MEDIA_ENGINE`,
    /// then `ffmpeg` on `PATH`, and checks that it runs.
    pub fn discover(explicit: Option<&Path>, parallelism: Option<usize>) -> Result<Self> {
        let binary = explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(ENGINE_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("ffmpeg"));
        let engine = Self::new(binary, parallelism);
        engine.version()?;
        Ok(engine)
    }

    pub fn binary(&self) -> &Path {
        &self.binary
    }

    pub fn parallelism(&self) -> usize {
        self.slots.permits()
    }

    pub fn version(&self) -> Result<String> {
        let out = self.spawn_output("version", &["-version".to_string()])?;
        let text = String::from_utf8_lossy(&out.stdout);
        text.lines()
            .next()
            .filter(|l| l.contains("version"))
            .map(str::to_string)
            .ok_or_else(|| Error::Engine {
                op: "version",
                message: format!("{} does not look like a media engine", self.binary.display()),
            })
    }

    fn command(&self) -> Command {
        let mut cmd = Command::new(&self.binary);
        cmd.args(["-hide_banner", "-nostdin"]);
        cmd
    }

    fn spawn_output(&self, op: &'static str, args: &[String]) -> Result<std::process::Output> {
        let _slot = self.slots.acquire();
        let mut cmd = Command::new(&self.binary);
        cmd.args(args);
        cmd.stdin(Stdio::null());
        tracing::trace!(?args, "engine {op}");
        cmd.output().map_err(|e| Error::Engine {
            op,
            message: format!("cannot start {}: {e}", self.binary.display()),
        })
    }

    /// Runs a job to completion, turning a non-zero exit into an error that
    /// carries the tail of stderr.
    pub(crate) fn run(&self, op: &'static str, args: &[String]) -> Result<Vec<u8>> {
        let mut full = vec!["-hide_banner".to_string(), "-nostdin".into(), "-y".into()];
        full.extend(args.iter().cloned());
        let out = self.spawn_output(op, &full)?;
        if !out.status.success() {
            return Err(Error::Engine {
                op,
                message: stderr_tail(&out.stderr),
            });
        }
        Ok(out.stdout)
    }

    /// Streams stdout of a job in fixed-size records to `sink`. A short
    /// trailing record is discarded.
    pub(crate) fn stream_records(
        &self,
        op: &'static str,
        args: &[String],
        record_len: usize,
        mut sink: impl FnMut(&[u8]) -> Result<()>,
    ) -> Result<()> {
        let _slot = self.slots.acquire();
        let mut cmd = self.command();
        cmd.args(args)
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        let mut child = cmd.spawn().map_err(|e| Error::Engine {
            op,
            message: format!("cannot start {}: {e}", self.binary.display()),
        })?;
        let mut stderr = child.stderr.take().expect("piped");
        let err_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf);
            buf
        });
        let mut stdout = child.stdout.take().expect("piped");
        let mut record = vec![0u8; record_len];
        let mut result = Ok(());
        loop {
            match read_full(&mut stdout, &mut record) {
                Ok(true) => {
                    if let Err(e) = sink(&record) {
                        result = Err(e);
                        break;
                    }
                }
                Ok(false) => break,
                Err(e) => {
                    result = Err(Error::Engine {
                        op,
                        message: format!("reading engine output: {e}"),
                    });
                    break;
                }
            }
        }
        drop(stdout);
        let status = child.wait().map_err(|e| Error::Engine {
            op,
            message: e.to_string(),
        })?;
        let err = err_reader.join().unwrap_or_default();
        result?;
        if !status.success() {
            return Err(Error::Engine {
                op,
                message: stderr_tail(&err),
            });
        }
        Ok(())
    }

    pub fn probe(&self, path: &Path) -> Result<MediaInfo> {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such media file"),
            ));
        }
        let mut args = vec!["-hide_banner".to_string(), "-nostdin".into(), "-i".into()];
        args.push(path_arg(path));
        // without an output the engine exits non-zero after printing the
        // stream summary, which is all we want here
        let out = self.spawn_output("probe", &args)?;
        parse_probe(&String::from_utf8_lossy(&out.stderr))
            .map_err(|m| Error::Engine {
                op: "probe",
                message: format!("{}: {m}", path.display()),
            })
    }

    /// Exact number of video frames: one framemd5 line per remuxed packet.
    pub fn video_frame_count(&self, path: &Path) -> Result<u64> {
        let args = vec![
            "-hide_banner".to_string(),
            "-nostdin".into(),
            "-loglevel".into(),
            "error".into(),
            "-i".into(),
            path_arg(path),
            "-map".into(),
            "0:v:0".into(),
            "-c".into(),
            "copy".into(),
            "-f".into(),
            "framemd5".into(),
            "-".into(),
        ];
        let out = self.spawn_output("frame-count", &args)?;
        if !out.status.success() {
            return Err(Error::Engine {
                op: "frame-count",
                message: stderr_tail(&out.stderr),
            });
        }
        let n = String::from_utf8_lossy(&out.stdout)
            .lines()
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .count() as u64;
        if n == 0 {
            return Err(Error::Engine {
                op: "frame-count",
                message: format!("no video frames in {}", path.display()),
            });
        }
        Ok(n)
    }

    /// Duration of the video stream, derived from its frame count.
    pub fn video_duration(&self, path: &Path) -> Result<(MediaInfo, f64)> {
        let info = self.probe(path)?;
        let frames = self.video_frame_count(path)?;
        let d = frames as f64 / info.fps;
        Ok((info, d))
    }

    /// Decodes video as packed RGB24 at `width`x`height`, one callback per
    /// frame, optionally restricted to a window of the source.
    pub fn decode_rgb(
        &self,
        path: &Path,
        window: Option<Interval>,
        width: u32,
        height: u32,
        mut on_frame: impl FnMut(&[u8]) -> Result<()>,
    ) -> Result<()> {
        let mut args = Vec::new();
        if let Some(w) = window {
            args.extend(["-ss".to_string(), secs(w.start())]);
        }
        args.extend(["-i".to_string(), path_arg(path)]);
        if let Some(w) = window {
            args.extend(["-t".to_string(), secs(w.len())]);
        }
        args.extend([
            "-map".to_string(),
            "0:v:0".into(),
            "-vf".into(),
            format!("scale={width}:{height}:flags=area"),
            "-f".into(),
            "rawvideo".into(),
            "-pix_fmt".into(),
            "rgb24".into(),
            "-loglevel".into(),
            "error".into(),
            "-".into(),
        ]);
        self.stream_records("decode-video", &args, (width * height * 3) as usize, |f| on_frame(f))
    }

    /// Decodes audio to mono linear PCM at [`SAMPLE_RATE`], scaled to [-1, 1).
    pub fn decode_pcm(&self, path: &Path, window: Option<Interval>) -> Result<Vec<f32>> {
        let mut args = Vec::new();
        if let Some(w) = window {
            args.extend(["-ss".to_string(), secs(w.start())]);
        }
        args.extend(["-i".to_string(), path_arg(path)]);
        if let Some(w) = window {
            args.extend(["-t".to_string(), secs(w.len())]);
        }
        args.extend([
            "-map".to_string(),
            "0:a:0".into(),
            "-ac".into(),
            "1".into(),
            "-ar".into(),
            SAMPLE_RATE.to_string(),
            "-f".into(),
            "s16le".into(),
            "-loglevel".into(),
            "error".into(),
            "-".into(),
        ]);
        let mut samples = Vec::new();
        self.stream_records("decode-audio", &args, 2, |b| {
            samples.push(i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0);
            Ok(())
        })?;
        Ok(samples)
    }
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => return Ok(false),
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

pub(crate) fn path_arg(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

pub(crate) fn secs(s: f64) -> String {
    format!("{s:.6}")
}

fn stderr_tail(stderr: &[u8]) -> String {
    let text = String::from_utf8_lossy(stderr);
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    lines[lines.len().saturating_sub(6)..].join(" | ")
}

/// Channel count of a layout name such as `mono`, `stereo`, `5.1(side)` or `3 channels`.
fn layout_channels(layout: &str) -> Option<u32> {
    let l = layout.trim();
    match l {
        "mono" => return Some(1),
        "stereo" => return Some(2),
        _ => {}
    }
    if let Some(n) = l.strip_suffix(" channels") {
        return n.parse().ok();
    }
    let base = l.split('(').next()?;
    let (a, b) = base.split_once('.')?;
    Some(a.parse::<u32>().ok()? + b.parse::<u32>().ok()?)
}

/// Parses the stream summary the engine prints for `-i <file>`.
pub(crate) fn parse_probe(text: &str) -> std::result::Result<MediaInfo, String> {
    static DURATION: OnceLock<Regex> = OnceLock::new();
    static VIDEO: OnceLock<Regex> = OnceLock::new();
    static AUDIO: OnceLock<Regex> = OnceLock::new();
    let duration_re =
        DURATION.get_or_init(|| Regex::new(r"Duration: (\d+):(\d{2}):(\d{2}(?:\.\d+)?)").unwrap());
    let video_re = VIDEO.get_or_init(|| {
        Regex::new(r"Stream #\d+:\d+.*?: Video: .*?, (\d{2,5})x(\d{2,5})[ ,].*?([\d.]+) (?:fps|tbr)").unwrap()
    });
    let audio_re = AUDIO.get_or_init(|| Regex::new(r"Stream #\d+:\d+.*?: Audio: .*?(\d+) Hz(?:, ([^,\n]+))?").unwrap());

    if text.contains("Invalid data found") || text.contains("No such file") {
        return Err("unreadable or corrupt media".into());
    }
    let d = duration_re
        .captures(text)
        .ok_or_else(|| "no duration in stream summary".to_string())?;
    let duration_s = d[1].parse::<f64>().unwrap() * 3600.0
        + d[2].parse::<f64>().unwrap() * 60.0
        + d[3].parse::<f64>().unwrap();
    if duration_s <= 0.0 {
        return Err("zero-duration stream".into());
    }
    let v = video_re
        .captures(text)
        .ok_or_else(|| "no video stream".to_string())?;
    let fps: f64 = v[3].parse().map_err(|_| "bad frame rate".to_string())?;
    if fps <= 0.0 {
        return Err("bad frame rate".into());
    }
    let audio = audio_re.captures(text);
    Ok(MediaInfo {
        duration_s,
        fps,
        width: v[1].parse().unwrap(),
        height: v[2].parse().unwrap(),
        has_audio: audio.is_some(),
        sample_rate_hz: audio.as_ref().and_then(|a| a[1].parse().ok()),
        audio_channels: audio.as_ref().and_then(|a| a.get(2)).and_then(|l| layout_channels(l.as_str())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUMMARY: &str = r#"Input #0, mov,mp4,m4a,3gp,3g2,mj2, from 'x.mp4':
  Metadata:
    major_brand     : isom
  Duration: 00:00:10.02, start: 0.000000, bitrate: 61 kb/s
  Stream #0:0[0x1](und): Video: h264 (High) (avc1 / 0x31637661), yuv420p(progressive), 320x240 [SAR 1:1 DAR 4:3], 26 kb/s, 25 fps, 25 tbr, 12800 tbn (default)
  Stream #0:1[0x2](und): Audio: aac (LC) (mp4a / 0x6134706D), 48000 Hz, stereo, fltp, 2 kb/s (default)
At least one output file must be specified"#;

    #[test]
    fn parses_summary() {
        let info = parse_probe(SUMMARY).unwrap();
        assert!((info.duration_s - 10.02).abs() < 1e-9);
        assert_eq!((info.width, info.height), (320, 240));
        assert_eq!(info.fps, 25.0);
        assert!(info.has_audio);
        assert_eq!(info.sample_rate_hz, Some(48000));
        assert_eq!(info.audio_channels, Some(2));
    }

    #[test]
    fn video_only() {
        let text: String = SUMMARY.lines().filter(|l| !l.contains("Audio")).collect::<Vec<_>>().join("\n");
        let info = parse_probe(&text).unwrap();
        assert!(!info.has_audio);
        assert_eq!(info.sample_rate_hz, None);
    }

    #[test]
    fn zero_duration() {
        let text = SUMMARY.replace("00:00:10.02", "00:00:00.00");
        assert!(parse_probe(&text).is_err());
    }

    #[test]
    fn corrupt() {
        assert!(parse_probe("x.mp4: Invalid data found when processing input").is_err());
    }
}
