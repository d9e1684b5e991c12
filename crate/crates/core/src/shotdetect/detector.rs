use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mediaio::{Engine, Interval};
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 30.0;
pub const AGGRESSIVE_THRESHOLD: f64 = 22.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Cut score on the 0-100 scale above which a new shot may open.
    pub threshold: f64,
    pub min_shot_len_s: f64,
    pub downscale_width: u32,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            min_shot_len_s: 0.3,
            downscale_width: 160,
        }
    }
}

impl DetectorParams {
    pub fn aggressive() -> Self {
        Self {
            threshold: AGGRESSIVE_THRESHOLD,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 100.0) {
            return Err(Error::invalid(format!("threshold {} not in (0, 100]", self.threshold)));
        }
        if !(self.min_shot_len_s > 0.0) {
            return Err(Error::invalid("min_shot_len_s must be > 0"));
        }
        if self.downscale_width < 2 {
            return Err(Error::invalid("downscale_width must be >= 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub interval: Interval,
    /// Score of the cut that opened this shot; 0 for the first shot.
    pub peak_score: f64,
}

/// Per-frame cut scores for a decoded sequence.
///
/// `scores[i]` compares frame `i` with frame `i - 1`; `scores[0]` is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTrack {
    pub fps: f64,
    /// Timeline position of frame 0.
    pub origin_s: f64,
    pub scores: Vec<f64>,
}

impl ScoreTrack {
    pub fn duration_s(&self) -> f64 {
        self.scores.len() as f64 / self.fps
    }

    pub fn span(&self) -> Result<Interval> {
        Interval::new(self.origin_s, self.origin_s + self.duration_s())
    }

    /// Frame indices where a cut is declared under `params`.
    pub fn cut_frames(&self, params: &DetectorParams) -> Vec<usize> {
        let mut cuts = Vec::new();
        let mut shot_start = 0usize;
        for (i, &s) in self.scores.iter().enumerate().skip(1) {
            let shot_len = (i - shot_start) as f64 / self.fps;
            // tolerate rounding when the shot length lands exactly on the minimum
            if s > params.threshold && shot_len >= params.min_shot_len_s - 1e-9 {
                cuts.push(i);
                shot_start = i;
            }
        }
        cuts
    }

    /// Shots tiling the analyzed span under `params`.
    pub fn shots(&self, params: &DetectorParams) -> Result<Vec<Shot>> {
        if self.scores.is_empty() {
            return Err(Error::invalid("no decoded frames"));
        }
        let time = |i: usize| self.origin_s + i as f64 / self.fps;
        let end = time(self.scores.len());
        let cuts = self.cut_frames(params);
        let mut shots = Vec::with_capacity(cuts.len() + 1);
        let mut start = 0usize;
        let mut peak = 0.0;
        for &c in &cuts {
            shots.push(Shot {
                interval: Interval::new(time(start), time(c))?,
                peak_score: peak,
            });
            start = c;
            peak = self.scores[c];
        }
        shots.push(Shot {
            interval: Interval::new(time(start), end)?,
            peak_score: peak,
        });
        Ok(shots)
    }
}

/// Mean absolute difference of two packed RGB frames, scaled to 0-100.
pub fn frame_score(prev: &[u8], cur: &[u8]) -> f64 {
    debug_assert_eq!(prev.len(), cur.len());
    if cur.is_empty() {
        return 0.0;
    }
    let total: u64 = prev
        .iter()
        .zip(cur)
        .map(|(&a, &b)| a.abs_diff(b) as u64)
        .sum();
    total as f64 / cur.len() as f64 * 100.0 / 255.0
}

pub fn score_frames<'a>(frames: impl IntoIterator<Item = &'a [u8]>, fps: f64, origin_s: f64) -> ScoreTrack {
    let mut scores = Vec::new();
    let mut prev: Option<&[u8]> = None;
    for f in frames {
        scores.push(prev.map_or(0.0, |p| frame_score(p, f)));
        prev = Some(f);
    }
    ScoreTrack { fps, origin_s, scores }
}

fn downscaled_size(width: u32, height: u32, target_w: u32) -> (u32, u32) {
    let w = target_w.min(width).max(2) & !1;
    let h = ((height as f64 * w as f64 / width as f64).round() as u32).max(2) & !1;
    (w, h)
}

/// Decodes `video` (or a window of it) once and scores every frame.
pub fn score_video(
    engine: &Engine,
    video: &Path,
    window: Option<Interval>,
    downscale_width: u32,
) -> Result<ScoreTrack> {
    let info = engine.probe(video)?;
    let (w, h) = downscaled_size(info.width, info.height, downscale_width);
    // snap to the frame grid so frame 0 of the track sits exactly at origin
    let window = match window {
        Some(win) => {
            let k0 = (win.start() * info.fps - 1e-6).ceil().max(0.0);
            let k1 = (win.end() * info.fps + 1e-6).floor();
            Some(Interval::new(k0 / info.fps, k1 / info.fps)?)
        }
        None => None,
    };
    let mut prev: Option<Vec<u8>> = None;
    let mut scores = Vec::new();
    engine.decode_rgb(video, window, w, h, |frame| {
        scores.push(prev.as_deref().map_or(0.0, |p| frame_score(p, frame)));
        match prev.as_mut() {
            Some(p) => p.copy_from_slice(frame),
            None => prev = Some(frame.to_vec()),
        }
        Ok(())
    })?;
    if scores.is_empty() {
        return Err(Error::Engine {
            op: "detect-shots",
            message: format!("no frames decoded from {}", video.display()),
        });
    }
    Ok(ScoreTrack {
        fps: info.fps,
        origin_s: window.map_or(0.0, |w| w.start()),
        scores,
    })
}

pub fn detect_shots(engine: &Engine, video: &Path, params: &DetectorParams) -> Result<Vec<Shot>> {
    params.validate()?;
    score_video(engine, video, None, params.downscale_width)?.shots(params)
}

/// Writes `shots_<clipname>.json` next to the clip for checkpointing.
pub fn write_shots_sidecar(dir: &Path, clip_name: &str, shots: &[Shot]) -> Result<std::path::PathBuf> {
    let path = dir.join(format!("shots_{clip_name}.json"));
    let text = serde_json::to_string_pretty(shots)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
