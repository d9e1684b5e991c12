//! Hard-cut shot detection, orphan-shot spotting, and snapping clip bounds
//! to detected cuts.

mod bounds;
mod detector;

pub use bounds::{find_orphan_spans, rectify_clip_bounds, rectify_with_boundaries, Rectified, DEFAULT_ORPHAN_MAX_S};
pub use detector::{
    detect_shots, frame_score, score_frames, score_video, write_shots_sidecar, DetectorParams, ScoreTrack, Shot,
    AGGRESSIVE_THRESHOLD, DEFAULT_THRESHOLD,
};
