//! Everything that touches media files: the engine subprocess wrapper,
//! the frame-sampling plan, cutting and joining clips, and the audio
//! measurement and mixing math.

mod audio;
mod edit;
mod engine;
mod envelope;
mod interval;
mod plan;

pub use audio::{
    apply_fades, extract_audio_wav, limit, loop_with_crossfade, measure_rms, mix_and_mux, mix_tracks, rms_dbfs,
    write_wav_mono16, MixOptions, MixTrack, LIMITER_CEILING_DB, RMS_FLOOR_DBFS,
};
pub use edit::{
    blank_video_span, concat_with_fades, cut_clip, extract_frames, frame_file_name, ConcatItem,
    FrameRecord, JPEG_QUALITY,
};
pub use engine::{Engine, MediaInfo, ENGINE_ENV, SAMPLE_RATE};
pub use envelope::{db_to_linear, GainEnvelope};
pub use interval::{check_disjoint, Interval};
pub use plan::{plan_frame_timestamps, SECONDS_PER_FRAME};
