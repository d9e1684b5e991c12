//! Sequencing, narration planning, loudness matching, ducking and the final
//! render.

mod mix;
mod sequence;
mod voice;

pub use mix::{
    build_duck_envelope, prepare_music, render_final, QcTrack, RenderPlan, VoiceTrack, DEFAULT_DUCK_DB,
    DEFAULT_DUCK_RAMP_S, DURATION_TOLERANCE_S, FADE_IN_S, FADE_OUT_S, MUSIC_CROSSFADE_S, QC_FADE_S,
};
pub use sequence::{
    assemble_visual, log_from_durations, plan_sequence, qc_positions, ClipKind, EntryKind, SequenceItem,
    SequencePattern, TimestampEntry, TimestampLog,
};
pub use voice::{
    choose_voice, normalize_qc_gain, place_voice_lines, plan_voice_count, VoiceTable, DEFAULT_CLEARANCE_S,
    MAX_QC_GAIN_DB,
};
