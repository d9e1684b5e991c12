/// Seconds of film per sampled frame.
pub const SECONDS_PER_FRAME: f64 = 9.0;

/// Timestamps for frame sampling: one frame per nine seconds of the trimmed
/// timeline, each placed at the midpoint of its slot so none lands on a trim
/// boundary. Returns an empty list when the trimmed span is shorter than one
/// slot.
pub fn plan_frame_timestamps(duration_s: f64, head_trim_frac: f64, tail_trim_frac: f64) -> Vec<f64> {
    let effective = duration_s * (1.0 - head_trim_frac - tail_trim_frac);
    if !(effective.is_finite() && effective > 0.0) {
        return Vec::new();
    }
    let count = (effective / SECONDS_PER_FRAME).floor() as usize;
    if count == 0 {
        return Vec::new();
    }
    let start = head_trim_frac * duration_s;
    let step = effective / count as f64;
    (0..count).map(|i| start + (i as f64 + 0.5) * step).collect()
}
