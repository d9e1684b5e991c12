use std::path::Path;

use trailforge::fixtures::{shot_color, shots_from_cuts, write_color_video};
use trailforge::mediaio::{
    blank_video_span, concat_with_fades, cut_clip, measure_rms, write_wav_mono16, ConcatItem, Engine, Interval,
    SAMPLE_RATE,
};

fn engine() -> Engine {
    Engine::discover(None, None).unwrap()
}

fn tone(freq: f64, secs: f64) -> Vec<f32> {
    let rate = SAMPLE_RATE as f64;
    (0..(secs * rate) as usize)
        .map(|i| 0.25 * (2.0 * std::f64::consts::PI * freq * i as f64 / rate).sin() as f32)
        .collect()
}

/// 8 s, cuts every 2 s, mono 440 Hz tone.
fn movie(e: &Engine, dir: &Path) -> std::path::PathBuf {
    let wav = dir.join("tone.wav");
    write_wav_mono16(&wav, &tone(440.0, 8.0), SAMPLE_RATE).unwrap();
    let mut shots = shots_from_cuts(&[50, 100, 150], 200);
    for (i, s) in shots.iter_mut().enumerate() {
        s.rgb = shot_color(i + 1);
    }
    let out = dir.join("movie.mp4");
    write_color_video(e, &shots, 25, (128, 72), Some(&wav), &out).unwrap();
    out
}

#[test]
fn probe_reports_channels() {
    let e = engine();
    let dir = tempfile::tempdir().unwrap();
    let m = movie(&e, dir.path());
    let info = e.probe(&m).unwrap();
    assert_eq!(info.audio_channels, Some(1));
    let clip = cut_clip(&e, &m, Interval::new(1.0, 3.0).unwrap(), &dir.path().join("c.mp4")).unwrap();
    assert_eq!(e.probe(&clip).unwrap().audio_channels, Some(2));
}

#[test]
fn mono_cut_keeps_level() {
    let e = engine();
    let dir = tempfile::tempdir().unwrap();
    let m = movie(&e, dir.path());
    let clip = cut_clip(&e, &m, Interval::new(2.0, 5.0).unwrap(), &dir.path().join("c.mp4")).unwrap();
    let src = measure_rms(&e, &m, Some(Interval::new(3.0, 4.0).unwrap())).unwrap();
    let got = measure_rms(&e, &clip, Some(Interval::new(1.0, 2.0).unwrap())).unwrap();
    assert!((src - got).abs() < 0.5, "source {src:.2} dB, clip {got:.2} dB");
    let (_, d) = e.video_duration(&clip).unwrap();
    assert!((d - 3.0).abs() < 1e-6, "{d}");
}

#[test]
fn blank_keeps_audio_and_darkens_span() {
    let e = engine();
    let dir = tempfile::tempdir().unwrap();
    let m = movie(&e, dir.path());
    let clip = cut_clip(&e, &m, Interval::new(0.0, 3.0).unwrap(), &dir.path().join("c.mp4")).unwrap();
    let span = Interval::new(2.6, 3.0).unwrap();
    let out = blank_video_span(&e, &clip, &[span], &dir.path().join("b.mp4")).unwrap();
    let (mut sum, mut n) = (0u64, 0u64);
    e.decode_rgb(&out, Some(span), 32, 18, |px| {
        sum += px.iter().map(|&v| v as u64).sum::<u64>();
        n += px.len() as u64;
        Ok(())
    })
    .unwrap();
    assert!(n > 0 && (sum as f64 / n as f64) < 2.0);
    let before = measure_rms(&e, &clip, Some(span)).unwrap();
    let after = measure_rms(&e, &out, Some(span)).unwrap();
    assert!((before - after).abs() < 0.01, "{before} vs {after}");
}

#[test]
fn concat_fills_missing_audio() {
    let e = engine();
    let dir = tempfile::tempdir().unwrap();
    let m = movie(&e, dir.path());
    let a = cut_clip(&e, &m, Interval::new(0.0, 2.0).unwrap(), &dir.path().join("a.mp4")).unwrap();
    let silent = dir.path().join("silent.mp4");
    write_color_video(&e, &shots_from_cuts(&[], 25), 25, (128, 72), None, &silent).unwrap();
    assert!(!e.probe(&silent).unwrap().has_audio);
    let out = dir.path().join("joined.mp4");
    let durs = concat_with_fades(&e, &[ConcatItem::plain(&a), ConcatItem::plain(&silent)], 0.0, 0.0, &out).unwrap();
    assert_eq!(durs.len(), 2);
    let (_, d) = e.video_duration(&out).unwrap();
    assert!((d - 3.0).abs() < 0.05, "{d}");
    let loud = measure_rms(&e, &out, Some(Interval::new(0.5, 1.5).unwrap())).unwrap();
    let quiet = measure_rms(&e, &out, Some(Interval::new(2.2, 2.8).unwrap())).unwrap();
    assert!(loud > -20.0 && quiet < -60.0, "{loud} {quiet}");
}
