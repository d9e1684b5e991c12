use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::mediaio::Interval;
use crate::{Error, Result};

use super::{EntryKind, TimestampLog};

pub const DEFAULT_CLEARANCE_S: f64 = 0.5;
pub const MAX_QC_GAIN_DB: f64 = 12.0;
pub const SECONDS_PER_LINE: f64 = 12.0;
pub const MIN_LINES: usize = 2;
pub const MAX_LINES: usize = 6;

const EPS: f64 = 1e-9;

/// Narration lines for a trailer of the given length.
pub fn plan_voice_count(trailer_duration_s: f64) -> Result<usize> {
    if !(trailer_duration_s > 0.0 && trailer_duration_s.is_finite()) {
        return Err(Error::invalid(format!("trailer duration {trailer_duration_s} must be positive")));
    }
    let n = (trailer_duration_s / SECONDS_PER_LINE).round();
    Ok((n as usize).clamp(MIN_LINES, MAX_LINES))
}

#[derive(Debug, Clone, Deserialize)]
pub struct VoiceTable {
    pub default: String,
    /// Voice id to the genres it serves.
    pub voices: BTreeMap<String, Vec<String>>,
}

impl VoiceTable {
    pub fn bundled() -> &'static VoiceTable {
        static T: OnceLock<VoiceTable> = OnceLock::new();
        T.get_or_init(|| serde_json::from_str(include_str!("../../data/voices.json")).expect("bundled voice table parses"))
    }

    pub fn voice_for(&self, genre: &str) -> Option<&str> {
        let g = genre.trim().to_lowercase();
        self.voices
            .iter()
            .find(|(_, gs)| gs.iter().any(|x| *x == g))
            .map(|(v, _)| v.as_str())
    }
}

/// Plurality vote over the genres' voices. Ties go to whichever tied voice
/// the earliest genre maps to; no mapped genre gives the table default.
pub fn choose_voice(genres: &[String], table: &VoiceTable) -> String {
    let mapped: Vec<&str> = genres.iter().filter_map(|g| table.voice_for(g)).collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in &mapped {
        *counts.entry(v).or_default() += 1;
    }
    let Some(&top) = counts.values().max() else {
        return table.default.clone();
    };
    mapped
        .iter()
        .find(|v| counts[*v] == top)
        .map(|v| v.to_string())
        .unwrap_or_else(|| table.default.clone())
}

/// Greedy earliest fit of each line, in order, into the trailer while
/// keeping `clearance_s` from every QC and from the previous line.
/// Returns one slot per line; `None` marks a dropped line.
pub fn place_voice_lines(log: &TimestampLog, durations: &[f64], clearance_s: f64) -> Result<Vec<Option<Interval>>> {
    if let Some(d) = durations.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(Error::invalid(format!("voice line duration {d} must be positive")));
    }
    let mut blocked: Vec<(f64, f64)> = log
        .intervals(EntryKind::Qc)
        .iter()
        .map(|q| (q.start() - clearance_s, q.end() + clearance_s))
        .collect();
    blocked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut free = Vec::new();
    let mut t = 0.0f64;
    for (a, b) in blocked {
        if a > t {
            free.push((t, a.min(log.trailer_duration_s)));
        }
        t = t.max(b);
    }
    if t < log.trailer_duration_s {
        free.push((t, log.trailer_duration_s));
    }

    let mut cursor = 0.0f64;
    let mut out = Vec::with_capacity(durations.len());
    for (i, &d) in durations.iter().enumerate() {
        let slot = free.iter().find_map(|&(a, b)| {
            let s = a.max(cursor);
            (s + d <= b + EPS).then_some(s)
        });
        match slot {
            Some(s) => {
                out.push(Some(Interval::new(s, s + d)?));
                cursor = s + d + clearance_s;
            }
            None => {
                tracing::warn!(line = i, duration = d, "voice line does not fit between quote clips; dropped");
                out.push(None);
            }
        }
    }
    Ok(out)
}

/// Gain that brings a QC to the mean (in dB) of the voice levels, limited
/// to ±12 dB.
pub fn normalize_qc_gain(voice_rms_dbfs: &[f64], qc_rms_dbfs: f64) -> Result<f64> {
    if voice_rms_dbfs.is_empty() {
        return Err(Error::invalid("no voice levels to normalize against"));
    }
    let target = voice_rms_dbfs.iter().sum::<f64>() / voice_rms_dbfs.len() as f64;
    Ok((target - qc_rms_dbfs).clamp(-MAX_QC_GAIN_DB, MAX_QC_GAIN_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::TimestampEntry;
    use proptest::prelude::*;

    fn log(duration: f64, qcs: &[(f64, f64)]) -> TimestampLog {
        TimestampLog {
            trailer_duration_s: duration,
            entries: qcs
                .iter()
                .enumerate()
                .map(|(i, &(s, e))| TimestampEntry {
                    kind: EntryKind::Qc,
                    index: i,
                    start_s: s,
                    end_s: e,
                })
                .collect(),
        }
    }

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn voice_counts() {
        assert_eq!(plan_voice_count(48.0).unwrap(), 4);
        assert_eq!(plan_voice_count(10.0).unwrap(), 2);
        assert_eq!(plan_voice_count(600.0).unwrap(), 6);
        assert!(plan_voice_count(0.0).is_err());
    }

    #[test]
    fn voice_choice() {
        let t = VoiceTable::bundled();
        let g = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(choose_voice(&g(&["Action", "Adventure", "Sci-Fi"]), t), "V1");
        assert_eq!(choose_voice(&[], t), "V3");
        assert_eq!(choose_voice(&g(&["Horror"]), t), "V5");
        assert_eq!(choose_voice(&g(&["Western", "Noir"]), t), "V3");
        // one vote each: the earliest genre's voice wins
        assert_eq!(choose_voice(&g(&["Comedy", "Horror"]), t), "V4");
        assert_eq!(choose_voice(&g(&["Polka", "Horror", "Comedy"]), t), "V5");
    }

    #[test]
    fn placement_examples() {
        let p = place_voice_lines(&log(20.0, &[(8.0, 10.0)]), &[3.0], 0.5).unwrap();
        assert_eq!(p, vec![Some(iv(0.0, 3.0))]);
        // gaps of 7.5 s and 6.5 s
        let p = place_voice_lines(&log(17.0, &[(8.0, 10.0)]), &[9.0], 0.5).unwrap();
        assert_eq!(p, vec![None]);
        let p = place_voice_lines(&log(20.0, &[(8.0, 10.0)]), &[3.0, 3.0], 0.5).unwrap();
        assert_eq!(p, vec![Some(iv(0.0, 3.0)), Some(iv(3.5, 6.5))]);
        // third line no longer fits before the QC and moves past it
        let p = place_voice_lines(&log(20.0, &[(8.0, 10.0)]), &[3.0, 3.0, 3.0], 0.5).unwrap();
        assert_eq!(p[2], Some(iv(10.5, 13.5)));
        assert!(place_voice_lines(&log(20.0, &[]), &[0.0], 0.5).is_err());
    }

    #[test]
    fn qc_gain() {
        assert_eq!(normalize_qc_gain(&[-20.0, -22.0], -27.0).unwrap(), 6.0);
        assert_eq!(normalize_qc_gain(&[-20.0, -22.0], -21.0).unwrap(), 0.0);
        assert_eq!(normalize_qc_gain(&[-21.0], -40.0).unwrap(), 12.0);
        assert_eq!(normalize_qc_gain(&[-21.0], 0.0).unwrap(), -12.0);
        assert!(normalize_qc_gain(&[], -20.0).is_err());
    }

    /// Slides each line forward in 1 ms steps from the previous line's end
    /// plus clearance until it clears every QC.
    fn simulate(log: &TimestampLog, durations: &[f64], clearance: f64) -> Vec<Option<(i64, i64)>> {
        let qcs: Vec<(i64, i64)> = log
            .intervals(EntryKind::Qc)
            .iter()
            .map(|q| ((q.start() * 1000.0).round() as i64, (q.end() * 1000.0).round() as i64))
            .collect();
        let c = (clearance * 1000.0).round() as i64;
        let total = (log.trailer_duration_s * 1000.0).round() as i64;
        let mut cursor = 0i64;
        let mut out = Vec::new();
        for &d in durations {
            let d = (d * 1000.0).round() as i64;
            let mut found = None;
            let mut s = cursor;
            while s + d <= total {
                if qcs.iter().all(|&(a, b)| s + d <= a - c || s >= b + c) {
                    found = Some((s, s + d));
                    break;
                }
                s += 1;
            }
            if let Some((_, e)) = found {
                cursor = e + c;
            }
            out.push(found);
        }
        out
    }

    proptest! {
        #[test]
        fn placement_matches_simulation(
            qc_ms in prop::collection::vec((0i64..40, 1i64..6), 0..4),
            line_ms in prop::collection::vec(1i64..10, 1..5),
        ) {
            // QCs on a 0.5 s grid, laid end to end with gaps
            let mut t = 0.0;
            let mut qcs = Vec::new();
            for (gap, len) in qc_ms {
                let s = t + gap as f64 * 0.5;
                qcs.push((s, s + len as f64 * 0.5));
                t = s + len as f64 * 0.5;
            }
            let total = t + 10.0;
            let lg = log(total, &qcs);
            let durs: Vec<f64> = line_ms.iter().map(|&l| l as f64 * 0.5).collect();
            let got = place_voice_lines(&lg, &durs, 0.5).unwrap();
            let want = simulate(&lg, &durs, 0.5);
            let got_ms: Vec<Option<(i64, i64)>> = got
                .iter()
                .map(|p| p.map(|i| ((i.start() * 1000.0).round() as i64, (i.end() * 1000.0).round() as i64)))
                .collect();
            prop_assert_eq!(&got_ms, &want);
            // every line keeps clearance from QCs and from the other lines
            let voices: Vec<Interval> = got.iter().flatten().copied().collect();
            let qcs = lg.intervals(EntryKind::Qc);
            for (i, a) in voices.iter().enumerate() {
                for b in voices[i + 1..].iter().chain(&qcs) {
                    prop_assert!(a.end() + 0.5 <= b.start() + 1e-9 || b.end() + 0.5 <= a.start() + 1e-9);
                }
            }
        }
    }
}
