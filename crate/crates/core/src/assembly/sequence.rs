use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clips::{write_json, QuoteClip, StandardClip};
use crate::mediaio::{concat_with_fades, ConcatItem, Engine, Interval};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClipKind {
    #[serde(rename = "SC")]
    Sc,
    #[serde(rename = "QC")]
    Qc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceItem {
    pub kind: ClipKind,
    /// Position among clips of the same kind.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SequencePattern {
    pub items: Vec<SequenceItem>,
}

impl SequencePattern {
    pub fn count(&self, kind: ClipKind) -> usize {
        self.items.iter().filter(|i| i.kind == kind).count()
    }
}

impl fmt::Display for SequencePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tags: Vec<&str> = self
            .items
            .iter()
            .map(|i| match i.kind {
                ClipKind::Sc => "SC",
                ClipKind::Qc => "QC",
            })
            .collect();
        f.write_str(&tags.join(","))
    }
}

/// Number of SCs after which each QC goes (1-based, ascending).
///
/// QC `j` nominally follows SC `round(j * n_sc / (n_qc + 1))`, rounding
/// halves up. Positions are clamped to `[1, n_sc]`, collisions push right,
/// and a backward pass pulls overflow back under `n_sc`. With more QCs than
/// SCs, strictness is impossible and QCs share slots.
pub fn qc_positions(n_sc: usize, n_qc: usize) -> Result<Vec<usize>> {
    if n_qc == 0 {
        return Ok(Vec::new());
    }
    if n_sc == 0 {
        return Err(Error::invalid("quote clips need at least one standard clip to sit between"));
    }
    let den = 2 * (n_qc + 1);
    let mut pos: Vec<usize> = (1..=n_qc)
        .map(|j| ((2 * j * n_sc + n_qc + 1) / den).clamp(1, n_sc))
        .collect();
    let strict = n_qc <= n_sc;
    for j in 1..n_qc {
        let floor = if strict { pos[j - 1] + 1 } else { pos[j - 1] };
        pos[j] = pos[j].max(floor);
    }
    if strict {
        let mut cap = n_sc;
        for p in pos.iter_mut().rev() {
            *p = (*p).min(cap);
            cap = p.saturating_sub(1);
        }
    } else {
        pos.iter_mut().for_each(|p| *p = (*p).min(n_sc));
    }
    Ok(pos)
}

pub fn plan_sequence(n_sc: usize, n_qc: usize) -> Result<SequencePattern> {
    let pos = qc_positions(n_sc, n_qc)?;
    let mut items = Vec::with_capacity(n_sc + n_qc);
    let mut next_qc = 0;
    for sc in 0..n_sc {
        items.push(SequenceItem {
            kind: ClipKind::Sc,
            index: sc,
        });
        while next_qc < pos.len() && pos[next_qc] == sc + 1 {
            items.push(SequenceItem {
                kind: ClipKind::Qc,
                index: next_qc,
            });
            next_qc += 1;
        }
    }
    Ok(SequencePattern { items })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Qc,
    Voice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimestampEntry {
    pub kind: EntryKind,
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
}

impl TimestampEntry {
    pub fn interval(&self) -> Result<Interval> {
        Interval::new(self.start_s, self.end_s)
    }
}

/// Positions of dialogue and narration on the trailer timeline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimestampLog {
    pub trailer_duration_s: f64,
    pub entries: Vec<TimestampEntry>,
}

impl TimestampLog {
    pub fn intervals(&self, kind: EntryKind) -> Vec<Interval> {
        self.entries
            .iter()
            .filter(|e| e.kind == kind)
            .filter_map(|e| e.interval().ok())
            .collect()
    }

    pub fn sort(&mut self) {
        self.entries.sort_by(|a, b| {
            a.start_s
                .total_cmp(&b.start_s)
                .then(a.kind.cmp(&b.kind))
                .then(a.index.cmp(&b.index))
        });
    }

    /// Sorted, within the trailer, and non-overlapping within each kind.
    pub fn validate(&self) -> Result<()> {
        if !(self.trailer_duration_s.is_finite() && self.trailer_duration_s >= 0.0) {
            return Err(Error::invalid("trailer duration must be finite and non-negative"));
        }
        for w in self.entries.windows(2) {
            if w[1].start_s < w[0].start_s {
                return Err(Error::invalid("timestamp entries are not sorted by start"));
            }
        }
        for kind in [EntryKind::Qc, EntryKind::Voice] {
            let spans = self.intervals(kind);
            if spans.len() != self.entries.iter().filter(|e| e.kind == kind).count() {
                return Err(Error::invalid("timestamp entry with end before start"));
            }
            if spans.windows(2).any(|w| w[1].start() < w[0].end()) {
                return Err(Error::invalid(format!("{kind:?} entries overlap")));
            }
        }
        if let Some(e) = self.entries.iter().find(|e| e.start_s < 0.0 || e.end_s > self.trailer_duration_s + 1e-6) {
            return Err(Error::invalid(format!(
                "entry [{}, {}] outside the {} s trailer",
                e.start_s, e.end_s, self.trailer_duration_s
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let log: TimestampLog = serde_json::from_str(&text)?;
        log.validate()?;
        Ok(log)
    }

    /// Writes sorted entries with times rounded to microseconds.
    pub fn save(&self, path: &Path) -> Result<()> {
        let r = |x: f64| (x * 1e6).round() / 1e6;
        let mut log = self.clone();
        log.trailer_duration_s = r(log.trailer_duration_s);
        for e in &mut log.entries {
            e.start_s = r(e.start_s);
            e.end_s = r(e.end_s);
        }
        log.sort();
        write_json(path, &log)
    }
}

/// Concatenates the clips in `pattern` order into `out` and logs where each
/// QC lands. Standard clips must already be in source-timestamp order.
pub fn assemble_visual(
    engine: &Engine,
    root: &Path,
    pattern: &SequencePattern,
    standard: &[StandardClip],
    quotes: &[QuoteClip],
    out: &Path,
) -> Result<TimestampLog> {
    if pattern.items.is_empty() {
        return Err(Error::invalid("empty sequence pattern"));
    }
    let files: Vec<PathBuf> = pattern
        .items
        .iter()
        .map(|it| {
            let file = match it.kind {
                ClipKind::Sc => standard.get(it.index).map(|c| &c.file),
                ClipKind::Qc => quotes.get(it.index).map(|c| &c.file),
            };
            file.map(|f| root.join(f))
                .ok_or_else(|| Error::invalid(format!("pattern references missing {:?} clip {}", it.kind, it.index)))
        })
        .collect::<Result<_>>()?;
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let items: Vec<ConcatItem> = files.into_iter().map(ConcatItem::plain).collect();
    let durations = concat_with_fades(engine, &items, 0.0, 0.0, out)?;
    Ok(log_from_durations(pattern, &durations))
}

/// Trailer-timeline intervals of each QC given per-item clip durations.
pub fn log_from_durations(pattern: &SequencePattern, durations: &[f64]) -> TimestampLog {
    let mut t = 0.0;
    let mut entries = Vec::new();
    for (it, &d) in pattern.items.iter().zip(durations) {
        if it.kind == ClipKind::Qc {
            entries.push(TimestampEntry {
                kind: EntryKind::Qc,
                index: it.index,
                start_s: t,
                end_s: t + d,
            });
        }
        t += d;
    }
    TimestampLog {
        trailer_duration_s: t,
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(p: &SequencePattern) -> String {
        p.to_string()
    }

    #[test]
    fn known_patterns() {
        assert_eq!(tags(&plan_sequence(4, 3).unwrap()), "SC,QC,SC,QC,SC,QC,SC");
        assert_eq!(tags(&plan_sequence(3, 0).unwrap()), "SC,SC,SC");
        assert_eq!(tags(&plan_sequence(5, 2).unwrap()), "SC,SC,QC,SC,QC,SC,SC");
        assert_eq!(tags(&plan_sequence(2, 1).unwrap()), "SC,QC,SC");
        assert!(plan_sequence(0, 1).is_err());
        assert_eq!(tags(&plan_sequence(0, 0).unwrap()), "");
    }

    #[test]
    fn more_quotes_than_scenes_cluster() {
        let p = plan_sequence(1, 3).unwrap();
        assert_eq!(tags(&p), "SC,QC,QC,QC");
        let p = plan_sequence(2, 4).unwrap();
        assert_eq!(p.count(ClipKind::Qc), 4);
        assert_eq!(p.count(ClipKind::Sc), 2);
    }

    #[test]
    fn indices_in_order() {
        let p = plan_sequence(7, 3).unwrap();
        let sc: Vec<usize> = p.items.iter().filter(|i| i.kind == ClipKind::Sc).map(|i| i.index).collect();
        let qc: Vec<usize> = p.items.iter().filter(|i| i.kind == ClipKind::Qc).map(|i| i.index).collect();
        assert_eq!(sc, (0..7).collect::<Vec<_>>());
        assert_eq!(qc, vec![0, 1, 2]);
    }

    #[test]
    fn additive_log() {
        let p = plan_sequence(2, 1).unwrap();
        let log = log_from_durations(&p, &[3.0, 2.0, 3.0]);
        assert_eq!(log.trailer_duration_s, 8.0);
        assert_eq!(log.entries.len(), 1);
        assert_eq!((log.entries[0].start_s, log.entries[0].end_s), (3.0, 5.0));
        let log = log_from_durations(&plan_sequence(2, 0).unwrap(), &[3.0, 4.0]);
        assert!(log.entries.is_empty());
        assert_eq!(log.trailer_duration_s, 7.0);
    }

    #[test]
    fn log_roundtrip_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let log = TimestampLog {
            trailer_duration_s: 20.0,
            entries: vec![
                TimestampEntry {
                    kind: EntryKind::Voice,
                    index: 0,
                    start_s: 10.5,
                    end_s: 12.0,
                },
                TimestampEntry {
                    kind: EntryKind::Qc,
                    index: 0,
                    start_s: 3.0000000001,
                    end_s: 5.0,
                },
            ],
        };
        let path = dir.path().join("timestamps.json");
        log.save(&path).unwrap();
        let back = TimestampLog::load(&path).unwrap();
        assert_eq!(back.entries[0].kind, EntryKind::Qc);
        assert_eq!(back.entries[0].start_s, 3.0);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"kind\": \"qc\""));
        assert!(text.contains("\"trailer_duration_s\""));
    }

    #[test]
    fn overlapping_entries_rejected() {
        let e = |s, t| TimestampEntry {
            kind: EntryKind::Qc,
            index: 0,
            start_s: s,
            end_s: t,
        };
        let log = TimestampLog {
            trailer_duration_s: 10.0,
            entries: vec![e(1.0, 3.0), e(2.0, 4.0)],
        };
        assert!(log.validate().is_err());
    }
}
