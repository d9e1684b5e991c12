use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Half-open span `[start_s, end_s)` on some timeline, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval")]
pub struct Interval {
    start_s: f64,
    end_s: f64,
}

#[derive(Deserialize)]
struct RawInterval {
    start_s: f64,
    end_s: f64,
}

impl TryFrom<RawInterval> for Interval {
    type Error = Error;

    fn try_from(r: RawInterval) -> Result<Self> {
        Interval::new(r.start_s, r.end_s)
    }
}

impl Interval {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self> {
        if !(start_s.is_finite() && end_s.is_finite()) {
            return Err(Error::invalid(format!("non-finite interval [{start_s}, {end_s}]")));
        }
        if start_s < 0.0 {
            return Err(Error::invalid(format!("interval starts before 0: {start_s}")));
        }
        if start_s >= end_s {
            return Err(Error::invalid(format!("empty interval [{start_s}, {end_s}]")));
        }
        Ok(Self { start_s, end_s })
    }

    pub fn start(&self) -> f64 {
        self.start_s
    }

    pub fn end(&self) -> f64 {
        self.end_s
    }

    pub fn len(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.start_s <= other.start_s && other.end_s <= self.end_s
    }

    /// True when the two spans share a stretch of positive length.
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start_s < other.end_s && other.start_s < self.end_s
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::new(self.start_s.max(other.start_s), self.end_s.min(other.end_s)).ok()
    }

    pub fn shift(&self, by: f64) -> Result<Interval> {
        Interval::new(self.start_s + by, self.end_s + by)
    }

    /// Copy with both ends rounded to the microsecond, for stable manifests.
    pub fn rounded(&self) -> Interval {
        let r = |x: f64| (x * 1e6).round() / 1e6;
        Interval {
            start_s: r(self.start_s),
            end_s: r(self.end_s),
        }
    }
}

/// Errors if any two spans overlap. Input order does not matter.
pub fn check_disjoint(spans: &[Interval]) -> Result<()> {
    let mut sorted = spans.to_vec();
    sorted.sort_by(|a, b| a.start().total_cmp(&b.start()));
    for w in sorted.windows(2) {
        if w[0].overlaps(&w[1]) {
            return Err(Error::invalid(format!(
                "overlapping spans [{}, {}] and [{}, {}]",
                w[0].start(),
                w[0].end(),
                w[1].start(),
                w[1].end()
            )));
        }
    }
    Ok(())
}
