use serde::{Deserialize, Serialize};

use crate::mediaio::Interval;
use crate::{Error, Result};

use super::Shot;

pub const DEFAULT_ORPHAN_MAX_S: f64 = 0.5;

const EPS: f64 = 1e-9;

/// Intervals of every shot shorter than `orphan_max_s`.
pub fn find_orphan_spans(shots: &[Shot], orphan_max_s: f64) -> Vec<Interval> {
    shots
        .iter()
        .filter(|s| s.interval.len() < orphan_max_s)
        .map(|s| s.interval)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "interval", rename_all = "snake_case")]
pub enum Rectified {
    /// Both ends sit on detected boundaries.
    Aligned(Interval),
    /// No boundary pair fit; a window of minimum length centred on the anchor.
    Fallback(Interval),
    /// Not even the fallback window fits inside the span.
    Rejected,
}

impl Rectified {
    pub fn interval(&self) -> Option<Interval> {
        match *self {
            Rectified::Aligned(iv) | Rectified::Fallback(iv) => Some(iv),
            Rectified::Rejected => None,
        }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self, Rectified::Fallback(_))
    }
}

/// Chooses clip bounds around `anchor_s` from the boundaries of `shots`
/// (every shot start plus the final end).
pub fn rectify_clip_bounds(anchor_s: f64, shots: &[Shot], min_s: f64, max_s: f64) -> Result<Rectified> {
    let (first, last) = match (shots.first(), shots.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::invalid("no shots to rectify against")),
    };
    let span = Interval::new(first.interval.start(), last.interval.end())?;
    let mut boundaries: Vec<f64> = shots.iter().map(|s| s.interval.start()).collect();
    boundaries.push(span.end());
    rectify_with_boundaries(anchor_s, &boundaries, span, min_s, max_s, |_, _| true)
}

/// Core selection rule over an explicit boundary set.
///
/// Among pairs `b_i <= anchor < b_j` with `min_s <= b_j - b_i <= max_s` that
/// `admissible` accepts, the longest wins and ties go to the earlier start.
/// Without a pair, falls back to `[anchor - min_s/2, anchor + min_s/2]`
/// clipped to `span`, rejecting when the clipped window is shorter than `min_s`.
pub fn rectify_with_boundaries(
    anchor_s: f64,
    boundaries: &[f64],
    span: Interval,
    min_s: f64,
    max_s: f64,
    admissible: impl Fn(f64, f64) -> bool,
) -> Result<Rectified> {
    if !(min_s > 0.0 && min_s < max_s) {
        return Err(Error::invalid(format!("need 0 < min ({min_s}) < max ({max_s})")));
    }
    if !span.contains(anchor_s) {
        return Err(Error::invalid(format!(
            "anchor {anchor_s} outside span [{}, {}]",
            span.start(),
            span.end()
        )));
    }
    let mut sorted = boundaries.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();

    let mut best: Option<(f64, f64)> = None;
    for &a in sorted.iter().filter(|&&b| b <= anchor_s) {
        for &b in sorted.iter().filter(|&&b| b > anchor_s) {
            let len = b - a;
            if len < min_s - EPS || len > max_s + EPS || !admissible(a, b) {
                continue;
            }
            let better = match best {
                None => true,
                Some((ba, bb)) => len > bb - ba + EPS || ((len - (bb - ba)).abs() <= EPS && a < ba),
            };
            if better {
                best = Some((a, b));
            }
        }
    }
    if let Some((a, b)) = best {
        return Ok(Rectified::Aligned(Interval::new(a, b)?));
    }
    let lo = (anchor_s - min_s / 2.0).max(span.start());
    let hi = (anchor_s + min_s / 2.0).min(span.end());
    if hi - lo < min_s - EPS {
        return Ok(Rectified::Rejected);
    }
    Ok(Rectified::Fallback(Interval::new(lo, hi)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shots_from(bounds: &[f64]) -> Vec<Shot> {
        bounds
            .windows(2)
            .map(|w| Shot {
                interval: Interval::new(w[0], w[1]).unwrap(),
                peak_score: 50.0,
            })
            .collect()
    }

    /// Enumerates every pair and keeps the first maximal one in
    /// (start, end) order.
    fn brute(anchor: f64, bounds: &[f64], min: f64, max: f64) -> Option<(f64, f64)> {
        let mut all = Vec::new();
        for &a in bounds {
            for &b in bounds {
                if a <= anchor && anchor < b && b - a >= min && b - a <= max {
                    all.push((a, b));
                }
            }
        }
        all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let longest = all.iter().map(|p| p.1 - p.0).fold(f64::NEG_INFINITY, f64::max);
        all.into_iter().find(|p| p.1 - p.0 == longest)
    }

    #[test]
    fn picks_longest_fitting_pair() {
        let bounds = [95.0, 99.0, 106.0, 115.0];
        let got = rectify_clip_bounds(100.0, &shots_from(&bounds), 3.0, 8.0).unwrap();
        assert_eq!(got, Rectified::Aligned(Interval::new(99.0, 106.0).unwrap()));
        assert_eq!(brute(100.0, &bounds, 3.0, 8.0), Some((99.0, 106.0)));
    }

    #[test]
    fn long_static_shot_falls_back() {
        let got = rectify_clip_bounds(130.0, &shots_from(&[100.0, 160.0]), 3.0, 8.0).unwrap();
        assert_eq!(got, Rectified::Fallback(Interval::new(128.5, 131.5).unwrap()));
    }

    #[test]
    fn too_short_span_rejects() {
        let got = rectify_clip_bounds(0.5, &shots_from(&[0.0, 1.0]), 3.0, 8.0).unwrap();
        assert_eq!(got, Rectified::Rejected);
    }

    #[test]
    fn anchor_outside_span_errors() {
        assert!(rectify_clip_bounds(20.0, &shots_from(&[0.0, 10.0]), 3.0, 8.0).is_err());
    }

    #[test]
    fn ties_prefer_earlier_start() {
        // [2,7] and [4,9] both 5 s and both contain 5
        let got = rectify_clip_bounds(5.0, &shots_from(&[0.0, 2.0, 4.0, 7.0, 9.0, 20.0]), 4.5, 5.0).unwrap();
        assert_eq!(got, Rectified::Aligned(Interval::new(2.0, 7.0).unwrap()));
    }

    #[test]
    fn orphans_by_duration() {
        let shots = shots_from(&[0.0, 3.0, 3.2, 7.2]);
        assert_eq!(find_orphan_spans(&shots, 0.5), vec![Interval::new(3.0, 3.2).unwrap()]);
        assert!(find_orphan_spans(&shots_from(&[0.0, 3.0, 7.0]), 0.5).is_empty());
        let tiny = shots_from(&[0.0, 0.1, 0.2, 0.3]);
        assert_eq!(find_orphan_spans(&tiny, 0.5).len(), 3);
    }

    #[test]
    fn matches_enumeration_on_random_sets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let n = rng.random_range(2..9);
            let mut bounds: Vec<f64> = (0..n).map(|_| rng.random_range(0..40) as f64 * 0.5).collect();
            bounds.sort_by(f64::total_cmp);
            bounds.dedup();
            if bounds.len() < 2 {
                continue;
            }
            let anchor = rng.random_range(bounds[0]..bounds[bounds.len() - 1]);
            let got = rectify_clip_bounds(anchor, &shots_from(&bounds), 3.0, 8.0).unwrap();
            match (got, brute(anchor, &bounds, 3.0, 8.0)) {
                (Rectified::Aligned(iv), Some((a, b))) => {
                    assert_eq!((iv.start(), iv.end()), (a, b));
                    assert!(iv.contains(anchor));
                }
                (Rectified::Fallback(iv), None) => {
                    assert!(iv.contains(anchor) || iv.end() == anchor);
                    assert!((iv.len() - 3.0).abs() < 1e-9);
                }
                (Rectified::Rejected, None) => {}
                (g, b) => panic!("mismatch {g:?} vs {b:?} for {anchor} in {bounds:?}"),
            }
        }
    }
}
