use serde::{Deserialize, Serialize};

use crate::mediaio::Interval;
use crate::Result;

use super::{gestalt_similarity, Quote};

pub const DEFAULT_MIN_RATIO: f64 = 0.8;
pub const MAX_WINDOW_SEGMENTS: usize = 5;
pub const MAX_QUOTE_CLIP_S: f64 = 12.0;
/// How far refinement may move either edge beyond the aligned interval.
pub const REFINE_SLACK_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub interval: Interval,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedQuote {
    pub quote: Quote,
    pub interval: Interval,
    pub similarity: f64,
}

/// Lowercases, replaces punctuation with spaces and collapses whitespace.
/// Apostrophes are dropped so "you're" and "youre" compare equal.
pub fn normalize_for_match(text: &str) -> String {
    let mapped: String = text
        .chars()
        .filter(|c| !matches!(c, '\'' | '\u{2019}'))
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Best window of up to [`MAX_WINDOW_SEGMENTS`] consecutive segments whose
/// joined text matches the quote with ratio at least `min_ratio`.
pub fn align_quote(quote: &Quote, segments: &[TranscriptSegment], min_ratio: f64) -> Result<Option<AlignedQuote>> {
    let target = normalize_for_match(&quote.text);
    let normalized: Vec<String> = segments.iter().map(|s| normalize_for_match(&s.text)).collect();
    let mut best: Option<(f64, usize, usize)> = None;
    for start in 0..segments.len() {
        let mut joined = String::new();
        for end in start..segments.len().min(start + MAX_WINDOW_SEGMENTS) {
            if !joined.is_empty() && !normalized[end].is_empty() {
                joined.push(' ');
            }
            joined.push_str(&normalized[end]);
            let ratio = gestalt_similarity(&target, &joined);
            if ratio >= min_ratio && best.is_none_or(|(r, _, _)| ratio > r) {
                best = Some((ratio, start, end));
            }
        }
    }
    let Some((similarity, s, e)) = best else {
        return Ok(None);
    };
    Ok(Some(AlignedQuote {
        quote: quote.clone(),
        interval: Interval::new(segments[s].interval.start(), segments[e].interval.end())?,
        similarity,
    }))
}

/// Tightens an aligned interval to the speech inside it.
///
/// Takes the hull of speech intervals overlapping `interval`, pads it by
/// `pad_s` each side and clamps to `interval` widened by one second. Returns
/// `None` when no speech overlaps or the result exceeds twelve seconds.
pub fn refine_with_vad(interval: Interval, speech: &[Interval], pad_s: f64) -> Result<Option<Interval>> {
    let hits: Vec<&Interval> = speech.iter().filter(|s| s.overlaps(&interval)).collect();
    let (Some(first), Some(last)) = (hits.iter().map(|s| s.start()).reduce(f64::min), hits.iter().map(|s| s.end()).reduce(f64::max)) else {
        return Ok(None);
    };
    let lo = (first - pad_s).max(interval.start() - REFINE_SLACK_S).max(0.0);
    let hi = (last + pad_s).min(interval.end() + REFINE_SLACK_S);
    let refined = Interval::new(lo, hi)?;
    if refined.len() > MAX_QUOTE_CLIP_S + 1e-9 {
        return Ok(None);
    }
    Ok(Some(refined))
}
