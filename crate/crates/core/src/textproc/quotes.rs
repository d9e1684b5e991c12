use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{CompletenessAnalyzer, SentimentAnalyzer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub speaker: Option<String>,
    pub text: String,
    /// Unicode scalar count of `text`.
    pub char_len: usize,
    pub sentiment: f64,
}

impl Quote {
    pub fn new(speaker: Option<String>, text: &str) -> Self {
        let text = clean_text(text);
        Quote {
            speaker,
            char_len: text.chars().count(),
            text,
            sentiment: 0.0,
        }
    }
}

/// Straightens typographic quotes, drops bracketed stage directions and
/// surrounding quote marks, and collapses whitespace.
pub fn clean_text(raw: &str) -> String {
    static DIRECTIONS: OnceLock<Regex> = OnceLock::new();
    let directions = DIRECTIONS.get_or_init(|| Regex::new(r"\[[^\]]*\]").unwrap());
    let straight: String = raw
        .chars()
        .map(|c| match c {
            '\u{2018}' | '\u{2019}' => '\'',
            '\u{201c}' | '\u{201d}' => '"',
            c => c,
        })
        .collect();
    let without = directions.replace_all(&straight, " ");
    let collapsed = without.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut s = collapsed.as_str();
    while let Some(inner) = s.strip_prefix('"').and_then(|t| t.strip_suffix('"')) {
        s = inner.trim();
    }
    s.trim_matches('"').trim().to_string()
}

/// Splits a raw block into quotes, one per `Name: utterance` line.
///
/// Untagged lines continue the previous speaker's utterance; a block with no
/// tag at all becomes a single speakerless quote.
pub fn parse_quote_block(raw: &str) -> Vec<Quote> {
    static TAG: OnceLock<Regex> = OnceLock::new();
    let tag = TAG.get_or_init(|| Regex::new(r"^\s*([A-Z][\w .'\-]{0,40}?)\s*:\s+(.*)$").unwrap());
    let mut parts: Vec<(Option<String>, String)> = Vec::new();
    for line in raw.lines() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(c) = tag.captures(line) {
            parts.push((Some(c[1].trim().to_string()), c[2].to_string()));
        } else if let Some(last) = parts.last_mut() {
            last.1.push(' ');
            last.1.push_str(line);
        } else {
            parts.push((None, line.to_string()));
        }
    }
    parts
        .into_iter()
        .map(|(speaker, text)| Quote::new(speaker, &text))
        .filter(|q| !q.text.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteFilterParams {
    pub min_chars: usize,
    pub max_chars: usize,
    pub min_abs_sentiment: f64,
    pub max_quotes: usize,
}

impl Default for QuoteFilterParams {
    fn default() -> Self {
        Self {
            min_chars: 12,
            max_chars: 80,
            min_abs_sentiment: 0.1,
            max_quotes: 200,
        }
    }
}

/// Cleans, gates by length, completeness and sentiment, then keeps the
/// shortest `max_quotes` (ties broken lexicographically).
///
/// Surviving quotes carry their sentiment score.
pub fn filter_and_rank_quotes(
    quotes: &[Quote],
    completeness: &dyn CompletenessAnalyzer,
    sentiment: &dyn SentimentAnalyzer,
    params: &QuoteFilterParams,
) -> Vec<Quote> {
    let mut kept: Vec<Quote> = quotes
        .iter()
        .filter_map(|q| {
            let mut q = Quote::new(q.speaker.clone(), &q.text);
            if q.char_len < params.min_chars || q.char_len > params.max_chars {
                return None;
            }
            match completeness.is_complete(&q.text) {
                Ok(true) => {}
                Ok(false) => return None,
                Err(e) => {
                    tracing::warn!(quote = %q.text, error = %e, "completeness analyzer failed, skipping");
                    return None;
                }
            }
            match sentiment.score(&q.text) {
                Ok(s) if s.abs() >= params.min_abs_sentiment => {
                    q.sentiment = s;
                    Some(q)
                }
                Ok(_) => None,
                Err(e) => {
                    tracing::warn!(quote = %q.text, error = %e, "sentiment analyzer failed, skipping");
                    None
                }
            }
        })
        .collect();
    kept.sort_by(|a, b| a.char_len.cmp(&b.char_len).then_with(|| a.text.cmp(&b.text)));
    kept.truncate(params.max_quotes);
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::{LexiconSentiment, RuleCompleteness};
    use crate::{Error, Result};

    const FRODO: &str = "Frodo: \u{201c}You\u{2019}re late.\u{201d}\nGandalf: \u{201c}A wizard is never late, Frodo Baggins. Nor is he early. He arrives precisely when he means to.\u{201d}";

    #[test]
    fn two_speaker_block() {
        let qs = parse_quote_block(FRODO);
        assert_eq!(qs.len(), 2);
        assert_eq!(qs[0].speaker.as_deref(), Some("Frodo"));
        assert_eq!(qs[1].speaker.as_deref(), Some("Gandalf"));
        assert_eq!(qs[0].text, "You're late.");
        assert_eq!(qs[0].char_len, 12);
        assert!(qs[1].text.starts_with("A wizard is never late"));
    }

    #[test]
    fn untagged_and_empty() {
        let qs = parse_quote_block("  \"Everything  ends.\" ");
        assert_eq!(qs.len(), 1);
        assert_eq!(qs[0].speaker, None);
        assert_eq!(qs[0].text, "Everything ends.");
        assert!(parse_quote_block("").is_empty());
        assert!(parse_quote_block("\n  \n").is_empty());
    }

    #[test]
    fn cleaning_drops_directions() {
        assert_eq!(clean_text("[whispering]  \u{201c}Stay  close.\u{201d}"), "Stay close.");
    }

    #[test]
    fn boundary_quote_survives() {
        let q = Quote::new(None, "You're late.");
        let out = filter_and_rank_quotes(&[q], &RuleCompleteness, &LexiconSentiment, &QuoteFilterParams::default());
        assert_eq!(out.len(), 1);
        assert!(out[0].sentiment <= -0.1);
    }

    #[test]
    fn short_quote_rejected() {
        let out = filter_and_rank_quotes(
            &[Quote::new(None, "Run.")],
            &RuleCompleteness,
            &LexiconSentiment,
            &QuoteFilterParams::default(),
        );
        assert!(out.is_empty());
    }

    struct AlwaysYes;
    impl CompletenessAnalyzer for AlwaysYes {
        fn is_complete(&self, _: &str) -> Result<bool> {
            Ok(true)
        }
    }
    struct Fixed(f64);
    impl SentimentAnalyzer for Fixed {
        fn score(&self, t: &str) -> Result<f64> {
            if t.contains("boom") {
                return Err(Error::invalid("analyzer down"));
            }
            Ok(self.0)
        }
    }

    #[test]
    fn truncates_to_shortest() {
        let qs: Vec<Quote> = (0..250)
            .map(|i| Quote::new(None, &format!("{}{}", "x".repeat(12 + i % 60), i)))
            .collect();
        let out = filter_and_rank_quotes(&qs, &AlwaysYes, &Fixed(0.5), &QuoteFilterParams::default());
        assert_eq!(out.len(), 200);
        let mut lens: Vec<usize> = qs.iter().map(|q| q.char_len).filter(|&l| l <= 80).collect();
        lens.sort();
        assert_eq!(out.iter().map(|q| q.char_len).collect::<Vec<_>>(), lens[..200]);
    }

    #[test]
    fn analyzer_failure_skips_quote() {
        let qs = [Quote::new(None, "the boom is loud here"), Quote::new(None, "the room is loud here")];
        let out = filter_and_rank_quotes(&qs, &AlwaysYes, &Fixed(0.5), &QuoteFilterParams::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].text, "the room is loud here");
    }

    #[test]
    fn weak_sentiment_rejected() {
        let qs = [Quote::new(None, "the room is loud here")];
        assert!(filter_and_rank_quotes(&qs, &AlwaysYes, &Fixed(0.05), &QuoteFilterParams::default()).is_empty());
        assert_eq!(filter_and_rank_quotes(&qs, &AlwaysYes, &Fixed(-0.1), &QuoteFilterParams::default()).len(), 1);
    }
}
