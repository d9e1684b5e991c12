//! Pluggable sentence analyzers plus the deterministic rule-based defaults.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::Result;

/// Decides whether a sentence has both a subject and a predicate.
pub trait CompletenessAnalyzer: Send + Sync {
    fn is_complete(&self, text: &str) -> Result<bool>;
}

/// Scores emotional polarity in [-1, 1].
pub trait SentimentAnalyzer: Send + Sync {
    fn score(&self, text: &str) -> Result<f64>;
}

const SUBJECT_PRONOUNS: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "this", "that", "these", "those", "who", "what",
    "there", "everyone", "everybody", "everything", "someone", "somebody", "something", "anyone",
    "anybody", "anything", "nobody", "nothing", "one",
];

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "my", "your", "his", "her", "its", "our", "their", "this", "that", "every",
    "no", "some", "each",
];

const AUXILIARIES: &[&str] = &[
    "am", "is", "are", "was", "were", "be", "been", "has", "have", "had", "do", "does", "did",
    "will", "would", "shall", "should", "can", "could", "may", "might", "must", "ain't",
];

/// Base forms of common verbs; regular inflections are derived.
const VERBS: &[&str] = &[
    "arrive", "ask", "become", "begin", "believe", "break", "bring", "call", "care", "change",
    "come", "continue", "cry", "define", "die", "dream", "end", "escape", "fall", "feel", "fight",
    "find", "follow", "forget", "forgive", "get", "give", "go", "happen", "hate", "hear", "help",
    "hide", "hold", "hope", "keep", "kill", "know", "last", "lead", "learn", "leave", "let", "lie",
    "like", "listen", "live", "look", "lose", "love", "make", "matter", "mean", "meet", "miss",
    "move", "need", "open", "overcome", "perceive", "play", "promise", "protect", "remember",
    "return", "rise", "run", "save", "say", "see", "seem", "send", "show", "stand", "start", "stay",
    "stop", "survive", "take", "talk", "tell", "think", "transcend", "trust", "try", "turn", "wait",
    "walk", "want", "watch", "win", "wish", "work", "worry",
];

const IRREGULAR_PAST: &[&str] = &[
    "became", "began", "broke", "brought", "came", "fell", "felt", "fought", "found", "forgot",
    "forgave", "got", "gave", "went", "heard", "hid", "held", "kept", "knew", "led", "left", "lay",
    "lost", "made", "meant", "met", "rose", "ran", "said", "saw", "sent", "stood", "took", "told",
    "thought", "won",
];

/// Lowercased word tokens with common English contractions expanded.
pub fn tokenize(text: &str) -> Vec<String> {
    cased_tokens(text).into_iter().map(|(t, _)| t).collect()
}

/// Tokens paired with whether the source word started with a capital.
/// Both halves of an expanded contraction inherit the flag of the word.
fn cased_tokens(text: &str) -> Vec<(String, bool)> {
    let mut out = Vec::new();
    let normalized = text.replace(['\u{2019}', '\u{2018}'], "'");
    for raw in normalized.split(|c: char| !(c.is_alphanumeric() || c == '\'')) {
        let trimmed = raw.trim_matches('\'');
        if trimmed.is_empty() {
            continue;
        }
        let cap = trimmed.chars().next().is_some_and(char::is_uppercase);
        let w = trimmed.to_lowercase();
        let mut push = |t: &str| out.push((t.to_string(), cap));
        match w.as_str() {
            "can't" => {
                push("can");
                push("not");
                continue;
            }
            "won't" => {
                push("will");
                push("not");
                continue;
            }
            "ain't" => {
                push("ain't");
                continue;
            }
            _ => {}
        }
        if let Some(base) = w.strip_suffix("n't") {
            push(base);
            push("not");
            continue;
        }
        let suffixes = [("'re", "are"), ("'m", "am"), ("'s", "is"), ("'ll", "will"), ("'ve", "have"), ("'d", "would")];
        if let Some((base, full)) = suffixes
            .iter()
            .find_map(|(suf, full)| w.strip_suffix(suf).map(|b| (b, *full)))
        {
            if !base.is_empty() {
                push(base);
                push(full);
                continue;
            }
        }
        push(&w);
    }
    out
}

fn is_finite_verb(tok: &str, prev: Option<&str>) -> bool {
    if prev == Some("to") {
        return false;
    }
    if AUXILIARIES.contains(&tok) || IRREGULAR_PAST.contains(&tok) {
        return true;
    }
    if VERBS.contains(&tok) {
        return true;
    }
    let stems = [
        tok.strip_suffix("es"),
        tok.strip_suffix('s'),
        tok.strip_suffix("ed"),
        tok.strip_suffix('d'),
    ];
    if stems.iter().flatten().any(|s| VERBS.contains(s)) {
        return true;
    }
    // "tried", "cried"
    tok.strip_suffix("ied")
        .map(|s| VERBS.contains(&format!("{s}y").as_str()))
        .unwrap_or(false)
}

/// Requires at least one nominative token and at least one finite verb.
///
/// A nominative is a subject pronoun, a word right after a determiner, or a
/// capitalized word that is not itself a verb.
#[derive(Debug, Default, Clone, Copy)]
pub struct RuleCompleteness;

impl CompletenessAnalyzer for RuleCompleteness {
    fn is_complete(&self, text: &str) -> Result<bool> {
        let toks = cased_tokens(text);
        let mut has_subject = false;
        let mut has_verb = false;
        for (i, (t, cap)) in toks.iter().enumerate() {
            let prev = i.checked_sub(1).map(|p| toks[p].0.as_str());
            let verb = is_finite_verb(t, prev);
            has_verb |= verb;
            let after_det = prev.is_some_and(|p| DETERMINERS.contains(&p)) && !verb;
            let proper = *cap && !verb && !DETERMINERS.contains(&t.as_str());
            has_subject |= SUBJECT_PRONOUNS.contains(&t.as_str()) || after_det || proper;
        }
        Ok(has_subject && has_verb)
    }
}

const SENTIMENT_DATA: &str = include_str!("../../data/sentiment_lexicon.tsv");

fn sentiment_lexicon() -> &'static HashMap<&'static str, f64> {
    static LEX: OnceLock<HashMap<&'static str, f64>> = OnceLock::new();
    LEX.get_or_init(|| {
        SENTIMENT_DATA
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .filter_map(|l| {
                let (w, v) = l.split_once('\t')?;
                Some((w.trim(), v.trim().parse().ok()?))
            })
            .collect()
    })
}

const NEGATIONS: &[&str] = &["not", "no", "never", "nor", "without"];

/// Sums word valences (sign flipped within two words of a negation) and
/// squashes with `s / sqrt(s^2 + 15)` into [-1, 1].
#[derive(Debug, Default, Clone, Copy)]
pub struct LexiconSentiment;

impl SentimentAnalyzer for LexiconSentiment {
    fn score(&self, text: &str) -> Result<f64> {
        let lex = sentiment_lexicon();
        let toks = tokenize(text);
        let mut sum = 0.0;
        for (i, t) in toks.iter().enumerate() {
            if let Some(&v) = lex.get(t.as_str()) {
                let negated = toks[i.saturating_sub(2)..i]
                    .iter()
                    .any(|p| NEGATIONS.contains(&p.as_str()));
                sum += if negated { -0.5 * v } else { v };
            }
        }
        Ok(sum / (sum * sum + 15.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contractions_expand() {
        assert_eq!(tokenize("You\u{2019}re late."), ["you", "are", "late"]);
        assert_eq!(tokenize("Don't let me leave"), ["do", "not", "let", "me", "leave"]);
        assert_eq!(tokenize("We can't"), ["we", "can", "not"]);
    }

    #[test]
    fn completeness_examples() {
        let c = RuleCompleteness;
        assert!(c.is_complete("You're late.").unwrap());
        assert!(c.is_complete("A wizard is never late, Frodo Baggins.").unwrap());
        assert!(c.is_complete("He arrives precisely when he means to.").unwrap());
        assert!(!c.is_complete("Run.").unwrap());
        assert!(!c.is_complete("Into the darkness, far beyond.").unwrap());
        assert!(!c.is_complete("I, alone").unwrap());
    }

    #[test]
    fn sentiment_bounds_and_sign() {
        let s = LexiconSentiment;
        assert!(s.score("I love you.").unwrap() > 0.1);
        assert!(s.score("I hate this war.").unwrap() < -0.1);
        assert_eq!(s.score("The table is made of oak.").unwrap(), 0.0);
        assert!(s.score("I do not love you").unwrap() < 0.0);
        let big = "love ".repeat(200);
        let v = s.score(&big).unwrap();
        assert!(v > 0.99 && v <= 1.0);
    }
}
