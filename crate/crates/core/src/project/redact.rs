use std::collections::BTreeSet;
use std::path::Path;

use crate::{Error, Result};

const DEFAULT_LEXICON: &str = include_str!("../../data/redaction_lexicon.txt");

/// Words that are masked before text is handed to a language model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedactionLexicon {
    terms: BTreeSet<String>,
    replacement: String,
}

impl RedactionLexicon {
    pub fn new<I, S>(terms: I, replacement: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let terms: BTreeSet<String> = terms
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        let replacement = replacement.into();
        if terms.is_empty() {
            return Err(Error::config("lexicon", "redaction lexicon is empty"));
        }
        if replacement.is_empty() {
            return Err(Error::config("lexicon", "redaction replacement is empty"));
        }
        Ok(Self { terms, replacement })
    }

    /// The bundled lexicon with the `REDACTED` token.
    pub fn bundled() -> Self {
        Self::new(parse_lines(DEFAULT_LEXICON), "REDACTED").expect("bundled lexicon is non-empty")
    }

    /// Bundled terms plus those listed in `path`.
    pub fn bundled_with_file(path: &Path) -> Result<Self> {
        let extra = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lex = Self::bundled();
        lex.terms
            .extend(parse_lines(&extra).map(|t| t.to_lowercase()));
        Ok(lex)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    pub fn replacement(&self) -> &str {
        &self.replacement
    }

    fn matches(&self, word: &str) -> bool {
        self.terms.contains(&word.to_lowercase())
    }
}

fn parse_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Replaces every whole-word, case-insensitive lexicon hit. Everything
/// between hits is copied through untouched.
pub fn redact_text(text: &str, lexicon: &RedactionLexicon) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while !rest.is_empty() {
        let word_len = rest
            .char_indices()
            .find(|&(_, c)| !is_word_char(c))
            .map_or(rest.len(), |(i, _)| i);
        if word_len > 0 {
            let word = &rest[..word_len];
            if lexicon.matches(word) {
                out.push_str(&lexicon.replacement);
            } else {
                out.push_str(word);
            }
            rest = &rest[word_len..];
        } else {
            let gap_len = rest
                .char_indices()
                .find(|&(_, c)| is_word_char(c))
                .map_or(rest.len(), |(i, _)| i);
            out.push_str(&rest[..gap_len]);
            rest = &rest[gap_len..];
        }
    }
    out
}
