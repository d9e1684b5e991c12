//! Quote parsing and filtering, the gestalt matcher, transcript alignment
//! and speech-based interval refinement.

mod align;
mod analyzers;
mod gestalt;
mod quotes;

pub use align::{
    align_quote, normalize_for_match, refine_with_vad, AlignedQuote, TranscriptSegment, DEFAULT_MIN_RATIO,
    MAX_QUOTE_CLIP_S, MAX_WINDOW_SEGMENTS, REFINE_SLACK_S,
};
pub use analyzers::{tokenize, CompletenessAnalyzer, LexiconSentiment, RuleCompleteness, SentimentAnalyzer};
pub use gestalt::{gestalt_similarity, matched_chars};
pub use quotes::{clean_text, filter_and_rank_quotes, parse_quote_block, Quote, QuoteFilterParams};
