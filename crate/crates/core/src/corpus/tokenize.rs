use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Which normalization a caller wants from [`tokenize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizeMode {
    /// Keeps every word; used for BM25 term matching.
    Retrieval,
    /// Additionally drops English articles; used by every answer metric.
    Metric,
}

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// NFC-normalizes, lowercases, deletes punctuation and splits on whitespace.
/// The text is composed again after deletion since removing a punctuation
/// mark can bring combining marks together.
///
/// Punctuation is deleted rather than replaced, so "mini-game" becomes
/// "minigame".
pub fn tokenize(text: &str, mode: TokenizeMode) -> Vec<String> {
    let cleaned: String = text
        .nfc()
        .flat_map(char::to_lowercase)
        .filter(|c| !is_punctuation(*c))
        .nfc()
        .collect();
    cleaned
        .split_whitespace()
        .filter(|tok| mode == TokenizeMode::Retrieval || !ARTICLES.contains(tok))
        .map(str::to_owned)
        .collect()
}

pub fn metric_tokens(text: &str) -> Vec<String> {
    tokenize(text, TokenizeMode::Metric)
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
/// An empty needle never matches.
pub fn contains_sequence(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty()
        && needle.len() <= haystack.len()
        && haystack.windows(needle.len()).any(|w| w == needle)
}
