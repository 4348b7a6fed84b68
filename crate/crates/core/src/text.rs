//! Whitespace canonicalization, rule-based sentence segmentation and the
//! content-word machinery shared by the mock backend.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::types::Sentence;

/// Abbreviations whose trailing period never ends a sentence. Compared
/// case-insensitively against the whitespace token that ends in the period.
pub const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "dr.", "st.", "e.g.", "i.e.", "etc.", "u.s.", "no.",
];

/// Function words dropped before any overlap computation.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "at", "to", "for", "by", "with", "from", "and", "or",
    "but", "is", "are", "was", "were", "be", "been", "being", "am", "it", "its", "this", "that",
    "these", "those", "as", "into", "than", "then", "so", "do", "does", "did", "has", "have",
    "had", "s", "not", "no", "if",
];

/// Collapses every whitespace run to a single space and trims both ends.
pub fn canonicalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}')
}

/// Uppercase letter or digit, optionally behind one opening quote or bracket.
fn starts_sentence(rest: &[(usize, char)]) -> bool {
    let capital = |c: char| c.is_uppercase() || c.is_ascii_digit();
    match rest {
        [(_, c), ..] if capital(*c) => true,
        [(_, o), (_, c), ..] => is_opener(*o) && capital(*c),
        _ => false,
    }
}

fn is_abbreviation(token: &str) -> bool {
    let token = token.trim_start_matches(['"', '\'', '(', '[', '\u{201c}', '\u{2018}']);
    ABBREVIATIONS.iter().any(|a| token.eq_ignore_ascii_case(a))
}

/// Splits `text` into sentences.
///
/// A boundary falls after a run of `.`, `!` or `?` (plus any closing quotes or
/// brackets) when the next character is a space followed by an uppercase
/// letter or a digit (possibly after an opening quote or bracket), unless the token ending in `.` is a known abbreviation.
/// Input whitespace is canonicalized first, so joining the result with single
/// spaces reproduces the canonical input.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let canon = canonicalize_whitespace(text);
    let chars: Vec<(usize, char)> = canon.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        if !is_terminal(chars[i].1) {
            i += 1;
            continue;
        }
        let mut end = i;
        while end + 1 < chars.len() && is_terminal(chars[end + 1].1) {
            end += 1;
        }
        while end + 1 < chars.len() && is_closer(chars[end + 1].1) {
            end += 1;
        }
        let boundary = end + 2 < chars.len() && chars[end + 1].1 == ' ' && starts_sentence(&chars[end + 2..]);
        if boundary {
            let byte_end = chars[end + 1].0;
            let candidate = &canon[start..byte_end];
            let last_token = candidate.rsplit(' ').next().unwrap_or(candidate);
            let terminals = chars[i..=end].iter().filter(|(_, c)| is_terminal(*c)).count();
            let protected = terminals == 1
                && chars[i].1 == '.'
                && is_abbreviation(last_token.trim_end_matches(is_closer));
            if !protected {
                push_sentence(&mut sentences, candidate);
                start = chars[end + 2].0;
            }
        }
        i = end + 1;
    }
    if start < canon.len() {
        push_sentence(&mut sentences, &canon[start..]);
    }
    sentences
}

fn push_sentence(out: &mut Vec<Sentence>, text: &str) {
    if !text.is_empty() {
        out.push(Sentence {
            index: out.len(),
            text: text.to_string(),
        });
    }
}

/// Lowercased alphanumeric words of `text`, in order, with stopwords removed.
pub fn content_words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

pub fn content_word_set(text: &str) -> BTreeSet<String> {
    content_words(text).into_iter().collect()
}

/// Jaccard similarity of the content-word sets of `a` and `b`.
///
/// Two texts without any content words have identical (empty) sets and score 1.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let sa = content_word_set(a);
    let sb = content_word_set(b);
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    inter as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn texts(s: &str) -> Vec<String> {
        split_sentences(s).into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn empty_input_has_no_sentences() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   \n\t ").is_empty());
    }

    #[test]
    fn single_terminal() {
        let s = split_sentences("Washington is the capital.");
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].index, 0);
        assert_eq!(s[0].text, "Washington is the capital.");
    }

    #[test]
    fn abbreviation_is_protected() {
        assert_eq!(
            texts("Dr. Hill wrote it in 1936. Goodman recorded it."),
            vec!["Dr. Hill wrote it in 1936.", "Goodman recorded it."]
        );
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(texts("It cost 3.5 dollars. then it rose."), vec!["It cost 3.5 dollars. then it rose."]);
    }

    #[test]
    fn whitespace_is_canonicalized() {
        assert_eq!(texts("  One.\n\n  Two!  "), vec!["One.", "Two!"]);
    }

    #[test]
    fn closers_stay_with_their_sentence() {
        assert_eq!(
            texts("He said \"stop.\" Then he left. (It was late.) 42 people saw it."),
            vec!["He said \"stop.\"", "Then he left.", "(It was late.)", "42 people saw it."]
        );
    }

    #[test]
    fn jaccard_counts_content_words() {
        assert_eq!(jaccard("who wrote the song", "song wrote billy hill"), 0.4);
        assert_eq!(jaccard("a the", "of an"), 1.0);
        assert_eq!(jaccard("red apple", "blue sky"), 0.0);
        assert_eq!(jaccard("Glory of Love!", "glory love"), 1.0);
    }
}
