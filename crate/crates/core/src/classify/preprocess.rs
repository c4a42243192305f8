//! Token pipeline feeding the classifier: lowercase, split on
//! non-alphanumerics, drop numerics / short tokens / stop words, then a
//! rule-based suffix stemmer.
//!
//! Stemmer rule table (first match per step, applied in order):
//!
//! | step | suffix  | action                                         |
//! |------|---------|------------------------------------------------|
//! | 1    | -sses   | replace with -ss                               |
//! | 1    | -ies    | replace with -y                                |
//! | 1    | -ss     | keep                                           |
//! | 1    | -s      | drop                                           |
//! | 2    | -ing    | drop when the rest has ≥ 3 chars, then undouble |
//! | 2    | -ed     | drop when the rest has ≥ 3 chars, then undouble |
//! | 2    | -ly     | drop when the rest has ≥ 3 chars               |
//!
//! "Undouble" removes one of two identical trailing consonants unless the
//! consonant is l, s or z ("running" → "run" but "selling" → "sell").

use std::collections::BTreeSet;
use std::sync::OnceLock;

static STOP_WORDS: OnceLock<BTreeSet<&'static str>> = OnceLock::new();

fn stop_words() -> &'static BTreeSet<&'static str> {
    STOP_WORDS.get_or_init(|| {
        include_str!("../../data/stopwords.txt")
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .collect()
    })
}

pub fn is_stop_word(token: &str) -> bool {
    stop_words().contains(token)
}

/// Lowercase and split on non-alphanumerics, keeping only fully
/// alphabetic tokens of length ≥ 2.
pub fn tokenize_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2 && t.chars().all(char::is_alphabetic))
        .map(str::to_string)
        .collect()
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Drop one of two identical trailing consonants, except l/s/z.
fn undouble(word: &mut String) {
    let mut chars = word.chars().rev();
    if let (Some(last), Some(prev)) = (chars.next(), chars.next()) {
        if last == prev && !is_vowel(last) && !matches!(last, 'l' | 's' | 'z') {
            word.pop();
        }
    }
}

/// Rule-based suffix stemmer; see the module-level rule table.
pub fn stem(token: &str) -> String {
    let mut word = token.to_string();

    // step 1: plurals
    if word.ends_with("sses") {
        word.truncate(word.len() - 2);
    } else if word.ends_with("ies") {
        word.truncate(word.len() - 3);
        word.push('y');
    } else if word.ends_with("ss") {
        // keep
    } else if word.ends_with('s') {
        word.pop();
    }

    // step 2: verbal and adverbial suffixes, first matching suffix only
    for (suffix, undo) in [("ing", true), ("ed", true), ("ly", false)] {
        if word.ends_with(suffix) {
            let base_len = word.len() - suffix.len();
            if word[..base_len].chars().count() >= 3 {
                word.truncate(base_len);
                if undo {
                    undouble(&mut word);
                }
            }
            break;
        }
    }

    word
}

/// Full pipeline: tokenize, filter stop words, stem, re-filter shorties.
pub fn preprocess(text: &str) -> Vec<String> {
    tokenize_words(text)
        .into_iter()
        .filter(|t| !is_stop_word(t))
        .map(|t| stem(&t))
        .filter(|t| t.chars().count() >= 2)
        .collect()
}
