//! Character-trigram language identification.
//!
//! Each bundled profile is the 300 most frequent space-padded character
//! trigrams of a language sample, one per line, most frequent first. A text
//! is scored against a profile by cosine similarity of rank-weight vectors:
//! the trigram at rank r (0-based) in a list of length N carries weight
//! (N - r) / N. Scores are therefore in [0, 1] and deterministic for fixed
//! profiles.

use std::collections::HashMap;

/// Pluggable detector interface; [`TrigramDetector`] is the default.
pub trait LanguageDetector: Send + Sync {
    /// Ranked (ISO code, confidence) list, best first, never empty.
    fn detect(&self, text: &str) -> Vec<(String, f64)>;
}

/// Texts shorter than this many characters are not classified.
pub const MIN_TEXT_CHARS: usize = 20;

/// A detected language must score at least this fraction of the best score
/// to enter the result list.
pub const INCLUSION_RATIO: f64 = 0.2;

const PROFILE_LEN: usize = 300;

const BUNDLED: &[(&str, &str)] = &[
    ("de", include_str!("../../data/lang/de.profile")),
    ("en", include_str!("../../data/lang/en.profile")),
    ("es", include_str!("../../data/lang/es.profile")),
    ("fr", include_str!("../../data/lang/fr.profile")),
    ("it", include_str!("../../data/lang/it.profile")),
    ("nl", include_str!("../../data/lang/nl.profile")),
    ("pt", include_str!("../../data/lang/pt.profile")),
    ("ru", include_str!("../../data/lang/ru.profile")),
    ("tr", include_str!("../../data/lang/tr.profile")),
    ("zh", include_str!("../../data/lang/zh.profile")),
];

struct Profile {
    code: &'static str,
    weights: HashMap<String, f64>,
    norm: f64,
}

pub struct TrigramDetector {
    profiles: Vec<Profile>,
}

/// Lowercase, replace non-alphabetic runs with single spaces, pad with one
/// space on each side. The trigram space all scoring happens in.
fn normalize(text: &str) -> Vec<char> {
    let lowered = text.to_lowercase();
    let mut out = vec![' '];
    let mut last_space = true;
    for c in lowered.chars() {
        if c.is_alphabetic() {
            out.push(c);
            last_space = false;
        } else if !last_space {
            out.push(' ');
            last_space = true;
        }
    }
    if !last_space {
        out.push(' ');
    }
    out
}

/// Count the trigrams of `text`, skipping all-space windows.
fn trigram_counts(text: &str) -> HashMap<String, u32> {
    let chars = normalize(text);
    let mut counts = HashMap::new();
    for w in chars.windows(3) {
        if w.iter().all(|c| *c == ' ') {
            continue;
        }
        *counts.entry(w.iter().collect::<String>()).or_insert(0) += 1;
    }
    counts
}

fn rank_weights<I: IntoIterator<Item = String>>(ranked: I) -> (HashMap<String, f64>, f64) {
    let ranked: Vec<String> = ranked.into_iter().collect();
    let n = ranked.len();
    let mut weights = HashMap::with_capacity(n);
    let mut sq = 0.0;
    for (r, tri) in ranked.into_iter().enumerate() {
        let w = (n - r) as f64 / n as f64;
        sq += w * w;
        weights.insert(tri, w);
    }
    (weights, sq.sqrt())
}

impl TrigramDetector {
    /// Detector over the ten bundled profiles.
    pub fn bundled() -> Self {
        let profiles = BUNDLED
            .iter()
            .map(|(code, body)| {
                let ranked: Vec<String> = body
                    .lines()
                    .filter(|l| !l.is_empty())
                    .map(str::to_string)
                    .collect();
                debug_assert_eq!(ranked.len(), PROFILE_LEN, "profile {code}");
                let (weights, norm) = rank_weights(ranked);
                Profile {
                    code,
                    weights,
                    norm,
                }
            })
            .collect();
        TrigramDetector { profiles }
    }

    pub fn codes(&self) -> Vec<&'static str> {
        self.profiles.iter().map(|p| p.code).collect()
    }
}

impl Default for TrigramDetector {
    fn default() -> Self {
        Self::bundled()
    }
}

impl LanguageDetector for TrigramDetector {
    fn detect(&self, text: &str) -> Vec<(String, f64)> {
        let undetermined = vec![("und".to_string(), 0.0)];
        if text.trim().chars().count() < MIN_TEXT_CHARS {
            return undetermined;
        }
        let counts = trigram_counts(text);
        if counts.is_empty() {
            return undetermined;
        }
        let mut ranked: Vec<(String, u32)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(PROFILE_LEN);
        let (text_weights, text_norm) =
            rank_weights(ranked.iter().map(|(t, _)| t.clone()));
        // iterate the ranked list, not the map, so scores sum in a fixed order
        let mut scores: Vec<(String, f64)> = self
            .profiles
            .iter()
            .filter_map(|p| {
                let mut dot = 0.0;
                for (tri, _) in &ranked {
                    if let (Some(wt), Some(wp)) = (text_weights.get(tri), p.weights.get(tri)) {
                        dot += wt * wp;
                    }
                }
                let score = dot / (text_norm * p.norm);
                (score > 0.0).then(|| (p.code.to_string(), score))
            })
            .collect();
        if scores.is_empty() {
            return undetermined;
        }
        scores.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        let top = scores[0].1;
        scores.retain(|(_, s)| *s >= INCLUSION_RATIO * top);
        scores
    }
}
