//! Grammar-pattern detector separating sites that *allow* from sites
//! that *forbid* content matching a keyword lexicon. Sentences are run
//! through a small lexicon-and-suffix tagger and checked against five
//! fixed slot structures; any structure hit means prohibition. No keyword
//! list is shipped — callers supply their own lexicon.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProhibitError {
    #[error("unknown lexicon section {0:?}")]
    UnknownSection(String),
    #[error("term {0:?} appears before any [section] header")]
    OrphanTerm(String),
    #[error("term {0:?} appears with both polarities")]
    PolarityOverlap(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Word lists driving the tagger. Verb and adjective sets carry the
/// polarity used by the pattern rules; they must not overlap across
/// polarity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    pub keywords: BTreeSet<String>,
    pub negative_verbs: BTreeSet<String>,
    pub positive_verbs: BTreeSet<String>,
    pub negative_adjectives: BTreeSet<String>,
    pub positive_adjectives: BTreeSet<String>,
}

impl Lexicon {
    /// Parses the sectioned plain-text format: `[keywords]`,
    /// `[negative_verbs]`, `[positive_verbs]`, `[negative_adjectives]`,
    /// `[positive_adjectives]` headers with one lowercase term per line.
    pub fn parse(text: &str) -> Result<Lexicon, ProhibitError> {
        let mut lexicon = Lexicon::default();
        let mut section: Option<&str> = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(match name {
                    "keywords" => "keywords",
                    "negative_verbs" => "negative_verbs",
                    "positive_verbs" => "positive_verbs",
                    "negative_adjectives" => "negative_adjectives",
                    "positive_adjectives" => "positive_adjectives",
                    other => return Err(ProhibitError::UnknownSection(other.to_string())),
                });
                continue;
            }
            let term = line.to_lowercase();
            let set = match section {
                Some("keywords") => &mut lexicon.keywords,
                Some("negative_verbs") => &mut lexicon.negative_verbs,
                Some("positive_verbs") => &mut lexicon.positive_verbs,
                Some("negative_adjectives") => &mut lexicon.negative_adjectives,
                Some("positive_adjectives") => &mut lexicon.positive_adjectives,
                _ => return Err(ProhibitError::OrphanTerm(term)),
            };
            set.insert(term);
        }
        lexicon.validate()?;
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<Lexicon, ProhibitError> {
        Lexicon::parse(&std::fs::read_to_string(path)?)
    }

    /// Polarity sets must be disjoint — a term cannot both allow and
    /// forbid.
    pub fn validate(&self) -> Result<(), ProhibitError> {
        if let Some(term) = self.negative_verbs.intersection(&self.positive_verbs).next() {
            return Err(ProhibitError::PolarityOverlap(term.clone()));
        }
        if let Some(term) = self
            .negative_adjectives
            .intersection(&self.positive_adjectives)
            .next()
        {
            return Err(ProhibitError::PolarityOverlap(term.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

/// Tags assigned by [`tag_tokens`]. `Vbn(None)` marks a past participle
/// recognized by suffix or the irregular list but absent from the
/// polarity lexicon — it satisfies no signed slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tag {
    Key,
    Vbz,
    Vb,
    Vbn(Option<Polarity>),
    Jj(Polarity),
    Will,
    Not,
    Other,
}

fn irregular_participles() -> &'static BTreeSet<&'static str> {
    static LIST: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    LIST.get_or_init(|| {
        include_str!("../../data/irregular_participles.txt")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

/// Lowercased word tokens; "n't" contractions split into stem + `n't`.
fn split_words(sentence: &str) -> Vec<String> {
    let mut words = Vec::new();
    for raw in sentence
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric() && c != '\'')
    {
        let raw = raw.trim_matches('\'');
        if raw.is_empty() {
            continue;
        }
        match raw.strip_suffix("n't") {
            Some(stem) if !stem.is_empty() => {
                words.push(stem.to_string());
                words.push("n't".to_string());
            }
            _ => words.push(raw.to_string()),
        }
    }
    words
}

/// Deterministic lexicon-and-suffix tagger. Priority per token: keyword,
/// not/n't, will, lexicon adjective, lexicon/irregular/suffix participle,
/// be (base form after "will", else treated like is/are), is/are and
/// -s verbs, other.
pub fn tag_tokens(sentence: &str, lexicon: &Lexicon) -> Vec<(String, Tag)> {
    let mut tagged: Vec<(String, Tag)> = Vec::new();
    for word in split_words(sentence) {
        let prev_is_will = matches!(tagged.last(), Some((_, Tag::Will)));
        let tag = if lexicon.keywords.contains(&word) {
            Tag::Key
        } else if word == "not" || word == "n't" {
            Tag::Not
        } else if word == "will" {
            Tag::Will
        } else if lexicon.negative_adjectives.contains(&word) {
            Tag::Jj(Polarity::Negative)
        } else if lexicon.positive_adjectives.contains(&word) {
            Tag::Jj(Polarity::Positive)
        } else if lexicon.negative_verbs.contains(&word) {
            Tag::Vbn(Some(Polarity::Negative))
        } else if lexicon.positive_verbs.contains(&word) {
            Tag::Vbn(Some(Polarity::Positive))
        } else if irregular_participles().contains(word.as_str())
            || (word.len() >= 4 && (word.ends_with("ed") || word.ends_with("en")))
        {
            Tag::Vbn(None)
        } else if word == "be" {
            if prev_is_will {
                Tag::Vb
            } else {
                Tag::Vbz
            }
        } else if word == "is" || word == "are" || (word.len() >= 3 && word.ends_with('s')) {
            Tag::Vbz
        } else {
            Tag::Other
        };
        tagged.push((word, tag));
    }
    tagged
}

/// A slot in a pattern rule; signed slots only accept tags carrying the
/// matching lexicon polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Vbz,
    Vb,
    Will,
    Not,
    VbnPositive,
    VbnNegative,
    JjPositive,
    JjNegative,
}

impl Slot {
    fn accepts(self, tag: &Tag) -> bool {
        match (self, tag) {
            (Slot::Vbz, Tag::Vbz)
            | (Slot::Vb, Tag::Vb)
            | (Slot::Will, Tag::Will)
            | (Slot::Not, Tag::Not)
            | (Slot::VbnPositive, Tag::Vbn(Some(Polarity::Positive)))
            | (Slot::VbnNegative, Tag::Vbn(Some(Polarity::Negative)))
            | (Slot::JjPositive, Tag::Jj(Polarity::Positive))
            | (Slot::JjNegative, Tag::Jj(Polarity::Negative)) => true,
            _ => false,
        }
    }
}

/// One prohibition structure: the slots that must follow a keyword, in
/// order, within the match window.
#[derive(Debug, Clone, Copy)]
pub struct PatternRule {
    pub id: &'static str,
    slots: &'static [Slot],
}

/// The five prohibition structures, in table order.
pub const RULES: [PatternRule; 5] = [
    PatternRule {
        id: "KEY+VBZ+NOT/N'T+(+)VBN",
        slots: &[Slot::Vbz, Slot::Not, Slot::VbnPositive],
    },
    PatternRule {
        id: "KEY+WILL+VB+(-)VBN",
        slots: &[Slot::Will, Slot::Vb, Slot::VbnNegative],
    },
    PatternRule {
        id: "KEY+VBZ+NOT/N'T+(+)JJ",
        slots: &[Slot::Vbz, Slot::Not, Slot::JjPositive],
    },
    PatternRule {
        id: "KEY+VBZ+(-)VBN",
        slots: &[Slot::Vbz, Slot::VbnNegative],
    },
    PatternRule {
        id: "KEY+VBZ+(-)JJ",
        slots: &[Slot::Vbz, Slot::JjNegative],
    },
];

/// How many tokens after a keyword a rule may span.
pub const MATCH_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Allows,
    Forbids,
    NoSignal,
}

/// Site-level outcome plus the keyword sentences behind it; a rule id is
/// attached where a prohibition structure fired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteVerdict {
    pub verdict: Verdict,
    pub matched_sentences: Vec<(String, Option<&'static str>)>,
}

/// Rule slots must appear as an in-order subsequence of the window.
fn first_matching_rule(window: &[Tag]) -> Option<&'static str> {
    RULES.iter().find_map(|rule| {
        let mut tags = window.iter();
        rule.slots
            .iter()
            .all(|slot| tags.by_ref().any(|tag| slot.accepts(tag)))
            .then_some(rule.id)
    })
}

/// Splits on periods and newlines, tags every keyword sentence, and
/// aggregates: any structure hit means `Forbids`, a keyword with no hit
/// anywhere means `Allows`, no keyword at all (or an empty keyword
/// lexicon) means `NoSignal`. Sentence order cannot change the verdict.
pub fn classify_site(text: &str, lexicon: &Lexicon) -> SiteVerdict {
    if lexicon.keywords.is_empty() {
        log::warn!("empty keyword lexicon: every site reports NoSignal");
        return SiteVerdict {
            verdict: Verdict::NoSignal,
            matched_sentences: Vec::new(),
        };
    }
    let mut matched_sentences = Vec::new();
    let mut forbids = false;
    let mut keyword_seen = false;
    for sentence in text.split(['.', '\n']) {
        let sentence = sentence.trim();
        if sentence.is_empty() {
            continue;
        }
        let tagged = tag_tokens(sentence, lexicon);
        let tags: Vec<&Tag> = tagged.iter().map(|(_, t)| t).collect();
        let mut sentence_rule: Option<&'static str> = None;
        let mut sentence_has_key = false;
        for (pos, tag) in tags.iter().enumerate() {
            if **tag != Tag::Key {
                continue;
            }
            sentence_has_key = true;
            let window: Vec<Tag> = tags[pos + 1..]
                .iter()
                .take(MATCH_WINDOW)
                .map(|t| (*t).clone())
                .collect();
            if let Some(id) = first_matching_rule(&window) {
                sentence_rule = Some(id);
                break;
            }
        }
        if sentence_has_key {
            keyword_seen = true;
            forbids |= sentence_rule.is_some();
            matched_sentences.push((sentence.to_string(), sentence_rule));
        }
    }
    let verdict = if forbids {
        Verdict::Forbids
    } else if keyword_seen {
        Verdict::Allows
    } else {
        Verdict::NoSignal
    };
    SiteVerdict {
        verdict,
        matched_sentences,
    }
}
