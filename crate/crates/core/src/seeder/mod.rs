//! Systematic seed generation: rank keywords from a titles corpus by
//! summed TF-IDF, query pluggable search-engine clients with them, and
//! merge the results with manual seeds. Every seed carries a provenance
//! tag set (keyword terms and/or `"manual"`) so later reachability
//! analysis can attribute coverage to individual keywords.

use crate::classify::preprocess::{is_stop_word, tokenize_words};
use crate::classify::tfidf::{tfidf_vectorize, TfidfMode, Vocabulary};
use crate::corpus::{normalize_url, NormalizedUrl};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::PathBuf;
use thiserror::Error;

/// The demo keyword set used by the bundled fixtures.
pub const DEFAULT_KEYWORDS: [&str; 10] = [
    "drugs", "free", "hosting", "software", "hacking", "forum", "carding", "counter", "services",
    "service",
];

pub const MANUAL_TAG: &str = "manual";

#[derive(Debug, Error)]
pub enum SeederError {
    #[error("empty titles corpus")]
    EmptyCorpus,
}

#[derive(Debug, Error)]
#[error("engine {engine}: {message}")]
pub struct EngineError {
    pub engine: String,
    pub message: String,
}

/// A ranked keyword candidate; scores are corpus-summed TF-IDF weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub term: String,
    pub score: f64,
}

/// A crawl entry point plus the tags explaining how it was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub url: NormalizedUrl,
    pub provenance: BTreeSet<String>,
}

/// Ranks the vocabulary of `titles` by TF-IDF summed over documents
/// (standard scoring: sublinear tf, idf clamped at zero, L2-normalized
/// rows) and returns the top `k`. Stop words are dropped before scoring;
/// ties break lexicographically. Degenerate corpora where every idf
/// clamps to zero still rank, with zero scores.
pub fn extract_keywords(titles: &[String], k: usize) -> Result<Vec<Keyword>, SeederError> {
    let docs: Vec<Vec<String>> = titles
        .iter()
        .map(|t| {
            tokenize_words(t)
                .into_iter()
                .filter(|w| !is_stop_word(w))
                .collect()
        })
        .collect();
    let vocab = Vocabulary::fit(&docs).map_err(|_| SeederError::EmptyCorpus)?;
    let rows = tfidf_vectorize(&docs, &vocab, TfidfMode::Standard)
        .map_err(|_| SeederError::EmptyCorpus)?;
    let mut scores = vec![0.0f64; vocab.len()];
    for row in &rows {
        for &(column, weight) in row {
            scores[column] += weight;
        }
    }
    let mut ranked: Vec<Keyword> = vocab
        .terms()
        .map(|(term, column, _)| Keyword {
            term: term.to_string(),
            score: scores[column],
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then_with(|| a.term.cmp(&b.term))
    });
    ranked.truncate(k);
    Ok(ranked)
}

/// A search engine: takes a keyword term, returns URL strings. The
/// shipped implementation reads canned fixture files; live engines can be
/// plugged in behind the same interface.
pub trait SearchClient {
    fn name(&self) -> &str;
    fn search(&self, term: &str) -> Result<Vec<String>, EngineError>;
}

/// Reads `<dir>/<term>`, one URL per line; a missing file means the
/// engine has no results for that term.
pub struct FixtureSearchClient {
    name: String,
    dir: PathBuf,
}

impl FixtureSearchClient {
    pub fn new(name: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            dir: dir.into(),
        }
    }
}

impl SearchClient for FixtureSearchClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn search(&self, term: &str) -> Result<Vec<String>, EngineError> {
        match std::fs::read_to_string(self.dir.join(term)) {
            Ok(body) => Ok(body
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(EngineError {
                engine: self.name.clone(),
                message: e.to_string(),
            }),
        }
    }
}

/// Outcome of querying the engines: onion seeds plus counters for what
/// was dropped along the way.
#[derive(Debug, Default)]
pub struct QueryReport {
    pub seeds: Vec<Seed>,
    pub surface_discarded: usize,
    pub invalid_urls: usize,
    pub failed_queries: usize,
}

/// Queries every engine with every keyword. Surface results are
/// discarded (counted), failing queries are logged and skipped, and a
/// host reached through several keywords accumulates all of them in its
/// provenance. Seeds come back sorted by host.
pub fn query_engines(keywords: &[Keyword], engines: &[Box<dyn SearchClient>]) -> QueryReport {
    let mut report = QueryReport::default();
    let mut by_host: BTreeMap<String, Seed> = BTreeMap::new();
    for keyword in keywords {
        for engine in engines {
            let urls = match engine.search(&keyword.term) {
                Ok(urls) => urls,
                Err(e) => {
                    log::warn!("seed query failed, skipping: {e}");
                    report.failed_queries += 1;
                    continue;
                }
            };
            for raw in urls {
                let url = match normalize_url(&raw) {
                    Ok(url) => url,
                    Err(_) => {
                        report.invalid_urls += 1;
                        continue;
                    }
                };
                if !url.is_onion() {
                    report.surface_discarded += 1;
                    continue;
                }
                by_host
                    .entry(url.host().to_string())
                    .or_insert_with(|| Seed {
                        url,
                        provenance: BTreeSet::new(),
                    })
                    .provenance
                    .insert(keyword.term.clone());
            }
        }
    }
    report.seeds = by_host.into_values().collect();
    report
}

/// Folds manually curated URLs into the automatic seed list. Manual
/// entries are tagged `"manual"`, may be surface hosts, and a host present
/// on both sides keeps the union of its tags. Unparseable manual entries
/// are logged and skipped.
pub fn merge_seeds(auto: Vec<Seed>, manual: &[String]) -> Vec<Seed> {
    let mut by_host: BTreeMap<String, Seed> = auto
        .into_iter()
        .map(|seed| (seed.url.host().to_string(), seed))
        .collect();
    for raw in manual {
        let url = match normalize_url(raw) {
            Ok(url) => url,
            Err(e) => {
                log::warn!("skipping manual seed {raw:?}: {e}");
                continue;
            }
        };
        by_host
            .entry(url.host().to_string())
            .or_insert_with(|| Seed {
                url,
                provenance: BTreeSet::new(),
            })
            .provenance
            .insert(MANUAL_TAG.to_string());
    }
    by_host.into_values().collect()
}
