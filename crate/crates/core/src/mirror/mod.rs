//! Hybrid mirror detection: exact digest, fuzzy piecewise hashing with a
//! language-aware branch, first-seen clustering, and baseline comparisons.
//!
//! The pairwise workflow short-circuits in order: byte-identical documents
//! are exact copies; very short documents fall back to plain equality of
//! scheme and text (piecewise hashes are meaningless at that size); pages in
//! different languages are compared on scheme alone; everything else gets a
//! full-document fuzzy comparison and, failing that, a weighted split of
//! scheme and content similarity.

pub mod baselines;
pub mod bench;
pub mod ctph;

pub use ctph::{ctph_compare, ctph_hash, FuzzyHash};

use crate::corpus::CrawlTimestamp;
use crate::corpus::PageRecord;
use crate::extractor::ExtractedPage;
use md5::{Digest as _, Md5};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Documents smaller than this take the equality fallback instead of fuzzy
/// hashing.
pub const SHORT_DOC_FLOOR: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum MirrorError {
    #[error("page {0} has empty html")]
    EmptyPage(String),
    #[error("bad weights: {0}")]
    BadWeights(String),
}

/// Identity digest of the raw page bytes, algorithm pinned alongside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExactDigest {
    pub algorithm: &'static str,
    pub bytes: [u8; 16],
}

impl ExactDigest {
    pub fn of(data: &[u8]) -> Self {
        let mut hasher = Md5::new();
        hasher.update(data);
        ExactDigest {
            algorithm: "md5",
            bytes: hasher.finalize().into(),
        }
    }
}

impl fmt::Display for ExactDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.algorithm)?;
        for b in self.bytes {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Scheme/content split weights and the mirror decision threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorWeights {
    pub scheme_weight: f64,
    pub content_weight: f64,
    pub threshold: f64,
}

impl Default for MirrorWeights {
    fn default() -> Self {
        MirrorWeights {
            scheme_weight: 0.3,
            content_weight: 0.7,
            threshold: 0.90,
        }
    }
}

impl MirrorWeights {
    /// Weights must sum to 1 and the threshold must be a proportion.
    pub fn new(scheme_weight: f64, content_weight: f64, threshold: f64) -> Result<Self, MirrorError> {
        if !(scheme_weight >= 0.0 && content_weight >= 0.0)
            || (scheme_weight + content_weight - 1.0).abs() > 1e-9
        {
            return Err(MirrorError::BadWeights(format!(
                "scheme {scheme_weight} + content {content_weight} must sum to 1"
            )));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(MirrorError::BadWeights(format!(
                "threshold {threshold} outside [0, 1]"
            )));
        }
        Ok(MirrorWeights {
            scheme_weight,
            content_weight,
            threshold,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    ExactCopy,
    NearMirror,
    Distinct,
}

/// Which rule of the workflow produced the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictBranch {
    Digest,
    CrossLanguageScheme,
    FullHtmlFuzzy,
    WeightedSplit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorVerdict {
    pub kind: VerdictKind,
    pub score: f64,
    pub branch: VerdictBranch,
}

impl MirrorVerdict {
    pub fn is_mirror(&self) -> bool {
        matches!(self.kind, VerdictKind::ExactCopy | VerdictKind::NearMirror)
    }
}

/// Everything mirror detection needs to know about one page.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorPage {
    pub host: String,
    pub first_seen: CrawlTimestamp,
    pub html: Vec<u8>,
    pub text: String,
    pub scheme: String,
    /// Best-confidence detected language, `None` when undetermined.
    pub top_language: Option<String>,
}

impl MirrorPage {
    pub fn from_parts(record: &PageRecord, extracted: &ExtractedPage) -> Self {
        let top_language = extracted
            .languages
            .first()
            .filter(|(code, _)| code != "und")
            .map(|(code, _)| code.clone());
        MirrorPage {
            host: record.host().to_string(),
            first_seen: record.timestamps.first().copied().unwrap_or(CrawlTimestamp(0)),
            html: record.html.clone(),
            text: extracted.text.clone(),
            scheme: extracted.scheme.clone(),
            top_language,
        }
    }
}

/// A page with its digest and fuzzy hashes precomputed, so that clustering
/// and benchmarking hash each document exactly once.
#[derive(Debug, Clone)]
pub struct PreparedPage {
    pub page: MirrorPage,
    digest: ExactDigest,
    html_hash: FuzzyHash,
    scheme_hash: FuzzyHash,
    text_hash: FuzzyHash,
}

impl PreparedPage {
    pub fn new(page: MirrorPage) -> Self {
        let digest = ExactDigest::of(&page.html);
        let html_hash = ctph_hash(&page.html);
        let scheme_hash = ctph_hash(page.scheme.as_bytes());
        let text_hash = ctph_hash(page.text.as_bytes());
        PreparedPage {
            page,
            digest,
            html_hash,
            scheme_hash,
            text_hash,
        }
    }
}

fn decide(score: f64, weights: &MirrorWeights, branch: VerdictBranch) -> MirrorVerdict {
    let score = score.clamp(0.0, 1.0);
    let kind = if score >= weights.threshold {
        VerdictKind::NearMirror
    } else {
        VerdictKind::Distinct
    };
    MirrorVerdict {
        kind,
        score,
        branch,
    }
}

/// Pairwise mirror decision over prepared pages.
pub fn verdict(
    a: &PreparedPage,
    b: &PreparedPage,
    weights: &MirrorWeights,
) -> Result<MirrorVerdict, MirrorError> {
    if a.page.html.is_empty() {
        return Err(MirrorError::EmptyPage(a.page.host.clone()));
    }
    if b.page.html.is_empty() {
        return Err(MirrorError::EmptyPage(b.page.host.clone()));
    }
    if a.digest == b.digest {
        return Ok(MirrorVerdict {
            kind: VerdictKind::ExactCopy,
            score: 1.0,
            branch: VerdictBranch::Digest,
        });
    }
    if a.page.html.len() < SHORT_DOC_FLOOR || b.page.html.len() < SHORT_DOC_FLOOR {
        // piecewise hashes carry almost no signal here; fall back to equality
        let scheme_eq = f64::from(u8::from(a.page.scheme == b.page.scheme));
        let text_eq = f64::from(u8::from(a.page.text == b.page.text));
        let score = weights.scheme_weight * scheme_eq + weights.content_weight * text_eq;
        return Ok(decide(score, weights, VerdictBranch::WeightedSplit));
    }
    if let (Some(la), Some(lb)) = (&a.page.top_language, &b.page.top_language) {
        if la != lb {
            let score = f64::from(ctph_compare(&a.scheme_hash, &b.scheme_hash)) / 100.0;
            return Ok(decide(score, weights, VerdictBranch::CrossLanguageScheme));
        }
    }
    let full = f64::from(ctph_compare(&a.html_hash, &b.html_hash)) / 100.0;
    if full >= weights.threshold {
        return Ok(MirrorVerdict {
            kind: VerdictKind::NearMirror,
            score: full,
            branch: VerdictBranch::FullHtmlFuzzy,
        });
    }
    let scheme_sim = f64::from(ctph_compare(&a.scheme_hash, &b.scheme_hash)) / 100.0;
    let text_sim = f64::from(ctph_compare(&a.text_hash, &b.text_hash)) / 100.0;
    let score = weights.scheme_weight * scheme_sim + weights.content_weight * text_sim;
    Ok(decide(score, weights, VerdictBranch::WeightedSplit))
}

/// Pairwise mirror decision; prefer [`verdict`] over prepared pages when
/// comparing many pages.
pub fn detect_mirror(
    a: &MirrorPage,
    b: &MirrorPage,
    weights: &MirrorWeights,
) -> Result<MirrorVerdict, MirrorError> {
    verdict(
        &PreparedPage::new(a.clone()),
        &PreparedPage::new(b.clone()),
        weights,
    )
}

/// One mirror cluster: the earliest-crawled member represents it.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorCluster {
    pub representative: String,
    pub mirrors: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MirrorClusters {
    pub clusters: Vec<MirrorCluster>,
}

impl MirrorClusters {
    pub fn uniques(&self) -> Vec<&str> {
        self.clusters.iter().map(|c| c.representative.as_str()).collect()
    }

    /// host → representative host, for every clustered page.
    pub fn representative_of(&self) -> BTreeMap<&str, &str> {
        let mut map = BTreeMap::new();
        for c in &self.clusters {
            map.insert(c.representative.as_str(), c.representative.as_str());
            for m in &c.mirrors {
                map.insert(m.as_str(), c.representative.as_str());
            }
        }
        map
    }

    pub fn total_pages(&self) -> usize {
        self.clusters.iter().map(|c| 1 + c.mirrors.len()).sum()
    }
}

/// Single-pass first-seen clustering: pages are visited in first-crawl
/// order and joined to the first existing representative they match;
/// non-matching pages found a new cluster. No transitive re-linking.
pub fn cluster_mirrors(
    pages: Vec<MirrorPage>,
    weights: &MirrorWeights,
) -> Result<MirrorClusters, MirrorError> {
    let mut prepared: Vec<PreparedPage> = pages.into_iter().map(PreparedPage::new).collect();
    prepared.sort_by(|a, b| {
        a.page
            .first_seen
            .cmp(&b.page.first_seen)
            .then_with(|| a.page.host.cmp(&b.page.host))
    });
    let mut reps: Vec<PreparedPage> = Vec::new();
    let mut clusters: Vec<MirrorCluster> = Vec::new();
    for page in prepared {
        let mut joined = false;
        for (idx, rep) in reps.iter().enumerate() {
            if verdict(&page, rep, weights)?.is_mirror() {
                clusters[idx].mirrors.push(page.page.host.clone());
                joined = true;
                break;
            }
        }
        if !joined {
            clusters.push(MirrorCluster {
                representative: page.page.host.clone(),
                mirrors: Vec::new(),
            });
            reps.push(page);
        }
    }
    Ok(MirrorClusters { clusters })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(seed: u64, n: usize) -> String {
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let vocab = [
            "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india",
            "juliet", "kilo", "lima", "mike", "november", "oscar", "papa", "quebec", "romeo",
            "sierra", "tango", "uniform", "victor", "whiskey", "xray", "yankee", "zulu",
        ];
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            out.push(vocab[(state % vocab.len() as u64) as usize]);
        }
        out.join(" ")
    }

    fn page(host: &str, ts: i64, body: &str, lang: Option<&str>) -> MirrorPage {
        let html = format!(
            "<html><head><title>{host}</title></head><body><div class=\"main\"><p>{body}</p></div></body></html>"
        );
        MirrorPage {
            host: host.to_string(),
            first_seen: CrawlTimestamp(ts),
            html: html.clone().into_bytes(),
            text: crate::extractor::extract_text(html.as_bytes()),
            scheme: crate::extractor::extract_scheme(html.as_bytes()),
            top_language: lang.map(str::to_string),
        }
    }

    #[test]
    fn byte_identical_pages_are_exact_copies() {
        let body = words(1, 400);
        let a = page("a.onion", 0, &body, Some("en"));
        let mut b = page("b.onion", 1, &body, Some("en"));
        b.html = a.html.clone();
        let v = detect_mirror(&a, &b, &MirrorWeights::default()).unwrap();
        assert_eq!(v.kind, VerdictKind::ExactCopy);
        assert_eq!(v.branch, VerdictBranch::Digest);
        assert_eq!(v.score, 1.0);
    }

    #[test]
    fn empty_html_is_an_error() {
        let a = page("a.onion", 0, &words(1, 200), Some("en"));
        let mut b = page("b.onion", 1, &words(2, 200), Some("en"));
        b.html.clear();
        let err = detect_mirror(&a, &b, &MirrorWeights::default()).unwrap_err();
        assert_eq!(err, MirrorError::EmptyPage("b.onion".to_string()));
    }

    #[test]
    fn short_documents_use_equality_fallback() {
        // same scheme and text, different attribute value ⇒ different bytes
        let mk = |attr: &str| MirrorPage {
            host: format!("{attr}.onion"),
            first_seen: CrawlTimestamp(0),
            html: format!("<div id=\"{attr}\"><p>tiny page</p></div>").into_bytes(),
            text: "tiny page".to_string(),
            scheme: "<div id><p></p></div>".to_string(),
            top_language: None,
        };
        let v = detect_mirror(&mk("one"), &mk("two"), &MirrorWeights::default()).unwrap();
        assert_eq!(v.branch, VerdictBranch::WeightedSplit);
        assert_eq!(v.kind, VerdictKind::NearMirror);
        assert!((v.score - 1.0).abs() < 1e-12);

        // same scheme, different text: only the scheme weight survives
        let mut other = mk("three");
        other.text = "different words".to_string();
        other.html = b"<div id=\"three\"><p>different words</p></div>".to_vec();
        let v = detect_mirror(&mk("one"), &other, &MirrorWeights::default()).unwrap();
        assert_eq!(v.kind, VerdictKind::Distinct);
        assert!((v.score - 0.3).abs() < 1e-12);
    }

    #[test]
    fn cross_language_pages_compare_schemes_only() {
        let body_en = words(3, 500);
        let body_de = words(4, 500);
        let a = page("a.onion", 0, &body_en, Some("en"));
        let b = page("b.onion", 1, &body_de, Some("de"));
        let v = detect_mirror(&a, &b, &MirrorWeights::default()).unwrap();
        assert_eq!(v.branch, VerdictBranch::CrossLanguageScheme);
        // identical template ⇒ identical scheme ⇒ full score
        assert_eq!(v.kind, VerdictKind::NearMirror);
        assert_eq!(v.score, 1.0);
    }

    #[test]
    fn shared_template_distinct_content_stays_distinct() {
        let a = page("a.onion", 0, &words(5, 600), Some("en"));
        let b = page("b.onion", 1, &words(200, 600), Some("en"));
        let v = detect_mirror(&a, &b, &MirrorWeights::default()).unwrap();
        assert_eq!(v.kind, VerdictKind::Distinct);
        assert_eq!(v.branch, VerdictBranch::WeightedSplit);
        // identical scheme contributes at most its weight; disjoint content
        // keeps the total well under the threshold
        assert!(v.score <= 0.37, "score {}", v.score);
    }

    #[test]
    fn near_identical_pages_are_near_mirrors() {
        let mut body_b = words(6, 600);
        body_b.push_str(" appended tail bit");
        let a = page("a.onion", 0, &words(6, 600), Some("en"));
        let b = page("b.onion", 1, &body_b, Some("en"));
        let v = detect_mirror(&a, &b, &MirrorWeights::default()).unwrap();
        assert_eq!(v.kind, VerdictKind::NearMirror);
        assert!(v.score >= 0.9);
    }

    #[test]
    fn verdicts_are_symmetric() {
        let pages = [
            page("a.onion", 0, &words(7, 500), Some("en")),
            page("b.onion", 1, &words(7, 500), Some("de")),
            page("c.onion", 2, &words(8, 500), Some("en")),
            page("d.onion", 3, "tiny", None),
        ];
        let w = MirrorWeights::default();
        for x in &pages {
            for y in &pages {
                let xy = detect_mirror(x, y, &w).unwrap();
                let yx = detect_mirror(y, x, &w).unwrap();
                assert_eq!(xy.kind, yx.kind);
                assert_eq!(xy.branch, yx.branch);
                assert!((xy.score - yx.score).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_copy_outranks_any_threshold() {
        let body = words(9, 400);
        let a = page("a.onion", 0, &body, Some("en"));
        let mut b = page("b.onion", 1, &body, Some("de"));
        b.html = a.html.clone();
        for threshold in [0.0, 0.5, 1.0] {
            let w = MirrorWeights::new(0.3, 0.7, threshold).unwrap();
            let v = detect_mirror(&a, &b, &w).unwrap();
            assert_eq!(v.kind, VerdictKind::ExactCopy);
            assert!(v.score >= threshold);
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(MirrorWeights::new(0.5, 0.5, 0.9).is_ok());
        assert!(MirrorWeights::new(0.6, 0.5, 0.9).is_err());
        assert!(MirrorWeights::new(0.3, 0.7, 1.5).is_err());
    }

    #[test]
    fn identical_pages_cluster_under_earliest() {
        let body = words(10, 500);
        let mut pages = Vec::new();
        for (i, host) in ["c.onion", "a.onion", "b.onion"].iter().enumerate() {
            let mut p = page(host, 100 - i as i64, &body, Some("en"));
            p.html = format!("<html><body><p>{body}</p></body></html>").into_bytes();
            pages.push(p);
        }
        let clusters = cluster_mirrors(pages, &MirrorWeights::default()).unwrap();
        assert_eq!(clusters.clusters.len(), 1);
        // b.onion has the smallest timestamp (100 - 2)
        assert_eq!(clusters.clusters[0].representative, "b.onion");
        assert_eq!(clusters.clusters[0].mirrors.len(), 2);
    }

    #[test]
    fn clustering_partitions_the_input() {
        let mut pages = Vec::new();
        // group 1: three near-copies; group 2: two; one singleton
        for i in 0..3 {
            pages.push(page(&format!("g1-{i}.onion"), i, &words(11, 500), Some("en")));
        }
        for i in 0..2 {
            pages.push(page(&format!("g2-{i}.onion"), 10 + i, &words(400, 500), Some("en")));
        }
        pages.push(page("solo.onion", 20, &words(900, 500), Some("en")));
        let n = pages.len();
        let clusters = cluster_mirrors(pages, &MirrorWeights::default()).unwrap();
        assert_eq!(clusters.total_pages(), n);
        assert_eq!(clusters.clusters.len(), 3);
        let reps = clusters.uniques();
        assert!(reps.contains(&"g1-0.onion"));
        assert!(reps.contains(&"g2-0.onion"));
        assert!(reps.contains(&"solo.onion"));
    }

    #[test]
    fn empty_input_clusters_to_nothing() {
        let clusters = cluster_mirrors(Vec::new(), &MirrorWeights::default()).unwrap();
        assert!(clusters.clusters.is_empty());
    }
}
