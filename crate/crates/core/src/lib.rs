//! Shallow dark-web crawling and analysis toolkit.
//!
//! The pipeline runs in stages: seed generation ([`seeder`]), a windowed
//! breadth-first crawl over a pluggable transport ([`scheduler`]), HTML
//! field extraction ([`extractor`]), hybrid exact+fuzzy mirror detection
//! ([`mirror`]), mirror-collapsed topology analysis ([`graph`]), TF-IDF
//! logistic-regression content classification ([`classify`]) and
//! grammar-pattern prohibition detection ([`prohibit`]). The [`synth`]
//! module generates deterministic fixture corpora so the whole pipeline is
//! testable without network access.

pub mod classify;
pub mod corpus;
pub mod extractor;
pub mod graph;
pub mod mirror;
pub mod prohibit;
pub mod scheduler;
pub mod seeder;
pub mod synth;

pub use corpus::{
    normalize_url, CrawlStatus, LinkClass, NormalizedUrl, OnionAddress, OnionVersion, PageRecord,
};
pub use mirror::{detect_mirror, MirrorPage, MirrorVerdict, MirrorWeights};
pub use seeder::{extract_keywords, Keyword, Seed};
