//! Core data model: onion addresses, page records and the snapshot store.
//!
//! Every stage of the pipeline keys pages by *normalized host*, produced by
//! [`normalize_url`]. Normalization is deliberately lossy and idempotent:
//! scheme, userinfo, port, path, query and fragment are dropped,
//! subdomain labels in front of the registrable onion label are stripped, and
//! the rest is lowercased. Hosts that do not end in `.onion` are kept as
//! surface hosts so that hand-provided surface seeds survive the round trip.

mod snapshot;

pub use snapshot::{load_snapshot, save_snapshot, SNAPSHOT_FORMAT_VERSION};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Default cap on stored raw HTML, in bytes. Bodies over the cap are
/// truncated at the cap and flagged in the record metadata.
pub const DEFAULT_MAX_HTML_BYTES: usize = 4 * 1024 * 1024;

/// Metadata key set on records whose HTML was cut at the storage cap.
pub const META_TRUNCATED: &str = "truncated";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty input")]
    EmptyInput,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot schema violation at line {line}: {message}")]
    Schema { line: usize, message: String },
}

/// Hidden-service address format generation, judged by label length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnionVersion {
    /// 16 base32 characters.
    V2,
    /// 56 base32 characters.
    V3,
    /// Ends in `.onion` but the label fits neither generation.
    Malformed,
}

/// A normalized hidden-service host: registrable label plus `.onion`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OnionAddress {
    /// Lowercase `label.onion`, no scheme, port, path or subdomains.
    pub host: String,
    pub version: OnionVersion,
}

impl OnionAddress {
    /// The label in front of `.onion`.
    pub fn label(&self) -> &str {
        self.host.strip_suffix(".onion").unwrap_or(&self.host)
    }
}

impl fmt::Display for OnionAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.host)
    }
}

/// Outcome of [`normalize_url`]: either a hidden-service address or a
/// surface host kept verbatim (minus scheme/port/path).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NormalizedUrl {
    Onion(OnionAddress),
    Surface { host: String },
}

impl NormalizedUrl {
    pub fn host(&self) -> &str {
        match self {
            NormalizedUrl::Onion(a) => &a.host,
            NormalizedUrl::Surface { host } => host,
        }
    }

    pub fn is_onion(&self) -> bool {
        matches!(self, NormalizedUrl::Onion(_))
    }

    pub fn onion(&self) -> Option<&OnionAddress> {
        match self {
            NormalizedUrl::Onion(a) => Some(a),
            NormalizedUrl::Surface { .. } => None,
        }
    }
}

impl fmt::Display for NormalizedUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.host())
    }
}

fn is_base32_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .bytes()
            .all(|b| b.is_ascii_lowercase() || (b'2'..=b'7').contains(&b))
}

/// Reduce a raw URL or host fragment to its normalized host.
///
/// Strips scheme, userinfo, port, path, query and fragment; lowercases;
/// strips subdomains down to the registrable onion label. `.onion` hosts are
/// classified [`OnionVersion::V2`] (16-char base32 label), [`OnionVersion::V3`]
/// (56-char base32 label) or [`OnionVersion::Malformed`]; anything else
/// becomes [`NormalizedUrl::Surface`]. Idempotent: feeding the returned host
/// back in reproduces the same value.
pub fn normalize_url(raw: &str) -> Result<NormalizedUrl, CorpusError> {
    let mut s = raw.trim();
    if s.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    if let Some(idx) = s.find("://") {
        s = &s[idx + 3..];
    }
    // Authority ends at the first path/query/fragment delimiter or stray
    // whitespace; userinfo ends at the last '@' before that.
    let end = s
        .find(|c: char| c == '/' || c == '?' || c == '#' || c.is_whitespace())
        .unwrap_or(s.len());
    let mut authority = &s[..end];
    if let Some(at) = authority.rfind('@') {
        authority = &authority[at + 1..];
    }
    if let Some(colon) = authority.find(':') {
        authority = &authority[..colon];
    }
    let host = authority.trim_matches('.').to_lowercase();
    if host.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let labels: Vec<&str> = host.split('.').filter(|l| !l.is_empty()).collect();
    if labels.len() >= 2 && *labels.last().unwrap() == "onion" {
        let label = labels[labels.len() - 2].to_string();
        let version = match label.len() {
            16 if is_base32_label(&label) => OnionVersion::V2,
            56 if is_base32_label(&label) => OnionVersion::V3,
            _ => OnionVersion::Malformed,
        };
        Ok(NormalizedUrl::Onion(OnionAddress {
            host: format!("{label}.onion"),
            version,
        }))
    } else {
        Ok(NormalizedUrl::Surface {
            host: labels.join("."),
        })
    }
}

/// How a discovered link relates to the page it was found on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    /// Same normalized host as the containing page.
    Own,
    /// A different hidden service.
    ExternalOnion,
    /// A clear-web host.
    Surface,
}

/// Crawl lifecycle state of a host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrawlStatus {
    Pending,
    Fetched,
    /// Exhausted the retry budget without a successful fetch.
    Unreachable,
}

/// Maximum fetch attempts per host before it is marked unreachable.
pub const MAX_ATTEMPTS: u8 = 5;

/// Seconds since the Unix epoch, formatted `dd-MM-yy HH:mm:ss`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CrawlTimestamp(pub i64);

impl fmt::Display for CrawlTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dt = chrono::DateTime::from_timestamp(self.0, 0).unwrap_or_default();
        write!(f, "{}", dt.format("%d-%m-%y %H:%M:%S"))
    }
}

impl std::str::FromStr for CrawlTimestamp {
    type Err = chrono::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let dt = chrono::NaiveDateTime::parse_from_str(s, "%d-%m-%y %H:%M:%S")?;
        Ok(CrawlTimestamp(dt.and_utc().timestamp()))
    }
}

impl Serialize for CrawlTimestamp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CrawlTimestamp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything recorded about one crawled host.
///
/// `timestamps` is append-only and non-decreasing: one entry per observation
/// of the page, earliest first. `languages` is never empty for a fetched page
/// with non-empty extracted text (`und` is the fallback). `referenced_by`
/// holds normalized hosts that linked here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRecord {
    pub url: NormalizedUrl,
    pub status: CrawlStatus,
    /// Fetch attempts so far; `Unreachable` implies this hit [`MAX_ATTEMPTS`].
    pub attempts: u8,
    pub metadata: BTreeMap<String, String>,
    pub link_list: Vec<(String, LinkClass)>,
    pub referenced_by: BTreeSet<String>,
    #[serde(with = "base64_bytes")]
    pub html: Vec<u8>,
    pub timestamps: Vec<CrawlTimestamp>,
    pub languages: Vec<String>,
    /// Link distance from the nearest seed.
    pub depth: u32,
}

impl PageRecord {
    /// A fresh record for a host that has only been discovered.
    pub fn discovered(url: NormalizedUrl, depth: u32) -> Self {
        PageRecord {
            url,
            status: CrawlStatus::Pending,
            attempts: 0,
            metadata: BTreeMap::new(),
            link_list: Vec::new(),
            referenced_by: BTreeSet::new(),
            html: Vec::new(),
            timestamps: Vec::new(),
            languages: Vec::new(),
            depth,
        }
    }

    pub fn host(&self) -> &str {
        self.url.host()
    }

    /// Append an observation time, keeping the sequence non-decreasing.
    pub fn push_timestamp(&mut self, ts: CrawlTimestamp) {
        debug_assert!(self.timestamps.last().map_or(true, |last| *last <= ts));
        self.timestamps.push(ts);
    }

    /// Store a fetched body, truncating at `cap` and flagging the cut.
    pub fn store_html(&mut self, mut body: Vec<u8>, cap: usize) {
        if body.len() > cap {
            body.truncate(cap);
            self.metadata
                .insert(META_TRUNCATED.to_string(), "true".to_string());
        }
        self.html = body;
    }

    /// Check the cross-field rules a well-formed record must satisfy.
    pub fn validate(&self) -> Result<(), String> {
        if let NormalizedUrl::Onion(a) = &self.url {
            let expected = match a.label().len() {
                16 if is_base32_label(a.label()) => OnionVersion::V2,
                56 if is_base32_label(a.label()) => OnionVersion::V3,
                _ => OnionVersion::Malformed,
            };
            if a.version != expected {
                return Err(format!(
                    "host {} tagged {:?}, label says {:?}",
                    a.host, a.version, expected
                ));
            }
        }
        if self.attempts > MAX_ATTEMPTS {
            return Err(format!("attempts {} over budget", self.attempts));
        }
        // the converse is legal: a page may succeed on its final attempt
        if self.status == CrawlStatus::Unreachable && self.attempts != MAX_ATTEMPTS {
            return Err(format!(
                "status {:?} with {} attempts",
                self.status, self.attempts
            ));
        }
        if self.timestamps.windows(2).any(|w| w[0] > w[1]) {
            return Err("timestamps decrease".to_string());
        }
        Ok(())
    }
}

mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(deserializer)?;
        STANDARD.decode(s.as_bytes()).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const V2: &str = "abcdefgh23456723";
    const V3: &str = "vww6ybal4bd7szmgncyruucpgfkqahzddi37ktceo3ah7ngmcopnpyyd";

    #[test]
    fn normalize_strips_scheme_path_port() {
        let u = normalize_url(&format!("http://{V2}.onion:8080/market/index?x=1#top")).unwrap();
        assert_eq!(u.host(), format!("{V2}.onion"));
        assert_eq!(u.onion().unwrap().version, OnionVersion::V2);
    }

    #[test]
    fn normalize_strips_subdomains_and_case() {
        let u = normalize_url(&format!("https://WWW.Mail.{}.ONION/", V3.to_uppercase())).unwrap();
        assert_eq!(u.host(), format!("{V3}.onion"));
        assert_eq!(u.onion().unwrap().version, OnionVersion::V3);
    }

    #[test]
    fn normalize_strips_userinfo() {
        let u = normalize_url(&format!("http://user:pass@{V2}.onion/")).unwrap();
        assert_eq!(u.host(), format!("{V2}.onion"));
    }

    #[test]
    fn normalize_flags_malformed_labels() {
        let u = normalize_url("http://tooshort.onion/").unwrap();
        assert_eq!(u.onion().unwrap().version, OnionVersion::Malformed);
        // base32 forbids 0, 1, 8, 9
        let u = normalize_url("http://abcdefgh01890189.onion/").unwrap();
        assert_eq!(u.onion().unwrap().version, OnionVersion::Malformed);
    }

    #[test]
    fn normalize_keeps_surface_hosts() {
        let u = normalize_url("https://example.com/path").unwrap();
        assert_eq!(u, NormalizedUrl::Surface { host: "example.com".into() });
        assert!(!u.is_onion());
    }

    #[test]
    fn normalize_rejects_empty() {
        assert!(matches!(normalize_url(""), Err(CorpusError::EmptyInput)));
        assert!(matches!(normalize_url("   "), Err(CorpusError::EmptyInput)));
        assert!(matches!(normalize_url("http://"), Err(CorpusError::EmptyInput)));
    }

    #[test]
    fn timestamp_round_trips_display_format() {
        let ts = CrawlTimestamp(1_700_000_000);
        let shown = ts.to_string();
        assert_eq!(shown, "14-11-23 22:13:20");
        assert_eq!(shown.parse::<CrawlTimestamp>().unwrap(), ts);
    }

    #[test]
    fn store_html_truncates_and_flags() {
        let mut rec = PageRecord::discovered(normalize_url(&format!("{V2}.onion")).unwrap(), 0);
        rec.store_html(vec![b'x'; 100], 64);
        assert_eq!(rec.html.len(), 64);
        assert_eq!(rec.metadata.get(META_TRUNCATED).map(String::as_str), Some("true"));

        let mut rec2 = PageRecord::discovered(normalize_url(&format!("{V2}.onion")).unwrap(), 0);
        rec2.store_html(vec![b'x'; 64], 64);
        assert!(rec2.metadata.is_empty());
    }

    #[test]
    fn validate_ties_unreachable_to_budget() {
        let mut rec = PageRecord::discovered(normalize_url(&format!("{V2}.onion")).unwrap(), 0);
        rec.status = CrawlStatus::Unreachable;
        rec.attempts = 3;
        assert!(rec.validate().is_err());
        rec.attempts = MAX_ATTEMPTS;
        assert!(rec.validate().is_ok());
    }

    fn host_strategy() -> impl Strategy<Value = String> {
        prop_oneof![
            proptest::collection::vec(
                proptest::sample::select("abcdefghijklmnopqrstuvwxyz234567".as_bytes().to_vec()),
                16
            )
            .prop_map(|b| format!("{}.onion", String::from_utf8(b).unwrap())),
            proptest::collection::vec(
                proptest::sample::select("abcdefghijklmnopqrstuvwxyz234567".as_bytes().to_vec()),
                56
            )
            .prop_map(|b| format!("{}.onion", String::from_utf8(b).unwrap())),
            "[a-z]{3,12}\\.(com|org|net)",
        ]
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(host in host_strategy(),
                                   scheme in prop_oneof![Just(""), Just("http://"), Just("https://")],
                                   path in prop_oneof![Just(""), Just("/"), Just("/a/b?q=1#f")]) {
            let first = normalize_url(&format!("{scheme}{host}{path}")).unwrap();
            let second = normalize_url(first.host()).unwrap();
            prop_assert_eq!(first, second);
        }

        #[test]
        fn normalized_hosts_are_clean(raw in "\\PC{1,40}") {
            if let Ok(u) = normalize_url(&raw) {
                let h = u.host();
                prop_assert!(!h.is_empty());
                prop_assert!(!h.contains(['/', '?', '#', ':', '@']));
                prop_assert!(!h.chars().any(char::is_whitespace));
                let lowered = h.to_lowercase();
                prop_assert_eq!(h, lowered.as_str());
            }
        }
    }
}
