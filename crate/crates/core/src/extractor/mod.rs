//! HTML field extraction: visible text, tag-only scheme, classified links,
//! page metadata and language detection.
//!
//! The tokenizer is tolerant and non-validating — hidden-service HTML is
//! frequently malformed, so unclosed tags, bare attributes and stray `<`
//! characters all pass through instead of failing the page. No DOM is built;
//! every extractor is a single pass over the token stream.
//!
//! Link deduplication is host-granular: the crawl frontier and the link graph
//! both operate on normalized hosts, so the first link to a host wins and
//! later mentions (including the same address re-matched inside an `href`)
//! are collapsed.

pub mod language;

pub use language::{LanguageDetector, TrigramDetector};

use crate::corpus::{normalize_url, LinkClass, NormalizedUrl, OnionAddress};
use std::collections::{BTreeMap, BTreeSet};

/// Everything the extractor derives from one raw HTML document.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedPage {
    /// Tag-free visible text, whitespace-collapsed.
    pub text: String,
    /// Tag tokens only, attribute values dropped: `<div class><a href></a></div>`.
    pub scheme: String,
    /// Raw link strings with their classification, document order, first
    /// occurrence per normalized host.
    pub links: Vec<(String, LinkClass)>,
    pub title: String,
    /// `<meta>` name/content pairs plus the title under key `title`.
    pub metadata: BTreeMap<String, String>,
    /// Ranked language codes with confidences.
    pub languages: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    /// Opening (or self-closing) tag: lowercase name, attrs as
    /// (lowercase name, decoded value) in document order.
    Open {
        name: String,
        attrs: Vec<(String, Option<String>)>,
        pos: usize,
    },
    Close {
        name: String,
    },
    Text {
        content: String,
    },
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == ':'
}

/// Decode the handful of entities that matter for text comparison; unknown
/// entities pass through verbatim.
fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'&' {
            if let Some(semi) = s[i..].find(';').map(|j| i + j) {
                let body = &s[i + 1..semi];
                if semi - i <= 12 {
                    let decoded = match body {
                        "amp" => Some('&'),
                        "lt" => Some('<'),
                        "gt" => Some('>'),
                        "quot" => Some('"'),
                        "apos" => Some('\''),
                        "nbsp" => Some(' '),
                        _ => {
                            if let Some(num) = body.strip_prefix('#') {
                                let code = if let Some(hex) =
                                    num.strip_prefix('x').or_else(|| num.strip_prefix('X'))
                                {
                                    u32::from_str_radix(hex, 16).ok()
                                } else {
                                    num.parse::<u32>().ok()
                                };
                                code.and_then(char::from_u32)
                            } else {
                                None
                            }
                        }
                    };
                    if let Some(c) = decoded {
                        out.push(c);
                        i = semi + 1;
                        continue;
                    }
                }
            }
        }
        let c = s[i..].chars().next().unwrap();
        out.push(c);
        i += c.len_utf8();
    }
    out
}

/// Tolerant single-pass tokenizer. Script and style bodies are consumed as
/// raw text (never tokenized); comments, doctypes and processing
/// instructions are dropped.
fn tokenize(html: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let bytes = html.as_bytes();
    let mut i = 0;
    let mut text_start = 0;

    let flush_text = |tokens: &mut Vec<Token>, from: usize, to: usize| {
        if to > from {
            tokens.push(Token::Text {
                content: html[from..to].to_string(),
            });
        }
    };

    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let rest = &html[i..];
        if rest.starts_with("<!--") {
            flush_text(&mut tokens, text_start, i);
            i = rest.find("-->").map(|j| i + j + 3).unwrap_or(bytes.len());
            text_start = i;
        } else if rest.starts_with("<!") || rest.starts_with("<?") {
            flush_text(&mut tokens, text_start, i);
            i = rest.find('>').map(|j| i + j + 1).unwrap_or(bytes.len());
            text_start = i;
        } else if rest.starts_with("</") {
            flush_text(&mut tokens, text_start, i);
            let mut j = i + 2;
            let name_start = j;
            while j < bytes.len() && is_name_char(bytes[j] as char) {
                j += 1;
            }
            let name = html[name_start..j].to_ascii_lowercase();
            while j < bytes.len() && bytes[j] != b'>' {
                j += 1;
            }
            i = (j + 1).min(bytes.len());
            text_start = i;
            if !name.is_empty() {
                tokens.push(Token::Close { name });
            }
        } else if rest.len() > 1 && rest[1..].starts_with(|c: char| c.is_ascii_alphabetic()) {
            flush_text(&mut tokens, text_start, i);
            let tag_pos = i;
            let mut j = i + 1;
            let name_start = j;
            while j < bytes.len() && is_name_char(bytes[j] as char) {
                j += 1;
            }
            let name = html[name_start..j].to_ascii_lowercase();
            let mut attrs = Vec::new();
            // attribute loop; quoted values may contain '>'
            loop {
                while j < bytes.len() && (bytes[j] as char).is_whitespace() {
                    j += 1;
                }
                if j >= bytes.len() || bytes[j] == b'>' {
                    break;
                }
                if bytes[j] == b'/' {
                    j += 1;
                    continue;
                }
                let attr_start = j;
                while j < bytes.len()
                    && !matches!(bytes[j], b'=' | b'>' | b'/')
                    && !(bytes[j] as char).is_whitespace()
                {
                    j += 1;
                }
                let attr_name = html[attr_start..j].to_ascii_lowercase();
                let mut value = None;
                if j < bytes.len() && bytes[j] == b'=' {
                    j += 1;
                    while j < bytes.len() && (bytes[j] as char).is_whitespace() {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] == b'"' || bytes[j] == b'\'') {
                        let quote = bytes[j];
                        j += 1;
                        let val_start = j;
                        while j < bytes.len() && bytes[j] != quote {
                            j += 1;
                        }
                        value = Some(decode_entities(&html[val_start..j]));
                        j = (j + 1).min(bytes.len());
                    } else {
                        let val_start = j;
                        while j < bytes.len()
                            && bytes[j] != b'>'
                            && !(bytes[j] as char).is_whitespace()
                        {
                            j += 1;
                        }
                        value = Some(decode_entities(&html[val_start..j]));
                    }
                }
                if !attr_name.is_empty() {
                    attrs.push((attr_name, value));
                }
            }
            i = (j + 1).min(bytes.len());
            text_start = i;
            if !name.is_empty() {
                // script/style bodies are raw: swallow up to the matching
                // close tag without tokenizing
                if name == "script" || name == "style" {
                    let close = format!("</{name}");
                    let lower_rest = html[i..].to_ascii_lowercase();
                    if let Some(off) = lower_rest.find(&close) {
                        let after = i + off;
                        let end = html[after..]
                            .find('>')
                            .map(|j| after + j + 1)
                            .unwrap_or(bytes.len());
                        tokens.push(Token::Open {
                            name: name.clone(),
                            attrs,
                            pos: tag_pos,
                        });
                        tokens.push(Token::Close { name });
                        i = end;
                    } else {
                        tokens.push(Token::Open {
                            name,
                            attrs,
                            pos: tag_pos,
                        });
                        i = bytes.len();
                    }
                    text_start = i;
                } else {
                    tokens.push(Token::Open {
                        name,
                        attrs,
                        pos: tag_pos,
                    });
                }
            }
        } else {
            // stray '<' is text
            i += 1;
        }
    }
    flush_text(&mut tokens, text_start, bytes.len());
    tokens
}

/// Strip tags and return the visible text, entities decoded, whitespace
/// runs collapsed to single spaces.
pub fn extract_text(html: &[u8]) -> String {
    let html = String::from_utf8_lossy(html);
    let mut pieces = Vec::new();
    for token in tokenize(&html) {
        if let Token::Text { content } = token {
            let decoded = decode_entities(&content);
            if !decoded.trim().is_empty() {
                pieces.push(decoded);
            }
        }
    }
    let joined = pieces.join(" ");
    joined.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Keep only the tag skeleton: names and attribute names, values and text
/// dropped. Two documents differing only in text content yield identical
/// schemes.
pub fn extract_scheme(html: &[u8]) -> String {
    let html = String::from_utf8_lossy(html);
    let mut out = String::new();
    for token in tokenize(&html) {
        match token {
            Token::Open { name, attrs, .. } => {
                out.push('<');
                out.push_str(&name);
                for (attr, _) in &attrs {
                    out.push(' ');
                    out.push_str(attr);
                }
                out.push('>');
            }
            Token::Close { name } => {
                out.push_str("</");
                out.push_str(&name);
                out.push('>');
            }
            Token::Text { .. } => {}
        }
    }
    out
}

fn is_base32_byte(b: u8) -> bool {
    b.is_ascii_lowercase() || (b'2'..=b'7').contains(&b)
}

/// Find `label.onion` mentions with exactly 16- or 56-char base32 labels,
/// anywhere in the raw document. Returns (byte offset, matched string).
fn scan_onion_mentions(html: &str) -> Vec<(usize, String)> {
    let lower = html.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    let mut found = Vec::new();
    let mut search_from = 0;
    while let Some(off) = lower[search_from..].find(".onion") {
        let dot = search_from + off;
        let end = dot + ".onion".len();
        search_from = dot + 1;
        // must end at a word boundary, not e.g. ".onions"
        if bytes.get(end).is_some_and(|&b| b.is_ascii_alphanumeric() || b == b'-') {
            continue;
        }
        let mut start = dot;
        while start > 0 && is_base32_byte(bytes[start - 1]) {
            start -= 1;
        }
        let label_len = dot - start;
        if label_len != 16 && label_len != 56 {
            continue;
        }
        // a longer alphanumeric run bleeding into the label disqualifies it
        if start > 0 && (bytes[start - 1].is_ascii_alphanumeric() || bytes[start - 1] == b'-') {
            continue;
        }
        found.push((start, lower[start..end].to_string()));
    }
    found
}

const RELATIVE_EXTENSIONS: &[&str] = &[
    "html", "htm", "php", "asp", "aspx", "jsp", "txt", "pdf", "png", "jpg", "jpeg", "gif", "css",
    "js", "xml", "json",
];

/// True for href values that point within the same site.
fn is_relative_href(value: &str) -> bool {
    if value.contains("://") {
        return false;
    }
    if value.starts_with(['/', '#', '?', '.']) {
        return true;
    }
    let authority = value.split(['/', '?', '#']).next().unwrap_or("");
    match authority.rsplit('.').next() {
        _ if !authority.contains('.') => true,
        Some(ext) => RELATIVE_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()),
        None => true,
    }
}

/// Extract and classify links: onion addresses are matched anywhere in the
/// raw HTML (anchor or plain text), surface links only from `href` values.
/// One entry per normalized host, first occurrence wins, document order.
pub fn extract_links(html: &[u8], self_host: &OnionAddress) -> Vec<(String, LinkClass)> {
    let html = String::from_utf8_lossy(html);
    // candidates: (position, raw string, Some(class) if already decided)
    let mut candidates: Vec<(usize, String, Option<LinkClass>)> = Vec::new();
    for (pos, mention) in scan_onion_mentions(&html) {
        candidates.push((pos, mention, None));
    }
    for token in tokenize(&html) {
        if let Token::Open { attrs, pos, .. } = token {
            for (name, value) in attrs {
                let Some(value) = value else { continue };
                if name != "href" || value.is_empty() {
                    continue;
                }
                let lowered = value.to_ascii_lowercase();
                if lowered.starts_with("javascript:")
                    || lowered.starts_with("mailto:")
                    || lowered.starts_with("data:")
                    || lowered.starts_with("tel:")
                {
                    continue;
                }
                let class = if is_relative_href(&value) {
                    Some(LinkClass::Own)
                } else {
                    None
                };
                candidates.push((pos, value, class));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let mut seen = BTreeSet::new();
    let mut links = Vec::new();
    for (_, raw, decided) in candidates {
        let (key, class) = match decided {
            Some(class) => (format!("rel:{raw}"), class),
            None => match normalize_url(&raw) {
                Ok(NormalizedUrl::Onion(addr)) => {
                    let class = if addr.host == self_host.host {
                        LinkClass::Own
                    } else {
                        LinkClass::ExternalOnion
                    };
                    (addr.host, class)
                }
                Ok(NormalizedUrl::Surface { host }) => (host, LinkClass::Surface),
                Err(_) => continue,
            },
        };
        if seen.insert(key) {
            links.push((raw, class));
        }
    }
    links
}

/// `<meta>` name/content pairs plus the `<title>` text under key `title`.
/// First occurrence of a key wins.
pub fn extract_metadata(html: &[u8]) -> BTreeMap<String, String> {
    let html = String::from_utf8_lossy(html);
    let mut meta = BTreeMap::new();
    let tokens = tokenize(&html);
    let mut idx = 0;
    while idx < tokens.len() {
        match &tokens[idx] {
            Token::Open { name, attrs, .. } if name == "meta" => {
                let mut key = None;
                let mut content = None;
                for (attr, value) in attrs {
                    match attr.as_str() {
                        "name" => key = value.clone(),
                        "content" => content = value.clone(),
                        _ => {}
                    }
                }
                if let (Some(k), Some(c)) = (key, content) {
                    meta.entry(k).or_insert(c);
                }
            }
            Token::Open { name, .. } if name == "title" => {
                let mut text = String::new();
                let mut j = idx + 1;
                while j < tokens.len() {
                    match &tokens[j] {
                        Token::Text { content } => text.push_str(content),
                        Token::Close { name } if name == "title" => break,
                        _ => break,
                    }
                    j += 1;
                }
                let title = decode_entities(&text)
                    .split_whitespace()
                    .collect::<Vec<_>>()
                    .join(" ");
                if !title.is_empty() {
                    meta.entry("title".to_string()).or_insert(title);
                }
            }
            _ => {}
        }
        idx += 1;
    }
    meta
}

/// Run every extractor over one document.
pub fn extract_page(
    html: &[u8],
    self_host: &OnionAddress,
    detector: &dyn LanguageDetector,
) -> ExtractedPage {
    let text = extract_text(html);
    let scheme = extract_scheme(html);
    let links = extract_links(html, self_host);
    let metadata = extract_metadata(html);
    let title = metadata.get("title").cloned().unwrap_or_default();
    let languages = detector.detect(&text);
    ExtractedPage {
        text,
        scheme,
        links,
        title,
        metadata,
        languages,
    }
}
