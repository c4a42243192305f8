//! Deterministic synthetic-corpus generator. Builds base sites from three
//! templates (market, blog, link directory), derives mirrors by applying
//! scoped mutations, wires the sites into a declared link topology, and
//! emits a fixture directory with ground-truth labels and per-host
//! volatility schedules. Same seed, same bytes.

use crate::corpus::normalize_url;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("page lacks region: {0}")]
    RegionMissing(&'static str),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Crypto prices are quoted in satoshi and re-quoted in monero by
/// [`MutationKind::CurrencyChange`] at this fixed rate.
pub const SAT_PER_XMR: f64 = 73_000.0;
/// Fiat conversion factor used by [`MutationKind::FiatChange`].
pub const EUR_PER_USD: f64 = 0.92;

/// The mirror-mutation categories. Each alters only its declared page
/// region: tag structure, link targets, prose text, crypto price quotes,
/// wallet strings, fiat price strings, or the prose language.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum MutationKind {
    SchemeChange,
    LinkChange,
    ContentChange,
    CurrencyChange,
    CryptowalletChange,
    FiatChange,
    Translate(String),
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MutationKind::SchemeChange => write!(f, "scheme_change"),
            MutationKind::LinkChange => write!(f, "link_change"),
            MutationKind::ContentChange => write!(f, "content_change"),
            MutationKind::CurrencyChange => write!(f, "currency_change"),
            MutationKind::CryptowalletChange => write!(f, "cryptowallet_change"),
            MutationKind::FiatChange => write!(f, "fiat_change"),
            MutationKind::Translate(lang) => write!(f, "translate({lang})"),
        }
    }
}

impl FromStr for MutationKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scheme_change" => Ok(MutationKind::SchemeChange),
            "link_change" => Ok(MutationKind::LinkChange),
            "content_change" => Ok(MutationKind::ContentChange),
            "currency_change" => Ok(MutationKind::CurrencyChange),
            "cryptowallet_change" => Ok(MutationKind::CryptowalletChange),
            "fiat_change" => Ok(MutationKind::FiatChange),
            other => other
                .strip_prefix("translate(")
                .and_then(|rest| rest.strip_suffix(')'))
                .map(|lang| MutationKind::Translate(lang.to_string()))
                .ok_or_else(|| SynthError::InvalidSpec(format!("unknown mutation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    Market,
    Blog,
    Directory,
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Template::Market => "market",
            Template::Blog => "blog",
            Template::Directory => "directory",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Chain,
    Tree,
    Clusters,
}

impl FromStr for Topology {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chain" => Ok(Topology::Chain),
            "tree" => Ok(Topology::Tree),
            "clusters" => Ok(Topology::Clusters),
            other => Err(SynthError::InvalidSpec(format!("unknown topology {other:?}"))),
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Chain => "chain",
            Topology::Tree => "tree",
            Topology::Clusters => "clusters",
        })
    }
}

/// One fetch outcome in a host's volatility schedule; the last token
/// repeats forever, so `[ServerError]` is a permanently dead host.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleToken {
    Success,
    Timeout,
    ServerError,
}

impl fmt::Display for ScheduleToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleToken::Success => "ok",
            ScheduleToken::Timeout => "timeout",
            ScheduleToken::ServerError => "503",
        })
    }
}

impl FromStr for ScheduleToken {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ok" => Ok(ScheduleToken::Success),
            "timeout" => Ok(ScheduleToken::Timeout),
            "503" => Ok(ScheduleToken::ServerError),
            other => Err(SynthError::InvalidSpec(format!(
                "unknown schedule token {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_uniques: usize,
    /// Mean of the geometric mirror-count distribution per unique page.
    pub fanout_mean: f64,
    /// Weighted mutation categories for mirror derivation.
    pub mutation_mix: Vec<(MutationKind, f64)>,
    /// Fraction of the affected region a mutation touches, in (0, 0.5].
    pub magnitude: f64,
    pub topology: Topology,
    pub rng_seed: u64,
    /// Fraction of hosts that fail a few fetches before answering.
    pub flaky_fraction: f64,
    /// Fraction of mirror hosts that never answer at all.
    pub dead_fraction: f64,
}

impl Default for SynthSpec {
    /// Mutation weights follow the observed frequency ordering: structure
    /// changes dominate, then links and content, price/wallet edits are
    /// occasional, fiat swaps and translations rare.
    fn default() -> Self {
        SynthSpec {
            n_uniques: 100,
            fanout_mean: 1.0,
            mutation_mix: vec![
                (MutationKind::SchemeChange, 3.0),
                (MutationKind::LinkChange, 2.0),
                (MutationKind::ContentChange, 2.0),
                (MutationKind::CurrencyChange, 1.0),
                (MutationKind::CryptowalletChange, 1.0),
                (MutationKind::FiatChange, 0.5),
                (MutationKind::Translate("de".to_string()), 0.25),
                (MutationKind::Translate("fr".to_string()), 0.25),
                (MutationKind::Translate("it".to_string()), 0.25),
            ],
            magnitude: 0.02,
            topology: Topology::Chain,
            rng_seed: 42,
            flaky_fraction: 0.1,
            dead_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPage {
    pub host: String,
    pub html: String,
    /// Ground-truth mirror cluster; equals the unique page's index.
    pub cluster_id: usize,
    /// Mutation trail; empty marks the cluster's base page.
    pub mutations: Vec<MutationKind>,
    pub schedule: Vec<ScheduleToken>,
    pub template: Template,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub pages: Vec<SynthPage>,
    /// Crawl entry points guaranteeing topology-wide reachability.
    pub seeds: Vec<String>,
}

impl SynthCorpus {
    pub fn page(&self, host: &str) -> Option<&SynthPage> {
        self.pages.iter().find(|p| p.host == host)
    }

    /// Ground truth as "host,cluster_id,mutation_kind" rows.
    pub fn labels_csv(&self) -> String {
        let mut out = String::from("host,cluster_id,mutation_kind\n");
        for page in &self.pages {
            let mutation = if page.mutations.is_empty() {
                "base".to_string()
            } else {
                page.mutations
                    .iter()
                    .map(MutationKind::to_string)
                    .collect::<Vec<_>>()
                    .join("+")
            };
            out.push_str(&format!("{},{},{}\n", page.host, page.cluster_id, mutation));
        }
        out
    }

    /// Writes `corpus/<host>/index.html`, `corpus/<host>.schedule`,
    /// `labels.csv`, and `seeds.txt` under `dir`.
    pub fn write_fixtures(&self, dir: &Path) -> Result<(), SynthError> {
        let corpus = dir.join("corpus");
        std::fs::create_dir_all(&corpus)?;
        for page in &self.pages {
            let host_dir = corpus.join(&page.host);
            std::fs::create_dir_all(&host_dir)?;
            std::fs::write(host_dir.join("index.html"), &page.html)?;
            let tokens = page
                .schedule
                .iter()
                .map(ScheduleToken::to_string)
                .collect::<Vec<_>>()
                .join(" ");
            std::fs::write(corpus.join(format!("{}.schedule", page.host)), tokens + "\n")?;
        }
        std::fs::write(dir.join("labels.csv"), self.labels_csv())?;
        std::fs::write(dir.join("seeds.txt"), self.seeds.join("\n") + "\n")?;
        Ok(())
    }
}

// ---------------------------------------------------------------------
// bundled dictionary

struct Dictionary {
    english: Vec<String>,
    by_lang: BTreeMap<&'static str, BTreeMap<String, String>>,
}

fn dictionary() -> &'static Dictionary {
    static DICT: OnceLock<Dictionary> = OnceLock::new();
    DICT.get_or_init(|| {
        let mut english = Vec::new();
        let mut by_lang: BTreeMap<&'static str, BTreeMap<String, String>> =
            [("de", BTreeMap::new()), ("fr", BTreeMap::new()), ("it", BTreeMap::new())]
                .into_iter()
                .collect();
        for line in include_str!("../../data/translate.tsv").lines() {
            let mut cols = line.split('\t');
            let (Some(en), Some(de), Some(fr), Some(it)) =
                (cols.next(), cols.next(), cols.next(), cols.next())
            else {
                continue;
            };
            english.push(en.to_string());
            by_lang.get_mut("de").unwrap().insert(en.to_string(), de.to_string());
            by_lang.get_mut("fr").unwrap().insert(en.to_string(), fr.to_string());
            by_lang.get_mut("it").unwrap().insert(en.to_string(), it.to_string());
        }
        Dictionary { english, by_lang }
    })
}

/// The English side of the bundled translation table, in file order.
pub fn english_words() -> &'static [String] {
    &dictionary().english
}

/// Languages the [`MutationKind::Translate`] mutation supports.
pub fn translation_languages() -> Vec<&'static str> {
    dictionary().by_lang.keys().copied().collect()
}

// ---------------------------------------------------------------------
// low-level builders

const BASE58: &[u8] = b"123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";
const BASE32: &[u8] = b"abcdefghijklmnopqrstuvwxyz234567";

fn onion_host(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::with_capacity(62);
    for _ in 0..56 {
        s.push(char::from(BASE32[rng.gen_range(0..BASE32.len())]));
    }
    s.push_str(".onion");
    s
}

fn wallet(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::from("1");
    for _ in 0..33 {
        s.push(char::from(BASE58[rng.gen_range(0..BASE58.len())]));
    }
    s
}

fn word(rng: &mut ChaCha8Rng) -> &'static str {
    let words = english_words();
    &words[rng.gen_range(0..words.len())]
}

fn words(rng: &mut ChaCha8Rng, n: usize) -> Vec<&'static str> {
    (0..n).map(|_| word(rng)).collect()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn sentence_from(words: &[&str]) -> String {
    let mut s = capitalize(words[0]);
    for w in &words[1..] {
        s.push(' ');
        s.push_str(w);
    }
    s.push('.');
    s
}

fn unique_sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(8..=14);
    sentence_from(&words(rng, n))
}

fn unique_paragraph(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(2..=4);
    let body = (0..n).map(|_| unique_sentence(rng)).collect::<Vec<_>>().join(" ");
    format!("<p>{body}</p>")
}

/// Template boilerplate: a fixed word stream per template, consumed as
/// identical 10-word sentences by every page of that template so that
/// unrelated same-template pages share realistic amounts of prose.
fn boiler_paragraphs(template: Template, count: usize) -> Vec<String> {
    let offset = match template {
        Template::Market => 0,
        Template::Blog => 167,
        Template::Directory => 333,
    };
    let english = english_words();
    let mut paragraphs = Vec::with_capacity(count);
    let mut cursor = offset;
    for _ in 0..count {
        let mut sentences = Vec::with_capacity(3);
        for _ in 0..3 {
            let ws: Vec<&str> = (0..10)
                .map(|k| english[(cursor + k) % english.len()].as_str())
                .collect();
            cursor += 10;
            sentences.push(sentence_from(&ws));
        }
        paragraphs.push(format!("<p>{}</p>", sentences.join(" ")));
    }
    paragraphs
}

fn nav_with(links: &[(String, String)], attr: &str) -> String {
    let mut out = format!("<nav {attr}>");
    for (host, label) in links {
        out.push_str(&format!("<a href=\"http://{host}/\">{label}</a> "));
    }
    out.push_str("</nav>");
    out
}

// ---------------------------------------------------------------------
// page assembly

struct PagePlan<'a> {
    template: Template,
    /// Hosts this page links to from its navigation bar.
    nav_targets: &'a [String],
    /// Corpus hosts a directory page may additionally list.
    peers: &'a [String],
}

/// Per-page markup fingerprint: every site generator decorates its
/// blocks with its own attribute names, so two unrelated pages never
/// share a tag scheme even when they share a template. Mirrors copy the
/// base page and therefore inherit its decor.
struct Decor {
    wrap_attr: String,
    item_attr: String,
    nav_attr: String,
    item_el: &'static str,
    heading: &'static str,
    list_el: &'static str,
}

fn attr_name(rng: &mut ChaCha8Rng) -> String {
    let mut name = String::from("data-");
    for _ in 0..3 {
        name.push(char::from(b'a' + rng.gen_range(0..24)));
    }
    name
}

fn decor(rng: &mut ChaCha8Rng) -> Decor {
    Decor {
        wrap_attr: attr_name(rng),
        item_attr: attr_name(rng),
        nav_attr: attr_name(rng),
        item_el: ["div", "section", "article"][rng.gen_range(0..3)],
        heading: if rng.gen_bool(0.5) { "h2" } else { "h3" },
        list_el: if rng.gen_bool(0.5) { "ul" } else { "ol" },
    }
}

/// Optional per-unit markup noise. Byte-identical repeated units starve
/// the CTPH rolling hash of trigger points, which no real page generator
/// produces; a sprinkle of separators and attributes restores the
/// texture. Never emitted inside `<p>`, whose inner text must stay
/// markup-free for the content and translation mutations.
fn jitter(rng: &mut ChaCha8Rng, glyph: &str) -> String {
    if rng.gen_bool(0.5) {
        format!("<b>{glyph}</b>")
    } else {
        String::new()
    }
}

fn extra_attr(rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(0.6) {
        format!(" {}", attr_name(rng))
    } else {
        String::new()
    }
}

fn render_page(plan: &PagePlan, rng: &mut ChaCha8Rng) -> String {
    let title = match plan.template {
        Template::Market => format!("{} {} market", word(rng), word(rng)),
        Template::Blog => format!("{} {} journal", word(rng), word(rng)),
        Template::Directory => format!("{} {} directory", word(rng), word(rng)),
    };
    let desc_len = rng.gen_range(6..=10);
    let description = words(rng, desc_len).join(" ");
    let nav_links: Vec<(String, String)> = plan
        .nav_targets
        .iter()
        .map(|host| {
            let label_len = rng.gen_range(1..=2);
            (host.clone(), words(rng, label_len).join(" "))
        })
        .collect();
    let d = decor(rng);

    let body = match plan.template {
        Template::Market => {
            let items = rng.gen_range(3..=8);
            let mut out = format!("<div class=\"listing\" {}>", d.wrap_attr);
            for _ in 0..items {
                let name = words(rng, 2).join(" ");
                let prose = unique_sentence(rng);
                let extra = extra_attr(rng);
                let mark = jitter(rng, "★");
                out.push_str(&format!(
                    "<{el} class=\"item\" {ia}{extra}><{h}>{}</{h}>{mark}<p>{prose}</p></{el}>",
                    capitalize(&name),
                    el = d.item_el,
                    ia = d.item_attr,
                    h = d.heading,
                ));
            }
            out.push_str("</div>");
            // price table and payment section: keeps the currency, fiat,
            // and wallet regions contiguous in the byte stream
            out.push_str(&format!("<div class=\"prices\" {}>", d.item_attr));
            for _ in 0..items {
                let usd = rng.gen_range(3.0..400.0_f64);
                let sat = rng.gen_range(900..2_000_000_u64);
                let sep = jitter(rng, "·");
                out.push_str(&format!(
                    "{sep}<span class=\"price\">${usd:.2}</span><span class=\"crypto\">{sat} sat</span>"
                ));
            }
            out.push_str(&format!("</div><div class=\"pay\" {}>", d.nav_attr));
            for _ in 0..rng.gen_range(2..=4) {
                let sep = jitter(rng, "·");
                out.push_str(&format!("{sep}<span class=\"wallet\">{}</span>", wallet(rng)));
            }
            out.push_str("</div>");
            out
        }
        Template::Blog => {
            let articles = rng.gen_range(3..=10);
            let mut out = format!("<div class=\"posts\" {}>", d.wrap_attr);
            for _ in 0..articles {
                let heading_len = rng.gen_range(2..=4);
                let heading = capitalize(&words(rng, heading_len).join(" "));
                let extra = extra_attr(rng);
                let mark = jitter(rng, "#");
                let paragraphs: String = (0..rng.gen_range(1..=3))
                    .map(|_| unique_paragraph(rng))
                    .collect();
                out.push_str(&format!(
                    "<{el} {ia}{extra}><{h}>{heading}</{h}>{mark}{paragraphs}</{el}>",
                    el = d.item_el,
                    ia = d.item_attr,
                    h = d.heading,
                ));
            }
            out.push_str("</div>");
            if rng.gen_bool(0.4) {
                out.push_str(&format!("<aside><p>{}</p></aside>", unique_sentence(rng)));
            }
            out
        }
        Template::Directory => {
            let sections = rng.gen_range(2..=5);
            let mut out = String::new();
            for _ in 0..sections {
                let heading = capitalize(&words(rng, 2).join(" "));
                let mut list = format!("<{} {}>", d.list_el, d.item_attr);
                let n = rng.gen_range(5..=12).min(plan.peers.len().max(1));
                for _ in 0..n {
                    let target = if plan.peers.is_empty() {
                        onion_host(rng)
                    } else {
                        plan.peers[rng.gen_range(0..plan.peers.len())].clone()
                    };
                    let label_len = rng.gen_range(1..=3);
                    let label = words(rng, label_len).join(" ");
                    let blurb = unique_sentence(rng);
                    let extra = extra_attr(rng);
                    let mark = jitter(rng, "★");
                    list.push_str(&format!(
                        "<li{extra}><a href=\"http://{target}/\">{label}</a>{mark}<p>{blurb}</p></li>"
                    ));
                }
                list.push_str(&format!("</{}>", d.list_el));
                out.push_str(&format!(
                    "<section {}><{h}>{heading}</{h}>{list}</section>",
                    d.wrap_attr,
                    h = d.heading,
                ));
            }
            out
        }
    };

    // interleave shared template prose with page-unique paragraphs
    let boiler = boiler_paragraphs(plan.template, rng.gen_range(6..=16));
    let mut about: Vec<String> = Vec::new();
    for paragraph in boiler {
        about.push(paragraph);
        if rng.gen_bool(0.3) {
            about.push(jitter(rng, "~"));
        }
        if rng.gen_bool(0.7) {
            about.push(unique_paragraph(rng));
        }
    }
    let footer = boiler_paragraphs(plan.template, 1).pop().unwrap();

    let render = |about: &[String]| {
        format!(
            "<html>\n<head><title>{title}</title>\
             <meta name=\"description\" content=\"{description}\"></head>\n<body>\n\
             {}\n<h1>{title}</h1>\n{body}\n<div class=\"about\" {}>{}</div>\n\
             <footer>{footer}</footer>\n</body>\n</html>\n",
            nav_with(&nav_links, &d.nav_attr),
            d.wrap_attr,
            about.join(""),
        )
    };

    let mut html = render(&about);
    while html.len() < MIN_PAGE_BYTES {
        about.push(unique_paragraph(rng));
        html = render(&about);
    }
    while html.len() > MAX_PAGE_BYTES && about.len() > 1 {
        about.pop();
        html = render(&about);
    }
    html
}

/// Floor keeps pages comfortably inside CTPH's reliable regime and tiny
/// scattered rewrites (prices, wallets) well under a chunk's weight.
pub const MIN_PAGE_BYTES: usize = 6144;
pub const MAX_PAGE_BYTES: usize = 16384;

// ---------------------------------------------------------------------
// region scanners (byte ranges into the page)

fn find_all(hay: &str, needle: &str) -> Vec<usize> {
    let mut positions = Vec::new();
    let mut from = 0;
    while let Some(at) = hay[from..].find(needle) {
        positions.push(from + at);
        from += at + needle.len();
    }
    positions
}

/// Inner-text ranges of `<span class="{class}">…</span>`.
fn class_span_ranges(html: &str, class: &str) -> Vec<Range<usize>> {
    let open = format!("<span class=\"{class}\">");
    find_all(html, &open)
        .into_iter()
        .filter_map(|at| {
            let start = at + open.len();
            html[start..].find("</span>").map(|end| start..start + end)
        })
        .collect()
}

/// Inner-text ranges of `<p …>…</p>`.
fn paragraph_ranges(html: &str) -> Vec<Range<usize>> {
    find_all(html, "<p")
        .into_iter()
        .filter_map(|at| {
            let gt = html[at..].find('>')? + at + 1;
            let end = html[gt..].find("</p>")? + gt;
            Some(gt..end)
        })
        .collect()
}

/// Value ranges of `href="…"` attributes.
fn href_ranges(html: &str) -> Vec<Range<usize>> {
    let open = "href=\"";
    find_all(html, open)
        .into_iter()
        .filter_map(|at| {
            let start = at + open.len();
            html[start..].find('"').map(|end| start..start + end)
        })
        .collect()
}

/// Ranges of text nodes (between `>` and `<`).
fn text_node_ranges(html: &str) -> Vec<Range<usize>> {
    let mut ranges = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in html.char_indices() {
        match c {
            '>' => start = Some(i + 1),
            '<' => {
                if let Some(s) = start.take() {
                    if s < i {
                        ranges.push(s..i);
                    }
                }
            }
            _ => {}
        }
    }
    ranges
}

/// Word ranges within a text slice.
fn word_ranges(text: &str) -> Vec<Range<usize>> {
    let mut ranges = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            ranges.push(s..i);
        }
    }
    if let Some(s) = start {
        ranges.push(s..text.len());
    }
    ranges
}

/// Applies non-overlapping byte-range replacements.
fn splice(original: &str, mut edits: Vec<(Range<usize>, String)>) -> String {
    edits.sort_by_key(|(range, _)| range.start);
    let mut out = String::with_capacity(original.len());
    let mut cursor = 0;
    for (range, replacement) in edits {
        out.push_str(&original[cursor..range.start]);
        out.push_str(&replacement);
        cursor = range.end;
    }
    out.push_str(&original[cursor..]);
    out
}

// ---------------------------------------------------------------------
// mutations

/// Applies one mutation. `magnitude` scales the touched fraction of the
/// region for structure, link, and content changes (content edits rewrite
/// one contiguous run of prose words); price, wallet, and translation
/// rewrites are region-complete by nature.
pub fn mutate(
    html: &str,
    kind: &MutationKind,
    magnitude: f64,
    rng: &mut ChaCha8Rng,
) -> Result<String, SynthError> {
    if !(magnitude > 0.0 && magnitude <= 0.5) {
        return Err(SynthError::InvalidSpec(format!(
            "magnitude {magnitude} outside (0, 0.5]"
        )));
    }
    let scaled = |n: usize| ((magnitude * n as f64).ceil() as usize).clamp(1, n);
    match kind {
        MutationKind::SchemeChange => {
            let tags = find_all(html, "<p>");
            if tags.is_empty() {
                return Err(SynthError::RegionMissing("paragraph tags"));
            }
            let picked = sample(rng, tags.len(), scaled(tags.len()));
            let edits = picked
                .iter()
                .map(|i| (tags[i]..tags[i] + 3, "<p data-rev>".to_string()))
                .collect();
            Ok(splice(html, edits))
        }
        MutationKind::LinkChange => {
            let hrefs = href_ranges(html);
            if hrefs.is_empty() {
                return Err(SynthError::RegionMissing("links"));
            }
            let picked = sample(rng, hrefs.len(), scaled(hrefs.len()));
            let edits = picked
                .iter()
                .map(|i| {
                    (hrefs[i].clone(), format!("http://{}/", onion_host(rng)))
                })
                .collect();
            Ok(splice(html, edits))
        }
        MutationKind::ContentChange => {
            let mut word_spans: Vec<Range<usize>> = Vec::new();
            for paragraph in paragraph_ranges(html) {
                for w in word_ranges(&html[paragraph.clone()]) {
                    word_spans.push(paragraph.start + w.start..paragraph.start + w.end);
                }
            }
            if word_spans.is_empty() {
                return Err(SynthError::RegionMissing("prose"));
            }
            // a contiguous rewritten run, the shape of a real rewording
            let k = scaled(word_spans.len());
            let start = rng.gen_range(0..=word_spans.len() - k);
            let edits = word_spans[start..start + k]
                .iter()
                .map(|span| (span.clone(), word(rng).to_string()))
                .collect();
            Ok(splice(html, edits))
        }
        MutationKind::CurrencyChange => {
            let spans = class_span_ranges(html, "crypto");
            if spans.is_empty() {
                return Err(SynthError::RegionMissing("crypto price strings"));
            }
            let mut edits = Vec::new();
            for span in spans {
                let inner = &html[span.clone()];
                let Some(sat) = inner
                    .strip_suffix(" sat")
                    .and_then(|v| v.parse::<f64>().ok())
                else {
                    return Err(SynthError::RegionMissing("satoshi quote"));
                };
                edits.push((span, format!("{:.4} xmr", sat / SAT_PER_XMR)));
            }
            Ok(splice(html, edits))
        }
        MutationKind::CryptowalletChange => {
            let spans = class_span_ranges(html, "wallet");
            if spans.is_empty() {
                return Err(SynthError::RegionMissing("wallet strings"));
            }
            let edits = spans.into_iter().map(|span| (span, wallet(rng))).collect();
            Ok(splice(html, edits))
        }
        MutationKind::FiatChange => {
            let spans = class_span_ranges(html, "price");
            if spans.is_empty() {
                return Err(SynthError::RegionMissing("fiat price strings"));
            }
            let mut edits = Vec::new();
            for span in spans {
                let inner = &html[span.clone()];
                let Some(usd) = inner.strip_prefix('$').and_then(|v| v.parse::<f64>().ok())
                else {
                    return Err(SynthError::RegionMissing("dollar quote"));
                };
                edits.push((span, format!("€{:.2}", usd * EUR_PER_USD)));
            }
            Ok(splice(html, edits))
        }
        MutationKind::Translate(lang) => {
            let Some(table) = dictionary().by_lang.get(lang.as_str()) else {
                return Err(SynthError::InvalidSpec(format!(
                    "no translation table for {lang:?}"
                )));
            };
            let mut edits = Vec::new();
            for node in text_node_ranges(html) {
                for w in word_ranges(&html[node.clone()]) {
                    let span = node.start + w.start..node.start + w.end;
                    let original = &html[span.clone()];
                    if let Some(translated) = table.get(&original.to_lowercase()) {
                        let replacement = if original.chars().next().is_some_and(char::is_uppercase)
                        {
                            capitalize(translated)
                        } else {
                            translated.clone()
                        };
                        edits.push((span, replacement));
                    }
                }
            }
            Ok(splice(html, edits))
        }
    }
}

// ---------------------------------------------------------------------
// corpus generation

/// Geometric sample with the given mean (number of failures before the
/// first success).
fn geometric(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let p = 1.0 / (1.0 + mean);
    let mut k = 0;
    while rng.gen::<f64>() >= p {
        k += 1;
    }
    k
}

fn pick_template(rng: &mut ChaCha8Rng) -> Template {
    let x: f64 = rng.gen();
    if x < 0.4 {
        Template::Market
    } else if x < 0.7 {
        Template::Blog
    } else {
        Template::Directory
    }
}

/// Mutations applicable to a template: price and wallet regions exist
/// only on market pages.
fn compatible(kind: &MutationKind, template: Template) -> bool {
    match kind {
        MutationKind::CurrencyChange
        | MutationKind::CryptowalletChange
        | MutationKind::FiatChange => template == Template::Market,
        _ => true,
    }
}

fn draw_mutation(
    mix: &[(MutationKind, f64)],
    template: Template,
    rng: &mut ChaCha8Rng,
) -> Result<MutationKind, SynthError> {
    let usable: Vec<&(MutationKind, f64)> = mix
        .iter()
        .filter(|(kind, w)| *w > 0.0 && compatible(kind, template))
        .collect();
    let total: f64 = usable.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return Err(SynthError::InvalidSpec(format!(
            "mutation mix has no entry applicable to a {template} page"
        )));
    }
    let mut x = rng.gen::<f64>() * total;
    for (kind, w) in &usable {
        x -= w;
        if x <= 0.0 {
            return Ok(kind.clone());
        }
    }
    Ok(usable.last().unwrap().0.clone())
}

fn schedule(rng: &mut ChaCha8Rng, is_mirror: bool, spec: &SynthSpec) -> Vec<ScheduleToken> {
    if is_mirror && rng.gen::<f64>() < spec.dead_fraction {
        return vec![ScheduleToken::ServerError];
    }
    if rng.gen::<f64>() < spec.flaky_fraction {
        let failures = rng.gen_range(1..=4);
        let mut tokens: Vec<ScheduleToken> = (0..failures)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    ScheduleToken::Timeout
                } else {
                    ScheduleToken::ServerError
                }
            })
            .collect();
        tokens.push(ScheduleToken::Success);
        return tokens;
    }
    vec![ScheduleToken::Success]
}

/// Island size for the `clusters` topology.
const ISLAND: usize = 8;

fn validate(spec: &SynthSpec) -> Result<(), SynthError> {
    if spec.n_uniques == 0 {
        return Err(SynthError::InvalidSpec("n_uniques must be ≥ 1".into()));
    }
    if !(spec.magnitude > 0.0 && spec.magnitude <= 0.5) {
        return Err(SynthError::InvalidSpec(format!(
            "magnitude {} outside (0, 0.5]",
            spec.magnitude
        )));
    }
    if spec.mutation_mix.iter().all(|(_, w)| *w <= 0.0) {
        return Err(SynthError::InvalidSpec("mutation mix is empty".into()));
    }
    if spec.fanout_mean < 0.0 {
        return Err(SynthError::InvalidSpec("fanout mean must be ≥ 0".into()));
    }
    for fraction in [spec.flaky_fraction, spec.dead_fraction] {
        if !(0.0..1.0).contains(&fraction) {
            return Err(SynthError::InvalidSpec(format!(
                "fraction {fraction} outside [0, 1)"
            )));
        }
    }
    Ok(())
}

/// Builds the whole corpus: base pages per the topology, mirrors per the
/// mutation mix, volatility schedules per host. Deterministic in
/// `spec.rng_seed`.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    validate(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let n = spec.n_uniques;

    let fanouts: Vec<usize> = (0..n).map(|_| geometric(&mut rng, spec.fanout_mean)).collect();
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let mut fresh_host = |rng: &mut ChaCha8Rng| loop {
        let host = onion_host(rng);
        if taken.insert(host.clone()) {
            return host;
        }
    };
    let unique_hosts: Vec<String> = (0..n).map(|_| fresh_host(&mut rng)).collect();
    let mirror_hosts: Vec<Vec<String>> = fanouts
        .iter()
        .map(|k| (0..*k).map(|_| fresh_host(&mut rng)).collect())
        .collect();

    // islands partition the uniques; chain/tree topologies are one island
    let islands: Vec<Vec<usize>> = match spec.topology {
        Topology::Clusters => (0..n)
            .collect::<Vec<_>>()
            .chunks(ISLAND)
            .map(<[usize]>::to_vec)
            .collect(),
        _ => vec![(0..n).collect()],
    };
    let island_of: BTreeMap<usize, usize> = islands
        .iter()
        .enumerate()
        .flat_map(|(idx, members)| members.iter().map(move |m| (*m, idx)))
        .collect();

    let successors = |i: usize| -> Vec<usize> {
        match spec.topology {
            Topology::Chain => (i + 1 < n).then_some(i + 1).into_iter().collect(),
            Topology::Tree => [2 * i + 1, 2 * i + 2]
                .into_iter()
                .filter(|c| *c < n)
                .collect(),
            Topology::Clusters => {
                let island = &islands[island_of[&i]];
                let at = island.iter().position(|m| *m == i).unwrap();
                let mut next = Vec::new();
                if at + 1 < island.len() {
                    next.push(island[at + 1]);
                }
                // island heads also fan out to give the subgraph some body
                if at == 0 {
                    next.extend(island.iter().skip(2).copied());
                }
                next
            }
        }
    };

    let seeds: Vec<String> = match spec.topology {
        Topology::Clusters => islands.iter().map(|isl| unique_hosts[isl[0]].clone()).collect(),
        _ => vec![unique_hosts[0].clone()],
    };

    let templates: Vec<Template> = (0..n).map(|_| pick_template(&mut rng)).collect();

    let mut pages = Vec::new();
    for i in 0..n {
        let mut nav_targets: Vec<String> = successors(i)
            .into_iter()
            .map(|j| unique_hosts[j].clone())
            .collect();
        nav_targets.extend(mirror_hosts[i].iter().cloned());
        let peers: Vec<String> = islands[island_of[&i]]
            .iter()
            .filter(|j| **j != i)
            .map(|j| unique_hosts[*j].clone())
            .collect();
        let html = render_page(
            &PagePlan {
                template: templates[i],
                nav_targets: &nav_targets,
                peers: &peers,
            },
            &mut rng,
        );
        pages.push(SynthPage {
            host: unique_hosts[i].clone(),
            html: html.clone(),
            cluster_id: i,
            mutations: Vec::new(),
            schedule: schedule(&mut rng, false, spec),
            template: templates[i],
        });
        for mirror_host in &mirror_hosts[i] {
            let kind = draw_mutation(&spec.mutation_mix, templates[i], &mut rng)?;
            let mutated = mutate(&html, &kind, spec.magnitude, &mut rng)?;
            pages.push(SynthPage {
                host: mirror_host.clone(),
                html: mutated,
                cluster_id: i,
                mutations: vec![kind],
                schedule: schedule(&mut rng, true, spec),
                template: templates[i],
            });
        }
    }
    debug_assert!(pages
        .iter()
        .all(|p| normalize_url(&p.host).map(|u| u.is_onion()).unwrap_or(false)));
    Ok(SynthCorpus { pages, seeds })
}
