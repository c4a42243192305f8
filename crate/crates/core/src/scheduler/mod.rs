//! The crawl engine. A dynamically growing to-do queue is consumed in
//! workload windows of up to N links; N workers each fetch one link of the
//! window, the window closes only when every link has an outcome, and
//! failed links re-enter the queue until their attempt budget runs out.
//! Transports are pluggable; see [`transport`] for the bundled ones.

pub mod transport;

use crate::corpus::{
    normalize_url, CrawlStatus, CrawlTimestamp, NormalizedUrl, OnionAddress, PageRecord,
    DEFAULT_MAX_HTML_BYTES, MAX_ATTEMPTS,
};
use crate::extractor::{extract_page, LanguageDetector};
use crate::seeder::Seed;
use crate::corpus::LinkClass;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::Duration;
use thiserror::Error;

pub use transport::{FixtureTransport, ProxyTransport};

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("the to-do queue is empty")]
    EmptyQueue,
    #[error("a window is still pending; complete it before taking another")]
    WindowPending,
    #[error("bad crawl config: {0}")]
    BadConfig(String),
    /// The transport failed in a way no retry can fix. The snapshot carries
    /// everything gathered so far and can be resumed with [`resume_crawl`].
    #[error("transport failure: {message}")]
    TransportFatal {
        message: String,
        snapshot: Vec<PageRecord>,
    },
}

/// How one fetch attempt ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchStatus {
    Http(u16),
    Timeout,
    TransportError,
}

/// One fetch attempt's result. `body` is non-empty only for textual 200
/// responses; a 200 with non-textual content keeps `media_skipped` instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchOutcome {
    pub status: FetchStatus,
    pub body: Vec<u8>,
    pub elapsed_ms: u64,
    pub media_skipped: bool,
}

impl FetchOutcome {
    pub fn is_success(&self) -> bool {
        self.status == FetchStatus::Http(200)
    }
}

/// What a transport returns before the text-only policy is applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawResponse {
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
}

/// Non-response failure modes of a transport. `Fatal` aborts the crawl;
/// the other two become per-link outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FetchFailure {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("fatal transport error: {0}")]
    Fatal(String),
}

pub trait FetchTransport: Sync {
    fn fetch(&self, url: &str, timeout: Duration) -> Result<RawResponse, FetchFailure>;
}

/// Crawl timestamps come from a clock so tests can pin them.
pub trait Clock: Sync {
    fn now(&self) -> CrawlTimestamp;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> CrawlTimestamp {
        CrawlTimestamp(chrono::Utc::now().timestamp())
    }
}

/// Hands out evenly spaced timestamps starting at `start`.
pub struct FixedClock {
    next: std::sync::atomic::AtomicI64,
    step: i64,
}

impl FixedClock {
    pub fn new(start: i64, step: i64) -> Self {
        FixedClock {
            next: std::sync::atomic::AtomicI64::new(start),
            step,
        }
    }
}

impl Clock for FixedClock {
    fn now(&self) -> CrawlTimestamp {
        CrawlTimestamp(
            self.next
                .fetch_add(self.step, std::sync::atomic::Ordering::SeqCst),
        )
    }
}

/// Content types the crawler persists: text/*, */*+xml, application/xhtml,
/// application/json. Everything else is media and never stored.
pub fn is_textual(content_type: &str) -> bool {
    let ct = content_type
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase();
    ct.starts_with("text/")
        || ct.ends_with("+xml")
        || ct == "application/xhtml"
        || ct == "application/json"
}

/// One attempt through the text-only policy. Timeouts and transport errors
/// become outcomes; only [`FetchFailure::Fatal`] propagates.
pub fn fetch_textonly(
    transport: &dyn FetchTransport,
    url: &str,
    timeout: Duration,
) -> Result<FetchOutcome, FetchFailure> {
    let started = std::time::Instant::now();
    let result = transport.fetch(url, timeout);
    let elapsed_ms = started.elapsed().as_millis() as u64;
    match result {
        Ok(response) => {
            let textual = is_textual(&response.content_type);
            let keep = response.status == 200 && textual;
            Ok(FetchOutcome {
                status: FetchStatus::Http(response.status),
                body: if keep { response.body } else { Vec::new() },
                elapsed_ms,
                media_skipped: response.status == 200 && !textual,
            })
        }
        Err(FetchFailure::Timeout) => Ok(FetchOutcome {
            status: FetchStatus::Timeout,
            body: Vec::new(),
            elapsed_ms,
            media_skipped: false,
        }),
        Err(FetchFailure::Transport(_)) => Ok(FetchOutcome {
            status: FetchStatus::TransportError,
            body: Vec::new(),
            elapsed_ms,
            media_skipped: false,
        }),
        Err(fatal @ FetchFailure::Fatal(_)) => Err(fatal),
    }
}

/// FIFO of hosts waiting for a fetch. A host lives in at most one place:
/// the queue, the pending window, or a finished record.
#[derive(Debug, Default)]
pub struct TodoList {
    queue: VecDeque<String>,
    seen: BTreeSet<String>,
    pending: usize,
}

impl TodoList {
    pub fn new() -> Self {
        TodoList::default()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn seen(&self, host: &str) -> bool {
        self.seen.contains(host)
    }

    /// Enqueue a host the first time it is ever seen; later calls are
    /// no-ops. Returns whether the host entered the queue.
    pub fn enqueue(&mut self, host: &str) -> bool {
        if self.seen.insert(host.to_string()) {
            self.queue.push_back(host.to_string());
            true
        } else {
            false
        }
    }

    /// Re-enqueue a failed host at the back for its next retry cycle.
    fn requeue(&mut self, host: String) {
        debug_assert!(self.seen.contains(&host));
        debug_assert!(!self.queue.contains(&host));
        self.queue.push_back(host);
    }

    /// Pop the next window of up to `n` distinct hosts in FIFO order.
    /// Refuses while a previous window is still pending.
    pub fn next_window(&mut self, n: usize) -> Result<Window, SchedulerError> {
        if self.pending > 0 {
            return Err(SchedulerError::WindowPending);
        }
        if self.queue.is_empty() {
            return Err(SchedulerError::EmptyQueue);
        }
        let mut links = Vec::with_capacity(n.min(self.queue.len()));
        let mut deferred = VecDeque::new();
        while links.len() < n {
            let Some(host) = self.queue.pop_front() else {
                break;
            };
            // politeness: one request per host per window
            if links.contains(&host) {
                deferred.push_back(host);
            } else {
                links.push(host);
            }
        }
        while let Some(host) = deferred.pop_back() {
            self.queue.push_front(host);
        }
        self.pending = links.len();
        let outcomes = links.iter().map(|_| None).collect();
        Ok(Window { links, outcomes })
    }

    fn complete_window(&mut self, window: &Window) {
        debug_assert!(window.is_complete());
        self.pending = 0;
    }
}

/// One workload window: each worker owns the slot matching its index.
#[derive(Debug)]
pub struct Window {
    pub links: Vec<String>,
    pub outcomes: Vec<Option<FetchOutcome>>,
}

impl Window {
    pub fn is_complete(&self) -> bool {
        self.outcomes.iter().all(Option::is_some)
    }
}

#[derive(Debug, Clone)]
pub struct CrawlConfig {
    pub workers: usize,
    pub timeout: Duration,
    pub max_attempts: u8,
}

impl Default for CrawlConfig {
    fn default() -> Self {
        CrawlConfig {
            workers: 4,
            timeout: Duration::from_secs(30),
            max_attempts: MAX_ATTEMPTS,
        }
    }
}

/// Everything a finished (or aborted) crawl knows.
#[derive(Debug)]
pub struct CrawlReport {
    pub records: BTreeMap<String, PageRecord>,
    /// Hosts of each window in execution order, for barrier auditing.
    pub windows: Vec<Vec<String>>,
}

impl CrawlReport {
    /// Records in host order, ready for [`crate::corpus::save_snapshot`].
    pub fn snapshot(&self) -> Vec<PageRecord> {
        self.records.values().cloned().collect()
    }

    pub fn fetched_hosts(&self) -> BTreeSet<&str> {
        self.records
            .values()
            .filter(|r| r.status == CrawlStatus::Fetched)
            .map(PageRecord::host)
            .collect()
    }
}

/// Self-host stand-in for surface pages, whose links can never be `Own`:
/// the extractor interface wants an onion host to compare against. The
/// label is deliberately unnatural so no real fixture collides with it.
fn surface_sentinel() -> OnionAddress {
    let label: String = "mimirsurfacesentinel".chars().cycle().take(56).collect();
    match normalize_url(&format!("{label}.onion")).expect("sentinel is well-formed") {
        NormalizedUrl::Onion(addr) => addr,
        NormalizedUrl::Surface { .. } => unreachable!(),
    }
}

/// Crawl from scratch: seeds enter the queue at depth 0.
pub fn run_crawl(
    seeds: &[Seed],
    transport: &dyn FetchTransport,
    detector: &dyn LanguageDetector,
    config: &CrawlConfig,
    clock: &dyn Clock,
) -> Result<CrawlReport, SchedulerError> {
    validate_config(config)?;
    let mut records: BTreeMap<String, PageRecord> = BTreeMap::new();
    let mut todo = TodoList::new();
    for seed in seeds {
        let host = seed.url.host().to_string();
        if todo.enqueue(&host) {
            let mut record = PageRecord::discovered(seed.url.clone(), 0);
            if !seed.provenance.is_empty() {
                record.metadata.insert(
                    "seed_provenance".to_string(),
                    seed.provenance
                        .iter()
                        .cloned()
                        .collect::<Vec<_>>()
                        .join(";"),
                );
            }
            records.insert(host, record);
        }
    }
    crawl_loop(records, todo, transport, detector, config, clock)
}

/// Continue an aborted crawl: pending hosts re-enter the queue with their
/// attempt counters intact.
pub fn resume_crawl(
    snapshot: Vec<PageRecord>,
    transport: &dyn FetchTransport,
    detector: &dyn LanguageDetector,
    config: &CrawlConfig,
    clock: &dyn Clock,
) -> Result<CrawlReport, SchedulerError> {
    validate_config(config)?;
    let mut records = BTreeMap::new();
    let mut todo = TodoList::new();
    for record in snapshot {
        let host = record.host().to_string();
        todo.seen.insert(host.clone());
        records.insert(host, record);
    }
    // host order makes the resumed visit order deterministic
    for (host, record) in &records {
        if record.status == CrawlStatus::Pending && record.attempts < config.max_attempts {
            todo.queue.push_back(host.clone());
        }
    }
    crawl_loop(records, todo, transport, detector, config, clock)
}

fn validate_config(config: &CrawlConfig) -> Result<(), SchedulerError> {
    if config.workers == 0 {
        return Err(SchedulerError::BadConfig("workers must be ≥ 1".into()));
    }
    if config.timeout.is_zero() {
        return Err(SchedulerError::BadConfig("timeout must be > 0".into()));
    }
    if config.max_attempts == 0 || config.max_attempts > MAX_ATTEMPTS {
        return Err(SchedulerError::BadConfig(format!(
            "max attempts must be 1..={MAX_ATTEMPTS}"
        )));
    }
    Ok(())
}

fn crawl_loop(
    mut records: BTreeMap<String, PageRecord>,
    mut todo: TodoList,
    transport: &dyn FetchTransport,
    detector: &dyn LanguageDetector,
    config: &CrawlConfig,
    clock: &dyn Clock,
) -> Result<CrawlReport, SchedulerError> {
    let mut windows: Vec<Vec<String>> = Vec::new();
    while !todo.is_empty() {
        let mut window = todo.next_window(config.workers)?;
        let results: Vec<Result<FetchOutcome, FetchFailure>> = std::thread::scope(|scope| {
            let handles: Vec<_> = window
                .links
                .iter()
                .map(|host| scope.spawn(move || fetch_textonly(transport, host, config.timeout)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });

        let mut fatal: Option<String> = None;
        for (idx, result) in results.into_iter().enumerate() {
            match result {
                Ok(outcome) => {
                    let host = window.links[idx].clone();
                    process_outcome(&mut records, &mut todo, &host, &outcome, detector, config, clock);
                    window.outcomes[idx] = Some(outcome);
                }
                Err(failure) => {
                    // the link stays Pending; a resume will retry it
                    fatal.get_or_insert(failure.to_string());
                    window.outcomes[idx] = Some(FetchOutcome {
                        status: FetchStatus::TransportError,
                        body: Vec::new(),
                        elapsed_ms: 0,
                        media_skipped: false,
                    });
                }
            }
        }
        todo.complete_window(&window);
        windows.push(window.links.clone());
        if let Some(message) = fatal {
            return Err(SchedulerError::TransportFatal {
                message,
                snapshot: records.into_values().collect(),
            });
        }
    }
    relax_depths(&mut records);
    Ok(CrawlReport { records, windows })
}

fn process_outcome(
    records: &mut BTreeMap<String, PageRecord>,
    todo: &mut TodoList,
    host: &str,
    outcome: &FetchOutcome,
    detector: &dyn LanguageDetector,
    config: &CrawlConfig,
    clock: &dyn Clock,
) {
    let record = records.get_mut(host).expect("queued host has a record");
    record.attempts += 1;
    record.push_timestamp(clock.now());
    if !outcome.is_success() {
        if record.attempts >= config.max_attempts {
            record.status = CrawlStatus::Unreachable;
        } else {
            todo.requeue(host.to_string());
        }
        return;
    }

    record.status = CrawlStatus::Fetched;
    if outcome.media_skipped {
        record
            .metadata
            .insert("media_skipped".to_string(), "true".to_string());
        return;
    }
    record.store_html(outcome.body.clone(), DEFAULT_MAX_HTML_BYTES);
    let self_addr = match &record.url {
        NormalizedUrl::Onion(addr) => addr.clone(),
        NormalizedUrl::Surface { .. } => surface_sentinel(),
    };
    let extracted = extract_page(&record.html, &self_addr, detector);
    record.link_list = extracted.links.clone();
    for (key, value) in extracted.metadata {
        record.metadata.entry(key).or_insert(value);
    }
    record.languages = extracted
        .languages
        .iter()
        .map(|(code, _)| code.clone())
        .collect();
    let referrer_depth = record.depth;
    let referrer_host = record.host().to_string();

    for (raw, class) in &extracted.links {
        if *class != LinkClass::ExternalOnion {
            continue;
        }
        let Ok(target) = normalize_url(raw) else {
            continue;
        };
        let target_host = target.host().to_string();
        if !todo.seen(&target_host) {
            todo.enqueue(&target_host);
            records.insert(
                target_host.clone(),
                PageRecord::discovered(target, referrer_depth + 1),
            );
        }
        let target_record = records
            .get_mut(&target_host)
            .expect("discovered host has a record");
        target_record
            .referenced_by
            .insert(referrer_host.clone());
        target_record.depth = target_record.depth.min(referrer_depth + 1);
    }
}

/// Final BFS pass from the seeds: a page fetched early through a long path
/// may have gained a shorter referrer later, so depths are re-minimized
/// over the whole link graph.
fn relax_depths(records: &mut BTreeMap<String, PageRecord>) {
    let mut adjacency: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for record in records.values() {
        let targets = record
            .link_list
            .iter()
            .filter(|(_, class)| *class == LinkClass::ExternalOnion)
            .filter_map(|(raw, _)| normalize_url(raw).ok())
            .map(|url| url.host().to_string())
            .filter(|host| records.contains_key(host))
            .collect();
        adjacency.insert(record.host().to_string(), targets);
    }
    let mut depth: BTreeMap<String, u32> = BTreeMap::new();
    let mut queue: VecDeque<String> = VecDeque::new();
    for record in records.values() {
        if record.depth == 0 {
            depth.insert(record.host().to_string(), 0);
            queue.push_back(record.host().to_string());
        }
    }
    while let Some(host) = queue.pop_front() {
        let d = depth[&host];
        for next in adjacency.get(&host).into_iter().flatten() {
            if !depth.contains_key(next) {
                depth.insert(next.clone(), d + 1);
                queue.push_back(next.clone());
            }
        }
    }
    for record in records.values_mut() {
        if let Some(d) = depth.get(record.host()) {
            record.depth = *d;
        }
    }
}
