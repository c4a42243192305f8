//! Release gates for the library. Each test checks one gate end to end on
//! synthetic data and prints a single `ACCEPTANCE … PASS` line with the
//! measured numbers; a failure panics with the same numbers instead.
//!
//! These are heavier than unit tests — whole benchmark corpora, a thousand
//! randomized crawls — but each stays inside a desk-scale time budget.

use mimir_core::classify::{
    evaluate, f_beta_score, softmax_gradient, softmax_loss, train, vectorize_one,
    ClassifierConfig, Penalty, ReliabilityScore, SparseVec, TfidfMode, Vocabulary, CLASSES,
};
use mimir_core::corpus::{
    normalize_url, CrawlStatus, CrawlTimestamp, LinkClass, NormalizedUrl, MAX_ATTEMPTS,
};
use mimir_core::extractor::{extract_page, TrigramDetector};
use mimir_core::graph::{
    ablation_report, build_graph, seed_ablation, tagged_reachability,
    weakly_connected_components, PageGraph,
};
use mimir_core::mirror::bench::{bench_dedup, METHOD_MIMIR, METHOD_MINHASH, METHOD_SIMHASH};
use mimir_core::mirror::{
    cluster_mirrors, ctph_compare, ctph_hash, MirrorCluster, MirrorClusters, MirrorPage,
    MirrorWeights,
};
use mimir_core::prohibit::{classify_site, Lexicon, Verdict};
use mimir_core::scheduler::{
    run_crawl, CrawlConfig, FetchFailure, FetchTransport, FixedClock, RawResponse,
};
use mimir_core::seeder::{
    merge_seeds, query_engines, FixtureSearchClient, Keyword, SearchClient, Seed, MANUAL_TAG,
};
use mimir_core::synth::{generate, SynthCorpus, SynthSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Mutex;
use std::time::{Duration, Instant};

fn pass(gate: &str, detail: String) {
    println!("ACCEPTANCE {gate}: PASS ({detail})");
}

/// Deterministic well-formed v3-style host for index `i`.
fn onion(i: usize) -> String {
    let mut label = String::new();
    let mut n = i;
    for _ in 0..56 {
        label.push(char::from(b'a' + (n % 26) as u8));
        n /= 26;
    }
    format!("{label}.onion")
}

fn seed(host: &str, tags: &[&str]) -> Seed {
    Seed {
        url: normalize_url(host).expect("test hosts are well-formed"),
        provenance: tags.iter().map(|t| t.to_string()).collect(),
    }
}

/// Turns a generated corpus into the pages the dedup stage consumes,
/// running the real extractor on each document.
fn mirror_pages(corpus: &SynthCorpus) -> Vec<MirrorPage> {
    let detector = TrigramDetector::bundled();
    corpus
        .pages
        .iter()
        .enumerate()
        .map(|(i, page)| {
            let addr = match normalize_url(&page.host).expect("synth hosts are well-formed") {
                NormalizedUrl::Onion(addr) => addr,
                NormalizedUrl::Surface { .. } => unreachable!("synth only emits onions"),
            };
            let extracted = extract_page(page.html.as_bytes(), &addr, &detector);
            MirrorPage {
                host: page.host.clone(),
                first_seen: CrawlTimestamp(i as i64),
                html: page.html.clone().into_bytes(),
                text: extracted.text,
                scheme: extracted.scheme,
                top_language: extracted
                    .languages
                    .first()
                    .filter(|(code, _)| code != "und")
                    .map(|(code, _)| code.clone()),
            }
        })
        .collect()
}

// ---- scripted in-memory transport ----

/// Per-attempt outcome for one host.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Play {
    Html,
    Timeout,
    ServerError,
    Missing,
}

/// In-memory transport replaying a fixed outcome sequence per host (the
/// last entry repeats forever) while logging fetch start/end order for
/// barrier audits and per-host success for the retry-cap audit.
struct ScriptedTransport {
    pages: BTreeMap<String, String>,
    plays: BTreeMap<String, Vec<Play>>,
    attempts: Mutex<BTreeMap<String, usize>>,
    /// One entry per fetch: true when the response was a kept 200.
    delivered: Mutex<BTreeMap<String, Vec<bool>>>,
    /// (host, is_start) in global order.
    log: Mutex<Vec<(String, bool)>>,
}

impl ScriptedTransport {
    fn new(pages: BTreeMap<String, String>, plays: BTreeMap<String, Vec<Play>>) -> Self {
        ScriptedTransport {
            pages,
            plays,
            attempts: Mutex::new(BTreeMap::new()),
            delivered: Mutex::new(BTreeMap::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Every host answers 200 on the first try.
    fn serving(pages: BTreeMap<String, String>) -> Self {
        ScriptedTransport::new(pages, BTreeMap::new())
    }
}

impl FetchTransport for ScriptedTransport {
    fn fetch(&self, url: &str, _timeout: Duration) -> Result<RawResponse, FetchFailure> {
        let host = normalize_url(url)
            .expect("crawler passes normalized hosts")
            .host()
            .to_string();
        self.log.lock().unwrap().push((host.clone(), true));
        let attempt = {
            let mut attempts = self.attempts.lock().unwrap();
            let counter = attempts.entry(host.clone()).or_insert(0);
            let n = *counter;
            *counter += 1;
            n
        };
        let play = self
            .plays
            .get(&host)
            .map(|seq| seq[attempt.min(seq.len() - 1)])
            .unwrap_or(Play::Html);
        let result = match play {
            Play::Html => match self.pages.get(&host) {
                Some(html) => Ok(RawResponse {
                    status: 200,
                    content_type: "text/html".to_string(),
                    body: html.clone().into_bytes(),
                }),
                None => Ok(RawResponse {
                    status: 404,
                    content_type: "text/html".to_string(),
                    body: Vec::new(),
                }),
            },
            Play::Timeout => Err(FetchFailure::Timeout),
            Play::ServerError => Ok(RawResponse {
                status: 503,
                content_type: "text/html".to_string(),
                body: Vec::new(),
            }),
            Play::Missing => Ok(RawResponse {
                status: 404,
                content_type: "text/html".to_string(),
                body: Vec::new(),
            }),
        };
        let kept = matches!(&result, Ok(r) if r.status == 200);
        self.delivered
            .lock()
            .unwrap()
            .entry(host.clone())
            .or_default()
            .push(kept);
        self.log.lock().unwrap().push((host, false));
        result
    }
}

/// Every fetch of window w+1 must start after every fetch of window w has
/// ended. The k-th logged (start, end) pair of a host belongs to the k-th
/// window that lists the host.
fn assert_barrier(windows: &[Vec<String>], log: &[(String, bool)]) {
    let mut pairs: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    let mut open: BTreeMap<String, usize> = BTreeMap::new();
    for (pos, (host, is_start)) in log.iter().enumerate() {
        if *is_start {
            assert!(
                open.insert(host.clone(), pos).is_none(),
                "{host} fetched twice concurrently"
            );
        } else {
            let start = open.remove(host).expect("end without start");
            pairs.entry(host.clone()).or_default().push((start, pos));
        }
    }
    assert!(open.is_empty(), "unfinished fetches: {open:?}");

    let mut cursor: BTreeMap<&str, usize> = BTreeMap::new();
    let mut bounds = Vec::with_capacity(windows.len());
    for window in windows {
        let (mut first_start, mut last_end) = (usize::MAX, 0);
        for host in window {
            let k = cursor.entry(host.as_str()).or_insert(0);
            let (start, end) = pairs[host.as_str()][*k];
            *k += 1;
            first_start = first_start.min(start);
            last_end = last_end.max(end);
        }
        bounds.push((first_start, last_end));
    }
    for (w, adjacent) in bounds.windows(2).enumerate() {
        assert!(
            adjacent[0].1 < adjacent[1].0,
            "window {} (ends at {}) overlaps window {} (starts at {})",
            w,
            adjacent[0].1,
            w + 1,
            adjacent[1].0
        );
    }
}

// ---- gate 1: benchmark separation ----

#[test]
fn mirror_benchmark_beats_both_baselines_without_repetitions() {
    let started = Instant::now();
    let spec = SynthSpec {
        n_uniques: 420,
        fanout_mean: 1.2,
        magnitude: 0.08,
        rng_seed: 11,
        ..SynthSpec::default()
    };
    let corpus = generate(&spec).expect("spec is valid");
    let pages = mirror_pages(&corpus);
    let labels: Vec<usize> = corpus.pages.iter().map(|p| p.cluster_id).collect();

    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, &cluster) in labels.iter().enumerate() {
        members.entry(cluster).or_default().push(idx);
    }
    let mut positives: Vec<(usize, usize)> = Vec::new();
    for group in members.values() {
        for i in 0..group.len() {
            for j in i + 1..group.len() {
                positives.push((group[i], group[j]));
            }
        }
    }
    assert!(
        positives.len() >= 1000,
        "corpus yields only {} labeled mirror pairs",
        positives.len()
    );
    positives.truncate(1000);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut negatives: BTreeSet<(usize, usize)> = BTreeSet::new();
    while negatives.len() < 1000 {
        let a = rng.gen_range(0..pages.len());
        let b = rng.gen_range(0..pages.len());
        if labels[a] != labels[b] {
            negatives.insert((a.min(b), a.max(b)));
        }
    }
    let mut pairs = positives;
    pairs.extend(negatives);

    let report = bench_dedup(&pages, &labels, &pairs, &MirrorWeights::default())
        .expect("benchmark inputs are consistent");
    let hybrid = report.row(METHOD_MIMIR).expect("hybrid row present");
    let simhash = report.row(METHOD_SIMHASH).expect("simhash row present");
    let minhash = report.row(METHOD_MINHASH).expect("minhash row present");

    assert!(
        hybrid.f1 >= 0.95,
        "hybrid F1 {:.4} below 0.95 (tp {} fp {} fn {})",
        hybrid.f1,
        hybrid.tp,
        hybrid.fp,
        hybrid.fn_count
    );
    assert!(
        hybrid.f1 > simhash.f1,
        "hybrid F1 {:.4} does not beat simhash {:.4}",
        hybrid.f1,
        simhash.f1
    );
    assert!(
        hybrid.f1 > minhash.f1,
        "hybrid F1 {:.4} does not beat minhash {:.4}",
        hybrid.f1,
        minhash.f1
    );
    assert_eq!(
        hybrid.repetitions, 0,
        "hybrid assigned {} pages to more than one cluster",
        hybrid.repetitions
    );
    let elapsed = started.elapsed();
    assert!(
        elapsed <= Duration::from_secs(120),
        "benchmark took {elapsed:?}, budget is 2 min"
    );
    pass(
        "benchmark separation",
        format!(
            "hybrid F1 {:.3} > simhash {:.3}, minhash {:.3}; repetitions 0; {:.1}s",
            hybrid.f1,
            simhash.f1,
            minhash.f1,
            elapsed.as_secs_f64()
        ),
    );
}

// ---- gate 2: mirror-fraction recovery ----

#[test]
fn mirror_fraction_recovery_at_eighty_percent() {
    let spec = SynthSpec {
        n_uniques: 150,
        fanout_mean: 4.0,
        rng_seed: 42,
        ..SynthSpec::default()
    };
    let corpus = generate(&spec).expect("spec is valid");
    let total = corpus.pages.len();
    let uniques: BTreeSet<usize> = corpus.pages.iter().map(|p| p.cluster_id).collect();
    let fraction = 1.0 - uniques.len() as f64 / total as f64;
    assert!(
        (0.78..=0.82).contains(&fraction),
        "generated mirror fraction {fraction:.3} outside 80% ± 2%"
    );

    let pages = mirror_pages(&corpus);
    let clusters = cluster_mirrors(pages, &MirrorWeights::default()).expect("weights are valid");
    let predicted = clusters.representative_of();
    let truth: BTreeMap<&str, usize> = corpus
        .pages
        .iter()
        .map(|p| (p.host.as_str(), p.cluster_id))
        .collect();

    let hosts: Vec<&str> = corpus.pages.iter().map(|p| p.host.as_str()).collect();
    let mut agreements = 0usize;
    let mut pair_count = 0usize;
    for i in 0..hosts.len() {
        for j in i + 1..hosts.len() {
            let together_truth = truth[hosts[i]] == truth[hosts[j]];
            let together_predicted = predicted[hosts[i]] == predicted[hosts[j]];
            pair_count += 1;
            if together_truth == together_predicted {
                agreements += 1;
            }
        }
    }
    let accuracy = agreements as f64 / pair_count as f64;
    assert!(
        accuracy >= 0.95,
        "pairwise clustering accuracy {accuracy:.4} below 0.95 \
         ({agreements}/{pair_count} pairs, mirror fraction {fraction:.3})"
    );
    pass(
        "mirror-fraction recovery",
        format!(
            "fraction {:.1}%, pairwise accuracy {:.4} over {} pairs",
            100.0 * fraction,
            accuracy,
            pair_count
        ),
    );
}

// ---- gate 3: fuzzy-hash behaviour ----

/// 8 KiB of word-shaped random text.
fn random_document(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut out = Vec::with_capacity(8192);
    while out.len() < 8192 {
        let word_len = rng.gen_range(3..10);
        for _ in 0..word_len {
            out.push(rng.gen_range(b'a'..=b'z'));
        }
        out.push(b' ');
    }
    out.truncate(8192);
    out
}

#[test]
fn fuzzy_hash_edit_tolerance_and_noise_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);

    for _ in 0..20 {
        let doc = random_document(&mut rng);
        let first = ctph_hash(&doc);
        let second = ctph_hash(&doc.clone());
        assert_eq!(first, second, "hashing is not deterministic");
        assert_eq!(ctph_compare(&first, &second), 100);
    }

    // symmetry over identical, edited and unrelated pairs
    for case in 0..50 {
        let a = random_document(&mut rng);
        let b = match case % 3 {
            0 => a.clone(),
            1 => {
                let mut b = a.clone();
                let at = rng.gen_range(0..b.len() - 64);
                for byte in &mut b[at..at + 64] {
                    *byte = rng.gen_range(b'a'..=b'z');
                }
                b
            }
            _ => random_document(&mut rng),
        };
        let (ha, hb) = (ctph_hash(&a), ctph_hash(&b));
        assert_eq!(ctph_compare(&ha, &hb), ctph_compare(&hb, &ha));
    }

    // contiguous edits of at most 2% of the bytes keep the score high
    let span_cap = 8192 / 50; // 2%
    let mut high_scores = 0usize;
    for case in 0..200 {
        let base = random_document(&mut rng);
        let mut edited = base.clone();
        let span = rng.gen_range(1..=span_cap);
        let at = rng.gen_range(0..edited.len() - span);
        match case % 3 {
            0 => {
                for byte in &mut edited[at..at + span] {
                    *byte = rng.gen_range(b'a'..=b'z');
                }
            }
            1 => {
                edited.drain(at..at + span);
            }
            _ => {
                let insert: Vec<u8> = (0..span).map(|_| rng.gen_range(b'a'..=b'z')).collect();
                edited.splice(at..at, insert);
            }
        }
        if ctph_compare(&ctph_hash(&base), &ctph_hash(&edited)) >= 90 {
            high_scores += 1;
        }
    }
    assert!(
        high_scores >= 190,
        "only {high_scores}/200 edited documents scored >= 90"
    );

    // independent documents never leave the noise floor
    let mut floor_max = 0u32;
    for _ in 0..100 {
        let a = ctph_hash(&random_document(&mut rng));
        let b = ctph_hash(&random_document(&mut rng));
        let score = ctph_compare(&a, &b);
        floor_max = floor_max.max(score);
        assert!(score <= 10, "unrelated documents scored {score}");
    }

    pass(
        "fuzzy hashing",
        format!("edit tolerance {high_scores}/200, unrelated max score {floor_max}"),
    );
}

// ---- gate 4: scheduler contract ----

#[test]
fn scheduler_barrier_retry_cap_and_worker_invariance() {
    let detector = TrigramDetector::bundled();
    let hosts: Vec<String> = (0..8).map(onion).collect();
    let plays_menu = [
        Play::Html,
        Play::Html,
        Play::Html,
        Play::Html,
        Play::Html,
        Play::Html,
        Play::Timeout,
        Play::Timeout,
        Play::ServerError,
        Play::Missing,
    ];

    let corpus_for = |rng: &mut ChaCha8Rng| -> (BTreeMap<String, String>, BTreeMap<String, Vec<Play>>) {
        let pages = hosts
            .iter()
            .map(|host| {
                let links: String = (0..rng.gen_range(0..4))
                    .map(|_| {
                        format!(
                            "<a href=\"http://{}/\">x</a>",
                            hosts[rng.gen_range(0..hosts.len())]
                        )
                    })
                    .collect();
                (host.clone(), format!("<html><body>{links}</body></html>"))
            })
            .collect();
        let plays = hosts
            .iter()
            .map(|host| {
                let seq: Vec<Play> = (0..rng.gen_range(1..=6))
                    .map(|_| plays_menu[rng.gen_range(0..plays_menu.len())])
                    .collect();
                (host.clone(), seq)
            })
            .collect();
        (pages, plays)
    };

    let mut windows_audited = 0usize;
    let mut unreachable_seen = 0usize;
    for round in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(round);
        let (pages, plays) = corpus_for(&mut rng);
        let transport = ScriptedTransport::new(pages, plays);
        let config = CrawlConfig {
            workers: [1, 2, 3, 4, 7, 16][rng.gen_range(0..6)],
            ..CrawlConfig::default()
        };
        let seeds: Vec<Seed> = hosts
            .iter()
            .take(rng.gen_range(1..=3))
            .map(|host| seed(host, &[MANUAL_TAG]))
            .collect();
        let report = run_crawl(&seeds, &transport, &detector, &config, &FixedClock::new(0, 1))
            .expect("scripted plays are never fatal");

        assert_barrier(&report.windows, &transport.log.lock().unwrap());
        windows_audited += report.windows.len();

        let delivered = transport.delivered.lock().unwrap();
        for record in report.records.values() {
            record.validate().expect("record invariants hold");
            let outcomes = delivered
                .get(record.host())
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            assert_eq!(
                record.attempts as usize,
                outcomes.len(),
                "{}: attempts diverge from transport calls",
                record.host()
            );
            let succeeded = outcomes.contains(&true);
            let failures = outcomes.iter().filter(|kept| !**kept).count();
            let unreachable = record.status == CrawlStatus::Unreachable;
            assert_eq!(
                unreachable,
                failures == MAX_ATTEMPTS as usize && !succeeded,
                "{}: status {:?} vs {} failures, succeeded {}",
                record.host(),
                record.status,
                failures,
                succeeded
            );
            if unreachable {
                unreachable_seen += 1;
            }
        }
    }

    // the fetched set must not depend on parallelism
    let mut fetched_sets: Vec<BTreeSet<String>> = Vec::new();
    let mut depth_maps: Vec<BTreeMap<String, u32>> = Vec::new();
    for workers in [1usize, 4, 16] {
        let mut rng = ChaCha8Rng::seed_from_u64(424_242);
        let (pages, plays) = corpus_for(&mut rng);
        let transport = ScriptedTransport::new(pages, plays);
        let config = CrawlConfig {
            workers,
            ..CrawlConfig::default()
        };
        let seeds = [seed(&hosts[0], &[MANUAL_TAG]), seed(&hosts[1], &[MANUAL_TAG])];
        let report = run_crawl(&seeds, &transport, &detector, &config, &FixedClock::new(0, 1))
            .expect("scripted plays are never fatal");
        fetched_sets.push(
            report
                .fetched_hosts()
                .into_iter()
                .map(str::to_string)
                .collect(),
        );
        depth_maps.push(
            report
                .records
                .values()
                .map(|r| (r.host().to_string(), r.depth))
                .collect(),
        );
    }
    assert_eq!(fetched_sets[0], fetched_sets[1], "workers 1 vs 4 diverge");
    assert_eq!(fetched_sets[0], fetched_sets[2], "workers 1 vs 16 diverge");
    assert_eq!(depth_maps[0], depth_maps[1], "depths differ across workers");
    assert_eq!(depth_maps[0], depth_maps[2], "depths differ across workers");

    pass(
        "scheduler contract",
        format!(
            "{windows_audited} windows barrier-clean over 1000 schedules, \
             {unreachable_seen} unreachable records all at {MAX_ATTEMPTS} failed attempts, \
             fetched set worker-invariant"
        ),
    );
}

// ---- gate 5: graph analyses vs brute force ----

/// Directed reachability by depth-first search — deliberately a different
/// algorithm and code path from the library's breadth-first walk.
fn dfs(adjacency: &BTreeMap<String, BTreeSet<String>>, starts: &BTreeSet<String>) -> BTreeSet<String> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut stack: Vec<&String> = starts.iter().collect();
    while let Some(node) = stack.pop() {
        if !seen.insert(node.clone()) {
            continue;
        }
        if let Some(next) = adjacency.get(node) {
            stack.extend(next);
        }
    }
    seen
}

struct GraphOracle {
    /// Folded directed adjacency between representatives.
    directed: BTreeMap<String, BTreeSet<String>>,
    /// Folded undirected adjacency.
    undirected: BTreeMap<String, BTreeSet<String>>,
    /// All representative nodes.
    nodes: BTreeSet<String>,
    /// Folded directed edge count.
    edge_count: usize,
    /// host → representative.
    fold: BTreeMap<String, String>,
}

impl GraphOracle {
    fn build(records: &[mimir_core::corpus::PageRecord], clusters: &MirrorClusters) -> Self {
        let mut fold: BTreeMap<String, String> = BTreeMap::new();
        for cluster in &clusters.clusters {
            fold.insert(cluster.representative.clone(), cluster.representative.clone());
            for mirror in &cluster.mirrors {
                fold.insert(mirror.clone(), cluster.representative.clone());
            }
        }
        let rep = |host: &str| -> String {
            fold.get(host).cloned().unwrap_or_else(|| host.to_string())
        };

        let mut nodes: BTreeSet<String> = BTreeSet::new();
        let mut directed: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut undirected: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
        for record in records {
            nodes.insert(rep(record.host()));
        }
        for record in records {
            let src = rep(record.host());
            for (raw, class) in &record.link_list {
                if *class != LinkClass::ExternalOnion {
                    continue;
                }
                let dst = rep(normalize_url(raw).expect("crawled links parse").host());
                if dst == src || !nodes.contains(&dst) {
                    continue;
                }
                edges.insert((src.clone(), dst.clone()));
                directed.entry(src.clone()).or_default().insert(dst.clone());
                undirected.entry(src.clone()).or_default().insert(dst.clone());
                undirected.entry(dst).or_default().insert(src.clone());
            }
        }
        GraphOracle {
            directed,
            undirected,
            edge_count: edges.len(),
            nodes,
            fold,
        }
    }

    fn rep(&self, host: &str) -> String {
        self.fold
            .get(host)
            .cloned()
            .unwrap_or_else(|| host.to_string())
    }

    fn components(&self) -> BTreeSet<Vec<String>> {
        let mut remaining = self.nodes.clone();
        let mut components = BTreeSet::new();
        while let Some(start) = remaining.iter().next().cloned() {
            let found = dfs(&self.undirected, &BTreeSet::from([start]));
            let members: Vec<String> = found.intersection(&remaining).cloned().collect();
            for member in &members {
                remaining.remove(member);
            }
            components.insert(members);
        }
        components
    }

    fn reach_tagged(&self, seeds: &[Seed], tag: &str) -> BTreeSet<String> {
        let starts: BTreeSet<String> = seeds
            .iter()
            .filter(|s| s.provenance.contains(tag))
            .map(|s| self.rep(s.url.host()))
            .collect();
        dfs(&self.directed, &starts)
    }
}

fn assert_graph_matches_oracle(
    graph: &PageGraph,
    oracle: &GraphOracle,
    seeds: &[Seed],
    depth_oracle: &BTreeMap<String, u32>,
    members_of: &BTreeMap<String, Vec<String>>,
) {
    // components
    let report = weakly_connected_components(graph);
    let got: BTreeSet<Vec<String>> = report
        .components
        .iter()
        .map(|c| c.hosts.clone())
        .collect();
    assert_eq!(got, oracle.components(), "component partition diverges");
    assert_eq!(report.total_nodes, oracle.nodes.len());
    assert_eq!(report.total_edges, oracle.edge_count);

    // depths: a node sits at the shortest crawl distance of any member
    for node in graph.nodes() {
        let expected = members_of[&node.host]
            .iter()
            .map(|member| depth_oracle[member])
            .min();
        assert_eq!(
            node.depth, expected,
            "depth of {} diverges from BFS oracle",
            node.host
        );
    }

    // seed ablation
    let tags: BTreeSet<String> = seeds
        .iter()
        .flat_map(|s| s.provenance.iter().cloned())
        .filter(|t| t != MANUAL_TAG)
        .collect();
    let mss_oracle = oracle.reach_tagged(seeds, MANUAL_TAG);
    for tag in &tags {
        let ks_oracle = oracle.reach_tagged(seeds, tag);
        let ks = tagged_reachability(graph, seeds, tag).expect("tag exists");
        assert_eq!(ks, ks_oracle, "KS({tag}) diverges");
        let sd = seed_ablation(graph, seeds, tag).expect("tag exists");
        let sd_oracle: BTreeSet<String> = ks_oracle.difference(&mss_oracle).cloned().collect();
        assert_eq!(sd, sd_oracle, "SD({tag}) diverges");
    }
    let keywords: Vec<String> = tags.iter().cloned().collect();
    let ablation = ablation_report(graph, seeds, &keywords).expect("tags exist");
    assert_eq!(ablation.mss_size, mss_oracle.len());
    let aks_starts: BTreeSet<String> = seeds
        .iter()
        .filter(|s| s.provenance.iter().any(|t| t != MANUAL_TAG))
        .map(|s| oracle.rep(s.url.host()))
        .collect();
    let aks_oracle = dfs(&oracle.directed, &aks_starts);
    assert_eq!(
        ablation.aks_novel,
        aks_oracle.difference(&mss_oracle).count(),
        "AKS novelty diverges"
    );
    for row in &ablation.rows {
        let ks_oracle = oracle.reach_tagged(seeds, &row.keyword);
        assert_eq!(row.novel, ks_oracle.difference(&mss_oracle).count());
    }
}

#[test]
fn graph_analyses_match_brute_force_oracles() {
    let detector = TrigramDetector::bundled();
    let mut nodes_checked = 0usize;
    for round in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9_000 + round);
        let n = rng.gen_range(2..=1000);
        let hosts: Vec<String> = (0..n).map(onion).collect();
        let pages: BTreeMap<String, String> = hosts
            .iter()
            .enumerate()
            .map(|(i, host)| {
                let links: String = (0..rng.gen_range(0..=3))
                    .map(|_| {
                        format!("<a href=\"http://{}/\">x</a>", hosts[rng.gen_range(0..n)])
                    })
                    .collect();
                let html = format!(
                    "<html><head><title>node {i}</title></head><body>{links}</body></html>"
                );
                (host.clone(), html)
            })
            .collect();
        let transport = ScriptedTransport::serving(pages);

        let mut picked: BTreeSet<usize> = BTreeSet::new();
        while picked.len() < rng.gen_range(1..=3.min(n)) {
            picked.insert(rng.gen_range(0..n));
        }
        let seeds: Vec<Seed> = picked
            .iter()
            .enumerate()
            .map(|(j, &idx)| {
                let mut tags: Vec<&str> = Vec::new();
                if j == 0 || rng.gen_bool(0.7) {
                    tags.push(["alpha", "beta"][rng.gen_range(0..2)]);
                }
                if rng.gen_bool(0.5) {
                    tags.push(MANUAL_TAG);
                }
                if tags.is_empty() {
                    tags.push("beta");
                }
                seed(&hosts[idx], &tags)
            })
            .collect();

        let config = CrawlConfig {
            workers: 8,
            ..CrawlConfig::default()
        };
        let report = run_crawl(&seeds, &transport, &detector, &config, &FixedClock::new(0, 1))
            .expect("transport always serves");
        let records = report.snapshot();

        // fold random subsets of crawled hosts into mirror clusters
        let mut shuffled: Vec<String> = records.iter().map(|r| r.host().to_string()).collect();
        shuffled.shuffle(&mut rng);
        let mut queue: VecDeque<String> = shuffled.into();
        let mut clusters = Vec::new();
        while let Some(representative) = queue.pop_front() {
            let extra = rng.gen_range(0..=2usize.min(queue.len()));
            let mirrors: Vec<String> = (0..extra).filter_map(|_| queue.pop_front()).collect();
            clusters.push(MirrorCluster {
                representative,
                mirrors,
            });
        }
        let clusters = MirrorClusters { clusters };

        let graph = build_graph(&records, &clusters);
        let oracle = GraphOracle::build(&records, &clusters);

        // independent breadth-first depths over the unfolded crawl links
        let mut adjacency: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for record in &records {
            let targets = record
                .link_list
                .iter()
                .filter(|(_, class)| *class == LinkClass::ExternalOnion)
                .map(|(raw, _)| {
                    normalize_url(raw)
                        .expect("crawled links parse")
                        .host()
                        .to_string()
                })
                .collect();
            adjacency.insert(record.host(), targets);
        }
        let mut depth_oracle: BTreeMap<String, u32> = BTreeMap::new();
        let mut frontier: VecDeque<String> = VecDeque::new();
        for s in &seeds {
            if depth_oracle.insert(s.url.host().to_string(), 0).is_none() {
                frontier.push_back(s.url.host().to_string());
            }
        }
        while let Some(host) = frontier.pop_front() {
            let next_depth = depth_oracle[&host] + 1;
            for target in adjacency.get(host.as_str()).into_iter().flatten() {
                if adjacency.contains_key(target.as_str())
                    && !depth_oracle.contains_key(target)
                {
                    depth_oracle.insert(target.clone(), next_depth);
                    frontier.push_back(target.clone());
                }
            }
        }

        let mut members_of: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for cluster in &clusters.clusters {
            let mut all = vec![cluster.representative.clone()];
            all.extend(cluster.mirrors.iter().cloned());
            members_of.insert(cluster.representative.clone(), all);
        }

        assert_graph_matches_oracle(&graph, &oracle, &seeds, &depth_oracle, &members_of);
        nodes_checked += graph.node_count();
    }

    // a keyword fixture that covers every manual seed forces MSS ⊆ AKS
    let dir = tempfile::tempdir().expect("tempdir");
    let corpus = generate(&SynthSpec {
        n_uniques: 20,
        fanout_mean: 1.5,
        rng_seed: 5,
        flaky_fraction: 0.0,
        dead_fraction: 0.0,
        ..SynthSpec::default()
    })
    .expect("spec is valid");
    corpus.write_fixtures(dir.path()).expect("fixtures written");
    let engine_dir = dir.path().join("engines/ahmia");
    std::fs::create_dir_all(&engine_dir).expect("engine dir");
    let manual_urls: Vec<String> = corpus.seeds.iter().map(|h| format!("http://{h}/")).collect();
    std::fs::write(engine_dir.join("markets"), manual_urls.join("\n")).expect("fixture written");

    let keywords = [Keyword {
        term: "markets".to_string(),
        score: 1.0,
    }];
    let engines: Vec<Box<dyn SearchClient>> =
        vec![Box::new(FixtureSearchClient::new("ahmia", engine_dir))];
    let queried = query_engines(&keywords, &engines);
    let merged = merge_seeds(queried.seeds, &manual_urls);
    assert!(merged
        .iter()
        .all(|s| s.provenance.contains(MANUAL_TAG) && s.provenance.contains("markets")));

    let transport =
        mimir_core::scheduler::transport::FixtureTransport::new(dir.path().join("corpus"));
    let report = run_crawl(
        &merged,
        &transport,
        &detector,
        &CrawlConfig::default(),
        &FixedClock::new(0, 1),
    )
    .expect("fixture crawl succeeds");
    let records = report.snapshot();
    let trivial = MirrorClusters {
        clusters: records
            .iter()
            .map(|r| MirrorCluster {
                representative: r.host().to_string(),
                mirrors: Vec::new(),
            })
            .collect(),
    };
    let graph = build_graph(&records, &trivial);
    let mss = tagged_reachability(&graph, &merged, MANUAL_TAG).expect("manual seeds exist");
    let aks = tagged_reachability(&graph, &merged, "markets").expect("keyword seeds exist");
    assert!(
        mss.is_subset(&aks),
        "manual coverage escapes the keyword coverage: {:?}",
        mss.difference(&aks).collect::<Vec<_>>()
    );

    pass(
        "graph oracles",
        format!(
            "components, depths and ablation sets equal on 100 random graphs \
             ({nodes_checked} nodes); demo corpus has MSS ⊆ AKS ({} ⊆ {})",
            mss.len(),
            aks.len()
        ),
    );
}

// ---- gate 6: classifier at desk scale ----

#[test]
fn classifier_accuracy_gradients_and_reliability() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let noise: Vec<String> = (0..50).map(|j| format!("noise{j:02}")).collect();
    let mut docs: Vec<Vec<String>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (class_index, class) in CLASSES.iter().enumerate() {
        let prefix: String = class
            .chars()
            .filter(char::is_ascii_alphabetic)
            .collect::<String>()
            .to_lowercase();
        let vocabulary: Vec<String> = (0..30).map(|j| format!("{prefix}{j:02}")).collect();
        for _ in 0..200 {
            // 24 class-specific tokens plus 6 shared-noise tokens: 20% noise
            let mut doc: Vec<String> = (0..24)
                .map(|_| vocabulary[rng.gen_range(0..vocabulary.len())].clone())
                .collect();
            doc.extend((0..6).map(|_| noise[rng.gen_range(0..noise.len())].clone()));
            docs.push(doc);
            labels.push(class_index);
        }
    }

    // a fixed, lightly regularized smooth operating point: the grid search
    // exists to find one, but pinning it keeps this gate fast and exact
    let config = ClassifierConfig {
        grid_search: false,
        penalty: Penalty::L2,
        c: 10.0,
        ..ClassifierConfig::default()
    };
    let model = train(&config, &docs, &labels).expect("training succeeds");
    let accuracy = model.report.pooled.accuracy;
    assert!(
        accuracy >= 0.90,
        "10-fold pooled accuracy {accuracy:.4} below 0.90"
    );

    // probabilities stay normalized
    let mut worst_drift = 0.0f64;
    for doc in docs.iter().step_by(7) {
        let prediction = model.predict_tokens(doc);
        let total: f64 = prediction.probabilities.iter().sum();
        worst_drift = worst_drift.max((total - 1.0).abs());
    }
    assert!(
        worst_drift <= 1e-9,
        "probability mass drifts by {worst_drift:e}"
    );

    // analytic gradient vs central differences on a small random problem
    let mut rng = ChaCha8Rng::seed_from_u64(607);
    let rows: Vec<SparseVec> = (0..12)
        .map(|_| {
            let mut row: SparseVec = Vec::new();
            for j in 0..5 {
                if rng.gen_bool(0.6) {
                    row.push((j, rng.gen_range(-1.0..1.0)));
                }
            }
            row
        })
        .collect();
    let grad_labels: Vec<usize> = (0..12).map(|_| rng.gen_range(0..4)).collect();
    let mut weights: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..6).map(|_| rng.gen_range(-0.5..0.5)).collect())
        .collect();
    let analytic = softmax_gradient(&rows, &grad_labels, &weights, Penalty::L2, 2.0);
    let step = 1e-5;
    let mut worst_rel = 0.0f64;
    for class in 0..4 {
        for column in 0..6 {
            let keep = weights[class][column];
            weights[class][column] = keep + step;
            let up = softmax_loss(&rows, &grad_labels, &weights, Penalty::L2, 2.0);
            weights[class][column] = keep - step;
            let down = softmax_loss(&rows, &grad_labels, &weights, Penalty::L2, 2.0);
            weights[class][column] = keep;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[class][column];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            worst_rel = worst_rel.max(rel);
        }
    }
    assert!(
        worst_rel <= 1e-5,
        "gradient mismatch: relative error {worst_rel:e}"
    );

    // conformal reliability is exactly 1 − (p1 − p2)
    for _ in 0..1000 {
        let k = rng.gen_range(2..=11);
        let mut probs: Vec<f64> = (0..k).map(|_| rng.gen_range(1e-6..1.0)).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        let mut sorted = probs.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        let expected = 1.0 - (sorted[0] - sorted[1]);
        assert_eq!(
            ReliabilityScore::from_probabilities(&probs).0,
            expected,
            "reliability deviates on {probs:?}"
        );
    }

    pass(
        "classifier",
        format!(
            "pooled 10-fold accuracy {:.3}, probability drift {:.1e}, \
             gradient error {:.1e}, reliability exact on 1000 vectors; {:.0}s",
            accuracy,
            worst_drift,
            worst_rel,
            started.elapsed().as_secs_f64()
        ),
    );
}

// ---- gate 7: metric and vectorizer micro-oracles ----

#[test]
fn metric_and_vectorizer_micro_oracles() {
    const TOL: f64 = 1e-12;

    // five predictions, confusion counted by hand:
    //   preds [0,1,1,2,0] vs truth [0,1,2,2,1]
    //   tp [1,1,1], fp [1,1,0], fn [0,1,1]
    let m = evaluate(&[0, 1, 1, 2, 0], &[0, 1, 2, 2, 1], 3, 1.0).expect("valid inputs");
    assert!((m.accuracy - 3.0 / 5.0).abs() <= TOL);
    assert!((m.macro_precision - 2.0 / 3.0).abs() <= TOL);
    assert!((m.macro_recall - 2.0 / 3.0).abs() <= TOL);
    assert!((m.f_beta - 2.0 / 3.0).abs() <= TOL);

    // five predictions under beta = 2:
    //   preds [0,0,0,1,1] vs truth [0,1,1,1,1]
    //   tp [1,2], fp [2,0], fn [0,2] → P = 2/3, R = 3/4, F2 = 30/41
    let m = evaluate(&[0, 0, 0, 1, 1], &[0, 1, 1, 1, 1], 2, 2.0).expect("valid inputs");
    assert!((m.accuracy - 3.0 / 5.0).abs() <= TOL);
    assert!((m.macro_precision - 2.0 / 3.0).abs() <= TOL);
    assert!((m.macro_recall - 3.0 / 4.0).abs() <= TOL);
    assert!((m.f_beta - 30.0 / 41.0).abs() <= TOL);

    // the score formula alone: (1+β²)PR / (β²P + R)
    assert!((f_beta_score(0.5, 0.25, 2.0) - 5.0 / 18.0).abs() <= TOL);
    assert_eq!(f_beta_score(0.0, 0.0, 1.0), 0.0);

    // two documents against a fixed vocabulary of 8 training documents:
    //   idf(apple)  = log2(8/2) = 2
    //   idf(banana) = log2(8/4) = 1
    //   idf(cherry) = log2(8/8) = 0 → dropped by the clamp
    let vocab = Vocabulary::from_parts(
        vec![
            ("apple".to_string(), 0, 1),
            ("banana".to_string(), 1, 3),
            ("cherry".to_string(), 2, 7),
        ],
        8,
    )
    .expect("dense parts");
    let doc_a: Vec<String> = ["apple", "apple", "banana"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let doc_b: Vec<String> = ["banana", "cherry", "cherry", "cherry", "apple"]
        .iter()
        .map(|s| s.to_string())
        .collect();

    // standard mode: (1 + log2 tf) · idf, then L2 row normalization
    //   doc_a: apple (1+1)·2 = 4, banana 1 → [4, 1]/√17
    //   doc_b: apple 2, banana 1 → [2, 1]/√5
    let row = vectorize_one(&doc_a, &vocab, TfidfMode::Standard);
    let norm = 17.0f64.sqrt();
    assert_eq!(row.len(), 2);
    assert_eq!(row[0].0, 0);
    assert!((row[0].1 - 4.0 / norm).abs() <= TOL);
    assert_eq!(row[1].0, 1);
    assert!((row[1].1 - 1.0 / norm).abs() <= TOL);

    let row = vectorize_one(&doc_b, &vocab, TfidfMode::Standard);
    let norm = 5.0f64.sqrt();
    assert_eq!(row.len(), 2);
    assert!((row[0].1 - 2.0 / norm).abs() <= TOL);
    assert!((row[1].1 - 1.0 / norm).abs() <= TOL);

    // literal mode: tf / idf, unnormalized
    //   doc_a: apple 2/2 = 1, banana 1/1 = 1
    //   doc_b: apple 1/2 = 0.5, banana 1/1 = 1
    let row = vectorize_one(&doc_a, &vocab, TfidfMode::PaperLiteral);
    assert_eq!(row.len(), 2);
    assert!((row[0].1 - 1.0).abs() <= TOL);
    assert!((row[1].1 - 1.0).abs() <= TOL);
    let row = vectorize_one(&doc_b, &vocab, TfidfMode::PaperLiteral);
    assert!((row[0].1 - 0.5).abs() <= TOL);
    assert!((row[1].1 - 1.0).abs() <= TOL);

    // a vocabulary fitted on just the two documents makes every idf
    // non-positive (df+1 smoothing), so both rows vanish entirely
    let tiny: Vec<Vec<String>> = vec![
        vec!["x".to_string(), "y".to_string()],
        vec!["y".to_string(), "z".to_string()],
    ];
    let tiny_vocab = Vocabulary::fit(&tiny).expect("non-empty");
    for doc in &tiny {
        assert!(vectorize_one(doc, &tiny_vocab, TfidfMode::Standard).is_empty());
        assert!(vectorize_one(doc, &tiny_vocab, TfidfMode::PaperLiteral).is_empty());
    }

    pass(
        "metric and vectorizer oracles",
        "hand-computed F_beta and tf-idf values reproduced to 1e-12".to_string(),
    );
}

// ---- gate 8: prohibition verdicts ----

#[test]
fn prohibition_verdicts_on_crafted_phrases() {
    let lexicon = Lexicon::parse(
        "[keywords]\ncontraband\n\
         [negative_verbs]\nremoved\ncensored\nbanned\n\
         [positive_verbs]\nallowed\npermitted\nshared\naccepted\n\
         [negative_adjectives]\nforbidden\nprohibited\n\
         [positive_adjectives]\nwelcome\nlegal\navailable\n",
    )
    .expect("lexicon parses");
    lexicon.validate().expect("no contradictory polarity");

    // one phrase per prohibition structure
    let forbids = [
        "contraband is not allowed",
        "contraband will be removed",
        "contraband is not welcome",
        "contraband is censored",
        "contraband is forbidden",
    ];
    for phrase in forbids {
        let verdict = classify_site(phrase, &lexicon);
        assert_eq!(
            verdict.verdict,
            Verdict::Forbids,
            "{phrase:?} gave {:?}",
            verdict.verdict
        );
        assert!(
            verdict.matched_sentences.iter().any(|(_, rule)| rule.is_some()),
            "{phrase:?} matched no rule"
        );
    }

    // keyword present, no prohibition structure
    let allows = [
        "contraband is allowed here",
        "contraband is welcome on this market",
        "fresh contraband is available every week",
        "contraband is legal in our jurisdiction",
        "we accept contraband from trusted vendors",
        "contraband will be shared with members",
        "contraband is permitted for premium accounts",
        "buy contraband with instant escrow",
        "our contraband catalog is updated daily",
        "contraband listings grow every day",
        "premium contraband ships worldwide",
        "this forum hosts contraband reviews",
        "contraband is our specialty",
        "members trade contraband freely",
        "contraband is encouraged by the admins",
        "new contraband arrives each morning",
        "contraband is stocked in every category",
        "the best contraband is sold here",
        "contraband galleries are open to all",
        "verified vendors supply contraband daily",
    ];
    assert_eq!(allows.len(), 20);
    for phrase in allows {
        let verdict = classify_site(phrase, &lexicon);
        assert_eq!(
            verdict.verdict,
            Verdict::Allows,
            "{phrase:?} gave {:?}",
            verdict.verdict
        );
    }

    // an empty lexicon can never produce a signal
    let empty = Lexicon::default();
    for phrase in forbids.iter().chain(allows.iter()).chain(["", "hello world"].iter()) {
        assert_eq!(classify_site(phrase, &empty).verdict, Verdict::NoSignal);
    }

    pass(
        "prohibition detector",
        "5 structure phrases forbid, 20 crafted phrases allow, empty lexicon silent".to_string(),
    );
}
