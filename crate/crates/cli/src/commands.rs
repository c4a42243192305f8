//! The subcommand implementations: thin orchestrations that read inputs,
//! call one library module, write the outputs under `--out`, and append a
//! manifest line.

use crate::config::{ClockKind, Config, TransportKind};
use crate::manifest::Manifest;
use crate::{
    BenchHashArgs, ClassifyPredictArgs, ClassifyTrainArgs, CliError, CrawlArgs, DedupArgs,
    DetectArgs, GraphArgs, SeedArgs, SynthgenArgs,
};
use mimir_core::classify::{preprocess, report_csv, LRModel};
use mimir_core::corpus::{
    load_snapshot, normalize_url, save_snapshot, CrawlStatus, NormalizedUrl, OnionAddress,
    PageRecord,
};
use mimir_core::extractor::{extract_page, extract_text, TrigramDetector};
use mimir_core::graph::{ablation_report, build_graph, weakly_connected_components};
use mimir_core::mirror::bench::{bench_dedup, METHOD_MIMIR, METHOD_MINHASH, METHOD_SIMHASH};
use mimir_core::mirror::{cluster_mirrors, MirrorCluster, MirrorClusters, MirrorPage};
use mimir_core::prohibit::{classify_site, Lexicon, Verdict};
use mimir_core::scheduler::{
    resume_crawl, run_crawl, Clock, CrawlConfig, FetchTransport, FixedClock, FixtureTransport,
    ProxyTransport, SchedulerError, SystemClock,
};
use mimir_core::seeder::{
    extract_keywords, merge_seeds, query_engines, FixtureSearchClient, Keyword, SearchClient,
    Seed, DEFAULT_KEYWORDS, MANUAL_TAG,
};
use mimir_core::synth::{generate, SynthSpec, Topology};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

fn domain(context: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Domain(format!("{}: {e}", context.display()))
}

fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| domain(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Seed lists hold either JSON seed objects or bare URLs, one per line;
/// bare URLs count as manually provided.
fn read_seeds(path: &Path) -> Result<Vec<Seed>, CliError> {
    let mut seeds = Vec::new();
    for (number, line) in read_lines(path)?.iter().enumerate() {
        let seed = if line.starts_with('{') {
            serde_json::from_str::<Seed>(line)
                .map_err(|e| domain(path, format!("line {}: {e}", number + 1)))?
        } else {
            let url = normalize_url(line)
                .map_err(|e| domain(path, format!("line {}: {e}", number + 1)))?;
            Seed {
                url,
                provenance: BTreeSet::from([MANUAL_TAG.to_string()]),
            }
        };
        seeds.push(seed);
    }
    Ok(seeds)
}

fn write_output(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if parent != Path::new("") {
            std::fs::create_dir_all(parent).map_err(|e| domain(parent, e))?;
        }
    }
    std::fs::write(path, content).map_err(|e| domain(path, e))
}

/// Fetched pages that actually carry a body.
fn content_pages(records: &[PageRecord]) -> Vec<&PageRecord> {
    records
        .iter()
        .filter(|r| r.status == CrawlStatus::Fetched && !r.html.is_empty())
        .collect()
}

/// The crawler's stand-in self host for surface pages, where no link can
/// be `Own` anyway.
fn self_address(record: &PageRecord) -> OnionAddress {
    if let Some(addr) = record.url.onion() {
        return addr.clone();
    }
    let label: String = "mimirsurfacesentinel".chars().cycle().take(56).collect();
    match normalize_url(&format!("{label}.onion")).expect("sentinel is well-formed") {
        NormalizedUrl::Onion(addr) => addr,
        NormalizedUrl::Surface { .. } => unreachable!(),
    }
}

fn mirror_pages(records: &[PageRecord]) -> Vec<MirrorPage> {
    let detector = TrigramDetector::bundled();
    content_pages(records)
        .into_iter()
        .map(|record| {
            let extracted = extract_page(&record.html, &self_address(record), &detector);
            MirrorPage::from_parts(record, &extracted)
        })
        .collect()
}

/// "S,C" → (S, C), rejecting anything that does not sum to 1.
fn parse_weights(raw: &str) -> Result<(f64, f64), CliError> {
    let usage = |m: String| CliError::Usage(format!("--weights {raw:?}: {m}"));
    let parts: Vec<&str> = raw.split(',').collect();
    let [scheme, content] = parts.as_slice() else {
        return Err(usage("expected two comma-separated numbers".into()));
    };
    let scheme: f64 = scheme
        .trim()
        .parse()
        .map_err(|e| usage(format!("{e}")))?;
    let content: f64 = content
        .trim()
        .parse()
        .map_err(|e| usage(format!("{e}")))?;
    if (scheme + content - 1.0).abs() > 1e-9 {
        return Err(usage(format!("{scheme} + {content} must sum to 1")));
    }
    Ok((scheme, content))
}

fn apply_mirror_flags(
    config: &mut Config,
    weights: Option<&str>,
    threshold: Option<f64>,
) -> Result<(), CliError> {
    if let Some(raw) = weights {
        let (scheme, content) = parse_weights(raw)?;
        Config::set("weights", &mut config.mirror.scheme_weight, Some(scheme));
        Config::set("weights", &mut config.mirror.content_weight, Some(content));
    }
    Config::set("threshold", &mut config.mirror.threshold, threshold);
    Ok(())
}

fn parse_flag<T: FromStr<Err = String>>(
    name: &str,
    value: Option<&str>,
) -> Result<Option<T>, CliError> {
    value
        .map(|v| T::from_str(v).map_err(|e| CliError::Usage(format!("--{name}: {e}"))))
        .transpose()
}

// ---------------------------------------------------------------- seed --

pub fn seed(config: Config, args: &SeedArgs) -> Result<(), CliError> {
    let _ = &config;
    let keywords: Vec<Keyword> = match &args.titles {
        Some(path) => {
            let titles = read_lines(path)?;
            extract_keywords(&titles, args.keywords)
                .map_err(|e| CliError::Domain(e.to_string()))?
        }
        None => DEFAULT_KEYWORDS
            .iter()
            .map(|term| Keyword {
                term: term.to_string(),
                score: 0.0,
            })
            .collect(),
    };
    let engine_names: Vec<&str> = args
        .engines
        .split(',')
        .map(str::trim)
        .filter(|n| !n.is_empty())
        .collect();
    if engine_names.is_empty() {
        return Err(CliError::Usage(
            "--engines: need at least one engine identifier".into(),
        ));
    }
    let engines: Vec<Box<dyn SearchClient>> = engine_names
        .iter()
        .map(|name| {
            Box::new(FixtureSearchClient::new(*name, args.engines_dir.join(name)))
                as Box<dyn SearchClient>
        })
        .collect();

    let mut manifest = Manifest::new(
        "seed",
        format!(
            "keywords={} engines={}",
            args.keywords,
            engine_names.join(",")
        ),
    );
    if let Some(titles) = &args.titles {
        manifest.input_file("titles", titles)?;
    }
    manifest.input_dir("engines", &args.engines_dir)?;
    if let Some(manual) = &args.manual {
        manifest.input_file("manual", manual)?;
    }

    let report = query_engines(&keywords, &engines);
    log::info!(
        "queried {} keywords across {} engines: {} seeds, {} surface dropped, {} invalid, {} failed queries",
        keywords.len(),
        engines.len(),
        report.seeds.len(),
        report.surface_discarded,
        report.invalid_urls,
        report.failed_queries
    );
    let manual = match &args.manual {
        Some(path) => read_lines(path)?,
        None => Vec::new(),
    };
    let seeds = merge_seeds(report.seeds, &manual);

    let mut out = String::new();
    for seed in &seeds {
        let line = serde_json::to_string(seed).map_err(|e| CliError::Domain(e.to_string()))?;
        out.push_str(&line);
        out.push('\n');
    }
    write_output(&args.out, &out)?;
    log::info!("wrote {} seeds to {}", seeds.len(), args.out.display());
    manifest.append(&args.out, false)
}

// --------------------------------------------------------------- crawl --

pub fn crawl(mut config: Config, args: &CrawlArgs) -> Result<(), CliError> {
    Config::set("workers", &mut config.workers, args.workers);
    Config::set("timeout", &mut config.timeout_secs, args.timeout);
    Config::set("max-attempts", &mut config.max_attempts, args.max_attempts);
    Config::set(
        "transport",
        &mut config.transport,
        parse_flag::<TransportKind>("transport", args.transport.as_deref())?,
    );
    Config::set(
        "proxy-endpoint",
        &mut config.proxy_endpoint,
        args.proxy_endpoint.clone(),
    );
    if let Some(root) = &args.fixture_root {
        if config.fixture_root != *root {
            log::info!(
                "--fixture-root overrides configured {} with {}",
                config.fixture_root.display(),
                root.display()
            );
        }
        config.fixture_root = root.clone();
    }
    Config::set(
        "clock",
        &mut config.clock,
        parse_flag::<ClockKind>("clock", args.clock.as_deref())?,
    );
    if let Ok(endpoint) = std::env::var("MIMIR_PROXY") {
        if config.proxy_endpoint != endpoint {
            log::info!(
                "MIMIR_PROXY overrides proxy endpoint {} with {endpoint}",
                config.proxy_endpoint
            );
        }
        config.proxy_endpoint = endpoint;
    }

    let clock_kind = match (config.clock, config.transport) {
        (ClockKind::Auto, TransportKind::Fixture) => ClockKind::Fixed,
        (ClockKind::Auto, TransportKind::Proxy) => ClockKind::System,
        (explicit, _) => explicit,
    };
    let mut manifest = Manifest::new(
        "crawl",
        format!(
            "workers={} timeout={} max_attempts={} transport={} clock={clock_kind}",
            config.workers, config.timeout_secs, config.max_attempts, config.transport
        ),
    );
    manifest.input_file("seeds", &args.seeds)?;

    let transport: Box<dyn FetchTransport> = match config.transport {
        TransportKind::Fixture => {
            if !config.fixture_root.is_dir() {
                return Err(domain(&config.fixture_root, "fixture root is not a directory"));
            }
            manifest.input_dir("fixtures", &config.fixture_root)?;
            Box::new(FixtureTransport::new(config.fixture_root.clone()))
        }
        TransportKind::Proxy => Box::new(ProxyTransport::new(config.proxy_endpoint.clone())),
    };
    let clock: Box<dyn Clock> = match clock_kind {
        ClockKind::System => Box::new(SystemClock),
        _ => Box::new(FixedClock::new(0, 1)),
    };
    let detector = TrigramDetector::bundled();
    let crawl_config = CrawlConfig {
        workers: config.workers,
        timeout: Duration::from_secs(config.timeout_secs),
        max_attempts: config.max_attempts,
    };

    let result = if args.resume {
        let snapshot = load_snapshot(&args.out).map_err(|e| domain(&args.out, e))?;
        log::info!("resuming from {} records", snapshot.len());
        resume_crawl(snapshot, &*transport, &detector, &crawl_config, &*clock)
    } else {
        let seeds = read_seeds(&args.seeds)?;
        run_crawl(&seeds, &*transport, &detector, &crawl_config, &*clock)
    };

    let records = match result {
        Ok(report) => {
            let records = report.snapshot();
            log::info!(
                "crawl finished: {} fetched, {} unreachable over {} windows",
                report.fetched_hosts().len(),
                records.len() - report.fetched_hosts().len(),
                report.windows.len()
            );
            records
        }
        Err(SchedulerError::TransportFatal { message, snapshot }) => {
            save_snapshot(&snapshot, &args.out).map_err(|e| domain(&args.out, e))?;
            return Err(CliError::Domain(format!(
                "transport failure: {message}; resumable snapshot written to {}",
                args.out.display()
            )));
        }
        Err(e @ SchedulerError::BadConfig(_)) => return Err(CliError::Usage(e.to_string())),
        Err(e) => return Err(CliError::Domain(e.to_string())),
    };
    if let Some(parent) = args.out.parent() {
        if parent != Path::new("") {
            std::fs::create_dir_all(parent).map_err(|e| domain(parent, e))?;
        }
    }
    save_snapshot(&records, &args.out).map_err(|e| domain(&args.out, e))?;
    log::info!("wrote {} records to {}", records.len(), args.out.display());
    manifest.append(&args.out, false)
}

// --------------------------------------------------------------- dedup --

pub fn dedup(mut config: Config, args: &DedupArgs) -> Result<(), CliError> {
    apply_mirror_flags(&mut config, args.weights.as_deref(), args.threshold)?;
    let weights = config.mirror.weights()?;

    let mut manifest = Manifest::new(
        "dedup",
        format!(
            "scheme_weight={} content_weight={} threshold={}",
            weights.scheme_weight, weights.content_weight, weights.threshold
        ),
    );
    manifest.input_file("snapshot", &args.snapshot)?;

    let records = load_snapshot(&args.snapshot).map_err(|e| domain(&args.snapshot, e))?;
    let pages = mirror_pages(&records);
    let total = pages.len();
    let clusters =
        cluster_mirrors(pages, &weights).map_err(|e| CliError::Domain(e.to_string()))?;
    let uniques = clusters.clusters.len();
    log::info!(
        "{total} pages -> {uniques} uniques ({:.1}% mirrors)",
        if total == 0 {
            0.0
        } else {
            100.0 * (total - uniques) as f64 / total as f64
        }
    );

    let mut out = String::from("host,representative\n");
    for (host, representative) in clusters.representative_of() {
        let _ = writeln!(out, "{host},{representative}");
    }
    write_output(&args.out, &out)?;
    manifest.append(&args.out, false)
}

// --------------------------------------------------------------- graph --

fn read_clusters_csv(path: &Path) -> Result<MirrorClusters, CliError> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (number, line) in read_lines(path)?.iter().enumerate().skip(1) {
        let Some((host, representative)) = line.split_once(',') else {
            return Err(domain(path, format!("line {}: expected host,representative", number + 1)));
        };
        let members = groups.entry(representative.to_string()).or_default();
        if host != representative {
            members.push(host.to_string());
        }
    }
    Ok(MirrorClusters {
        clusters: groups
            .into_iter()
            .map(|(representative, mirrors)| MirrorCluster {
                representative,
                mirrors,
            })
            .collect(),
    })
}

/// host → category rows from `classify-predict` output.
fn read_predictions_csv(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for line in read_lines(path)?.iter().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(domain(path, "expected host,category,...".to_string()));
        }
        map.insert(fields[0].to_string(), fields[1].to_string());
    }
    Ok(map)
}

pub fn graph(config: Config, args: &GraphArgs) -> Result<(), CliError> {
    let _ = &config;
    let mut manifest = Manifest::new("graph", String::new());
    manifest.input_file("snapshot", &args.snapshot)?;
    for (name, path) in [
        ("clusters", &args.clusters),
        ("seeds", &args.seeds),
        ("categories", &args.categories),
    ] {
        if let Some(path) = path {
            manifest.input_file(name, path)?;
        }
    }

    let records = load_snapshot(&args.snapshot).map_err(|e| domain(&args.snapshot, e))?;
    let clusters = match &args.clusters {
        Some(path) => read_clusters_csv(path)?,
        None => MirrorClusters {
            clusters: records
                .iter()
                .map(|r| MirrorCluster {
                    representative: r.host().to_string(),
                    mirrors: Vec::new(),
                })
                .collect(),
        },
    };
    let mut graph = build_graph(&records, &clusters);
    if let Some(path) = &args.categories {
        for (host, category) in read_predictions_csv(path)? {
            graph.set_category(&host, &category);
        }
    }

    std::fs::create_dir_all(&args.out).map_err(|e| domain(&args.out, e))?;
    write_output(&args.out.join("nodes.csv"), &graph.export_nodes_csv())?;
    write_output(&args.out.join("edges.txt"), &graph.export_edges())?;

    let report = weakly_connected_components(&graph);
    let mut components = String::from("nodes,edges,surface_linked,first_host\n");
    for component in &report.components {
        let _ = writeln!(
            components,
            "{},{},{},{}",
            component.node_count(),
            component.edge_count,
            component.surface_linked,
            component.hosts.first().map(String::as_str).unwrap_or("")
        );
    }
    write_output(&args.out.join("components.csv"), &components)?;
    log::info!(
        "{} nodes, {} edges, {} components ({} isolated), {} surface-linked",
        report.total_nodes,
        report.total_edges,
        report.components.len(),
        report.order_one,
        report.total_surface_linked
    );

    if let Some(path) = &args.seeds {
        let seeds = read_seeds(path)?;
        let keywords: Vec<String> = seeds
            .iter()
            .flat_map(|s| s.provenance.iter().cloned())
            .filter(|tag| tag != MANUAL_TAG)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if keywords.is_empty() {
            log::info!("seeds carry no keyword provenance; skipping the ablation report");
        } else {
            let ablation = ablation_report(&graph, &seeds, &keywords)
                .map_err(|e| CliError::Domain(e.to_string()))?;
            write_output(&args.out.join("ablation.csv"), &ablation.to_csv())?;
            log::info!(
                "ablation: manual baseline {} nodes, all keywords add {} ({:.2}%)",
                ablation.mss_size,
                ablation.aks_novel,
                ablation.aks_contribution_pct
            );
        }
    }
    manifest.append(&args.out, true)
}

// ------------------------------------------------------ classify-train --

#[derive(Deserialize)]
struct LabeledDoc {
    text: String,
    label: String,
}

pub fn classify_train(mut config: Config, args: &ClassifyTrainArgs) -> Result<(), CliError> {
    let c = &mut config.classifier;
    Config::set("cap", &mut c.cap, args.cap);
    Config::set("folds", &mut c.folds, args.folds);
    Config::set("seed", &mut c.seed, args.seed);
    Config::set("penalty", &mut c.penalty, args.penalty.clone());
    Config::set("c", &mut c.c, args.c);
    Config::set("strategy", &mut c.strategy, args.strategy.clone());
    Config::set("grid-search", &mut c.grid_search, args.grid_search);
    Config::set("max-iters", &mut c.max_iters, args.max_iters);
    Config::set("beta", &mut c.beta, args.beta);

    let text = std::fs::read_to_string(&args.data).map_err(|e| domain(&args.data, e))?;
    let mut docs = Vec::new();
    let mut raw_labels = Vec::new();
    for (number, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: LabeledDoc = serde_json::from_str(line)
            .map_err(|e| domain(&args.data, format!("line {}: {e}", number + 1)))?;
        docs.push(preprocess(&doc.text));
        raw_labels.push(doc.label);
    }

    let classes: Vec<String> = match &args.classes {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => raw_labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    if let Some(bad) = classes
        .iter()
        .find(|c| c.is_empty() || c.contains(['"', '\n']))
    {
        return Err(CliError::Usage(format!(
            "--classes: unusable class name {bad:?}"
        )));
    }
    log::info!("classes: {}", classes.join(", "));
    let index_of: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|label| {
            index_of.get(label.as_str()).copied().ok_or_else(|| {
                CliError::Domain(format!("label {label:?} is not in the class list"))
            })
        })
        .collect::<Result<_, _>>()?;

    let classifier_config = config.classifier.classifier_config(classes)?;
    let mut manifest = Manifest::new(
        "classify-train",
        format!(
            "cap={} folds={} seed={} penalty={} c={} strategy={} grid_search={} max_iters={} beta={} classes={}",
            classifier_config.cap,
            classifier_config.folds,
            classifier_config.seed,
            config.classifier.penalty,
            classifier_config.c,
            classifier_config.strategy,
            classifier_config.grid_search,
            classifier_config.max_iters,
            classifier_config.beta,
            classifier_config.classes.join(",")
        ),
    );
    manifest.input_file("data", &args.data)?;

    let model = mimir_core::classify::train(&classifier_config, &docs, &labels)
        .map_err(|e| CliError::Domain(e.to_string()))?;
    if let Some(parent) = args.out.parent() {
        if parent != Path::new("") {
            std::fs::create_dir_all(parent).map_err(|e| domain(parent, e))?;
        }
    }
    model.save(&args.out).map_err(|e| domain(&args.out, e))?;
    print!("{}", report_csv(&model.report));
    log::info!("wrote model to {}", args.out.display());
    manifest.append(&args.out, false)
}

// ---------------------------------------------------- classify-predict --

pub fn classify_predict(config: Config, args: &ClassifyPredictArgs) -> Result<(), CliError> {
    let _ = &config;
    let mut manifest = Manifest::new("classify-predict", String::new());
    manifest.input_file("model", &args.model)?;
    manifest.input_file("snapshot", &args.snapshot)?;

    let model = LRModel::load(&args.model).map_err(|e| domain(&args.model, e))?;
    let records = load_snapshot(&args.snapshot).map_err(|e| domain(&args.snapshot, e))?;
    let mut out = String::from("host,category,probability,reliability\n");
    let mut rows = 0usize;
    for record in content_pages(&records) {
        let prediction = model.predict_text(&extract_text(&record.html));
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6}",
            record.host(),
            prediction.label,
            prediction.probabilities[prediction.class_index],
            prediction.reliability.0
        );
        rows += 1;
    }
    write_output(&args.out, &out)?;
    log::info!("classified {rows} pages into {}", args.out.display());
    manifest.append(&args.out, false)
}

// -------------------------------------------------------------- detect --

pub fn detect(config: Config, args: &DetectArgs) -> Result<(), CliError> {
    let _ = &config;
    if args.category.is_some() && args.predictions.is_none() {
        return Err(CliError::Usage(
            "--category requires --predictions to know each page's class".into(),
        ));
    }
    let mut manifest = Manifest::new(
        "detect",
        format!("category={}", args.category.as_deref().unwrap_or("-")),
    );
    manifest.input_file("lexicon", &args.lexicon)?;
    manifest.input_file("snapshot", &args.snapshot)?;
    if let Some(path) = &args.predictions {
        manifest.input_file("predictions", path)?;
    }

    let lexicon = Lexicon::load(&args.lexicon).map_err(|e| domain(&args.lexicon, e))?;
    let records = load_snapshot(&args.snapshot).map_err(|e| domain(&args.snapshot, e))?;
    let category_of: BTreeMap<String, String> = match &args.predictions {
        Some(path) => read_predictions_csv(path)?,
        None => BTreeMap::new(),
    };

    let mut out = String::from("host,verdict,rule\n");
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for record in content_pages(&records) {
        if let Some(category) = &args.category {
            if category_of.get(record.host()) != Some(category) {
                continue;
            }
        }
        let site = classify_site(&extract_text(&record.html), &lexicon);
        let verdict = match site.verdict {
            Verdict::Allows => "allows",
            Verdict::Forbids => "forbids",
            Verdict::NoSignal => "no_signal",
        };
        *counts.entry(verdict).or_default() += 1;
        let rule = site
            .matched_sentences
            .iter()
            .find_map(|(_, rule)| *rule)
            .unwrap_or("");
        let _ = writeln!(out, "{},{verdict},{rule}", record.host());
    }
    write_output(&args.out, &out)?;
    for (verdict, count) in &counts {
        log::info!("{verdict}: {count}");
    }
    manifest.append(&args.out, false)
}

// ---------------------------------------------------------- bench-hash --

/// host → cluster id out of a ground-truth labels CSV.
fn read_labels_csv(path: &Path) -> Result<BTreeMap<String, usize>, CliError> {
    let mut map = BTreeMap::new();
    for (number, line) in read_lines(path)?.iter().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(domain(path, format!("line {}: expected host,cluster_id,...", number + 1)));
        }
        let cluster: usize = fields[1]
            .parse()
            .map_err(|e| domain(path, format!("line {}: {e}", number + 1)))?;
        map.insert(fields[0].to_string(), cluster);
    }
    Ok(map)
}

pub fn bench_hash(mut config: Config, args: &BenchHashArgs) -> Result<(), CliError> {
    apply_mirror_flags(&mut config, args.weights.as_deref(), args.threshold)?;
    Config::set("seed", &mut config.rng_seed, args.seed);
    let weights = config.mirror.weights()?;

    let mut manifest = Manifest::new(
        "bench-hash",
        format!(
            "seed={} max_pairs={} scheme_weight={} content_weight={} threshold={}",
            config.rng_seed,
            args.max_pairs,
            weights.scheme_weight,
            weights.content_weight,
            weights.threshold
        ),
    );
    manifest.input_file("snapshot", &args.snapshot)?;
    manifest.input_file("pairs", &args.pairs)?;

    let records = load_snapshot(&args.snapshot).map_err(|e| domain(&args.snapshot, e))?;
    let pages = mirror_pages(&records);
    let labels = read_labels_csv(&args.pairs)?;
    let cluster_ids: Vec<usize> = pages
        .iter()
        .map(|page| {
            labels.get(&page.host).copied().ok_or_else(|| {
                CliError::Domain(format!("{} has no row in {}", page.host, args.pairs.display()))
            })
        })
        .collect::<Result<_, _>>()?;

    let mut positives: Vec<(usize, usize)> = Vec::new();
    for i in 0..pages.len() {
        for j in (i + 1)..pages.len() {
            if cluster_ids[i] == cluster_ids[j] {
                positives.push((i, j));
            }
        }
    }
    if args.max_pairs > 0 {
        positives.truncate(args.max_pairs);
    }
    if positives.is_empty() {
        return Err(CliError::Domain("no positive pairs in the corpus".into()));
    }
    let distinct: BTreeSet<usize> = cluster_ids.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(CliError::Domain(
            "all pages share one cluster; no negative pairs to sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut negatives: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut budget = positives.len() * 1000;
    while negatives.len() < positives.len() && budget > 0 {
        budget -= 1;
        let a = rng.gen_range(0..pages.len());
        let b = rng.gen_range(0..pages.len());
        if a != b && cluster_ids[a] != cluster_ids[b] {
            negatives.insert((a.min(b), a.max(b)));
        }
    }
    if negatives.len() < positives.len() {
        return Err(CliError::Domain(format!(
            "could only sample {} of {} negative pairs",
            negatives.len(),
            positives.len()
        )));
    }
    let mut pairs = positives.clone();
    pairs.extend(&negatives);

    let report = bench_dedup(&pages, &cluster_ids, &pairs, &weights)
        .map_err(|e| CliError::Domain(e.to_string()))?;
    for method in [METHOD_MIMIR, METHOD_SIMHASH, METHOD_MINHASH] {
        if let Some(row) = report.row(method) {
            log::info!(
                "{method}: F1 {:.2} (tp {} fp {} fn {}), {} repetitions",
                row.f1,
                row.tp,
                row.fp,
                row.fn_count,
                row.repetitions
            );
        }
    }
    write_output(&args.out, &report.to_csv())?;
    if args.sweep {
        print!("{}", report.sweep_to_csv());
    }
    manifest.append(&args.out, false)
}

// ------------------------------------------------------------ synthgen --

pub fn synthgen(config: Config, args: &SynthgenArgs) -> Result<(), CliError> {
    if let Some(spec) = &args.spec {
        if spec != "default" {
            return Err(CliError::Usage(format!(
                "--spec: only the built-in \"default\" spec exists, got {spec:?}"
            )));
        }
    }
    let mut spec = SynthSpec {
        rng_seed: config.rng_seed,
        ..SynthSpec::default()
    };
    Config::set("n-uniques", &mut spec.n_uniques, args.n_uniques);
    Config::set("fanout", &mut spec.fanout_mean, args.fanout);
    if let Some(topology) = &args.topology {
        spec.topology = Topology::from_str(topology)
            .map_err(|e| CliError::Usage(format!("--topology: {e}")))?;
    }
    Config::set("magnitude", &mut spec.magnitude, args.magnitude);
    Config::set("flaky", &mut spec.flaky_fraction, args.flaky);
    Config::set("dead", &mut spec.dead_fraction, args.dead);
    Config::set("seed", &mut spec.rng_seed, args.seed);

    let manifest = Manifest::new(
        "synthgen",
        format!(
            "n_uniques={} fanout={} topology={} magnitude={} flaky={} dead={} seed={} mix=default",
            spec.n_uniques,
            spec.fanout_mean,
            spec.topology,
            spec.magnitude,
            spec.flaky_fraction,
            spec.dead_fraction,
            spec.rng_seed
        ),
    );

    let corpus = generate(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    std::fs::create_dir_all(&args.out).map_err(|e| domain(&args.out, e))?;
    corpus
        .write_fixtures(&args.out)
        .map_err(|e| domain(&args.out, e))?;
    let uniques = corpus
        .pages
        .iter()
        .filter(|p| p.mutations.is_empty())
        .count();
    log::info!(
        "generated {} pages ({} uniques, {:.1}% mirrors), {} seeds, into {}",
        corpus.pages.len(),
        uniques,
        100.0 * (corpus.pages.len() - uniques) as f64 / corpus.pages.len().max(1) as f64,
        corpus.seeds.len(),
        args.out.display()
    );
    manifest.append(&args.out, true)
}
