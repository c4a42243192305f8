//! Mirror-collapsed page graph: one node per unique page (cluster
//! representative), directed edges for cross-onion links, weakly
//! connected component statistics, and the seed-contribution ablation
//! algebra (KS/MSS/SD/AKS) built on top of seed provenance tags.

use crate::corpus::{normalize_url, CrawlStatus, CrawlTimestamp, LinkClass, OnionAddress, PageRecord};
use crate::mirror::MirrorClusters;
use crate::seeder::{Seed, MANUAL_TAG};
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("no seed carries provenance tag {0:?}")]
    UnknownTag(String),
}

/// Per-page node features. Mirrors are folded into their cluster
/// representative and listed here instead of becoming nodes themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct PageNode {
    pub host: String,
    pub title: String,
    pub language: Option<String>,
    /// Whether the page links to (or is itself on) the surface web.
    pub surface: bool,
    /// Minimum link distance from any seed; `None` for link targets that
    /// were never crawled.
    pub depth: Option<u32>,
    pub timestamps: Vec<CrawlTimestamp>,
    /// Filled in by the classifier after construction.
    pub category: Option<String>,
    pub has_mirror: bool,
    pub mirrors: Vec<OnionAddress>,
    /// Never fetched: a dangling link target or a page that exhausted its
    /// fetch attempts.
    pub unreachable: bool,
}

/// Directed graph over representative hosts. Parallel edges are collapsed
/// and self-loops (including those created by mirror folding) dropped.
#[derive(Debug, Default, Clone)]
pub struct PageGraph {
    nodes: BTreeMap<String, PageNode>,
    edges: BTreeSet<(String, String)>,
    /// Any known host (representative or mirror member) → representative.
    aliases: BTreeMap<String, String>,
}

impl PageGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &PageNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(s, d)| (s.as_str(), d.as_str()))
    }

    /// Representative host for `host`, if the graph knows it at all.
    pub fn representative(&self, host: &str) -> Option<&str> {
        if let Some(rep) = self.aliases.get(host) {
            return Some(rep);
        }
        self.nodes.get(host).map(|n| n.host.as_str())
    }

    /// Node lookup; mirror-member hosts resolve to their representative.
    pub fn node(&self, host: &str) -> Option<&PageNode> {
        let rep = self.representative(host)?;
        self.nodes.get(rep)
    }

    /// Attach a classifier category; returns false when the host is
    /// unknown.
    pub fn set_category(&mut self, host: &str, category: &str) -> bool {
        let Some(rep) = self.representative(host).map(str::to_string) else {
            return false;
        };
        match self.nodes.get_mut(&rep) {
            Some(node) => {
                node.category = Some(category.to_string());
                true
            }
            None => false,
        }
    }

    fn adjacency(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (src, dst) in &self.edges {
            adj.entry(src.as_str()).or_default().push(dst.as_str());
        }
        adj
    }

    /// Directed reachability from `starts` (hosts outside the graph are
    /// ignored). The start nodes themselves are included.
    pub fn reachable(&self, starts: &[&str]) -> BTreeSet<String> {
        let adj = self.adjacency();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut queue: VecDeque<&str> = VecDeque::new();
        for start in starts {
            if let Some(rep) = self.representative(start) {
                if seen.insert(rep) {
                    queue.push_back(rep);
                }
            }
        }
        while let Some(host) = queue.pop_front() {
            for &next in adj.get(host).into_iter().flatten() {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        seen.into_iter().map(str::to_string).collect()
    }

    /// Edge list as "src<TAB>dst" lines, sorted.
    pub fn export_edges(&self) -> String {
        let mut out = String::new();
        for (src, dst) in &self.edges {
            out.push_str(src);
            out.push('\t');
            out.push_str(dst);
            out.push('\n');
        }
        out
    }

    /// Node attributes as CSV, one row per representative host.
    pub fn export_nodes_csv(&self) -> String {
        let mut out = String::from(
            "Host,Title,Language,Surface,Depth,Timestamp,Category,Has_Mirror,Mirrors\n",
        );
        for node in self.nodes.values() {
            let timestamps = node
                .timestamps
                .iter()
                .map(CrawlTimestamp::to_string)
                .collect::<Vec<_>>()
                .join(";");
            let mirrors = node
                .mirrors
                .iter()
                .map(|m| m.host.clone())
                .collect::<Vec<_>>()
                .join(";");
            let row = [
                csv_escape(&node.host),
                csv_escape(&node.title),
                csv_escape(node.language.as_deref().unwrap_or("")),
                node.surface.to_string(),
                node.depth.map(|d| d.to_string()).unwrap_or_default(),
                csv_escape(&timestamps),
                csv_escape(node.category.as_deref().unwrap_or("")),
                node.has_mirror.to_string(),
                csv_escape(&mirrors),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Builds the mirror-collapsed graph. Every record maps to its cluster
/// representative; an edge u→v is added for each external onion link from
/// any member of u's cluster to any member of v's. Link targets that were
/// never crawled are kept as explicit unreachable nodes so they show up
/// as order-1 components rather than vanishing.
pub fn build_graph(records: &[PageRecord], clusters: &MirrorClusters) -> PageGraph {
    let rep_of: BTreeMap<&str, &str> = clusters.representative_of();
    let resolve = |host: &str| -> String {
        rep_of.get(host).map_or(host, |r| *r).to_string()
    };

    let by_host: BTreeMap<&str, &PageRecord> =
        records.iter().map(|r| (r.host(), r)).collect();
    let mut groups: BTreeMap<String, Vec<&PageRecord>> = BTreeMap::new();
    for record in records {
        groups.entry(resolve(record.host())).or_default().push(record);
    }

    let mut graph = PageGraph::default();
    for (rep, members) in &groups {
        // features come from the representative's own record when it
        // exists, else from the earliest member (mirrors share content)
        let lead = by_host.get(rep.as_str()).copied().unwrap_or_else(|| {
            log::warn!("cluster representative {rep} has no crawl record");
            members[0]
        });
        let mut mirrors: Vec<OnionAddress> = Vec::new();
        for member in members {
            if member.host() == rep {
                continue;
            }
            graph.aliases.insert(member.host().to_string(), rep.clone());
            match member.url.onion() {
                Some(addr) => mirrors.push(addr.clone()),
                None => log::warn!("surface mirror member {} dropped", member.host()),
            }
        }
        let surface = !lead.url.is_onion()
            || members.iter().any(|m| {
                m.link_list.iter().any(|(_, class)| *class == LinkClass::Surface)
            });
        graph.nodes.insert(
            rep.clone(),
            PageNode {
                host: rep.clone(),
                title: lead.metadata.get("title").cloned().unwrap_or_default(),
                language: lead.languages.first().cloned(),
                surface,
                depth: members.iter().map(|m| m.depth).min(),
                timestamps: lead.timestamps.clone(),
                category: None,
                has_mirror: !mirrors.is_empty(),
                mirrors,
                unreachable: lead.status == CrawlStatus::Unreachable,
            },
        );
    }

    for record in records {
        let src = resolve(record.host());
        for (raw, class) in &record.link_list {
            if *class != LinkClass::ExternalOnion {
                continue;
            }
            let Ok(url) = normalize_url(raw) else {
                log::warn!("unparseable link {raw:?} in {src}");
                continue;
            };
            let dst = resolve(url.host());
            if dst == src {
                continue;
            }
            if !graph.nodes.contains_key(&dst) {
                log::warn!("dangling link target {dst} (never crawled)");
                graph.nodes.insert(
                    dst.clone(),
                    PageNode {
                        host: dst.clone(),
                        title: String::new(),
                        language: None,
                        surface: false,
                        depth: None,
                        timestamps: Vec::new(),
                        category: None,
                        has_mirror: false,
                        mirrors: Vec::new(),
                        unreachable: true,
                    },
                );
            }
            graph.edges.insert((src.clone(), dst));
        }
    }
    graph
}

/// Size-balanced union-find with path halving.
struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// One weakly connected component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentStats {
    /// Member hosts, sorted.
    pub hosts: Vec<String>,
    pub edge_count: usize,
    /// Members flagged as surface-connected.
    pub surface_linked: usize,
}

impl ComponentStats {
    pub fn node_count(&self) -> usize {
        self.hosts.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgraphReport {
    /// Sorted by node count descending (then first host for determinism).
    pub components: Vec<ComponentStats>,
    pub total_nodes: usize,
    pub total_edges: usize,
    pub total_surface_linked: usize,
    /// Isolated nodes — typically seeds that never answered.
    pub order_one: usize,
}

/// Partitions the graph into weakly connected components (edge direction
/// ignored).
pub fn weakly_connected_components(graph: &PageGraph) -> SubgraphReport {
    let hosts: Vec<&str> = graph.nodes.keys().map(String::as_str).collect();
    let index: BTreeMap<&str, usize> =
        hosts.iter().enumerate().map(|(i, h)| (*h, i)).collect();
    let mut uf = UnionFind::new(hosts.len());
    for (src, dst) in &graph.edges {
        uf.union(index[src.as_str()], index[dst.as_str()]);
    }

    let mut members: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (i, host) in hosts.iter().enumerate() {
        members.entry(uf.find(i)).or_default().push(host);
    }
    let mut edge_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for (src, _) in &graph.edges {
        *edge_counts.entry(uf.find(index[src.as_str()])).or_default() += 1;
    }

    let mut components: Vec<ComponentStats> = members
        .into_iter()
        .map(|(root, hosts)| ComponentStats {
            surface_linked: hosts
                .iter()
                .filter(|h| graph.nodes[**h].surface)
                .count(),
            hosts: hosts.into_iter().map(str::to_string).collect(),
            edge_count: edge_counts.get(&root).copied().unwrap_or(0),
        })
        .collect();
    components.sort_by(|a, b| {
        b.node_count()
            .cmp(&a.node_count())
            .then_with(|| a.hosts.cmp(&b.hosts))
    });

    let report = SubgraphReport {
        order_one: components.iter().filter(|c| c.node_count() == 1).count(),
        total_nodes: components.iter().map(ComponentStats::node_count).sum(),
        total_edges: components.iter().map(|c| c.edge_count).sum(),
        total_surface_linked: components.iter().map(|c| c.surface_linked).sum(),
        components,
    };
    debug_assert_eq!(report.total_nodes, graph.node_count());
    debug_assert_eq!(report.total_edges, graph.edge_count());
    report
}

/// KS_tag: every node reachable (directed) from the seeds carrying `tag`.
pub fn tagged_reachability(
    graph: &PageGraph,
    seeds: &[Seed],
    tag: &str,
) -> Result<BTreeSet<String>, GraphError> {
    let starts: Vec<&str> = seeds
        .iter()
        .filter(|s| s.provenance.contains(tag))
        .map(|s| s.url.host())
        .collect();
    if starts.is_empty() {
        return Err(GraphError::UnknownTag(tag.to_string()));
    }
    Ok(graph.reachable(&starts))
}

fn manual_baseline(graph: &PageGraph, seeds: &[Seed]) -> BTreeSet<String> {
    // no manual seeds at all means an empty baseline, not an error
    tagged_reachability(graph, seeds, MANUAL_TAG).unwrap_or_default()
}

/// SD = KS_tag − MSS: the nodes only the tagged seeds discover, with
/// everything the manual baseline already reaches removed.
pub fn seed_ablation(
    graph: &PageGraph,
    seeds: &[Seed],
    tag: &str,
) -> Result<BTreeSet<String>, GraphError> {
    let ks = tagged_reachability(graph, seeds, tag)?;
    let mss = manual_baseline(graph, seeds);
    Ok(&ks - &mss)
}

/// One keyword column of the contribution table.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub keyword: String,
    /// |SD|: nodes only this keyword contributes over the manual baseline.
    pub novel: usize,
    /// 100·|SD| / graph nodes. Non-accumulative: keywords overlap.
    pub contribution_pct: f64,
    /// Same percentage split by node category (uncategorized nodes are
    /// counted in the total only).
    pub by_category: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub mss_size: usize,
    /// |AKS − MSS| for AKS = reachability from all keyword seeds at once.
    pub aks_novel: usize,
    pub aks_contribution_pct: f64,
    /// Relative coverage growth over the manual baseline, in percent;
    /// `None` when there is no manual baseline to compare against.
    pub increase_pct: Option<f64>,
}

impl AblationReport {
    /// Categories observed across all keyword columns, sorted.
    fn categories(&self) -> Vec<&str> {
        let mut all: BTreeSet<&str> = BTreeSet::new();
        for row in &self.rows {
            all.extend(row.by_category.keys().map(String::as_str));
        }
        all.into_iter().collect()
    }

    /// Table shape: one row per category, one column per keyword, a TCC
    /// row-total column, and a final AKS row of per-keyword totals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Category");
        for row in &self.rows {
            out.push(',');
            out.push_str(&row.keyword);
        }
        out.push_str(",TCC\n");
        for category in self.categories() {
            out.push_str(&csv_escape(category));
            let mut total = 0.0;
            for row in &self.rows {
                let pct = row.by_category.get(category).copied().unwrap_or(0.0);
                total += pct;
                out.push_str(&format!(",{pct:.2}"));
            }
            out.push_str(&format!(",{total:.2}\n"));
        }
        out.push_str("AKS");
        for row in &self.rows {
            out.push_str(&format!(",{:.2}", row.contribution_pct));
        }
        out.push_str(&format!(",{:.2}\n", self.aks_contribution_pct));
        out
    }
}

/// Full ablation study: per-keyword set differences against the manual
/// baseline plus the all-keywords union (AKS).
pub fn ablation_report(
    graph: &PageGraph,
    seeds: &[Seed],
    keywords: &[String],
) -> Result<AblationReport, GraphError> {
    let mss = manual_baseline(graph, seeds);
    let total = graph.node_count().max(1) as f64;
    let pct = |count: usize| 100.0 * count as f64 / total;

    let mut rows = Vec::new();
    for keyword in keywords {
        let sd = seed_ablation(graph, seeds, keyword)?;
        let mut by_category: BTreeMap<String, f64> = BTreeMap::new();
        for host in &sd {
            if let Some(category) = graph.nodes[host].category.as_deref() {
                *by_category.entry(category.to_string()).or_default() += 1.0;
            }
        }
        for count in by_category.values_mut() {
            *count = 100.0 * *count / total;
        }
        rows.push(AblationRow {
            keyword: keyword.clone(),
            novel: sd.len(),
            contribution_pct: pct(sd.len()),
            by_category,
        });
    }

    let union_starts: Vec<&str> = seeds
        .iter()
        .filter(|s| keywords.iter().any(|k| s.provenance.contains(k)))
        .map(|s| s.url.host())
        .collect();
    let aks = graph.reachable(&union_starts);
    let aks_novel = (&aks - &mss).len();
    Ok(AblationReport {
        rows,
        mss_size: mss.len(),
        aks_novel,
        aks_contribution_pct: pct(aks_novel),
        increase_pct: (!mss.is_empty())
            .then(|| 100.0 * aks_novel as f64 / mss.len() as f64),
    })
}
