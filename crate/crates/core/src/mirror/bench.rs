//! Deduplication benchmark harness: evaluates the hybrid workflow against
//! the SimHash and MinHash baselines over a labeled pair set, counts
//! repetitions (pages matched to more than one cluster representative) and
//! sweeps the decision threshold from 0 to 1.

use super::baselines::{
    minhash, minhash_sim, simhash, simhash_sim, MinHashSignature, MINHASH_THRESHOLD,
    SIMHASH_THRESHOLD,
};
use super::{verdict, MirrorError, MirrorPage, MirrorWeights, PreparedPage};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no labeled pairs to evaluate")]
    EmptyBenchmark,
    #[error("bad benchmark input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Mirror(#[from] MirrorError),
}

pub const METHOD_MIMIR: &str = "Mimir";
pub const METHOD_SIMHASH: &str = "SimHash";
pub const METHOD_MINHASH: &str = "MinHash";

/// One row of the benchmark table.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: &'static str,
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub repetitions: usize,
}

/// One threshold step of the calibration sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: &'static str,
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<MethodRow>,
    pub sweep: Vec<SweepRow>,
}

impl BenchReport {
    pub fn row(&self, method: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Main table, column order as published.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Method,TP,FP,FN,Precision,Recall,F1,Repetitions\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{:.2},{:.2},{:.2},{}",
                r.method, r.tp, r.fp, r.fn_count, r.precision, r.recall, r.f1, r.repetitions
            )
            .expect("string write");
        }
        out
    }

    pub fn sweep_to_csv(&self) -> String {
        let mut out = String::from("Method,Threshold,TP,FP,FN,Precision,Recall,F1\n");
        for r in &self.sweep {
            writeln!(
                out,
                "{},{:.1},{},{},{},{:.2},{:.2},{:.2}",
                r.method, r.threshold, r.tp, r.fp, r.fn_count, r.precision, r.recall, r.f1
            )
            .expect("string write");
        }
        out
    }
}

fn prf(tp: usize, fp: usize, fn_count: usize) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_count == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_count) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

struct Decisions<'a> {
    prepared: &'a [PreparedPage],
    simhashes: Vec<u64>,
    minhashes: Vec<MinHashSignature>,
    weights: MirrorWeights,
}

impl Decisions<'_> {
    fn matches(&self, method: &str, i: usize, j: usize, threshold: f64) -> Result<bool, BenchError> {
        Ok(match method {
            METHOD_MIMIR => {
                let w = MirrorWeights {
                    threshold,
                    ..self.weights
                };
                verdict(&self.prepared[i], &self.prepared[j], &w)?.is_mirror()
            }
            METHOD_SIMHASH => simhash_sim(self.simhashes[i], self.simhashes[j]) >= threshold,
            METHOD_MINHASH => {
                minhash_sim(&self.minhashes[i], &self.minhashes[j]) >= threshold
            }
            other => return Err(BenchError::BadInput(format!("unknown method {other}"))),
        })
    }

    fn default_threshold(&self, method: &str) -> f64 {
        match method {
            METHOD_MIMIR => self.weights.threshold,
            METHOD_SIMHASH => SIMHASH_THRESHOLD,
            _ => MINHASH_THRESHOLD,
        }
    }
}

const METHODS: [&str; 3] = [METHOD_MIMIR, METHOD_SIMHASH, METHOD_MINHASH];

/// Evaluate all three methods over `pairs` (ground truth: two pages mirror
/// each other iff their cluster ids are equal) and count repetitions
/// against the earliest-crawled representative of each true cluster.
pub fn bench_dedup(
    pages: &[MirrorPage],
    cluster_ids: &[usize],
    pairs: &[(usize, usize)],
    weights: &MirrorWeights,
) -> Result<BenchReport, BenchError> {
    if pairs.is_empty() {
        return Err(BenchError::EmptyBenchmark);
    }
    if pages.len() != cluster_ids.len() {
        return Err(BenchError::BadInput(format!(
            "{} pages but {} cluster labels",
            pages.len(),
            cluster_ids.len()
        )));
    }
    if let Some(&(a, b)) = pairs.iter().find(|(a, b)| *a >= pages.len() || *b >= pages.len()) {
        return Err(BenchError::BadInput(format!("pair ({a}, {b}) out of range")));
    }

    let prepared: Vec<PreparedPage> = pages.iter().cloned().map(PreparedPage::new).collect();
    let decisions = Decisions {
        simhashes: prepared.iter().map(|p| simhash(&p.page.text)).collect(),
        minhashes: prepared.iter().map(|p| minhash(&p.page.text)).collect(),
        prepared: &prepared,
        weights: *weights,
    };

    // earliest-crawled page of each true cluster represents it
    let mut reps: BTreeMap<usize, usize> = BTreeMap::new();
    for (idx, &cluster) in cluster_ids.iter().enumerate() {
        let entry = reps.entry(cluster).or_insert(idx);
        let (cur, cand) = (&prepared[*entry].page, &prepared[idx].page);
        if (cand.first_seen, &cand.host) < (cur.first_seen, &cur.host) {
            *entry = idx;
        }
    }
    let rep_indices: Vec<usize> = reps.values().copied().collect();

    let mut rows = Vec::new();
    let mut sweep = Vec::new();
    for method in METHODS {
        let threshold = decisions.default_threshold(method);
        let (mut tp, mut fp, mut fn_count) = (0usize, 0usize, 0usize);
        for &(a, b) in pairs {
            let truth = cluster_ids[a] == cluster_ids[b];
            let predicted = decisions.matches(method, a, b, threshold)?;
            match (predicted, truth) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_count += 1,
                (false, false) => {}
            }
        }
        let mut repetitions = 0usize;
        for idx in 0..prepared.len() {
            let mut matched = 0usize;
            for &rep in &rep_indices {
                if rep != idx && decisions.matches(method, idx, rep, threshold)? {
                    matched += 1;
                }
            }
            repetitions += matched.saturating_sub(1);
        }
        let (precision, recall, f1) = prf(tp, fp, fn_count);
        rows.push(MethodRow {
            method,
            tp,
            fp,
            fn_count,
            precision,
            recall,
            f1,
            repetitions,
        });

        for step in 0..=10 {
            let t = f64::from(step) / 10.0;
            let (mut tp, mut fp, mut fn_count) = (0usize, 0usize, 0usize);
            for &(a, b) in pairs {
                let truth = cluster_ids[a] == cluster_ids[b];
                let predicted = decisions.matches(method, a, b, t)?;
                match (predicted, truth) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_count += 1,
                    (false, false) => {}
                }
            }
            let (precision, recall, f1) = prf(tp, fp, fn_count);
            sweep.push(SweepRow {
                method,
                threshold: t,
                tp,
                fp,
                fn_count,
                precision,
                recall,
                f1,
            });
        }
    }
    Ok(BenchReport { rows, sweep })
}
