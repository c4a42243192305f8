//! Content classification: balanced bootstrap sampling, sublinear TF-IDF
//! features and batch-gradient multinomial logistic regression with
//! grid-searched regularization, k-fold cross-validated metrics and a
//! conformal reliability score. A one-vs-one strategy is available as an
//! alternative to the default multinomial softmax.

pub mod balance;
pub mod metrics;
pub mod preprocess;
pub mod tfidf;

pub use balance::bootstrap_balance;
pub use metrics::{evaluate, f_beta_score, EvalMetrics};
pub use preprocess::preprocess;
pub use tfidf::{tfidf_vectorize, vectorize_one, SparseVec, TfidfMode, Vocabulary};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

/// Category labels, in tie-break order.
pub const CLASSES: [&str; 11] = [
    "Counterfeit",
    "Crypto",
    "Drugs",
    "Forum",
    "Hacking",
    "Locked",
    "Down",
    "Market",
    "Porn",
    "Soc.-Network",
    "Hosting",
];

pub const DEFAULT_CAP: usize = 200;
pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_MAX_ITERS: usize = 1000;
/// Regularization strengths searched by the grid.
pub const GRID_C: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

const BASE_STEP: f64 = 0.1;
const GRAD_TOL: f64 = 1e-6;
const DELTA_TOL: f64 = 1e-9;
const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("empty vocabulary: no usable tokens")]
    EmptyVocabulary,
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("bad model file: {0}")]
    BadModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    None,
    L1,
    L2,
    ElasticNet(f64),
}

impl Penalty {
    /// The grid-searched penalties.
    pub fn grid() -> [Penalty; 4] {
        [Penalty::None, Penalty::L1, Penalty::L2, Penalty::ElasticNet(0.5)]
    }

    /// Tie-break order: none < l2 < l1 < elasticnet.
    fn rank(self) -> u8 {
        match self {
            Penalty::None => 0,
            Penalty::L2 => 1,
            Penalty::L1 => 2,
            Penalty::ElasticNet(_) => 3,
        }
    }

    /// Weight of the non-smooth l1 component, handled by soft-thresholding.
    fn l1_mix(self) -> f64 {
        match self {
            Penalty::L1 => 1.0,
            Penalty::ElasticNet(mix) => mix,
            _ => 0.0,
        }
    }

    /// Weight of the smooth l2 component.
    fn l2_mix(self) -> f64 {
        match self {
            Penalty::L2 => 1.0,
            Penalty::ElasticNet(mix) => 1.0 - mix,
            _ => 0.0,
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Penalty::None => write!(f, "none"),
            Penalty::L1 => write!(f, "l1"),
            Penalty::L2 => write!(f, "l2"),
            Penalty::ElasticNet(mix) => write!(f, "elasticnet({mix})"),
        }
    }
}

impl FromStr for Penalty {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Penalty::None),
            "l1" => Ok(Penalty::L1),
            "l2" => Ok(Penalty::L2),
            _ => s
                .strip_prefix("elasticnet(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(|mix| mix.parse::<f64>().ok())
                .filter(|mix| (0.0..=1.0).contains(mix))
                .map(Penalty::ElasticNet)
                .ok_or_else(|| ClassifyError::BadModel(format!("unknown penalty {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Single softmax over all classes.
    #[default]
    Multinomial,
    /// A binary model per class pair; probabilities are vote shares.
    OneVsOne,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Multinomial => write!(f, "multinomial"),
            Strategy::OneVsOne => write!(f, "one_vs_one"),
        }
    }
}

impl FromStr for Strategy {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multinomial" => Ok(Strategy::Multinomial),
            "one_vs_one" => Ok(Strategy::OneVsOne),
            _ => Err(ClassifyError::BadModel(format!("unknown strategy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub penalty: Penalty,
    /// Inverse regularization strength; the penalty is scaled by 1/C.
    pub c: f64,
    pub classes: Vec<String>,
    pub cap: usize,
    pub folds: usize,
    pub beta: f64,
    pub seed: u64,
    pub max_iters: usize,
    pub strategy: Strategy,
    /// When set, `train` searches penalty × C and overrides the two fields
    /// above with the winning point.
    pub grid_search: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            penalty: Penalty::L1,
            c: 1.0,
            classes: CLASSES.iter().map(|s| s.to_string()).collect(),
            cap: DEFAULT_CAP,
            folds: DEFAULT_FOLDS,
            beta: 1.0,
            seed: DEFAULT_SEED,
            max_iters: DEFAULT_MAX_ITERS,
            strategy: Strategy::Multinomial,
            grid_search: true,
        }
    }
}

/// Conformal reliability: `1 − (p₁ − p₂)` over the two largest
/// probabilities; 0 for a one-hot prediction, 1 for a tied top pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityScore(pub f64);

impl ReliabilityScore {
    pub fn from_probabilities(probs: &[f64]) -> Self {
        let (mut p1, mut p2) = (0.0f64, 0.0f64);
        for &p in probs {
            if p > p1 {
                p2 = p1;
                p1 = p;
            } else if p > p2 {
                p2 = p;
            }
        }
        ReliabilityScore(1.0 - (p1 - p2))
    }
}

// ---- softmax machinery ----

fn scores_for(weights: &[Vec<f64>], row: &SparseVec) -> Vec<f64> {
    let bias = weights[0].len() - 1;
    weights
        .iter()
        .map(|wc| wc[bias] + row.iter().map(|&(j, v)| wc[j] * v).sum::<f64>())
        .collect()
}

fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    max + scores.iter().map(|&s| (s - max).exp()).sum::<f64>().ln()
}

/// Full training objective: mean negative log-likelihood plus the penalty
/// term scaled by 1/C (bias column unpenalized).
pub fn softmax_loss(
    rows: &[SparseVec],
    labels: &[usize],
    weights: &[Vec<f64>],
    penalty: Penalty,
    c: f64,
) -> f64 {
    let bias = weights[0].len() - 1;
    let mut loss = 0.0;
    for (row, &y) in rows.iter().zip(labels) {
        let scores = scores_for(weights, row);
        loss += log_sum_exp(&scores) - scores[y];
    }
    loss /= rows.len() as f64;
    let (mut l1, mut l2) = (0.0, 0.0);
    for wc in weights {
        for &w in &wc[..bias] {
            l1 += w.abs();
            l2 += w * w;
        }
    }
    loss + (penalty.l1_mix() * l1 + penalty.l2_mix() * 0.5 * l2) / c
}

/// Gradient of the smooth part of [`softmax_loss`]: data term plus the l2
/// penalty component. The l1 component is non-differentiable and is
/// applied by proximal soft-thresholding inside the optimizer instead.
pub fn softmax_gradient(
    rows: &[SparseVec],
    labels: &[usize],
    weights: &[Vec<f64>],
    penalty: Penalty,
    c: f64,
) -> Vec<Vec<f64>> {
    let n_classes = weights.len();
    let cols = weights[0].len();
    let bias = cols - 1;
    let n = rows.len() as f64;
    let mut grad = vec![vec![0.0; cols]; n_classes];
    for (row, &y) in rows.iter().zip(labels) {
        let mut p = scores_for(weights, row);
        softmax_in_place(&mut p);
        for (class, g) in grad.iter_mut().enumerate() {
            let coeff = (p[class] - f64::from(u8::from(class == y))) / n;
            for &(j, v) in row {
                g[j] += coeff * v;
            }
            g[bias] += coeff;
        }
    }
    let smooth = penalty.l2_mix() / c;
    if smooth != 0.0 {
        for (g, wc) in grad.iter_mut().zip(weights) {
            for (gj, &wj) in g[..bias].iter_mut().zip(&wc[..bias]) {
                *gj += smooth * wj;
            }
        }
    }
    grad
}

fn sup_norm(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |a, &b| a.max(b.abs()))
}

fn soft_threshold(w: f64, t: f64) -> f64 {
    if w > t {
        w - t
    } else if w < -t {
        w + t
    } else {
        0.0
    }
}

struct Fit {
    weights: Vec<Vec<f64>>,
    loss_trace: Vec<f64>,
    grad_norm: f64,
    converged: bool,
}

/// Batch gradient descent, base step 0.1 halved whenever the objective
/// would increase; l1-type penalties applied as a proximal step.
fn fit_softmax(
    rows: &[SparseVec],
    labels: &[usize],
    n_classes: usize,
    dim: usize,
    penalty: Penalty,
    c: f64,
    max_iters: usize,
) -> Fit {
    let cols = dim + 1;
    let l1_scale = penalty.l1_mix() / c;
    let mut weights = vec![vec![0.0; cols]; n_classes];
    let mut obj = softmax_loss(rows, labels, &weights, penalty, c);
    let mut trace = vec![obj];
    let mut converged = false;
    for _ in 0..max_iters {
        let grad = softmax_gradient(rows, labels, &weights, penalty, c);
        if l1_scale == 0.0 && sup_norm(&grad) < GRAD_TOL {
            converged = true;
            break;
        }
        let mut step = BASE_STEP;
        let (cand, cand_obj) = loop {
            let cand: Vec<Vec<f64>> = weights
                .iter()
                .zip(&grad)
                .map(|(wc, gc)| {
                    let mut row: Vec<f64> =
                        wc.iter().zip(gc).map(|(w, g)| w - step * g).collect();
                    if l1_scale > 0.0 {
                        let t = step * l1_scale;
                        for w in &mut row[..dim] {
                            *w = soft_threshold(*w, t);
                        }
                    }
                    row
                })
                .collect();
            let cand_obj = softmax_loss(rows, labels, &cand, penalty, c);
            if cand_obj <= obj || step <= MIN_STEP {
                break (cand, cand_obj);
            }
            step *= 0.5;
        };
        if cand_obj > obj {
            break; // no descent even at the minimum step
        }
        let delta = weights
            .iter()
            .flatten()
            .zip(cand.iter().flatten())
            .fold(0.0f64, |a, (w, n)| a.max((w - n).abs()));
        weights = cand;
        obj = cand_obj;
        trace.push(obj);
        if delta < DELTA_TOL {
            converged = true;
            break;
        }
    }
    let grad_norm = sup_norm(&softmax_gradient(rows, labels, &weights, penalty, c));
    Fit {
        weights,
        loss_trace: trace,
        grad_norm,
        converged,
    }
}

/// One binary model of the one-vs-one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct PairModel {
    pub classes: (usize, usize),
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelWeights {
    Multinomial(Vec<Vec<f64>>),
    OneVsOne(Vec<PairModel>),
}

struct StrategyFit {
    weights: ModelWeights,
    loss_trace: Vec<f64>,
    grad_norm: f64,
    converged: bool,
}

fn fit_strategy(
    strategy: Strategy,
    rows: &[SparseVec],
    labels: &[usize],
    n_classes: usize,
    dim: usize,
    penalty: Penalty,
    c: f64,
    max_iters: usize,
) -> StrategyFit {
    match strategy {
        Strategy::Multinomial => {
            let fit = fit_softmax(rows, labels, n_classes, dim, penalty, c, max_iters);
            StrategyFit {
                weights: ModelWeights::Multinomial(fit.weights),
                loss_trace: fit.loss_trace,
                grad_norm: fit.grad_norm,
                converged: fit.converged,
            }
        }
        Strategy::OneVsOne => {
            let mut pairs = Vec::new();
            let mut converged = true;
            let mut grad_norm = 0.0f64;
            for a in 0..n_classes {
                for b in a + 1..n_classes {
                    let mut sub_rows = Vec::new();
                    let mut sub_labels = Vec::new();
                    for (row, &label) in rows.iter().zip(labels) {
                        if label == a || label == b {
                            sub_rows.push(row.clone());
                            sub_labels.push(usize::from(label == b));
                        }
                    }
                    if sub_rows.is_empty() {
                        pairs.push(PairModel {
                            classes: (a, b),
                            weights: vec![vec![0.0; dim + 1]; 2],
                        });
                        continue;
                    }
                    let fit = fit_softmax(&sub_rows, &sub_labels, 2, dim, penalty, c, max_iters);
                    converged &= fit.converged;
                    grad_norm = grad_norm.max(fit.grad_norm);
                    pairs.push(PairModel {
                        classes: (a, b),
                        weights: fit.weights,
                    });
                }
            }
            StrategyFit {
                weights: ModelWeights::OneVsOne(pairs),
                loss_trace: Vec::new(),
                grad_norm,
                converged,
            }
        }
    }
}

fn probabilities_for(weights: &ModelWeights, n_classes: usize, row: &SparseVec) -> Vec<f64> {
    match weights {
        ModelWeights::Multinomial(w) => {
            let mut scores = scores_for(w, row);
            softmax_in_place(&mut scores);
            scores
        }
        ModelWeights::OneVsOne(pairs) => {
            let mut votes = vec![0.0f64; n_classes];
            for pair in pairs {
                let mut scores = scores_for(&pair.weights, row);
                softmax_in_place(&mut scores);
                let winner = if scores[1] > scores[0] {
                    pair.classes.1
                } else {
                    pair.classes.0
                };
                votes[winner] += 1.0;
            }
            let total: f64 = votes.iter().sum();
            if total > 0.0 {
                for v in &mut votes {
                    *v /= total;
                }
            } else {
                votes.fill(1.0 / n_classes as f64);
            }
            votes
        }
    }
}

fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

// ---- training pipeline ----

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub penalty: Penalty,
    pub c: f64,
    pub f_beta: f64,
}

/// Highest F_beta wins; ties prefer the smaller C, then the penalty order
/// none < l2 < l1 < elasticnet, making selection independent of grid
/// iteration order.
fn pick_best(points: &[GridPoint]) -> (Penalty, f64) {
    let mut best = &points[0];
    for p in &points[1..] {
        let wins = p.f_beta > best.f_beta
            || (p.f_beta == best.f_beta
                && (p.c < best.c
                    || (p.c == best.c && p.penalty.rank() < best.penalty.rank())));
        if wins {
            best = p;
        }
    }
    (best.penalty, best.c)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingReport {
    pub chosen_penalty: Option<Penalty>,
    pub chosen_c: f64,
    pub grid: Vec<GridPoint>,
    pub fold_metrics: Vec<EvalMetrics>,
    /// Metrics averaged fold-by-fold (F_beta averaged directly).
    pub mean_of_folds: EvalMetrics,
    /// Metrics over the pooled out-of-fold predictions.
    pub pooled: EvalMetrics,
    pub final_loss_trace: Vec<f64>,
    /// Stages that stopped at the iteration cap, with final gradient norms.
    pub non_converged: Vec<String>,
    pub seed: u64,
}

pub fn report_csv(report: &TrainingReport) -> String {
    let mut out = String::from("Stage,Detail,Accuracy,Precision,Recall,F_beta\n");
    if let Some(penalty) = report.chosen_penalty {
        writeln!(out, "chosen,{}@{},,,,", penalty, report.chosen_c).expect("string write");
    }
    for g in &report.grid {
        writeln!(out, "grid,{}@{},,,,{:.6}", g.penalty, g.c, g.f_beta).expect("string write");
    }
    for (i, m) in report.fold_metrics.iter().enumerate() {
        writeln!(
            out,
            "fold,{},{:.6},{:.6},{:.6},{:.6}",
            i + 1,
            m.accuracy,
            m.macro_precision,
            m.macro_recall,
            m.f_beta
        )
        .expect("string write");
    }
    for (name, m) in [
        ("per-fold", &report.mean_of_folds),
        ("pooled", &report.pooled),
    ] {
        writeln!(
            out,
            "mean,{name},{:.6},{:.6},{:.6},{:.6}",
            m.accuracy, m.macro_precision, m.macro_recall, m.f_beta
        )
        .expect("string write");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub label: String,
    pub probabilities: Vec<f64>,
    pub reliability: ReliabilityScore,
}

#[derive(Debug, Clone)]
pub struct LRModel {
    pub config: ClassifierConfig,
    pub vocabulary: Vocabulary,
    pub weights: ModelWeights,
    pub report: TrainingReport,
}

/// Balance, grid-search, cross-validate and refit. `labels` index into
/// `config.classes`; every configured class needs at least one sample.
/// Features are always standard-mode TF-IDF, with the vocabulary fitted on
/// the training side of every split so held-out documents never leak into
/// document frequencies.
pub fn train(
    config: &ClassifierConfig,
    docs: &[Vec<String>],
    labels: &[usize],
) -> Result<LRModel, ClassifyError> {
    let n_classes = config.classes.len();
    if docs.len() != labels.len() {
        return Err(ClassifyError::LengthMismatch(docs.len(), labels.len()));
    }
    if n_classes < 2 {
        return Err(ClassifyError::BadInput("need at least two classes".into()));
    }
    if config.folds < 2 {
        return Err(ClassifyError::BadInput("need at least two folds".into()));
    }
    if !(config.c > 0.0) {
        return Err(ClassifyError::BadInput("C must be positive".into()));
    }
    if !(config.beta > 0.0) {
        return Err(ClassifyError::BadInput("beta must be positive".into()));
    }

    let picked = bootstrap_balance(labels, n_classes, config.cap, config.seed)?;
    let bal_docs: Vec<Vec<String>> = picked.iter().map(|&i| docs[i].clone()).collect();
    let bal_labels: Vec<usize> = picked.iter().map(|&i| labels[i]).collect();
    let n = bal_docs.len();
    if config.folds > n {
        return Err(ClassifyError::BadInput(format!(
            "{} folds but only {n} balanced samples",
            config.folds
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut non_converged = Vec::new();
    let subset = |idx: &[usize]| -> (Vec<Vec<String>>, Vec<usize>) {
        (
            idx.iter().map(|&i| bal_docs[i].clone()).collect(),
            idx.iter().map(|&i| bal_labels[i]).collect(),
        )
    };

    let (chosen_penalty, chosen_c, grid) = if config.grid_search {
        let split = n * 4 / 5;
        if split == 0 || split == n {
            return Err(ClassifyError::BadInput(
                "training set too small for a held-out grid split".into(),
            ));
        }
        let (train_docs, train_labels) = subset(&order[..split]);
        let (held_docs, held_labels) = subset(&order[split..]);
        let vocab = Vocabulary::fit(&train_docs)?;
        let train_rows = tfidf_vectorize(&train_docs, &vocab, TfidfMode::Standard)?;
        let held_rows = tfidf_vectorize(&held_docs, &vocab, TfidfMode::Standard)?;
        let mut grid = Vec::new();
        for penalty in Penalty::grid() {
            for &c in &GRID_C {
                let fit = fit_strategy(
                    config.strategy,
                    &train_rows,
                    &train_labels,
                    n_classes,
                    vocab.len(),
                    penalty,
                    c,
                    config.max_iters,
                );
                if !fit.converged {
                    non_converged.push(format!("grid {penalty}@{c} (grad {:.3e})", fit.grad_norm));
                }
                let preds: Vec<usize> = held_rows
                    .iter()
                    .map(|row| argmax(&probabilities_for(&fit.weights, n_classes, row)))
                    .collect();
                let f_beta = evaluate(&preds, &held_labels, n_classes, config.beta)?.f_beta;
                grid.push(GridPoint { penalty, c, f_beta });
            }
        }
        let (penalty, c) = pick_best(&grid);
        (penalty, c, grid)
    } else {
        (config.penalty, config.c, Vec::new())
    };

    // k-fold cross-validation at the chosen grid point
    let k = config.folds;
    let mut fold_metrics = Vec::with_capacity(k);
    let mut pooled_preds = Vec::with_capacity(n);
    let mut pooled_truth = Vec::with_capacity(n);
    for fold in 0..k {
        let (lo, hi) = (fold * n / k, (fold + 1) * n / k);
        let test_idx = &order[lo..hi];
        let train_idx: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
        let (train_docs, train_labels) = subset(&train_idx);
        let (test_docs, test_labels) = subset(test_idx);
        let vocab = Vocabulary::fit(&train_docs)?;
        let train_rows = tfidf_vectorize(&train_docs, &vocab, TfidfMode::Standard)?;
        let test_rows = tfidf_vectorize(&test_docs, &vocab, TfidfMode::Standard)?;
        let fit = fit_strategy(
            config.strategy,
            &train_rows,
            &train_labels,
            n_classes,
            vocab.len(),
            chosen_penalty,
            chosen_c,
            config.max_iters,
        );
        if !fit.converged {
            non_converged.push(format!("fold {} (grad {:.3e})", fold + 1, fit.grad_norm));
        }
        let preds: Vec<usize> = test_rows
            .iter()
            .map(|row| argmax(&probabilities_for(&fit.weights, n_classes, row)))
            .collect();
        fold_metrics.push(evaluate(&preds, &test_labels, n_classes, config.beta)?);
        pooled_preds.extend(preds);
        pooled_truth.extend(test_labels);
    }
    let kf = fold_metrics.len() as f64;
    let mean_of_folds = EvalMetrics {
        accuracy: fold_metrics.iter().map(|m| m.accuracy).sum::<f64>() / kf,
        macro_precision: fold_metrics.iter().map(|m| m.macro_precision).sum::<f64>() / kf,
        macro_recall: fold_metrics.iter().map(|m| m.macro_recall).sum::<f64>() / kf,
        f_beta: fold_metrics.iter().map(|m| m.f_beta).sum::<f64>() / kf,
    };
    let pooled = evaluate(&pooled_preds, &pooled_truth, n_classes, config.beta)?;

    // final refit on the full balanced set
    let vocabulary = Vocabulary::fit(&bal_docs)?;
    let rows = tfidf_vectorize(&bal_docs, &vocabulary, TfidfMode::Standard)?;
    let fit = fit_strategy(
        config.strategy,
        &rows,
        &bal_labels,
        n_classes,
        vocabulary.len(),
        chosen_penalty,
        chosen_c,
        config.max_iters,
    );
    if !fit.converged {
        log::warn!(
            "classifier refit stopped at the iteration cap (gradient norm {:.3e})",
            fit.grad_norm
        );
        non_converged.push(format!("refit (grad {:.3e})", fit.grad_norm));
    }

    let mut config = config.clone();
    config.penalty = chosen_penalty;
    config.c = chosen_c;
    Ok(LRModel {
        report: TrainingReport {
            chosen_penalty: Some(chosen_penalty),
            chosen_c,
            grid,
            fold_metrics,
            mean_of_folds,
            pooled,
            final_loss_trace: fit.loss_trace,
            non_converged,
            seed: config.seed,
        },
        config,
        vocabulary,
        weights: fit.weights,
    })
}

impl LRModel {
    pub fn predict_tokens(&self, tokens: &[String]) -> Prediction {
        let row = vectorize_one(tokens, &self.vocabulary, TfidfMode::Standard);
        let probabilities = probabilities_for(&self.weights, self.config.classes.len(), &row);
        let class_index = argmax(&probabilities);
        Prediction {
            class_index,
            label: self.config.classes[class_index].clone(),
            reliability: ReliabilityScore::from_probabilities(&probabilities),
            probabilities,
        }
    }

    pub fn predict_text(&self, text: &str) -> Prediction {
        self.predict_tokens(&preprocess(text))
    }

    /// Structured-text serialization: config header, vocabulary lines and
    /// weight rows. The training report is not part of the model file.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        writeln!(out, "mimir-model 1").expect("string write");
        writeln!(out, "strategy {}", c.strategy).expect("string write");
        writeln!(out, "penalty {}", c.penalty).expect("string write");
        writeln!(out, "c {}", c.c).expect("string write");
        writeln!(out, "classes {}", c.classes.join(",")).expect("string write");
        writeln!(out, "cap {}", c.cap).expect("string write");
        writeln!(out, "folds {}", c.folds).expect("string write");
        writeln!(out, "beta {}", c.beta).expect("string write");
        writeln!(out, "seed {}", c.seed).expect("string write");
        writeln!(out, "max_iters {}", c.max_iters).expect("string write");
        writeln!(
            out,
            "vocab {} {}",
            self.vocabulary.len(),
            self.vocabulary.n_docs()
        )
        .expect("string write");
        for (term, column, df) in self.vocabulary.terms() {
            writeln!(out, "{term}\t{column}\t{df}").expect("string write");
        }
        let write_matrix = |out: &mut String, rows: &[Vec<f64>]| {
            for row in rows {
                let line: Vec<String> = row.iter().map(f64::to_string).collect();
                writeln!(out, "{}", line.join(" ")).expect("string write");
            }
        };
        match &self.weights {
            ModelWeights::Multinomial(rows) => {
                writeln!(out, "weights multinomial {} {}", rows.len(), rows[0].len())
                    .expect("string write");
                write_matrix(&mut out, rows);
            }
            ModelWeights::OneVsOne(pairs) => {
                writeln!(
                    out,
                    "weights one_vs_one {} {}",
                    pairs.len(),
                    self.vocabulary.len() + 1
                )
                .expect("string write");
                for pair in pairs {
                    writeln!(out, "pair {} {}", pair.classes.0, pair.classes.1)
                        .expect("string write");
                    write_matrix(&mut out, &pair.weights);
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ClassifyError> {
        fn bad(msg: &str) -> ClassifyError {
            ClassifyError::BadModel(msg.to_string())
        }
        fn next_line<'a>(lines: &mut std::str::Lines<'a>) -> Result<&'a str, ClassifyError> {
            lines.next().ok_or_else(|| bad("truncated model file"))
        }
        fn field<'a>(
            lines: &mut std::str::Lines<'a>,
            name: &str,
        ) -> Result<&'a str, ClassifyError> {
            let line = next_line(lines)?;
            line.strip_prefix(name)
                .and_then(|rest| rest.strip_prefix(' '))
                .ok_or_else(|| ClassifyError::BadModel(format!("expected {name:?} line")))
        }
        fn parse_row(
            lines: &mut std::str::Lines<'_>,
            expected: usize,
        ) -> Result<Vec<f64>, ClassifyError> {
            let line = next_line(lines)?;
            let row: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
            let row = row.map_err(|_| bad("unparseable weight"))?;
            if row.len() != expected {
                return Err(bad("weight row has the wrong width"));
            }
            Ok(row)
        }

        let mut lines = text.lines();
        let header = next_line(&mut lines)?;
        if header != "mimir-model 1" {
            return Err(ClassifyError::BadModel(format!(
                "unsupported header {header:?}"
            )));
        }
        let strategy: Strategy = field(&mut lines, "strategy")?.parse()?;
        let penalty: Penalty = field(&mut lines, "penalty")?.parse()?;
        let c: f64 = field(&mut lines, "c")?
            .parse()
            .map_err(|_| bad("unparseable C value"))?;
        let classes: Vec<String> = field(&mut lines, "classes")?
            .split(',')
            .map(str::to_string)
            .collect();
        let cap: usize = field(&mut lines, "cap")?
            .parse()
            .map_err(|_| bad("unparseable cap"))?;
        let folds: usize = field(&mut lines, "folds")?
            .parse()
            .map_err(|_| bad("unparseable folds"))?;
        let beta: f64 = field(&mut lines, "beta")?
            .parse()
            .map_err(|_| bad("unparseable beta"))?;
        let seed: u64 = field(&mut lines, "seed")?
            .parse()
            .map_err(|_| bad("unparseable seed"))?;
        let max_iters: usize = field(&mut lines, "max_iters")?
            .parse()
            .map_err(|_| bad("unparseable max_iters"))?;
        let mut parts = field(&mut lines, "vocab")?.split_whitespace();
        let vocab_len: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad vocab line"))?;
        let n_docs: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad vocab line"))?;
        let mut terms = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let line = next_line(&mut lines)?;
            let mut cols = line.split('\t');
            let term = cols.next().ok_or_else(|| bad("bad vocabulary line"))?;
            let column: usize = cols
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad vocabulary line"))?;
            let df: usize = cols
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad vocabulary line"))?;
            terms.push((term.to_string(), column, df));
        }
        let vocabulary = Vocabulary::from_parts(terms, n_docs)?;

        let weights_line = next_line(&mut lines)?;
        let mut parts = weights_line
            .strip_prefix("weights ")
            .ok_or_else(|| bad("expected weights line"))?
            .split_whitespace();
        let kind = parts.next().ok_or_else(|| bad("bad weights line"))?;
        let count: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad weights line"))?;
        let cols: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad weights line"))?;
        if cols != vocabulary.len() + 1 {
            return Err(bad("weight width does not match the vocabulary"));
        }
        let weights = match kind {
            "multinomial" => {
                if count != classes.len() {
                    return Err(bad("weight rows do not match the class list"));
                }
                let mut rows = Vec::with_capacity(count);
                for _ in 0..count {
                    rows.push(parse_row(&mut lines, cols)?);
                }
                ModelWeights::Multinomial(rows)
            }
            "one_vs_one" => {
                let mut pairs = Vec::with_capacity(count);
                for _ in 0..count {
                    let line = next_line(&mut lines)?;
                    let mut ab = line
                        .strip_prefix("pair ")
                        .ok_or_else(|| bad("expected pair line"))?
                        .split_whitespace();
                    let a: usize = ab
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("bad pair line"))?;
                    let b: usize = ab
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("bad pair line"))?;
                    if a >= classes.len() || b >= classes.len() {
                        return Err(bad("pair class out of range"));
                    }
                    let weights = vec![parse_row(&mut lines, cols)?, parse_row(&mut lines, cols)?];
                    pairs.push(PairModel {
                        classes: (a, b),
                        weights,
                    });
                }
                ModelWeights::OneVsOne(pairs)
            }
            other => {
                return Err(ClassifyError::BadModel(format!(
                    "unknown weights kind {other:?}"
                )))
            }
        };
        Ok(LRModel {
            config: ClassifierConfig {
                penalty,
                c,
                classes,
                cap,
                folds,
                beta,
                seed,
                max_iters,
                strategy,
                grid_search: false,
            },
            vocabulary,
            weights,
            report: TrainingReport::default(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifyError> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn load(path: &Path) -> Result<Self, ClassifyError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    /// Two classes with disjoint vocabulary, ten docs each.
    fn tiny_corpus() -> (Vec<Vec<String>>, Vec<usize>) {
        let a = ["alpha", "beta", "gamma", "delta"];
        let b = ["omega", "sigma", "tau", "rho"];
        let mut docs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            docs.push(doc(&[a[i % 4], a[(i + 1) % 4], a[(i + 2) % 4]]));
            labels.push(0);
            docs.push(doc(&[b[i % 4], b[(i + 1) % 4], b[(i + 3) % 4]]));
            labels.push(1);
        }
        (docs, labels)
    }

    fn two_class_config() -> ClassifierConfig {
        ClassifierConfig {
            classes: vec!["Left".into(), "Right".into()],
            cap: 8,
            folds: 4,
            max_iters: 200,
            ..ClassifierConfig::default()
        }
    }

    fn toy_rows() -> (Vec<SparseVec>, Vec<usize>) {
        let rows = vec![
            vec![(0, 1.0), (2, 0.5)],
            vec![(1, 0.8)],
            vec![(0, 0.3), (3, 1.2)],
            vec![(2, 0.9), (3, 0.1)],
            vec![(1, 0.4), (2, 0.4)],
        ];
        (rows, vec![0, 1, 2, 0, 1])
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (rows, labels) = toy_rows();
        let dim = 4;
        let mut weights = vec![vec![0.0; dim + 1]; 3];
        for (i, row) in weights.iter_mut().enumerate() {
            for (j, w) in row.iter_mut().enumerate() {
                *w = ((i * 7 + j * 3) % 11) as f64 / 10.0 - 0.5;
            }
        }
        for penalty in [Penalty::None, Penalty::L2] {
            let grad = softmax_gradient(&rows, &labels, &weights, penalty, 2.0);
            for ci in 0..3 {
                for j in 0..=dim {
                    let eps = 1e-6;
                    let mut plus = weights.clone();
                    plus[ci][j] += eps;
                    let mut minus = weights.clone();
                    minus[ci][j] -= eps;
                    let numeric = (softmax_loss(&rows, &labels, &plus, penalty, 2.0)
                        - softmax_loss(&rows, &labels, &minus, penalty, 2.0))
                        / (2.0 * eps);
                    let denom = numeric.abs().max(grad[ci][j].abs()).max(1e-8);
                    assert!(
                        ((grad[ci][j] - numeric) / denom).abs() < 1e-5,
                        "{penalty} w[{ci}][{j}]: analytic {} vs numeric {numeric}",
                        grad[ci][j]
                    );
                }
            }
        }
    }

    #[test]
    fn separable_classes_fit_to_perfect_training_accuracy() {
        let rows: Vec<SparseVec> = vec![
            vec![(0, 1.0)],
            vec![(0, 0.9), (1, 0.1)],
            vec![(1, 1.0)],
            vec![(1, 0.9), (0, 0.1)],
        ];
        let labels = vec![0, 0, 1, 1];
        let fit = fit_softmax(&rows, &labels, 2, 2, Penalty::L2, 10.0, 500);
        for (row, &label) in rows.iter().zip(&labels) {
            let probs = probabilities_for(&ModelWeights::Multinomial(fit.weights.clone()), 2, row);
            assert_eq!(argmax(&probs), label);
        }
    }

    #[test]
    fn loss_never_increases_across_epochs() {
        let (rows, labels) = toy_rows();
        for penalty in [Penalty::None, Penalty::L1, Penalty::L2, Penalty::ElasticNet(0.5)] {
            let fit = fit_softmax(&rows, &labels, 3, 4, penalty, 1.0, 300);
            assert!(fit.loss_trace.len() > 1);
            for pair in fit.loss_trace.windows(2) {
                assert!(pair[1] <= pair[0], "{penalty}: {} > {}", pair[1], pair[0]);
            }
        }
    }

    #[test]
    fn vanishing_c_with_l2_zeroes_the_weights() {
        let (rows, labels) = toy_rows();
        let fit = fit_softmax(&rows, &labels, 3, 4, Penalty::L2, 1e-6, 500);
        for row in &fit.weights {
            for &w in &row[..4] {
                assert!(w.abs() < 1e-6, "non-bias weight {w} survived");
            }
        }
    }

    #[test]
    fn l1_drives_exact_zeros() {
        let (rows, labels) = toy_rows();
        let fit = fit_softmax(&rows, &labels, 3, 4, Penalty::L1, 0.05, 500);
        let zeros = fit
            .weights
            .iter()
            .flat_map(|r| &r[..4])
            .filter(|w| **w == 0.0)
            .count();
        assert!(zeros > 0, "soft-thresholding should produce exact zeros");
    }

    #[test]
    fn reliability_matches_the_conformal_formula() {
        let mut probs = vec![0.9, 0.1];
        probs.extend(vec![0.0; 9]);
        assert!((ReliabilityScore::from_probabilities(&probs).0 - 0.2).abs() < 1e-12);
        let uniform = vec![1.0 / 11.0; 11];
        assert!((ReliabilityScore::from_probabilities(&uniform).0 - 1.0).abs() < 1e-12);
        let mut one_hot = vec![0.0; 11];
        one_hot[3] = 1.0;
        assert_eq!(ReliabilityScore::from_probabilities(&one_hot).0, 0.0);
    }

    #[test]
    fn tie_break_prefers_smaller_c_then_penalty_order() {
        let points = vec![
            GridPoint { penalty: Penalty::L1, c: 1.0, f_beta: 0.9 },
            GridPoint { penalty: Penalty::L2, c: 0.1, f_beta: 0.9 },
            GridPoint { penalty: Penalty::None, c: 0.1, f_beta: 0.9 },
            GridPoint { penalty: Penalty::ElasticNet(0.5), c: 0.1, f_beta: 0.9 },
            GridPoint { penalty: Penalty::L1, c: 10.0, f_beta: 0.5 },
        ];
        assert_eq!(pick_best(&points), (Penalty::None, 0.1));
        let reversed: Vec<GridPoint> = points.into_iter().rev().collect();
        assert_eq!(pick_best(&reversed), (Penalty::None, 0.1));
    }

    #[test]
    fn grid_search_training_is_deterministic_and_accurate() {
        let (docs, labels) = tiny_corpus();
        let config = two_class_config();
        let a = train(&config, &docs, &labels).unwrap();
        let b = train(&config, &docs, &labels).unwrap();
        assert_eq!(a.config.penalty, b.config.penalty);
        assert_eq!(a.config.c, b.config.c);
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.report.grid.len(), 20);
        assert_eq!(a.report.fold_metrics.len(), 4);
        assert!(a.report.pooled.accuracy >= 0.8, "{:?}", a.report.pooled);
    }

    #[test]
    fn probabilities_are_normalized_for_both_strategies() {
        let (docs, labels) = tiny_corpus();
        for strategy in [Strategy::Multinomial, Strategy::OneVsOne] {
            let config = ClassifierConfig {
                strategy,
                grid_search: false,
                penalty: Penalty::L2,
                c: 10.0,
                ..two_class_config()
            };
            let model = train(&config, &docs, &labels).unwrap();
            for text in ["alpha beta gamma", "omega sigma tau", "unrelated words"] {
                let p = model.predict_text(text);
                let sum: f64 = p.probabilities.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9, "{strategy}: sum {sum}");
                assert!(p.probabilities.iter().all(|&v| v >= 0.0));
                assert!((0.0..=1.0).contains(&p.reliability.0));
            }
        }
    }

    #[test]
    fn one_vs_one_separates_three_classes() {
        let rows: Vec<SparseVec> = vec![
            vec![(0, 1.0)],
            vec![(0, 0.8)],
            vec![(1, 1.0)],
            vec![(1, 0.8)],
            vec![(2, 1.0)],
            vec![(2, 0.8)],
        ];
        let labels = vec![0, 0, 1, 1, 2, 2];
        let fit = fit_strategy(
            Strategy::OneVsOne,
            &rows,
            &labels,
            3,
            3,
            Penalty::L2,
            10.0,
            300,
        );
        for (row, &label) in rows.iter().zip(&labels) {
            let probs = probabilities_for(&fit.weights, 3, row);
            assert_eq!(argmax(&probs), label);
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn model_text_round_trips() {
        let (docs, labels) = tiny_corpus();
        for strategy in [Strategy::Multinomial, Strategy::OneVsOne] {
            let config = ClassifierConfig {
                strategy,
                grid_search: false,
                penalty: Penalty::ElasticNet(0.5),
                c: 1.0,
                ..two_class_config()
            };
            let model = train(&config, &docs, &labels).unwrap();
            let text = model.to_text();
            let back = LRModel::from_text(&text).unwrap();
            assert_eq!(back.vocabulary, model.vocabulary);
            assert_eq!(back.weights, model.weights);
            assert_eq!(back.config.penalty, model.config.penalty);
            let p1 = model.predict_text("alpha beta unseen");
            let p2 = back.predict_text("alpha beta unseen");
            assert_eq!(p1.class_index, p2.class_index);
            assert_eq!(p1.probabilities, p2.probabilities);
        }
        assert!(LRModel::from_text("not a model").is_err());
    }

    #[test]
    fn missing_class_is_rejected() {
        let (docs, _) = tiny_corpus();
        let labels = vec![0; docs.len()];
        assert!(matches!(
            train(&two_class_config(), &docs, &labels),
            Err(ClassifyError::EmptyClass(1))
        ));
    }

    #[test]
    fn hitting_the_iteration_cap_is_reported_not_fatal() {
        let (docs, labels) = tiny_corpus();
        let config = ClassifierConfig {
            grid_search: false,
            penalty: Penalty::None,
            max_iters: 3,
            ..two_class_config()
        };
        let model = train(&config, &docs, &labels).unwrap();
        assert!(!model.report.non_converged.is_empty());
        assert!(model.report.non_converged.iter().any(|s| s.contains("refit")));
    }

    #[test]
    fn report_csv_lists_grid_folds_and_means() {
        let (docs, labels) = tiny_corpus();
        let model = train(&two_class_config(), &docs, &labels).unwrap();
        let csv = report_csv(&model.report);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "Stage,Detail,Accuracy,Precision,Recall,F_beta"
        );
        assert_eq!(csv.lines().filter(|l| l.starts_with("grid,")).count(), 20);
        assert_eq!(csv.lines().filter(|l| l.starts_with("fold,")).count(), 4);
        assert_eq!(csv.lines().filter(|l| l.starts_with("mean,")).count(), 2);
        assert_eq!(csv.lines().filter(|l| l.starts_with("chosen,")).count(), 1);
    }
}
