//! TF-IDF vectorization with sublinear term-frequency scaling.
//!
//! Two weighting modes: the standard interpretation
//! `(1 + log₂ tf) · log₂(N / (df + 1))` with negative idf clamped to zero
//! and L2-normalized rows, and a literal mode `tf / log₂(N / (df + 1))`
//! that preserves the published formula (idf in the denominator, no
//! normalization) for side-by-side comparison. The vocabulary is fitted on
//! training documents only; unseen terms are ignored at transform time.

use super::ClassifyError;
use std::collections::{BTreeMap, BTreeSet};

/// Term → column mapping with per-term document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    index: BTreeMap<String, usize>,
    df: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    /// Fit on tokenized training documents. Columns are dense and assigned
    /// in sorted term order.
    pub fn fit(docs: &[Vec<String>]) -> Result<Self, ClassifyError> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let unique: BTreeSet<&String> = doc.iter().collect();
            for term in unique {
                *counts.entry(term.clone()).or_insert(0) += 1;
            }
        }
        if counts.is_empty() {
            return Err(ClassifyError::EmptyVocabulary);
        }
        let mut index = BTreeMap::new();
        let mut df = Vec::with_capacity(counts.len());
        for (column, (term, count)) in counts.into_iter().enumerate() {
            index.insert(term, column);
            df.push(count);
        }
        Ok(Self {
            index,
            df,
            n_docs: docs.len(),
        })
    }

    /// Rebuild from serialized parts; indices must be dense and df ≥ 1.
    pub fn from_parts(
        terms: Vec<(String, usize, usize)>,
        n_docs: usize,
    ) -> Result<Self, ClassifyError> {
        let len = terms.len();
        let mut index = BTreeMap::new();
        let mut df = vec![0usize; len];
        let mut seen = vec![false; len];
        for (term, column, count) in terms {
            if column >= len || seen[column] {
                return Err(ClassifyError::BadModel(format!(
                    "vocabulary column {column} is out of range or duplicated"
                )));
            }
            if count == 0 {
                return Err(ClassifyError::BadModel(format!(
                    "term {term:?} has zero document frequency"
                )));
            }
            seen[column] = true;
            df[column] = count;
            index.insert(term, column);
        }
        if index.len() != len {
            return Err(ClassifyError::BadModel("duplicate vocabulary terms".into()));
        }
        Ok(Self { index, df, n_docs })
    }

    pub fn len(&self) -> usize {
        self.df.len()
    }

    pub fn is_empty(&self) -> bool {
        self.df.is_empty()
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn df(&self, column: usize) -> usize {
        self.df[column]
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// (term, column, document frequency) in sorted term order.
    pub fn terms(&self) -> impl Iterator<Item = (&str, usize, usize)> {
        self.index
            .iter()
            .map(|(term, &column)| (term.as_str(), column, self.df[column]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TfidfMode {
    #[default]
    Standard,
    PaperLiteral,
}

/// Sparse row: (column, weight) sorted by column.
pub type SparseVec = Vec<(usize, f64)>;

/// Vectorize one tokenized document against a fitted vocabulary.
pub fn vectorize_one(tokens: &[String], vocab: &Vocabulary, mode: TfidfMode) -> SparseVec {
    let mut tf: BTreeMap<usize, usize> = BTreeMap::new();
    for token in tokens {
        if let Some(column) = vocab.column(token) {
            *tf.entry(column).or_insert(0) += 1;
        }
    }
    let n = vocab.n_docs() as f64;
    let mut row: SparseVec = tf
        .into_iter()
        .filter_map(|(column, count)| {
            let idf = (n / (vocab.df(column) + 1) as f64).log2();
            let weight = match mode {
                TfidfMode::Standard => (1.0 + (count as f64).log2()) * idf.max(0.0),
                // the published form puts the idf term in the denominator;
                // non-positive denominators are guarded to zero
                TfidfMode::PaperLiteral => {
                    if idf > 0.0 {
                        count as f64 / idf
                    } else {
                        0.0
                    }
                }
            };
            (weight != 0.0).then_some((column, weight))
        })
        .collect();
    if mode == TfidfMode::Standard {
        let norm = row.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut row {
                *w /= norm;
            }
        }
    }
    row
}

pub fn tfidf_vectorize(
    docs: &[Vec<String>],
    vocab: &Vocabulary,
    mode: TfidfMode,
) -> Result<Vec<SparseVec>, ClassifyError> {
    if vocab.is_empty() {
        return Err(ClassifyError::EmptyVocabulary);
    }
    Ok(docs
        .iter()
        .map(|doc| vectorize_one(doc, vocab, mode))
        .collect())
}
