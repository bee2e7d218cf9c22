//! Review sentiment and description TF-IDF features.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.tsv");
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentLexicon {
    entries: BTreeMap<String, i32>,
    max_abs: i32,
}

impl SentimentLexicon {
    pub fn new(entries: BTreeMap<String, i32>) -> Result<Self> {
        if let Some((t, _)) = entries.iter().find(|(_, v)| **v == 0) {
            return Err(Error::invalid(format!("lexicon entry {t:?} has zero valence")));
        }
        let max_abs = entries.values().map(|v| v.abs()).max().unwrap_or(0);
        if max_abs == 0 {
            return Err(Error::invalid("empty lexicon"));
        }
        let entries = entries
            .into_iter()
            .map(|(k, v)| (k.to_lowercase(), v))
            .collect();
        Ok(SentimentLexicon { entries, max_abs })
    }

    /// Parses `token<TAB>valence` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (tok, val) = line
                .split_once('\t')
                .ok_or_else(|| Error::invalid(format!("lexicon line {}: missing tab", lineno + 1)))?;
            let val: i32 = val.trim().parse().map_err(|_| {
                Error::invalid(format!("lexicon line {}: bad valence {val:?}", lineno + 1))
            })?;
            entries.insert(tok.trim().to_string(), val);
        }
        Self::new(entries)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }

    pub fn valence(&self, token: &str) -> Option<i32> {
        self.entries.get(token).copied()
    }

    pub fn max_abs(&self) -> i32 {
        self.max_abs
    }

    pub fn entries(&self) -> &BTreeMap<String, i32> {
        &self.entries
    }
}

/// Mean matched valence divided by the lexicon's largest magnitude; 0 when
/// nothing matches. Always in [-1, 1].
pub fn score_review(text: &str, lexicon: &SentimentLexicon) -> f64 {
    let (sum, matched) = tokenize(text)
        .iter()
        .filter_map(|t| lexicon.valence(t))
        .fold((0i64, 0usize), |(s, n), v| (s + v as i64, n + 1));
    if matched == 0 {
        return 0.0;
    }
    (sum as f64 / matched as f64) / lexicon.max_abs as f64
}

/// `(mean review score, review count)`; the mean of no reviews is 0.
pub fn listing_sentiment<S: AsRef<str>>(reviews: &[S], lexicon: &SentimentLexicon) -> (f64, usize) {
    if reviews.is_empty() {
        return (0.0, 0);
    }
    let total: f64 = reviews.iter().map(|r| score_review(r.as_ref(), lexicon)).sum();
    (total / reviews.len() as f64, reviews.len())
}

pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    idf: Vec<f64>,
    doc_count: usize,
    index: HashMap<String, usize>,
}

#[derive(Clone, Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    idf: Vec<f64>,
    doc_count: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_parts(r.terms, r.idf, r.doc_count)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            terms: v.terms,
            idf: v.idf,
            doc_count: v.doc_count,
        }
    }
}

impl Vocabulary {
    fn from_parts(terms: Vec<String>, idf: Vec<f64>, doc_count: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            terms,
            idf,
            doc_count,
            index,
        }
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn position(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

/// Builds the description vocabulary from training descriptions.
///
/// Terms with document frequency below `min_df` are discarded, the
/// `max_terms` most frequent survive (ties lexicographic) and the final
/// order is lexicographic. `idf(t) = ln((1 + N) / (1 + df)) + 1`.
pub fn build_vocab<S: AsRef<str>>(
    docs: &[S],
    min_df: usize,
    max_terms: usize,
    stopwords: &HashSet<String>,
) -> Result<Vocabulary> {
    if min_df < 1 || max_terms < 1 {
        return Err(Error::invalid("min_df and max_terms must be at least 1"));
    }
    let mut df: HashMap<String, usize> = HashMap::new();
    let mut any_tokens = false;
    for doc in docs {
        let uniq: HashSet<String> = tokenize(doc.as_ref())
            .into_iter()
            .filter(|t| !stopwords.contains(t))
            .collect();
        any_tokens |= !uniq.is_empty();
        for t in uniq {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    if docs.is_empty() || !any_tokens {
        return Err(Error::invalid("no descriptions"));
    }
    let mut candidates: Vec<(String, usize)> = df.into_iter().filter(|(_, c)| *c >= min_df).collect();
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    candidates.truncate(max_terms);
    candidates.sort_by(|a, b| a.0.cmp(&b.0));

    let n = docs.len() as f64;
    let idf = candidates
        .iter()
        .map(|(_, d)| ((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0)
        .collect();
    let terms = candidates.into_iter().map(|(t, _)| t).collect();
    Ok(Vocabulary::from_parts(terms, idf, docs.len()))
}

/// Sparse vector as `(term index, weight)` pairs, sorted by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector(pub Vec<(usize, f64)>);

impl SparseVector {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.0
            .binary_search_by_key(&idx, |(i, _)| *i)
            .map(|p| self.0[p].1)
            .unwrap_or(0.0)
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.0.iter().map(|(i, v)| v * dense[*i]).sum()
    }
}

/// Raw term count × idf, scaled to unit length (zero vectors stay zero).
pub fn tfidf_vector(description: &str, vocab: &Vocabulary) -> SparseVector {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for tok in tokenize(description) {
        if let Some(i) = vocab.position(&tok) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    let mut v = SparseVector(
        counts
            .into_iter()
            .map(|(i, c)| (i, c as f64 * vocab.idf[i]))
            .collect(),
    );
    let norm = v.norm();
    if norm > 0.0 {
        for (_, w) in &mut v.0 {
            *w /= norm;
        }
    }
    v
}

/// Unit direction in TF-IDF space pointing toward higher log-price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionDirection {
    pub weights: Vec<f64>,
    /// Length of the raw (unnormalized) direction.
    pub norm: f64,
}

/// `d = Σ (y_i − ȳ) v_i`, normalized. Fit on the training split only.
pub fn fit_description_direction(
    vectors: &[SparseVector],
    log_prices: &[f64],
    dim: usize,
) -> Result<DescriptionDirection> {
    if vectors.len() != log_prices.len() || vectors.is_empty() {
        return Err(Error::invalid(
            "description direction needs aligned, non-empty inputs",
        ));
    }
    let mean = log_prices.iter().sum::<f64>() / log_prices.len() as f64;
    let mut raw = vec![0.0; dim];
    for (v, y) in vectors.iter().zip(log_prices) {
        let c = y - mean;
        for (i, w) in &v.0 {
            raw[*i] += c * w;
        }
    }
    let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for w in &mut raw {
            *w /= norm;
        }
    } else {
        raw.iter_mut().for_each(|w| *w = 0.0);
    }
    Ok(DescriptionDirection { weights: raw, norm })
}

pub fn description_score(vector: &SparseVector, direction: &DescriptionDirection) -> f64 {
    vector.dot_dense(&direction.weights)
}
