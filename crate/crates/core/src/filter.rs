//! Margin-based filtering of sentence pairs with externally computed
//! sentence embeddings.
//!
//! A pair `(x, y)` is scored with the ratio margin
//!
//! ```text
//! score = cos(x, y) / (mean(nn_x) / 2 + mean(nn_y) / 2)
//! ```
//!
//! where `nn_x` holds the cosines of `x` to its `k` nearest target-side
//! embeddings and `nn_y` those of `y` to its `k` nearest source-side
//! embeddings. The pair's own partner is excluded from both searches.
//! Neighbours are searched only inside the pair's neighbourhood: its
//! document, its batch, or the whole input.
//!
//! Batches are formed by a Fisher–Yates shuffle driven by SplitMix64
//! seeded with the configured seed; the bound for step `i` is
//! `(next_u64() * (i + 1)) >> 64`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::SentencePair;
use crate::error::{Error, Result};

/// Row-major matrix of sentence embeddings, one row per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn from_flat(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dimension is zero".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::Validation(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        for (i, row) in data.chunks_exact(dim).enumerate() {
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("row {i}: non-finite value {v}")));
            }
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::Validation(format!("row {i}: zero vector")));
            }
        }
        Ok(EmbeddingMatrix { dim, data })
    }

    pub fn from_rows(rows: Vec<Vec<f32>>) -> Result<Self> {
        let Some(dim) = rows.first().map(Vec::len) else {
            return Err(Error::Validation("no embedding rows".into()));
        };
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::Validation(format!(
                "row {i} has dimension {} but row 0 has {dim}",
                rows[i].len()
            )));
        }
        Self::from_flat(dim, rows.into_iter().flatten().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// A new matrix made of the given rows, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Contract(format!(
                    "row {i} out of range for {} embeddings",
                    self.len()
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::from_flat(self.dim, data)
    }
}

fn norm(x: &[f32]) -> f64 {
    x.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
}

pub fn cosine(x: &[f32], y: &[f32]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!(
            "cosine of vectors with dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Contract("cosine with a zero vector".into()));
    }
    let dot: f64 = x.iter().zip(y).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

/// Rows scaled to unit length, in f64.
struct UnitRows {
    dim: usize,
    data: Vec<f64>,
}

impl UnitRows {
    fn new(m: &EmbeddingMatrix) -> Self {
        let mut data = Vec::with_capacity(m.data.len());
        for row in m.rows() {
            let n = norm(row);
            data.extend(row.iter().map(|&v| f64::from(v) / n));
        }
        UnitRows { dim: m.dim, data }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn dot(&self, i: usize, other: &UnitRows, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(other.row(j))
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .clamp(-1.0, 1.0)
    }
}

fn by_similarity(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

/// Exact top-`k` over `(index, cosine)` candidates: descending cosine, ties
/// to the lower index.
fn top_k(mut cands: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    if cands.len() > k && k > 0 {
        cands.select_nth_unstable_by(k - 1, by_similarity);
        cands.truncate(k);
    }
    cands.truncate(k);
    cands.sort_by(by_similarity);
    cands
}

/// Neighbours of `query` row in `pool`, searched among `members` and
/// skipping `exclude`.
fn neighbours(
    query_rows: &UnitRows,
    query: usize,
    pool: &UnitRows,
    members: &[usize],
    exclude: usize,
    k: usize,
) -> Vec<(usize, f64)> {
    let cands = members
        .iter()
        .filter(|&&j| j != exclude)
        .map(|&j| (j, query_rows.dot(query, pool, j)))
        .collect();
    top_k(cands, k)
}

/// The `k` rows of `pool` most similar to row `query_index`, excluding the
/// query itself. Returns fewer than `k` indices when the pool is too small.
pub fn knn(pool: &EmbeddingMatrix, query_index: usize, k: usize) -> Result<Vec<usize>> {
    if query_index >= pool.len() {
        return Err(Error::Contract(format!(
            "query {query_index} out of range for pool of {}",
            pool.len()
        )));
    }
    let rows = UnitRows::new(pool);
    let members: Vec<usize> = (0..pool.len()).collect();
    Ok(neighbours(&rows, query_index, &rows, &members, query_index, k)
        .into_iter()
        .map(|(i, _)| i)
        .collect())
}

/// Ratio margin. Returns `None` when either neighbour list is empty or the
/// denominator is not positive. With `k` neighbours on each side this is
/// `cos_xy / (Σnn_x / 2k + Σnn_y / 2k)`.
pub fn margin_score(cos_xy: f64, nn_x: &[f64], nn_y: &[f64]) -> Option<f64> {
    if nn_x.is_empty() || nn_y.is_empty() {
        return None;
    }
    let denom = nn_x.iter().sum::<f64>() / (2 * nn_x.len()) as f64
        + nn_y.iter().sum::<f64>() / (2 * nn_y.len()) as f64;
    (denom > 0.0).then(|| cos_xy / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Neighborhood {
    Document,
    Batch,
    Global,
}

impl std::str::FromStr for Neighborhood {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "document" => Ok(Neighborhood::Document),
            "batch" => Ok(Neighborhood::Batch),
            "global" => Ok(Neighborhood::Global),
            _ => Err(Error::Config(format!("unknown neighbourhood mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterParams {
    #[serde(default = "default_k")]
    pub k: usize,
    pub margin: f64,
    #[serde(default = "default_mode")]
    pub mode: Neighborhood,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    4
}
fn default_mode() -> Neighborhood {
    Neighborhood::Batch
}
fn default_batch_size() -> usize {
    1000
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            k: default_k(),
            margin: 0.96,
            mode: default_mode(),
            batch_size: default_batch_size(),
            seed: 0,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.margin.is_nan() || self.margin < 0.0 {
            return Err(Error::Config(format!("invalid margin {}", self.margin)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitCount {
    pub unit: String,
    pub n_in: usize,
    pub n_kept: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub n_in: usize,
    pub n_kept: usize,
    pub pct_filtered: f64,
    pub margin: f64,
    pub mode: Neighborhood,
    /// Pairs whose neighbourhood had fewer than `k` other members.
    pub n_degenerate: usize,
    /// Pairs rejected because their margin was undefined.
    pub n_undefined: usize,
    pub units: Vec<UnitCount>,
}

pub fn pct_filtered(n_in: usize, n_kept: usize) -> f64 {
    if n_in == 0 {
        0.0
    } else {
        100.0 * (n_in - n_kept) as f64 / n_in as f64
    }
}

/// Deterministic Fisher–Yates permutation of `0..n`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = ((u128::from(rng.next_u64()) * (i as u128 + 1)) >> 64) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Margin scores for every pair, computed once and reusable across
/// thresholds.
#[derive(Debug, Clone)]
pub struct PoolScores {
    pub mode: Neighborhood,
    /// One entry per input pair; `None` when the margin is undefined.
    pub scores: Vec<Option<f64>>,
    pub degenerate: Vec<bool>,
    /// Neighbourhood units as lists of input indices.
    pub units: Vec<(String, Vec<usize>)>,
}

impl PoolScores {
    pub fn kept_indices(&self, margin: f64) -> Vec<usize> {
        self.scores
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_some_and(|s| s >= margin))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn report(&self, margin: f64) -> FilterReport {
        let keep = |i: &usize| self.scores[*i].is_some_and(|s| s >= margin);
        let units: Vec<UnitCount> = self
            .units
            .iter()
            .map(|(name, members)| UnitCount {
                unit: name.clone(),
                n_in: members.len(),
                n_kept: members.iter().filter(|i| keep(i)).count(),
            })
            .collect();
        let n_in = self.scores.len();
        let n_kept = (0..n_in).filter(keep).count();
        FilterReport {
            n_in,
            n_kept,
            pct_filtered: pct_filtered(n_in, n_kept),
            margin,
            mode: self.mode,
            n_degenerate: self.degenerate.iter().filter(|d| **d).count(),
            n_undefined: self.scores.iter().filter(|s| s.is_none()).count(),
            units,
        }
    }
}

fn neighbourhood_units(pairs: &[SentencePair], params: &FilterParams) -> Vec<(String, Vec<usize>)> {
    match params.mode {
        Neighborhood::Global => vec![("global".to_owned(), (0..pairs.len()).collect())],
        Neighborhood::Document => {
            let mut docs: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, p) in pairs.iter().enumerate() {
                docs.entry(p.doc_id().unwrap_or("")).or_default().push(i);
            }
            docs.into_iter().map(|(d, m)| (d.to_owned(), m)).collect()
        }
        Neighborhood::Batch => shuffled_indices(pairs.len(), params.seed)
            .chunks(params.batch_size)
            .enumerate()
            .map(|(b, chunk)| (format!("batch-{b}"), chunk.to_vec()))
            .collect(),
    }
}

/// Scores every pair within its neighbourhood unit.
pub fn score_pairs(
    pairs: &[SentencePair],
    src_emb: &EmbeddingMatrix,
    tgt_emb: &EmbeddingMatrix,
    params: &FilterParams,
) -> Result<PoolScores> {
    params.validate()?;
    if src_emb.len() != pairs.len() || tgt_emb.len() != pairs.len() {
        return Err(Error::Contract(format!(
            "{} pairs but {} source and {} target embeddings",
            pairs.len(),
            src_emb.len(),
            tgt_emb.len()
        )));
    }
    if !pairs.is_empty() && src_emb.dim() != tgt_emb.dim() {
        return Err(Error::Contract(format!(
            "source embeddings have dimension {}, target {}",
            src_emb.dim(),
            tgt_emb.dim()
        )));
    }
    let src = UnitRows::new(src_emb);
    let tgt = UnitRows::new(tgt_emb);
    let units = neighbourhood_units(pairs, params);
    let k = params.k;

    let per_unit: Vec<Vec<(usize, Option<f64>, bool)>> = units
        .par_iter()
        .map(|(_, members)| {
            members
                .iter()
                .map(|&i| {
                    let cos_xy = src.dot(i, &tgt, i);
                    let nn_x: Vec<f64> = neighbours(&src, i, &tgt, members, i, k)
                        .into_iter()
                        .map(|(_, c)| c)
                        .collect();
                    let nn_y: Vec<f64> = neighbours(&tgt, i, &src, members, i, k)
                        .into_iter()
                        .map(|(_, c)| c)
                        .collect();
                    let degenerate = nn_x.len() < k;
                    (i, margin_score(cos_xy, &nn_x, &nn_y), degenerate)
                })
                .collect()
        })
        .collect();

    let mut scores = vec![None; pairs.len()];
    let mut degenerate = vec![false; pairs.len()];
    for (i, s, d) in per_unit.into_iter().flatten() {
        scores[i] = s;
        degenerate[i] = d;
    }
    Ok(PoolScores {
        mode: params.mode,
        scores,
        degenerate,
        units,
    })
}

/// Keeps the pairs whose margin within their neighbourhood reaches
/// `params.margin`. Kept pairs stay in input order.
pub fn filter_pool(
    pairs: &[SentencePair],
    src_emb: &EmbeddingMatrix,
    tgt_emb: &EmbeddingMatrix,
    params: &FilterParams,
) -> Result<(Vec<SentencePair>, FilterReport)> {
    let scores = score_pairs(pairs, src_emb, tgt_emb, params)?;
    let kept = scores
        .kept_indices(params.margin)
        .into_iter()
        .map(|i| pairs[i].clone())
        .collect();
    Ok((kept, scores.report(params.margin)))
}

/// Shuffles the pairs, filters each batch of `params.batch_size`
/// independently and returns the survivors in their original order.
pub fn batch_filter(
    pairs: &[SentencePair],
    src_emb: &EmbeddingMatrix,
    tgt_emb: &EmbeddingMatrix,
    params: &FilterParams,
) -> Result<(Vec<SentencePair>, FilterReport)> {
    let params = FilterParams {
        mode: Neighborhood::Batch,
        ..*params
    };
    filter_pool(pairs, src_emb, tgt_emb, &params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: Vec<Vec<f32>>) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[3.0, 4.0], &[4.0, 3.0]).unwrap() - 0.96).abs() < 1e-12);
        assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn matrix_validation() {
        assert!(EmbeddingMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0]]).is_err());
        assert!(EmbeddingMatrix::from_rows(vec![vec![0.0, 0.0]]).is_err());
        assert!(EmbeddingMatrix::from_rows(vec![vec![f32::NAN, 1.0]]).is_err());
        assert!(EmbeddingMatrix::from_rows(vec![]).is_err());
    }

    #[test]
    fn knn_tie_break_and_exhaustion() {
        let pool = m(vec![vec![1.0, 1.0]; 5]);
        assert_eq!(knn(&pool, 2, 2).unwrap(), [0, 1]);
        assert_eq!(knn(&pool, 0, 4).unwrap(), [1, 2, 3, 4]);
        assert_eq!(knn(&pool, 0, 10).unwrap().len(), 4);
        assert!(knn(&pool, 5, 1).is_err());
    }

    #[test]
    fn knn_planted_neighbour_matches_scan() {
        // query 0 = e0; row 3 has cosine 0.99 to it, the rest at most 0.1
        let d = 8;
        let mut rows = Vec::new();
        let unit = |i: usize| {
            let mut v = vec![0.0f32; d];
            v[i] = 1.0;
            v
        };
        rows.push(unit(0));
        for i in 1..7 {
            let mut v = unit(i);
            v[0] = if i == 3 { 7.0 } else { 0.1 };
            rows.push(v);
        }
        let pool = m(rows);
        let scan = (1..pool.len())
            .max_by(|&a, &b| {
                cosine(pool.row(0), pool.row(a))
                    .unwrap()
                    .partial_cmp(&cosine(pool.row(0), pool.row(b)).unwrap())
                    .unwrap()
            })
            .unwrap();
        assert!(cosine(pool.row(0), pool.row(3)).unwrap() > 0.98);
        assert_eq!(knn(&pool, 0, 1).unwrap(), [scan]);
        assert_eq!(scan, 3);
    }

    #[test]
    fn margin_examples() {
        let c = 0.7;
        assert_eq!(margin_score(c, &[c; 4], &[c; 4]), Some(1.0));
        let s = margin_score(0.6, &[0.5; 4], &[0.5; 4]).unwrap();
        assert!((s - 1.2).abs() < 1e-12);
        assert_eq!(margin_score(0.0, &[0.3; 4], &[0.2; 4]), Some(0.0));
        assert_eq!(margin_score(0.5, &[0.0; 4], &[0.0; 4]), None);
        assert_eq!(margin_score(0.5, &[], &[0.2]), None);
    }

    #[test]
    fn batch_partition_sizes() {
        let pairs: Vec<_> = (0..2500)
            .map(|i| SentencePair::new(format!("s{i}"), format!("t{i}")).unwrap())
            .collect();
        let params = FilterParams {
            mode: Neighborhood::Batch,
            batch_size: 1000,
            ..Default::default()
        };
        let sizes: Vec<usize> = neighbourhood_units(&pairs, &params)
            .iter()
            .map(|(_, m)| m.len())
            .collect();
        assert_eq!(sizes, [1000, 1000, 500]);
    }

    #[test]
    fn shuffle_is_a_seeded_permutation() {
        let a = shuffled_indices(100, 42);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_eq!(a, shuffled_indices(100, 42));
        assert_ne!(a, shuffled_indices(100, 43));
    }

    #[test]
    fn row_count_mismatch_is_contract_violation() {
        let pairs = vec![SentencePair::new("a", "b").unwrap()];
        let e = m(vec![vec![1.0], vec![1.0]]);
        assert!(matches!(
            filter_pool(&pairs, &e, &e, &FilterParams::default()),
            Err(Error::Contract(_))
        ));
    }
}
