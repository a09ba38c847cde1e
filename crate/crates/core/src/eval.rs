//! Standardization, chi-squared distance and leave-one-out k-NN retrieval.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{extract_all, LabeledCorpus};
use crate::descriptor::DescriptorParams;
use crate::error::{Error, Result};
use crate::imaging::{GrayImage, SubImageGrid};

/// Denominator guard of [`chi_squared`].
pub const CHI2_EPS: f64 = 1e-10;
/// Dimensions with a smaller population standard deviation are mapped to 0.
pub const MIN_SCALE: f64 = 1e-12;

/// Per-dimension zero-mean unit-variance transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; 0 marks a constant dimension.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(vectors: &[Vec<f64>]) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::Argument("cannot standardize an empty corpus".into()))?;
        let dim = first.len();
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for v in vectors {
            for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < MIN_SCALE {
                    0.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| if *s == 0.0 { 0.0 } else { (x - m) / s })
            .collect()
    }

    pub fn transform_all(&self, vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
        vectors.iter().map(|v| self.transform(v)).collect()
    }
}

/// Standardizes a corpus and returns the fitted transform.
pub fn standardize(corpus: &LabeledCorpus) -> Result<(LabeledCorpus, Standardizer)> {
    if corpus.len() < 2 {
        return Err(Error::Argument(format!(
            "standardization needs at least 2 descriptors, got {}",
            corpus.len()
        )));
    }
    let fitted = Standardizer::fit(corpus.vectors())?;
    let transformed = corpus.with_vectors(fitted.transform_all(corpus.vectors()))?;
    Ok((transformed, fitted))
}

/// `0.5 * sum (x - y)^2 / (|x| + |y| + eps)`.
pub fn chi_squared(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "chi-squared of vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(chi_squared_unchecked(x, y))
}

#[inline]
fn chi_squared_unchecked(x: &[f64], y: &[f64]) -> f64 {
    0.5 * x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d / (a.abs() + b.abs() + CHI2_EPS)
        })
        .sum::<f64>()
}

/// How descriptors are prepared before chi-squared comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    /// Standardize every dimension, then chi-squared with absolute denominators.
    #[default]
    Paper,
    /// Raw L1-normalized histograms.
    Classic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub index: usize,
    pub true_label: usize,
    pub predicted: usize,
    /// `(corpus index, distance)` nearest first.
    pub neighbors: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub k: usize,
    pub queries: Vec<QueryResult>,
    pub correct: usize,
    pub accuracy: f64,
}

/// Full symmetric chi-squared distance matrix, one parallel task per row.
pub fn distance_matrix(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| chi_squared_unchecked(&vectors[i], &vectors[j]))
                .collect()
        })
        .collect();
    let mut full = vec![vec![0.0; n]; n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &d) in row.iter().enumerate() {
            let j = i + 1 + off;
            full[i][j] = d;
            full[j][i] = d;
        }
    }
    full
}

/// Majority label among neighbors (nearest first); tied labels go to the
/// one whose member is nearest.
pub fn majority_vote(neighbor_labels: &[usize]) -> Option<usize> {
    let max_label = *neighbor_labels.iter().max()?;
    let mut votes = vec![0usize; max_label + 1];
    neighbor_labels.iter().for_each(|&l| votes[l] += 1);
    let top = *votes.iter().max()?;
    neighbor_labels.iter().copied().find(|&l| votes[l] == top)
}

/// Leave-one-out k-NN evaluation on the corpus as given.
pub fn knn_retrieval_eval(corpus: &LabeledCorpus, k: usize) -> Result<SearchReport> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    if k >= corpus.len() {
        return Err(Error::Argument(format!(
            "k = {k} needs a corpus of more than {k} items, got {}",
            corpus.len()
        )));
    }
    let distances = distance_matrix(corpus.vectors());
    let labels = corpus.labels();
    let queries: Vec<QueryResult> = distances
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut candidates: Vec<(usize, f64)> =
                row.iter().copied().enumerate().filter(|&(j, _)| j != i).collect();
            candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            candidates.truncate(k);
            let neighbor_labels: Vec<usize> = candidates.iter().map(|&(j, _)| labels[j]).collect();
            QueryResult {
                index: i,
                true_label: labels[i],
                predicted: majority_vote(&neighbor_labels).expect("k >= 1"),
                neighbors: candidates,
            }
        })
        .collect();
    let correct = queries.iter().filter(|q| q.predicted == q.true_label).count();
    Ok(SearchReport {
        k,
        accuracy: correct as f64 / queries.len() as f64,
        correct,
        queries,
    })
}

/// Retrieval with the chosen distance pipeline.
pub fn search(corpus: &LabeledCorpus, k: usize, mode: DistanceMode) -> Result<SearchReport> {
    match mode {
        DistanceMode::Paper => knn_retrieval_eval(&standardize(corpus)?.0, k),
        DistanceMode::Classic => knn_retrieval_eval(corpus, k),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub grid: SubImageGrid,
    pub length: usize,
    pub accuracy: f64,
}

/// Extracts and evaluates a corpus once per grid.
pub fn subimage_sweep(
    images: &[GrayImage],
    labels: &[usize],
    names: &[String],
    params: &DescriptorParams,
    grids: &[SubImageGrid],
    k: usize,
    mode: DistanceMode,
) -> Result<Vec<SweepRow>> {
    if grids.is_empty() {
        return Err(Error::Argument("sweep needs at least one grid".into()));
    }
    let paths: Vec<String> = (0..images.len()).map(|i| format!("#{i}")).collect();
    grids
        .iter()
        .map(|&grid| {
            let vectors = extract_all(images, params, grid)?;
            let corpus =
                LabeledCorpus::new(params.clone(), grid, vectors, labels.to_vec(), names.to_vec(), paths.clone())?;
            let report = search(&corpus, k, mode)?;
            Ok(SweepRow {
                grid,
                length: corpus.dim(),
                accuracy: report.accuracy,
            })
        })
        .collect()
}
