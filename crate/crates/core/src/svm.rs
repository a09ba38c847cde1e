//! C-SVC with an RBF kernel, trained by SMO on the dual, combined one-vs-one
//! for multi-class problems, plus a C/gamma grid search over one seeded split.
//!
//! The binary solver minimizes `0.5 a'Qa - e'a` subject to `0 <= a <= C` and
//! `y'a = 0`, with `Q_ij = y_i y_j K(x_i, x_j)`, selecting the maximal
//! violating pair each iteration until `m(a) - M(a) < tol`.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Cursor, LabeledCorpus};
use crate::dataset::{split, stratified_split};
use crate::error::{Error, Result};
use crate::eval::Standardizer;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcParams {
    pub c: f64,
    pub gamma: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    /// Iteration cap per binary problem.
    pub max_iter: usize,
}

impl SvcParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        SvcParams {
            c,
            gamma,
            ..SvcParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("C", self.c), ("gamma", self.gamma), ("tol", self.tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::Argument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for SvcParams {
    fn default() -> Self {
        SvcParams {
            c: 1.0,
            gamma: 1.0,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

#[inline]
fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-gamma * |x - y|^2)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "kernel of vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok((-gamma * squared_distance(x, y)).exp())
}

/// Result of one dual solve.
#[derive(Debug, Clone)]
struct DualSolution {
    alpha: Vec<f64>,
    bias: f64,
    converged: bool,
    iterations: usize,
}

/// SMO over a dense kernel matrix `kernel[i * n + j]`.
fn solve_dual(kernel: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut i = usize::MAX;
        let mut big_m = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut small_m = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > big_m {
                big_m = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < small_m {
                small_m = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || big_m - small_m < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(i, t) * di + q(j, t) * dj;
        }
    }

    // offset from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };
    DualSolution {
        alpha,
        bias: -rho,
        converged,
        iterations,
    }
}

/// `m(a) - M(a)`: the maximal KKT violation of a dual point.
pub fn kkt_violation(kernel: &[f64], y: &[f64], alpha: &[f64], c: f64) -> f64 {
    let n = y.len();
    let mut big_m = f64::NEG_INFINITY;
    let mut small_m = f64::INFINITY;
    for t in 0..n {
        let g: f64 = (0..n).map(|s| y[t] * y[s] * kernel[t * n + s] * alpha[s]).sum::<f64>() - 1.0;
        let v = -y[t] * g;
        if ((y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0)) && v > big_m {
            big_m = v;
        }
        if ((y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c)) && v < small_m {
            small_m = v;
        }
    }
    (big_m - small_m).max(0.0)
}

fn gram(x: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = (-gamma * squared_distance(&x[i], &x[j])).exp();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Two-class RBF machine.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryModel {
    /// Training indices of the support vectors.
    pub support_indices: Vec<usize>,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl BinaryModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * (-self.gamma * squared_distance(sv, x)).exp())
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.decision(x) > 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Full dual vector over `n` training points.
    pub fn alpha(&self, n: usize) -> Vec<f64> {
        let mut alpha = vec![0.0; n];
        for (&i, &coef) in self.support_indices.iter().zip(&self.dual_coef) {
            alpha[i] = coef.abs();
        }
        alpha
    }

    /// KKT violation of the stored solution on its training data.
    pub fn kkt_violation(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        kkt_violation(&gram(x, self.gamma), y, &self.alpha(x.len()), self.c)
    }
}

fn check_binary_labels(y: &[f64]) -> Result<()> {
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Argument("binary labels must be +1 or -1".into()));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::Argument("binary training needs both classes".into()));
    }
    Ok(())
}

/// Trains a binary C-SVC on `+1/-1` labels.
pub fn smo_train_binary(x: &[Vec<f64>], y: &[f64], params: &SvcParams) -> Result<BinaryModel> {
    params.validate()?;
    if x.len() != y.len() {
        return Err(Error::Argument("one label per vector is required".into()));
    }
    check_binary_labels(y)?;
    if let Some(first) = x.first() {
        if x.iter().any(|v| v.len() != first.len()) {
            return Err(Error::Argument("vectors differ in length".into()));
        }
    }
    let kernel = gram(x, params.gamma);
    let sol = solve_dual(&kernel, y, params.c, params.tol, params.max_iter);
    let support_indices: Vec<usize> = (0..x.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
    Ok(BinaryModel {
        support_vectors: support_indices.iter().map(|&i| x[i].clone()).collect(),
        dual_coef: support_indices.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
        support_indices,
        bias: sol.bias,
        gamma: params.gamma,
        c: params.c,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}

/// Pairwise machine referencing a shared support-vector pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PairModel {
    /// Class voted for by a positive decision.
    pub positive: usize,
    pub negative: usize,
    /// `(pool index, alpha * y)` entries.
    pub terms: Vec<(usize, f64)>,
    pub bias: f64,
    pub converged: bool,
}

/// One-vs-one multi-class RBF SVC with its input standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct SvcModel {
    pub classes: Vec<usize>,
    pub params: SvcParams,
    pub standardizer: Standardizer,
    pub support_vectors: Vec<Vec<f64>>,
    pub pairs: Vec<PairModel>,
}

/// Pair solutions keyed by indices into the training set.
struct PairSolution {
    positive: usize,
    negative: usize,
    terms: Vec<(usize, f64)>,
    bias: f64,
    converged: bool,
}

fn sorted_classes(labels: &[usize]) -> Vec<usize> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
}

/// Solves every class pair with a precomputed training kernel.
fn fit_pairs(kernel: &[f64], labels: &[usize], classes: &[usize], params: &SvcParams) -> Vec<PairSolution> {
    let n = labels.len();
    let mut jobs = Vec::new();
    for (ai, &a) in classes.iter().enumerate() {
        for &b in &classes[ai + 1..] {
            jobs.push((a, b));
        }
    }
    jobs.into_par_iter()
        .map(|(a, b)| {
            let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == a || labels[i] == b).collect();
            let m = idx.len();
            let mut sub = vec![0.0; m * m];
            for (r, &i) in idx.iter().enumerate() {
                for (s, &j) in idx.iter().enumerate() {
                    sub[r * m + s] = kernel[i * n + j];
                }
            }
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == a { 1.0 } else { -1.0 }).collect();
            let sol = solve_dual(&sub, &y, params.c, params.tol, params.max_iter);
            PairSolution {
                positive: a,
                negative: b,
                terms: (0..m)
                    .filter(|&r| sol.alpha[r] > 0.0)
                    .map(|r| (idx[r], sol.alpha[r] * y[r]))
                    .collect(),
                bias: sol.bias,
                converged: sol.converged,
            }
        })
        .collect()
}

/// Plurality of pairwise votes, then summed decision magnitude, then lower class.
fn vote(classes: &[usize], decisions: impl Iterator<Item = (usize, usize, f64)>) -> usize {
    let mut votes = vec![0usize; classes.len()];
    let mut strength = vec![0.0f64; classes.len()];
    let pos = |c: usize| classes.binary_search(&c).expect("class from model");
    for (p, n, d) in decisions {
        let winner = if d > 0.0 { pos(p) } else { pos(n) };
        votes[winner] += 1;
        strength[winner] += d.abs();
    }
    let mut best = 0;
    for k in 1..classes.len() {
        if votes[k] > votes[best] || (votes[k] == votes[best] && strength[k] > strength[best]) {
            best = k;
        }
    }
    classes[best]
}

fn predict_from_kernel_row(pairs: &[PairSolution], classes: &[usize], row: &[f64]) -> usize {
    vote(
        classes,
        pairs.iter().map(|p| {
            let d = p.terms.iter().map(|&(i, a)| a * row[i]).sum::<f64>() + p.bias;
            (p.positive, p.negative, d)
        }),
    )
}

/// Standardizes the corpus and trains one machine per class pair.
pub fn ovo_fit(corpus: &LabeledCorpus, params: &SvcParams) -> Result<SvcModel> {
    params.validate()?;
    let classes = sorted_classes(corpus.labels());
    if classes.len() < 2 {
        return Err(Error::Argument("multi-class training needs at least 2 classes".into()));
    }
    let standardizer = Standardizer::fit(corpus.vectors())?;
    let x = standardizer.transform_all(corpus.vectors());
    let kernel = gram(&x, params.gamma);
    let solutions = fit_pairs(&kernel, corpus.labels(), &classes, params);

    let mut pool_index = vec![usize::MAX; x.len()];
    let mut support_vectors = Vec::new();
    let pairs = solutions
        .into_iter()
        .map(|s| PairModel {
            positive: s.positive,
            negative: s.negative,
            terms: s
                .terms
                .iter()
                .map(|&(i, a)| {
                    if pool_index[i] == usize::MAX {
                        pool_index[i] = support_vectors.len();
                        support_vectors.push(x[i].clone());
                    }
                    (pool_index[i], a)
                })
                .collect(),
            bias: s.bias,
            converged: s.converged,
        })
        .collect();
    Ok(SvcModel {
        classes,
        params: *params,
        standardizer,
        support_vectors,
        pairs,
    })
}

impl SvcModel {
    /// Pairwise decision values for a raw (unstandardized) descriptor.
    pub fn decisions(&self, descriptor: &[f64]) -> Vec<f64> {
        let x = self.standardizer.transform(descriptor);
        let k: Vec<f64> = self
            .support_vectors
            .iter()
            .map(|sv| (-self.params.gamma * squared_distance(sv, &x)).exp())
            .collect();
        self.pairs
            .iter()
            .map(|p| p.terms.iter().map(|&(i, a)| a * k[i]).sum::<f64>() + p.bias)
            .collect()
    }

    pub fn predict(&self, descriptor: &[f64]) -> Result<usize> {
        if descriptor.len() != self.standardizer.dim() {
            return Err(Error::Argument(format!(
                "descriptor of length {} for a model of dimension {}",
                descriptor.len(),
                self.standardizer.dim()
            )));
        }
        let d = self.decisions(descriptor);
        Ok(vote(
            &self.classes,
            self.pairs.iter().zip(d).map(|(p, d)| (p.positive, p.negative, d)),
        ))
    }

    pub fn converged(&self) -> bool {
        self.pairs.iter().all(|p| p.converged)
    }
}

/// Prediction for one descriptor.
pub fn ovo_predict(model: &SvcModel, descriptor: &[f64]) -> Result<usize> {
    model.predict(descriptor)
}

pub const MODEL_MAGIC: &[u8; 8] = b"ELPSVM\0\0";
pub const MODEL_VERSION: u32 = 1;

impl SvcModel {
    /// Little-endian layout:
    ///
    /// ```text
    /// 8 bytes magic "ELPSVM\0\0", u32 version (1), u32 dim D, u32 class count K,
    /// f64 C, f64 gamma, f64 tol, u64 max_iter, K x u32 class label,
    /// D x f64 mean, D x f64 scale, u32 pool size S, S x D x f64 support vectors,
    /// u32 pair count P, per pair: u32 positive, u32 negative, f64 bias,
    /// u8 converged, u32 term count T, T x (u32 pool index, f64 alpha*y)
    /// ```
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let dim = self.standardizer.dim();
        let mut b = Vec::new();
        b.extend_from_slice(MODEL_MAGIC);
        b.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        b.extend_from_slice(&(dim as u32).to_le_bytes());
        b.extend_from_slice(&(self.classes.len() as u32).to_le_bytes());
        b.extend_from_slice(&self.params.c.to_le_bytes());
        b.extend_from_slice(&self.params.gamma.to_le_bytes());
        b.extend_from_slice(&self.params.tol.to_le_bytes());
        b.extend_from_slice(&(self.params.max_iter as u64).to_le_bytes());
        for &c in &self.classes {
            b.extend_from_slice(&(c as u32).to_le_bytes());
        }
        for v in self.standardizer.mean.iter().chain(&self.standardizer.scale) {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&(self.support_vectors.len() as u32).to_le_bytes());
        for v in self.support_vectors.iter().flatten() {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&(self.pairs.len() as u32).to_le_bytes());
        for p in &self.pairs {
            b.extend_from_slice(&(p.positive as u32).to_le_bytes());
            b.extend_from_slice(&(p.negative as u32).to_le_bytes());
            b.extend_from_slice(&p.bias.to_le_bytes());
            b.push(u8::from(p.converged));
            b.extend_from_slice(&(p.terms.len() as u32).to_le_bytes());
            for &(i, a) in &p.terms {
                b.extend_from_slice(&(i as u32).to_le_bytes());
                b.extend_from_slice(&a.to_le_bytes());
            }
        }
        w.write_all(&b).map_err(|e| Error::io("<model stream>", e))
    }

    pub fn read_from(mut r: impl Read) -> Result<SvcModel> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::io("<model stream>", e))?;
        let mut cur = Cursor::new(&bytes);
        if cur.take(8)? != MODEL_MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let dim = cur.u32()? as usize;
        let n_classes = cur.u32()? as usize;
        let params = SvcParams {
            c: cur.f64()?,
            gamma: cur.f64()?,
            tol: cur.f64()?,
            max_iter: cur.u64()? as usize,
        };
        let classes = (0..n_classes).map(|_| cur.u32().map(|c| c as usize)).collect::<Result<Vec<_>>>()?;
        let mean = cur.f64s(dim)?;
        let scale = cur.f64s(dim)?;
        let n_sv = cur.u32()? as usize;
        let support_vectors = (0..n_sv).map(|_| cur.f64s(dim)).collect::<Result<Vec<_>>>()?;
        let n_pairs = cur.u32()? as usize;
        let mut pairs = Vec::with_capacity(n_pairs);
        for _ in 0..n_pairs {
            let positive = cur.u32()? as usize;
            let negative = cur.u32()? as usize;
            let bias = cur.f64()?;
            let converged = cur.take(1)?[0] != 0;
            let n_terms = cur.u32()? as usize;
            let mut terms = Vec::with_capacity(n_terms);
            for _ in 0..n_terms {
                let i = cur.u32()? as usize;
                if i >= n_sv {
                    return Err(Error::Format(format!("support vector index {i} out of range")));
                }
                terms.push((i, cur.f64()?));
            }
            pairs.push(PairModel {
                positive,
                negative,
                terms,
                bias,
                converged,
            });
        }
        if !cur.is_done() {
            return Err(Error::Format("trailing bytes after model".into()));
        }
        Ok(SvcModel {
            classes,
            params,
            standardizer: Standardizer { mean, scale },
            support_vectors,
            pairs,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SvcModel> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        SvcModel::read_from(std::io::BufReader::new(file))
    }
}

/// Decade grid `10^lo ..= 10^hi`.
pub fn decade_grid(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 10f64.powi(e)).collect()
}

/// C values 1e-7 .. 1e7.
pub fn default_c_grid() -> Vec<f64> {
    decade_grid(-7, 7)
}

/// Gamma values 1e-5 .. 1e3.
pub fn default_gamma_grid() -> Vec<f64> {
    decade_grid(-5, 3)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOptions {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GridSearchOptions {
    fn default() -> Self {
        GridSearchOptions {
            train_fraction: 0.8,
            seed: 0,
            stratified: false,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub c: f64,
    pub gamma: f64,
    pub accuracy: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_c: f64,
    pub best_gamma: f64,
    pub best_accuracy: f64,
    /// Row-major over `(C, gamma)` in the order given.
    pub table: Vec<GridCell>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Evaluates every `(C, gamma)` pair on one seeded train/test split.
///
/// Standardization is fitted on the training portion only.
pub fn grid_search(
    corpus: &LabeledCorpus,
    c_grid: &[f64],
    gamma_grid: &[f64],
    options: &GridSearchOptions,
) -> Result<GridSearchResult> {
    if c_grid.is_empty() || gamma_grid.is_empty() {
        return Err(Error::Argument("C and gamma grids must be non-empty".into()));
    }
    for &c in c_grid {
        SvcParams::new(c, 1.0).validate()?;
    }
    for &g in gamma_grid {
        SvcParams::new(1.0, g).validate()?;
    }
    let (train_idx, test_idx) = if options.stratified {
        stratified_split(corpus.labels(), options.train_fraction, options.seed)?
    } else {
        split(corpus.len(), options.train_fraction, options.seed)?
    };
    let train_labels: Vec<usize> = train_idx.iter().map(|&i| corpus.labels()[i]).collect();
    let test_labels: Vec<usize> = test_idx.iter().map(|&i| corpus.labels()[i]).collect();
    let classes = sorted_classes(&train_labels);
    if classes.len() < 2 {
        return Err(Error::Argument("training split holds fewer than 2 classes".into()));
    }
    let standardizer = Standardizer::fit(corpus.select(&train_idx).vectors())?;
    let x_train: Vec<Vec<f64>> = train_idx.iter().map(|&i| standardizer.transform(&corpus.vectors()[i])).collect();
    let x_test: Vec<Vec<f64>> = test_idx.iter().map(|&i| standardizer.transform(&corpus.vectors()[i])).collect();

    let n = x_train.len();
    let train_d2: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|ij| {
            let (i, j) = (ij / n, ij % n);
            if i < j {
                squared_distance(&x_train[i], &x_train[j])
            } else {
                0.0
            }
        })
        .collect();
    let test_d2: Vec<Vec<f64>> = x_test
        .par_iter()
        .map(|t| x_train.iter().map(|x| squared_distance(t, x)).collect())
        .collect();

    let cells: Vec<(f64, f64)> = c_grid
        .iter()
        .flat_map(|&c| gamma_grid.iter().map(move |&g| (c, g)))
        .collect();
    let table: Vec<GridCell> = cells
        .par_iter()
        .map(|&(c, gamma)| {
            let mut kernel = vec![1.0; n * n];
            for i in 0..n {
                for j in i + 1..n {
                    let v = (-gamma * train_d2[i * n + j]).exp();
                    kernel[i * n + j] = v;
                    kernel[j * n + i] = v;
                }
            }
            let params = SvcParams {
                c,
                gamma,
                tol: options.tol,
                max_iter: options.max_iter,
            };
            let pairs = fit_pairs(&kernel, &train_labels, &classes, &params);
            let correct = test_d2
                .iter()
                .zip(&test_labels)
                .filter(|(d2, &label)| {
                    let row: Vec<f64> = d2.iter().map(|d| (-gamma * d).exp()).collect();
                    predict_from_kernel_row(&pairs, &classes, &row) == label
                })
                .count();
            GridCell {
                c,
                gamma,
                accuracy: if test_labels.is_empty() {
                    0.0
                } else {
                    correct as f64 / test_labels.len() as f64
                },
                converged: pairs.iter().all(|p| p.converged),
            }
        })
        .collect();

    let mut best = &table[0];
    for cell in &table[1..] {
        let better = cell.accuracy > best.accuracy
            || (cell.accuracy == best.accuracy
                && (cell.c < best.c || (cell.c == best.c && cell.gamma < best.gamma)));
        if better {
            best = cell;
        }
    }
    Ok(GridSearchResult {
        best_c: best.c,
        best_gamma: best.gamma,
        best_accuracy: best.accuracy,
        train_indices: train_idx,
        test_indices: test_idx,
        table,
    })
}

/// Test accuracy of one `(C, gamma)` fit on a fixed split.
pub fn fit_and_score(corpus: &LabeledCorpus, train: &[usize], test: &[usize], params: &SvcParams) -> Result<f64> {
    let model = ovo_fit(&corpus.select(train), params)?;
    if test.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for &i in test {
        if model.predict(&corpus.vectors()[i])? == corpus.labels()[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(rbf_kernel(&[0.3, 2.0], &[0.3, 2.0], 5.0).unwrap(), 1.0);
        assert!((rbf_kernel(&[0.0], &[1.0], 1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(rbf_kernel(&[0.0], &[2.0], 1.0).unwrap() < rbf_kernel(&[0.0], &[1.0], 1.0).unwrap());
        assert!(rbf_kernel(&[0.0], &[1.0, 2.0], 1.0).is_err());
    }

    fn xor() -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![-1.0, -1.0, 1.0, 1.0],
        )
    }

    #[test]
    fn xor_is_separated() {
        let (x, y) = xor();
        let model = smo_train_binary(&x, &y, &SvcParams::new(10.0, 1.0)).unwrap();
        assert!(model.converged);
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(model.predict(xi), *yi);
        }
        assert!(model.kkt_violation(&x, &y) < 1e-3);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(smo_train_binary(&x, &[1.0, 1.0], &SvcParams::default()).is_err());
        assert!(smo_train_binary(&x, &[1.0, 0.0], &SvcParams::default()).is_err());
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let (x, y) = xor();
        let params = SvcParams {
            max_iter: 1,
            ..SvcParams::new(10.0, 1.0)
        };
        assert!(!smo_train_binary(&x, &y, &params).unwrap().converged);
    }

    #[test]
    fn invalid_params() {
        assert!(SvcParams::new(0.0, 1.0).validate().is_err());
        assert!(SvcParams::new(1.0, -1.0).validate().is_err());
        assert!(SvcParams::new(1.0, f64::NAN).validate().is_err());
    }

    #[test]
    fn vote_tie_breaks() {
        // three classes, each wins one duel: strongest margin wins
        let classes = [0, 1, 2];
        let d = [(0, 1, 0.5), (0, 2, -0.2), (1, 2, 2.0)];
        assert_eq!(vote(&classes, d.iter().copied()), 1);
        let d = [(0, 1, 1.0), (0, 2, -1.0), (1, 2, 1.0)];
        assert_eq!(vote(&classes, d.iter().copied()), 0);
    }

    #[test]
    fn decade_grids() {
        assert_eq!(default_c_grid().len(), 15);
        assert_eq!(default_gamma_grid().len(), 9);
        assert_eq!(default_c_grid()[0], 1e-7);
        assert_eq!(*default_gamma_grid().last().unwrap(), 1e3);
    }
}
