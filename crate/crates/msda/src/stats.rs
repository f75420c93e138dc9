//! Sufficient statistics: class means, mean differences, priors, and the
//! pooled within-class covariance, either precomputed densely or served
//! column by column from the centered data.

use std::collections::HashMap;
use std::ops::Deref;
use std::sync::{Arc, Mutex};

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::data::LabeledDataset;
use crate::{Error, Result};

/// Largest `p` for which the dense `p x p` covariance is precomputed
/// (about 128 MiB of f64 at the boundary).
pub const DENSE_COV_BUDGET: usize = 4096;

const DEFAULT_MEMO_CAPACITY: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovMode {
    /// Dense when `p <= DENSE_COV_BUDGET`, on-demand otherwise.
    Auto,
    Dense,
    OnDemand,
}

/// Sufficient statistics of a labeled dataset.
///
/// Immutable after construction; the on-demand column memo is internally
/// synchronized, so shared references can be used from several threads.
#[derive(Debug)]
pub struct SuffStats {
    n: usize,
    p: usize,
    k: usize,
    class_counts: Vec<usize>,
    priors: Vec<f64>,
    /// `K x p`, row `k - 1` is the sample mean of class `k`.
    class_means: Array2<f64>,
    /// `p x (K - 1)`, column `c` is `mean(class c + 2) - mean(class 1)`.
    delta: Array2<f64>,
    diag: Vec<f64>,
    zero_variance: Vec<bool>,
    cov: CovStore,
}

#[derive(Debug)]
enum CovStore {
    Dense(Array2<f64>),
    OnDemand {
        /// `n x p` rows `x_i - mean(class of i)`.
        centered: Array2<f64>,
        denom: f64,
        memo: Mutex<LruMemo>,
    },
}

/// A covariance column: borrowed from the dense matrix, or shared out of
/// the on-demand memo.
pub enum CovCol<'a> {
    Borrowed(&'a [f64]),
    Shared(Arc<Vec<f64>>),
}

impl Deref for CovCol<'_> {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        match self {
            CovCol::Borrowed(s) => s,
            CovCol::Shared(v) => v,
        }
    }
}

#[derive(Debug)]
struct LruMemo {
    capacity: usize,
    stamp: u64,
    entries: HashMap<usize, (Arc<Vec<f64>>, u64)>,
}

impl LruMemo {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            stamp: 0,
            entries: HashMap::new(),
        }
    }

    fn get(&mut self, j: usize) -> Option<Arc<Vec<f64>>> {
        self.stamp += 1;
        let stamp = self.stamp;
        self.entries.get_mut(&j).map(|(col, s)| {
            *s = stamp;
            Arc::clone(col)
        })
    }

    fn insert(&mut self, j: usize, col: Arc<Vec<f64>>) {
        self.stamp += 1;
        if self.entries.len() >= self.capacity && !self.entries.contains_key(&j) {
            if let Some(&evict) = self
                .entries
                .iter()
                .min_by_key(|(_, (_, s))| *s)
                .map(|(j, _)| j)
            {
                self.entries.remove(&evict);
            }
        }
        self.entries.insert(j, (col, self.stamp));
    }
}

impl SuffStats {
    /// Computes class means, mean differences `delta`, empirical priors and
    /// the pooled within-class covariance with denominator `n - K`.
    pub fn compute(data: &LabeledDataset, mode: CovMode) -> Result<Self> {
        let (n, p, k) = (data.n(), data.p(), data.k());
        let dense = match mode {
            CovMode::Auto => p <= DENSE_COV_BUDGET,
            CovMode::Dense => {
                if p > DENSE_COV_BUDGET {
                    return Err(Error::InvalidInput(format!(
                        "dense covariance for p = {p} exceeds the {DENSE_COV_BUDGET}-column budget"
                    )));
                }
                true
            }
            CovMode::OnDemand => false,
        };

        let mut class_counts = vec![0usize; k];
        let mut class_means = Array2::<f64>::zeros((k, p));
        for (row, &y) in data.features().outer_iter().zip(data.labels()) {
            class_counts[y - 1] += 1;
            let mut m = class_means.row_mut(y - 1);
            m += &row;
        }
        for (c, count) in class_counts.iter().enumerate() {
            debug_assert!(*count > 0, "empty classes are rejected upstream");
            let mut m = class_means.row_mut(c);
            m /= *count as f64;
        }
        let priors = class_counts
            .iter()
            .map(|&c| c as f64 / n as f64)
            .collect::<Vec<_>>();

        let mut delta = Array2::<f64>::zeros((p, k - 1));
        for c in 0..k - 1 {
            let diff = &class_means.row(c + 1) - &class_means.row(0);
            delta.column_mut(c).assign(&diff);
        }

        let mut centered = data.features().to_owned();
        for (mut row, &y) in centered.outer_iter_mut().zip(data.labels()) {
            row -= &class_means.row(y - 1);
        }
        let denom = (n - k) as f64;

        let (diag, cov) = if dense {
            let mut cov = centered.t().dot(&centered);
            cov /= denom;
            let diag = cov.diag().to_vec();
            (diag, CovStore::Dense(cov))
        } else {
            let diag = centered
                .axis_iter(Axis(1))
                .map(|col| col.iter().map(|v| v * v).sum::<f64>() / denom)
                .collect();
            (
                diag,
                CovStore::OnDemand {
                    centered,
                    denom,
                    memo: Mutex::new(LruMemo::new(DEFAULT_MEMO_CAPACITY)),
                },
            )
        };
        let zero_variance = diag.iter().map(|&v| v == 0.0).collect();

        Ok(Self {
            n,
            p,
            k,
            class_counts,
            priors,
            class_means,
            delta,
            diag,
            zero_variance,
            cov,
        })
    }

    /// Column `j` of the pooled covariance (0-based).
    pub fn cov_column(&self, j: usize) -> CovCol<'_> {
        assert!(j < self.p, "feature index {j} out of range (p = {})", self.p);
        match &self.cov {
            // the covariance is symmetric, so row j of the dense store is column j
            CovStore::Dense(cov) => CovCol::Borrowed(
                cov.row(j)
                    .to_slice()
                    .expect("dense covariance is row-contiguous"),
            ),
            CovStore::OnDemand {
                centered,
                denom,
                memo,
            } => {
                if let Some(col) = memo.lock().unwrap().get(j) {
                    return CovCol::Shared(col);
                }
                let cj = centered.column(j);
                let mut col = vec![0.0; self.p];
                for (ci, out) in centered.axis_iter(Axis(1)).zip(col.iter_mut()) {
                    *out = ci.dot(&cj) / denom;
                }
                let col = Arc::new(col);
                memo.lock().unwrap().insert(j, Arc::clone(&col));
                CovCol::Shared(col)
            }
        }
    }

    pub fn cov_diag(&self, j: usize) -> f64 {
        self.diag[j]
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Features whose pooled within-class variance is exactly zero; the
    /// solver pins their coefficient blocks at zero.
    pub fn zero_variance(&self, j: usize) -> bool {
        self.zero_variance[j]
    }

    /// Mean differences, `p x (K - 1)`: column `c` contrasts class `c + 2`
    /// with class 1.
    pub fn delta(&self) -> ArrayView2<'_, f64> {
        self.delta.view()
    }

    /// Class means, `K x p`.
    pub fn class_means(&self) -> ArrayView2<'_, f64> {
        self.class_means.view()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.cov, CovStore::Dense(_))
    }

    pub fn dense_cov(&self) -> Option<ArrayView2<'_, f64>> {
        match &self.cov {
            CovStore::Dense(cov) => Some(cov.view()),
            CovStore::OnDemand { .. } => None,
        }
    }

    /// Resizes the on-demand column memo (no-op for dense storage); useful
    /// once the expected active-set size is known.
    pub fn set_memo_capacity(&self, capacity: usize) {
        if let CovStore::OnDemand { memo, .. } = &self.cov {
            memo.lock().unwrap().capacity = capacity.max(1);
        }
    }

    /// Test-only shortcut: statistics with a prescribed covariance and mean
    /// differences, uniform priors, and class means laid out consistently
    /// with `delta` (class 1 at the origin).
    #[cfg(test)]
    pub(crate) fn synthetic(cov: Array2<f64>, delta: Array2<f64>, n: usize) -> SuffStats {
        let p = cov.nrows();
        assert_eq!(cov.ncols(), p);
        assert_eq!(delta.nrows(), p);
        let k = delta.ncols() + 1;
        let mut class_means = Array2::zeros((k, p));
        for c in 0..k - 1 {
            class_means.row_mut(c + 1).assign(&delta.column(c));
        }
        let diag: Vec<f64> = cov.diag().to_vec();
        SuffStats {
            n,
            p,
            k,
            class_counts: vec![n / k; k],
            priors: vec![1.0 / k as f64; k],
            class_means,
            delta,
            zero_variance: diag.iter().map(|&v| v == 0.0).collect(),
            diag,
            cov: CovStore::Dense(cov),
        }
    }

    /// Statistics of the feature-standardized problem (each feature divided
    /// by its pooled within-class standard deviation), plus the scales used.
    /// Zero-variance features keep scale 1.
    pub fn standardized(&self) -> (SuffStats, Vec<f64>) {
        let scales: Vec<f64> = self
            .diag
            .iter()
            .map(|&v| if v == 0.0 { 1.0 } else { v.sqrt() })
            .collect();
        let inv = Array1::from_iter(scales.iter().map(|s| 1.0 / s));

        let mut class_means = self.class_means.clone();
        for mut row in class_means.outer_iter_mut() {
            row *= &inv;
        }
        let mut delta = self.delta.clone();
        for (mut row, s) in delta.outer_iter_mut().zip(&inv) {
            row *= *s;
        }
        let diag: Vec<f64> = self
            .diag
            .iter()
            .map(|&v| if v == 0.0 { 0.0 } else { 1.0 })
            .collect();

        let cov = match &self.cov {
            CovStore::Dense(cov) => {
                let mut scaled = cov.clone();
                for ((i, j), v) in scaled.indexed_iter_mut() {
                    *v *= inv[i] * inv[j];
                }
                CovStore::Dense(scaled)
            }
            CovStore::OnDemand {
                centered, denom, ..
            } => {
                let mut scaled = centered.clone();
                for mut row in scaled.outer_iter_mut() {
                    row *= &inv;
                }
                CovStore::OnDemand {
                    centered: scaled,
                    denom: *denom,
                    memo: Mutex::new(LruMemo::new(DEFAULT_MEMO_CAPACITY)),
                }
            }
        };

        (
            SuffStats {
                n: self.n,
                p: self.p,
                k: self.k,
                class_counts: self.class_counts.clone(),
                priors: self.priors.clone(),
                class_means,
                delta,
                diag: diag.clone(),
                zero_variance: diag.iter().map(|&v| v == 0.0).collect(),
                cov,
            },
            scales,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn toy_dataset() -> LabeledDataset {
        // class 1 = {(0,0),(2,0)}, class 2 = {(1,1),(1,3)}
        let x = array![[0.0, 0.0], [2.0, 0.0], [1.0, 1.0], [1.0, 3.0]];
        LabeledDataset::new(x, vec![1, 1, 2, 2], None, None).unwrap()
    }

    fn random_dataset(n: usize, p: usize, k: usize, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.random::<f64>() * 4.0 - 2.0);
        let labels = (0..n).map(|i| i % k + 1).collect();
        LabeledDataset::new(x, labels, None, None).unwrap()
    }

    /// Direct evaluation of the pooled covariance as the double sum over
    /// classes and samples, independent of the production path.
    fn brute_force_cov(data: &LabeledDataset) -> Array2<f64> {
        let (n, p, k) = (data.n(), data.p(), data.k());
        let x = data.features();
        let mut means = Array2::<f64>::zeros((k, p));
        let mut counts = vec![0.0; k];
        for (row, &y) in x.outer_iter().zip(data.labels()) {
            counts[y - 1] += 1.0;
            let mut m = means.row_mut(y - 1);
            m += &row;
        }
        for (c, cnt) in counts.iter().enumerate() {
            let mut m = means.row_mut(c);
            m /= *cnt;
        }
        let mut cov = Array2::<f64>::zeros((p, p));
        for (row, &y) in x.outer_iter().zip(data.labels()) {
            let d = &row - &means.row(y - 1);
            for i in 0..p {
                for j in 0..p {
                    cov[[i, j]] += d[i] * d[j];
                }
            }
        }
        cov / (n - k) as f64
    }

    #[test]
    fn hand_computed_example() {
        let stats = SuffStats::compute(&toy_dataset(), CovMode::Dense).unwrap();
        assert_eq!(stats.class_means().row(0).to_vec(), vec![1.0, 0.0]);
        assert_eq!(stats.class_means().row(1).to_vec(), vec![1.0, 2.0]);
        assert_eq!(stats.delta().column(0).to_vec(), vec![0.0, 2.0]);
        let cov = stats.dense_cov().unwrap();
        assert_eq!(cov[[0, 0]], 1.0);
        assert_eq!(cov[[0, 1]], 0.0);
        assert_eq!(cov[[1, 1]], 1.0);
        assert_eq!(&*stats.cov_column(0), &[1.0, 0.0]);
        assert_eq!(stats.priors(), &[0.5, 0.5]);
    }

    #[test]
    fn identical_rows_give_zero_covariance() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [5.0, -1.0], [5.0, -1.0]];
        let d = LabeledDataset::new(x, vec![1, 1, 2, 2], None, None).unwrap();
        let stats = SuffStats::compute(&d, CovMode::Dense).unwrap();
        assert!(stats.dense_cov().unwrap().iter().all(|&v| v == 0.0));
        assert!(stats.zero_variance(0) && stats.zero_variance(1));
    }

    #[test]
    fn duplicating_rows_rescales_covariance_by_denominator() {
        let d = random_dataset(20, 5, 3, 7);
        let stats = SuffStats::compute(&d, CovMode::Dense).unwrap();
        let rows: Vec<usize> = (0..d.n()).chain(0..d.n()).collect();
        let doubled = d.subset_rows(&rows).unwrap();
        let stats2 = SuffStats::compute(&doubled, CovMode::Dense).unwrap();
        assert_abs_diff_eq!(
            stats.class_means().to_owned(),
            stats2.class_means().to_owned(),
            epsilon = 1e-13
        );
        let (n, k) = (d.n() as f64, d.k() as f64);
        let scale = 2.0 * (n - k) / (2.0 * n - k);
        let expect = stats.dense_cov().unwrap().to_owned() * scale;
        let got = stats2.dense_cov().unwrap();
        assert_abs_diff_eq!(expect, got.to_owned(), epsilon = 1e-12);
        // cross-check against the definition directly
        assert_abs_diff_eq!(
            brute_force_cov(&doubled),
            got.to_owned(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn matches_brute_force_double_sum() {
        for seed in 0..4 {
            let d = random_dataset(37, 11, 4, seed);
            let stats = SuffStats::compute(&d, CovMode::Dense).unwrap();
            assert_abs_diff_eq!(
                brute_force_cov(&d),
                stats.dense_cov().unwrap().to_owned(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn dense_and_on_demand_agree() {
        let d = random_dataset(25, 8, 3, 11);
        let dense = SuffStats::compute(&d, CovMode::Dense).unwrap();
        let lazy = SuffStats::compute(&d, CovMode::OnDemand).unwrap();
        for j in 0..d.p() {
            let a = dense.cov_column(j);
            let b = lazy.cov_column(j);
            for (x, y) in a.iter().zip(b.iter()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(a[j], dense.cov_diag(j), epsilon = 0.0);
            assert_abs_diff_eq!(lazy.cov_diag(j), dense.cov_diag(j), epsilon = 1e-12);
        }
        // memoized second access returns the cached column bit-for-bit
        let first = lazy.cov_column(3).to_vec();
        let again = lazy.cov_column(3);
        assert_eq!(&*again, &first[..]);
    }

    #[test]
    fn covariance_is_positive_semidefinite() {
        let d = random_dataset(30, 10, 3, 13);
        let stats = SuffStats::compute(&d, CovMode::Dense).unwrap();
        let cov = stats.dense_cov().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let v = Array1::from_shape_fn(d.p(), |_| rng.random::<f64>() - 0.5);
            let q = v.dot(&cov.dot(&v));
            assert!(q >= -1e-10, "v'Sv = {q}");
        }
    }

    #[test]
    fn feature_permutation_permutes_stats() {
        let d = random_dataset(24, 6, 3, 17);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let dp = d.restrict_columns(&perm);
        let s = SuffStats::compute(&d, CovMode::Dense).unwrap();
        let sp = SuffStats::compute(&dp, CovMode::Dense).unwrap();
        for (new_j, &old_j) in perm.iter().enumerate() {
            assert_eq!(s.cov_diag(old_j), sp.cov_diag(new_j));
            assert_eq!(
                s.delta().row(old_j).to_vec(),
                sp.delta().row(new_j).to_vec()
            );
            for (new_i, &old_i) in perm.iter().enumerate() {
                assert_eq!(
                    s.dense_cov().unwrap()[[old_i, old_j]],
                    sp.dense_cov().unwrap()[[new_i, new_j]]
                );
            }
        }
    }

    #[test]
    fn standardization_scales_diag_to_one() {
        let d = random_dataset(40, 7, 3, 23);
        let stats = SuffStats::compute(&d, CovMode::Dense).unwrap();
        let (std, scales) = stats.standardized();
        for j in 0..d.p() {
            assert_abs_diff_eq!(std.cov_diag(j), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(scales[j], stats.cov_diag(j).sqrt(), epsilon = 0.0);
            for c in 0..d.k() - 1 {
                assert_abs_diff_eq!(
                    std.delta()[[j, c]],
                    stats.delta()[[j, c]] / scales[j],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn memo_eviction_keeps_results_correct() {
        let d = random_dataset(20, 12, 2, 31);
        let lazy = SuffStats::compute(&d, CovMode::OnDemand).unwrap();
        lazy.set_memo_capacity(2);
        let dense = SuffStats::compute(&d, CovMode::Dense).unwrap();
        for round in 0..3 {
            for j in 0..d.p() {
                let a = lazy.cov_column((j + round) % d.p());
                let b = dense.cov_column((j + round) % d.p());
                for (x, y) in a.iter().zip(b.iter()) {
                    assert_abs_diff_eq!(x, y, epsilon = 1e-12);
                }
            }
        }
    }
}
