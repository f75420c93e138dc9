//! The final classifier: classical LDA on the projected scores
//! `X' theta_2, ..., X' theta_K`, plus F-test screening and recovery of
//! Fisher's discriminant directions from a fitted coefficient matrix.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::eigen::{real_eigenpairs, sym_pinv};
use crate::solver::CoefMatrix;
use crate::stats::SuffStats;
use crate::{Error, Result};

/// Relative eigenvalue cutoff of the projected-covariance pseudo-inverse.
const PINV_REL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Priors {
    Empirical,
    Uniform,
}

/// Projection onto the discriminant scores plus the low-dimensional LDA
/// rule fitted there: projected class means, the (pseudo-)inverse of the
/// projected pooled covariance, and log priors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FittedClassifier {
    projection: Array2<f64>,
    proj_means: Array2<f64>,
    proj_prec: Array2<f64>,
    log_priors: Vec<f64>,
    projected_rank: usize,
    zero_projection: bool,
}

impl FittedClassifier {
    pub(crate) fn from_projected_parts(
        projection: Array2<f64>,
        proj_means: Array2<f64>,
        proj_cov: Array2<f64>,
        log_priors: Vec<f64>,
    ) -> Self {
        let zero_projection = projection.iter().all(|&v| v == 0.0);
        let (proj_prec, projected_rank) = sym_pinv(&proj_cov.view(), PINV_REL_TOL);
        Self {
            projection,
            proj_means,
            proj_prec,
            log_priors,
            projected_rank,
            zero_projection,
        }
    }

    /// The `p x (K - 1)` projection matrix.
    pub fn projection(&self) -> ArrayView2<'_, f64> {
        self.projection.view()
    }

    /// Projected class means, `K x (K - 1)`.
    pub fn proj_means(&self) -> ArrayView2<'_, f64> {
        self.proj_means.view()
    }

    pub fn proj_prec(&self) -> ArrayView2<'_, f64> {
        self.proj_prec.view()
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    pub fn projected_rank(&self) -> usize {
        self.projected_rank
    }

    /// True when the projection is identically zero, in which case the
    /// rule degenerates to predicting the largest prior.
    pub fn is_zero_projection(&self) -> bool {
        self.zero_projection
    }

    pub fn n_classes(&self) -> usize {
        self.log_priors.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (p, m) = self.projection.dim();
        let _ = p;
        if self.proj_means.dim() != (self.log_priors.len(), m) {
            return Err(Error::InvalidData(format!(
                "projected means are {:?}, expected ({}, {m})",
                self.proj_means.dim(),
                self.log_priors.len()
            )));
        }
        if self.proj_prec.dim() != (m, m) {
            return Err(Error::InvalidData("projected precision shape".into()));
        }
        let finite = self.projection.iter().all(|v| v.is_finite())
            && self.proj_means.iter().all(|v| v.is_finite())
            && self.proj_prec.iter().all(|v| v.is_finite())
            && self.log_priors.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidData(
                "classifier contains non-finite values".into(),
            ));
        }
        for i in 0..m {
            for j in 0..i {
                if self.proj_prec[[i, j]] != self.proj_prec[[j, i]] {
                    return Err(Error::InvalidData(
                        "projected precision is not symmetric".into(),
                    ));
                }
            }
        }
        let prior_sum: f64 = self.log_priors.iter().map(|lp| lp.exp()).sum();
        if (prior_sum - 1.0).abs() > 1e-12 * self.log_priors.len() as f64 {
            return Err(Error::InvalidData(format!(
                "priors sum to {prior_sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Fits classical LDA on the projected data with the given priors.
pub fn fit_projected_lda_with_priors(
    data: &LabeledDataset,
    coef: &CoefMatrix,
    priors: Priors,
) -> Result<FittedClassifier> {
    let (n, p, k) = (data.n(), data.p(), data.k());
    if coef.p() != p {
        return Err(Error::InvalidInput(format!(
            "coefficients have {} rows for {p} features",
            coef.p()
        )));
    }
    let m = coef.n_directions();
    if m != k - 1 {
        return Err(Error::InvalidInput(format!(
            "coefficients have {m} columns for {k} classes"
        )));
    }
    let z = data.features().dot(&coef.theta()); // n x m

    let mut counts = vec![0usize; k];
    let mut proj_means = Array2::<f64>::zeros((k, m));
    for (row, &y) in z.outer_iter().zip(data.labels()) {
        counts[y - 1] += 1;
        let mut mrow = proj_means.row_mut(y - 1);
        mrow += &row;
    }
    for (c, &count) in counts.iter().enumerate() {
        let mut mrow = proj_means.row_mut(c);
        mrow /= count as f64;
    }

    let mut proj_cov = Array2::<f64>::zeros((m, m));
    for (row, &y) in z.outer_iter().zip(data.labels()) {
        let d = &row - &proj_means.row(y - 1);
        for i in 0..m {
            for j in 0..m {
                proj_cov[[i, j]] += d[i] * d[j];
            }
        }
    }
    proj_cov /= (n - k) as f64;

    let log_priors = match priors {
        Priors::Empirical => counts
            .iter()
            .map(|&c| (c as f64 / n as f64).ln())
            .collect(),
        Priors::Uniform => vec![-(k as f64).ln(); k],
    };

    Ok(FittedClassifier::from_projected_parts(
        coef.theta().to_owned(),
        proj_means,
        proj_cov,
        log_priors,
    ))
}

/// Fits classical LDA on the projected data with empirical priors.
pub fn fit_projected_lda(data: &LabeledDataset, coef: &CoefMatrix) -> Result<FittedClassifier> {
    fit_projected_lda_with_priors(data, coef, Priors::Empirical)
}

/// Predicts class indices (`1..=K`) for the rows of `x`: the linear
/// discriminant score `(z - m_k / 2)' P m_k + log prior_k` is maximized,
/// ties broken toward the smallest class index.
pub fn predict(classifier: &FittedClassifier, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    let p = classifier.projection.nrows();
    if x.ncols() != p {
        return Err(Error::InvalidInput(format!(
            "{} input columns, classifier expects {p}",
            x.ncols()
        )));
    }
    for (r, row) in x.outer_iter().enumerate() {
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature value in row {r}"
            )));
        }
    }
    let k = classifier.n_classes();
    let z = x.dot(&classifier.projection); // rows x m
    // per-class linear form: w_k = P m_k, bias_k = -1/2 m_k' P m_k + log prior
    let w = classifier.proj_means.dot(&classifier.proj_prec); // K x m (P symmetric)
    let mut bias = vec![0.0f64; k];
    for c in 0..k {
        bias[c] =
            -0.5 * w.row(c).dot(&classifier.proj_means.row(c)) + classifier.log_priors[c];
    }
    let mut out = Vec::with_capacity(z.nrows());
    for zrow in z.outer_iter() {
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for c in 0..k {
            let score = w.row(c).dot(&zrow) + bias[c];
            if score > best_score {
                best_score = score;
                best = c;
            }
        }
        out.push(best + 1);
    }
    Ok(out)
}

/// Error rate of `classifier` on a labeled dataset.
pub fn error_rate(classifier: &FittedClassifier, data: &LabeledDataset) -> Result<f64> {
    let predicted = predict(classifier, data.features())?;
    let wrong = predicted
        .iter()
        .zip(data.labels())
        .filter(|(a, b)| a != b)
        .count();
    Ok(wrong as f64 / data.n() as f64)
}

/// F-test screening output: every statistic, and the indices (ascending)
/// of the `d_n` largest, ties broken toward the lower index.
#[derive(Clone, Debug)]
pub struct ScreeningReport {
    pub f_stats: Vec<f64>,
    pub kept: Vec<usize>,
    pub d_n: usize,
}

/// One-way ANOVA F statistic per feature: between-class over within-class
/// variance. A zero within-class sum of squares yields `+inf` so perfectly
/// separating features rank first.
pub fn f_screen(data: &LabeledDataset, d_n: usize) -> Result<ScreeningReport> {
    let (n, p, k) = (data.n(), data.p(), data.k());
    if d_n == 0 || d_n > p {
        return Err(Error::InvalidInput(format!(
            "d_n = {d_n} outside 1..={p}"
        )));
    }
    let stats = SuffStats::compute(data, crate::stats::CovMode::OnDemand)?;
    let grand = data.features().mean_axis(Axis(0)).unwrap();
    let means = stats.class_means();
    let counts = stats.class_counts();
    let mut f_stats = vec![0.0f64; p];
    for j in 0..p {
        let between: f64 = (0..k)
            .map(|c| counts[c] as f64 * (means[[c, j]] - grand[j]).powi(2))
            .sum::<f64>()
            / (k - 1) as f64;
        // cov_diag already is within-class SS over (n - K)
        let within = stats.cov_diag(j);
        f_stats[j] = if within == 0.0 {
            f64::INFINITY
        } else {
            between / within
        };
    }
    let _ = n;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        f_stats[b]
            .partial_cmp(&f_stats[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = order.into_iter().take(d_n).collect();
    kept.sort_unstable();
    Ok(ScreeningReport { f_stats, kept, d_n })
}

/// Fisher discriminant directions recovered from a sparse coefficient
/// matrix, columns ordered by descending eigenvalue. Rows outside the
/// coefficient support are exactly zero.
#[derive(Clone, Debug)]
pub struct FisherDirections {
    pub eta: Array2<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Recovers Fisher's directions as the right eigenvectors, for positive
/// eigenvalues, of the support-restricted product of the zero-padded
/// coefficients, the centering projector `I - 11'/K`, and the transposed
/// prior-weighted mean deviations.
pub fn recover_fisher(coef: &CoefMatrix, stats: &SuffStats) -> FisherDirections {
    let p = coef.p();
    let k = stats.k();
    let support = coef.active_blocks();
    let d = support.len();
    if d == 0 {
        return FisherDirections {
            eta: Array2::zeros((p, 0)),
            eigenvalues: Vec::new(),
        };
    }

    // theta0 on the support: column 0 is zero (class 1), then the estimate
    let mut theta0 = Array2::<f64>::zeros((d, k));
    for (r, &j) in support.iter().enumerate() {
        for c in 0..k - 1 {
            theta0[[r, c + 1]] = coef.theta()[[j, c]];
        }
    }
    // prior-weighted grand mean and the centered class means on the support
    let means = stats.class_means();
    let priors = stats.priors();
    let mut grand = Array1::<f64>::zeros(stats.p());
    for c in 0..k {
        grand.scaled_add(priors[c], &means.row(c));
    }
    let mut delta0 = Array2::<f64>::zeros((d, k));
    for (r, &j) in support.iter().enumerate() {
        for c in 0..k {
            delta0[[r, c]] = means[[c, j]] - grand[j];
        }
    }
    let centering = Array2::from_shape_fn((k, k), |(i, j)| {
        (if i == j { 1.0 } else { 0.0 }) - 1.0 / k as f64
    });
    let m = theta0.dot(&centering).dot(&delta0.t()); // d x d

    let scale = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return FisherDirections {
            eta: Array2::zeros((p, 0)),
            eigenvalues: Vec::new(),
        };
    }
    let pairs = real_eigenpairs(&m.view(), 1e-10 * scale, 1e-8 * scale);
    let keep = pairs.len().min(k - 1).min(d);
    let mut eta = Array2::<f64>::zeros((p, keep));
    let mut eigenvalues = Vec::with_capacity(keep);
    for (c, (lam, v)) in pairs.into_iter().take(keep).enumerate() {
        eigenvalues.push(lam);
        for (r, &j) in support.iter().enumerate() {
            eta[[j, c]] = v[r];
        }
    }
    FisherDirections { eta, eigenvalues }
}
