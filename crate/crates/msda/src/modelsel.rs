//! Cross-validation over the penalty path and variable-selection scoring.


use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classify::{fit_projected_lda, predict};
use crate::data::LabeledDataset;
use crate::solver::{lambda_grid, lambda_max, solve_path_with_grid, SolverOptions};
use crate::stats::{CovMode, SuffStats};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct CvOptions {
    pub n_folds: usize,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    /// Solve on per-feature standardized statistics, un-scaling the
    /// coefficients before classification.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            n_folds: 5,
            n_lambda: 100,
            lambda_min_ratio: 0.05,
            tol: 1e-6,
            max_sweeps: 1000,
            standardize: true,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CVResult {
    /// Descending penalty grid shared by all folds, computed from the
    /// full-data statistics.
    pub lambdas: Vec<f64>,
    pub mean_cv_error: Vec<f64>,
    pub se_cv_error: Vec<f64>,
    pub best_lambda: f64,
    pub best_index: usize,
    /// Fold index of every row.
    pub fold_assignments: Vec<usize>,
    pub seed: u64,
}

/// Stratified fold assignment: within each class, rows are shuffled under
/// the seed and dealt round-robin, so per-fold class counts differ by at
/// most one.
fn stratified_folds(labels: &[usize], k: usize, n_folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0usize; labels.len()];
    for class in 1..=k {
        let mut rows: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == class)
            .map(|(i, _)| i)
            .collect();
        rows.shuffle(&mut rng);
        for (pos, row) in rows.into_iter().enumerate() {
            assign[row] = pos % n_folds;
        }
    }
    assign
}

/// Stratified k-fold cross-validation of the path: the grid comes from the
/// full-data statistics, each fold solves the path on its training part and
/// scores the held-out rows, and errors are averaged per penalty.
///
/// A draw whose training parts do not cover every class is re-drawn once
/// with `seed + 1`; a second failure is an error.
pub fn cross_validate(data: &LabeledDataset, options: &CvOptions) -> Result<CVResult> {
    if options.n_folds < 2 {
        return Err(Error::InvalidInput("n_folds must be >= 2".into()));
    }
    if options.n_folds > data.n() {
        return Err(Error::InvalidInput(format!(
            "{} folds for {} rows",
            options.n_folds,
            data.n()
        )));
    }
    if options.n_lambda < 2 {
        return Err(Error::InvalidInput("n_lambda must be >= 2".into()));
    }

    // shared grid from full-data statistics
    let full_stats = SuffStats::compute(data, CovMode::Auto)?;
    let lmax = if options.standardize {
        lambda_max(&full_stats.standardized().0)
    } else {
        lambda_max(&full_stats)
    };
    drop(full_stats);
    let lambdas = lambda_grid(lmax, options.n_lambda, options.lambda_min_ratio);

    // draw folds; re-draw once if a training part loses a class
    let mut assignment = None;
    for (attempt, seed) in [options.seed, options.seed + 1].into_iter().enumerate() {
        let assign = stratified_folds(data.labels(), data.k(), options.n_folds, seed);
        let ok = (0..options.n_folds).all(|f| {
            let train: Vec<usize> = (0..data.n()).filter(|&i| assign[i] != f).collect();
            data.subset_rows(&train).is_ok()
        });
        if ok {
            assignment = Some(assign);
            break;
        }
        if attempt == 1 {
            return Err(Error::InvalidData(
                "cross-validation folds lose an entire class even after a re-draw; \
                 every class needs at least two rows"
                    .into(),
            ));
        }
    }
    let assignment = assignment.unwrap();

    let fold_errors: Result<Vec<Vec<f64>>> = (0..options.n_folds)
        .into_par_iter()
        .map(|f| fold_error_curve(data, &assignment, f, &lambdas, options))
        .collect();
    let fold_errors = fold_errors?;

    let n_lambda = lambdas.len();
    let nf = options.n_folds as f64;
    let mut mean_cv_error = vec![0.0; n_lambda];
    let mut se_cv_error = vec![0.0; n_lambda];
    for l in 0..n_lambda {
        let mean: f64 = fold_errors.iter().map(|e| e[l]).sum::<f64>() / nf;
        let var: f64 = fold_errors
            .iter()
            .map(|e| (e[l] - mean).powi(2))
            .sum::<f64>()
            / (nf - 1.0);
        mean_cv_error[l] = mean;
        se_cv_error[l] = (var / nf).sqrt();
    }

    // ties break toward the larger lambda: scan the descending grid,
    // keeping the first strict minimum
    let mut best_index = 0;
    for l in 1..n_lambda {
        if mean_cv_error[l] < mean_cv_error[best_index] {
            best_index = l;
        }
    }

    Ok(CVResult {
        best_lambda: lambdas[best_index],
        best_index,
        lambdas,
        mean_cv_error,
        se_cv_error,
        fold_assignments: assignment,
        seed: options.seed,
    })
}

fn fold_error_curve(
    data: &LabeledDataset,
    assignment: &[usize],
    fold: usize,
    lambdas: &[f64],
    options: &CvOptions,
) -> Result<Vec<f64>> {
    let train_rows: Vec<usize> = (0..data.n()).filter(|&i| assignment[i] != fold).collect();
    let test_rows: Vec<usize> = (0..data.n()).filter(|&i| assignment[i] == fold).collect();
    let train = data.subset_rows(&train_rows)?;

    let stats = SuffStats::compute(&train, CovMode::Auto)?;
    let (solve_stats, scales) = if options.standardize {
        stats.standardized()
    } else {
        (stats, vec![1.0; data.p()])
    };
    let base = SolverOptions {
        tol: options.tol,
        max_sweeps: options.max_sweeps,
        ..SolverOptions::new(0.0)
    };
    let path = solve_path_with_grid(&solve_stats, lambdas, &base)?;

    let test_x = data.features().select(ndarray::Axis(0), &test_rows);
    let test_y: Vec<usize> = test_rows.iter().map(|&i| data.labels()[i]).collect();
    let inv_scales: Vec<f64> = scales.iter().map(|s| 1.0 / s).collect();

    let mut errors = Vec::with_capacity(lambdas.len());
    for coef in &path.solutions {
        let unscaled = coef.scaled_rows(&inv_scales);
        let classifier = fit_projected_lda(&train, &unscaled)?;
        let predicted = predict(&classifier, test_x.view())?;
        let wrong = predicted
            .iter()
            .zip(&test_y)
            .filter(|(a, b)| a != b)
            .count();
        errors.push(wrong as f64 / test_y.len() as f64);
    }
    Ok(errors)
}

/// Correct (`c`) and incorrect (`ic`) selection counts of an estimated
/// support against the true one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SelectionMetrics {
    pub c: usize,
    pub ic: usize,
}

pub fn selection_metrics(estimated: &[usize], truth: &[usize]) -> SelectionMetrics {
    let truth: std::collections::HashSet<usize> = truth.iter().copied().collect();
    let c = estimated.iter().filter(|j| truth.contains(j)).count();
    SelectionMetrics {
        c,
        ic: estimated.len() - c,
    }
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;
    use super::*;
    use rand_distr::StandardNormal;

    fn separable_dataset(n_per: usize, p: usize, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::<f64>::zeros((2 * n_per, p));
        let mut labels = Vec::new();
        for i in 0..2 * n_per {
            let class = i / n_per;
            for j in 0..p {
                x[[i, j]] = rng.sample::<f64, _>(StandardNormal) * 0.2
                    + if j == 0 { 4.0 * class as f64 } else { 0.0 };
            }
            labels.push(class + 1);
        }
        LabeledDataset::new(x, labels, None, None).unwrap()
    }

    fn noise_dataset(n_per: usize, p: usize, k: usize, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n_per * k, p), |_| rng.sample::<f64, _>(StandardNormal));
        let labels = (0..n_per * k).map(|i| i % k + 1).collect();
        LabeledDataset::new(x, labels, None, None).unwrap()
    }

    #[test]
    fn separable_data_reaches_near_zero_cv_error() {
        let data = separable_dataset(20, 6, 3);
        let result = cross_validate(&data, &CvOptions::default()).unwrap();
        let best_err = result.mean_cv_error[result.best_index];
        assert!(best_err <= 0.05, "best CV error {best_err}");
        assert!(result.best_lambda > 0.0);
    }

    #[test]
    fn label_noise_gives_chance_level_error() {
        let data = noise_dataset(40, 5, 2, 9);
        let result = cross_validate(&data, &CvOptions::default()).unwrap();
        let best_err = result.mean_cv_error[result.best_index];
        // chance level is 1 - 1/K = 0.5; allow Monte Carlo slack
        assert!(
            (best_err - 0.5).abs() <= 0.2,
            "chance-level data gave {best_err}"
        );
    }

    #[test]
    fn cross_validation_is_deterministic() {
        let data = separable_dataset(12, 4, 5);
        let a = cross_validate(&data, &CvOptions::default()).unwrap();
        let b = cross_validate(&data, &CvOptions::default()).unwrap();
        assert_eq!(a, b);
        let c = cross_validate(
            &data,
            &CvOptions {
                seed: 43,
                ..CvOptions::default()
            },
        )
        .unwrap();
        assert_ne!(a.fold_assignments, c.fold_assignments);
    }

    #[test]
    fn folds_partition_rows_and_respect_strata() {
        let data = noise_dataset(25, 3, 3, 2);
        let result = cross_validate(&data, &CvOptions::default()).unwrap();
        assert_eq!(result.fold_assignments.len(), data.n());
        for f in 0..5 {
            let count = result.fold_assignments.iter().filter(|&&a| a == f).count();
            assert!(count > 0);
            for class in 1..=3usize {
                let in_fold = (0..data.n())
                    .filter(|&i| result.fold_assignments[i] == f && data.labels()[i] == class)
                    .count();
                // 25 per class over 5 folds = exactly 5
                assert_eq!(in_fold, 5);
            }
        }
        // errors lie in [0, 1], se >= 0
        assert!(result
            .mean_cv_error
            .iter()
            .all(|&e| (0.0..=1.0).contains(&e)));
        assert!(result.se_cv_error.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn singleton_class_fails_after_redraw() {
        // class 3 has a single row: every fold draw strands it
        let mut x = Array2::<f64>::zeros((9, 2));
        for (i, mut row) in x.outer_iter_mut().enumerate() {
            row[0] = i as f64;
            row[1] = -(i as f64);
        }
        let labels = vec![1, 1, 1, 1, 2, 2, 2, 2, 3];
        let data = LabeledDataset::new(x, labels, None, None).unwrap();
        let err = cross_validate(&data, &CvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("re-draw"), "{err}");
    }

    #[test]
    fn selection_metrics_set_arithmetic() {
        let m = selection_metrics(&[0, 1, 2, 3, 4, 5, 6, 7], &[0, 1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(m, SelectionMetrics { c: 8, ic: 0 });
        let m = selection_metrics(&[], &[1, 2, 3]);
        assert_eq!(m, SelectionMetrics { c: 0, ic: 0 });
        let m = selection_metrics(&[0, 1, 8], &[0, 1, 2]);
        assert_eq!(m, SelectionMetrics { c: 2, ic: 1 });
    }
}
