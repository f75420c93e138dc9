//! End-to-end fitting: optional screening, standardization, the penalty
//! path, cross-validated selection, the final classifier, and prediction
//! through a persisted artifact.

use ndarray::{Array2, ArrayView2};

use crate::classify::{fit_projected_lda_with_priors, predict, Priors, ScreeningReport};
use crate::data::{ArtifactMetadata, LabeledDataset, ModelArtifact, SCHEMA_VERSION};
use crate::modelsel::{cross_validate, CVResult, CvOptions};
use crate::solver::{solve_path_with_grid, SolutionPath, SolverOptions};
use crate::stats::{CovMode, SuffStats};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Fixed penalty; skips cross-validation. Interpreted on the solved
    /// problem (the standardized one when `standardize` is on).
    pub lambda: Option<f64>,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub folds: usize,
    pub tol: f64,
    pub max_sweeps: usize,
    pub standardize: bool,
    pub seed: u64,
    /// Keep only the `d_n` best features by F statistic before fitting.
    pub screen: Option<usize>,
    pub priors: Priors,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lambda: None,
            n_lambda: 100,
            lambda_min_ratio: 0.05,
            folds: 5,
            tol: 1e-6,
            max_sweeps: 1000,
            standardize: true,
            seed: 42,
            screen: None,
            priors: Priors::Empirical,
        }
    }
}

pub struct FitResult {
    pub artifact: ModelArtifact,
    /// Path on the solved (screened, possibly standardized) problem.
    pub path: SolutionPath,
    pub cv: Option<CVResult>,
    pub selected_index: usize,
    pub screening: Option<ScreeningReport>,
}

/// Fits the full pipeline and assembles a persistable artifact. Fails with
/// a non-convergence error if the solve at the selected penalty hit the
/// sweep budget.
pub fn fit(data: &LabeledDataset, options: &FitOptions) -> Result<FitResult> {
    let (screening, working) = match options.screen {
        Some(d_n) => {
            let report = crate::classify::f_screen(data, d_n)?;
            let reduced = data.restrict_columns(&report.kept);
            (Some(report), reduced)
        }
        None => (None, data.clone()),
    };

    let stats = SuffStats::compute(&working, CovMode::Auto)?;
    let (solve_stats, scales) = if options.standardize {
        stats.standardized()
    } else {
        (stats, vec![1.0; working.p()])
    };

    let base = SolverOptions {
        tol: options.tol,
        max_sweeps: options.max_sweeps,
        ..SolverOptions::new(0.0)
    };

    let (grid, cv) = match options.lambda {
        Some(lambda) => {
            if !(lambda.is_finite() && lambda >= 0.0) {
                return Err(Error::InvalidInput("lambda must be finite and >= 0".into()));
            }
            (vec![lambda], None)
        }
        None => {
            let cv = cross_validate(
                &working,
                &CvOptions {
                    n_folds: options.folds,
                    n_lambda: options.n_lambda,
                    lambda_min_ratio: options.lambda_min_ratio,
                    tol: options.tol,
                    max_sweeps: options.max_sweeps,
                    standardize: options.standardize,
                    seed: options.seed,
                },
            )?;
            (cv.lambdas.clone(), Some(cv))
        }
    };
    let path = solve_path_with_grid(&solve_stats, &grid, &base)?;
    let selected_index = cv.as_ref().map(|c| c.best_index).unwrap_or(0);
    if !path.converged[selected_index] {
        return Err(Error::NonConvergence(format!(
            "no convergence within {} sweeps at the selected lambda {}",
            options.max_sweeps, grid[selected_index]
        )));
    }

    let inv_scales: Vec<f64> = scales.iter().map(|s| 1.0 / s).collect();
    let coef = path.solutions[selected_index].scaled_rows(&inv_scales);
    let classifier = fit_projected_lda_with_priors(&working, &coef, options.priors)?;

    let artifact = ModelArtifact {
        schema_version: SCHEMA_VERSION,
        coef,
        classifier,
        lambda: grid[selected_index],
        screening_map: screening.as_ref().map(|r| r.kept.clone()),
        metadata: ArtifactMetadata {
            tool: concat!("msda ", env!("CARGO_PKG_VERSION")).to_string(),
            seed: options.seed,
            label_names: working.label_names().to_vec(),
            feature_names: working.feature_names().map(<[String]>::to_vec),
        },
    };
    artifact.validate()?;

    Ok(FitResult {
        artifact,
        path,
        cv,
        selected_index,
        screening,
    })
}

/// Predicts class indices for raw feature rows, applying the artifact's
/// screening map when the input has the original (unscreened) width.
pub fn predict_with_artifact(artifact: &ModelArtifact, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    let reduced_p = artifact.coef.p();
    match &artifact.screening_map {
        None => predict(&artifact.classifier, x),
        Some(map) => {
            if x.ncols() == reduced_p {
                predict(&artifact.classifier, x)
            } else if x.ncols() > map.iter().copied().max().unwrap_or(0) {
                let reduced: Array2<f64> = x.select(ndarray::Axis(1), map);
                predict(&artifact.classifier, reduced.view())
            } else {
                Err(Error::InvalidInput(format!(
                    "{} input columns fit neither the screened width {} nor the original domain",
                    x.ncols(),
                    reduced_p
                )))
            }
        }
    }
}

/// Predicted original label strings instead of class indices.
pub fn predict_labels(artifact: &ModelArtifact, x: ArrayView2<'_, f64>) -> Result<Vec<String>> {
    let classes = predict_with_artifact(artifact, x)?;
    Ok(classes
        .into_iter()
        .map(|c| artifact.metadata.label_names[c - 1].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn informative_dataset(n_per: usize, p: usize, k: usize, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n_per * k, p), |(i, j)| {
            let class = i / n_per;
            rng.sample::<f64, _>(StandardNormal)
                + if j < k - 1 && j + 1 == class { 4.0 } else { 0.0 }
        });
        let labels = (0..n_per * k).map(|i| i / n_per + 1).collect();
        LabeledDataset::new(x, labels, None, None).unwrap()
    }

    #[test]
    fn fit_selects_informative_features_and_roundtrips() {
        let data = informative_dataset(30, 10, 3, 1);
        let result = fit(
            &data,
            &FitOptions {
                n_lambda: 40,
                ..FitOptions::default()
            },
        )
        .unwrap();
        let support = result.artifact.coef.active_blocks();
        assert!(support.contains(&0) && support.contains(&1), "{support:?}");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        result.artifact.save(&path).unwrap();
        let loaded = ModelArtifact::load(&path).unwrap();
        assert_eq!(loaded.coef, result.artifact.coef);
        assert_eq!(loaded.lambda, result.artifact.lambda);
        let a = predict_with_artifact(&result.artifact, data.features()).unwrap();
        let b = predict_with_artifact(&loaded, data.features()).unwrap();
        assert_eq!(a, b);
        // training error on this separated design is small
        let wrong = a
            .iter()
            .zip(data.labels())
            .filter(|(x, y)| x != y)
            .count();
        assert!(wrong as f64 / data.n() as f64 <= 0.10);
    }

    #[test]
    fn fixed_lambda_above_lambda_max_gives_prior_only_artifact() {
        let data = informative_dataset(20, 6, 3, 2);
        let result = fit(
            &data,
            &FitOptions {
                lambda: Some(1e6),
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!(result.artifact.coef.active_blocks().is_empty());
        assert!(result.artifact.classifier.is_zero_projection());
        assert!(result.cv.is_none());
    }

    #[test]
    fn screening_map_reduces_raw_input() {
        let data = informative_dataset(25, 12, 3, 3);
        let result = fit(
            &data,
            &FitOptions {
                screen: Some(5),
                n_lambda: 30,
                ..FitOptions::default()
            },
        )
        .unwrap();
        let map = result.artifact.screening_map.as_ref().unwrap();
        assert_eq!(map.len(), 5);
        assert_eq!(result.artifact.coef.p(), 5);
        // raw-width input is reduced internally
        let from_raw = predict_with_artifact(&result.artifact, data.features()).unwrap();
        let reduced = data.features().select(ndarray::Axis(1), map);
        let from_reduced = predict_with_artifact(&result.artifact, reduced.view()).unwrap();
        assert_eq!(from_raw, from_reduced);
        // a width that fits neither is rejected
        let bad = Array2::<f64>::zeros((2, 3));
        assert!(predict_with_artifact(&result.artifact, bad.view()).is_err());
    }

    #[test]
    fn corrupt_model_files_are_rejected() {
        let data = informative_dataset(20, 5, 2, 4);
        let result = fit(
            &data,
            &FitOptions {
                lambda: Some(0.05),
                ..FitOptions::default()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        result.artifact.save(&path).unwrap();

        // truncated file
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(ModelArtifact::load(&path).is_err());

        // version mismatch
        let bumped = text.replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
        std::fs::write(&path, bumped).unwrap();
        let err = ModelArtifact::load(&path).unwrap_err();
        assert!(err.to_string().contains("schema version"), "{err}");

        // inconsistent screening map is refused at save time
        let mut bad = result.artifact.clone();
        bad.screening_map = Some(vec![0, 1]);
        assert!(bad.save(&path).is_err());
    }
}
