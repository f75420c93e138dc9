//! Binary-case equivalence checks: the two-class group-lasso direction is
//! proportional to the DSDA (lasso-regression) direction at a mapped
//! penalty and, rescaled to unit mean-difference projection, satisfies the
//! stationarity conditions of the constrained ROAD program.

use ndarray::Array1;

use crate::data::LabeledDataset;
use crate::solver::{self, SolverOptions};
use crate::stats::{CovMode, SuffStats};
use crate::{Error, Result};

/// An l1-penalized least-squares discriminant fit on raw class labels.
#[derive(Clone, Debug)]
pub struct DsdaSolution {
    pub direction: Array1<f64>,
    pub intercept: f64,
    pub kkt_residual: f64,
    pub sweeps: usize,
}

const DSDA_KKT_TARGET: f64 = 1e-8;

/// Solves `min sum_i (y_i - t0 - x_i' t)^2 + lambda ||t||_1` with the raw
/// labels `y_i` in `{1, 2}` as the response, by coordinate descent driven
/// to a KKT residual of at most 1e-8.
pub fn solve_dsda(data: &LabeledDataset, lambda: f64) -> Result<DsdaSolution> {
    if data.k() != 2 {
        return Err(Error::InvalidInput(format!(
            "DSDA needs a binary problem, got K = {}",
            data.k()
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidInput("lambda must be finite and >= 0".into()));
    }
    let (n, p) = (data.n(), data.p());
    let x = data.features();
    let y: Vec<f64> = data.labels().iter().map(|&c| c as f64).collect();
    let ymean = y.iter().sum::<f64>() / n as f64;
    let xmean = x.mean_axis(ndarray::Axis(0)).unwrap();

    let mut xc = x.to_owned();
    for mut row in xc.outer_iter_mut() {
        row -= &xmean;
    }
    let gram = xc.t().dot(&xc); // p x p
    let mut b = Array1::<f64>::zeros(p);
    for (row, &yi) in xc.outer_iter().zip(&y) {
        b.scaled_add(yi - ymean, &row);
    }

    let mut theta = Array1::<f64>::zeros(p);
    let mut u = Array1::<f64>::zeros(p); // gram * theta
    let half = lambda / 2.0;
    let kkt = |theta: &Array1<f64>, u: &Array1<f64>| -> f64 {
        let mut worst = 0.0f64;
        for j in 0..p {
            let g = 2.0 * (u[j] - b[j]);
            let r = if theta[j] != 0.0 {
                (g + lambda * theta[j].signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            worst = worst.max(r);
        }
        worst
    };

    let max_sweeps = 200_000usize;
    let mut sweeps = 0;
    let mut residual = kkt(&theta, &u);
    while residual > DSDA_KKT_TARGET && sweeps < max_sweeps {
        for _ in 0..16 {
            for j in 0..p {
                let gjj = gram[[j, j]];
                if gjj == 0.0 {
                    continue;
                }
                let c = b[j] - (u[j] - gjj * theta[j]);
                let new = if c.abs() <= half {
                    0.0
                } else {
                    (c - c.signum() * half) / gjj
                };
                let d = new - theta[j];
                if d != 0.0 {
                    u.scaled_add(d, &gram.column(j).to_owned());
                    theta[j] = new;
                }
            }
            sweeps += 1;
        }
        // refresh the cache before certifying, then re-check optimality
        u = gram.dot(&theta);
        residual = kkt(&theta, &u);
    }

    let intercept = ymean - xmean.dot(&theta);
    Ok(DsdaSolution {
        direction: theta,
        intercept,
        kkt_residual: residual,
        sweeps,
    })
}

/// Per-penalty equivalence report.
#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub lambda: f64,
    /// True when the group-lasso solution is identically zero at this
    /// penalty, so no direction comparison exists.
    pub skipped: bool,
    /// `theta_msda' (mu2_hat - mu1_hat)`.
    pub c0: f64,
    /// `theta_dsda(lambda)' (mu2_hat - mu1_hat)`.
    pub c1: f64,
    /// Penalty ratio of the DSDA solve compared against the group-lasso
    /// one.
    pub a: f64,
    pub cosine_msda_dsda: f64,
    pub road_kkt_residual: f64,
}

/// Descending penalty grid for the binary problem (no standardization, so
/// the penalized objective is checked verbatim).
pub fn equivalence_lambda_grid(
    data: &LabeledDataset,
    n_grid: usize,
    ratio: f64,
) -> Result<Vec<f64>> {
    let stats = SuffStats::compute(data, CovMode::Auto)?;
    Ok(solver::lambda_grid(
        solver::lambda_max(&stats),
        n_grid.max(1),
        ratio,
    ))
}

/// Checks the binary equivalences on a grid of penalties: solves the
/// two-class group lasso, maps the penalty onto the DSDA problem, compares
/// directions by cosine, and evaluates the ROAD stationarity residual of
/// the rescaled direction.
///
/// The penalty map comes from matching the two stationarity systems under
/// this crate's conventions (pooled covariance with denominator `n - 2`,
/// raw-label least squares): with `g = n1 n2 / n`,
/// `a = 2 (n - 2) g / ((n - 2) + g c0)`.
pub fn check_proposition1(
    data: &LabeledDataset,
    lambdas: &[f64],
) -> Result<Vec<EquivalenceReport>> {
    if data.k() != 2 {
        return Err(Error::InvalidInput(format!(
            "the equivalence check needs a binary problem, got K = {}",
            data.k()
        )));
    }
    let stats = SuffStats::compute(data, CovMode::Auto)?;
    let delta = stats.delta().column(0).to_owned();
    let n = data.n() as f64;
    let n1 = stats.class_counts()[0] as f64;
    let n2 = stats.class_counts()[1] as f64;
    let g = n1 * n2 / n;

    let mut reports = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let opts = SolverOptions {
            max_sweeps: 100_000,
            ..SolverOptions::new(lambda).with_tol(1e-12)
        };
        let (coef, _) = solver::solve(&stats, &opts, None)?;
        let theta_msda = coef.theta().column(0).to_owned();
        let c0 = theta_msda.dot(&delta);
        if coef.active_blocks().is_empty() {
            reports.push(EquivalenceReport {
                lambda,
                skipped: true,
                c0: 0.0,
                c1: 0.0,
                a: 0.0,
                cosine_msda_dsda: f64::NAN,
                road_kkt_residual: f64::NAN,
            });
            continue;
        }

        let c1 = solve_dsda(data, lambda)?.direction.dot(&delta);
        let a = 2.0 * (n - 2.0) * g / ((n - 2.0) + g * c0);
        let dsda = solve_dsda(data, a * lambda)?;
        let cosine = {
            let num = theta_msda.dot(&dsda.direction);
            let den = theta_msda.dot(&theta_msda).sqrt()
                * dsda.direction.dot(&dsda.direction).sqrt();
            if den == 0.0 {
                f64::NAN
            } else {
                num / den
            }
        };
        let road = road_stationarity_residual(&stats, &theta_msda, &delta, c0, lambda);

        reports.push(EquivalenceReport {
            lambda,
            skipped: false,
            c0,
            c1,
            a,
            cosine_msda_dsda: cosine,
            road_kkt_residual: road,
        });
    }
    Ok(reports)
}

/// Stationarity residual of the constrained ROAD program
/// `min 1/2 t' S t + (lambda/|c0|) ||t||_1  s.t.  t' delta = 1`
/// at the candidate `t = theta / c0`: the Lagrange multiplier is fitted on
/// the active coordinates, inactive coordinates must stay inside the
/// subgradient bound, and the constraint itself is part of the residual.
fn road_stationarity_residual(
    stats: &SuffStats,
    theta: &Array1<f64>,
    delta: &Array1<f64>,
    c0: f64,
    lambda: f64,
) -> f64 {
    let p = theta.len();
    let penalty = lambda / c0.abs();
    let t: Array1<f64> = theta.mapv(|v| v / c0);
    // S t over the support
    let mut st = Array1::<f64>::zeros(p);
    for j in 0..p {
        if t[j] != 0.0 {
            let col = stats.cov_column(j);
            for (l, &cl) in col.iter().enumerate() {
                st[l] += cl * t[j];
            }
        }
    }
    // least-squares multiplier over active coordinates
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..p {
        if t[j] != 0.0 {
            num += delta[j] * (st[j] + penalty * t[j].signum());
            den += delta[j] * delta[j];
        }
    }
    let nu = if den > 0.0 { num / den } else { 0.0 };
    let mut residual = (t.dot(delta) - 1.0).abs();
    for j in 0..p {
        if t[j] != 0.0 {
            residual = residual.max((st[j] + penalty * t[j].signum() - nu * delta[j]).abs());
        } else {
            residual = residual.max(((st[j] - nu * delta[j]).abs() - penalty).max(0.0));
        }
    }
    residual
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn binary_gaussian(n_per: usize, p: usize, shift: f64, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((2 * n_per, p), |(i, j)| {
            rng.sample::<f64, _>(StandardNormal)
                + if i >= n_per && j < 3 { shift } else { 0.0 }
        });
        let labels = (0..2 * n_per).map(|i| i / n_per + 1).collect();
        LabeledDataset::new(x, labels, None, None).unwrap()
    }

    #[test]
    fn dsda_shrinks_to_zero_for_large_penalties() {
        let data = binary_gaussian(30, 8, 1.0, 1);
        let sol = solve_dsda(&data, 1e6).unwrap();
        assert!(sol.direction.iter().all(|&v| v == 0.0));
        assert!(sol.kkt_residual <= DSDA_KKT_TARGET);
        // intercept is the response mean
        assert_abs_diff_eq!(sol.intercept, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn dsda_at_zero_penalty_is_ordinary_least_squares() {
        let data = binary_gaussian(40, 6, 0.8, 3);
        let sol = solve_dsda(&data, 0.0).unwrap();
        // normal-equations oracle on the centered problem
        let x = data.features();
        let xmean = x.mean_axis(ndarray::Axis(0)).unwrap();
        let mut xc = x.to_owned();
        for mut row in xc.outer_iter_mut() {
            row -= &xmean;
        }
        let y: Vec<f64> = data.labels().iter().map(|&c| c as f64).collect();
        let ymean = 1.5;
        let gram = xc.t().dot(&xc);
        let mut b = Array1::<f64>::zeros(6);
        for (row, &yi) in xc.outer_iter().zip(&y) {
            b.scaled_add(yi - ymean, &row);
        }
        let na_g = crate::eigen::to_na(&gram.view());
        let na_b = nalgebra::DVector::from_iterator(6, b.iter().copied());
        let ols = na_g.lu().solve(&na_b).unwrap();
        for j in 0..6 {
            assert_abs_diff_eq!(sol.direction[j], ols[j], epsilon = 1e-8);
        }
    }

    #[test]
    fn dsda_on_orthonormal_design_is_coordinatewise_soft_thresholding() {
        // orthonormalize centered columns so the gram matrix is the identity
        let n = 20;
        let p = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut cols: Vec<Array1<f64>> = Vec::new();
        for _ in 0..p {
            let mut v = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
            let mean = v.sum() / n as f64;
            v.mapv_inplace(|x| x - mean);
            for c in &cols {
                let proj = v.dot(c);
                v.scaled_add(-proj, c);
            }
            let norm = v.dot(&v).sqrt();
            v.mapv_inplace(|x| x / norm);
            cols.push(v);
        }
        let mut x = Array2::zeros((n, p));
        for (j, c) in cols.iter().enumerate() {
            x.column_mut(j).assign(c);
        }
        let labels: Vec<usize> = (0..n).map(|i| i % 2 + 1).collect();
        let data = LabeledDataset::new(x.clone(), labels.clone(), None, None).unwrap();

        let lambda = 0.08;
        let sol = solve_dsda(&data, lambda).unwrap();
        // frozen closed form: theta_j = soft(b_j, lambda / 2) since G = I
        let y: Vec<f64> = labels.iter().map(|&c| c as f64).collect();
        let ymean = y.iter().sum::<f64>() / n as f64;
        let xmean = x.mean_axis(ndarray::Axis(0)).unwrap();
        for j in 0..p {
            let mut bj = 0.0;
            for i in 0..n {
                bj += (x[[i, j]] - xmean[j]) * (y[i] - ymean);
            }
            let expect = if bj.abs() <= lambda / 2.0 {
                0.0
            } else {
                bj - bj.signum() * lambda / 2.0
            };
            assert_abs_diff_eq!(sol.direction[j], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn proposition1_holds_on_random_binary_data() {
        let data = binary_gaussian(30, 12, 0.9, 11);
        let grid = equivalence_lambda_grid(&data, 8, 0.05).unwrap();
        let reports = check_proposition1(&data, &grid).unwrap();
        assert!(reports[0].skipped, "lambda_max entry must be skipped");
        let mut checked = 0;
        for r in &reports {
            if r.skipped {
                continue;
            }
            checked += 1;
            assert!(
                r.cosine_msda_dsda >= 1.0 - 1e-6,
                "lambda {}: cosine {}",
                r.lambda,
                r.cosine_msda_dsda
            );
            assert!(
                r.road_kkt_residual <= 1e-6,
                "lambda {}: road residual {}",
                r.lambda,
                r.road_kkt_residual
            );
            assert!(r.c0 > 0.0);
            assert!(r.a > 0.0);
        }
        assert!(checked >= 5);
    }

    #[test]
    fn equivalence_is_scale_free() {
        let base = binary_gaussian(25, 10, 0.8, 13);
        let doubled = LabeledDataset::new(
            base.features().mapv(|v| 2.0 * v),
            base.labels().to_vec(),
            None,
            None,
        )
        .unwrap();
        for data in [&base, &doubled] {
            let grid = equivalence_lambda_grid(data, 6, 0.1).unwrap();
            for r in check_proposition1(data, &grid).unwrap() {
                if !r.skipped {
                    assert!(r.cosine_msda_dsda >= 1.0 - 1e-6);
                }
            }
        }
    }

    #[test]
    fn non_binary_input_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = Array2::from_shape_fn((12, 4), |_| rng.sample::<f64, _>(StandardNormal));
        let labels = (0..12).map(|i| i % 3 + 1).collect();
        let data = LabeledDataset::new(x, labels, None, None).unwrap();
        assert!(check_proposition1(&data, &[0.1]).is_err());
        assert!(solve_dsda(&data, 0.1).is_err());
    }
}
