//! Blockwise coordinate descent for the group-lasso penalized discriminant
//! problem
//!
//! ```text
//!   min over theta_2..theta_K   sum_k { 1/2 theta_k' S theta_k - delta_k' theta_k }
//!                               + lambda * sum_j ||theta_(.j)||_2
//! ```
//!
//! where `S` is the pooled within-class covariance and `delta_k` the mean
//! difference of class `k` against class 1. Each block (one feature's row
//! of coefficients across classes) has a closed-form minimizer: a group
//! soft-threshold of the partial residual, with threshold `lambda / s_jj`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::stats::SuffStats;
use crate::{Error, Result};

/// The `p x (K - 1)` discriminant-direction estimate plus its exact
/// feature-level support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefMatrix {
    theta: Array2<f64>,
    active: Vec<usize>,
}

impl CoefMatrix {
    pub fn zeros(p: usize, n_directions: usize) -> Self {
        Self {
            theta: Array2::zeros((p, n_directions)),
            active: Vec::new(),
        }
    }

    /// Wraps a coefficient matrix, recomputing the active set exactly.
    pub fn from_theta(theta: Array2<f64>) -> Self {
        let active = active_rows(&theta.view());
        Self { theta, active }
    }

    pub fn theta(&self) -> ArrayView2<'_, f64> {
        self.theta.view()
    }

    /// Feature indices whose coefficient row is not identically zero,
    /// ascending.
    pub fn active_blocks(&self) -> &[usize] {
        &self.active
    }

    pub fn p(&self) -> usize {
        self.theta.nrows()
    }

    /// Number of discriminant directions, `K - 1`.
    pub fn n_directions(&self) -> usize {
        self.theta.ncols()
    }

    pub fn row_norm(&self, j: usize) -> f64 {
        self.theta.row(j).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Row-rescaled copy (used to undo feature standardization); the active
    /// set is recomputed.
    pub fn scaled_rows(&self, factors: &[f64]) -> CoefMatrix {
        assert_eq!(factors.len(), self.p());
        let mut theta = self.theta.clone();
        for (mut row, &f) in theta.outer_iter_mut().zip(factors) {
            row *= f;
        }
        Self::from_theta(theta)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidData(
                "coefficients contain non-finite values".into(),
            ));
        }
        if self.active != active_rows(&self.theta.view()) {
            return Err(Error::InvalidData(
                "recorded active set does not match the nonzero rows".into(),
            ));
        }
        Ok(())
    }
}

fn active_rows(theta: &ArrayView2<'_, f64>) -> Vec<usize> {
    theta
        .outer_iter()
        .enumerate()
        .filter(|(_, row)| row.iter().any(|&v| v != 0.0))
        .map(|(j, _)| j)
        .collect()
}

/// Group soft-threshold in place: `v <- v * (1 - t / ||v||)+`, with the
/// convention that `v` becomes zero when `||v|| = 0`.
pub fn group_soft_threshold(v: &mut [f64], t: f64) {
    debug_assert!(t >= 0.0);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= t {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else if t > 0.0 {
        let factor = 1.0 - t / norm;
        v.iter_mut().for_each(|x| *x *= factor);
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub lambda: f64,
    /// Convergence: max-abs coefficient change over a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Iterate the current active set to convergence between full sweeps.
    pub active_set: bool,
    /// Record the objective after every sweep in the diagnostics.
    pub track_objective: bool,
}

impl SolverOptions {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            tol: 1e-6,
            max_sweeps: 1000,
            active_set: true,
            track_objective: false,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidInput("lambda must be finite and >= 0".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput("tol must be > 0".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidInput("max_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Diagnostics {
    pub sweeps: usize,
    pub last_max_change: f64,
    pub converged: bool,
    pub kkt_residual: f64,
    /// Objective after each sweep, present when requested in the options.
    pub objective_trace: Vec<f64>,
}

/// Coordinate-descent state: the iterate and the cached product
/// `u = S * theta`, updated incrementally as blocks move.
#[derive(Clone, Debug)]
pub struct SolverState {
    theta: Array2<f64>,
    u: Array2<f64>,
    sweep_count: usize,
    last_max_change: f64,
    scratch: Vec<f64>,
}

impl SolverState {
    /// Starts from the warm-start coefficients (or zero). Rows of
    /// zero-variance features are pinned at zero.
    pub fn new(stats: &SuffStats, warm: Option<&CoefMatrix>) -> Self {
        let (p, m) = (stats.p(), stats.k() - 1);
        let mut theta = match warm {
            Some(w) => {
                assert_eq!(w.theta.dim(), (p, m), "warm start has wrong shape");
                w.theta.clone()
            }
            None => Array2::zeros((p, m)),
        };
        for j in 0..p {
            if stats.zero_variance(j) {
                theta.row_mut(j).fill(0.0);
            }
        }
        let mut state = Self {
            theta,
            u: Array2::zeros((p, m)),
            sweep_count: 0,
            last_max_change: f64::INFINITY,
            scratch: vec![0.0; 2 * m],
        };
        state.resync(stats);
        state
    }

    /// Recomputes `u = S * theta` from scratch, discarding accumulated
    /// incremental-update rounding.
    pub fn resync(&mut self, stats: &SuffStats) {
        self.u.fill(0.0);
        let active = active_rows(&self.theta.view());
        for &j in &active {
            let col = stats.cov_column(j);
            let row = self.theta.row(j).to_owned();
            for (mut urow, &c) in self.u.outer_iter_mut().zip(col.iter()) {
                if c != 0.0 {
                    urow.scaled_add(c, &row);
                }
            }
        }
    }

    pub fn theta(&self) -> ArrayView2<'_, f64> {
        self.theta.view()
    }

    pub fn sweep_count(&self) -> usize {
        self.sweep_count
    }

    pub fn last_max_change(&self) -> f64 {
        self.last_max_change
    }

    pub fn into_coef(self) -> CoefMatrix {
        CoefMatrix::from_theta(self.theta)
    }

    fn active_set(&self) -> Vec<bool> {
        self.theta
            .outer_iter()
            .map(|row| row.iter().any(|&v| v != 0.0))
            .collect()
    }
}

/// Exact minimization of block `j` given all other blocks; returns the
/// max-abs coefficient change. Zero-variance blocks are left pinned.
///
/// The shrinkage test runs on the unscaled partial residual `r` (so that
/// `||r|| <= lambda` compares the same floats as `lambda_max` and the zero
/// rule holds exactly); the surviving block is `r / s_jj * (1 - lambda / ||r||)`,
/// the group soft-threshold of `r / s_jj` at `lambda / s_jj`.
pub fn block_update(state: &mut SolverState, stats: &SuffStats, j: usize, lambda: f64) -> f64 {
    let sjj = stats.cov_diag(j);
    if sjj == 0.0 {
        return 0.0;
    }
    let m = state.theta.ncols();
    let (tilde, delta) = state.scratch.split_at_mut(m);
    let delta_hat = stats.delta();
    let theta = state.theta.as_slice_mut().expect("theta is row-major");
    let u = state.u.as_slice_mut().expect("u is row-major");
    let base = j * m;
    let drow = delta_hat.row(j);
    for c in 0..m {
        tilde[c] = drow[c] - (u[base + c] - sjj * theta[base + c]);
    }
    let rnorm = tilde.iter().map(|x| x * x).sum::<f64>().sqrt();
    if rnorm <= lambda {
        tilde.iter_mut().for_each(|x| *x = 0.0);
    } else {
        let factor = (1.0 - lambda / rnorm) / sjj;
        tilde.iter_mut().for_each(|x| *x *= factor);
    }

    let mut max_change = 0.0f64;
    let mut moved = false;
    for c in 0..m {
        delta[c] = tilde[c] - theta[base + c];
        max_change = max_change.max(delta[c].abs());
        moved |= delta[c] != 0.0;
    }
    if moved {
        let col = stats.cov_column(j);
        let cols = &col[..u.len() / m];
        match m {
            1 => {
                let d = delta[0];
                for (uu, &cl) in u.iter_mut().zip(cols) {
                    *uu += cl * d;
                }
            }
            2 => {
                let (d0, d1) = (delta[0], delta[1]);
                for (row, &cl) in u.chunks_exact_mut(2).zip(cols) {
                    row[0] += cl * d0;
                    row[1] += cl * d1;
                }
            }
            3 => {
                let (d0, d1, d2) = (delta[0], delta[1], delta[2]);
                for (row, &cl) in u.chunks_exact_mut(3).zip(cols) {
                    row[0] += cl * d0;
                    row[1] += cl * d1;
                    row[2] += cl * d2;
                }
            }
            _ => {
                for (row, &cl) in u.chunks_exact_mut(m).zip(cols) {
                    if cl != 0.0 {
                        for (r, &d) in row.iter_mut().zip(&*delta) {
                            *r += cl * d;
                        }
                    }
                }
            }
        }
        theta[base..base + m].copy_from_slice(tilde);
    }
    max_change
}

/// Smallest penalty at which the all-zero solution is optimal:
/// the largest mean-difference group norm over positive-variance features.
pub fn lambda_max(stats: &SuffStats) -> f64 {
    let delta = stats.delta();
    (0..stats.p())
        .filter(|&j| !stats.zero_variance(j))
        .map(|j| delta.row(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn sigma_theta(stats: &SuffStats, coef: &CoefMatrix) -> Array2<f64> {
    let mut st = Array2::zeros(coef.theta.dim());
    for &j in &coef.active {
        let col = stats.cov_column(j);
        let row = coef.theta.row(j);
        for (mut srow, &c) in st.outer_iter_mut().zip(col.iter()) {
            if c != 0.0 {
                srow.scaled_add(c, &row);
            }
        }
    }
    st
}

/// The penalized objective value at `coef`.
pub fn objective(stats: &SuffStats, coef: &CoefMatrix, lambda: f64) -> f64 {
    let st = sigma_theta(stats, coef);
    let quad = 0.5 * coef.theta.iter().zip(st.iter()).map(|(a, b)| a * b).sum::<f64>();
    let lin = coef
        .theta
        .iter()
        .zip(stats.delta().iter())
        .map(|(a, b)| a * b)
        .sum::<f64>();
    let penalty: f64 = coef.active.iter().map(|&j| coef.row_norm(j)).sum();
    quad - lin + lambda * penalty
}

/// Max-norm violation of the optimality (KKT) conditions; zero exactly at
/// a minimizer. Active blocks contribute the stationarity residual, inactive
/// positive-variance blocks the excess of their gradient group norm over
/// `lambda`.
pub fn kkt_residual(stats: &SuffStats, coef: &CoefMatrix, lambda: f64) -> f64 {
    let m = coef.n_directions();
    let mut g = sigma_theta(stats, coef);
    g -= &stats.delta();
    let mut residual = 0.0f64;
    for j in 0..coef.p() {
        if stats.zero_variance(j) {
            continue;
        }
        let norm = coef.row_norm(j);
        if norm > 0.0 {
            let row = coef.theta.row(j);
            for c in 0..m {
                residual = residual.max((g[[j, c]] + lambda * row[c] / norm).abs());
            }
        } else {
            let gnorm = g.row(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            residual = residual.max(gnorm - lambda);
        }
    }
    residual.max(0.0)
}

/// Solves the penalized problem at one `lambda` by cyclic blockwise descent.
///
/// Sweeps run in ascending feature order until the max-abs coefficient
/// change falls below `tol`. With the active-set strategy, full sweeps
/// alternate with passes over the current support until a full sweep
/// leaves the support unchanged. Non-convergence within the sweep budget
/// is reported in the diagnostics, not as an error.
pub fn solve(
    stats: &SuffStats,
    options: &SolverOptions,
    warm_start: Option<&CoefMatrix>,
) -> Result<(CoefMatrix, Diagnostics)> {
    let order: Vec<usize> = (0..stats.p()).collect();
    solve_with_order(stats, options, warm_start, &order)
}

/// `solve` with an explicit sweep order (every feature exactly once).
pub(crate) fn solve_with_order(
    stats: &SuffStats,
    options: &SolverOptions,
    warm_start: Option<&CoefMatrix>,
    order: &[usize],
) -> Result<(CoefMatrix, Diagnostics)> {
    options.validate()?;
    debug_assert_eq!(order.len(), stats.p());
    let lambda = options.lambda;
    let mut state = SolverState::new(stats, warm_start);
    let mut trace = Vec::new();
    let mut converged = false;

    let record = |state: &SolverState, trace: &mut Vec<f64>| {
        if options.track_objective {
            let coef = CoefMatrix::from_theta(state.theta.clone());
            trace.push(objective(stats, &coef, lambda));
        }
    };

    let full_sweep = |state: &mut SolverState| -> f64 {
        let mut mc = 0.0f64;
        for &j in order {
            mc = mc.max(block_update(state, stats, j, lambda));
        }
        state.sweep_count += 1;
        state.last_max_change = mc;
        mc
    };
    let active_sweep = |state: &mut SolverState, mask: &[bool]| -> f64 {
        let mut mc = 0.0f64;
        for &j in order {
            if mask[j] {
                mc = mc.max(block_update(state, stats, j, lambda));
            }
        }
        state.sweep_count += 1;
        state.last_max_change = mc;
        mc
    };

    if !options.active_set {
        while state.sweep_count < options.max_sweeps {
            let mc = full_sweep(&mut state);
            record(&state, &mut trace);
            if mc < options.tol {
                converged = true;
                break;
            }
        }
    } else {
        let mc = full_sweep(&mut state);
        record(&state, &mut trace);
        if mc < options.tol && state.active_set().iter().all(|&a| !a) {
            // an immediate all-zero fixed point (lambda >= lambda_max)
            converged = true;
        } else {
            let mut active = state.active_set();
            'outer: loop {
                loop {
                    if state.sweep_count >= options.max_sweeps {
                        break 'outer;
                    }
                    let mc = active_sweep(&mut state, &active);
                    record(&state, &mut trace);
                    if mc < options.tol {
                        break;
                    }
                }
                if state.sweep_count >= options.max_sweeps {
                    break;
                }
                let mc = full_sweep(&mut state);
                record(&state, &mut trace);
                let new_active = state.active_set();
                if new_active == active && mc < options.tol {
                    converged = true;
                    break;
                }
                active = new_active;
            }
        }
    }

    let sweeps = state.sweep_count;
    let last_max_change = state.last_max_change;
    let coef = state.into_coef();
    let kkt = kkt_residual(stats, &coef, lambda);
    Ok((
        coef,
        Diagnostics {
            sweeps,
            last_max_change,
            converged,
            kkt_residual: kkt,
            objective_trace: trace,
        },
    ))
}

/// A descending penalty sequence with the solutions along it.
#[derive(Clone, Debug)]
pub struct SolutionPath {
    pub lambdas: Vec<f64>,
    pub solutions: Vec<CoefMatrix>,
    pub kkt_residuals: Vec<f64>,
    pub sweeps: Vec<usize>,
    pub converged: Vec<bool>,
}

impl SolutionPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// Geometric grid from `lambda_max` down to `lambda_max * ratio`.
/// Degenerates to `[0]` when there is no signal at all.
pub fn lambda_grid(lambda_max: f64, n_lambda: usize, ratio: f64) -> Vec<f64> {
    if lambda_max <= 0.0 {
        return vec![0.0];
    }
    (0..n_lambda)
        .map(|i| lambda_max * ratio.powf(i as f64 / (n_lambda - 1) as f64))
        .collect()
}

/// Solves along a geometric grid starting at this problem's `lambda_max`,
/// warm-starting every solve from the previous solution.
pub fn solve_path(
    stats: &SuffStats,
    n_lambda: usize,
    lambda_min_ratio: f64,
    options: &SolverOptions,
) -> Result<SolutionPath> {
    if n_lambda < 2 {
        return Err(Error::InvalidInput("n_lambda must be >= 2".into()));
    }
    if !(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0) {
        return Err(Error::InvalidInput(
            "lambda_min_ratio must lie in (0, 1)".into(),
        ));
    }
    let grid = lambda_grid(lambda_max(stats), n_lambda, lambda_min_ratio);
    solve_path_with_grid(stats, &grid, options)
}

/// Warm-started solves along an externally supplied descending grid
/// (cross-validation shares one grid across folds).
pub fn solve_path_with_grid(
    stats: &SuffStats,
    lambdas: &[f64],
    options: &SolverOptions,
) -> Result<SolutionPath> {
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput(
            "lambda grid must be strictly descending".into(),
        ));
    }
    let mut path = SolutionPath {
        lambdas: lambdas.to_vec(),
        solutions: Vec::with_capacity(lambdas.len()),
        kkt_residuals: Vec::with_capacity(lambdas.len()),
        sweeps: Vec::with_capacity(lambdas.len()),
        converged: Vec::with_capacity(lambdas.len()),
    };
    let mut warm: Option<CoefMatrix> = None;
    for &lambda in lambdas {
        let opts = SolverOptions {
            lambda,
            ..options.clone()
        };
        let (coef, diag) = solve(stats, &opts, warm.as_ref())?;
        path.kkt_residuals.push(diag.kkt_residual);
        path.sweeps.push(diag.sweeps);
        path.converged.push(diag.converged);
        warm = Some(coef.clone());
        path.solutions.push(coef);
    }
    Ok(path)
}
