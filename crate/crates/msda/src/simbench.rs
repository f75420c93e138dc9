//! Simulation benchmark: the six generative models of the simulation
//! study, exact-covariance Gaussian samplers, the Bayes-rule oracle, and
//! replicated studies reporting medians with bootstrap standard errors.

use ndarray::{Array1, Array2, ArrayView1};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::classify::{error_rate, fit_projected_lda, FittedClassifier};
use crate::data::LabeledDataset;
use crate::modelsel::{cross_validate, selection_metrics, CvOptions, SelectionMetrics};
use crate::solver::{lambda_grid, lambda_max, solve_path_with_grid, CoefMatrix, SolverOptions};
use crate::stats::{CovMode, SuffStats};
use crate::{Error, Result};

/// Covariance structures used by the simulation models. All have unit
/// diagonal.
#[derive(Clone, Debug, PartialEq)]
pub enum CovStructure {
    /// `sigma_ij = rho^|i-j|`.
    Ar { rho: f64 },
    /// `sigma_ij = rho` off the diagonal.
    Cs { rho: f64 },
    /// Block diagonal, each block compound-symmetric of the given size.
    BlockCs { rho: f64, block_size: usize },
}

impl CovStructure {
    fn validate(&self) -> Result<()> {
        match *self {
            CovStructure::Ar { rho } => {
                if !(rho.abs() < 1.0) {
                    return Err(Error::InvalidInput("AR rho must satisfy |rho| < 1".into()));
                }
            }
            CovStructure::Cs { rho } | CovStructure::BlockCs { rho, .. } => {
                // the shared-factor sampler needs rho in [0, 1)
                if !(0.0..1.0).contains(&rho) {
                    return Err(Error::InvalidInput("CS rho must lie in [0, 1)".into()));
                }
                if let CovStructure::BlockCs { block_size, .. } = self {
                    if *block_size == 0 {
                        return Err(Error::InvalidInput("block size must be >= 1".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match *self {
            CovStructure::Ar { rho } => rho.powi((i as i64 - j as i64).unsigned_abs() as i32),
            CovStructure::Cs { rho } => {
                if i == j {
                    1.0
                } else {
                    rho
                }
            }
            CovStructure::BlockCs { rho, block_size } => {
                if i == j {
                    1.0
                } else if i / block_size == j / block_size {
                    rho
                } else {
                    0.0
                }
            }
        }
    }

    pub fn dense(&self, p: usize) -> Array2<f64> {
        Array2::from_shape_fn((p, p), |(i, j)| self.entry(i, j))
    }

    /// `Sigma * b` in `O(p)` using the structure.
    pub fn matvec(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let p = b.len();
        match *self {
            CovStructure::Ar { rho } => {
                // forward and backward geometric partial sums
                let mut out = Array1::zeros(p);
                let mut fwd = 0.0;
                for i in 0..p {
                    fwd = rho * fwd + b[i];
                    out[i] = fwd;
                }
                let mut bwd = 0.0;
                for i in (0..p).rev() {
                    out[i] += bwd;
                    bwd = rho * (bwd + b[i]);
                }
                out
            }
            CovStructure::Cs { rho } => {
                let total: f64 = b.sum();
                b.mapv(|v| (1.0 - rho) * v) + rho * total
            }
            CovStructure::BlockCs { rho, block_size } => {
                let mut out = Array1::zeros(p);
                let mut start = 0;
                while start < p {
                    let end = (start + block_size).min(p);
                    let total: f64 = b.slice(ndarray::s![start..end]).sum();
                    for i in start..end {
                        out[i] = (1.0 - rho) * b[i] + rho * total;
                    }
                    start = end;
                }
                out
            }
        }
    }

    /// One zero-mean draw with this covariance, written into `out`.
    fn sample_zero_mean(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let p = out.len();
        match *self {
            CovStructure::Ar { rho } => {
                // AR(1) recursion reproduces rho^|i-j| exactly
                let innovation = (1.0 - rho * rho).sqrt();
                let mut prev = 0.0;
                for (i, o) in out.iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = if i == 0 { z } else { rho * prev + innovation * z };
                    prev = *o;
                }
            }
            CovStructure::Cs { rho } => {
                // shared factor: x = sqrt(rho) z 1 + sqrt(1 - rho) eps
                let shared: f64 = rng.sample(StandardNormal);
                let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
                for o in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = a * shared + b * z;
                }
            }
            CovStructure::BlockCs { rho, block_size } => {
                let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
                let mut start = 0;
                while start < p {
                    let end = (start + block_size).min(p);
                    let shared: f64 = rng.sample(StandardNormal);
                    for o in out[start..end].iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *o = a * shared + b * z;
                    }
                    start = end;
                }
            }
        }
    }
}

/// Coefficient template of a generative model.
#[derive(Clone, Debug, PartialEq)]
pub enum BetaSpec {
    Fixed(Array2<f64>),
    /// `beta[j][k] = (k + 1) + Uniform(-half_width, half_width)` on the
    /// first `rows` predictors (class index is 1-based), zero elsewhere;
    /// the perturbation is redrawn per realization.
    ClassIndexPlusUniform { rows: usize, half_width: f64 },
}

/// A generative model: `X | Y = k ~ N(Sigma beta_k, Sigma)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    /// Built-in model number, if any.
    pub id: Option<usize>,
    pub k: usize,
    pub p: usize,
    pub cov: CovStructure,
    pub beta: BetaSpec,
}

/// A realization of a [`ModelSpec`]: concrete coefficients, the implied
/// class means `mu_k = Sigma beta_k`, and the true discriminative support.
#[derive(Clone, Debug)]
pub struct ModelInstance {
    pub k: usize,
    pub p: usize,
    pub cov: CovStructure,
    /// `p x K`.
    pub beta: Array2<f64>,
    /// `p x K`, column `k - 1` is the mean of class `k`.
    pub mu: Array2<f64>,
    /// 0-based predictors on which some `beta_k - beta_1` is nonzero.
    pub true_support: Vec<usize>,
}

/// Expected true-support sizes of the built-in models.
const BUILTIN_SUPPORT: [usize; 6] = [8, 12, 4, 4, 8, 8];

const STREAM_REALIZE: u64 = 0x7265_616c;
const STREAM_TRAIN: u64 = 0x7472_6169;
const STREAM_VALIDATE: u64 = 0x7661_6c69;
const STREAM_TEST: u64 = 0x7465_7374;
const STREAM_CV: u64 = 0x6376_6f6c;
const STREAM_BOOTSTRAP: u64 = 0x626f_6f74;

/// Independent sub-seed for one role of a replicate (splitmix64 step).
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The six simulation models (`p = 800` throughout).
pub fn make_model(id: usize) -> Result<ModelSpec> {
    let p = 800;
    let spec = match id {
        1 | 2 => {
            let (k, value, cov) = if id == 1 {
                (4usize, 1.6, CovStructure::Ar { rho: 0.5 })
            } else {
                (
                    6,
                    2.5,
                    CovStructure::BlockCs {
                        rho: 0.5,
                        block_size: 160,
                    },
                )
            };
            let mut beta = Array2::zeros((p, k));
            for class in 1..=k {
                beta[[2 * class - 2, class - 1]] = value;
                beta[[2 * class - 1, class - 1]] = value;
            }
            ModelSpec {
                id: Some(id),
                k,
                p,
                cov,
                beta: BetaSpec::Fixed(beta),
            }
        }
        3 | 4 => ModelSpec {
            id: Some(id),
            k: 4,
            p,
            cov: CovStructure::Cs {
                rho: if id == 3 { 0.5 } else { 0.8 },
            },
            beta: BetaSpec::ClassIndexPlusUniform {
                rows: 4,
                half_width: 0.25,
            },
        },
        5 | 6 => {
            let k = 4;
            let mut beta = Array2::zeros((p, k));
            for j in 0..8 {
                beta[[j, 1]] = 1.2;
                beta[[j, 2]] = if j < 4 { -1.2 } else { 1.2 };
                beta[[j, 3]] = if j % 2 == 0 { -1.2 } else { 1.2 };
            }
            ModelSpec {
                id: Some(id),
                k,
                p,
                cov: CovStructure::Ar {
                    rho: if id == 5 { 0.5 } else { 0.8 },
                },
                beta: BetaSpec::Fixed(beta),
            }
        }
        _ => {
            return Err(Error::InvalidInput(format!(
                "model id {id} outside 1..=6"
            )))
        }
    };
    spec.cov.validate()?;
    Ok(spec)
}

impl ModelSpec {
    /// Draws any random coefficients (deterministically under `seed`),
    /// computes `mu = Sigma beta` and the true support, and verifies both
    /// against independent recomputation.
    pub fn realize(&self, seed: u64) -> Result<ModelInstance> {
        self.cov.validate()?;
        if self.k < 2 {
            return Err(Error::InvalidInput("a model needs K >= 2".into()));
        }
        let beta = match &self.beta {
            BetaSpec::Fixed(b) => {
                if b.dim() != (self.p, self.k) {
                    return Err(Error::InvalidInput(format!(
                        "beta is {:?}, expected ({}, {})",
                        b.dim(),
                        self.p,
                        self.k
                    )));
                }
                b.clone()
            }
            BetaSpec::ClassIndexPlusUniform { rows, half_width } => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_REALIZE));
                let mut b = Array2::zeros((self.p, self.k));
                for j in 0..(*rows).min(self.p) {
                    for class in 1..=self.k {
                        let u: f64 = rng.random::<f64>() * 2.0 * half_width - half_width;
                        b[[j, class - 1]] = class as f64 + u;
                    }
                }
                b
            }
        };

        let mut mu = Array2::zeros((self.p, self.k));
        for c in 0..self.k {
            mu.column_mut(c).assign(&self.cov.matvec(beta.column(c)));
        }
        // independent dense check of mu = Sigma beta
        let dense = self.cov.dense(self.p);
        let mu_dense = dense.dot(&beta);
        let max_err = (&mu - &mu_dense)
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        if max_err > 1e-10 {
            return Err(Error::InvalidData(format!(
                "mu = Sigma beta recomputation differs by {max_err}"
            )));
        }

        let true_support: Vec<usize> = (0..self.p)
            .filter(|&j| (1..self.k).any(|c| beta[[j, c]] != beta[[j, 0]]))
            .collect();
        if let Some(id) = self.id {
            let expected = BUILTIN_SUPPORT[id - 1];
            if true_support.len() != expected {
                return Err(Error::InvalidData(format!(
                    "model {id} realized support of size {}, expected {expected}",
                    true_support.len()
                )));
            }
        }

        Ok(ModelInstance {
            k: self.k,
            p: self.p,
            cov: self.cov.clone(),
            beta,
            mu,
            true_support,
        })
    }
}

impl ModelInstance {
    fn sample_rows(
        &self,
        class_counts: &[usize],
        seed: u64,
    ) -> Result<LabeledDataset> {
        let n: usize = class_counts.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, self.p));
        let mut labels = Vec::with_capacity(n);
        let mut row = 0;
        let mut buf = vec![0.0; self.p];
        for (c, &count) in class_counts.iter().enumerate() {
            for _ in 0..count {
                self.cov.sample_zero_mean(&mut rng, &mut buf);
                for (j, &v) in buf.iter().enumerate() {
                    x[[row, j]] = v + self.mu[[j, c]];
                }
                labels.push(c + 1);
                row += 1;
            }
        }
        LabeledDataset::new(x, labels, None, None)
    }
}

/// `n_per_class` rows from every class, deterministic under `seed`.
pub fn sample_dataset(
    instance: &ModelInstance,
    n_per_class: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if n_per_class == 0 {
        return Err(Error::InvalidInput("n_per_class must be >= 1".into()));
    }
    instance.sample_rows(&vec![n_per_class; instance.k], seed)
}

/// A dataset of `n_total` rows split across classes as evenly as possible
/// (the remainder goes to the lowest class indices).
pub fn sample_dataset_sized(
    instance: &ModelInstance,
    n_total: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let base = n_total / instance.k;
    let rem = n_total % instance.k;
    let counts: Vec<usize> = (0..instance.k)
        .map(|c| base + usize::from(c < rem))
        .collect();
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidInput(format!(
            "test size {n_total} cannot cover {} classes",
            instance.k
        )));
    }
    instance.sample_rows(&counts, seed)
}

/// The Bayes rule of the instance as a fitted classifier: true directions
/// `beta_k - beta_1`, true means, uniform priors.
pub fn bayes_classifier(instance: &ModelInstance) -> FittedClassifier {
    let (p, k) = (instance.p, instance.k);
    let m = k - 1;
    let mut theta = Array2::zeros((p, m));
    for c in 0..m {
        let diff = &instance.beta.column(c + 1) - &instance.beta.column(0);
        theta.column_mut(c).assign(&diff);
    }
    let proj_means = instance.mu.t().dot(&theta); // K x m
    let mut proj_cov = Array2::zeros((m, m));
    for b in 0..m {
        let w = instance.cov.matvec(theta.column(b));
        for a in 0..m {
            proj_cov[[a, b]] = theta.column(a).dot(&w);
        }
    }
    let log_priors = vec![-(k as f64).ln(); k];
    FittedClassifier::from_projected_parts(theta, proj_means, proj_cov, log_priors)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tuning {
    /// Paper-style: an independent validation set of the training size.
    ValidationSet,
    /// k-fold cross-validation on the training set.
    CrossValidation,
}

#[derive(Clone, Debug)]
pub struct ReplicateOptions {
    pub tuning: Tuning,
    pub n_per_class: usize,
    pub test_size: usize,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    pub standardize: bool,
    pub cv_folds: usize,
}

impl Default for ReplicateOptions {
    fn default() -> Self {
        Self {
            tuning: Tuning::ValidationSet,
            n_per_class: 75,
            test_size: 1000,
            n_lambda: 100,
            lambda_min_ratio: 0.05,
            tol: 1e-6,
            max_sweeps: 1000,
            standardize: true,
            cv_folds: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateResult {
    pub test_error: f64,
    /// Bayes-oracle error on the same test set.
    pub bayes_error: f64,
    pub selection: SelectionMetrics,
    pub chosen_lambda: f64,
    pub seed: u64,
    pub converged: bool,
}

/// One replicate: draw train/validation/test, fit the path on the training
/// set, tune the penalty, and score the tuned rule and the Bayes oracle on
/// the same test set.
pub fn run_replicate(
    spec: &ModelSpec,
    seed: u64,
    options: &ReplicateOptions,
) -> Result<ReplicateResult> {
    let instance = spec.realize(seed)?;
    run_replicate_on(&instance, seed, options)
}

/// `run_replicate` against an already-realized instance (used when the
/// random coefficients are held fixed across replicates).
pub fn run_replicate_on(
    instance: &ModelInstance,
    seed: u64,
    options: &ReplicateOptions,
) -> Result<ReplicateResult> {
    let train = sample_dataset(instance, options.n_per_class, derive_seed(seed, STREAM_TRAIN))?;

    let stats = SuffStats::compute(&train, CovMode::Auto)?;
    let (solve_stats, scales) = if options.standardize {
        stats.standardized()
    } else {
        (stats, vec![1.0; train.p()])
    };
    let lambdas = lambda_grid(
        lambda_max(&solve_stats),
        options.n_lambda,
        options.lambda_min_ratio,
    );
    let base = SolverOptions {
        tol: options.tol,
        max_sweeps: options.max_sweeps,
        ..SolverOptions::new(0.0)
    };
    let path = solve_path_with_grid(&solve_stats, &lambdas, &base)?;
    let inv_scales: Vec<f64> = scales.iter().map(|s| 1.0 / s).collect();
    let unscaled: Vec<CoefMatrix> = path
        .solutions
        .iter()
        .map(|c| c.scaled_rows(&inv_scales))
        .collect();

    let best_index = match options.tuning {
        Tuning::ValidationSet => {
            let validation = sample_dataset(
                instance,
                options.n_per_class,
                derive_seed(seed, STREAM_VALIDATE),
            )?;
            let mut best = 0usize;
            let mut best_err = f64::INFINITY;
            for (i, coef) in unscaled.iter().enumerate() {
                let classifier = fit_projected_lda(&train, coef)?;
                let err = error_rate(&classifier, &validation)?;
                if err < best_err {
                    best_err = err;
                    best = i;
                }
            }
            best
        }
        Tuning::CrossValidation => {
            let cv = cross_validate(
                &train,
                &CvOptions {
                    n_folds: options.cv_folds,
                    n_lambda: options.n_lambda,
                    lambda_min_ratio: options.lambda_min_ratio,
                    tol: options.tol,
                    max_sweeps: options.max_sweeps,
                    standardize: options.standardize,
                    seed: derive_seed(seed, STREAM_CV),
                },
            )?;
            cv.best_index.min(path.len() - 1)
        }
    };

    let chosen = &unscaled[best_index];
    let classifier = fit_projected_lda(&train, chosen)?;
    let test = sample_dataset_sized(instance, options.test_size, derive_seed(seed, STREAM_TEST))?;
    let test_error = error_rate(&classifier, &test)?;
    let bayes_error = error_rate(&bayes_classifier(instance), &test)?;
    let selection = selection_metrics(chosen.active_blocks(), &instance.true_support);

    Ok(ReplicateResult {
        test_error,
        bayes_error,
        selection,
        chosen_lambda: lambdas[best_index],
        seed,
        converged: path.converged[best_index],
    })
}

#[derive(Clone, Debug)]
pub struct StudyOptions {
    pub n_replicates: usize,
    pub base_seed: u64,
    pub replicate: ReplicateOptions,
    /// Realize any random coefficients once (from the base seed) and share
    /// them across replicates, instead of redrawing per replicate.
    pub fixed_u: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            n_replicates: 50,
            base_seed: 42,
            replicate: ReplicateOptions::default(),
            fixed_u: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSummary {
    pub name: String,
    pub median: f64,
    pub se: f64,
}

#[derive(Clone, Debug)]
pub struct StudySummary {
    pub model: String,
    pub k: usize,
    pub n_replicates: usize,
    /// Size of the true support (the Bayes rule's C).
    pub true_support_size: usize,
    pub metrics: Vec<MetricSummary>,
    pub wall_secs: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Bootstrap standard error of the median (200 resamples).
fn bootstrap_se_median(values: &[f64], seed: u64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const RESAMPLES: usize = 200;
    let mut medians = Vec::with_capacity(RESAMPLES);
    let mut buf = vec![0.0; values.len()];
    for _ in 0..RESAMPLES {
        for b in buf.iter_mut() {
            *b = values[rng.random_range(0..values.len())];
        }
        medians.push(median(&mut buf));
    }
    let mean = medians.iter().sum::<f64>() / RESAMPLES as f64;
    let var = medians.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (RESAMPLES - 1) as f64;
    var.sqrt()
}

/// Runs `n_replicates` independent replicates (seeds `base_seed + i`) and
/// summarizes each metric by its median and a bootstrap standard error.
pub fn run_study(spec: &ModelSpec, options: &StudyOptions) -> Result<StudySummary> {
    if options.n_replicates == 0 {
        return Err(Error::InvalidInput("n_replicates must be >= 1".into()));
    }
    let start = std::time::Instant::now();
    let shared = if options.fixed_u {
        Some(spec.realize(options.base_seed)?)
    } else {
        None
    };
    let results: Result<Vec<ReplicateResult>> = (0..options.n_replicates)
        .into_par_iter()
        .map(|i| {
            let seed = options.base_seed + i as u64;
            match &shared {
                Some(instance) => run_replicate_on(instance, seed, &options.replicate),
                None => run_replicate(spec, seed, &options.replicate),
            }
        })
        .collect();
    let results = results?;

    let extract: [(&str, fn(&ReplicateResult) -> f64); 5] = [
        ("error_pct", |r| 100.0 * r.test_error),
        ("bayes_error_pct", |r| 100.0 * r.bayes_error),
        ("c", |r| r.selection.c as f64),
        ("ic", |r| r.selection.ic as f64),
        ("chosen_lambda", |r| r.chosen_lambda),
    ];
    let boot_seed = derive_seed(options.base_seed, STREAM_BOOTSTRAP);
    let metrics = extract
        .iter()
        .enumerate()
        .map(|(idx, (name, f))| {
            let values: Vec<f64> = results.iter().map(|r| f(r)).collect();
            let mut sorted = values.clone();
            MetricSummary {
                name: (*name).to_string(),
                median: median(&mut sorted),
                se: bootstrap_se_median(&values, boot_seed.wrapping_add(idx as u64)),
            }
        })
        .collect();

    let true_support_size = match &shared {
        Some(instance) => instance.true_support.len(),
        None => spec.realize(options.base_seed)?.true_support.len(),
    };

    Ok(StudySummary {
        model: match spec.id {
            Some(id) => format!("Model {id}"),
            None => "custom".to_string(),
        },
        k: spec.k,
        n_replicates: options.n_replicates,
        true_support_size,
        metrics,
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

impl StudySummary {
    /// Machine-readable summary, one row per metric. Deliberately excludes
    /// wall time so identical runs produce identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,k,replicates,metric,median,se\n");
        for m in &self.metrics {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.model, self.k, self.n_replicates, m.name, m.median, m.se
            ));
        }
        out
    }

    fn metric(&self, name: &str) -> &MetricSummary {
        self.metrics
            .iter()
            .find(|m| m.name == name)
            .expect("summary always carries the standard metrics")
    }

    /// Text table in the layout of the simulation-study summary: medians
    /// with standard errors in parentheses, Bayes column against ours.
    pub fn to_table(&self) -> String {
        let err = self.metric("error_pct");
        let bayes = self.metric("bayes_error_pct");
        let c = self.metric("c");
        let ic = self.metric("ic");
        let mut out = String::new();
        out.push_str(&format!(
            "{} (K = {}), {} replicates\n",
            self.model, self.k, self.n_replicates
        ));
        out.push_str(&format!("{:<10}{:>12}{:>12}\n", "", "Bayes", "Ours"));
        out.push_str(&format!(
            "{:<10}{:>12.1}{:>12.1}\n",
            "Error(%)", bayes.median, err.median
        ));
        out.push_str(&format!(
            "{:<10}{:>12}{:>12}\n",
            "",
            format!("({:.2})", bayes.se),
            format!("({:.2})", err.se)
        ));
        out.push_str(&format!(
            "{:<10}{:>12}{:>12.1}\n",
            "C", self.true_support_size, c.median
        ));
        out.push_str(&format!(
            "{:<10}{:>12}{:>12}\n",
            "",
            "",
            format!("({:.2})", c.se)
        ));
        out.push_str(&format!("{:<10}{:>12}{:>12.1}\n", "IC", 0, ic.median));
        out.push_str(&format!(
            "{:<10}{:>12}{:>12}\n",
            "",
            "",
            format!("({:.2})", ic.se)
        ));
        out
    }
}
