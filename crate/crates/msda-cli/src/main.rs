//! Command-line interface: fit, predict, cv, path, screen, simulate,
//! equiv, fisher. All file I/O is CSV plus the JSON model format.
//!
//! Exit codes: 0 success, 2 usage or input errors, 3 numerical
//! non-convergence.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use msda::classify::Priors;
use msda::data::{LabeledDataset, LabelColumn, ModelArtifact};
use msda::equivalence::{check_proposition1, equivalence_lambda_grid};
use msda::modelsel::cross_validate;
use msda::pipeline::{fit, predict_labels, FitOptions};
use msda::simbench::{
    make_model, run_study, sample_dataset, ModelSpec, ReplicateOptions, StudyOptions, Tuning,
};
use msda::solver::{lambda_grid, lambda_max, solve_path_with_grid, SolverOptions};
use msda::stats::{CovMode, SuffStats};
use msda::Error;

#[derive(Parser)]
#[command(
    name = "msda",
    version,
    about = "Multiclass sparse discriminant analysis: group-lasso discriminant directions, \
             classification, screening, and a simulation benchmark"
)]
struct Cli {
    /// Worker threads for folds and replicates (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a sparse discriminant model on a labeled CSV.
    Fit(FitArgs),
    /// Predict labels for a feature CSV with a fitted model.
    Predict(PredictArgs),
    /// Cross-validate the penalty path on a labeled CSV.
    Cv(CvArgs),
    /// Write the regularization path of a labeled CSV.
    Path(PathArgs),
    /// Rank features by the F-test statistic.
    Screen(ScreenArgs),
    /// Run a replicated simulation study of a built-in model.
    Simulate(SimulateArgs),
    /// Check the binary-case ROAD/DSDA equivalences on a penalty grid.
    Equiv(EquivArgs),
    /// Recover Fisher discriminant directions from a fitted model.
    Fisher(FisherArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Labeled input CSV.
    #[arg(long)]
    input: PathBuf,
    /// Label column: a header name or a 0-based column index.
    #[arg(long, default_value = "0")]
    label_col: String,
    /// The CSV has no header row.
    #[arg(long)]
    no_header: bool,
    /// Use this class label as the baseline (class 1) of the mean
    /// differences.
    #[arg(long)]
    baseline: Option<String>,
}

impl DataArgs {
    fn load(&self) -> msda::Result<LabeledDataset> {
        let column = match self.label_col.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(self.label_col.clone()),
        };
        let data = LabeledDataset::load_csv(&self.input, &column, !self.no_header)?;
        match &self.baseline {
            Some(label) => data.with_baseline(label),
            None => Ok(data),
        }
    }
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long, default_value_t = 100)]
    n_lambda: usize,
    #[arg(long, default_value_t = 0.05)]
    lambda_min_ratio: f64,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Convergence tolerance (max-abs coefficient change per sweep).
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_sweeps: usize,
    #[arg(long, env = "MSDA_SEED", default_value_t = 42)]
    seed: u64,
    /// Solve on raw (not within-class standardized) features.
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    tune: TuneArgs,
    /// Where to write the fitted model (JSON).
    #[arg(long)]
    output: PathBuf,
    /// Also write the per-penalty path summary CSV here.
    #[arg(long)]
    path_csv: Option<PathBuf>,
    /// Fix the penalty instead of cross-validating.
    #[arg(long)]
    lambda: Option<f64>,
    /// Screen to the d_n best features by F statistic before fitting
    /// (0 or no value: use the training sample size, capped at p).
    #[arg(long, num_args = 0..=1, default_missing_value = "0")]
    screen: Option<usize>,
    /// Use uniform instead of empirical class priors.
    #[arg(long)]
    uniform_priors: bool,
}

#[derive(Args)]
struct PredictArgs {
    /// Fitted model (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Feature CSV (no label column).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    no_header: bool,
    /// Where to write predicted labels, one per row.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    tune: TuneArgs,
    /// Where to write the CV curve CSV.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    tune: TuneArgs,
    /// Where to write the path summary CSV.
    #[arg(long)]
    output: PathBuf,
    /// Also write every active coefficient (long format) here.
    #[arg(long)]
    coefs: Option<PathBuf>,
}

#[derive(Args)]
struct ScreenArgs {
    #[command(flatten)]
    data: DataArgs,
    /// How many features to keep (default: the sample size, capped at p).
    #[arg(long)]
    d_n: Option<usize>,
    /// Where to write the screening report CSV.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in model id (1..=6).
    #[arg(long)]
    model: usize,
    #[arg(long, default_value_t = 50)]
    replicates: usize,
    #[arg(long, env = "MSDA_SEED", default_value_t = 42)]
    seed: u64,
    /// validation | cv
    #[arg(long, default_value = "validation")]
    tuning: String,
    #[arg(long, default_value_t = 100)]
    n_lambda: usize,
    #[arg(long, default_value_t = 0.05)]
    lambda_min_ratio: f64,
    #[arg(long, default_value_t = 1000)]
    test_size: usize,
    /// Draw any random model coefficients once and share them across
    /// replicates.
    #[arg(long)]
    fixed_u: bool,
    /// Where to write the machine-readable summary.
    #[arg(long)]
    output_csv: Option<PathBuf>,
    /// Where to write the text table.
    #[arg(long)]
    output_table: Option<PathBuf>,
}

#[derive(Args)]
struct EquivArgs {
    /// Binary labeled CSV; omitted: a Gaussian instance is generated.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "0")]
    label_col: String,
    #[arg(long)]
    no_header: bool,
    /// Rows per class of the generated instance.
    #[arg(long, default_value_t = 50)]
    gen_n: usize,
    /// Features of the generated instance.
    #[arg(long, default_value_t = 50)]
    gen_p: usize,
    #[arg(long, env = "MSDA_SEED", default_value_t = 42)]
    seed: u64,
    /// Number of penalties on the geometric grid.
    #[arg(long, default_value_t = 20)]
    grid: usize,
    #[arg(long, default_value_t = 0.05)]
    lambda_min_ratio: f64,
    /// Where to write the per-penalty report CSV.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct FisherArgs {
    /// Fitted model (JSON).
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Where to write the directions CSV.
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: could not configure {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonConvergence(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(command: Command) -> msda::Result<()> {
    match command {
        Command::Fit(args) => cmd_fit(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Cv(args) => cmd_cv(args),
        Command::Path(args) => cmd_path(args),
        Command::Screen(args) => cmd_screen(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Equiv(args) => cmd_equiv(args),
        Command::Fisher(args) => cmd_fisher(args),
    }
}

fn fit_options(tune: &TuneArgs) -> FitOptions {
    FitOptions {
        lambda: None,
        n_lambda: tune.n_lambda,
        lambda_min_ratio: tune.lambda_min_ratio,
        folds: tune.folds,
        tol: tune.tol,
        max_sweeps: tune.max_sweeps,
        standardize: !tune.no_standardize,
        seed: tune.seed,
        screen: None,
        priors: Priors::Empirical,
    }
}

fn cmd_fit(args: FitArgs) -> msda::Result<()> {
    let data = args.data.load()?;
    let mut options = fit_options(&args.tune);
    options.lambda = args.lambda;
    options.priors = if args.uniform_priors {
        Priors::Uniform
    } else {
        Priors::Empirical
    };
    options.screen = args.screen.map(|d_n| {
        if d_n == 0 {
            data.n().min(data.p())
        } else {
            d_n
        }
    });

    let result = fit(&data, &options)?;
    result.artifact.save(&args.output)?;

    if let Some(path_csv) = &args.path_csv {
        write_path_csv(path_csv, &result.path)?;
    }
    let support = result.artifact.coef.active_blocks().len();
    println!(
        "fitted lambda = {} with {} active features; model written to {}",
        result.artifact.lambda,
        support,
        args.output.display()
    );
    if result.artifact.classifier.is_zero_projection() {
        eprintln!("warning: the projection is identically zero; the classifier predicts by priors alone");
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> msda::Result<()> {
    let artifact = ModelArtifact::load(&args.model)?;
    let (x, _) = load_features_csv(&args.input, !args.no_header)?;
    let labels = predict_labels(&artifact, x.view())?;
    let mut out = String::new();
    for label in labels {
        out.push_str(&label);
        out.push('\n');
    }
    std::fs::write(&args.output, out)?;
    Ok(())
}

fn cmd_cv(args: CvArgs) -> msda::Result<()> {
    let data = args.data.load()?;
    let cv = cross_validate(
        &data,
        &msda::modelsel::CvOptions {
            n_folds: args.tune.folds,
            n_lambda: args.tune.n_lambda,
            lambda_min_ratio: args.tune.lambda_min_ratio,
            tol: args.tune.tol,
            max_sweeps: args.tune.max_sweeps,
            standardize: !args.tune.no_standardize,
            seed: args.tune.seed,
        },
    )?;
    let mut out = String::from("lambda,mean_cv_error,se_cv_error\n");
    for i in 0..cv.lambdas.len() {
        writeln!(
            out,
            "{},{},{}",
            cv.lambdas[i], cv.mean_cv_error[i], cv.se_cv_error[i]
        )
        .unwrap();
    }
    std::fs::write(&args.output, out)?;
    println!(
        "best lambda = {} (mean CV error {})",
        cv.best_lambda, cv.mean_cv_error[cv.best_index]
    );
    Ok(())
}

fn cmd_path(args: PathArgs) -> msda::Result<()> {
    let data = args.data.load()?;
    let stats = SuffStats::compute(&data, CovMode::Auto)?;
    let (solve_stats, scales) = if args.tune.no_standardize {
        (stats, vec![1.0; data.p()])
    } else {
        stats.standardized()
    };
    let lambdas = lambda_grid(
        lambda_max(&solve_stats),
        args.tune.n_lambda,
        args.tune.lambda_min_ratio,
    );
    let base = SolverOptions {
        tol: args.tune.tol,
        max_sweeps: args.tune.max_sweeps,
        ..SolverOptions::new(0.0)
    };
    let path = solve_path_with_grid(&solve_stats, &lambdas, &base)?;
    write_path_csv(&args.output, &path)?;

    if let Some(coefs) = &args.coefs {
        let inv: Vec<f64> = scales.iter().map(|s| 1.0 / s).collect();
        let mut out = String::from("lambda,feature,direction,coefficient\n");
        for (i, coef) in path.solutions.iter().enumerate() {
            let unscaled = coef.scaled_rows(&inv);
            for &j in unscaled.active_blocks() {
                for c in 0..unscaled.n_directions() {
                    writeln!(
                        out,
                        "{},{},{},{}",
                        path.lambdas[i],
                        j,
                        c + 2,
                        unscaled.theta()[[j, c]]
                    )
                    .unwrap();
                }
            }
        }
        std::fs::write(coefs, out)?;
    }
    Ok(())
}

fn cmd_screen(args: ScreenArgs) -> msda::Result<()> {
    let data = args.data.load()?;
    let d_n = args.d_n.unwrap_or_else(|| data.n().min(data.p()));
    let report = msda::classify::f_screen(&data, d_n)?;
    let kept: std::collections::HashSet<usize> = report.kept.iter().copied().collect();
    let mut out = String::from("feature,name,f_stat,kept\n");
    for j in 0..data.p() {
        let name = data
            .feature_names()
            .map(|n| n[j].as_str())
            .unwrap_or("");
        writeln!(
            out,
            "{},{},{},{}",
            j,
            name,
            report.f_stats[j],
            u8::from(kept.contains(&j))
        )
        .unwrap();
    }
    std::fs::write(&args.output, out)?;
    println!("kept {} of {} features", report.kept.len(), data.p());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> msda::Result<()> {
    if args.replicates == 0 {
        return Err(Error::InvalidInput("replicates must be >= 1".into()));
    }
    let tuning = match args.tuning.as_str() {
        "validation" => Tuning::ValidationSet,
        "cv" => Tuning::CrossValidation,
        other => {
            return Err(Error::InvalidInput(format!(
                "tuning must be 'validation' or 'cv', got {other:?}"
            )))
        }
    };
    let spec: ModelSpec = make_model(args.model)?;
    let options = StudyOptions {
        n_replicates: args.replicates,
        base_seed: args.seed,
        replicate: ReplicateOptions {
            tuning,
            test_size: args.test_size,
            n_lambda: args.n_lambda,
            lambda_min_ratio: args.lambda_min_ratio,
            ..ReplicateOptions::default()
        },
        fixed_u: args.fixed_u,
    };
    let summary = run_study(&spec, &options)?;
    print!("{}", summary.to_table());
    eprintln!("wall time: {:.1}s", summary.wall_secs);
    if let Some(path) = &args.output_csv {
        std::fs::write(path, summary.to_csv())?;
    }
    if let Some(path) = &args.output_table {
        std::fs::write(path, summary.to_table())?;
    }
    Ok(())
}

fn cmd_equiv(args: EquivArgs) -> msda::Result<()> {
    let data = match &args.input {
        Some(path) => {
            let column = match args.label_col.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(args.label_col.clone()),
            };
            LabeledDataset::load_csv(path, &column, !args.no_header)?
        }
        None => generated_binary_instance(args.gen_n, args.gen_p, args.seed)?,
    };
    let grid = equivalence_lambda_grid(&data, args.grid, args.lambda_min_ratio)?;
    let reports = check_proposition1(&data, &grid)?;
    let mut out =
        String::from("lambda,skipped,c0,c1,a,cosine_msda_dsda,road_kkt_residual\n");
    for r in &reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.lambda, u8::from(r.skipped), r.c0, r.c1, r.a, r.cosine_msda_dsda, r.road_kkt_residual
        )
        .unwrap();
    }
    std::fs::write(&args.output, out)?;
    let checked = reports.iter().filter(|r| !r.skipped).count();
    let worst = reports
        .iter()
        .filter(|r| !r.skipped)
        .map(|r| r.cosine_msda_dsda)
        .fold(f64::INFINITY, f64::min);
    println!(
        "{} of {} penalties compared; worst cosine {}",
        checked,
        reports.len(),
        if checked == 0 { f64::NAN } else { worst }
    );
    Ok(())
}

/// Two well-separated Gaussian classes for the generated equivalence check.
fn generated_binary_instance(
    n_per: usize,
    p: usize,
    seed: u64,
) -> msda::Result<LabeledDataset> {
    let mut beta = Array2::zeros((p, 2));
    for j in 0..3.min(p) {
        beta[[j, 1]] = 0.8;
    }
    let spec = ModelSpec {
        id: None,
        k: 2,
        p,
        cov: msda::simbench::CovStructure::Ar { rho: 0.3 },
        beta: msda::simbench::BetaSpec::Fixed(beta),
    };
    sample_dataset(&spec.realize(seed)?, n_per, seed)
}

fn cmd_fisher(args: FisherArgs) -> msda::Result<()> {
    let artifact = ModelArtifact::load(&args.model)?;
    let data = args.data.load()?;
    let working = match &artifact.screening_map {
        Some(map) if data.p() != artifact.coef.p() => data.restrict_columns(map),
        _ => data,
    };
    if working.p() != artifact.coef.p() {
        return Err(Error::InvalidInput(format!(
            "data has {} features, model expects {}",
            working.p(),
            artifact.coef.p()
        )));
    }
    let stats = SuffStats::compute(&working, CovMode::Auto)?;
    let fisher = msda::classify::recover_fisher(&artifact.coef, &stats);
    let mut out = String::from("feature");
    for c in 0..fisher.eta.ncols() {
        write!(out, ",eta{}", c + 1).unwrap();
    }
    out.push('\n');
    for j in 0..fisher.eta.nrows() {
        write!(out, "{j}").unwrap();
        for c in 0..fisher.eta.ncols() {
            write!(out, ",{}", fisher.eta[[j, c]]).unwrap();
        }
        out.push('\n');
    }
    std::fs::write(&args.output, out)?;
    println!(
        "{} directions, eigenvalues: {:?}",
        fisher.eigenvalues.len(),
        fisher.eigenvalues
    );
    Ok(())
}

fn write_path_csv(path: &Path, solution: &msda::solver::SolutionPath) -> msda::Result<()> {
    let mut out = String::from("lambda,n_active,kkt_residual,sweeps,converged\n");
    for i in 0..solution.len() {
        writeln!(
            out,
            "{},{},{},{},{}",
            solution.lambdas[i],
            solution.solutions[i].active_blocks().len(),
            solution.kkt_residuals[i],
            solution.sweeps[i],
            u8::from(solution.converged[i])
        )
        .unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a features-only CSV (every cell numeric).
fn load_features_csv(path: &Path, has_header: bool) -> msda::Result<(Array2<f64>, Option<Vec<String>>)> {
    if !path.exists() {
        return Err(Error::InvalidInput(format!(
            "no such file: {}",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Option<Vec<String>> = if has_header {
        Some(
            lines
                .next()
                .ok_or_else(|| Error::InvalidInput("empty CSV".into()))?
                .split(',')
                .map(|s| s.trim().to_string())
                .collect(),
        )
    } else {
        None
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| {
            Error::InvalidInput(format!("non-numeric feature cell at row {r}"))
        })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::InvalidInput(format!(
                    "row {r} has {} cells, expected {}",
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("empty CSV".into()));
    }
    let p = rows[0].len();
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok((
        Array2::from_shape_vec((n, p), flat).expect("shape checked"),
        header,
    ))
}
