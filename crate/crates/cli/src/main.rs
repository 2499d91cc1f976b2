use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sciss::dataset::{parse_dataset, write_dataset, Dataset};
use sciss::report::{read_reports, render_report, write_json, write_reports};
use sciss::runner;
use sciss::summary::{render_table, SummaryFile};
use sciss::CliError;
use sciss_core::conditional::{FeatureTransform, SurrogateFamily};
use sciss_core::pipeline::{fit_methods, IntrBase, Method, PipelineConfig};
use sciss_core::sciss::{two_sample_contrast, EstimateReport, IntrTarget};
use sciss_core::sim::{generate, SimConfig};

/// Semi-supervised estimation of Ising models with surrogate features.
#[derive(Debug, Parser)]
#[command(name = "sciss", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one or more estimators to a dataset.
    Fit(FitArgs),
    /// Run a simulation preset and summarize bias, SE, RE and coverage.
    Simulate(SimArgs),
    /// Two-sample test of one edge between two report files.
    Contrast(ContrastArgs),
    /// Write one replication of a simulation preset as a dataset file.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TransformArg {
    Identity,
    Log1p,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaseArg {
    Aug,
    Pos,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetArg {
    Pair,
    Node,
}

/// Estimator options shared by `fit` and `simulate`.
#[derive(Debug, Args)]
struct EstimatorArgs {
    /// Surrogate families, one per outcome (gaussian, logistic, poisson).
    #[arg(long = "family", value_delimiter = ',')]
    families: Vec<String>,
    /// Ridge penalty of the augmented model [default: n^-0.75].
    #[arg(long)]
    lambda: Option<f64>,
    /// Feature transform for the augmented model and the baseline
    /// [default: log1p when every family is poisson, else identity].
    #[arg(long, value_enum)]
    transform: Option<TransformArg>,
    /// Conditional model refined by INTR.
    #[arg(long, value_enum)]
    intr_base: Option<BaseArg>,
    /// Edge refined by INTR, as `j,k` (1-based); repeat for several.
    #[arg(long = "intr-pair", value_parser = parse_edge)]
    intr_pairs: Vec<(usize, usize)>,
    /// Variance objective minimized by INTR.
    #[arg(long, value_enum)]
    intr_target: Option<TargetArg>,
    /// Maximum INTR refinement steps.
    #[arg(long)]
    intr_iters: Option<usize>,
    /// Ensemble members (comma-separated methods).
    #[arg(long, value_delimiter = ',')]
    members: Vec<String>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Dataset CSV with y*, x* and optional w* columns.
    #[arg(long)]
    data: PathBuf,
    /// Methods to fit: sl, sciss-aug, sciss-pos, intr, ensemble, dr.
    #[arg(long = "method", value_delimiter = ',', default_value = "sl")]
    methods: Vec<String>,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Write the reports as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the printed tables.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Preset name.
    #[arg(long)]
    preset: String,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Methods to fit (SL is always included as the reference).
    #[arg(long = "method", value_delimiter = ',')]
    methods: Vec<String>,
    /// Labeled sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Unlabeled sample size.
    #[arg(long)]
    unlabeled: Option<usize>,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Write the summary as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ContrastArgs {
    /// Report file of the first population.
    first: PathBuf,
    /// Report file of the second population.
    second: PathBuf,
    /// Edge `j,k` (1-based).
    #[arg(long, value_parser = parse_edge)]
    edge: (usize, usize),
    /// Report to use from each file when it holds several.
    #[arg(long)]
    method: Option<String>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    preset: String,
    /// Replication index; selects the random stream.
    #[arg(long, default_value_t = 0)]
    rep: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    unlabeled: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

/// Parses a 1-based `j,k` edge into 0-based indices.
fn parse_edge(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `j,k`, got `{s}`"))?;
    let idx = |t: &str| {
        t.trim()
            .parse::<usize>()
            .ok()
            .filter(|&v| v >= 1)
            .map(|v| v - 1)
            .ok_or_else(|| format!("node indices are positive integers, got `{t}`"))
    };
    let (j, k) = (idx(a)?, idx(b)?);
    if j == k {
        return Err(format!("`{s}` is not an edge"));
    }
    Ok((j.min(k), j.max(k)))
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>, CliError> {
    let mut out = Vec::new();
    for n in names {
        let m: Method = n.parse().map_err(CliError::from_core)?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

fn apply_estimator_args(mut cfg: PipelineConfig, est: &EstimatorArgs) -> Result<PipelineConfig, CliError> {
    if !est.families.is_empty() {
        let families = est
            .families
            .iter()
            .map(|f| f.parse::<SurrogateFamily>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::from_core)?;
        cfg.transform = FeatureTransform::Identity;
        cfg = cfg.with_families(families);
    }
    if let Some(t) = est.transform {
        cfg.transform = match t {
            TransformArg::Identity => FeatureTransform::Identity,
            TransformArg::Log1p => FeatureTransform::Log1p,
        };
    }
    if est.lambda.is_some() {
        cfg.lambda = est.lambda;
    }
    if let Some(b) = est.intr_base {
        cfg.intr_base = match b {
            BaseArg::Aug => IntrBase::Aug,
            BaseArg::Pos => IntrBase::Pos,
        };
    }
    if !est.intr_pairs.is_empty() {
        cfg.intr_pairs = Some(est.intr_pairs.clone());
    }
    if let Some(t) = est.intr_target {
        cfg.intr.target = match t {
            TargetArg::Pair => IntrTarget::Pair,
            TargetArg::Node => IntrTarget::Node,
        };
    }
    if let Some(i) = est.intr_iters {
        cfg.intr.max_iters = i;
    }
    if !est.members.is_empty() {
        cfg.ensemble_members = parse_methods(&est.members)?;
    }
    Ok(cfg)
}

fn fit(args: &FitArgs) -> Result<(), CliError> {
    let Dataset { q, labeled, unlabeled } = parse_dataset(&args.data)?;
    let mut cfg = apply_estimator_args(PipelineConfig::default(), &args.est)?;
    cfg.methods = parse_methods(&args.methods)?;
    let fit = fit_methods(&labeled, &unlabeled, q, &cfg).map_err(CliError::from_core)?;
    if !args.quiet {
        for r in &fit.reports {
            println!("{}", render_report(r));
        }
    }
    if let Some(out) = &args.out {
        write_reports(out, &fit.reports)?;
    }
    Ok(())
}

fn preset_config(name: &str, seed: Option<u64>, n: Option<usize>, unlabeled: Option<usize>) -> Result<SimConfig, CliError> {
    let mut cfg = SimConfig::preset(name).map_err(CliError::from_core)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = n {
        cfg.n = n;
    }
    if let Some(u) = unlabeled {
        cfg.big_n = u;
    }
    Ok(cfg)
}

fn simulate(args: &SimArgs) -> Result<(), CliError> {
    let mut cfg = preset_config(&args.preset, args.seed, args.n, args.unlabeled)?;
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if !args.methods.is_empty() {
        cfg.pipeline.methods = parse_methods(&args.methods)?;
    }
    cfg.pipeline = apply_estimator_args(cfg.pipeline, &args.est)?;
    let summary = runner::run(&cfg)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", render_table(&summary));
    if let Some(out) = &args.out {
        write_json(out, &SummaryFile::new(&summary, cfg.seed))?;
    }
    Ok(())
}

fn pick_report(path: &PathBuf, method: Option<Method>) -> Result<EstimateReport, CliError> {
    let reports = read_reports(path)?;
    let found = match method {
        Some(m) => reports.into_iter().find(|r| r.method == m),
        None if reports.len() == 1 => reports.into_iter().next(),
        None => {
            return Err(CliError::Config(format!(
                "{} holds several reports; choose one with --method",
                path.display()
            )))
        }
    };
    found.ok_or_else(|| CliError::Config(format!("{} has no matching report", path.display())))
}

fn contrast(args: &ContrastArgs) -> Result<(), CliError> {
    let method = args
        .method
        .as_deref()
        .map(str::parse::<Method>)
        .transpose()
        .map_err(CliError::from_core)?;
    let a = pick_report(&args.first, method)?;
    let b = pick_report(&args.second, method)?;
    let (j, k) = args.edge;
    let p = two_sample_contrast(&a, &b, j, k).map_err(CliError::from_core)?;
    println!(
        "θ{}{}: {:.4} (se {:.4}) vs {:.4} (se {:.4}), p = {:.4}",
        j + 1,
        k + 1,
        a.estimate(j, k),
        a.std_error(j, k),
        b.estimate(j, k),
        b.std_error(j, k),
        p
    );
    Ok(())
}

fn generate_cmd(args: &GenerateArgs) -> Result<(), CliError> {
    let cfg = preset_config(&args.preset, args.seed, args.n, args.unlabeled)?;
    let (labeled, unlabeled) = generate(&cfg, args.rep).map_err(CliError::from_core)?;
    write_dataset(
        &args.out,
        &Dataset {
            q: cfg.q(),
            labeled,
            unlabeled,
        },
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => fit(a),
        Command::Simulate(a) => simulate(a),
        Command::Contrast(a) => contrast(a),
        Command::Generate(a) => generate_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
