// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use bigmeans::bench::{find_reference, load_references, run_bench, Algorithm, BenchConfig};
use bigmeans::bigmeans::{big_means, BigMeansConfig, StepParams, StopCondition};
use bigmeans::competitive::{
    run_competitive, sample_range_around, CompetitiveConfig, Execution, DEFAULT_PASSES_PER_EPOCH,
};
use bigmeans::ingest::{load, synth_blobs, IngestSpec, Normalization};
use bigmeans::kmeans::{kmeanspp_init, lloyd, LloydConfig, DEFAULT_CANDIDATES};
use bigmeans::rng::master_stream;
use bigmeans::{evaluate_objective, DataMatrix};

mod output;

use output::{write_centroids_csv, write_labels_csv, write_text, ClusteringOutput, Format};

/// Minimum-sum-of-squares clustering for large datasets.
#[derive(Debug, Parser)]
#[command(name = "bigmeans", version, about)]
struct Cli {
    /// Log one line per worker epoch to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// K-means++ seeding followed by Lloyd's algorithm on the full data.
    Kmeans(KmeansArgs),
    /// Sequential Big-means at a fixed sample size.
    Bigmeans(BigmeansArgs),
    /// Parallel Big-means with competitive sample-size optimization.
    Competitive(CompetitiveArgs),
    /// Repeated runs of several algorithms with accuracy and timing summaries.
    Bench(BenchArgs),
    /// Write a synthetic Gaussian-blob dataset as CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormalizeArg {
    None,
    MinMax,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Delimited numeric input file (`.gz` is decompressed).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Treat the first row as a header.
    #[arg(long)]
    skip_header: bool,
    /// Zero-based columns to use, comma separated.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value_t = NormalizeArg::None)]
    normalize: NormalizeArg,
}

impl InputArgs {
    fn spec(&self) -> IngestSpec {
        IngestSpec {
            path: self.input.clone(),
            delimiter: self.delimiter as u8,
            skip_header: self.skip_header,
            columns: self.columns.clone(),
            normalization: match self.normalize {
                NormalizeArg::None => Normalization::None,
                NormalizeArg::MinMax => Normalization::MinMax,
            },
        }
    }

    fn dataset_name(&self) -> String {
        let name = self
            .input
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        let name = name.strip_suffix(".gz").unwrap_or(&name);
        name.rsplit_once('.').map_or(name, |(stem, _)| stem).to_string()
    }
}

#[derive(Debug, Args)]
struct KmeansParams {
    /// Lloyd iteration limit.
    #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u64).range(1..))]
    max_iter: u64,
    /// Relative objective-decrease tolerance.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// K-means++ candidate draws per center.
    #[arg(long, default_value_t = DEFAULT_CANDIDATES as u64, value_parser = clap::value_parser!(u64).range(1..))]
    candidates: u64,
}

impl KmeansParams {
    fn step(&self) -> StepParams {
        StepParams {
            lloyd: LloydConfig {
                max_iter: self.max_iter as usize,
                rel_tol: self.tol,
            },
            candidates: self.candidates as usize,
        }
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// With `--format csv`, also write one label per line here.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Omit wall-clock fields so identical runs produce identical output.
    #[arg(long)]
    no_timing: bool,
    /// Best known objective, for the relative accuracy.
    #[arg(long)]
    f_star: Option<f64>,
    /// CSV of `dataset,k,f_star` reference objectives.
    #[arg(long)]
    references: Option<PathBuf>,
    /// Dataset name for reference lookup; defaults to the input file stem.
    #[arg(long)]
    dataset_name: Option<String>,
}

#[derive(Debug, Args)]
struct KmeansArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    params: KmeansParams,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct BigmeansArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    params: KmeansParams,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Sample size.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    s: u64,
    /// Number of samples to process.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_samples: Option<u64>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    time_budget: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SampleRangeArgs {
    /// Reference sample size; sets s_min = s/2 and s_max = min(2s, m) when
    /// those are not given.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    s: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    s_min: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    s_max: Option<u64>,
}

impl SampleRangeArgs {
    fn check(&self) -> Result<(), String> {
        if self.s.is_none() && (self.s_min.is_none() || self.s_max.is_none()) {
            return Err("either --s or both --s-min and --s-max are required".into());
        }
        if let (Some(lo), Some(hi)) = (self.s_min, self.s_max) {
            if lo > hi {
                return Err(format!("--s-min ({lo}) must not exceed --s-max ({hi})"));
            }
        }
        Ok(())
    }

    fn resolve(&self, m: usize) -> (usize, usize) {
        let (lo, hi) = self.s.map_or((0, 0), |s| sample_range_around(s as usize, m));
        (
            self.s_min.map_or(lo, |v| v as usize),
            self.s_max.map_or(hi, |v| v as usize),
        )
    }
}

#[derive(Debug, Args)]
struct WorkerArgs {
    /// Passes per epoch.
    #[arg(long, default_value_t = DEFAULT_PASSES_PER_EPOCH as u64, value_parser = clap::value_parser!(u64).range(1..))]
    p: u64,
    /// Epochs per worker.
    #[arg(long = "T", default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    /// Number of workers; defaults to the available parallelism.
    #[arg(long, env = "BIGMEANS_WORKERS", value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    time_budget: Option<f64>,
}

impl WorkerArgs {
    fn workers(&self) -> usize {
        self.workers.map_or_else(
            || std::thread::available_parallelism().map_or(1, |n| n.get()),
            |w| w as usize,
        )
    }
}

#[derive(Debug, Args)]
struct CompetitiveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    params: KmeansParams,
    #[command(flatten)]
    range: SampleRangeArgs,
    #[command(flatten)]
    run: WorkerArgs,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run the workers one after another on a single thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    params: KmeansParams,
    #[command(flatten)]
    run: WorkerArgs,
    /// Algorithms to compare, comma separated.
    #[arg(long = "algo", value_delimiter = ',', default_value = "competitive,bigmeans")]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    n_exec: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Big-means sample size; also centers the competitive range.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    s: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    s_min: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    s_max: Option<u64>,
    /// Samples for Big-means; defaults to workers * T * p.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_samples: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    f_star: Option<f64>,
    #[arg(long)]
    references: Option<PathBuf>,
    #[arg(long)]
    dataset_name: Option<String>,
    /// Slack in percentage points when counting successes.
    #[arg(long, default_value_t = 0.0)]
    success_tol: f64,
    /// JSON report destination; the summary table always goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    m: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Data destination; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Where to write the true blob centers.
    #[arg(long)]
    centers: Option<PathBuf>,
}

type RunResult = Result<(), Box<dyn std::error::Error>>;

fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::ValueValidation, msg).exit()
}

fn seconds(flag: &str, value: Option<f64>) -> Option<Duration> {
    value.map(|v| {
        Duration::try_from_secs_f64(v)
            .unwrap_or_else(|_| usage_error(format!("{flag} must be a non-negative number of seconds")))
    })
}

fn check_tol(tol: f64) {
    if !(tol >= 0.0) {
        usage_error(format!("--tol must be >= 0, got {tol}"));
    }
}

fn check_f_star(f: Option<f64>) {
    if let Some(f) = f {
        if !(f > 0.0) {
            usage_error(format!("--f-star must be positive, got {f}"));
        }
    }
}

fn reference(
    out: &OutputArgs,
    input: &InputArgs,
    k: usize,
) -> Result<Option<f64>, Box<dyn std::error::Error>> {
    if out.f_star.is_some() {
        return Ok(out.f_star);
    }
    let Some(path) = &out.references else {
        return Ok(None);
    };
    let refs = load_references(path)?;
    let name = out.dataset_name.clone().unwrap_or_else(|| input.dataset_name());
    Ok(find_reference(&refs, &name, k))
}

fn emit(out: &OutputArgs, data: &DataMatrix, mut result: ClusteringOutput) -> RunResult {
    if out.no_timing {
        result.strip_timing();
    }
    match out.format {
        Format::Json => write_text(
            out.output.as_deref(),
            &(serde_json::to_string_pretty(&result)? + "\n"),
        )?,
        Format::Csv => {
            write_centroids_csv(out.output.as_deref(), &result.centroids)?;
            if let Some(path) = &out.labels {
                write_labels_csv(path, &result.labels)?;
            }
        }
    }
    log::debug!("wrote results for {} points", data.rows());
    Ok(())
}

fn run_kmeans(args: KmeansArgs) -> RunResult {
    check_tol(args.params.tol);
    check_f_star(args.out.f_star);
    let start = Instant::now();
    let data = load(&args.input.spec())?;
    let k = args.k as usize;
    let step = args.params.step();
    let mut rng = master_stream(args.seed);
    let init = kmeanspp_init(&data, k, step.candidates, &mut rng)?;
    let r = lloyd(&data, &init, &step.lloyd)?;
    let f_star = reference(&args.out, &args.input, k)?;

    let mut out = ClusteringOutput::new(
        "kmeans",
        &data,
        k,
        args.seed,
        &r.centroids,
        r.assignment.labels,
        r.objective,
    );
    out.iterations = Some(r.iterations);
    out.set_reference(f_star)?;
    out.elapsed_seconds = Some(start.elapsed().as_secs_f64());
    emit(&args.out, &data, out)
}

fn run_bigmeans(args: BigmeansArgs) -> RunResult {
    check_tol(args.params.tol);
    check_f_star(args.out.f_star);
    let budget = seconds("--time-budget", args.time_budget);
    let stop = StopCondition::new(args.max_samples.map(|v| v as usize), budget)
        .unwrap_or_else(|_| usage_error("bigmeans needs --max-samples or --time-budget"));
    let start = Instant::now();
    let data = load(&args.input.spec())?;
    let k = args.k as usize;
    let cfg = BigMeansConfig {
        k,
        sample_size: args.s as usize,
        stop,
        step: args.params.step(),
    };
    let r = big_means(&data, &cfg, &mut master_stream(args.seed))?;
    let f_star = reference(&args.out, &args.input, k)?;

    let objective = r.trace.final_full_objective.expect("set by big_means");
    let mut out = ClusteringOutput::new(
        "bigmeans",
        &data,
        k,
        args.seed,
        &r.centroids,
        r.assignment.labels,
        objective,
    );
    out.sample_objective = Some(r.f_hat);
    out.samples = Some(r.samples);
    out.traces = Some(vec![r.trace]);
    out.set_reference(f_star)?;
    out.elapsed_seconds = Some(start.elapsed().as_secs_f64());
    emit(&args.out, &data, out)
}

fn run_competitive_cmd(args: CompetitiveArgs) -> RunResult {
    check_tol(args.params.tol);
    check_f_star(args.out.f_star);
    if let Err(msg) = args.range.check() {
        usage_error(msg);
    }
    let budget = seconds("--time-budget", args.run.time_budget);
    let start = Instant::now();
    let data = load(&args.input.spec())?;
    let k = args.k as usize;
    let (s_min, s_max) = args.range.resolve(data.rows());
    let cfg = CompetitiveConfig {
        k,
        workers: args.run.workers(),
        s_min,
        s_max,
        passes_per_epoch: args.run.p as usize,
        epochs: args.run.epochs as usize,
        time_budget: budget,
        step: args.params.step(),
        seed: args.seed,
        execution: if args.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let r = run_competitive(&data, &cfg)?;
    let f_star = reference(&args.out, &args.input, k)?;

    let objective = evaluate_objective(&r.centroids, &data)?;
    let mut out = ClusteringOutput::new(
        "competitive",
        &data,
        k,
        args.seed,
        &r.centroids,
        r.assignment.labels,
        objective,
    );
    let mut log = r.log;
    log.sort_unstable();
    out.s_min = Some(s_min);
    out.s_max = Some(s_max);
    out.s_opt = Some(r.s_opt);
    out.s_opt_fallback = Some(r.s_opt_fallback);
    out.best_worker = Some(r.best_worker);
    out.per_worker_f_hat = Some(r.per_worker_f_hat);
    out.improvement_log = Some(log);
    out.traces = Some(r.traces);
    out.set_reference(f_star)?;
    out.elapsed_seconds = Some(start.elapsed().as_secs_f64());
    emit(&args.out, &data, out)
}

fn run_bench_cmd(args: BenchArgs) -> RunResult {
    check_tol(args.params.tol);
    check_f_star(args.f_star);
    if let (Some(lo), Some(hi)) = (args.s_min, args.s_max) {
        if lo > hi {
            usage_error(format!("--s-min ({lo}) must not exceed --s-max ({hi})"));
        }
    }
    if args.algorithms.is_empty() {
        usage_error("--algo needs at least one algorithm");
    }
    let budget = seconds("--time-budget", args.run.time_budget);
    let data = load(&args.input.spec())?;
    let dataset = args
        .dataset_name
        .clone()
        .unwrap_or_else(|| args.input.dataset_name());
    let k = args.k as usize;
    let f_star = match (args.f_star, &args.references) {
        (Some(f), _) => Some(f),
        (None, Some(path)) => find_reference(&load_references(path)?, &dataset, k),
        (None, None) => None,
    };
    let (lo, hi) = sample_range_around(args.s as usize, data.rows());
    let cfg = BenchConfig {
        dataset,
        algorithms: args.algorithms.clone(),
        n_exec: args.n_exec as usize,
        k,
        sample_size: args.s as usize,
        s_min: args.s_min.map_or(lo, |v| v as usize),
        s_max: args.s_max.map_or(hi, |v| v as usize),
        workers: args.run.workers(),
        passes_per_epoch: args.run.p as usize,
        epochs: args.run.epochs as usize,
        bigmeans_samples: args.max_samples.map(|v| v as usize),
        time_budget: budget,
        step: args.params.step(),
        seed: args.seed,
        f_star,
        success_tol: args.success_tol,
    };
    let mut report = run_bench(&data, &cfg)?;
    if args.no_timing {
        report.strip_timing();
    }
    print!("{}", report.table());
    if let Some(path) = &args.output {
        write_text(Some(path), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> RunResult {
    if !(args.spread >= 0.0) || !args.spread.is_finite() {
        usage_error(format!("--spread must be finite and >= 0, got {}", args.spread));
    }
    if args.m < args.k {
        usage_error(format!("--m ({}) must be at least --k ({})", args.m, args.k));
    }
    let (data, centers) = synth_blobs(
        args.m as usize,
        args.n as usize,
        args.k as usize,
        args.spread,
        args.seed,
    )?;
    write_centroids_csv(
        args.output.as_deref(),
        &data.iter_rows().map(<[f64]>::to_vec).collect::<Vec<_>>(),
    )?;
    if let Some(path) = &args.centers {
        write_centroids_csv(Some(path), &centers.to_rows())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Kmeans(a) => run_kmeans(a),
        Command::Bigmeans(a) => run_bigmeans(a),
        Command::Competitive(a) => run_competitive_cmd(a),
        Command::Bench(a) => run_bench_cmd(a),
        Command::Synth(a) => run_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
