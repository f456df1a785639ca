//! Command implementations behind the `tenspca` binary.

use std::ffi::OsString;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::json;

use tenspca::decomp::{self, Centering, PowerOpts, SigmaMode, TpcaModel, Variant};
use tenspca::io::{self as tio, AxisLabels, CsvOptions, Impute, LabeledMatrix};
use tenspca::synth::{self, kmeans, parse_config};
use tenspca::tensor::double_center;
use tenspca::{Matrix, SeededRng, Tensor3};

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "TENSPCA_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "tenspca",
    version,
    about = "Tensor PCA for genes x regions x times data"
)]
pub struct Cli {
    /// Worker threads (default: available parallelism; TENSPCA_THREADS overrides).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a tensor PCA model and write factors, loadings and the scree.
    Decompose(DecomposeArgs),
    /// Cluster genes by k-means on their loadings.
    Cluster(ClusterArgs),
    /// Run a Monte-Carlo benchmark.
    Bench(BenchArgs),
    /// Simulate a tensor with known factors.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CenterArg {
    None,
    Double,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ImputeArg {
    Error,
    Mean,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Gram,
    Direct,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Missing-cell policy for long-format CSV input.
    #[arg(long, value_enum, default_value = "error")]
    pub impute: ImputeArg,
    /// Order CSV axes lexicographically instead of by first appearance.
    #[arg(long)]
    pub sort_axes: bool,
    /// File with one gene id per line; only these genes are kept, in order.
    #[arg(long)]
    pub genes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Binary tensor file or long-format CSV (gene,region,time,value).
    pub input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub rank: u64,
    #[arg(long, value_enum, default_value = "gram")]
    pub variant: VariantArg,
    /// Noise level: `auto` estimates it from the unfolding residual.
    #[arg(long, default_value = "auto", value_parser = parse_sigma)]
    pub sigma: SigmaMode,
    #[arg(long, value_enum, default_value = "none")]
    pub center: CenterArg,
    /// Accepted for a uniform interface; the fit draws no random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), default_value_t = 100)]
    pub max_iter: u64,
    #[arg(long, default_value_t = 1e-10, value_parser = parse_positive)]
    pub tol: f64,
    /// Number of scree values (default: max(rank, 10), capped by the data).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub scree_k: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub input_opts: InputArgs,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Loadings CSV (label column plus factor columns), binary tensor, or
    /// long-format CSV.
    pub input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Number of loading columns used.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub dims: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub restarts: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model rank for tensor input (default: --dims).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub rank: Option<u64>,
    #[arg(long, value_enum, default_value = "none")]
    pub center: CenterArg,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub input_opts: InputArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Config file of `key = value` lines.
    #[arg(long, conflicts_with_all = ["experiment", "d", "dims", "n_genes", "lambda", "sigma", "k", "methods", "restarts", "cluster_dims", "variant"])]
    pub config: Option<PathBuf>,
    /// rank1, rank4 or cluster.
    #[arg(long)]
    pub experiment: Option<String>,
    /// Cubic sizes (comma list or repeated).
    #[arg(long, value_delimiter = ',')]
    pub d: Vec<String>,
    /// Shapes such as 2000x10x13.
    #[arg(long, value_delimiter = ',')]
    pub dims: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub n_genes: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub sigma: Vec<String>,
    #[arg(long)]
    pub runs: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    #[arg(long)]
    pub restarts: Option<String>,
    #[arg(long)]
    pub cluster_dims: Option<String>,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GenerateKind {
    Rank1,
    Rank4,
    Cluster,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub kind: GenerateKind,
    /// Cubic size for rank1.
    #[arg(long, default_value_t = 50)]
    pub d: usize,
    /// Shape for rank4 (default 2000x10x13).
    #[arg(long)]
    pub dims: Option<String>,
    #[arg(long, default_value_t = 1087)]
    pub n_genes: usize,
    #[arg(long, default_value_t = 5.0)]
    pub lambda: f64,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_sigma(s: &str) -> Result<SigmaMode, String> {
    if s == "auto" {
        return Ok(SigmaMode::Estimate);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(SigmaMode::Known(v)),
        _ => Err(format!("expected `auto` or a number >= 0, got {s:?}")),
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a number > 0, got {s:?}")),
    }
}

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or configuration (exit 2).
    Usage(String),
    /// Anything that went wrong while running (exit 1).
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<tenspca::Error> for Failure {
    fn from(e: tenspca::Error) -> Self {
        match e {
            tenspca::Error::Config { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` and runs the command, writing the human summary to `stdout`.
/// Returns the exit code.
pub fn run_from<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let mut text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                if !text.contains("Usage:") {
                    text.push_str(&format!("\n{}\n", Cli::command().render_usage()));
                }
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match run(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "error: {f}");
            f.exit_code()
        }
    }
}

fn thread_count(flag: Option<u64>) -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Failure::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(flag.map(|n| n as usize)),
    }
}

pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let threads = thread_count(cli.threads)?;
    let command = cli.command;
    let (mut buf, mut ebuf) = (Vec::new(), Vec::new());
    let result = with_threads(threads, || match command {
        Command::Decompose(a) => cmd_decompose(&a, &mut buf),
        Command::Cluster(a) => cmd_cluster(&a, &mut buf),
        Command::Bench(a) => cmd_bench(&a, &mut buf, &mut ebuf),
        Command::Generate(a) => cmd_generate(&a, &mut buf),
    });
    let _ = stdout.write_all(&buf);
    let _ = stderr.write_all(&ebuf);
    result
}

#[cfg(feature = "parallel")]
fn with_threads<F>(threads: Option<usize>, f: F) -> CmdResult
where
    F: FnOnce() -> CmdResult + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::Runtime(anyhow!("cannot start thread pool: {e}")))?;
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_threads<F>(_threads: Option<usize>, f: F) -> CmdResult
where
    F: FnOnce() -> CmdResult + Send,
{
    f()
}

fn create_out(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(Failure::Runtime)
}

enum InputKind {
    Binary,
    LongCsv,
    Matrix,
}

fn sniff(path: &Path) -> Result<InputKind, Failure> {
    let mut head = Vec::with_capacity(64);
    File::open(path)
        .and_then(|f| f.take(64).read_to_end(&mut head))
        .with_context(|| format!("cannot read {}", path.display()))?;
    if head.starts_with(&tio::MAGIC) {
        return Ok(InputKind::Binary);
    }
    let first = String::from_utf8_lossy(&head);
    let header: Vec<String> = first
        .lines()
        .next()
        .unwrap_or("")
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if header == ["gene", "region", "time", "value"] {
        Ok(InputKind::LongCsv)
    } else {
        Ok(InputKind::Matrix)
    }
}

fn load_tensor(path: &Path, opts: &InputArgs) -> Result<(Tensor3, AxisLabels), Failure> {
    match sniff(path)? {
        InputKind::Binary => {
            let t =
                tio::read_tensor(path).with_context(|| format!("reading {}", path.display()))?;
            let labels = AxisLabels::numbered(t.dims());
            Ok((t, labels))
        }
        InputKind::LongCsv => {
            let genes = match &opts.genes {
                Some(p) => Some(tio::read_gene_list(p)?),
                None => None,
            };
            let csv_opts = CsvOptions {
                impute: match opts.impute {
                    ImputeArg::Error => Impute::Error,
                    ImputeArg::Mean => Impute::Mean,
                },
                sort_axes: opts.sort_axes,
                genes,
            };
            Ok(tio::read_long_csv(path, &csv_opts)
                .with_context(|| format!("reading {}", path.display()))?)
        }
        InputKind::Matrix => Err(Failure::Runtime(anyhow!(
            "{}: neither a tensor file nor a gene,region,time,value CSV",
            path.display()
        ))),
    }
}

fn max_rank(dims: (usize, usize, usize)) -> usize {
    dims.0.min(dims.1 * dims.2)
}

fn fit(
    x: &Tensor3,
    rank: usize,
    opts: &PowerOpts,
    center: CenterArg,
) -> Result<(Tensor3, TpcaModel), Failure> {
    let (x, centering) = match center {
        CenterArg::None => (x.clone(), Centering::None),
        CenterArg::Double => (double_center(x), Centering::Double),
    };
    let mut model = decomp::tensor_pca(&x, rank, opts).context("tensor PCA failed")?;
    model.centering = centering;
    Ok((x, model))
}

fn cmd_decompose(a: &DecomposeArgs, stdout: &mut dyn Write) -> CmdResult {
    let (x, labels) = load_tensor(&a.input, &a.input_opts)?;
    let dims = x.dims();
    let rank = a.rank as usize;
    let limit = max_rank(dims);
    if rank > limit {
        return Err(Failure::Usage(format!(
            "--rank {rank} exceeds the largest rank {limit} of a {}x{}x{} tensor",
            dims.0, dims.1, dims.2
        )));
    }
    let opts = PowerOpts {
        max_iter: a.max_iter as usize,
        tol: a.tol,
        variant: match a.variant {
            VariantArg::Gram => Variant::Gram,
            VariantArg::Direct => Variant::Direct,
        },
        sigma_mode: a.sigma,
    };
    let (xc, model) = fit(&x, rank, &opts, a.center)?;
    let kmax = a
        .scree_k
        .map(|k| k as usize)
        .unwrap_or(rank.max(10))
        .min(limit);
    let scree = decomp::scree(&xc, kmax)?;
    let loadings = decomp::loadings(&xc, &model)?;
    create_out(&a.out)?;
    tio::write_model_outputs(&a.out, &labels, &model, &scree, &loadings)?;
    let _ = writeln!(
        stdout,
        "{}x{}x{} tensor, rank {rank}, sigma {:.6}",
        dims.0, dims.1, dims.2, model.sigma
    );
    for (k, c) in model.components.iter().enumerate() {
        let _ = writeln!(
            stdout,
            "component {}: lambda {:.6}, iterations {}{}",
            k + 1,
            c.lambda,
            model.iterations_used[k],
            if model.converged[k] {
                ""
            } else {
                " (not converged)"
            }
        );
    }
    Ok(())
}

fn cmd_cluster(a: &ClusterArgs, stdout: &mut dyn Write) -> CmdResult {
    let dims = a.dims as usize;
    let k = a.k as usize;
    let (gene_labels, points, source) = match sniff(&a.input)? {
        InputKind::Matrix => {
            let m = tio::read_matrix_csv(&a.input)
                .with_context(|| format!("reading {}", a.input.display()))?;
            if dims > m.matrix.cols() {
                return Err(Failure::Usage(format!(
                    "--dims {dims} exceeds the {} loading columns in {}",
                    m.matrix.cols(),
                    a.input.display()
                )));
            }
            let cols: Vec<_> = (0..dims).map(|j| m.matrix.column(j)).collect();
            (m.row_labels, Matrix::from_columns(&cols)?, "loadings")
        }
        _ => {
            let (x, labels) = load_tensor(&a.input, &a.input_opts)?;
            let rank = a.rank.map_or(dims, |r| r as usize);
            if dims > rank {
                return Err(Failure::Usage(format!(
                    "--dims {dims} exceeds the model rank {rank}"
                )));
            }
            let limit = max_rank(x.dims());
            if rank > limit {
                return Err(Failure::Usage(format!(
                    "rank {rank} exceeds the largest rank {limit}"
                )));
            }
            let (xc, model) = fit(&x, rank, &PowerOpts::default(), a.center)?;
            let l = decomp::loadings(&xc, &model)?;
            (labels.genes, l.first_columns(dims), "tensor")
        }
    };
    if k > points.rows() {
        return Err(Failure::Usage(format!(
            "--k {k} exceeds the number of genes {}",
            points.rows()
        )));
    }
    let mut rng = SeededRng::new(a.seed);
    let fit = kmeans(&points, k, a.restarts as usize, &mut rng)?;

    create_out(&a.out)?;
    let labels_path = a.out.join("labels.csv");
    let mut text = String::from("gene,cluster\n");
    for (g, &l) in gene_labels.iter().zip(&fit.labels) {
        text.push_str(&format!("{},{}\n", csv_field(g), l + 1));
    }
    std::fs::write(&labels_path, text)
        .with_context(|| format!("writing {}", labels_path.display()))?;
    tio::write_matrix_csv(
        &a.out.join("centroids.csv"),
        &LabeledMatrix {
            corner: "cluster".into(),
            row_labels: (1..=k).map(|c| c.to_string()).collect(),
            col_labels: (1..=dims).map(|j| format!("factor{j}")).collect(),
            matrix: fit.centroids.clone(),
        },
    )?;
    let sizes = fit.sizes();
    tio::write_json(
        &a.out.join("summary.json"),
        &json!({
            "source": source,
            "k": k,
            "dims": dims,
            "restarts": a.restarts,
            "seed": a.seed,
            "n_genes": points.rows(),
            "sizes": sizes,
            "inertia": fit.inertia,
            "iterations": fit.iterations,
        }),
    )?;
    let _ = writeln!(
        stdout,
        "{} genes, k = {k}, inertia {:.6}",
        points.rows(),
        fit.inertia
    );
    let _ = writeln!(
        stdout,
        "cluster sizes: {}",
        sizes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(())
}

/// Quotes a CSV field when it needs it.
fn csv_field(id: &str) -> String {
    if id.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", id.replace('"', "\"\""))
    } else {
        id.to_string()
    }
}

fn bench_config_text(a: &BenchArgs) -> Result<String, Failure> {
    if let Some(path) = &a.config {
        let mut text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))
            .map_err(|e| Failure::Usage(format!("{e:#}")))?;
        text.push('\n');
        for (key, value) in [("runs", &a.runs), ("seed", &a.seed)] {
            if let Some(v) = value {
                // later lines of a scalar key are rejected, so drop the file's
                text = text
                    .lines()
                    .filter(|l| {
                        l.split('#')
                            .next()
                            .unwrap_or("")
                            .split_once('=')
                            .map_or(true, |(k, _)| k.trim() != key)
                    })
                    .map(|l| format!("{l}\n"))
                    .collect();
                text.push_str(&format!("{key} = {v}\n"));
            }
        }
        return Ok(text);
    }
    let mut text = String::new();
    let Some(exp) = &a.experiment else {
        return Err(Failure::Usage(
            "bench needs --config or --experiment".into(),
        ));
    };
    text.push_str(&format!("experiment = {exp}\n"));
    let lists = [
        ("d", &a.d),
        ("dims", &a.dims),
        ("n_genes", &a.n_genes),
        ("lambda", &a.lambda),
        ("sigma", &a.sigma),
        ("methods", &a.methods),
    ];
    for (key, values) in lists {
        for v in values {
            text.push_str(&format!("{key} = {v}\n"));
        }
    }
    let scalars = [
        ("runs", &a.runs),
        ("k", &a.k),
        ("seed", &a.seed),
        ("restarts", &a.restarts),
        ("cluster_dims", &a.cluster_dims),
        ("variant", &a.variant),
    ];
    for (key, value) in scalars {
        if let Some(v) = value {
            text.push_str(&format!("{key} = {v}\n"));
        }
    }
    Ok(text)
}

fn cmd_bench(a: &BenchArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let cfg = parse_config(&bench_config_text(a)?)?;
    let report = synth::run_benchmark(&cfg)?;
    create_out(&a.out)?;
    tio::write_sim_report(&a.out, &report)?;
    let _ = write!(stdout, "{}", report.summary_table());
    let _ = writeln!(
        stderr,
        "{} cells in {:.2?}",
        report.cells.len(),
        report.elapsed
    );
    Ok(())
}

fn cmd_generate(a: &GenerateArgs, stdout: &mut dyn Write) -> CmdResult {
    let mut rng = SeededRng::new(a.seed);
    let (x, truth) = match a.kind {
        GenerateKind::Rank1 => synth::gen_rank1(a.d, a.lambda, a.sigma, &mut rng),
        GenerateKind::Rank4 => {
            let dims = match &a.dims {
                None => synth::RANK4_SHAPE,
                Some(s) => parse_shape(s)
                    .ok_or_else(|| Failure::Usage(format!("--dims expects AxBxC, got {s:?}")))?,
            };
            synth::gen_rank4(dims, a.lambda, a.sigma, &mut rng)
        }
        GenerateKind::Cluster => synth::gen_cluster(a.n_genes, a.k, a.sigma, &mut rng),
    }
    .map_err(|e| Failure::Usage(e.to_string()))?;
    create_out(&a.out)?;
    tio::write_tensor(&a.out.join("tensor.bin"), &x)?;
    tio::write_json(&a.out.join("truth.json"), &truth)?;
    if let Some(labels) = &truth.labels {
        let mut text = String::from("gene,cluster\n");
        for (g, l) in labels.iter().enumerate() {
            text.push_str(&format!("{},{}\n", g + 1, l + 1));
        }
        let p = a.out.join("labels.csv");
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    let (d1, d2, d3) = x.dims();
    let _ = writeln!(stdout, "wrote {d1}x{d2}x{d3} tensor to {}", a.out.display());
    Ok(())
}

fn parse_shape(s: &str) -> Option<(usize, usize, usize)> {
    let p: Vec<usize> = s
        .split('x')
        .map(|v| v.trim().parse().ok())
        .collect::<Option<_>>()?;
    match p[..] {
        [a, b, c] => Some((a, b, c)),
        _ => None,
    }
}

/// Reads the `gene,cluster` file written by `cluster` or `generate`, as
/// 0-based labels.
pub fn read_labels(path: &Path) -> anyhow::Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let c = l.rsplit(',').next().unwrap_or("").trim();
            let v: usize = c.parse().with_context(|| format!("bad cluster id {c:?}"))?;
            v.checked_sub(1)
                .ok_or_else(|| anyhow!("cluster ids start at 1"))
        })
        .collect()
}
