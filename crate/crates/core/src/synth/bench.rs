use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::ari::adjusted_rand_index;
use super::config::{Experiment, SimConfig};
use super::generators::{
    classical_components, estimation_error, gen_cluster, gen_rank1_shape, gen_rank4, GroundTruth,
};
use super::kmeans::kmeans;
use crate::decomp::{component_loadings, tensor_pca_with, unfold_init, Component, SigmaMode};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::SeededRng;
use crate::tensor::{Matrix, Tensor3};

/// Version of the `report.json` layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Unfolding estimator alone.
    #[serde(rename = "UFD")]
    Ufd,
    /// Unfolding followed by power iteration.
    #[serde(rename = "PIT")]
    Pit,
    /// PCA of the pooled matrices.
    #[serde(rename = "classicalPCA")]
    ClassicalPca,
    /// Same estimator as `PIT`, under the name used for baseline comparisons.
    #[serde(rename = "tensorPCA")]
    TensorPca,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Ufd,
        Method::Pit,
        Method::ClassicalPca,
        Method::TensorPca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ufd => "UFD",
            Method::Pit => "PIT",
            Method::ClassicalPca => "classicalPCA",
            Method::TensorPca => "tensorPCA",
        }
    }

    fn stream(self) -> u64 {
        1 + self as u64
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown method {s:?} (expected UFD, PIT, classicalPCA or tensorPCA)"
                ))
            })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Factor estimation error of one component.
    Error,
    /// Adjusted Rand index of the k-means clustering.
    Ari,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Error => "error",
            Metric::Ari => "ari",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: usize,
    pub method: Method,
    pub message: String,
}

/// Raw scores of one (method, component) series within a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScores {
    pub method: Method,
    /// 1-based component, `None` for clustering scores.
    pub component: Option<usize>,
    pub metric: Metric,
    /// Runs that produced a score, ascending.
    pub runs: Vec<usize>,
    pub values: Vec<f64>,
    /// Largest power-iteration count over components, iterative methods only.
    pub iterations: Option<Vec<usize>>,
    pub converged: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub method: Method,
    pub component: Option<usize>,
    pub metric: Metric,
    pub n: usize,
    pub n_failed: usize,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator), 0 for `n < 2`.
    pub sd: f64,
    pub median: f64,
    /// Quartiles by linear interpolation between order statistics.
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    pub mean_iterations: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub index: usize,
    pub dims: (usize, usize, usize),
    pub lambda: Option<f64>,
    pub sigma: f64,
    pub n_runs: usize,
    pub stats: Vec<SeriesStats>,
    pub scores: Vec<CellScores>,
    pub failures: Vec<RunFailure>,
}

impl CellReport {
    pub fn series(&self, method: Method, component: Option<usize>) -> Option<&SeriesStats> {
        self.stats
            .iter()
            .find(|s| s.method == method && s.component == component)
    }

    pub fn scores_of(&self, method: Method, component: Option<usize>) -> Option<&CellScores> {
        self.scores
            .iter()
            .find(|s| s.method == method && s.component == component)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub schema_version: u32,
    pub config: SimConfig,
    pub cells: Vec<CellReport>,
    /// Wall-clock time of the run; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    dims: (usize, usize, usize),
    lambda: Option<f64>,
    sigma: f64,
}

fn cells(cfg: &SimConfig) -> Vec<Cell> {
    let lambdas: Vec<Option<f64>> = if cfg.lambdas.is_empty() {
        vec![None]
    } else {
        cfg.lambdas.iter().copied().map(Some).collect()
    };
    let mut out = Vec::with_capacity(cfg.n_cells());
    for &dims in &cfg.dims {
        for &lambda in &lambdas {
            for &sigma in &cfg.sigmas {
                out.push(Cell {
                    dims,
                    lambda,
                    sigma,
                });
            }
        }
    }
    out
}

/// Scores of one method on one simulated tensor.
struct Fit {
    values: Vec<f64>,
    iterations: Option<(usize, bool)>,
}

type RunResult = std::result::Result<Vec<Result<Fit>>, String>;

fn generate(cfg: &SimConfig, cell: &Cell, rng: &mut SeededRng) -> Result<(Tensor3, GroundTruth)> {
    let lambda = cell.lambda.unwrap_or(0.0);
    match cfg.experiment {
        Experiment::Rank1 => gen_rank1_shape(cell.dims, lambda, cell.sigma, rng),
        Experiment::Rank4 => gen_rank4(cell.dims, lambda, cell.sigma, rng),
        Experiment::Cluster => gen_cluster(cell.dims.0, cfg.k, cell.sigma, rng),
    }
}

fn cluster_score(
    points: &Matrix,
    truth: &GroundTruth,
    k: usize,
    restarts: usize,
    rng: &mut SeededRng,
) -> Result<f64> {
    let labels = truth
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("ground truth has no labels".into()))?;
    let fit = kmeans(points, k, restarts, rng)?;
    adjusted_rand_index(&fit.labels, labels)
}

fn fit_method(
    cfg: &SimConfig,
    cell: &Cell,
    x: &Tensor3,
    truth: &GroundTruth,
    method: Method,
    rng: &mut SeededRng,
) -> Result<Fit> {
    let r = cfg.rank();
    let mut iterations = None;
    let comps: Vec<Component> = match method {
        Method::Ufd => unfold_init(x, r)?,
        Method::ClassicalPca => classical_components(x, r)?,
        Method::Pit | Method::TensorPca => {
            let mut opts = cfg.opts;
            if let SigmaMode::Known(_) = opts.sigma_mode {
                opts.sigma_mode = SigmaMode::Known(cell.sigma);
            }
            let model = tensor_pca_with(x, r, &opts, Execution::Sequential)?;
            iterations = Some((
                model.iterations_used.iter().copied().max().unwrap_or(0),
                model.converged.iter().all(|&c| c),
            ));
            model.components
        }
    };
    let values = if cfg.experiment == Experiment::Cluster {
        let points = match method {
            Method::ClassicalPca => {
                Matrix::from_columns(&comps.iter().map(|c| c.u.clone()).collect::<Vec<_>>())?
            }
            _ => component_loadings(x, &comps)?,
        };
        vec![cluster_score(&points, truth, cfg.k, cfg.restarts, rng)?]
    } else {
        truth
            .components
            .iter()
            .zip(&comps)
            .map(|(t, e)| estimation_error(e, t))
            .collect::<Result<_>>()?
    };
    Ok(Fit { values, iterations })
}

fn run_one(cfg: &SimConfig, cell_index: usize, cell: &Cell, run: usize) -> RunResult {
    let path = [cell_index as u64, run as u64];
    let mut rng = SeededRng::derive(cfg.seed, &path);
    let (x, truth) = generate(cfg, cell, &mut rng).map_err(|e| e.to_string())?;
    Ok(cfg
        .methods
        .iter()
        .map(|&m| {
            let mut krng = SeededRng::derive(cfg.seed, &[path[0], path[1], m.stream()]);
            fit_method(cfg, cell, &x, &truth, m, &mut krng)
        })
        .collect())
}

/// Type-7 quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(s: &CellScores, n_failed: usize) -> SeriesStats {
    let n = s.values.len();
    let mut sorted = s.values.clone();
    sorted.sort_by(f64::total_cmp);
    let (mean, sd, median, q1, q3, min, max) = if n == 0 {
        (
            f64::NAN,
            f64::NAN,
            f64::NAN,
            f64::NAN,
            f64::NAN,
            f64::NAN,
            f64::NAN,
        )
    } else {
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        (
            mean,
            sd,
            quantile(&sorted, 0.5),
            quantile(&sorted, 0.25),
            quantile(&sorted, 0.75),
            sorted[0],
            sorted[n - 1],
        )
    };
    let mean_iterations = s
        .iterations
        .as_ref()
        .filter(|it| !it.is_empty())
        .map(|it| it.iter().sum::<usize>() as f64 / it.len() as f64);
    SeriesStats {
        method: s.method,
        component: s.component,
        metric: s.metric,
        n,
        n_failed,
        mean,
        sd,
        median,
        q1,
        q3,
        min,
        max,
        mean_iterations,
    }
}

fn assemble(cfg: &SimConfig, index: usize, cell: &Cell, runs: &[RunResult]) -> CellReport {
    let (metric, components): (Metric, Vec<Option<usize>>) = match cfg.experiment {
        Experiment::Cluster => (Metric::Ari, vec![None]),
        _ => (Metric::Error, (1..=cfg.rank()).map(Some).collect()),
    };
    let mut failures = Vec::new();
    let mut scores = Vec::new();
    let mut failed_per_method = vec![0usize; cfg.methods.len()];
    for (mi, &method) in cfg.methods.iter().enumerate() {
        let iterative = matches!(method, Method::Pit | Method::TensorPca);
        let mut series: Vec<CellScores> = components
            .iter()
            .map(|&component| CellScores {
                method,
                component,
                metric,
                runs: Vec::new(),
                values: Vec::new(),
                iterations: iterative.then(Vec::new),
                converged: iterative.then(Vec::new),
            })
            .collect();
        for (run, result) in runs.iter().enumerate() {
            let fit = match result {
                Err(msg) => Err(format!("data generation failed: {msg}")),
                Ok(fits) => fits[mi].as_ref().map_err(|e| e.to_string()),
            };
            match fit {
                Ok(fit) => {
                    for (s, &v) in series.iter_mut().zip(&fit.values) {
                        s.runs.push(run);
                        s.values.push(v);
                        if let (Some(it), Some(cv), Some((i, c))) =
                            (s.iterations.as_mut(), s.converged.as_mut(), fit.iterations)
                        {
                            it.push(i);
                            cv.push(c);
                        }
                    }
                }
                Err(message) => {
                    failed_per_method[mi] += 1;
                    failures.push(RunFailure {
                        run,
                        method,
                        message,
                    });
                }
            }
        }
        scores.extend(series);
    }
    let stats = scores
        .iter()
        .map(|s| {
            let mi = cfg.methods.iter().position(|&m| m == s.method).unwrap_or(0);
            summarize(s, failed_per_method[mi])
        })
        .collect();
    CellReport {
        index,
        dims: cell.dims,
        lambda: cell.lambda,
        sigma: cell.sigma,
        n_runs: cfg.n_runs,
        stats,
        scores,
        failures,
    }
}

/// Runs every cell of `cfg` with the default execution mode.
pub fn run_benchmark(cfg: &SimConfig) -> Result<SimReport> {
    run_benchmark_with(cfg, Execution::default())
}

/// Runs every (cell, run) pair, in parallel when `exec` allows. Each run
/// draws from its own stream derived from `(seed, cell, run)`, so the report
/// does not depend on scheduling or thread count.
pub fn run_benchmark_with(cfg: &SimConfig, exec: Execution) -> Result<SimReport> {
    cfg.validate()?;
    let start = Instant::now();
    let grid = cells(cfg);
    let n_runs = cfg.n_runs;
    let results = exec.map(grid.len() * n_runs, |i| {
        run_one(cfg, i / n_runs, &grid[i / n_runs], i % n_runs)
    });
    let cells = grid
        .iter()
        .enumerate()
        .map(|(c, cell)| assemble(cfg, c, cell, &results[c * n_runs..(c + 1) * n_runs]))
        .collect();
    Ok(SimReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        cells,
        elapsed: start.elapsed(),
    })
}

impl SimReport {
    /// Plain-text summary: `mean(sd)` per method, one row per cell. Clustering
    /// reports list noise levels from largest to smallest.
    pub fn summary_table(&self) -> String {
        let methods = &self.config.methods;
        let mut out = String::new();
        if self.config.experiment == Experiment::Cluster {
            let mut order: Vec<&CellReport> = self.cells.iter().collect();
            order.sort_by(|a, b| b.sigma.total_cmp(&a.sigma));
            let multi = self.config.dims.len() > 1;
            if multi {
                let _ = write!(out, "{:>8} ", "genes");
            }
            let _ = write!(out, "{:>8}", "noise");
            for m in methods {
                let _ = write!(out, " {:>16}", m.name());
            }
            out.push('\n');
            for cell in order {
                if multi {
                    let _ = write!(out, "{:>8} ", cell.dims.0);
                }
                let _ = write!(out, "{:>8}", cell.sigma);
                for &m in methods {
                    let _ = write!(out, " {:>16}", cell_text(cell.series(m, None)));
                }
                out.push('\n');
            }
            return out;
        }
        let _ = writeln!(
            out,
            "{:>14} {:>8} {:>6} {:>13} {:>4} {:>5} {:>11} {:>11} {:>11} {:>7}",
            "dims", "lambda", "sigma", "method", "comp", "n", "mean", "sd", "median", "iters"
        );
        for cell in &self.cells {
            let dims = format!("{}x{}x{}", cell.dims.0, cell.dims.1, cell.dims.2);
            for s in &cell.stats {
                let _ = writeln!(
                    out,
                    "{:>14} {:>8} {:>6} {:>13} {:>4} {:>5} {:>11.3e} {:>11.3e} {:>11.3e} {:>7}",
                    dims,
                    cell.lambda.map(|l| l.to_string()).unwrap_or_default(),
                    cell.sigma,
                    s.method.name(),
                    s.component.map(|c| c.to_string()).unwrap_or_default(),
                    s.n,
                    s.mean,
                    s.sd,
                    s.median,
                    s.mean_iterations
                        .map(|i| format!("{i:.1}"))
                        .unwrap_or_default(),
                );
            }
        }
        let failed: usize = self.cells.iter().map(|c| c.failures.len()).sum();
        if failed > 0 {
            let _ = writeln!(out, "{failed} failed fits excluded");
        }
        out
    }
}

fn cell_text(s: Option<&SeriesStats>) -> String {
    match s {
        Some(s) if s.n_failed > 0 => format!("{:.3}({:.3}) [{} failed]", s.mean, s.sd, s.n_failed),
        Some(s) => format!("{:.3}({:.3})", s.mean, s.sd),
        None => "-".into(),
    }
}
