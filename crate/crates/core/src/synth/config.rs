use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bench::Method;
use super::generators::{CLUSTER_SHAPE, RANK4_SHAPE};
use crate::decomp::{PowerOpts, SigmaMode, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Rank1,
    Rank4,
    Cluster,
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank1" => Ok(Experiment::Rank1),
            "rank4" => Ok(Experiment::Rank4),
            "cluster" => Ok(Experiment::Cluster),
            other => Err(Error::Config {
                message: format!("unknown experiment {other:?} (expected rank1, rank4 or cluster)"),
                keys: vec!["experiment".into()],
            }),
        }
    }
}

/// A Monte-Carlo benchmark: the grid `dims × lambdas × sigmas`, each cell
/// simulated `n_runs` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub experiment: Experiment,
    pub dims: Vec<(usize, usize, usize)>,
    /// Signal grid; empty for the cluster experiment, whose scales are fixed.
    pub lambdas: Vec<f64>,
    /// Noise standard deviations (the observation noise for `cluster`).
    pub sigmas: Vec<f64>,
    pub n_runs: usize,
    /// Number of clusters, cluster experiment only.
    pub k: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// k-means restarts per fit.
    pub restarts: usize,
    /// Number of loading columns handed to k-means.
    pub cluster_dims: usize,
    pub opts: PowerOpts,
}

impl SimConfig {
    /// Defaults for `experiment`, with empty grids where no default exists.
    pub fn new(experiment: Experiment) -> Self {
        let (dims, lambdas, methods) = match experiment {
            Experiment::Rank1 => (vec![], vec![], vec![Method::Ufd, Method::Pit]),
            Experiment::Rank4 => (
                vec![RANK4_SHAPE],
                vec![],
                vec![Method::ClassicalPca, Method::TensorPca],
            ),
            Experiment::Cluster => (
                vec![CLUSTER_SHAPE],
                vec![],
                vec![Method::ClassicalPca, Method::TensorPca],
            ),
        };
        Self {
            experiment,
            dims,
            lambdas,
            sigmas: vec![1.0],
            n_runs: 1,
            k: 5,
            seed: 0,
            methods,
            restarts: 10,
            cluster_dims: 4,
            opts: PowerOpts::default(),
        }
    }

    /// Rank fitted by every method.
    pub fn rank(&self) -> usize {
        match self.experiment {
            Experiment::Rank1 => 1,
            Experiment::Rank4 => 4,
            Experiment::Cluster => self.cluster_dims,
        }
    }

    /// Number of grid cells.
    pub fn n_cells(&self) -> usize {
        self.dims.len() * self.lambdas.len().max(1) * self.sigmas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut why = Vec::new();
        let mut flag = |key: &str, msg: String| {
            bad.push(key.to_string());
            why.push(msg);
        };
        if self.n_runs == 0 {
            flag("runs", "runs must be >= 1".into());
        }
        if self.dims.is_empty() {
            flag("d", "no dimensions given".into());
        }
        for &(a, b, c) in &self.dims {
            let min = if self.experiment == Experiment::Rank4 {
                4
            } else {
                2
            };
            if a < min || b < min || c < min {
                flag(
                    "dims",
                    format!("dimensions {a}x{b}x{c} must all be >= {min}"),
                );
            }
            if self.experiment == Experiment::Cluster
                && (b, c) != (CLUSTER_SHAPE.1, CLUSTER_SHAPE.2)
            {
                flag(
                    "dims",
                    format!("cluster grid is n_genes x 10 x 13, got {a}x{b}x{c}"),
                );
            }
        }
        match self.experiment {
            Experiment::Cluster => {
                if !self.lambdas.is_empty() {
                    flag("lambda", "the cluster experiment has fixed scales".into());
                }
                if self.k < 2 {
                    flag("k", format!("k must be >= 2, got {}", self.k));
                }
                if self.dims.iter().any(|d| self.k > d.0) {
                    flag("k", format!("k = {} exceeds the number of genes", self.k));
                }
                if self.cluster_dims == 0 || self.cluster_dims > 10 {
                    flag(
                        "cluster_dims",
                        format!("cluster_dims must be in 1..=10, got {}", self.cluster_dims),
                    );
                }
            }
            _ => {
                if self.lambdas.is_empty() {
                    flag("lambda", "no lambda given".into());
                }
            }
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            flag("lambda", "lambda values must be finite and >= 0".into());
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            flag(
                "sigma",
                "sigma grid must be nonempty, finite and >= 0".into(),
            );
        }
        if self.methods.is_empty() {
            flag("methods", "no methods given".into());
        }
        if self.restarts == 0 {
            flag("restarts", "restarts must be >= 1".into());
        }
        if self.opts.max_iter == 0 {
            flag("max_iter", "max_iter must be >= 1".into());
        }
        if !(self.opts.tol > 0.0) {
            flag("tol", "tol must be > 0".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            bad.dedup();
            Err(Error::Config {
                message: why.join("; "),
                keys: bad,
            })
        }
    }
}

fn parse_dims(s: &str) -> Option<(usize, usize, usize)> {
    let parts: Vec<usize> = s
        .split(['x', 'X'])
        .map(|p| p.trim().parse().ok())
        .collect::<Option<_>>()?;
    match parts[..] {
        [a, b, c] => Some((a, b, c)),
        _ => None,
    }
}

/// Parses the flat `key = value` config format.
///
/// `#` starts a comment. A key may repeat, and a value may hold a
/// comma-separated list; both extend the grid for that key. Recognized keys:
/// `experiment`, `d` (cubic size), `dims` (`2000x10x13`), `n_genes`,
/// `lambda`, `sigma`, `runs`, `k`, `seed`, `methods`, `restarts`,
/// `cluster_dims`, `variant`, `max_iter`, `tol`, `sigma_mode`
/// (`estimate` or `known`; `known` uses the cell's sigma).
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut bad = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bad.push(format!("line {}", n + 1));
            continue;
        };
        let values = entries.entry(key.trim().to_string()).or_default();
        values.extend(
            value
                .split(',')
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty()),
        );
    }
    if !bad.is_empty() {
        return Err(Error::Config {
            message: "expected key = value".into(),
            keys: bad,
        });
    }

    let experiment: Experiment = match entries.remove("experiment").as_deref() {
        Some([one]) => one.parse()?,
        _ => {
            return Err(Error::Config {
                message: "exactly one experiment is required".into(),
                keys: vec!["experiment".into()],
            })
        }
    };
    let mut cfg = SimConfig::new(experiment);
    let mut custom_dims = Vec::new();
    let mut messages = Vec::new();
    let mut fail = |key: &str, msg: String| {
        bad.push(key.to_string());
        messages.push(msg);
    };

    for (key, values) in &entries {
        let single = || match values.as_slice() {
            [one] => Some(one.as_str()),
            _ => None,
        };
        macro_rules! scalar {
            ($t:ty) => {
                single().and_then(|v| v.parse::<$t>().ok())
            };
        }
        match key.as_str() {
            "d" => match values
                .iter()
                .map(|v| v.parse::<usize>().ok())
                .collect::<Option<Vec<_>>>()
            {
                Some(ds) => custom_dims.extend(ds.into_iter().map(|d| (d, d, d))),
                None => fail(key, "d expects integers".into()),
            },
            "dims" => match values
                .iter()
                .map(|v| parse_dims(v))
                .collect::<Option<Vec<_>>>()
            {
                Some(ds) => custom_dims.extend(ds),
                None => fail(key, "dims expects AxBxC".into()),
            },
            "n_genes" => match values
                .iter()
                .map(|v| v.parse::<usize>().ok())
                .collect::<Option<Vec<_>>>()
            {
                Some(ns) => custom_dims.extend(
                    ns.into_iter()
                        .map(|n| (n, CLUSTER_SHAPE.1, CLUSTER_SHAPE.2)),
                ),
                None => fail(key, "n_genes expects integers".into()),
            },
            "lambda" | "sigma" => match values
                .iter()
                .map(|v| v.parse::<f64>().ok())
                .collect::<Option<Vec<_>>>()
            {
                Some(xs) if key == "lambda" => cfg.lambdas = xs,
                Some(xs) => cfg.sigmas = xs,
                None => fail(key, format!("{key} expects numbers")),
            },
            "methods" => match values
                .iter()
                .map(|v| v.parse::<Method>())
                .collect::<Result<Vec<_>>>()
            {
                Ok(ms) => {
                    let mut seen = Vec::new();
                    for m in ms {
                        if !seen.contains(&m) {
                            seen.push(m);
                        }
                    }
                    cfg.methods = seen;
                }
                Err(e) => fail(key, e.to_string()),
            },
            "runs" => match scalar!(usize) {
                Some(v) => cfg.n_runs = v,
                None => fail(key, "runs expects one integer".into()),
            },
            "k" => match scalar!(usize) {
                Some(v) => cfg.k = v,
                None => fail(key, "k expects one integer".into()),
            },
            "seed" => match scalar!(u64) {
                Some(v) => cfg.seed = v,
                None => fail(key, "seed expects one unsigned integer".into()),
            },
            "restarts" => match scalar!(usize) {
                Some(v) => cfg.restarts = v,
                None => fail(key, "restarts expects one integer".into()),
            },
            "cluster_dims" => match scalar!(usize) {
                Some(v) => cfg.cluster_dims = v,
                None => fail(key, "cluster_dims expects one integer".into()),
            },
            "max_iter" => match scalar!(usize) {
                Some(v) => cfg.opts.max_iter = v,
                None => fail(key, "max_iter expects one integer".into()),
            },
            "tol" => match scalar!(f64) {
                Some(v) => cfg.opts.tol = v,
                None => fail(key, "tol expects one number".into()),
            },
            "variant" => match single().map(str::parse::<Variant>) {
                Some(Ok(v)) => cfg.opts.variant = v,
                _ => fail(key, "variant expects direct or gram".into()),
            },
            "sigma_mode" => match single() {
                Some("estimate") => cfg.opts.sigma_mode = SigmaMode::Estimate,
                // the value is substituted per cell
                Some("known") => cfg.opts.sigma_mode = SigmaMode::Known(0.0),
                _ => fail(key, "sigma_mode expects estimate or known".into()),
            },
            _ => fail(key, format!("unknown key {key:?}")),
        }
    }
    if !bad.is_empty() {
        return Err(Error::Config {
            message: messages.join("; "),
            keys: bad,
        });
    }
    if !custom_dims.is_empty() {
        cfg.dims = custom_dims;
    }
    cfg.validate()?;
    Ok(cfg)
}
