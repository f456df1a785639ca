//! Simulation generators, scoring, clustering and the Monte-Carlo runner.

mod ari;
mod bench;
mod config;
mod generators;
mod kmeans;

pub use ari::adjusted_rand_index;
pub use bench::{
    run_benchmark, run_benchmark_with, CellReport, CellScores, Method, Metric, RunFailure,
    SeriesStats, SimReport, REPORT_SCHEMA_VERSION,
};
pub use config::{parse_config, Experiment, SimConfig};
pub use generators::{
    classical_components, estimation_error, gen_cluster, gen_rank1, gen_rank1_shape, gen_rank4,
    GroundTruth, CLUSTER_LAMBDAS, CLUSTER_SHAPE, RANK4_SHAPE,
};
pub use kmeans::{kmeans, ClusterAssignment, MAX_LLOYD_ITERATIONS};
