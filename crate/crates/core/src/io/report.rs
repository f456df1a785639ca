use std::path::Path;

use serde::{Deserialize, Serialize};

use super::csv::{write_matrix_csv, AxisLabels, LabeledMatrix};
use crate::decomp::{Centering, TpcaModel, Variant};
use crate::error::{Error, Result};
use crate::synth::SimReport;
use crate::tensor::Matrix;

/// Version of the `model.json` layout.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Shortest decimal text that parses back to exactly `x`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `report.json` and `scores.csv` into `dir`.
pub fn write_sim_report(dir: &Path, report: &SimReport) -> Result<()> {
    write_json(&dir.join("report.json"), report)?;
    write_scores_csv(&dir.join("scores.csv"), report)
}

/// One line per (cell, method, component, run) score, for external plotting.
pub fn write_scores_csv(path: &Path, report: &SimReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "cell",
        "d_g",
        "d_s",
        "d_t",
        "lambda",
        "sigma",
        "method",
        "component",
        "metric",
        "run",
        "value",
        "iterations",
        "converged",
    ])?;
    for cell in &report.cells {
        for s in &cell.scores {
            for (i, (&run, &value)) in s.runs.iter().zip(&s.values).enumerate() {
                let iterations = s
                    .iterations
                    .as_ref()
                    .map(|it| it[i].to_string())
                    .unwrap_or_default();
                let converged = s
                    .converged
                    .as_ref()
                    .map(|c| c[i].to_string())
                    .unwrap_or_default();
                w.write_record([
                    cell.index.to_string(),
                    cell.dims.0.to_string(),
                    cell.dims.1.to_string(),
                    cell.dims.2.to_string(),
                    cell.lambda.map(fmt_f64).unwrap_or_default(),
                    fmt_f64(cell.sigma),
                    s.method.name().to_string(),
                    s.component.map(|c| c.to_string()).unwrap_or_default(),
                    s.metric.name().to_string(),
                    run.to_string(),
                    fmt_f64(value),
                    iterations,
                    converged,
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Contents of `model.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub schema_version: u32,
    pub dims: (usize, usize, usize),
    pub rank: usize,
    pub variant: Variant,
    pub centering: Centering,
    pub sigma: f64,
    pub lambdas: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
}

impl ModelSummary {
    pub fn new(model: &TpcaModel, dims: (usize, usize, usize)) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            dims,
            rank: model.rank,
            variant: model.variant,
            centering: model.centering,
            sigma: model.sigma,
            lambdas: model.components.iter().map(|c| c.lambda).collect(),
            iterations: model.iterations_used.clone(),
            converged: model.converged.clone(),
        }
    }
}

fn factor_names(r: usize) -> Vec<String> {
    (1..=r).map(|k| format!("factor{k}")).collect()
}

/// Writes `scree.csv`, `spatial_factors.csv`, `temporal_factors.csv`,
/// `loadings.csv` and `model.json` into `dir`.
pub fn write_model_outputs(
    dir: &Path,
    labels: &AxisLabels,
    model: &TpcaModel,
    scree: &[f64],
    loadings: &Matrix,
) -> Result<()> {
    let r = model.components.len();
    let names = factor_names(r);
    let columns = |pick: fn(&crate::decomp::Component) -> &Vec<f64>| {
        Matrix::from_columns(
            &model
                .components
                .iter()
                .map(|c| pick(c).clone())
                .collect::<Vec<_>>(),
        )
    };

    let mut w = csv::Writer::from_path(dir.join("scree.csv"))?;
    w.write_record(["k", "eigenvalue"])?;
    for (k, v) in scree.iter().enumerate() {
        w.write_record([(k + 1).to_string(), fmt_f64(*v)])?;
    }
    w.flush()
        .map_err(|e| Error::io(&dir.join("scree.csv"), e))?;

    write_matrix_csv(
        &dir.join("spatial_factors.csv"),
        &LabeledMatrix {
            corner: "region".into(),
            row_labels: labels.regions.clone(),
            col_labels: names.clone(),
            matrix: columns(|c| &c.v)?,
        },
    )?;
    write_matrix_csv(
        &dir.join("temporal_factors.csv"),
        &LabeledMatrix {
            corner: "time".into(),
            row_labels: labels.times.clone(),
            col_labels: names.clone(),
            matrix: columns(|c| &c.w)?,
        },
    )?;
    write_matrix_csv(
        &dir.join("loadings.csv"),
        &LabeledMatrix {
            corner: "gene".into(),
            row_labels: labels.genes.clone(),
            col_labels: names,
            matrix: loadings.clone(),
        },
    )?;
    let dims = (labels.genes.len(), labels.regions.len(), labels.times.len());
    write_json(&dir.join("model.json"), &ModelSummary::new(model, dims))
}
