use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::fmt_f64;
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor3};

const MAX_LISTED_MISSING: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Impute {
    /// Missing cells are an error.
    #[default]
    Error,
    /// Missing cells take the mean of the gene's observed cells.
    Mean,
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub impute: Impute,
    /// Order every axis lexicographically instead of by first appearance.
    pub sort_axes: bool,
    /// Keep only these genes, in this order.
    pub genes: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisLabels {
    pub genes: Vec<String>,
    pub regions: Vec<String>,
    pub times: Vec<String>,
}

impl AxisLabels {
    /// `1..=n` labels for an unlabeled tensor.
    pub fn numbered(dims: (usize, usize, usize)) -> Self {
        let n = |k: usize| (1..=k).map(|i| i.to_string()).collect();
        Self {
            genes: n(dims.0),
            regions: n(dims.1),
            times: n(dims.2),
        }
    }
}

#[derive(Default)]
struct Axis {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Axis {
    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    /// Positions of the current names under lexicographic order.
    fn sorted_positions(&self, sort: bool) -> (Vec<String>, Vec<usize>) {
        let mut order: Vec<usize> = (0..self.names.len()).collect();
        if sort {
            order.sort_by(|&a, &b| self.names[a].cmp(&self.names[b]));
        }
        let mut pos = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            pos[old] = new;
        }
        (order.iter().map(|&i| self.names[i].clone()).collect(), pos)
    }
}

fn parse_err(row: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        row,
        message: message.into(),
    }
}

/// Reads `gene,region,time,value` records into a tensor. Replicates of a
/// cell are averaged; axes follow first appearance unless sorted.
pub fn read_long_csv(path: &Path, opts: &CsvOptions) -> Result<(Tensor3, AxisLabels)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_long_csv(file, opts)
}

pub fn parse_long_csv(reader: impl Read, opts: &CsvOptions) -> Result<(Tensor3, AxisLabels)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let expected = ["gene", "region", "time", "value"];
    if header.is_empty() {
        return Err(parse_err(1, "empty file"));
    }
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(
            1,
            format!(
                "expected header gene,region,time,value, got {}",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut genes = Axis::default();
    if let Some(list) = &opts.genes {
        for g in list {
            genes.intern(g);
        }
    }
    let (mut regions, mut times) = (Axis::default(), Axis::default());
    let mut cells: HashMap<(usize, usize, usize), Vec<f64>> = HashMap::new();
    let mut n_records = 0usize;
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 4 {
            return Err(parse_err(
                row,
                format!("expected 4 fields, got {}", record.len()),
            ));
        }
        let (g, r, t, v) = (&record[0], &record[1], &record[2], &record[3]);
        if g.is_empty() || r.is_empty() || t.is_empty() {
            return Err(parse_err(row, "empty identifier"));
        }
        let value: f64 = v
            .parse()
            .map_err(|_| parse_err(row, format!("value {v:?} is not a number")))?;
        if !value.is_finite() {
            return Err(parse_err(row, format!("value {v:?} is not finite")));
        }
        n_records += 1;
        let gi = match &opts.genes {
            Some(_) => match genes.index.get(g) {
                Some(&i) => i,
                None => continue,
            },
            None => genes.intern(g),
        };
        let key = (gi, regions.intern(r), times.intern(t));
        cells.entry(key).or_default().push(value);
    }
    if n_records == 0 {
        return Err(parse_err(1, "no data rows"));
    }
    if cells.is_empty() {
        return Err(Error::InvalidArgument("no rows match the gene list".into()));
    }

    // a gene list fixes the gene order; only the other axes are sorted
    let (gene_names, gpos) = genes.sorted_positions(opts.sort_axes && opts.genes.is_none());
    let (region_names, rpos) = regions.sorted_positions(opts.sort_axes);
    let (time_names, tpos) = times.sorted_positions(opts.sort_axes);
    let (dg, ds, dt) = (gene_names.len(), region_names.len(), time_names.len());

    let mut data = vec![f64::NAN; dg * ds * dt];
    for ((g, r, t), mut values) in cells {
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        data[(gpos[g] * ds + rpos[r]) * dt + tpos[t]] = mean;
    }

    let missing: Vec<usize> = (0..data.len()).filter(|&i| data[i].is_nan()).collect();
    if !missing.is_empty() {
        match opts.impute {
            Impute::Error => {
                let cells = missing
                    .iter()
                    .take(MAX_LISTED_MISSING)
                    .map(|&i| {
                        (
                            gene_names[i / (ds * dt)].clone(),
                            region_names[(i / dt) % ds].clone(),
                            time_names[i % dt].clone(),
                        )
                    })
                    .collect();
                return Err(Error::MissingCells {
                    count: missing.len(),
                    cells,
                });
            }
            Impute::Mean => {
                for (g, slice) in data.chunks_mut(ds * dt).enumerate() {
                    let observed: Vec<f64> =
                        slice.iter().copied().filter(|x| !x.is_nan()).collect();
                    if observed.is_empty() {
                        return Err(Error::InvalidArgument(format!(
                            "gene {} has no observed cells to impute from",
                            gene_names[g]
                        )));
                    }
                    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
                    slice
                        .iter_mut()
                        .filter(|x| x.is_nan())
                        .for_each(|x| *x = mean);
                }
            }
        }
    }
    let labels = AxisLabels {
        genes: gene_names,
        regions: region_names,
        times: time_names,
    };
    Ok((Tensor3::new(dg, ds, dt, data)?, labels))
}

/// One id per line; blank lines and `#` comments ignored.
pub fn read_gene_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let genes: Vec<String> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if genes.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{}: empty gene list",
            path.display()
        )));
    }
    Ok(genes)
}

/// A matrix with a label per row and a header per column.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub corner: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub matrix: Matrix,
}

/// Writes `corner,col...` then one `label,value...` line per row.
pub fn write_matrix_csv(path: &Path, m: &LabeledMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![m.corner.clone()];
    header.extend(m.col_labels.iter().cloned());
    w.write_record(&header)?;
    for (i, label) in m.row_labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(m.matrix.row(i).iter().map(|&x| fmt_f64(x)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_matrix_csv`].
pub fn read_matrix_csv(path: &Path) -> Result<LabeledMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(parse_err(
            1,
            "expected a label column and at least one value column",
        ));
    }
    let cols = header.len() - 1;
    let mut row_labels = Vec::new();
    let mut data = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(parse_err(
                row,
                format!("expected {} fields, got {}", header.len(), record.len()),
            ));
        }
        row_labels.push(record[0].to_string());
        for f in record.iter().skip(1) {
            let x: f64 = f
                .parse()
                .map_err(|_| parse_err(row, format!("value {f:?} is not a number")))?;
            if !x.is_finite() {
                return Err(parse_err(row, format!("value {f:?} is not finite")));
            }
            data.push(x);
        }
    }
    if row_labels.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    Ok(LabeledMatrix {
        corner: header[0].to_string(),
        row_labels,
        col_labels: header.iter().skip(1).map(String::from).collect(),
        matrix: Matrix::new(data.len() / cols, cols, data)?,
    })
}
