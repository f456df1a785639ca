use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SeededRng;
use crate::tensor::Matrix;

pub const MAX_LLOYD_ITERATIONS: usize = 300;

/// Hard clustering of the rows of a point matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// 0-based cluster index per point (files use 1-based ids).
    pub labels: Vec<usize>,
    /// `K × p` centroids.
    pub centroids: Matrix,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after the seeding assignment and after every Lloyd step.
    #[serde(skip)]
    pub inertia_history: Vec<f64>,
}

impl ClusterAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.centroids.rows()];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by Lloyd iterations; the best of `n_restarts`
/// runs by inertia is returned (earliest wins ties).
pub fn kmeans(
    points: &Matrix,
    k: usize,
    n_restarts: usize,
    rng: &mut SeededRng,
) -> Result<ClusterAssignment> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::OutOfRange {
            what: "K",
            value: k,
            min: 1,
            max: n,
        });
    }
    if n_restarts == 0 {
        return Err(Error::InvalidArgument("n_restarts must be >= 1".into()));
    }
    if points.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("kmeans: non-finite point".into()));
    }
    let mut best: Option<ClusterAssignment> = None;
    for _ in 0..n_restarts {
        let init = plus_plus_seeds(points, k, rng);
        let run = lloyd(points, init);
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("n_restarts >= 1"))
}

fn plus_plus_seeds(points: &Matrix, k: usize, rng: &mut SeededRng) -> Matrix {
    let (n, p) = (points.rows(), points.cols());
    let mut centers = Matrix::zeros(k, p);
    let first = rng.below(n);
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), points.row(first)))
        .collect();
    copy_row(&mut centers, 0, points.row(first));
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target beyond the last partial sum
            chosen.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.below(n)
        };
        copy_row(&mut centers, c, points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(pick)));
        }
    }
    centers
}

fn copy_row(m: &mut Matrix, r: usize, src: &[f64]) {
    for (j, &x) in src.iter().enumerate() {
        m.set(r, j, x);
    }
}

/// Nearest centroid per point (lowest index on ties) and the inertia.
fn assign(points: &Matrix, centers: &Matrix, labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let row = points.row(i);
        let mut best = (0, f64::INFINITY);
        for c in 0..centers.rows() {
            let d = sq_dist(row, centers.row(c));
            if d < best.1 {
                best = (c, d);
            }
        }
        *label = best.0;
        inertia += best.1;
    }
    inertia
}

fn lloyd(points: &Matrix, mut centers: Matrix) -> ClusterAssignment {
    let (n, p, k) = (points.rows(), points.cols(), centers.rows());
    let mut labels = vec![usize::MAX; n];
    let mut scratch = vec![0; n];
    let mut inertia = assign(points, &centers, &mut labels);
    let mut history = vec![inertia];
    let mut iterations = 0;
    // centroid means are exact only up to rounding at the data's scale
    let slack = 1e-12 * points.data().iter().map(|x| x * x).sum::<f64>();
    while iterations < MAX_LLOYD_ITERATIONS {
        iterations += 1;
        // update: empty clusters keep their centroid
        let mut sums = Matrix::zeros(k, p);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (j, &x) in points.row(i).iter().enumerate() {
                sums.set(l, j, sums.get(l, j) + x);
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..p {
                    centers.set(c, j, sums.get(c, j) / counts[c] as f64);
                }
            }
        }
        let next = assign(points, &centers, &mut scratch);
        debug_assert!(
            next <= inertia + slack,
            "inertia increased: {inertia} -> {next}"
        );
        inertia = next;
        history.push(inertia);
        if scratch == labels {
            break;
        }
        std::mem::swap(&mut labels, &mut scratch);
    }
    ClusterAssignment {
        labels,
        centroids: centers,
        inertia,
        iterations,
        inertia_history: history,
    }
}
