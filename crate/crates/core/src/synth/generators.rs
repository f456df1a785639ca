use serde::{Deserialize, Serialize};

use crate::decomp::{classical_pca_baseline, Component};
use crate::error::{Error, Result};
use crate::linalg::{
    random_orthonormal, sample_gaussian_tensor, sample_unit_sphere, thin_svd, SeededRng,
};
use crate::tensor::{dot, norm, outer3, Matrix, Tensor3};

/// Default shape of the rank-four experiment.
pub const RANK4_SHAPE: (usize, usize, usize) = (2000, 10, 13);
/// Shape of the clustering experiment.
pub const CLUSTER_SHAPE: (usize, usize, usize) = (1087, 10, 13);
/// Model scales of the clustering experiment.
pub const CLUSTER_LAMBDAS: [f64; 3] = [337.8, 27.1, 9.0];

/// True factors of a simulated tensor, in the `√d_G λ u⊗v⊗w` normalization
/// with unit-norm factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub components: Vec<Component>,
    /// 0-based cluster per gene, clustering experiment only.
    pub labels: Option<Vec<usize>>,
    pub sigma: f64,
}

fn check_nonneg(what: &str, x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "{what} must be finite and >= 0, got {x}"
        )));
    }
    Ok(())
}

/// Cubic rank-one model `X = √d λ u⊗v⊗w + E` with factors uniform on the
/// unit sphere and `E` i.i.d. `N(0, σ²)`.
pub fn gen_rank1(
    d: usize,
    lambda: f64,
    sigma: f64,
    rng: &mut SeededRng,
) -> Result<(Tensor3, GroundTruth)> {
    gen_rank1_shape((d, d, d), lambda, sigma, rng)
}

/// [`gen_rank1`] on a `d_G × d_S × d_T` grid: `X = √d_G λ u⊗v⊗w + E`.
pub fn gen_rank1_shape(
    dims: (usize, usize, usize),
    lambda: f64,
    sigma: f64,
    rng: &mut SeededRng,
) -> Result<(Tensor3, GroundTruth)> {
    let (dg, ds, dt) = dims;
    if dg.min(ds).min(dt) < 2 {
        return Err(Error::InvalidArgument(format!(
            "rank-one model needs every dimension >= 2, got {dg}x{ds}x{dt}"
        )));
    }
    check_nonneg("lambda", lambda)?;
    check_nonneg("sigma", sigma)?;
    let u = sample_unit_sphere(dg, rng)?;
    let v = sample_unit_sphere(ds, rng)?;
    let w = sample_unit_sphere(dt, rng)?;
    let mut comp = Component { lambda, u, v, w };
    comp.canonicalize();
    let mut x = sample_gaussian_tensor(dg, ds, dt, sigma, rng)?;
    x.axpy(1.0, &comp.to_tensor())?;
    Ok((
        x,
        GroundTruth {
            components: vec![comp],
            labels: None,
            sigma,
        },
    ))
}

/// Rank-four model `X = √d_G λ Σ_k ((5−k)/4) u_k⊗v_k⊗w_k + E` with Haar
/// orthonormal frames.
pub fn gen_rank4(
    dims: (usize, usize, usize),
    lambda: f64,
    sigma: f64,
    rng: &mut SeededRng,
) -> Result<(Tensor3, GroundTruth)> {
    let (dg, ds, dt) = dims;
    if dg.min(ds).min(dt) < 4 {
        return Err(Error::InvalidArgument(format!(
            "rank-four model needs every dimension >= 4, got {dg}x{ds}x{dt}"
        )));
    }
    check_nonneg("lambda", lambda)?;
    check_nonneg("sigma", sigma)?;
    let u = random_orthonormal(dg, 4, rng)?;
    let v = random_orthonormal(ds, 4, rng)?;
    let w = random_orthonormal(dt, 4, rng)?;
    let components: Vec<Component> = (0..4)
        .map(|k| {
            let mut c = Component {
                lambda: lambda * (4 - k) as f64 / 4.0,
                u: u.column(k),
                v: v.column(k),
                w: w.column(k),
            };
            c.canonicalize();
            c
        })
        .collect();
    let mut x = sample_gaussian_tensor(dg, ds, dt, sigma, rng)?;
    for c in &components {
        x.axpy(1.0, &c.to_tensor())?;
    }
    Ok((
        x,
        GroundTruth {
            components,
            labels: None,
            sigma,
        },
    ))
}

/// Clustered-loadings model on an `n_genes × 10 × 13` grid:
/// `X = Σ_{k≤3} λ_k y_k ⊗ v_k ⊗ w_k + noise · E`, where row `g` of the loading
/// matrix `[y_1 y_2 y_3]` is the centroid of gene `g`'s cluster. Centroids
/// are the orthonormal `K × 3` frame from the SVD of a `K × 3` Gaussian
/// matrix (zero-padded when `K < 3`); clusters are assigned uniformly.
pub fn gen_cluster(
    n_genes: usize,
    k: usize,
    noise: f64,
    rng: &mut SeededRng,
) -> Result<(Tensor3, GroundTruth)> {
    let (_, ds, dt) = CLUSTER_SHAPE;
    if k == 0 || k > n_genes {
        return Err(Error::OutOfRange {
            what: "K",
            value: k,
            min: 1,
            max: n_genes,
        });
    }
    check_nonneg("noise", noise)?;
    let labels: Vec<usize> = (0..n_genes).map(|_| rng.below(k)).collect();
    let g = Matrix::from_fn(k, 3, |_, _| rng.standard_normal());
    let frame = thin_svd(&g)?.u;
    let centroids = Matrix::from_fn(k, 3, |i, j| {
        if j < frame.cols() {
            frame.get(i, j)
        } else {
            0.0
        }
    });
    let v = random_orthonormal(ds, 3, rng)?;
    let w = random_orthonormal(dt, 3, rng)?;

    let mut x = sample_gaussian_tensor(n_genes, ds, dt, noise, rng)?;
    let mut components = Vec::new();
    let sqrt_n = (n_genes as f64).sqrt();
    for c in 0..3 {
        let y: Vec<f64> = labels.iter().map(|&l| centroids.get(l, c)).collect();
        let mut term = outer3(&y, &v.column(c), &w.column(c));
        term.scale(CLUSTER_LAMBDAS[c]);
        x.axpy(1.0, &term)?;
        let ny = norm(&y);
        if ny > 0.0 {
            let mut comp = Component {
                lambda: CLUSTER_LAMBDAS[c] * ny / sqrt_n,
                u: y.iter().map(|a| a / ny).collect(),
                v: v.column(c),
                w: w.column(c),
            };
            comp.canonicalize();
            components.push(comp);
        }
    }
    Ok((
        x,
        GroundTruth {
            components,
            labels: Some(labels),
            sigma: noise,
        },
    ))
}

/// `max{1 − |⟨v̂, v⟩|, 1 − |⟨ŵ, w⟩|}`, clamped to `[0, 1]`.
pub fn estimation_error(est: &Component, truth: &Component) -> Result<f64> {
    if est.v.len() != truth.v.len() || est.w.len() != truth.w.len() {
        return Err(Error::DimensionMismatch {
            op: "estimation_error",
            expected: format!("factors of length ({}, {})", truth.v.len(), truth.w.len()),
            got: format!("({}, {})", est.v.len(), est.w.len()),
        });
    }
    let ev = 1.0 - dot(&est.v, &truth.v).abs();
    let ew = 1.0 - dot(&est.w, &truth.w).abs();
    Ok(ev.max(ew).clamp(0.0, 1.0))
}

/// Classical-PCA estimates of the first `r` components: spatial factors and
/// loadings from the matrix pooled over time, temporal factors from the
/// matrix pooled over regions.
pub fn classical_components(x: &Tensor3, r: usize) -> Result<Vec<Component>> {
    let spatial = classical_pca_baseline(x, r, 3)?;
    let temporal = classical_pca_baseline(x, r, 2)?;
    Ok(spatial
        .into_iter()
        .zip(temporal)
        .map(|(s, t)| Component {
            lambda: s.lambda,
            u: s.loading,
            v: s.factor,
            w: t.factor,
        })
        .collect())
}
