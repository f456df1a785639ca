//! Tensor PCA estimators.
//!
//! The model is `X = √d_G Σ_k λ_k u_k ⊗ v_k ⊗ w_k + E` with orthonormal
//! factor sets and i.i.d. `N(0, σ²)` noise. Estimation runs in two stages:
//!
//! 1. [`unfold_init`]: SVD of the mode-1 unfolding `M(X)`; each right
//!    singular vector is reshaped to `d_S × d_T` and split into its leading
//!    singular pair `(v̂_k, ŵ_k)`.
//! 2. [`power_iterate`]: noise-corrected alternating updates started from the
//!    unfolding estimate, one component at a time, without deflation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{canonical_sign, thin_svd};
use crate::tensor::{
    dot, mode_product, mode_product_vec, norm, normalize, outer3, unfold1, vec_inv, Matrix,
    Tensor3, Vector,
};

/// Iterates whose pre-normalization norm falls below this are rejected.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// One rank-one term `λ · u ⊗ v ⊗ w` (scaled by `√d_G` in the model).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub lambda: f64,
    /// Gene loadings, length `d_G`.
    pub u: Vector,
    /// Spatial factor, length `d_S`.
    pub v: Vector,
    /// Temporal factor, length `d_T`.
    pub w: Vector,
}

impl Component {
    /// Flips `v` and `w` to the canonical sign (largest-magnitude entry
    /// positive) and compensates in `u`, leaving the rank-one term unchanged.
    pub fn canonicalize(&mut self) {
        let mut flips = 0;
        if canonical_sign(&mut self.v) {
            flips += 1;
        }
        if canonical_sign(&mut self.w) {
            flips += 1;
        }
        if flips % 2 == 1 {
            self.u.iter_mut().for_each(|x| *x = -*x);
        }
        if self.lambda < 0.0 {
            self.lambda = -self.lambda;
            self.u.iter_mut().for_each(|x| *x = -*x);
        }
    }

    /// `√d_G · λ · u ⊗ v ⊗ w`.
    pub fn to_tensor(&self) -> Tensor3 {
        let mut t = outer3(&self.u, &self.v, &self.w);
        t.scale((self.u.len() as f64).sqrt() * self.lambda);
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `a ← X ×₂ b ×₃ c`, `b ← X ×₁ a ×₃ c − σ²b`, `c ← X ×₁ a ×₂ b − σ²c`,
    /// where the `c` update uses the previous `b`.
    Direct,
    /// `b ← d_G⁻¹ Σ_g X_g c cᵀ X_gᵀ b − σ²b`, then the same for `c` with the
    /// fresh `b`.
    #[default]
    Gram,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Variant::Direct),
            "gram" => Ok(Variant::Gram),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant {other:?} (expected direct or gram)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Direct => "direct",
            Variant::Gram => "gram",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaMode {
    Known(f64),
    #[default]
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    #[default]
    None,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerOpts {
    pub max_iter: usize,
    /// Stop once `1 − |⟨b⁽ᵐ⁾, b⁽ᵐ⁻¹⁾⟩|` and the same for `c` are below this.
    pub tol: f64,
    pub variant: Variant,
    pub sigma_mode: SigmaMode,
}

impl Default for PowerOpts {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-10,
            variant: Variant::Gram,
            sigma_mode: SigmaMode::Estimate,
        }
    }
}

impl PowerOpts {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if let SigmaMode::Known(s) = self.sigma_mode {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "sigma must be >= 0, got {s}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpcaModel {
    /// Sorted by `lambda`, nonincreasing.
    pub components: Vec<Component>,
    pub sigma: f64,
    pub rank: usize,
    pub centering: Centering,
    pub iterations_used: Vec<usize>,
    pub converged: Vec<bool>,
    pub variant: Variant,
}

/// Result of refining one component.
#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub component: Component,
    pub iterations: usize,
    pub converged: bool,
}

fn check_rank(x: &Tensor3, r: usize) -> Result<()> {
    let (dg, ds, dt) = x.dims();
    let max = dg.min(ds * dt);
    if r == 0 || r > max {
        return Err(Error::OutOfRange {
            what: "rank",
            value: r,
            min: 1,
            max,
        });
    }
    Ok(())
}

/// Unfolding estimates of the leading `r` components, ordered by `λ̂`.
pub fn unfold_init(x: &Tensor3, r: usize) -> Result<Vec<Component>> {
    check_rank(x, r)?;
    let (dg, ds, dt) = x.dims();
    let m = unfold1(x);
    let svd = thin_svd(&m)?;
    let sqrt_dg = (dg as f64).sqrt();
    (0..r)
        .map(|k| {
            let h = svd.v.column(k);
            let hmat = vec_inv(&h, ds, dt)?;
            let inner = thin_svd(&hmat)?;
            let mut v = inner.u.column(0);
            let mut w = inner.v.column(0);
            canonical_sign(&mut v);
            canonical_sign(&mut w);
            let mut u = svd.u.column(k);
            // u's sign makes ⟨M(X), u ⊗ vec(v ⊗ w)⟩ nonnegative
            let vw: Vector = v
                .iter()
                .flat_map(|a| w.iter().map(move |b| a * b))
                .collect();
            let proj = dot(&m.tr_matvec(&u)?, &vw);
            if proj < 0.0 {
                u.iter_mut().for_each(|x| *x = -*x);
            }
            Ok(Component {
                lambda: svd.s[k] / sqrt_dg,
                u,
                v,
                w,
            })
        })
        .collect()
}

/// Root mean square of `X − Σ_k √d_G λ̂_k û_k ⊗ v̂_k ⊗ ŵ_k`.
pub fn estimate_sigma(x: &Tensor3, comps: &[Component]) -> Result<f64> {
    let mut resid = x.clone();
    for c in comps {
        resid.axpy(-1.0, &c.to_tensor())?;
    }
    let n = resid.data().len() as f64;
    Ok((resid.data().iter().map(|e| e * e).sum::<f64>() / n).sqrt())
}

/// Refines one component by the modified power iteration.
pub fn power_iterate(
    x: &Tensor3,
    init: &Component,
    sigma: f64,
    opts: &PowerOpts,
) -> Result<Refined> {
    power_iterate_observed(x, init, sigma, opts, |_, _, _| {})
}

/// As [`power_iterate`], calling `observe(m, b, c)` after every iteration.
pub fn power_iterate_observed(
    x: &Tensor3,
    init: &Component,
    sigma: f64,
    opts: &PowerOpts,
    mut observe: impl FnMut(usize, &[f64], &[f64]),
) -> Result<Refined> {
    opts.validate()?;
    let (dg, ds, dt) = x.dims();
    if init.v.len() != ds || init.w.len() != dt {
        return Err(Error::DimensionMismatch {
            op: "power_iterate",
            expected: format!("factors of length ({ds}, {dt})"),
            got: format!("({}, {})", init.v.len(), init.w.len()),
        });
    }
    if (norm(&init.v) - 1.0).abs() > 1e-8 || (norm(&init.w) - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(
            "power_iterate: initial v and w must have unit norm".into(),
        ));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma must be >= 0, got {sigma}"
        )));
    }
    let s2 = sigma * sigma;
    let inv_dg = 1.0 / dg as f64;
    let mut b = init.v.clone();
    let mut c = init.w.clone();
    let mut iterations = 0;
    let mut converged = false;

    let finish = |mut v: Vector, mut w: Vector, tag: usize| -> Result<Component> {
        canonical_sign(&mut v);
        canonical_sign(&mut w);
        let mut u = mode_product_vec(x, &v, &w, (2, 3))?;
        let nu = normalize(&mut u);
        if nu < DEGENERATE_NORM {
            return Err(Error::DegenerateIterate {
                iteration: tag,
                norm: nu,
            });
        }
        Ok(Component {
            lambda: nu / (dg as f64).sqrt(),
            u,
            v,
            w,
        })
    };

    for m in 1..=opts.max_iter {
        let (nb, nc) = match opts.variant {
            Variant::Direct => {
                let mut a = mode_product_vec(x, &b, &c, (2, 3))?;
                checked_normalize(&mut a, m)?;
                let mut nb = mode_product_vec(x, &a, &c, (1, 3))?;
                let mut nc = mode_product_vec(x, &a, &b, (1, 2))?;
                for (o, p) in nb.iter_mut().zip(&b) {
                    *o -= s2 * p;
                }
                for (o, p) in nc.iter_mut().zip(&c) {
                    *o -= s2 * p;
                }
                checked_normalize(&mut nb, m)?;
                checked_normalize(&mut nc, m)?;
                (nb, nc)
            }
            Variant::Gram => {
                let nb = gram_step(x, &b, &c, 3, inv_dg, s2, m)?;
                let nc = gram_step(x, &c, &nb, 2, inv_dg, s2, m)?;
                (nb, nc)
            }
        };
        let db = 1.0 - dot(&nb, &b).abs();
        let dc = 1.0 - dot(&nc, &c).abs();
        b = nb;
        c = nc;
        iterations = m;
        observe(m, &b, &c);
        if db < opts.tol && dc < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(Refined {
        component: finish(b, c, iterations)?,
        iterations,
        converged,
    })
}

fn checked_normalize(x: &mut [f64], iteration: usize) -> Result<()> {
    let n = normalize(x);
    if n < DEGENERATE_NORM || !n.is_finite() {
        return Err(Error::DegenerateIterate { iteration, norm: n });
    }
    Ok(())
}

/// One Gram-form update of `cur` with the other factor `fixed` contracted
/// along `fixed_mode`: `A = X ×_{fixed_mode} fixed` (a `d_G × len(cur)`
/// matrix) and the result is `normalize(d_G⁻¹ Aᵀ A cur − σ² cur)`.
fn gram_step(
    x: &Tensor3,
    cur: &[f64],
    fixed: &[f64],
    fixed_mode: usize,
    inv_dg: f64,
    s2: f64,
    iteration: usize,
) -> Result<Vector> {
    let a: Matrix = mode_product(x, fixed, fixed_mode)?;
    let ab = a.matvec(cur)?;
    let mut out = a.tr_matvec(&ab)?;
    for (o, p) in out.iter_mut().zip(cur) {
        *o = *o * inv_dg - s2 * p;
    }
    checked_normalize(&mut out, iteration)?;
    Ok(out)
}

/// Unfolding initialization, σ handling, per-component refinement and re-sort.
pub fn tensor_pca(x: &Tensor3, r: usize, opts: &PowerOpts) -> Result<TpcaModel> {
    tensor_pca_with(x, r, opts, Execution::default())
}

pub fn tensor_pca_with(
    x: &Tensor3,
    r: usize,
    opts: &PowerOpts,
    exec: Execution,
) -> Result<TpcaModel> {
    opts.validate()?;
    let init = unfold_init(x, r)?;
    let sigma = match opts.sigma_mode {
        SigmaMode::Known(s) => s,
        SigmaMode::Estimate => estimate_sigma(x, &init)?,
    };
    let refined = exec
        .map(init.len(), |k| power_iterate(x, &init[k], sigma, opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..refined.len()).collect();
    // stable: ties keep the unfolding order
    order.sort_by(|&a, &b| {
        refined[b]
            .component
            .lambda
            .total_cmp(&refined[a].component.lambda)
    });
    Ok(TpcaModel {
        components: order
            .iter()
            .map(|&k| refined[k].component.clone())
            .collect(),
        sigma,
        rank: r,
        centering: Centering::None,
        iterations_used: order.iter().map(|&k| refined[k].iterations).collect(),
        converged: order.iter().map(|&k| refined[k].converged).collect(),
        variant: opts.variant,
    })
}

/// One factor of the pooled-matrix PCA baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledFactor {
    pub lambda: f64,
    pub loading: Vector,
    pub factor: Vector,
}

/// Classical PCA on the matrix pooled over `pool_mode` (3: average over
/// times, giving spatial factors; 2: average over regions, giving temporal
/// factors).
pub fn classical_pca_baseline(
    x: &Tensor3,
    r: usize,
    pool_mode: usize,
) -> Result<Vec<PooledFactor>> {
    if pool_mode != 2 && pool_mode != 3 {
        return Err(Error::InvalidArgument(format!(
            "pool_mode must be 2 or 3, got {pool_mode}"
        )));
    }
    let (dg, _, _) = x.dims();
    let d = x.dim(pool_mode);
    let ones = vec![1.0 / d as f64; d];
    let pooled = mode_product(x, &ones, pool_mode)?;
    let max = pooled.rows().min(pooled.cols());
    if r == 0 || r > max {
        return Err(Error::OutOfRange {
            what: "rank",
            value: r,
            min: 1,
            max,
        });
    }
    let svd = thin_svd(&pooled)?;
    let sqrt_dg = (dg as f64).sqrt();
    Ok((0..r)
        .map(|k| PooledFactor {
            lambda: svd.s[k] / sqrt_dg,
            loading: svd.u.column(k),
            factor: svd.v.column(k),
        })
        .collect())
}

/// First `kmax` values of `λ̂_k²` from the unfolding.
pub fn scree(x: &Tensor3, kmax: usize) -> Result<Vector> {
    check_rank(x, kmax)?;
    let dg = x.dim(1) as f64;
    let svd = thin_svd(&unfold1(x))?;
    Ok(svd.s[..kmax].iter().map(|s| s * s / dg).collect())
}

/// `d_G × r` matrix of per-gene scores `(X ×₂ v_k ×₃ w_k) / (√d_G λ_k)`.
pub fn loadings(x: &Tensor3, model: &TpcaModel) -> Result<Matrix> {
    component_loadings(x, &model.components)
}

/// [`loadings`] for an arbitrary list of components.
pub fn component_loadings(x: &Tensor3, components: &[Component]) -> Result<Matrix> {
    let (dg, ds, dt) = x.dims();
    let sqrt_dg = (dg as f64).sqrt();
    let mut cols = Vec::with_capacity(components.len());
    for (k, c) in components.iter().enumerate() {
        if c.v.len() != ds || c.w.len() != dt {
            return Err(Error::DimensionMismatch {
                op: "loadings",
                expected: format!("factors of length ({ds}, {dt})"),
                got: format!("({}, {})", c.v.len(), c.w.len()),
            });
        }
        if c.lambda == 0.0 || !c.lambda.is_finite() {
            return Err(Error::ZeroEigenvalue { component: k + 1 });
        }
        let s = mode_product_vec(x, &c.v, &c.w, (2, 3))?;
        cols.push(s.into_iter().map(|y| y / (sqrt_dg * c.lambda)).collect());
    }
    if cols.is_empty() {
        return Ok(Matrix::zeros(dg, 0));
    }
    Matrix::from_columns(&cols)
}
