//! Thin SVD, Householder QR and seeded sampling.
//!
//! The SVD is one-sided Jacobi applied to the triangular factor of a
//! Householder QR of the tall orientation of the input. Wide inputs are
//! transposed first. Singular values come out nonincreasing and each right
//! singular vector is flipped so its largest-magnitude entry is positive
//! (lowest index wins ties); the left vector follows.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::{dot, norm, Matrix, Tensor3, Vector};

/// Maximum number of Jacobi sweeps before [`thin_svd`] gives up.
pub const SVD_MAX_SWEEPS: usize = 30;

/// Seedable 64-bit generator (ChaCha8). Child generators are derived from a
/// seed and a path of stream indices, so parallel callers never share state.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Generator for `seed` split along `path`, e.g. `(cell, run)`.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        let mut s = splitmix64(seed);
        for &p in path {
            s = splitmix64(s ^ splitmix64(p.wrapping_add(0x632b_e59b_d9b4_e019)));
        }
        Self::new(s)
    }

    /// Splits off an independent child stream, advancing `self`.
    pub fn split(&mut self) -> Self {
        let s = self.inner.next_u64();
        Self::derive(s, &[])
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` (n > 0).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire's widening multiply; bias is < 2^-64 · n, irrelevant here
        ((self.inner.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Householder reflectors of a tall matrix, stored column by column.
struct Householder {
    rows: usize,
    cols: usize,
    /// Column-major working copy: below-diagonal holds the reflector tails.
    a: Vec<f64>,
    /// `v_j = [1, a_{j+1..m, j}]`, reflector `I - tau_j v_j v_jᵀ`.
    tau: Vec<f64>,
}

impl Householder {
    fn factor(m: &Matrix) -> Self {
        let (rows, cols) = (m.rows(), m.cols());
        debug_assert!(rows >= cols);
        let mut a = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                a[j * rows + i] = m.get(i, j);
            }
        }
        let mut tau = vec![0.0; cols];
        for j in 0..cols {
            let (head, tail) = a.split_at_mut((j + 1) * rows);
            let col = &mut head[j * rows..];
            let alpha = col[j];
            let sigma = dot(&col[j + 1..], &col[j + 1..]);
            if sigma == 0.0 {
                tau[j] = 0.0;
                continue;
            }
            let mu = (alpha * alpha + sigma).sqrt();
            let beta = if alpha <= 0.0 {
                alpha - mu
            } else {
                -sigma / (alpha + mu)
            };
            tau[j] = 2.0 * beta * beta / (sigma + beta * beta);
            for x in &mut col[j + 1..] {
                *x /= beta;
            }
            col[j] = mu;
            let v = &col[j + 1..];
            for k in 0..cols - j - 1 {
                let other = &mut tail[k * rows..(k + 1) * rows];
                let s = tau[j] * (other[j] + dot(v, &other[j + 1..]));
                other[j] -= s;
                for (o, vi) in other[j + 1..].iter_mut().zip(v) {
                    *o -= s * vi;
                }
            }
        }
        Self { rows, cols, a, tau }
    }

    fn r(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.cols, |i, j| {
            if i <= j {
                self.a[j * self.rows + i]
            } else {
                0.0
            }
        })
    }

    /// Applies `Q` to the columns of an `cols × k` matrix embedded in `rows × k`.
    fn apply_q(&self, x: &Matrix) -> Matrix {
        let k = x.cols();
        // column-major work buffer
        let mut w = vec![0.0; self.rows * k];
        for i in 0..x.rows() {
            for c in 0..k {
                w[c * self.rows + i] = x.get(i, c);
            }
        }
        for j in (0..self.cols).rev() {
            if self.tau[j] == 0.0 {
                continue;
            }
            let v = &self.a[j * self.rows + j + 1..(j + 1) * self.rows];
            for c in 0..k {
                let col = &mut w[c * self.rows..(c + 1) * self.rows];
                let s = self.tau[j] * (col[j] + dot(v, &col[j + 1..]));
                col[j] -= s;
                for (o, vi) in col[j + 1..].iter_mut().zip(v) {
                    *o -= s * vi;
                }
            }
        }
        Matrix::from_fn(self.rows, k, |i, c| w[c * self.rows + i])
    }

    fn thin_q(&self) -> Matrix {
        let e = Matrix::from_fn(self.cols, self.cols, |i, j| if i == j { 1.0 } else { 0.0 });
        self.apply_q(&e)
    }
}

/// Thin QR of a tall matrix (`rows ≥ cols`) with `R`'s diagonal made
/// nonnegative by absorbing signs into `Q`.
pub fn qr_thin(a: &Matrix) -> Result<(Matrix, Matrix)> {
    if a.rows() < a.cols() {
        return Err(Error::InvalidArgument(format!(
            "qr_thin needs rows >= cols, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let h = Householder::factor(a);
    let mut q = h.thin_q();
    let mut r = h.r();
    for j in 0..r.rows() {
        if r.get(j, j) < 0.0 {
            q.negate_column(j);
            for c in 0..r.cols() {
                r.set(j, c, -r.get(j, c));
            }
        }
    }
    Ok((q, r))
}

#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows × p` left singular vectors, `p = min(rows, cols)`.
    pub u: Matrix,
    pub s: Vector,
    /// `cols × p` right singular vectors.
    pub v: Matrix,
    pub sweeps: usize,
}

/// Thin SVD `A = U diag(s) Vᵀ`.
pub fn thin_svd(a: &Matrix) -> Result<Svd> {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "thin_svd needs a nonempty matrix, got {m}x{n}"
        )));
    }
    if a.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("thin_svd: non-finite entry".into()));
    }
    let mut svd = if m >= n {
        svd_tall(a)?
    } else {
        let t = svd_tall(&a.transpose())?;
        Svd {
            u: t.v,
            s: t.s,
            v: t.u,
            sweeps: t.sweeps,
        }
    };
    canonicalize_signs(&mut svd);
    Ok(svd)
}

fn svd_tall(a: &Matrix) -> Result<Svd> {
    let n = a.cols();
    let h = Householder::factor(a);
    let r = h.r();

    // one-sided Jacobi on the columns of R, stored column-major
    // scaled to unit max entry so squared norms neither underflow nor overflow
    let amax = r.max_abs();
    let unscale = if amax > 0.0 { amax } else { 1.0 };
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[j * n + i] = r.get(i, j) / unscale;
        }
    }
    // columns below ε‖R‖_F are roundoff and are not rotated
    let negligible = (f64::EPSILON * f64::EPSILON) * w.iter().map(|x| x * x).sum::<f64>();
    let mut v = vec![0.0; n * n];
    for j in 0..n {
        v[j * n + j] = 1.0;
    }
    let tol = n as f64 * f64::EPSILON;
    let mut sweeps = 0;
    let mut converged = n == 1;
    let mut residual = 0.0;
    while !converged {
        if sweeps == SVD_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, residual });
        }
        sweeps += 1;
        residual = 0.0f64;
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (wp, wq) = column_pair(&mut w, n, p, q);
                let alpha = dot(wp, wp);
                let beta = dot(wq, wq);
                let gamma = dot(wp, wq);
                let scale = (alpha * beta).sqrt();
                if alpha <= negligible || beta <= negligible || gamma == 0.0 {
                    continue;
                }
                let off = gamma.abs() / scale;
                residual = residual.max(off);
                if off <= tol {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(wp, wq, c, s);
                let (vp, vq) = column_pair(&mut v, n, p, q);
                rotate(vp, vq, c, s);
            }
        }
        converged = !rotated;
    }

    let norms: Vec<f64> = (0..n).map(|j| norm(&w[j * n..(j + 1) * n])).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let smax = norms[order[0]];
    // left vectors of R, re-orthogonalized so null directions are completed
    let mut ur: Vec<Vector> = Vec::with_capacity(n);
    for &j in &order {
        let col = &w[j * n..(j + 1) * n];
        let cand: Vector = if norms[j] > smax * 1e-13 && norms[j] > 0.0 {
            col.iter().map(|x| x / norms[j]).collect()
        } else {
            vec![0.0; n]
        };
        ur.push(orthonormal_completion(&ur, cand, n));
    }
    let ur = Matrix::from_columns(&ur)?;
    let u = h.apply_q(&ur);
    let v = Matrix::from_fn(n, n, |i, c| v[order[c] * n + i]);
    let s: Vector = order.iter().map(|&j| norms[j] * unscale).collect();
    Ok(Svd { u, s, v, sweeps })
}

fn column_pair(buf: &mut [f64], n: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (lo, hi) = buf.split_at_mut(q * n);
    (&mut lo[p * n..(p + 1) * n], &mut hi[..n])
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Orthogonalizes `cand` against `basis` (twice); if little is left, the
/// first canonical vector with a usable residual replaces it.
fn orthonormal_completion(basis: &[Vector], cand: Vector, n: usize) -> Vector {
    let project_out = |mut x: Vector| {
        for _ in 0..2 {
            for b in basis {
                let d = dot(&x, b);
                for (xi, bi) in x.iter_mut().zip(b) {
                    *xi -= d * bi;
                }
            }
        }
        x
    };
    let x = project_out(cand);
    let nx = norm(&x);
    if nx > 0.5 {
        return x.into_iter().map(|v| v / nx).collect();
    }
    for e in 0..n {
        let mut ei = vec![0.0; n];
        ei[e] = 1.0;
        let x = project_out(ei);
        let nx = norm(&x);
        if nx > 0.5 {
            return x.into_iter().map(|v| v / nx).collect();
        }
    }
    unreachable!("basis of size {} cannot span R^{n}", basis.len())
}

/// Index of the largest-magnitude entry, lowest index on ties.
pub fn argmax_abs(x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in x.iter().enumerate() {
        match best {
            Some((_, b)) if v.abs() <= b => {}
            _ => best = Some((i, v.abs())),
        }
    }
    best.map(|(i, _)| i)
}

/// Flips `x` in place so its largest-magnitude entry is positive. Returns
/// whether a flip happened.
pub fn canonical_sign(x: &mut [f64]) -> bool {
    match argmax_abs(x) {
        Some(i) if x[i] < 0.0 => {
            x.iter_mut().for_each(|v| *v = -*v);
            true
        }
        _ => false,
    }
}

fn canonicalize_signs(svd: &mut Svd) {
    for c in 0..svd.v.cols() {
        let col = svd.v.column(c);
        if let Some(i) = argmax_abs(&col) {
            if col[i] < 0.0 {
                svd.v.negate_column(c);
                svd.u.negate_column(c);
            }
        }
    }
}

/// Leading `k` singular values and right singular vectors (`cols × k`).
pub fn top_k_right_singular(a: &Matrix, k: usize) -> Result<(Vector, Matrix)> {
    let p = a.rows().min(a.cols());
    if k == 0 || k > p {
        return Err(Error::OutOfRange {
            what: "k",
            value: k,
            min: 1,
            max: p,
        });
    }
    let svd = thin_svd(a)?;
    Ok((svd.s[..k].to_vec(), svd.v.first_columns(k)))
}

/// Uniform draw from the unit sphere in `R^d` as `Z / ‖Z‖`, `Z ~ N(0, I_d)`.
pub fn sample_unit_sphere(d: usize, rng: &mut SeededRng) -> Result<Vector> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "sample_unit_sphere needs d >= 1".into(),
        ));
    }
    loop {
        let z: Vector = (0..d).map(|_| rng.standard_normal()).collect();
        let nz = norm(&z);
        if nz >= 1e-300 {
            return Ok(z.into_iter().map(|x| x / nz).collect());
        }
    }
}

/// Haar-distributed `d × r` frame: QR of a Gaussian matrix, signs of `R`'s
/// diagonal absorbed into `Q`.
pub fn random_orthonormal(d: usize, r: usize, rng: &mut SeededRng) -> Result<Matrix> {
    if r > d {
        return Err(Error::OutOfRange {
            what: "r",
            value: r,
            min: 0,
            max: d,
        });
    }
    if r == 0 {
        return Ok(Matrix::zeros(d, 0));
    }
    let g = Matrix::from_fn(d, r, |_, _| rng.standard_normal());
    Ok(qr_thin(&g)?.0)
}

/// Tensor with i.i.d. `N(0, sd²)` entries drawn in storage order.
pub fn sample_gaussian_tensor(
    d1: usize,
    d2: usize,
    d3: usize,
    sd: f64,
    rng: &mut SeededRng,
) -> Result<Tensor3> {
    if !(sd >= 0.0) || !sd.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "standard deviation must be finite and >= 0, got {sd}"
        )));
    }
    if sd == 0.0 {
        return Ok(Tensor3::zeros(d1, d2, d3));
    }
    Ok(Tensor3::from_fn(d1, d2, d3, |_, _, _| {
        sd * rng.standard_normal()
    }))
}
