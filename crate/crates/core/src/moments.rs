//! Quadratic-form representation of the sample moment function
//!
//! `θ̂_T(γ) = (1/T) Σ_t Z_t {(γᵀY_{t+1})² − ĉ(γ)}` is quadratic in `γ`:
//! its `j`-th entry equals `γᵀ Δ̂_j γ` with
//! `Δ̂_j = (1/T) Σ Z_t^{(j)} Y Yᵀ − ((1/T) Σ Z_t^{(j)}) ((1/T) Σ Y Yᵀ)`.
//! Stacking `vec(Δ̂_j)ᵀ` as rows gives `Ĝ`, so `θ̂_T(γ) = Ĝ vec(γγᵀ)` and
//! every evaluation costs `O(m k²)` regardless of `T`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::bootstrap::{resample_indices, BootstrapScheme};
use crate::error::{check_dim, validation, Error, Result};
use crate::simulate::PanelData;

/// Tolerance on `‖γ‖ − 1` accepted by [`SphereVec::new`].
pub const SPHERE_TOL: f64 = 1e-12;

/// A point on the unit sphere in `R^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereVec(Vec<f64>);

impl SphereVec {
    /// Wraps coordinates that already have unit norm.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return validation("sphere vector must have at least one coordinate");
        }
        let n = norm(&coords);
        if !n.is_finite() || (n - 1.0).abs() > SPHERE_TOL {
            return validation(format!("vector norm {n} is not 1"));
        }
        Ok(Self(coords))
    }

    /// Projects a nonzero vector onto the sphere.
    pub fn normalize(mut coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !(n.is_finite() && n > 0.0) {
            return validation("cannot normalize a zero or non-finite vector");
        }
        coords.iter_mut().for_each(|c| *c /= n);
        Ok(Self(coords))
    }

    pub(crate) fn from_unit_unchecked(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Weighting matrix of the GMM criterion.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    Identity,
    /// Symmetric positive-definite `m × m`, row-major.
    Matrix(Vec<f64>),
}

impl Weight {
    pub fn matrix(w: Vec<f64>, m: usize) -> Result<Self> {
        check_dim("weight entries (m*m)", m * m, w.len())?;
        for a in 0..m {
            for b in 0..a {
                let (x, y) = (w[a * m + b], w[b * m + a]);
                if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                    return validation("weight matrix is not symmetric");
                }
            }
        }
        if DMatrix::from_row_slice(m, m, &w).cholesky().is_none() {
            return validation("weight matrix is not positive definite");
        }
        Ok(Weight::Matrix(w))
    }

    /// `θᵀ W θ`.
    #[inline]
    pub fn quad(&self, theta: &[f64]) -> f64 {
        match self {
            Weight::Identity => theta.iter().map(|t| t * t).sum(),
            Weight::Matrix(w) => {
                let m = theta.len();
                let mut s = 0.0;
                for a in 0..m {
                    let row = &w[a * m..(a + 1) * m];
                    let inner: f64 = row.iter().zip(theta).map(|(x, t)| x * t).sum();
                    s += theta[a] * inner;
                }
                s
            }
        }
    }

    /// `W θ` written into `out`.
    #[inline]
    pub fn apply(&self, theta: &[f64], out: &mut [f64]) {
        match self {
            Weight::Identity => out.copy_from_slice(theta),
            Weight::Matrix(w) => {
                let m = theta.len();
                for a in 0..m {
                    out[a] = w[a * m..(a + 1) * m]
                        .iter()
                        .zip(theta)
                        .map(|(x, t)| x * t)
                        .sum();
                }
            }
        }
    }

    /// `xᵀ W y`.
    #[inline]
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Weight::Identity => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            Weight::Matrix(w) => {
                let m = x.len();
                let mut s = 0.0;
                for a in 0..m {
                    let wy: f64 = w[a * m..(a + 1) * m].iter().zip(y).map(|(p, q)| p * q).sum();
                    s += x[a] * wy;
                }
                s
            }
        }
    }

    pub fn dense(&self, m: usize) -> Vec<f64> {
        match self {
            Weight::Identity => {
                let mut w = vec![0.0; m * m];
                (0..m).for_each(|i| w[i * m + i] = 1.0);
                w
            }
            Weight::Matrix(w) => w.clone(),
        }
    }

    fn scaled(&self, s: f64, m: usize) -> Self {
        Weight::Matrix(self.dense(m).into_iter().map(|x| x * s).collect())
    }
}

/// The matrices `Δ̂_j` stacked as `Ĝ`, plus the weighting matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadMomentModel {
    k: usize,
    m: usize,
    /// `m × k²`, row `j` is `vec(Δ̂_j)ᵀ` (each `Δ̂_j` symmetric).
    g_mat: Vec<f64>,
    sample_size: usize,
    weight: Weight,
}

impl QuadMomentModel {
    /// Builds a model from explicit `Δ_j` blocks (`m` consecutive `k × k`
    /// row-major matrices). Used for hand-set and population models.
    pub fn from_deltas(
        k: usize,
        m: usize,
        deltas: Vec<f64>,
        sample_size: usize,
        weight: Weight,
    ) -> Result<Self> {
        if k == 0 || m == 0 {
            return validation("model needs k >= 1 and m >= 1");
        }
        check_dim("delta entries (m*k*k)", m * k * k, deltas.len())?;
        if deltas.iter().any(|d| !d.is_finite()) {
            return validation("delta matrices contain non-finite entries");
        }
        let mut g = deltas;
        for j in 0..m {
            let d = &mut g[j * k * k..(j + 1) * k * k];
            for a in 0..k {
                for b in 0..a {
                    let (x, y) = (d[a * k + b], d[b * k + a]);
                    if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                        return validation(format!("delta matrix {j} is not symmetric"));
                    }
                    d[a * k + b] = y;
                }
            }
        }
        if let Weight::Matrix(w) = &weight {
            Weight::matrix(w.clone(), m)?;
        }
        Ok(Self {
            k,
            m,
            g_mat: g,
            sample_size,
            weight,
        })
    }

    /// All-zero model of the given shape.
    pub fn zeros(k: usize, m: usize, sample_size: usize) -> Self {
        Self {
            k,
            m,
            g_mat: vec![0.0; m * k * k],
            sample_size,
            weight: Weight::Identity,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn sample_size(&self) -> usize {
        self.sample_size
    }
    pub fn weight(&self) -> &Weight {
        &self.weight
    }
    /// `Ĝ`, `m × k²` row-major.
    pub fn g_mat(&self) -> &[f64] {
        &self.g_mat
    }
    /// `Δ̂_j` as a `k × k` row-major block.
    pub fn delta(&self, j: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.g_mat[j * kk..(j + 1) * kk]
    }

    pub fn with_weight(mut self, weight: Weight) -> Result<Self> {
        if let Weight::Matrix(w) = &weight {
            Weight::matrix(w.clone(), self.m)?;
        }
        self.weight = weight;
        Ok(self)
    }

    /// Multiplies the weighting matrix by `s > 0`.
    pub fn with_scaled_weight(self, s: f64) -> Result<Self> {
        let w = self.weight.scaled(s, self.m);
        self.with_weight(w)
    }

    /// `θ(γ)` into `out` (length `m`). No dimension checks.
    #[inline]
    pub fn theta_into(&self, gamma: &[f64], out: &mut [f64]) {
        quad_forms(&self.g_mat, self.k, gamma, &mut out[..self.m]);
    }

    /// `θ(γ)ᵀ W θ(γ)` for raw coordinates, using `scratch` (length `m`).
    #[inline]
    pub fn phi_raw(&self, gamma: &[f64], scratch: &mut [f64]) -> f64 {
        let theta = &mut scratch[..self.m];
        self.theta_into(gamma, theta);
        self.weight.quad(theta)
    }

    /// Criterion value and Euclidean gradient `4 Σ_j (Wθ)_j Δ_j γ`.
    /// `scratch` needs length `2m`.
    pub fn phi_grad_raw(&self, gamma: &[f64], grad: &mut [f64], scratch: &mut [f64]) -> f64 {
        let (theta, rest) = scratch.split_at_mut(self.m);
        let wtheta = &mut rest[..self.m];
        self.theta_into(gamma, theta);
        self.weight.apply(theta, wtheta);
        let value: f64 = theta.iter().zip(wtheta.iter()).map(|(a, b)| a * b).sum();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (k, kk) = (self.k, self.k * self.k);
        for (j, &c) in wtheta.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let d = &self.g_mat[j * kk..(j + 1) * kk];
            for a in 0..k {
                let row = &d[a * k..(a + 1) * k];
                let dg: f64 = row.iter().zip(gamma).map(|(x, g)| x * g).sum();
                grad[a] += 4.0 * c * dg;
            }
        }
        value
    }

    /// `θ̂(γ) = Ĝ vec(γγᵀ)`.
    pub fn eval_theta(&self, gamma: &SphereVec) -> Result<Vec<f64>> {
        check_dim("gamma dimension (k)", self.k, gamma.dim())?;
        let mut out = vec![0.0; self.m];
        self.theta_into(gamma.coords(), &mut out);
        Ok(out)
    }

    /// `θ̂(γ)ᵀ W θ̂(γ)`.
    pub fn eval_phi(&self, gamma: &SphereVec) -> Result<f64> {
        check_dim("gamma dimension (k)", self.k, gamma.dim())?;
        let mut scratch = vec![0.0; self.m];
        Ok(self.phi_raw(gamma.coords(), &mut scratch))
    }

    /// `scale · (Ĝ_other − Ĝ_self)`: the coefficient matrix of the bootstrap
    /// direction `γ ↦ √T (θ̂*(γ) − θ̂(γ))` when `scale = √T`.
    pub fn scaled_difference(&self, other: &Self, scale: f64) -> Result<Vec<f64>> {
        self.check_compatible(other)?;
        Ok(self
            .g_mat
            .iter()
            .zip(&other.g_mat)
            .map(|(a, b)| scale * (b - a))
            .collect())
    }

    /// Model with `Ĝ + step · coeffs`, same weight and sample size.
    pub fn perturbed(&self, coeffs: &[f64], step: f64) -> Result<Self> {
        check_dim("direction coefficients (m*k*k)", self.g_mat.len(), coeffs.len())?;
        Ok(Self {
            g_mat: self
                .g_mat
                .iter()
                .zip(coeffs)
                .map(|(g, h)| g + step * h)
                .collect(),
            ..self.clone()
        })
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        check_dim("model k", self.k, other.k)?;
        check_dim("model m", self.m, other.m)?;
        check_dim("model sample size", self.sample_size, other.sample_size)?;
        Ok(())
    }
}

/// `out_j = γᵀ D_j γ` for `m` stacked `k × k` blocks in `g`.
#[inline]
pub(crate) fn quad_forms(g: &[f64], k: usize, gamma: &[f64], out: &mut [f64]) {
    let kk = k * k;
    for (j, o) in out.iter_mut().enumerate() {
        let d = &g[j * kk..(j + 1) * kk];
        let mut s = 0.0;
        for a in 0..k {
            let row = &d[a * k..(a + 1) * k];
            let inner: f64 = row.iter().zip(gamma).map(|(x, y)| x * y).sum();
            s += gamma[a] * inner;
        }
        *o = s;
    }
}

/// Fits `Δ̂_j` and `Ĝ` from a panel. `weight` defaults to the identity.
pub fn fit_quadratic_moments(panel: &PanelData, weight: Option<Weight>) -> Result<QuadMomentModel> {
    let weight = weight.unwrap_or(Weight::Identity);
    if let Weight::Matrix(w) = &weight {
        Weight::matrix(w.clone(), panel.m())?;
    }
    Ok(fit_rows(panel, 0..panel.rows(), weight))
}

/// Fits the model on the resampled rows `indices` (rows move as `(Z_t, Y_{t+1})` pairs).
pub fn fit_from_indices(
    panel: &PanelData,
    indices: &[usize],
    weight: Weight,
) -> Result<QuadMomentModel> {
    check_dim("resample length", panel.rows(), indices.len())?;
    if let Some(&bad) = indices.iter().find(|&&i| i >= panel.rows()) {
        return Err(Error::Validation(format!("resample index {bad} out of range")));
    }
    Ok(fit_rows(panel, indices.iter().copied(), weight))
}

/// Bootstrap analog `θ̂*`: resample rows per `scheme` and refit, recomputing
/// `ĉ*` from the resample.
pub fn bootstrap_model<R: Rng + ?Sized>(
    panel: &PanelData,
    scheme: &BootstrapScheme,
    weight: Weight,
    rng: &mut R,
) -> Result<QuadMomentModel> {
    let idx = resample_indices(scheme, panel.rows(), rng)?;
    Ok(fit_rows(panel, idx.into_iter(), weight))
}

fn fit_rows(panel: &PanelData, rows: impl Iterator<Item = usize>, weight: Weight) -> QuadMomentModel {
    let (k, m) = (panel.k(), panel.m());
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a..k).map(move |b| (a, b))).collect();
    let np = pairs.len();
    let mut szyy = vec![0.0; m * np];
    let mut syy = vec![0.0; np];
    let mut sz = vec![0.0; m];
    let mut yy = vec![0.0; np];
    let mut t_count = 0usize;
    for t in rows {
        let y = panel.y_row(t);
        let z = panel.z_row(t);
        for (p, &(a, b)) in pairs.iter().enumerate() {
            yy[p] = y[a] * y[b];
            syy[p] += yy[p];
        }
        for (j, &zj) in z.iter().enumerate() {
            sz[j] += zj;
            let acc = &mut szyy[j * np..(j + 1) * np];
            for (s, v) in acc.iter_mut().zip(&yy) {
                *s += zj * v;
            }
        }
        t_count += 1;
    }
    let tf = t_count as f64;
    let mut g = vec![0.0; m * k * k];
    for j in 0..m {
        let zbar = sz[j] / tf;
        let d = &mut g[j * k * k..(j + 1) * k * k];
        for (p, &(a, b)) in pairs.iter().enumerate() {
            let v = szyy[j * np + p] / tf - zbar * (syy[p] / tf);
            d[a * k + b] = v;
            d[b * k + a] = v;
        }
    }
    QuadMomentModel {
        k,
        m,
        g_mat: g,
        sample_size: t_count,
        weight,
    }
}

/// `θ̂_T(γ)` by direct summation over the panel. Test oracle for the
/// quadratic representation.
pub fn theta_direct(panel: &PanelData, gamma: &[f64]) -> Vec<f64> {
    let t = panel.rows() as f64;
    let proj = |row: &[f64]| -> f64 {
        let s: f64 = row.iter().zip(gamma).map(|(y, g)| y * g).sum();
        s * s
    };
    let c_hat = (0..panel.rows()).map(|i| proj(panel.y_row(i))).sum::<f64>() / t;
    let mut out = vec![0.0; panel.m()];
    for i in 0..panel.rows() {
        let e = proj(panel.y_row(i)) - c_hat;
        for (o, z) in out.iter_mut().zip(panel.z_row(i)) {
            *o += z * e;
        }
    }
    out.iter_mut().for_each(|o| *o /= t);
    out
}
