//! Synthetic data: Gaussian-GARCH(1,1) factor paths, the conditionally
//! heteroskedastic factor panel `Y_t = Λ F_t + U_t`, and iid scalar samples.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, validation, Error, Result};

/// Observations generated and discarded before a panel starts.
pub const PANEL_BURN_IN: usize = 100;

/// Default idiosyncratic variance, `U_t ~ N(0, I_k / 2)`.
pub const DEFAULT_IDIO_VAR: f64 = 0.5;

/// Parameters of `σ²_t = ω + α f²_t + β σ²_{t-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GarchParams {
    pub fn new(omega: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { omega, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { omega, alpha, beta } = *self;
        if !(omega.is_finite() && omega > 0.0) {
            return validation(format!("GARCH omega must be positive, got {omega}"));
        }
        // α = β = 0 is admitted: it is the constant-variance special case.
        if !(alpha.is_finite() && alpha >= 0.0 && beta.is_finite() && beta >= 0.0) {
            return validation(format!(
                "GARCH alpha and beta must be nonnegative, got ({alpha}, {beta})"
            ));
        }
        if alpha + beta >= 1.0 {
            return validation(format!(
                "GARCH process is not covariance stationary: alpha + beta = {} >= 1",
                alpha + beta
            ));
        }
        Ok(())
    }

    /// `ω / (1 − α − β)`.
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }
}

/// A factor-model design: `k` assets loading on `p` GARCH factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub name: String,
    pub k: usize,
    pub p: usize,
    /// `k × p` loadings, row-major.
    pub loadings: Vec<f64>,
    pub garch: Vec<GarchParams>,
    pub idio_var: f64,
}

impl DesignSpec {
    pub fn new(
        name: impl Into<String>,
        k: usize,
        p: usize,
        loadings: Vec<f64>,
        garch: Vec<GarchParams>,
        idio_var: f64,
    ) -> Result<Self> {
        let d = Self {
            name: name.into(),
            k,
            p,
            loadings,
            garch,
            idio_var,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.p == 0 {
            return validation("design needs k >= 1 assets and p >= 1 factors");
        }
        if self.p > self.k {
            return validation(format!(
                "loadings must have full column rank: p = {} exceeds k = {}",
                self.p, self.k
            ));
        }
        check_dim("loadings entries (k*p)", self.k * self.p, self.loadings.len())?;
        check_dim("GARCH parameter sets (p)", self.p, self.garch.len())?;
        for g in &self.garch {
            g.validate()?;
        }
        if !(self.idio_var.is_finite() && self.idio_var > 0.0) {
            return validation(format!(
                "idiosyncratic variance must be positive, got {}",
                self.idio_var
            ));
        }
        if self.loadings.iter().any(|x| !x.is_finite()) {
            return validation("loadings contain non-finite entries");
        }
        let lambda = DMatrix::from_row_slice(self.k, self.p, &self.loadings);
        let sv = lambda.singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let rank = sv.iter().filter(|&&s| s > 1e-10 * smax.max(1e-300)).count();
        if smax == 0.0 || rank < self.p {
            return validation(format!(
                "loadings must have full column rank {}, found rank {}",
                self.p,
                if smax == 0.0 { 0 } else { rank }
            ));
        }
        Ok(())
    }

    /// The simulation designs D1–D5.
    pub fn preset(name: &str) -> Result<Self> {
        let g1 = GarchParams { omega: 0.2, alpha: 0.2, beta: 0.6 };
        let g2 = GarchParams { omega: 0.2, alpha: 0.4, beta: 0.4 };
        let g3 = GarchParams { omega: 0.1, alpha: 0.1, beta: 0.8 };
        let upper = name.trim().to_ascii_uppercase();
        let (k, p, loadings, garch) = match upper.as_str() {
            "D1" => (2, 1, vec![1.0, 1.0], vec![g1]),
            "D2" => (2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![g1, g2]),
            "D3" => (3, 1, vec![1.0, 1.0, 1.0], vec![g1]),
            // columns (1,1,1) and (-1,0,1)
            "D4" => (3, 2, vec![1.0, -1.0, 1.0, 0.0, 1.0, 1.0], vec![g1, g2]),
            "D5" => (
                3,
                3,
                vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                vec![g1, g2, g3],
            ),
            _ => return validation(format!("unknown design preset '{name}' (expected D1..D5)")),
        };
        Self::new(upper, k, p, loadings, garch, DEFAULT_IDIO_VAR)
    }

    /// Loading matrix as an owned `k × p` matrix.
    pub fn loading_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.k, self.p, &self.loadings)
    }

    /// Dimension of the null space of `Λᵀ`, i.e. the number of linearly
    /// independent common features.
    pub fn common_feature_dim(&self) -> usize {
        self.k - self.p
    }
}

/// Aligned instrument/outcome rows: row `t` holds `(Z_t, Y_{t+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    t: usize,
    m: usize,
    k: usize,
    /// `T × m`, row-major.
    z: Vec<f64>,
    /// `T × k`, row-major.
    y: Vec<f64>,
}

impl PanelData {
    pub fn new(z: Vec<f64>, m: usize, y: Vec<f64>, k: usize) -> Result<Self> {
        if m == 0 || k == 0 {
            return validation("panel needs at least one instrument and one outcome column");
        }
        if !z.len().is_multiple_of(m) || !y.len().is_multiple_of(k) {
            return validation("panel buffers are not whole rows");
        }
        let t = y.len() / k;
        check_dim("instrument rows", t, z.len() / m)?;
        if t < 2 {
            return validation(format!("panel needs T >= 2 rows, got {t}"));
        }
        if z.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return validation("panel contains non-finite values");
        }
        Ok(Self { t, m, k, z, y })
    }

    pub fn rows(&self) -> usize {
        self.t
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn z(&self) -> &[f64] {
        &self.z
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    #[inline]
    pub fn z_row(&self, t: usize) -> &[f64] {
        &self.z[t * self.m..(t + 1) * self.m]
    }
    #[inline]
    pub fn y_row(&self, t: usize) -> &[f64] {
        &self.y[t * self.k..(t + 1) * self.k]
    }

    /// Same panel with every outcome multiplied by `s`.
    pub fn scale_outcomes(&self, s: f64) -> Self {
        Self {
            y: self.y.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// Same panel with every instrument replaced by `value`.
    pub fn with_constant_instruments(&self, value: f64) -> Self {
        Self {
            z: vec![value; self.z.len()],
            ..self.clone()
        }
    }

    /// Same panel with instrument columns reordered by `perm`.
    pub fn permute_instruments(&self, perm: &[usize]) -> Result<Self> {
        check_dim("instrument permutation", self.m, perm.len())?;
        let mut seen = vec![false; self.m];
        for &p in perm {
            if p >= self.m || seen[p] {
                return validation("not a permutation of the instrument columns");
            }
            seen[p] = true;
        }
        let mut z = Vec::with_capacity(self.z.len());
        for t in 0..self.t {
            let row = self.z_row(t);
            z.extend(perm.iter().map(|&p| row[p]));
        }
        Ok(Self { z, ..self.clone() })
    }
}

/// Simulates `length` draws of a Gaussian-GARCH(1,1) path after discarding
/// `burn_in` draws. The recursion starts at the unconditional variance.
pub fn simulate_garch_path<R: Rng + ?Sized>(
    params: &GarchParams,
    length: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    params.validate()?;
    if length == 0 {
        return validation("GARCH path length must be >= 1");
    }
    let mut out = Vec::with_capacity(length);
    let mut sigma2 = params.unconditional_variance();
    for i in 0..burn_in + length {
        let eps: f64 = StandardNormal.sample(rng);
        let f = sigma2.sqrt() * eps;
        if i >= burn_in {
            out.push(f);
        }
        sigma2 = params.omega + params.alpha * f * f + params.beta * sigma2;
    }
    Ok(out)
}

/// Simulates `horizon + 101` observations of `Y_t = Λ F_t + U_t`, drops the
/// first 100 and pairs `Z_t = (Y²_{1,t}, …, Y²_{k,t})` with `Y_{t+1}`.
pub fn simulate_ch_panel<R: Rng + ?Sized>(
    design: &DesignSpec,
    horizon: usize,
    rng: &mut R,
) -> Result<PanelData> {
    design.validate()?;
    if horizon < 2 {
        return validation(format!("horizon must be >= 2, got {horizon}"));
    }
    let (k, p) = (design.k, design.p);
    let total = horizon + 1 + PANEL_BURN_IN;
    let factors = design
        .garch
        .iter()
        .map(|g| simulate_garch_path(g, total, 0, rng))
        .collect::<Result<Vec<_>>>()?;
    let idio = Normal::new(0.0, design.idio_var.sqrt())
        .map_err(|e| Error::Validation(e.to_string()))?;

    let kept = horizon + 1;
    let mut ys = vec![0.0; kept * k];
    let mut row = vec![0.0; k];
    for s in 0..total {
        for (a, r) in row.iter_mut().enumerate() {
            let mut v = 0.0;
            for (j, f) in factors.iter().enumerate() {
                v += design.loadings[a * p + j] * f[s];
            }
            *r = v + idio.sample(rng);
        }
        if s >= PANEL_BURN_IN {
            let t = s - PANEL_BURN_IN;
            ys[t * k..(t + 1) * k].copy_from_slice(&row);
        }
    }

    let z: Vec<f64> = ys[..horizon * k].iter().map(|v| v * v).collect();
    let y = ys[k..].to_vec();
    PanelData::new(z, k, y, k)
}

/// `n` iid `N(mean, sd²)` draws.
pub fn simulate_scalar_iid<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(sd.is_finite() && sd > 0.0) {
        return validation(format!("standard deviation must be positive, got {sd}"));
    }
    if n == 0 {
        return validation("sample size must be >= 1");
    }
    let dist = Normal::new(mean, sd).map_err(|e| Error::Validation(e.to_string()))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}
