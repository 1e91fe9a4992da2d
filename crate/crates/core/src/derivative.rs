//! Estimators of the second-order directional derivative `φ''`.
//!
//! The structural estimator for the common-feature criterion is
//!
//! `φ̂''(h) = inf_{γ ∈ Γ̂_T} min_{‖v‖ ≤ r} ‖h(γ) + Ĝ vec(vvᵀ)‖²_W`.
//!
//! Writing `v = √s · u` with `‖u‖ = 1` and `s ∈ [0, r²]`, the inner objective
//! is a convex quadratic in `s` for fixed `u`, so `s` is profiled out in
//! closed form and only the direction `u` is searched: a precomputed grid of
//! directions followed by projected-gradient refinement of the best
//! candidates. `s = 0` (that is `v = 0`) is always feasible, so the estimate
//! never exceeds `‖h(γ)‖²_W`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, validation, Error, Result};
use crate::moments::{quad_forms, QuadMomentModel, SphereVec, Weight};
use crate::sphereopt::{
    descend, hemisphere_points, minimize_on_sphere_with, IdentifiedSetEstimate, SphereMinOptions,
    SphereObjective,
};

/// Number of grid candidates refined by local search in the structural
/// estimator.
pub const DEFAULT_INNER_STARTS: usize = 4;

/// Which derivative estimator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivKind {
    /// Structural estimator for the common-feature criterion (CF1).
    StructuralCh,
    /// Numerical differentiation (CF2).
    Numerical,
    ClosedFormSquaredMean,
    GmsMomentIneq,
    CvmKnown,
    JtestStructural,
}

impl DerivKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DerivKind::StructuralCh => "structural_ch",
            DerivKind::Numerical => "numerical",
            DerivKind::ClosedFormSquaredMean => "closed_form_squared_mean",
            DerivKind::GmsMomentIneq => "gms_moment_ineq",
            DerivKind::CvmKnown => "cvm_known",
            DerivKind::JtestStructural => "jtest_structural",
        }
    }
}

impl fmt::Display for DerivKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DerivKind {
    type Err = Error;

    /// Also accepts `structural`/`cf1` and `cf2`.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "structural_ch" | "structural" | "cf1" => DerivKind::StructuralCh,
            "numerical" | "cf2" => DerivKind::Numerical,
            "closed_form_squared_mean" => DerivKind::ClosedFormSquaredMean,
            "gms_moment_ineq" | "gms" => DerivKind::GmsMomentIneq,
            "cvm_known" | "cvm" => DerivKind::CvmKnown,
            "jtest_structural" | "jtest" => DerivKind::JtestStructural,
            other => return Err(Error::Parse(format!("unknown estimator kind '{other}'"))),
        })
    }
}

/// A derivative estimator together with its tuning constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivEstimator {
    pub kind: DerivKind,
    /// `κ_T` for the structural estimator and `Γ̂_T`.
    pub kappa: Option<f64>,
    /// `t_n` for numerical differentiation.
    pub step: Option<f64>,
    /// Radius of `B_T`; `κ^{-1/2}` when absent.
    pub radius: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        validation(format!("{name} must be positive and finite, got {v}"))
    }
}

impl DerivEstimator {
    pub fn structural(kappa: f64) -> Result<Self> {
        positive("kappa", kappa)?;
        Ok(Self {
            kind: DerivKind::StructuralCh,
            kappa: Some(kappa),
            step: None,
            radius: None,
        })
    }

    pub fn numerical(step: f64) -> Result<Self> {
        positive("step", step)?;
        Ok(Self {
            kind: DerivKind::Numerical,
            kappa: None,
            step: Some(step),
            radius: None,
        })
    }

    /// Estimator of `kind` whose tuning constants all come from one value.
    pub fn for_kind(kind: DerivKind, tuning: f64) -> Result<Self> {
        positive("tuning constant", tuning)?;
        Ok(Self {
            kind,
            kappa: Some(tuning),
            step: Some(tuning),
            radius: None,
        })
    }

    pub fn with_radius(mut self, radius: f64) -> Result<Self> {
        self.radius = Some(positive("radius", radius)?);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            DerivKind::StructuralCh => {
                self.kappa_value()?;
                self.radius()?;
            }
            DerivKind::Numerical => {
                self.step_value()?;
            }
            _ => {}
        }
        for (name, v) in [("kappa", self.kappa), ("step", self.step), ("radius", self.radius)] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        Ok(())
    }

    pub fn kappa_value(&self) -> Result<f64> {
        match self.kappa {
            Some(k) => positive("kappa", k),
            None => validation(format!("{} estimator requires kappa", self.kind)),
        }
    }

    pub fn step_value(&self) -> Result<f64> {
        match self.step {
            Some(s) => positive("step", s),
            None => validation(format!("{} estimator requires a step", self.kind)),
        }
    }

    /// Ball radius, `κ^{-1/2}` unless set explicitly.
    pub fn radius(&self) -> Result<f64> {
        match self.radius {
            Some(r) => positive("radius", r),
            None => Ok(self.kappa_value()?.powf(-0.5)),
        }
    }
}

/// A perturbation direction `γ ↦ h(γ) ∈ R^m`.
pub trait DirectionFn {
    fn k(&self) -> usize;
    fn m(&self) -> usize;
    fn eval_into(&self, gamma: &[f64], out: &mut [f64]);

    /// Whether `h(−γ) = h(γ)`. Lets callers skip antipodal duplicates.
    fn is_even(&self) -> bool {
        false
    }

    fn eval(&self, gamma: &SphereVec) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        self.eval_into(gamma.coords(), &mut out);
        out
    }
}

/// Quadratic direction `h(γ) = H vec(γγᵀ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadDirection {
    k: usize,
    m: usize,
    coeffs: Vec<f64>,
}

impl QuadDirection {
    /// `coeffs` holds `m` row-major `k × k` blocks; they are symmetrized.
    pub fn new(k: usize, m: usize, mut coeffs: Vec<f64>) -> Result<Self> {
        check_dim("direction coefficients (m*k*k)", m * k * k, coeffs.len())?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return validation("direction coefficients must be finite");
        }
        for j in 0..m {
            let d = &mut coeffs[j * k * k..(j + 1) * k * k];
            for a in 0..k {
                for b in 0..a {
                    let s = 0.5 * (d[a * k + b] + d[b * k + a]);
                    d[a * k + b] = s;
                    d[b * k + a] = s;
                }
            }
        }
        Ok(Self { k, m, coeffs })
    }

    pub fn zero(k: usize, m: usize) -> Self {
        Self {
            k,
            m,
            coeffs: vec![0.0; m * k * k],
        }
    }

    /// `√T (Ĝ* − Ĝ)`: the bootstrap direction.
    pub fn bootstrap(model: &QuadMomentModel, model_star: &QuadMomentModel) -> Result<Self> {
        let scale = (model.sample_size() as f64).sqrt();
        let coeffs = model.scaled_difference(model_star, scale)?;
        Ok(Self {
            k: model.k(),
            m: model.m(),
            coeffs,
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            ..self.clone()
        }
    }
}

impl DirectionFn for QuadDirection {
    fn k(&self) -> usize {
        self.k
    }
    fn m(&self) -> usize {
        self.m
    }
    fn eval_into(&self, gamma: &[f64], out: &mut [f64]) {
        quad_forms(&self.coeffs, self.k, gamma, out);
    }
    fn is_even(&self) -> bool {
        true
    }
}

/// Direction given by a closure.
pub struct FnDirection<F> {
    k: usize,
    m: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> FnDirection<F> {
    pub fn new(k: usize, m: usize, f: F) -> Self {
        Self { k, m, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> DirectionFn for FnDirection<F> {
    fn k(&self) -> usize {
        self.k
    }
    fn m(&self) -> usize {
        self.m
    }
    fn eval_into(&self, gamma: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&(self.f)(gamma));
    }
}

fn u_grid_size(k: usize) -> usize {
    match k {
        1 => 1,
        2 => 48,
        3 => 96,
        _ => 64 * k,
    }
}

/// Best `s ∈ [0, s_max]` for `min_s hᵀWh + 2 s c + s² a` and the attained value.
#[inline]
fn profile_s(hwh: f64, c: f64, a: f64, s_max: f64) -> (f64, f64) {
    let s = if a > 0.0 { (-c / a).clamp(0.0, s_max) } else if c < 0.0 { s_max } else { 0.0 };
    (s, hwh + 2.0 * s * c + s * s * a)
}

/// Profiled inner objective `u ↦ min_{s ∈ [0, r²]} ‖h + s Ĝ vec(uuᵀ)‖²_W`.
struct Profile<'a> {
    model: &'a QuadMomentModel,
    wh: &'a [f64],
    hwh: f64,
    s_max: f64,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl<'a> Profile<'a> {
    fn new(model: &'a QuadMomentModel, h: &[f64], wh: &'a [f64], s_max: f64) -> Self {
        let hwh = h.iter().zip(wh).map(|(a, b)| a * b).sum();
        Self {
            model,
            wh,
            hwh,
            s_max,
            scratch: std::cell::RefCell::new(vec![0.0; 3 * model.m()]),
        }
    }

    /// Returns `(value, s)`, leaving `q` and `Wq` in the scratch buffer.
    fn solve(&self, u: &[f64], scratch: &mut [f64]) -> (f64, f64) {
        let m = self.model.m();
        let (q, rest) = scratch.split_at_mut(m);
        let wq = &mut rest[..m];
        self.model.theta_into(u, q);
        self.model.weight().apply(q, wq);
        let c: f64 = self.wh.iter().zip(q.iter()).map(|(a, b)| a * b).sum();
        let a: f64 = q.iter().zip(wq.iter()).map(|(a, b)| a * b).sum();
        let (s, v) = profile_s(self.hwh, c, a, self.s_max);
        (v, s)
    }
}

impl SphereObjective for Profile<'_> {
    fn dim(&self) -> usize {
        self.model.k()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let mut sc = self.scratch.borrow_mut();
        self.solve(x, &mut sc).0
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut sc = self.scratch.borrow_mut();
        let (v, s) = self.solve(x, &mut sc);
        let m = self.model.m();
        let k = self.model.k();
        grad.iter_mut().for_each(|g| *g = 0.0);
        if s == 0.0 {
            return v;
        }
        // W (h + s q) = Wh + s Wq
        let (_, rest) = sc.split_at_mut(m);
        let (wq, _) = rest.split_at_mut(m);
        for (j, (wh, wq)) in self.wh.iter().zip(wq.iter()).enumerate() {
            let c = wh + s * wq;
            if c == 0.0 {
                continue;
            }
            let d = self.model.delta(j);
            for a in 0..k {
                let dg: f64 = d[a * k..(a + 1) * k].iter().zip(x).map(|(p, q)| p * q).sum();
                grad[a] += 4.0 * s * c * dg;
            }
        }
        v
    }
}

/// The structural estimator with everything that does not depend on `h`
/// precomputed, so it can be applied to many bootstrap directions.
pub struct StructuralCh<'a> {
    model: &'a QuadMomentModel,
    gammas: Vec<&'a SphereVec>,
    all_gammas: Vec<&'a SphereVec>,
    s_max: f64,
    inner_starts: usize,
    u_grid: Vec<f64>,
    /// `q_u = Ĝ vec(uuᵀ)` for each grid direction and `q_uᵀ W q_u`.
    q: Vec<f64>,
    qwq: Vec<f64>,
}

impl<'a> StructuralCh<'a> {
    pub fn new(
        model: &'a QuadMomentModel,
        gamma_set: &'a IdentifiedSetEstimate,
        est: &DerivEstimator,
        inner_starts: usize,
    ) -> Result<Self> {
        if est.kind != DerivKind::StructuralCh {
            return validation(format!("expected a structural_ch estimator, got {}", est.kind));
        }
        if gamma_set.is_empty() {
            return validation("identified set is empty");
        }
        let radius = est.radius()?;
        let k = model.k();
        let m = model.m();
        if let Some(p) = gamma_set.points.iter().find(|p| p.dim() != k) {
            check_dim("identified-set point dimension", k, p.dim())?;
        }
        let u_grid = hemisphere_points(k, u_grid_size(k));
        let n_u = u_grid.len() / k;
        let mut q = vec![0.0; n_u * m];
        let mut qwq = vec![0.0; n_u];
        let mut wqi = vec![0.0; m];
        for (i, u) in u_grid.chunks(k).enumerate() {
            let qi = &mut q[i * m..(i + 1) * m];
            model.theta_into(u, qi);
            model.weight().apply(qi, &mut wqi);
            qwq[i] = qi.iter().zip(&wqi).map(|(a, b)| a * b).sum();
        }
        Ok(Self {
            model,
            gammas: gamma_set.half_points().collect(),
            all_gammas: gamma_set.points.iter().collect(),
            s_max: radius * radius,
            inner_starts: inner_starts.max(1),
            u_grid,
            q,
            qwq,
        })
    }

    /// `φ̂''(h)`.
    pub fn eval<D: DirectionFn + ?Sized>(&self, h: &D) -> Result<f64> {
        let (k, m) = (self.model.k(), self.model.m());
        check_dim("direction k", k, h.k())?;
        check_dim("direction m", m, h.m())?;
        let gammas = if h.is_even() { &self.gammas } else { &self.all_gammas };
        let n_u = self.qwq.len();
        let mut hs = vec![0.0; gammas.len() * m];
        let mut whs = vec![0.0; gammas.len() * m];
        // (value, gamma index, u index)
        let mut cands: Vec<(f64, usize, usize)> = Vec::with_capacity(self.inner_starts + 1);
        for (g, gamma) in gammas.iter().enumerate() {
            let hg = &mut hs[g * m..(g + 1) * m];
            h.eval_into(gamma.coords(), hg);
            if hg.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("direction evaluated to a non-finite value".into()));
            }
            let whg = &mut whs[g * m..(g + 1) * m];
            self.model.weight().apply(hg, whg);
            let hwh: f64 = hg.iter().zip(whg.iter()).map(|(a, b)| a * b).sum();
            if hwh == 0.0 {
                return Ok(0.0);
            }
            for u in 0..n_u {
                let c: f64 = whg.iter().zip(&self.q[u * m..(u + 1) * m]).map(|(a, b)| a * b).sum();
                let (_, v) = profile_s(hwh, c, self.qwq[u], self.s_max);
                push_candidate(&mut cands, self.inner_starts, (v, g, u));
            }
        }
        let mut best = f64::INFINITY;
        for &(v0, g, u) in &cands {
            let hg = &hs[g * m..(g + 1) * m];
            let whg = &whs[g * m..(g + 1) * m];
            let prof = Profile::new(self.model, hg, whg, self.s_max);
            let d = descend(&prof, &self.u_grid[u * k..(u + 1) * k], 1e-12, 200);
            best = best.min(v0).min(d.value);
        }
        Ok(best.max(0.0))
    }
}

/// Keeps the `cap` smallest candidates, ordered by value then index.
fn push_candidate(cands: &mut Vec<(f64, usize, usize)>, cap: usize, c: (f64, usize, usize)) {
    if cands.len() == cap {
        let worst = cands[cap - 1];
        if c.0 >= worst.0 {
            return;
        }
        cands.pop();
    }
    let pos = cands.partition_point(|x| x.0 <= c.0);
    cands.insert(pos, c);
}

/// One-shot structural estimate. Prefer [`StructuralCh`] for repeated use.
pub fn structural_deriv_ch<D: DirectionFn + ?Sized>(
    model: &QuadMomentModel,
    gamma_set: &IdentifiedSetEstimate,
    est: &DerivEstimator,
    h: &D,
    inner_starts: usize,
) -> Result<f64> {
    StructuralCh::new(model, gamma_set, est, inner_starts)?.eval(h)
}

/// `(φ(t) − φ(0)) / t²`.
pub fn numerical_deriv<F: FnMut(f64) -> f64>(mut phi_at: F, step: f64) -> Result<f64> {
    positive("step", step)?;
    let base = phi_at(0.0);
    let moved = phi_at(step);
    Ok((moved - base) / (step * step))
}

/// Settings for the sphere minimization inside [`numerical_deriv_ch`].
#[derive(Debug, Clone)]
pub struct NumericalOptions {
    pub sphere: SphereMinOptions,
}

impl Default for NumericalOptions {
    fn default() -> Self {
        Self {
            sphere: SphereMinOptions {
                n_starts: 16,
                ..Default::default()
            },
        }
    }
}

/// Numerical-differentiation estimate for the common-feature criterion:
/// `[min_γ ‖(Ĝ + t H) vec(γγᵀ)‖²_W − φ̂] / t²`, warm-started at the
/// unperturbed minimizer. May be negative.
pub fn numerical_deriv_ch(
    model: &QuadMomentModel,
    phi_min: f64,
    minimizer: &SphereVec,
    h: &QuadDirection,
    step: f64,
    opts: &NumericalOptions,
) -> Result<f64> {
    positive("step", step)?;
    check_dim("direction k", model.k(), h.k)?;
    check_dim("direction m", model.m(), h.m)?;
    let moved = model.perturbed(h.coeffs(), step)?;
    let r = minimize_on_sphere_with(&moved, &opts.sphere, &[minimizer.coords()]);
    numerical_deriv(|t| if t == 0.0 { phi_min } else { r.value }, step)
}

/// `φ''(h) = h²` for `φ(θ) = θ²`.
pub fn closed_form_deriv_squared_mean(h: f64) -> f64 {
    h * h
}

/// Generalized-moment-selection estimate for `φ(θ) = max(θ, 0)²`.
pub fn gms_deriv_moment_ineq(xbar: f64, kappa_n: f64, h: f64) -> Result<f64> {
    positive("kappa_n", kappa_n)?;
    Ok(if xbar > kappa_n {
        h * h
    } else if xbar >= -kappa_n {
        let p = h.max(0.0);
        p * p
    } else {
        0.0
    })
}

/// `∫ h² dF₀` on a grid with probability weights.
pub fn cvm_deriv(h: &[f64], f0_weights: &[f64]) -> Result<f64> {
    check_dim("weights", h.len(), f0_weights.len())?;
    if f0_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return validation("weights must be nonnegative");
    }
    let total: f64 = f0_weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return validation(format!("weights must sum to 1, got {total}"));
    }
    Ok(h.iter().zip(f0_weights).map(|(x, w)| w * x * x).sum())
}

/// `min_{‖v‖ ≤ r} ‖b − A v‖²`, solved through the SVD of `A`.
pub fn ball_least_squares(a: &DMatrix<f64>, b: &DVector<f64>, radius: f64) -> Result<(DVector<f64>, f64)> {
    positive("radius", radius)?;
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    let vt = svd.v_t.as_ref().ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    let sig = &svd.singular_values;
    let smax = sig.iter().cloned().fold(0.0, f64::max);
    let tol = smax * (a.nrows().max(a.ncols()) as f64) * f64::EPSILON;
    let beta = u.transpose() * b;
    let active: Vec<usize> = (0..sig.len()).filter(|&i| sig[i] > tol).collect();
    let solve = |lambda: f64| -> DVector<f64> {
        let mut v = DVector::zeros(a.ncols());
        for &i in &active {
            let c = sig[i] * beta[i] / (sig[i] * sig[i] + lambda);
            v += vt.row(i).transpose() * c;
        }
        v
    };
    let mut v = solve(0.0);
    if v.norm() > radius {
        let mut lo = 0.0;
        let mut hi = active.iter().map(|&i| sig[i] * beta[i].abs()).sum::<f64>() / radius;
        while solve(hi).norm() > radius {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if solve(mid).norm() > radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        v = solve(hi);
    }
    let res = b - a * &v;
    Ok((v, res.norm_squared()))
}

/// Structural estimate for the GMM J-test functional:
/// `min_γ min_{‖v‖ ≤ r} (h(γ) − Ĵ(γ) v)ᵀ W (h(γ) − Ĵ(γ) v)`.
///
/// `jac_hat` returns an `m × k` row-major matrix and `h` an `m`-vector at
/// each point.
pub fn jtest_structural_deriv<J, H>(
    gamma_hat_set: &[Vec<f64>],
    jac_hat: J,
    weight: &Weight,
    radius: f64,
    h: H,
) -> Result<f64>
where
    J: Fn(&[f64]) -> Vec<f64>,
    H: Fn(&[f64]) -> Vec<f64>,
{
    if gamma_hat_set.is_empty() {
        return validation("point list must be nonempty");
    }
    positive("radius", radius)?;
    let mut best = f64::INFINITY;
    for g in gamma_hat_set {
        let hv = h(g);
        let m = hv.len();
        let jv = jac_hat(g);
        if m == 0 || !jv.len().is_multiple_of(m) {
            return validation("Jacobian size is not a multiple of m");
        }
        let k = jv.len() / m;
        let l = weight_factor(weight, m)?;
        let a = l.transpose() * DMatrix::from_row_slice(m, k, &jv);
        let b = l.transpose() * DVector::from_vec(hv);
        let (_, val) = ball_least_squares(&a, &b, radius)?;
        best = best.min(val);
    }
    Ok(best.max(0.0))
}

/// Lower Cholesky factor `L` with `W = L Lᵀ`.
fn weight_factor(weight: &Weight, m: usize) -> Result<DMatrix<f64>> {
    match weight {
        Weight::Identity => Ok(DMatrix::identity(m, m)),
        Weight::Matrix(w) => {
            check_dim("weight entries (m*m)", m * m, w.len())?;
            DMatrix::from_row_slice(m, m, w)
                .cholesky()
                .map(|c| c.l())
                .ok_or_else(|| Error::Validation("weight matrix is not positive definite".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::Weight;

    fn toy() -> QuadMomentModel {
        QuadMomentModel::from_deltas(2, 1, vec![1.0, 0.0, 0.0, -1.0], 100, Weight::Identity).unwrap()
    }

    fn single_point_set(g: &[f64], phi_min: f64) -> IdentifiedSetEstimate {
        IdentifiedSetEstimate::from_points(&[SphereVec::normalize(g.to_vec()).unwrap()], 0.01, phi_min).unwrap()
    }

    #[test]
    fn radius_defaults_to_inverse_sqrt_kappa() {
        let e = DerivEstimator::structural(0.25).unwrap();
        assert_eq!(e.radius().unwrap(), 2.0);
        assert_eq!(e.with_radius(3.0).unwrap().radius().unwrap(), 3.0);
        assert!(DerivEstimator::structural(0.0).is_err());
        assert!(DerivEstimator::numerical(-1.0).is_err());
        let bad = DerivEstimator {
            kind: DerivKind::StructuralCh,
            kappa: None,
            step: None,
            radius: None,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn kind_parsing() {
        for k in [
            DerivKind::StructuralCh,
            DerivKind::Numerical,
            DerivKind::ClosedFormSquaredMean,
            DerivKind::GmsMomentIneq,
            DerivKind::CvmKnown,
            DerivKind::JtestStructural,
        ] {
            assert_eq!(k.to_string().parse::<DerivKind>().unwrap(), k);
        }
        assert_eq!("CF1".parse::<DerivKind>().unwrap(), DerivKind::StructuralCh);
        assert!("bogus".parse::<DerivKind>().is_err());
    }

    #[test]
    fn zero_direction_gives_zero() {
        let m = toy();
        let set = single_point_set(&[1.0, -1.0], 0.0);
        let est = DerivEstimator::structural(0.1).unwrap();
        let v = structural_deriv_ch(&m, &set, &est, &QuadDirection::zero(2, 1), 4).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn zero_model_returns_norm_of_h() {
        let m = QuadMomentModel::zeros(2, 2, 100);
        let set = single_point_set(&[0.6, 0.8], 0.0);
        let h = FnDirection::new(2, 2, |_g: &[f64]| vec![1.5, -2.0]);
        let est = DerivEstimator::structural(0.1).unwrap();
        let v = structural_deriv_ch(&m, &set, &est, &h, 4).unwrap();
        assert!((v - 6.25).abs() < 1e-12);
    }

    #[test]
    fn large_ball_absorbs_reachable_direction() {
        let m = toy();
        let set = single_point_set(&[1.0, -1.0], 0.0);
        let h = FnDirection::new(2, 1, |_g: &[f64]| vec![-1.0]);
        let est = DerivEstimator::structural(0.01).unwrap();
        let v = structural_deriv_ch(&m, &set, &est, &h, 4).unwrap();
        assert!(v < 1e-20, "{v}");
    }

    #[test]
    fn small_ball_matches_closed_form() {
        // vᵀΔv ranges over [−r², r²]; with h = −1 and r² = 0.25 the best
        // residual is (−1 + 0.25)².
        let m = toy();
        let set = single_point_set(&[1.0, -1.0], 0.0);
        let h = FnDirection::new(2, 1, |_g: &[f64]| vec![-1.0]);
        let est = DerivEstimator::structural(0.01).unwrap().with_radius(0.5).unwrap();
        let v = structural_deriv_ch(&m, &set, &est, &h, 4).unwrap();
        assert!((v - 0.5625).abs() < 1e-12, "{v}");
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let m = toy();
        let set = single_point_set(&[1.0, 0.0], 1.0);
        let est = DerivEstimator::numerical(0.1).unwrap();
        assert!(StructuralCh::new(&m, &set, &est, 4).is_err());
    }

    #[test]
    fn numerical_deriv_examples() {
        // θ̂ = 0: (t h)² / t² = h²
        let h = 1.7;
        let v = numerical_deriv(|t| (t * h) * (t * h), 0.125).unwrap();
        assert_eq!(v, h * h);
        // θ̂ ≠ 0: 2θ̂h/t + h²
        let (th, t) = (0.3, 0.01);
        let v = numerical_deriv(|s| (th + s * h) * (th + s * h), t).unwrap();
        assert!((v - (2.0 * th * h / t + h * h)).abs() < 1e-9);
        assert_eq!(numerical_deriv(|_| 4.2, 0.1).unwrap(), 0.0);
        assert!(numerical_deriv(|_| 0.0, 0.0).is_err());
    }

    #[test]
    fn numerical_ch_is_zero_for_zero_direction() {
        let m = toy();
        let r = crate::sphereopt::minimize_on_sphere(&m, 32, 1e-12);
        let v = numerical_deriv_ch(&m, r.value, &r.minimizer, &QuadDirection::zero(2, 1), 0.1, &Default::default())
            .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn closed_forms() {
        assert_eq!(closed_form_deriv_squared_mean(0.0), 0.0);
        assert_eq!(closed_form_deriv_squared_mean(3.0), 9.0);
        assert_eq!(closed_form_deriv_squared_mean(-2.0), 4.0);
        assert_eq!(gms_deriv_moment_ineq(0.5, 0.1, -1.0).unwrap(), 1.0);
        assert_eq!(gms_deriv_moment_ineq(0.05, 0.1, -1.0).unwrap(), 0.0);
        assert_eq!(gms_deriv_moment_ineq(0.05, 0.1, 2.0).unwrap(), 4.0);
        assert_eq!(gms_deriv_moment_ineq(-0.5, 0.1, 7.0).unwrap(), 0.0);
        assert!(gms_deriv_moment_ineq(0.0, 0.0, 1.0).is_err());
        let w = vec![0.25; 4];
        assert_eq!(cvm_deriv(&[0.0; 4], &w).unwrap(), 0.0);
        assert_eq!(cvm_deriv(&[2.0; 4], &w).unwrap(), 4.0);
        assert_eq!(cvm_deriv(&[1.0, 1.0, 0.0, 0.0], &w).unwrap(), 0.5);
        assert!(cvm_deriv(&[1.0, 1.0], &[1.5, -0.5]).is_err());
        assert!(cvm_deriv(&[1.0, 1.0], &[0.3, 0.3]).is_err());
    }

    #[test]
    fn jtest_cases() {
        let pts = vec![vec![0.0]];
        let w = Weight::Identity;
        assert_eq!(jtest_structural_deriv(&pts, |_| vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0], &w, 5.0, |_| vec![0.0; 3]).unwrap(), 0.0);
        let v = jtest_structural_deriv(&pts, |_| vec![0.0; 6], &w, 5.0, |_| vec![1.0, 2.0, 2.0]).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        // projection residual: J = [e1 e2] in R^3 leaves the third coordinate
        let v = jtest_structural_deriv(&pts, |_| vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0], &w, 1e6, |_| vec![1.0, 2.0, 3.0])
            .unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        // a small ball: v = r e along (1, 2)/√5, residual = (√5 − r)² + 9
        let r = 0.5;
        let v = jtest_structural_deriv(&pts, |_| vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0], &w, r, |_| vec![1.0, 2.0, 3.0])
            .unwrap();
        assert!((v - ((5f64.sqrt() - r).powi(2) + 9.0)).abs() < 1e-10, "{v}");
        assert!(jtest_structural_deriv(&[], |_| vec![], &w, 1.0, |_| vec![]).is_err());
    }

    #[test]
    fn rank_deficient_jacobian_uses_minimum_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let (v, res) = ball_least_squares(&a, &b, 10.0).unwrap();
        assert!(res < 1e-20);
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
    }
}
