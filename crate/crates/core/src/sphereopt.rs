//! Minimization of `γ ↦ ‖θ̂(γ)‖²_W` over the unit sphere.
//!
//! The criterion is a smooth, even quartic in `γ`. Local search is a
//! projected (Riemannian) gradient method with Barzilai–Borwein step sizes,
//! Armijo backtracking and renormalization after each step. Global search
//! runs it from a deterministic low-discrepancy start set plus the best point
//! of a coarse grid. For `k ≤ 3` an exhaustive grid scan is available as a
//! brute-force oracle.
//!
//! The identified set `Γ̂_T = {γ : ‖θ̂(γ)‖² − φ(θ̂) ≤ κ²}` is represented by
//! the grid points that pass the slack, together with the global minimizer;
//! both members of every antipodal pair are kept.

use std::f64::consts::FRAC_PI_2;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{validation, Result};
use crate::moments::{QuadMomentModel, SphereVec};

/// Default number of multistart points.
pub const DEFAULT_STARTS: usize = 121;
/// Default tolerance on the norm of the projected gradient.
pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_ITER: usize = 1000;
const CAP_ITERS: usize = 50;

/// Outcome of a sphere minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereMinResult {
    pub minimizer: SphereVec,
    pub value: f64,
    pub starts_used: usize,
    pub converged: bool,
}

/// A smooth objective on the unit sphere.
pub trait SphereObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Value and Euclidean gradient.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Adapter exposing the criterion of a model as a [`SphereObjective`].
pub struct Criterion<'a> {
    model: &'a QuadMomentModel,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl<'a> Criterion<'a> {
    pub fn new(model: &'a QuadMomentModel) -> Self {
        Self {
            model,
            scratch: std::cell::RefCell::new(vec![0.0; 2 * model.m()]),
        }
    }
}

impl SphereObjective for Criterion<'_> {
    fn dim(&self) -> usize {
        self.model.k()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let mut s = self.scratch.borrow_mut();
        self.model.phi_raw(x, &mut s[..self.model.m()])
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut s = self.scratch.borrow_mut();
        self.model.phi_grad_raw(x, grad, &mut s)
    }
}

/// Result of one local descent.
#[derive(Debug, Clone)]
pub struct Descent {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iters: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize_in_place(x: &mut [f64]) {
    let n = dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= n);
}

fn tangent(x: &[f64], g: &[f64], out: &mut [f64]) {
    let c = dot(x, g);
    for ((o, gi), xi) in out.iter_mut().zip(g).zip(x) {
        *o = gi - c * xi;
    }
}

/// Projected-gradient descent on the sphere from `start`.
pub fn descend<O: SphereObjective + ?Sized>(obj: &O, start: &[f64], tol: f64, max_iter: usize) -> Descent {
    let k = obj.dim();
    let mut x = start.to_vec();
    normalize_in_place(&mut x);
    let mut g = vec![0.0; k];
    let mut gt = vec![0.0; k];
    let mut f = obj.value_grad(&x, &mut g);
    tangent(&x, &g, &mut gt);
    let mut gn = dot(&gt, &gt).sqrt();
    let mut eta = if gn > 0.0 { 0.1 / gn } else { 1.0 };
    let mut xn = vec![0.0; k];
    let mut gtn = vec![0.0; k];
    let mut converged = false;
    let mut stall = 0;
    let mut iters = 0;
    while iters < max_iter {
        if gn <= tol {
            converged = true;
            break;
        }
        iters += 1;
        let mut accepted = None;
        for _ in 0..80 {
            for i in 0..k {
                xn[i] = x[i] - eta * gt[i];
            }
            normalize_in_place(&mut xn);
            let fv = obj.value(&xn);
            if fv <= f - 1e-4 * eta * gn * gn {
                accepted = Some(fv);
                break;
            }
            eta *= 0.5;
            if eta * gn < 1e-17 {
                break;
            }
        }
        let Some(fnew) = accepted else {
            // No representable decrease left along the gradient.
            converged = gn <= tol.sqrt();
            break;
        };
        obj.value_grad(&xn, &mut g);
        tangent(&xn, &g, &mut gtn);
        let mut sy = 0.0;
        let mut ss = 0.0;
        for i in 0..k {
            let s = xn[i] - x[i];
            sy += s * (gtn[i] - gt[i]);
            ss += s * s;
        }
        eta = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { (eta * 4.0).min(1e12) };
        if (f - fnew).abs() <= 1e-15 * f.abs().max(1e-300) {
            stall += 1;
        } else {
            stall = 0;
        }
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut gt, &mut gtn);
        f = fnew;
        gn = dot(&gt, &gt).sqrt();
        if stall >= 3 {
            converged = true;
            break;
        }
    }
    if gn <= tol {
        converged = true;
    }
    Descent { x, value: f, converged, iters }
}

/// Lexicographically smaller of `x` and `−x`.
pub(crate) fn canonical_sign(x: &mut [f64]) {
    for &v in x.iter() {
        if v < 0.0 {
            return;
        }
        if v > 0.0 {
            x.iter_mut().for_each(|c| *c = -*c);
            return;
        }
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// `n` uniform angles on the half circle, `(cos t, sin t)` for `t = π i / n`.
pub fn half_circle(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let (s, c) = (std::f64::consts::PI * i as f64 / n as f64).sin_cos();
        out.push(c);
        out.push(s);
    }
    out
}

/// `n` Fibonacci-lattice points on the upper hemisphere of `S²`.
pub fn fibonacci_hemisphere(n: usize) -> Vec<f64> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let z = (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let (s, c) = (golden * i as f64).sin_cos();
        out.push(r * c);
        out.push(r * s);
        out.push(z);
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    inv = r;
    inv
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// `n` Halton points pushed through the normal quantile and normalized,
/// flipped so the last coordinate is nonnegative. Used for `k > 3`.
pub fn halton_hemisphere(n: usize, k: usize) -> Vec<f64> {
    let std_normal = Normal::standard();
    let mut out = Vec::with_capacity(k * n);
    let mut i = 1u64;
    while out.len() < k * n {
        let mut v: Vec<f64> = (0..k)
            .map(|d| std_normal.inverse_cdf(radical_inverse(i, PRIMES[d % PRIMES.len()])))
            .collect();
        i += 1;
        let nrm = dot(&v, &v).sqrt();
        if !(nrm.is_finite() && nrm > 1e-12) {
            continue;
        }
        let sign = if v[k - 1] < 0.0 { -1.0 } else { 1.0 };
        v.iter_mut().for_each(|c| *c *= sign / nrm);
        out.extend(v);
    }
    out
}

/// Deterministic point set covering every axis `±γ` once.
pub fn hemisphere_points(k: usize, n: usize) -> Vec<f64> {
    match k {
        1 => vec![1.0],
        2 => half_circle(n),
        3 => fibonacci_hemisphere(n),
        _ => halton_hemisphere(n, k),
    }
}

/// Typical angular distance between neighbouring points of
/// [`hemisphere_points`].
pub fn grid_spacing(k: usize, n: usize) -> f64 {
    match k {
        1 => std::f64::consts::PI,
        2 => std::f64::consts::PI / n as f64,
        3 => (2.0 * std::f64::consts::PI / n as f64).sqrt(),
        _ => {
            // surface of the unit hemisphere in R^k divided among n points
            let half_area = std::f64::consts::PI.powf(k as f64 / 2.0)
                / statrs::function::gamma::gamma(k as f64 / 2.0);
            (half_area / n as f64).powf(1.0 / (k as f64 - 1.0))
        }
    }
}

/// Default resolution of the grid behind the warm start and `Γ̂_T`.
pub fn default_resolution(k: usize) -> usize {
    match k {
        1 => 1,
        2 => 720,
        3 => 2000,
        _ => 4000,
    }
}

/// Multistart configuration.
#[derive(Debug, Clone)]
pub struct SphereMinOptions {
    pub n_starts: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Resolution of the coarse grid whose best point joins the starts.
    /// Zero disables it.
    pub grid_resolution: usize,
}

impl Default for SphereMinOptions {
    fn default() -> Self {
        Self {
            n_starts: DEFAULT_STARTS,
            tol: DEFAULT_TOL,
            max_iter: MAX_ITER,
            grid_resolution: usize::MAX,
        }
    }
}

impl SphereMinOptions {
    fn grid_for(&self, k: usize) -> usize {
        if self.grid_resolution == usize::MAX {
            default_resolution(k)
        } else {
            self.grid_resolution
        }
    }
}

/// Global minimum of the criterion over the sphere.
pub fn minimize_on_sphere(model: &QuadMomentModel, n_starts: usize, tol: f64) -> SphereMinResult {
    let opts = SphereMinOptions {
        n_starts: n_starts.max(1),
        tol,
        ..Default::default()
    };
    minimize_on_sphere_with(model, &opts, &[])
}

/// [`minimize_on_sphere`] with explicit options and extra warm starts.
pub fn minimize_on_sphere_with(
    model: &QuadMomentModel,
    opts: &SphereMinOptions,
    warm: &[&[f64]],
) -> SphereMinResult {
    let obj = Criterion::new(model);
    minimize_objective(&obj, opts, warm)
}

/// Multistart projected-gradient minimization of any sphere objective.
pub fn minimize_objective<O: SphereObjective + ?Sized>(
    obj: &O,
    opts: &SphereMinOptions,
    warm: &[&[f64]],
) -> SphereMinResult {
    let k = obj.dim();
    let mut starts: Vec<Vec<f64>> = warm.iter().map(|w| w.to_vec()).collect();
    let grid_n = if k <= 3 { opts.grid_for(k) } else { 0 };
    if grid_n > 0 {
        let grid = hemisphere_points(k, grid_n);
        let best = grid
            .chunks(k)
            .map(|p| (obj.value(p), p))
            .fold(None::<(f64, &[f64])>, |acc, (v, p)| match acc {
                Some((bv, _)) if bv <= v => acc,
                _ => Some((v, p)),
            });
        if let Some((_, p)) = best {
            starts.push(p.to_vec());
        }
    }
    let n_ld = opts.n_starts.saturating_sub(starts.len()).max(1);
    starts.extend(hemisphere_points(k, n_ld).chunks(k).map(|c| c.to_vec()));

    let mut best: Option<Descent> = None;
    for s in &starts {
        let mut d = descend(obj, s, opts.tol, opts.max_iter);
        canonical_sign(&mut d.x);
        let better = match &best {
            None => true,
            Some(b) => {
                let scale = b.value.abs().max(d.value.abs()).max(1e-300);
                if (d.value - b.value).abs() <= 1e-14 * scale {
                    lex_less(&d.x, &b.x)
                } else {
                    d.value < b.value
                }
            }
        };
        if better {
            best = Some(d);
        }
    }
    let best = best.expect("at least one start");
    let value = obj.value(&best.x);
    SphereMinResult {
        minimizer: SphereVec::from_unit_unchecked(best.x),
        value,
        starts_used: starts.len(),
        converged: best.converged,
    }
}

/// Exhaustive grid minimum (`k ∈ {2, 3}`): uniform half-circle angles for
/// `k = 2`, Fibonacci hemisphere points for `k = 3`.
pub fn grid_oracle_sphere(model: &QuadMomentModel, resolution: usize) -> Result<SphereMinResult> {
    let k = model.k();
    if !(k == 2 || k == 3) {
        return validation(format!("grid oracle supports k in {{2, 3}}, got k = {k}"));
    }
    if resolution < 100 {
        return validation(format!("grid resolution must be >= 100, got {resolution}"));
    }
    let mut scratch = vec![0.0; model.m()];
    let mut best_v = f64::INFINITY;
    let mut best_x = vec![0.0; k];
    let mut visit = |x: &[f64]| {
        let v = model.phi_raw(x, &mut scratch);
        if v < best_v {
            best_v = v;
            best_x.copy_from_slice(x);
        }
    };
    if k == 2 {
        for i in 0..resolution {
            let (s, c) = (std::f64::consts::PI * i as f64 / resolution as f64).sin_cos();
            visit(&[c, s]);
        }
    } else {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        for i in 0..resolution {
            let z = (i as f64 + 0.5) / resolution as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let (s, c) = (golden * i as f64).sin_cos();
            visit(&[r * c, r * s, z]);
        }
    }
    canonical_sign(&mut best_x);
    Ok(SphereMinResult {
        minimizer: SphereVec::from_unit_unchecked(best_x),
        value: best_v,
        starts_used: resolution,
        converged: true,
    })
}

/// Orthonormal basis of the tangent space at unit `x` (Gram–Schmidt on the
/// coordinate axes).
fn tangent_basis(x: &[f64]) -> Vec<Vec<f64>> {
    let k = x.len();
    let mut basis: Vec<Vec<f64>> = vec![x.to_vec()];
    for e in 0..k {
        let mut v = vec![0.0; k];
        v[e] = 1.0;
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= c * bi);
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|c| *c /= n);
            basis.push(v);
        }
        if basis.len() == k {
            break;
        }
    }
    basis.remove(0);
    basis
}

/// Projected gradient descent confined to the spherical cap of angular
/// radius `radius` around `start`.
pub fn refine_in_cap<O: SphereObjective + ?Sized>(obj: &O, start: &[f64], radius: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let k = obj.dim();
    let mut c = start.to_vec();
    normalize_in_place(&mut c);
    let cos_r = radius.cos();
    let clamp = |y: &mut [f64]| {
        let d = dot(y, &c);
        if d < cos_r {
            let mut u: Vec<f64> = y.iter().zip(&c).map(|(yi, ci)| yi - d * ci).collect();
            let n = dot(&u, &u).sqrt();
            if n > 0.0 {
                u.iter_mut().for_each(|ui| *ui /= n);
                let (sr, cr) = radius.sin_cos();
                y.iter_mut().zip(c.iter().zip(&u)).for_each(|(yi, (ci, ui))| *yi = cr * ci + sr * ui);
            }
        }
    };
    let mut x = c.clone();
    let mut g = vec![0.0; k];
    let mut gt = vec![0.0; k];
    let mut f = obj.value_grad(&x, &mut g);
    let mut xn = vec![0.0; k];
    let mut eta = 0.0;
    for _ in 0..max_iter {
        tangent(&x, &g, &mut gt);
        let gn = dot(&gt, &gt).sqrt();
        if gn == 0.0 {
            break;
        }
        if eta == 0.0 {
            eta = radius / gn;
        }
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..k {
                xn[i] = x[i] - eta * gt[i];
            }
            normalize_in_place(&mut xn);
            clamp(&mut xn);
            let fv = obj.value(&xn);
            if fv < f {
                f = fv;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
        std::mem::swap(&mut x, &mut xn);
        f = obj.value_grad(&x, &mut g);
        eta *= 2.0;
    }
    (x, f)
}

/// Derivative-free zoom search: evaluates a `(2n+1)^{k-1}` grid of tangent
/// offsets of half-width `width` around the incumbent and recentres on the
/// best point; the width shrinks only when the incumbent survives, until it
/// falls below `1e-12`.
pub fn zoom_refine(model: &QuadMomentModel, start: &[f64], width: f64) -> (Vec<f64>, f64) {
    const N: i64 = 5;
    let k = start.len();
    let mut scratch = vec![0.0; model.m()];
    let mut x = start.to_vec();
    normalize_in_place(&mut x);
    let mut fx = model.phi_raw(&x, &mut scratch);
    let mut w = width;
    let mut y = vec![0.0; k];
    let dims = k - 1;
    let mut rounds = 0;
    while w > 1e-12 && dims > 0 && rounds < 10_000 {
        rounds += 1;
        let basis = tangent_basis(&x);
        let mut best = (fx, x.clone());
        let total = (2 * N + 1).pow(dims as u32);
        for idx in 0..total {
            let mut rem = idx;
            y.copy_from_slice(&x);
            for b in &basis {
                let o = (rem % (2 * N + 1)) - N;
                rem /= 2 * N + 1;
                let step = w * o as f64 / N as f64;
                y.iter_mut().zip(b).for_each(|(yi, bi)| *yi += step * bi);
            }
            normalize_in_place(&mut y);
            let v = model.phi_raw(&y, &mut scratch);
            if v < best.0 {
                best = (v, y.clone());
            }
        }
        if best.0 < fx {
            fx = best.0;
            x = best.1;
        } else {
            w *= 2.0 / N as f64;
        }
    }
    canonical_sign(&mut x);
    (x, fx)
}

/// [`grid_oracle_sphere`] followed by [`zoom_refine`] from the best grid
/// points of distinct axes. Still evaluation-only, so it stays independent
/// of the gradient-based search.
pub fn grid_oracle_refined(model: &QuadMomentModel, resolution: usize, candidates: usize) -> Result<SphereMinResult> {
    let k = model.k();
    if !(k == 2 || k == 3) {
        return validation(format!("grid oracle supports k in {{2, 3}}, got k = {k}"));
    }
    if resolution < 100 {
        return validation(format!("grid resolution must be >= 100, got {resolution}"));
    }
    let grid = hemisphere_points(k, resolution);
    let mut scratch = vec![0.0; model.m()];
    let mut scored: Vec<(f64, usize)> = grid
        .chunks(k)
        .enumerate()
        .map(|(i, p)| (model.phi_raw(p, &mut scratch), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let spacing = grid_spacing(k, resolution);
    let mut picked: Vec<&[f64]> = Vec::new();
    for &(_, i) in &scored {
        let p = &grid[i * k..(i + 1) * k];
        if picked.iter().all(|q| dot(p, q).abs() < (4.0 * spacing).cos()) {
            picked.push(p);
            if picked.len() == candidates.max(1) {
                break;
            }
        }
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for p in picked {
        let (x, v) = zoom_refine(model, p, 2.0 * spacing);
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((x, v));
        }
    }
    let (x, value) = best.expect("nonempty grid");
    Ok(SphereMinResult {
        minimizer: SphereVec::from_unit_unchecked(x),
        value,
        starts_used: resolution,
        converged: true,
    })
}

/// Discretized estimate of the identified set.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedSetEstimate {
    /// Members of `Γ̂_T`, stored as antipodal pairs `[γ₀, −γ₀, γ₁, −γ₁, …]`;
    /// the first pair is the global minimizer.
    pub points: Vec<SphereVec>,
    /// `κ_T²`.
    pub threshold: f64,
    /// `φ(θ̂_T)`.
    pub phi_min: f64,
    /// Angular spacing of the grid the members were drawn from.
    pub spacing: f64,
    /// Whether the minimization behind `phi_min` converged.
    pub converged: bool,
}

impl IdentifiedSetEstimate {
    /// Set made of explicit points (each with its sign flip added).
    pub fn from_points(points: &[SphereVec], threshold: f64, phi_min: f64) -> Result<Self> {
        if points.is_empty() {
            return validation("identified set needs at least one point");
        }
        let k = points[0].dim();
        let mut out = Vec::with_capacity(2 * points.len());
        for p in points {
            if p.dim() != k {
                return validation("identified-set points have mixed dimensions");
            }
            out.push(p.clone());
            out.push(p.negated());
        }
        Ok(Self {
            points: out,
            threshold,
            phi_min,
            spacing: 0.0,
            converged: true,
        })
    }

    pub fn minimizer(&self) -> &SphereVec {
        &self.points[0]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One member of each antipodal pair.
    pub fn half_points(&self) -> impl Iterator<Item = &SphereVec> {
        self.points.iter().step_by(2)
    }
}

/// Estimates `Γ̂_T` with slack `κ²`. Grid points passing the slack are refined
/// within their own grid cell, then merged greedily: a point joins the set only
/// if it lies more than twice the grid spacing (as an axis) from every point
/// already kept. The global minimizer is kept first.
pub fn estimate_identified_set(
    model: &QuadMomentModel,
    kappa: f64,
    resolution: usize,
) -> Result<IdentifiedSetEstimate> {
    let min = minimize_on_sphere(model, DEFAULT_STARTS, DEFAULT_TOL);
    estimate_identified_set_from(model, &min, kappa, resolution)
}

/// [`estimate_identified_set`] reusing an existing global minimization.
pub fn estimate_identified_set_from(
    model: &QuadMomentModel,
    min: &SphereMinResult,
    kappa: f64,
    resolution: usize,
) -> Result<IdentifiedSetEstimate> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return validation(format!("kappa must be positive, got {kappa}"));
    }
    if resolution == 0 {
        return validation("identified-set resolution must be >= 1");
    }
    let k = model.k();
    let threshold = kappa * kappa;
    let phi_min = min.value;
    let spacing = grid_spacing(k, resolution);
    let obj = Criterion::new(model);
    let mut scratch = vec![0.0; model.m()];
    let mut members: Vec<(f64, Vec<f64>)> = Vec::new();
    for p in hemisphere_points(k, resolution).chunks(k) {
        let v = model.phi_raw(p, &mut scratch);
        if v - phi_min <= threshold {
            let (mut x, _) = refine_in_cap(&obj, p, spacing, CAP_ITERS);
            canonical_sign(&mut x);
            members.push((v, x));
        }
    }
    // Ordering by the unrefined value keeps the kept set monotone in kappa.
    members.sort_by(|a, b| a.0.total_cmp(&b.0));
    let cos_merge = (2.0 * spacing).min(FRAC_PI_2).cos();
    let mut reps: Vec<Vec<f64>> = vec![min.minimizer.coords().to_vec()];
    for (_, x) in members {
        if reps.iter().all(|r| dot(r, &x).abs() < cos_merge) {
            reps.push(x);
        }
    }
    let points = reps
        .into_iter()
        .flat_map(|r| {
            let v = SphereVec::from_unit_unchecked(r);
            let neg = v.negated();
            [v, neg]
        })
        .collect();
    Ok(IdentifiedSetEstimate {
        points,
        threshold,
        phi_min,
        spacing,
        converged: min.converged,
    })
}
